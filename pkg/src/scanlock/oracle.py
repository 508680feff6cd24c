"""The adversary-visible surface of one powered-on chip.

An Oracle wraps a ScanDesign plus hidden tpNVM content and exposes exactly
what the threat model allows: primary inputs/outputs, scan-in, scan-out
(masked when the architecture blocks it), control pins, power cycling, and
timed Test pulses for the glitch analysis. No response ever carries secret
bits directly; every observation flows through the locked logic or the scan
path the architecture permits, and every operation is counted in the query
log so attacks report measured costs.
"""

from __future__ import annotations

import enum
import json
from collections import Counter

from .errors import InvalidPins, UnsupportedForArch
from .locking import Key
from .scanarch import (
    ArchKind,
    ChipState,
    MASKED,
    ModePins,
    ScanDesign,
    clock_step,
    mode_name,
    power_on,
    read_po,
    set_pins,
    so_is_masked,
)
from .timingsim import DelayModel, pulse_outcome


class PulseOutcome(enum.Enum):
    SHIFT_HAPPENED = "ShiftHappened"
    NOTHING = "Nothing"
    TRIPPED = "Tripped"


class Oracle:
    """One logical device; operations are serialized per instance."""

    def __init__(
        self,
        design: ScanDesign,
        delay_model: DelayModel | None = None,
        record: bool = False,
    ):
        self.design = design
        self.delay_model = delay_model or DelayModel()
        self._tpnvm: Key = design.locked.secret_key  # hidden device content
        self.state: ChipState | None = None
        self.pi: dict[str, int] = {p: 0 for p in self._real_pis()}
        self.query_log: Counter = Counter()
        self.transcript: list | None = [] if record else None

    # -- public, non-secret design facts (netlist assumed reverse-engineered)

    @property
    def arch(self) -> ArchKind:
        return self.design.arch

    def chain_layout(self) -> tuple[tuple[tuple[str, object], ...], ...]:
        return self.design.chains

    def _real_pis(self) -> tuple[str, ...]:
        keys = set(self.design.locked.key_inputs)
        return tuple(p for p in self.design.locked.netlist.primary_inputs if p not in keys)

    def _log(self, op: str, args, result):
        self.query_log[op] += 1
        self.query_log["total"] += 1
        if self.transcript is not None:
            self.transcript.append(
                {"op": op, "args": args, "result": _jsonable(result)}
            )
        return result

    def _require_on(self) -> ChipState:
        if self.state is None:
            raise RuntimeError("chip is not powered on")
        return self.state

    # -- operations ---------------------------------------------------------

    def power_cycle(self, seed: int) -> None:
        """Power the chip up fresh. R-DFS boots through one functional-mode
        capture so the tpNVM key lands in the SCs; mR-DFS powers up with Test
        high and no key captured; kt-DFS leaves the trap storage random."""
        self.state = power_on(self.design, seed, self._tpnvm)
        self.pi = {p: 0 for p in self._real_pis()}
        if self.design.arch is ArchKind.R_DFS:
            clock_step(self.design, self.state, ModePins.r_dfs(0, 0), pi=self.pi)
        self._log("power_cycle", {"seed": seed}, None)

    def set_pi(self, bits: dict[str, int]) -> None:
        unknown = set(bits) - set(self.pi)
        if unknown:
            raise InvalidPins(f"not primary inputs: {sorted(unknown)}")
        self.pi.update(bits)
        self._log("set_pi", {"bits": dict(bits)}, None)

    def set_pins(self, pins: ModePins) -> None:
        """Clockless control-pin switch."""
        st = self._require_on()
        set_pins(self.design, st, pins)
        self._log("set_pins", {"pins": _pins_doc(pins)}, None)

    def clock(self, pins: ModePins, si_bits=None, ksi_bit: int = 0):
        """One clock edge; returns scan-out bits (or MASKED) on shift cycles."""
        st = self._require_on()
        _, so = clock_step(self.design, st, pins, si_bits, ksi_bit, pi=self.pi)
        self.query_log["clocks"] += 1
        if so is not None:
            self.query_log["shift_cycles"] += 1
        if self.design.arch is ArchKind.KT_DFS and mode_name(self.design.arch, pins) != "M2":
            self.query_log["key_shift_cycles"] += 1
        return self._log(
            "clock", {"pins": _pins_doc(pins), "si": si_bits, "ksi": ksi_bit}, so
        )

    def read_po(self) -> tuple[int, ...]:
        """Clockless combinational PO observation under the current pins."""
        st = self._require_on()
        return self._log("read_po", {}, read_po(self.design, st, self.pi))

    def read_so_masked(self) -> bool:
        st = self._require_on()
        return so_is_masked(self.design, st)

    def pulse_test(self, width_ps: int, si_bits=None) -> PulseOutcome:
        """Drive a timed pulse on the Test pin with SE held high and one
        externally supplied sys_clk edge inside it (mR-DFS only).

        The MSSD timing model decides the outcome: a pulse narrower than the
        glitch window performs one mixed-chain shift despite the blockage; a
        wide pulse trips the latch instead."""
        if self.design.arch is not ArchKind.MR_DFS:
            raise UnsupportedForArch("Test pulses only exist on mR-DFS")
        st = self._require_on()
        if st.pins.test != 0:
            raise InvalidPins("pulse requires Test currently low")
        outcome = pulse_outcome(self.delay_model, width_ps, mssd_q=int(st.mssd_q))
        self.query_log["clocks"] += 1
        if outcome == "trip":
            st.mssd_q = True
            result = PulseOutcome.TRIPPED
        elif outcome == "shift":
            from .scanarch import _shift_chains, _as_si_list  # one mixed shift

            si = _as_si_list(self.design, si_bits)
            st.cycle_count += 1
            _shift_chains(self.design, st, si, so_is_masked(self.design, st), mixed=True)
            st.hold_armed = True  # Test falls after the pulse: same as M2 -> M0
            self.query_log["shift_cycles"] += 1
            result = PulseOutcome.SHIFT_HAPPENED
        else:
            result = PulseOutcome.NOTHING
        return self._log("pulse_test", {"width_ps": width_ps, "si": si_bits}, result)

    def sys_rst(self) -> None:
        from .scanarch import sys_rst as _sys_rst

        st = self._require_on()
        _sys_rst(self.design, st)
        self._log("sys_rst", {}, None)

    # -- transcript ----------------------------------------------------------

    def save_transcript(self, path) -> None:
        if self.transcript is None:
            raise RuntimeError("oracle was not created with record=True")
        with open(path, "w") as fh:
            json.dump(self.transcript, fh, indent=1)
            fh.write("\n")


def _pins_doc(pins: ModePins) -> dict:
    return {
        k: v
        for k, v in (("test", pins.test), ("reg", pins.reg), ("se", pins.se), ("kse", pins.kse))
        if v is not None
    }


def _jsonable(value):
    if value is None or isinstance(value, (int, str, bool)):
        return value
    if isinstance(value, PulseOutcome):
        return value.value
    if isinstance(value, tuple):
        return ["MASKED" if v is MASKED else v for v in value]
    return str(value)


def replay_transcript(path, oracle: Oracle) -> int:
    """Re-execute a recorded transcript against a fresh oracle, asserting
    every response matches; returns the number of replayed operations."""
    with open(path) as fh:
        ops = json.load(fh)
    for i, entry in enumerate(ops):
        op, args = entry["op"], entry["args"]
        if op == "power_cycle":
            result = oracle.power_cycle(args["seed"])
        elif op == "set_pi":
            result = oracle.set_pi(args["bits"])
        elif op == "set_pins":
            result = oracle.set_pins(ModePins(**args["pins"]))
        elif op == "clock":
            result = oracle.clock(ModePins(**args["pins"]), args["si"], args["ksi"])
        elif op == "read_po":
            result = oracle.read_po()
        elif op == "pulse_test":
            result = oracle.pulse_test(args["width_ps"], args["si"])
        elif op == "sys_rst":
            result = oracle.sys_rst()
        else:
            raise ValueError(f"unknown transcript op {op}")
        if _jsonable(result) != entry["result"]:
            raise AssertionError(f"transcript divergence at step {i}: {op}")
    return len(ops)
