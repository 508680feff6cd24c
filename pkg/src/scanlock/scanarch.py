"""Scan-chain stitching and cycle-accurate state machines for four
architectures: open scan, R-DFS, mR-DFS, and kt-DFS.

Cell vocabulary: RC is an ordinary scan flip-flop holding functional state;
SC is the key-holding secure cell. R-DFS/mR-DFS stitch SCs into the RC
chains; kt-DFS keeps key storage on a separate chain with no scan-out, where
each one-way cell has a scan-connected FF1 and a trap FF2 that alone drives
the key net.

All mode semantics are table-driven per architecture:

  R-DFS / mR-DFS (Test, SE): (0,0)=M0 functional (SC captures the tpNVM key,
  RC captures), (0,1)=M1a (SC holds, RC shifts), (1,0)=M1b (SC holds, RC
  captures), (1,1)=M2 (SCs join the chain, everything shifts). mR-DFS gates
  every shift with SD = SE & Test & !mssd_q; the MSSD latch trips on the
  first positive Test edge after a key capture and only sys_rst clears it.
  mR-DFS also clock-gates RCs for one cycle after an M2-to-M0 switch.

  kt-DFS (REG, SE): (0,0)=M0 functional, (x,1)=M1/M3 shift, (1,0)=M2
  register mode (FF2 captures FF1, FF1 clears). The key chain shifts in
  every non-register mode, fed by KSI when KSE=1 and by the serial tpNVM
  stream when KSE=0; scan-out is masked for good once KSE=0 is seen.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field, replace

from .errors import InvalidPins, NoStateElements, UnsupportedForArch
from .locking import Key, LockedDesign
from .netlist import GE, eval_packed, gate_equivalents


class ArchKind(enum.Enum):
    OPEN_SCAN = "open"
    R_DFS = "r-dfs"
    MR_DFS = "mr-dfs"
    KT_DFS = "kt-dfs"


class _Masked:
    """Distinct observable for a blocked scan-out; never equal to 0/1."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MASKED"


MASKED = _Masked()

Cell = tuple[str, object]  # ("rc", q-net) or ("sc", key index)


@dataclass(frozen=True)
class ModePins:
    """Control-pin levels; which fields apply depends on the architecture."""

    test: int | None = None  # R-DFS / mR-DFS
    reg: int | None = None  # kt-DFS
    se: int = 0
    kse: int | None = None  # kt-DFS

    @classmethod
    def r_dfs(cls, test: int, se: int) -> "ModePins":
        return cls(test=test, se=se)

    @classmethod
    def kt(cls, reg: int, se: int, kse: int) -> "ModePins":
        return cls(reg=reg, se=se, kse=kse)

    @classmethod
    def open_scan(cls, se: int) -> "ModePins":
        return cls(se=se)


def check_pins(arch: ArchKind, pins: ModePins) -> None:
    def is_bit(v):
        return v in (0, 1)

    if arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        ok = is_bit(pins.test) and is_bit(pins.se) and pins.reg is None and pins.kse is None
    elif arch is ArchKind.KT_DFS:
        ok = is_bit(pins.reg) and is_bit(pins.se) and is_bit(pins.kse) and pins.test is None
    else:
        ok = is_bit(pins.se) and pins.test is None and pins.reg is None and pins.kse is None
    if not ok:
        raise InvalidPins(f"{pins} invalid for {arch.name}")


def mode_name(arch: ArchKind, pins: ModePins) -> str:
    if arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        return {(0, 0): "M0", (0, 1): "M1a", (1, 0): "M1b", (1, 1): "M2"}[
            (pins.test, pins.se)
        ]
    if arch is ArchKind.KT_DFS:
        return {(0, 0): "M0", (0, 1): "M1", (1, 0): "M2", (1, 1): "M3"}[
            (pins.reg, pins.se)
        ]
    return "shift" if pins.se else "capture"


@dataclass(eq=False)
class ScanDesign:
    locked: LockedDesign
    arch: ArchKind
    chains: tuple[tuple[Cell, ...], ...]  # scan chains; mixed cells for R/mR
    key_chain: tuple[int, ...]  # kt-DFS: key indices, head first; no scan-out
    num_chains: int
    seed: int = 0

    @property
    def rc_chain_order(self) -> tuple[tuple[str, ...], ...]:
        return tuple(
            tuple(q for kind, q in chain if kind == "rc") for chain in self.chains
        )

    @property
    def sc_positions(self) -> tuple[tuple[int, ...], ...]:
        """Per chain, the cell positions occupied by SCs (R-DFS/mR-DFS)."""
        return tuple(
            tuple(i for i, (kind, _) in enumerate(chain) if kind == "sc")
            for chain in self.chains
        )

    @property
    def key_size(self) -> int:
        return self.locked.key_size

    def chain_of_key(self, key_index: int) -> tuple[int, int]:
        """(chain index, cell position) of an SC in the mixed chains."""
        for ci, chain in enumerate(self.chains):
            for pos, cell in enumerate(chain):
                if cell == ("sc", key_index):
                    return ci, pos
        raise KeyError(key_index)


def _spread(rcs: list[Cell], scs: list[Cell]) -> list[Cell]:
    """Interleave SCs uniformly among RCs, keeping an RC at the tail."""
    if not scs:
        return list(rcs)
    out: list[Cell] = []
    r, s = len(rcs), len(scs)
    cut = [((j + 1) * r) // (s + 1) for j in range(s)]
    sc_iter = iter(scs)
    ci = 0
    for idx in range(r):
        while ci < s and cut[ci] <= idx:
            out.append(next(sc_iter))
            ci += 1
        out.append(rcs[idx])
    out.extend(sc_iter)  # only possible when r == 0
    return out


def build_scan_design(
    ld: LockedDesign, arch: ArchKind, num_chains: int = 1, seed: int = 0
) -> ScanDesign:
    """Stitch scan chains over a locked design.

    Deterministic for a fixed seed; chain lengths are balanced within one
    cell. R-DFS/mR-DFS interleave the SCs uniformly among the RCs of each
    chain; kt-DFS keeps a separate key chain.
    """
    if num_chains < 1:
        raise ValueError("num_chains must be >= 1")
    dffs = [q for q, _ in ld.netlist.dffs]
    if not dffs:
        raise NoStateElements(ld.netlist.name)
    rng = random.Random(seed)
    rc_order = list(dffs)
    rng.shuffle(rc_order)
    key_order = list(range(ld.key_size))
    rng.shuffle(key_order)
    rc_split = [rc_order[c::num_chains] for c in range(num_chains)]
    if arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        sc_split = [key_order[c::num_chains] for c in range(num_chains)]
        chains = tuple(
            tuple(
                _spread(
                    [("rc", q) for q in rc_split[c]],
                    [("sc", i) for i in sc_split[c]],
                )
            )
            for c in range(num_chains)
        )
        return ScanDesign(ld, arch, chains, (), num_chains, seed)
    chains = tuple(tuple(("rc", q) for q in part) for part in rc_split)
    key_chain = tuple(key_order) if arch is ArchKind.KT_DFS else ()
    return ScanDesign(ld, arch, chains, key_chain, num_chains, seed)


# ---------------------------------------------------------------------------
# Chip state

@dataclass
class ChipState:
    rc_values: dict[str, int]
    sc_ff1: list[int]  # kt FF1; the single SC storage for R/mR; open-scan bank
    sc_ff2: list[int]  # kt trap storage only
    temp_regs: list[int]  # R/mR temporary key registers
    temp_valid: bool
    tpnvm: tuple[int, ...]  # device-held secret bit source (not observable)
    pins: ModePins
    key_loaded: bool = False
    so_blocked: bool = False
    mssd_q: bool = False
    hold_armed: bool = False  # mR one-cycle clock gate after M2 -> M0
    nvm_ptr: int = 0  # kt serial stream position
    nvm_run: int = 0  # consecutive KSE=0 key-chain shifts
    cycle_count: int = 0
    tpnvm_load_count: int = 0
    rng_seed: int = 0
    # manufacturing defect under simulation: (stem forces, per-gate-input
    # forces, captured-value forces per q-net, observed-PO forces)
    fault_forces: tuple | None = None


def _boot_pins(arch: ArchKind) -> ModePins:
    if arch in (ArchKind.R_DFS,):
        return ModePins.r_dfs(0, 0)
    if arch is ArchKind.MR_DFS:
        return ModePins.r_dfs(1, 0)  # Test high during power on
    if arch is ArchKind.KT_DFS:
        return ModePins.kt(0, 0, 1)
    return ModePins.open_scan(0)


def power_on(sd: ScanDesign, seed: int, tpnvm: Key) -> ChipState:
    """Fresh power cycle: RCs zero, key storage per architecture, counters
    zeroed. kt-DFS trap storage powers up random from the seed."""
    if len(tpnvm) != sd.key_size:
        raise ValueError("tpNVM content must match key size")
    rng = random.Random(seed)
    k = sd.key_size
    st = ChipState(
        rc_values={q: 0 for q, _ in sd.locked.netlist.dffs},
        sc_ff1=[0] * k,
        sc_ff2=[],
        temp_regs=[],
        temp_valid=False,
        tpnvm=tuple(tpnvm.bits),
        pins=_boot_pins(sd.arch),
        rng_seed=seed,
    )
    if sd.arch is ArchKind.KT_DFS:
        st.sc_ff2 = [rng.randrange(2) for _ in range(k)]
    elif sd.arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        st.temp_regs = list(tpnvm.bits)  # power-on tpNVM fetch
        st.temp_valid = True
        st.tpnvm_load_count = 1
    else:  # open scan: plain register bank loaded at power on
        st.sc_ff1 = list(tpnvm.bits)
        st.key_loaded = True
        st.tpnvm_load_count = 1
    return st


def _key_net_values(sd: ScanDesign, st: ChipState) -> dict[str, int]:
    source = st.sc_ff2 if sd.arch is ArchKind.KT_DFS else st.sc_ff1
    return {name: source[i] for i, name in enumerate(sd.locked.key_inputs)}


def _comb_assign(sd: ScanDesign, st: ChipState, pi: dict[str, int] | None) -> dict[str, int]:
    n = sd.locked.netlist
    assign = {p: 0 for p in n.primary_inputs}
    if pi:
        assign.update(pi)
    assign.update(_key_net_values(sd, st))
    assign.update(st.rc_values)
    return assign


def _faulty_eval(sd: ScanDesign, st: ChipState, pi) -> dict[str, int]:
    stem, branch, _dff, _po = st.fault_forces or (None, None, {}, {})
    return eval_packed(sd.locked.netlist, _comb_assign(sd, st, pi), 1, stem, branch)


def read_po(sd: ScanDesign, st: ChipState, pi: dict[str, int] | None = None) -> tuple[int, ...]:
    """Clockless combinational PO readout under the current state."""
    n = sd.locked.netlist
    values = _faulty_eval(sd, st, pi)
    po_force = (st.fault_forces or (None, None, {}, {}))[3]
    return tuple(po_force.get(p, values[p]) for p in n.primary_outputs)


def so_is_masked(sd: ScanDesign, st: ChipState) -> bool:
    if sd.arch is ArchKind.OPEN_SCAN:
        return False
    if sd.arch is ArchKind.MR_DFS:
        return st.key_loaded  # masked while the real key sits in the SCs
    return st.so_blocked


def set_pins(sd: ScanDesign, st: ChipState, pins: ModePins) -> ChipState:
    """Apply control-pin levels without a clock edge.

    Pin transitions drive the sticky blockage state: R-DFS masks SO on
    entering M2 after a key load, the mR-DFS MSSD latch trips on a positive
    Test edge after a key capture, kt-DFS masks SO once KSE goes low, and
    the mR-DFS one-cycle clock gate arms on an M2 to M0 switch.
    """
    check_pins(sd.arch, pins)
    old = st.pins
    if sd.arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        if sd.arch is ArchKind.MR_DFS:
            if old.test == 0 and pins.test == 1 and st.key_loaded:
                st.mssd_q = True
            if (old.test, old.se) == (1, 1) and (pins.test, pins.se) == (0, 0):
                st.hold_armed = True
        if pins.test == 1 and pins.se == 1 and st.key_loaded:
            st.so_blocked = True
    elif sd.arch is ArchKind.KT_DFS:
        if pins.kse == 0:
            st.so_blocked = True
    st.pins = pins
    return st


def _shift(values: list[int], si: int) -> tuple[list[int], int]:
    so = values[-1]
    return [si] + values[:-1], so


def _capture_rcs(sd: ScanDesign, st: ChipState, pi) -> None:
    n = sd.locked.netlist
    values = _faulty_eval(sd, st, pi)
    dff_force = (st.fault_forces or (None, None, {}, {}))[2]
    st.rc_values = {q: dff_force.get(q, values[d]) for q, d in n.dffs}


def _as_si_list(sd: ScanDesign, si_bits) -> list[int]:
    if si_bits is None:
        return [0] * sd.num_chains
    if isinstance(si_bits, int):
        return [si_bits] * sd.num_chains
    si = list(si_bits)
    if len(si) != sd.num_chains:
        raise ValueError(f"need {sd.num_chains} scan-in bits, got {len(si)}")
    return si


def clock_step(
    sd: ScanDesign,
    st: ChipState,
    pins: ModePins,
    si_bits=None,
    ksi_bit: int = 0,
    pi: dict[str, int] | None = None,
):
    """One rising clock edge under the given pins.

    Returns (state, so_bits) where so_bits is a per-chain tuple of shifted
    out bits (MASKED entries while the scan-out is blocked) on cycles where
    the RC-side chains shifted, and None on capture cycles.
    """
    set_pins(sd, st, pins)
    si = _as_si_list(sd, si_bits)
    st.cycle_count += 1
    masked = so_is_masked(sd, st)
    arch = sd.arch

    if arch is ArchKind.OPEN_SCAN:
        if pins.se:
            return st, _shift_chains(sd, st, si, masked, mixed=False)
        _capture_rcs(sd, st, pi)
        return st, None

    if arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        mode = mode_name(arch, pins)
        shift_enabled = True
        if arch is ArchKind.MR_DFS:
            # SD = SE & Test & !Q; outside M2 or after the trip nothing shifts
            shift_enabled = pins.se == 1 and pins.test == 1 and not st.mssd_q
        if mode == "M0":
            hold = arch is ArchKind.MR_DFS and st.hold_armed
            if not st.temp_valid:  # refetch after sys_rst cleared the registers
                st.temp_regs = list(st.tpnvm)
                st.temp_valid = True
                st.tpnvm_load_count += 1
            if not hold:
                _capture_rcs(sd, st, pi)
            st.sc_ff1 = list(st.temp_regs)
            st.key_loaded = True
            st.hold_armed = False
            return st, None
        st.hold_armed = False
        if mode == "M1b":
            _capture_rcs(sd, st, pi)
            return st, None
        if mode == "M1a":
            if arch is ArchKind.MR_DFS:  # SD low: the commanded shift is gated off
                return st, None
            return st, _shift_chains(sd, st, si, masked, mixed=False)
        # M2
        if not shift_enabled:  # mR-DFS only: blocked shift holds all state
            return st, None
        return st, _shift_chains(sd, st, si, masked, mixed=True)

    # kt-DFS
    mode = mode_name(arch, pins)
    if mode != "M2":
        _shift_key_chain(sd, st, pins, ksi_bit)
    so = None
    if pins.se:
        so = _shift_chains(sd, st, si, masked, mixed=False)
    else:
        _capture_rcs(sd, st, pi)  # reads pre-edge FF2 values
        if mode == "M2":
            st.sc_ff2 = list(st.sc_ff1)  # trap captures before FF1 clears
            st.sc_ff1 = [0] * sd.key_size
            st.key_loaded = True
    return st, so


def _shift_chains(sd, st, si, masked, mixed: bool):
    outs = []
    for ci, chain in enumerate(sd.chains):
        cells = [c for c in chain if mixed or c[0] == "rc"]
        vals = [st.rc_values[q] if kind == "rc" else st.sc_ff1[q] for kind, q in cells]
        new, so = _shift(vals, si[ci])
        for (kind, q), v in zip(cells, new):
            if kind == "rc":
                st.rc_values[q] = v
            else:
                st.sc_ff1[q] = v
        outs.append(MASKED if masked else so)
    return tuple(outs)


def _shift_key_chain(sd, st, pins, ksi_bit) -> None:
    k = sd.key_size
    if k == 0:
        return
    if pins.kse:
        src = ksi_bit
        st.nvm_ptr = 0
        st.nvm_run = 0
    else:
        # serial tpNVM stream, emitted in reverse chain order so that a full
        # K-cycle run leaves every FF1 holding its own key bit
        src = st.tpnvm[sd.key_chain[k - 1 - st.nvm_ptr]]
        st.nvm_ptr = (st.nvm_ptr + 1) % k
        st.nvm_run += 1
        if st.nvm_run == k:
            st.tpnvm_load_count += 1
            st.nvm_run = 0
    order = list(sd.key_chain)
    vals = [st.sc_ff1[i] for i in order]
    vals = [src] + vals[:-1]  # tail falls off: the key chain has no scan-out
    for i, v in zip(order, vals):
        st.sc_ff1[i] = v


def sys_rst(sd: ScanDesign, st: ChipState) -> ChipState:
    """mR-DFS system reset: clears every storage element including SCs and
    the temporary key registers; accounting counters survive."""
    if sd.arch is not ArchKind.MR_DFS:
        raise UnsupportedForArch(f"sys_rst is not part of {sd.arch.name} flows")
    st.rc_values = {q: 0 for q in st.rc_values}
    st.sc_ff1 = [0] * len(st.sc_ff1)
    st.temp_regs = [0] * len(st.temp_regs)
    st.temp_valid = False
    st.mssd_q = False
    st.key_loaded = False
    st.so_blocked = False
    st.hold_armed = False
    return st


# ---------------------------------------------------------------------------
# Area accounting (NAND2-equivalent units)

RC_CELL_GE = GE["DFF"] + GE["MUX21"]
SC_CELL_GE = GE["DFF"] + GE["MUX41"]
TEMP_REG_GE = GE["DFF"] + GE["MUX21"]  # shifts from tpNVM at boot, holds after
SC_ISOLATION_GE = GE["DFF_RST"] + GE["AND"] + GE["NOT"]  # per-SC scan-out gating (R-DFS)
ONE_WAY_CELL_GE = GE["DFF_RST"] + GE["DFF"] + GE["AND"] + GE["NOT"]  # FF1+FF2
MSSD_GE = GE["DFF_RST"] + 2 * GE["AND"] + GE["NOR"] + 2 * GE["NOT"] + 10 * GE["NOT"]
SO_MASK_GE = GE["AND"] + GE["NOT"]  # per chain
BLOCK_LATCH_GE = GE["DFF_RST"]  # per design sticky latch
KEY_SOURCE_MUX_GE = GE["MUX21"]  # per key chain: tpNVM vs KSI select


def scan_additions_ge(sd: ScanDesign) -> float:
    """GE of all scan/security hardware beyond the plain DFF bank."""
    d = len(sd.locked.netlist.dffs)
    k = sd.key_size
    c = sd.num_chains
    total = d * (RC_CELL_GE - GE["DFF"])
    if k == 0:
        return total
    if sd.arch is ArchKind.OPEN_SCAN:
        return total + k * GE["DFF"]
    if sd.arch is ArchKind.R_DFS:
        return total + k * (SC_CELL_GE + TEMP_REG_GE + SC_ISOLATION_GE) + c * SO_MASK_GE
    if sd.arch is ArchKind.MR_DFS:
        return (
            total
            + k * (SC_CELL_GE + TEMP_REG_GE)
            + MSSD_GE
            + BLOCK_LATCH_GE
            + c * SO_MASK_GE
        )
    return (
        total
        + k * ONE_WAY_CELL_GE
        + KEY_SOURCE_MUX_GE
        + BLOCK_LATCH_GE
        + c * SO_MASK_GE
    )


def area_overhead(sd: ScanDesign) -> float:
    """Scan/security additions relative to the design's GE, in percent."""
    return 100.0 * scan_additions_ge(sd) / gate_equivalents(sd.locked.netlist)


# ---------------------------------------------------------------------------
# Serialization

def design_to_json(sd: ScanDesign) -> str:
    doc = {
        "arch": sd.arch.value,
        "num_chains": sd.num_chains,
        "seed": sd.seed,
        "chains": [[list(cell) for cell in chain] for chain in sd.chains],
        "key_chain": list(sd.key_chain),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def state_to_json(st: ChipState) -> str:
    doc = {
        "rc_values": st.rc_values,
        "sc_ff1": st.sc_ff1,
        "sc_ff2": st.sc_ff2,
        "so_blocked": st.so_blocked,
        "mssd_q": st.mssd_q,
        "key_loaded": st.key_loaded,
        "cycle_count": st.cycle_count,
        "tpnvm_load_count": st.tpnvm_load_count,
        "rng_seed": st.rng_seed,
    }
    return json.dumps(doc, indent=1, sort_keys=True)
