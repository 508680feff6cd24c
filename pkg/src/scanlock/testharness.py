"""Structural and functional test flows, single-stuck-at fault simulation,
and test-cost accounting.

Flows are cycle-accurate: every scan cycle goes through the architecture
state machine and the cost counters are measured, never computed. The fault
simulator itself uses a bit-parallel semantic evaluator (all patterns at
once, one pattern per integer bit) that the test suite pins against the
cycle-accurate flows; serial per-fault re-simulation would otherwise
dominate the runtime.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import BlockedScanOut
from .locking import Key
from .netlist import Netlist, eval_packed
from .scanarch import (
    ArchKind,
    ChipState,
    MASKED,
    ModePins,
    ScanDesign,
    clock_step,
    power_on,
    read_po,
    set_pins,
    sys_rst,
)

Pattern = tuple[tuple[int, ...], tuple[int, ...]]  # (rc bits, pi bits)


@dataclass(frozen=True)
class Fault:
    """Single stuck-at fault: on a whole net (stem) or on one fanout branch."""

    net: str
    stuck: int
    branch: tuple | None = None  # ("gate", out, pos) | ("dff", q) | ("po", net)

    def label(self) -> str:
        b = "" if self.branch is None else ":".join(str(x) for x in self.branch)
        return f"{self.net}/{b}/sa{self.stuck}"


@dataclass
class TestCost:
    total_shift_cycles: int = 0
    capture_cycles: int = 0
    tpnvm_loads: int = 0
    sys_rst_count: int = 0

    def snapshot(self) -> tuple[int, int, int, int]:
        return (
            self.total_shift_cycles,
            self.capture_cycles,
            self.tpnvm_loads,
            self.sys_rst_count,
        )


def enumerate_faults(n: Netlist) -> list[Fault]:
    """Both stuck polarities on every net plus every fanout branch of
    multi-fanout nets, deduplicated (single-consumer nets get only the stem)."""
    faults: list[Fault] = []
    sinks = n.fanout()
    for net in n.nets:
        for v in (0, 1):
            faults.append(Fault(net, v))
        consumers = sinks[net]
        if len(consumers) >= 2:
            for consumer in consumers:
                for v in (0, 1):
                    faults.append(Fault(net, v, tuple(consumer)))
    return faults


def fault_forces(fault: Fault | None, width: int = 1):
    """(stem, branch, dff, po) forcing maps for an evaluation of `width`
    packed patterns."""
    if fault is None:
        return (None, None, {}, {})
    value = (1 << width) - 1 if fault.stuck else 0
    if fault.branch is None:
        return ({fault.net: value}, None, {}, {})
    kind = fault.branch[0]
    if kind == "gate":
        return (None, {(fault.branch[1], fault.branch[2]): value}, {}, {})
    if kind == "dff":
        return (None, None, {fault.branch[1]: value}, {})
    return (None, None, {}, {fault.branch[1]: value})


# ---------------------------------------------------------------------------
# Patterns

def random_patterns(n: int, widths: tuple[int, int], seed: int) -> list[Pattern]:
    """`n` random (rc, pi) patterns; deterministic for a fixed seed."""
    rc_w, pi_w = widths
    rng = random.Random(seed)
    return [
        (
            tuple(rng.randrange(2) for _ in range(rc_w)),
            tuple(rng.randrange(2) for _ in range(pi_w)),
        )
        for _ in range(n)
    ]


def exhaustive_patterns(rc_w: int, pi_w: int) -> list[Pattern]:
    out = []
    for v in range(1 << (rc_w + pi_w)):
        rc = tuple((v >> i) & 1 for i in range(rc_w))
        pi = tuple((v >> (rc_w + i)) & 1 for i in range(pi_w))
        out.append((rc, pi))
    return out


def write_patterns(path, patterns: list[Pattern]) -> None:
    with open(path, "w") as fh:
        for rc, pi in patterns:
            fh.write("".join(map(str, rc)) + "|" + "".join(map(str, pi)) + "\n")


def read_patterns(path) -> list[Pattern]:
    out: list[Pattern] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rc, _, pi = line.partition("|")
            out.append((tuple(int(b) for b in rc), tuple(int(b) for b in pi)))
    return out


def default_dummy_key(k: int) -> Key:
    return Key(tuple(i & 1 for i in range(k)))


# ---------------------------------------------------------------------------
# Flow helpers

def _real_pis(sd: ScanDesign) -> tuple[str, ...]:
    keys = set(sd.locked.key_inputs)
    return tuple(p for p in sd.locked.netlist.primary_inputs if p not in keys)


def _pi_dict(sd: ScanDesign, pi_bits) -> dict[str, int]:
    return dict(zip(_real_pis(sd), pi_bits))


def _rc_dict(sd: ScanDesign, rc_bits) -> dict[str, int]:
    return {q: b for (q, _), b in zip(sd.locked.netlist.dffs, rc_bits)}


def _chain_images(sd: ScanDesign, rc: dict[str, int], dummy: Key) -> list[list[int]]:
    """Desired post-shift cell values per chain (RCs from the pattern, SCs
    from the dummy key)."""
    return [
        [rc.get(ident, 0) if kind == "rc" else dummy.bits[ident] for kind, ident in chain]
        for chain in sd.chains
    ]


def _shift_cycle_si(images: list[list[int]], depth: int, t: int) -> list[int]:
    """Scan-in bits for shift cycle t (1-based) so that after `depth` cycles
    each chain holds its image (shorter chains get leading dummy bits)."""
    si = []
    for image in images:
        pad = depth - len(image)
        si.append(image[depth - t] if t > pad else 0)
    return si


def _collect_chain_bits(streams: list[list[int]], sd: ScanDesign) -> list[tuple[int, ...]]:
    """Reorder shifted-out streams into cell-position order per chain."""
    out = []
    for chain, stream in zip(sd.chains, streams):
        length = len(chain)
        out.append(tuple(stream[length - 1 - m] for m in range(length)))
    return out


def _checked(so, flow: str):
    if so is None:
        raise BlockedScanOut(f"{flow}: expected a shift cycle")
    if any(b is MASKED for b in so):
        raise BlockedScanOut(f"{flow}: scan-out is masked; the flow is buggy")
    return so


# ---------------------------------------------------------------------------
# Structural test flow

def structural_test_flow(
    sd: ScanDesign,
    patterns: list[Pattern],
    dummy_key: Key | None = None,
    fault: Fault | None = None,
):
    """Architecture-exact structural (manufacturing) test.

    kt-DFS: dummy key in via KSI, register it, then per pattern shift-in,
    one capture, shift-out. R-DFS/mR-DFS: Test stays high from power-on, M2
    shifts move pattern plus dummy key bits through the mixed chain, M1b
    captures. Open scan: plain shift/capture/shift. Shift-out of pattern i
    overlaps shift-in of pattern i+1. Returns (responses, TestCost) where
    each response is (per-chain cell bits, po bits)."""
    dummy = dummy_key or default_dummy_key(sd.key_size)
    cost = TestCost()
    arch = sd.arch
    st = power_on(sd, seed=0, tpnvm=dummy if arch is ArchKind.OPEN_SCAN else sd.locked.secret_key)
    st.fault_forces = fault_forces(fault)
    if arch is ArchKind.OPEN_SCAN:
        shift_pins, capture_pins = ModePins.open_scan(1), ModePins.open_scan(0)
    elif arch in (ArchKind.R_DFS, ArchKind.MR_DFS):
        shift_pins, capture_pins = ModePins.r_dfs(1, 1), ModePins.r_dfs(1, 0)
    else:
        shift_pins = ModePins.kt(0, 1, 1)
        capture_pins = ModePins.kt(0, 0, 1)
        for t in range(1, sd.key_size + 1):  # dummy key via KSI in M0, KSE=1
            ksi = dummy.bits[sd.key_chain[sd.key_size - t]]
            clock_step(sd, st, ModePins.kt(0, 0, 1), ksi_bit=ksi)
            cost.total_shift_cycles += 1
            cost.capture_cycles += 1
        clock_step(sd, st, ModePins.kt(1, 0, 1))  # register mode
        cost.capture_cycles += 1

    depth = max(len(c) for c in sd.chains)
    responses = []
    streams: list[list[int]] = [[] for _ in sd.chains]
    pending_po = None
    for rc_bits, pi_bits in patterns:
        images = _chain_images(sd, _rc_dict(sd, rc_bits), dummy)
        streams = [[] for _ in sd.chains]
        for t in range(1, depth + 1):
            _, so = clock_step(sd, st, shift_pins, si_bits=_shift_cycle_si(images, depth, t))
            cost.total_shift_cycles += 1
            for c, b in enumerate(_checked(so, "structural")):
                streams[c].append(b)
        if pending_po is not None:
            responses.append((_collect_chain_bits(streams, sd), pending_po))
        pi = _pi_dict(sd, pi_bits)
        pending_po = read_po(sd, st, pi)
        clock_step(sd, st, capture_pins, pi=pi)
        cost.capture_cycles += 1
    streams = [[] for _ in sd.chains]
    for t in range(1, depth + 1):  # final shift-out
        _, so = clock_step(sd, st, shift_pins, si_bits=[0] * sd.num_chains)
        cost.total_shift_cycles += 1
        for c, b in enumerate(_checked(so, "structural")):
            streams[c].append(b)
    responses.append((_collect_chain_bits(streams, sd), pending_po))
    cost.tpnvm_loads = st.tpnvm_load_count  # measured, not derived
    return responses, cost


# ---------------------------------------------------------------------------
# Functional test flow

def functional_test_flow(
    sd: ScanDesign, patterns: list[Pattern], fault: Fault | None = None
):
    """Architecture-exact functional test with the real key.

    kt-DFS loads the key from tpNVM once; mR-DFS needs a sys_rst plus key
    reload for every pattern; R-DFS and open scan load once and reuse M1a /
    plain shifting. PO responses are recorded clocklessly after each single
    capture. Returns (po responses, TestCost)."""
    cost = TestCost()
    arch = sd.arch
    st = power_on(sd, seed=0, tpnvm=sd.locked.secret_key)
    st.fault_forces = fault_forces(fault)
    responses = []
    depth = max(len(c) for c in sd.chains)

    if arch is ArchKind.OPEN_SCAN:
        cost.tpnvm_loads = st.tpnvm_load_count
        for rc_bits, pi_bits in patterns:
            rc = _rc_dict(sd, rc_bits)
            images = [[rc.get(ident, 0) for _k, ident in chain] for chain in sd.chains]
            for t in range(1, depth + 1):
                clock_step(sd, st, ModePins.open_scan(1), si_bits=_shift_cycle_si(images, depth, t))
                cost.total_shift_cycles += 1
            pi = _pi_dict(sd, pi_bits)
            clock_step(sd, st, ModePins.open_scan(0), pi=pi)
            cost.capture_cycles += 1
            responses.append(read_po(sd, st, pi))
        return responses, cost

    if arch is ArchKind.R_DFS:
        clock_step(sd, st, ModePins.r_dfs(0, 0))  # capture the key into SCs
        cost.capture_cycles += 1
        cost.tpnvm_loads = st.tpnvm_load_count
        images_key = None
        for rc_bits, pi_bits in patterns:
            rc = _rc_dict(sd, rc_bits)
            images = [[rc.get(ident, 0) for _k, ident in chain if _k == "rc"]
                      for chain in sd.chains]
            rdepth = max(len(i) for i in images)
            for t in range(1, rdepth + 1):  # M1a: SCs hold the key
                clock_step(sd, st, ModePins.r_dfs(0, 1), si_bits=_shift_cycle_si(images, rdepth, t))
                cost.total_shift_cycles += 1
            pi = _pi_dict(sd, pi_bits)
            clock_step(sd, st, ModePins.r_dfs(0, 0), pi=pi)
            cost.capture_cycles += 1
            responses.append(read_po(sd, st, pi))
        return responses, cost

    if arch is ArchKind.MR_DFS:
        dummy = default_dummy_key(sd.key_size)
        first = True
        for rc_bits, pi_bits in patterns:
            if not first:
                set_pins(sd, st, ModePins.r_dfs(1, 0))  # Test up; MSSD trips
                sys_rst(sd, st)  # clears everything incl. temp registers
                cost.sys_rst_count += 1
            first = False
            images = _chain_images(sd, _rc_dict(sd, rc_bits), dummy)
            for t in range(1, depth + 1):  # M2 shift while Test stayed high
                clock_step(sd, st, ModePins.r_dfs(1, 1), si_bits=_shift_cycle_si(images, depth, t))
                cost.total_shift_cycles += 1
            pi = _pi_dict(sd, pi_bits)
            set_pins(sd, st, ModePins.r_dfs(0, 0))  # arms the one-cycle gate
            clock_step(sd, st, ModePins.r_dfs(0, 0), pi=pi)  # gated: key in, RCs hold
            cost.capture_cycles += 1
            clock_step(sd, st, ModePins.r_dfs(0, 0), pi=pi)  # real capture
            cost.capture_cycles += 1
            responses.append(read_po(sd, st, pi))
        cost.tpnvm_loads = st.tpnvm_load_count
        return responses, cost

    # kt-DFS: real key once, then per-pattern shift/capture
    for _ in range(sd.key_size):  # serial tpNVM load, KSE low, SO now masked
        clock_step(sd, st, ModePins.kt(0, 0, 0))
        cost.total_shift_cycles += 1
        cost.capture_cycles += 1
    clock_step(sd, st, ModePins.kt(1, 0, 0))  # register: FF2 <- key
    cost.capture_cycles += 1
    cost.tpnvm_loads = st.tpnvm_load_count
    for rc_bits, pi_bits in patterns:
        rc = _rc_dict(sd, rc_bits)
        images = [[rc.get(ident, 0) for _k, ident in chain] for chain in sd.chains]
        for t in range(1, depth + 1):
            clock_step(sd, st, ModePins.kt(0, 1, 1), si_bits=_shift_cycle_si(images, depth, t))
            cost.total_shift_cycles += 1
        pi = _pi_dict(sd, pi_bits)
        clock_step(sd, st, ModePins.kt(0, 0, 1), pi=pi)
        cost.capture_cycles += 1
        responses.append(read_po(sd, st, pi))
    return responses, cost


# ---------------------------------------------------------------------------
# Bit-parallel fault simulation

def _packed_inputs(sd: ScanDesign, patterns: list[Pattern], key: Key) -> dict[str, int]:
    n = sd.locked.netlist
    assign = {net: 0 for net in n.comb_inputs}
    pis = _real_pis(sd)
    for col, (rc_bits, pi_bits) in enumerate(patterns):
        for (q, _), b in zip(n.dffs, rc_bits):
            if b:
                assign[q] |= 1 << col
        for p, b in zip(pis, pi_bits):
            if b:
                assign[p] |= 1 << col
    for i, kn in enumerate(sd.locked.key_inputs):
        if key.bits[i]:
            assign[kn] = (1 << len(patterns)) - 1
    return assign


def structural_signature(
    sd: ScanDesign, patterns: list[Pattern], dummy_key: Key | None = None,
    fault: Fault | None = None,
) -> tuple[int, ...]:
    """All per-pattern structural observables (captured next state and POs)
    packed one pattern per bit; equality of signatures is equality of every
    response bit."""
    dummy = dummy_key or default_dummy_key(sd.key_size)
    n = sd.locked.netlist
    assign = _packed_inputs(sd, patterns, dummy)
    width = len(patterns)
    stem, branch, dff_force, po_force = fault_forces(fault, width)
    values = eval_packed(n, assign, width, stem, branch)
    sig = [dff_force.get(q, values[d]) for q, d in n.dffs]
    sig += [po_force.get(p, values[p]) for p in n.primary_outputs]
    return tuple(sig)


def functional_signature(
    sd: ScanDesign, patterns: list[Pattern], fault: Fault | None = None
) -> tuple[int, ...]:
    """Per-pattern PO responses after one capture (functional observables),
    packed one pattern per bit."""
    n = sd.locked.netlist
    key = sd.locked.secret_key
    width = len(patterns)
    assign = _packed_inputs(sd, patterns, key)
    stem, branch, dff_force, po_force = fault_forces(fault, width)
    values = eval_packed(n, assign, width, stem, branch)
    next_assign = dict(assign)
    for q, d in n.dffs:
        next_assign[q] = dff_force.get(q, values[d])
    values2 = eval_packed(n, next_assign, width, stem, branch)
    return tuple(po_force.get(p, values2[p]) for p in n.primary_outputs)


def fault_coverage(
    sd: ScanDesign,
    patterns: list[Pattern],
    flow: str = "structural",
    dummy_key: Key | None = None,
    faults: list[Fault] | None = None,
) -> float:
    """Serial single-stuck-at coverage: a fault counts as detected when any
    observed response bit differs from the fault-free run. Structural flows
    observe the scan captures and POs; functional flows observe POs only."""
    if flow not in ("structural", "functional"):
        raise ValueError(flow)
    faults = faults if faults is not None else enumerate_faults(sd.locked.netlist)
    if flow == "structural":
        golden = structural_signature(sd, patterns, dummy_key)
        detected = sum(
            1 for f in faults if structural_signature(sd, patterns, dummy_key, f) != golden
        )
    else:
        golden = functional_signature(sd, patterns)
        detected = sum(
            1 for f in faults if functional_signature(sd, patterns, f) != golden
        )
    return 100.0 * detected / len(faults) if faults else 0.0


def detectability_oracle(sd: ScanDesign, key: Key, faults: list[Fault] | None = None) -> dict[str, bool]:
    """Exhaustive per-fault detectability over every (state, PI) assignment,
    observing next state and POs; the brute-force reference for coverage."""
    n = sd.locked.netlist
    rc_w = len(n.dffs)
    pi_w = len(_real_pis(sd))
    patterns = exhaustive_patterns(rc_w, pi_w)
    faults = faults if faults is not None else enumerate_faults(n)
    golden = structural_signature(sd, patterns, key)
    return {
        f.label(): structural_signature(sd, patterns, key, f) != golden for f in faults
    }


def coverage_csv(faults: list[Fault], detected: dict[str, bool]) -> str:
    lines = ["fault_net,branch,stuck,detected"]
    for f in faults:
        b = "" if f.branch is None else ":".join(str(x) for x in f.branch)
        lines.append(f"{f.net},{b},{f.stuck},{int(detected[f.label()])}")
    return "\n".join(lines) + "\n"
