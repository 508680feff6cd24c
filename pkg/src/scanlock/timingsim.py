"""Event-driven, delay-annotated simulation of small control circuits.

Inertial-delay semantics: a gate schedules its new output value `delay`
picoseconds after an input change, and a pending opposite transition is
cancelled when the recomputed value no longer differs, so pulses shorter
than a gate's delay never emerge from it. DFFs capture D on a rising clock
edge only if D has been stable for the setup time; a violation
deterministically keeps the old value.

The one circuit this package cares about is the mode-switch shift-disable
(MSSD) latch with its 10-inverter delay unit: a Test pulse narrower than
the delay unit leaves the latch untripped while the shift-disable output
still follows the pulse, which is the glitch the attack exploits.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .errors import WindowNotFound

CONST0, CONST1 = "const0", "const1"


@dataclass(frozen=True)
class DelayModel:
    """Per-kind propagation delays in picoseconds."""

    d_not: int = 10
    d_and: int = 15
    d_nor: int = 15
    d_dff_clkq: int = 20
    t_setup: int = 5

    @property
    def d_du(self) -> int:
        return 10 * self.d_not  # the delay unit is exactly 10 inverters

    def __post_init__(self):
        if min(self.d_not, self.d_and, self.d_nor, self.d_dff_clkq) <= 0:
            raise ValueError("gate delays must be positive")


@dataclass(frozen=True)
class TimedGate:
    out: str
    kind: str  # NOT, AND, OR, NOR, BUF
    ins: tuple[str, ...]
    delay: int


@dataclass(frozen=True)
class TimedDff:
    q: str
    d: str
    clk: str
    rst: str | None
    clk_to_q: int
    t_setup: int


@dataclass(frozen=True)
class TimedCircuit:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[TimedGate, ...]
    dffs: tuple[TimedDff, ...] = ()


@dataclass(frozen=True)
class Stimulus:
    """Per-input, time-sorted (time, value) edges; time 0 sets the idle level."""

    edges: dict[str, tuple[tuple[int, int], ...]]

    def __post_init__(self):
        for name, seq in self.edges.items():
            times = [t for t, _ in seq]
            if times != sorted(set(times)):
                raise ValueError(f"stimulus for {name} not strictly increasing")

    def initial(self, name: str) -> int:
        seq = self.edges.get(name, ())
        if seq and seq[0][0] == 0:
            return seq[0][1]
        return 0

    def last_time(self) -> int:
        return max((s[-1][0] for s in self.edges.values() if s), default=0)


def pulse_train(
    name: str, width: int, count: int, start: int, gap: int
) -> dict[str, tuple[tuple[int, int], ...]]:
    """`count` high pulses of `width` ps separated by `gap` ps of low time."""
    edges = [(0, 0)]
    t = start
    for _ in range(count):
        edges.append((t, 1))
        edges.append((t + width, 0))
        t += width + gap
    return {name: tuple(edges)}


def build_mssd(dm: DelayModel) -> TimedCircuit:
    """The MSSD blockage circuit: SD = AND(SE, NOR(Q_FF, NOT(Test))) with
    Q_FF a constant-1-input DFF clocked by AND(Test, DU(Test))."""
    gates = []
    prev = "Test"
    for i in range(1, 10):
        gates.append(TimedGate(f"du{i}", "NOT", (prev,), dm.d_not))
        prev = f"du{i}"
    gates.append(TimedGate("Test_d", "NOT", (prev,), dm.d_not))
    gates.append(TimedGate("clk_ff", "AND", ("Test", "Test_d"), dm.d_and))
    gates.append(TimedGate("Test_not", "NOT", ("Test",), dm.d_not))
    gates.append(TimedGate("mask", "NOR", ("Q_FF", "Test_not"), dm.d_nor))
    gates.append(TimedGate("SD", "AND", ("SE", "mask"), dm.d_and))
    dff = TimedDff("Q_FF", CONST1, "clk_ff", "rst", dm.d_dff_clkq, dm.t_setup)
    return TimedCircuit(("Test", "SE", "rst"), ("SD",), tuple(gates), (dff,))


def _gate_eval(kind: str, vals: list[int]) -> int:
    if kind == "NOT":
        return 1 - vals[0]
    if kind == "AND":
        return 1 if all(vals) else 0
    if kind == "OR":
        return 1 if any(vals) else 0
    if kind == "NOR":
        return 0 if any(vals) else 1
    if kind == "BUF":
        return vals[0]
    raise ValueError(kind)


def simulate(
    tc: TimedCircuit,
    stim: Stimulus,
    horizon: int,
    dff_init: dict[str, int] | None = None,
) -> dict[str, list[tuple[int, int]]]:
    """Run the event-driven simulation up to `horizon` ps.

    Returns per-net waveforms as (time, value) edge lists including the
    time-0 initial value. Deterministic: ties are broken by insertion order.
    """
    if horizon < stim.last_time():
        raise ValueError("horizon ends before the stimulus does")
    fanout: dict[str, list[TimedGate]] = {}
    for g in tc.gates:
        for i in g.ins:
            fanout.setdefault(i, []).append(g)
    dff_by_clk: dict[str, list[TimedDff]] = {}
    dff_by_rst: dict[str, list[TimedDff]] = {}
    for d in tc.dffs:
        dff_by_clk.setdefault(d.clk, []).append(d)
        if d.rst is not None:
            dff_by_rst.setdefault(d.rst, []).append(d)

    values: dict[str, int] = {CONST0: 0, CONST1: 1}
    for name in tc.inputs:
        values[name] = stim.initial(name)
    for d in tc.dffs:
        values[d.q] = (dff_init or {}).get(d.q, 0)
    # settle combinational nets from the initial input levels (no events)
    remaining = list(tc.gates)
    while remaining:
        progressed = []
        for g in remaining:
            if all(i in values for i in g.ins):
                values[g.out] = _gate_eval(g.kind, [values[i] for i in g.ins])
            else:
                progressed.append(g)
        if len(progressed) == len(remaining):
            raise ValueError("combinational loop in timed circuit")
        remaining = progressed

    waves: dict[str, list[tuple[int, int]]] = {
        net: [(0, v)] for net, v in values.items() if net not in (CONST0, CONST1)
    }
    last_change: dict[str, int] = {net: -(10**9) for net in values}
    counter = itertools.count()
    queue: list[tuple[int, int, int, str, int]] = []
    pending: dict[str, tuple[int, int]] = {}  # net -> (event id, value)

    # at equal timestamps, already-scheduled gate transitions fire before
    # fresh input edges can recompute and cancel them
    for name, seq in stim.edges.items():
        if name not in tc.inputs:
            raise ValueError(f"stimulus drives unknown input {name}")
        for t, v in seq:
            if t == 0:
                continue
            heapq.heappush(queue, (t, 1, next(counter), name, v))

    def schedule(net: str, value: int, at: int) -> None:
        if net in pending:
            eid, pv = pending[net]
            if pv == value:
                return
            del pending[net]  # inertial cancellation of the opposite edge
            if value == values[net]:
                return
        elif value == values[net]:
            return
        eid = next(counter)
        pending[net] = (eid, value)
        heapq.heappush(queue, (at, 0, eid, net, value))

    while queue:
        t, _prio, eid, net, value = heapq.heappop(queue)
        if t > horizon:
            break
        if net not in tc.inputs:
            entry = pending.get(net)
            if entry is None or entry[0] != eid:
                continue  # cancelled or superseded event
            del pending[net]
        if values[net] == value:
            continue
        old = values[net]
        values[net] = value
        last_change[net] = t
        waves.setdefault(net, []).append((t, value))
        for g in fanout.get(net, []):
            schedule(g.out, _gate_eval(g.kind, [values[i] for i in g.ins]), t + g.delay)
        if value == 1 and old == 0:
            for d in dff_by_clk.get(net, []):
                if values.get(d.rst, 0) if d.rst else 0:
                    continue
                stable = t - last_change.get(d.d, -(10**9)) >= d.t_setup
                if d.d in (CONST0, CONST1):
                    stable = True
                if stable:
                    schedule(d.q, values[d.d], t + d.clk_to_q)
        for d in dff_by_rst.get(net, []):
            if value == 1:
                schedule(d.q, 0, t + d.clk_to_q)
    return waves


def high_intervals(wave: list[tuple[int, int]], horizon: int) -> list[tuple[int, int]]:
    """Closed-open [start, end) intervals during which a net is high."""
    out = []
    start = None
    for t, v in wave:
        if v == 1 and start is None:
            start = t
        elif v == 0 and start is not None:
            out.append((start, t))
            start = None
    if start is not None:
        out.append((start, horizon))
    return out


def final_value(wave: list[tuple[int, int]]) -> int:
    return wave[-1][1]


_SETTLE_FACTOR = 8


def _mssd_stimulus(dm: DelayModel, width: int, pulses: int) -> tuple[Stimulus, int]:
    gap = dm.d_du + _SETTLE_FACTOR * (dm.d_and + dm.d_nor + dm.d_dff_clkq) + 50
    start = 4 * dm.d_dff_clkq + 20
    edges = {"SE": ((0, 1),), "rst": ((0, 1), (dm.d_dff_clkq + 5, 0))}
    edges.update(pulse_train("Test", width, pulses, start, gap))
    stim = Stimulus(edges)
    return stim, stim.last_time() + gap


def pulse_outcome(dm: DelayModel, width: int, mssd_q: int = 0) -> str:
    """Classify one Test pulse against the MSSD: 'shift' when SD pulses high
    and the latch stays clear, 'trip' when Q_FF captures, 'nothing' when the
    pulse is filtered before reaching SD (or the latch has already tripped)."""
    if width <= 0:
        return "nothing"
    tc = build_mssd(dm)
    stim, horizon = _mssd_stimulus(dm, width, 1)
    waves = simulate(tc, stim, horizon, dff_init={"Q_FF": mssd_q})
    if final_value(waves["Q_FF"]) == 1 and mssd_q == 0:
        return "trip"
    if mssd_q == 0 and high_intervals(waves["SD"], horizon):
        return "shift"
    return "nothing"


def glitch_window(dm: DelayModel, pulses: int = 8) -> int:
    """Maximal Test pulse width (ps) that leaves Q_FF at 0 over a canonical
    eight-pulse stimulus. Bracket: within [d_du - t_setup - 1, d_du + d_and)."""
    tc = build_mssd(dm)

    def safe(width: int) -> bool:
        stim, horizon = _mssd_stimulus(dm, width, pulses)
        waves = simulate(tc, stim, horizon)
        return final_value(waves["Q_FF"]) == 0

    lo = 1
    hi = dm.d_du + 2 * (dm.d_and + dm.d_nor + dm.d_not) + dm.t_setup + 8
    if not safe(lo):
        raise WindowNotFound("even a 1 ps pulse trips the latch")
    while safe(hi):
        hi *= 2
        if hi > 64 * dm.d_du:
            raise WindowNotFound("latch never trips; no finite window")
    while hi - lo > 1:  # largest safe width; trip behavior is monotone
        mid = (lo + hi) // 2
        if safe(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# VCD export

def write_vcd(waves: dict[str, list[tuple[int, int]]], path, timescale: str = "1ps") -> None:
    """Dump waveforms as a value change dump for waveform viewers."""
    ids = {net: chr(33 + i) for i, net in enumerate(sorted(waves))}
    events: dict[int, list[str]] = {}
    with open(path, "w") as fh:
        fh.write(f"$timescale {timescale} $end\n$scope module top $end\n")
        for net, vid in ids.items():
            fh.write(f"$var wire 1 {vid} {net} $end\n")
        fh.write("$upscope $end\n$enddefinitions $end\n$dumpvars\n")
        for net, wave in waves.items():
            fh.write(f"{wave[0][1]}{ids[net]}\n")
            for t, v in wave[1:]:
                events.setdefault(t, []).append(f"{v}{ids[net]}")
        fh.write("$end\n")
        for t in sorted(events):
            fh.write(f"#{t}\n")
            for line in events[t]:
                fh.write(line + "\n")
