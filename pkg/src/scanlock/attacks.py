"""Key-recovery attacks: the combinational SAT attack, shift-and-leak with
leak-condition search, the cone-SAT preprocessing loop, the glitch-based
variant for mR-DFS, and a brute-force verification oracle.

Soundness rule: every definite bit an attack reports must equal the secret
bit; attacks abstain (UNKNOWN) whenever they cannot certify a value. Leak
conditions are certified key-independent with three-valued evaluation (X on
every net the attacker cannot pin), or by exhaustive enumeration over the
unknown nets in the optional exact pass, before any oracle replay.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .cnf import CnfFormula, solve_cnf
from .errors import (
    IterationLimit,
    TooLarge,
    Unsatisfiable,
    UnsupportedForArch,
    WindowNotFound,
)
from .locking import KEY_PREFIX, Key, LockedDesign
from .netlist import (
    Netlist,
    Tri,
    ONE,
    X,
    ZERO,
    eval3_packed,
    eval_packed,
    extract_cone,
)
from .oracle import Oracle, PulseOutcome
from .scanarch import ArchKind, ModePins
from .timingsim import DelayModel, glitch_window, pulse_outcome

UNKNOWN = X  # per-bit recovery status reuses the Kleene X


@dataclass
class AttackReport:
    recovered: tuple[Tri, ...]
    dip_count: int = 0
    shift_cycles: int = 0
    power_cycles: int = 0
    oracle_queries: int = 0
    wall_ms: float = 0.0

    @property
    def definite_count(self) -> int:
        return sum(1 for b in self.recovered if b is not UNKNOWN)

    def wrong_bits(self, secret: Key) -> int:
        return sum(
            1
            for b, s in zip(self.recovered, secret.bits)
            if b is not UNKNOWN and (b is ONE) != bool(s)
        )

    def to_dict(self) -> dict:
        return {
            "recovered": ["X" if b is UNKNOWN else str(b.value) for b in self.recovered],
            "keys_recovered": self.definite_count,
            "dip_count": self.dip_count,
            "shift_cycles": self.shift_cycles,
            "power_cycles": self.power_cycles,
            "oracle_queries": self.oracle_queries,
            "wall_ms": round(self.wall_ms, 3),
        }


def _blank_report(key_size: int) -> AttackReport:
    return AttackReport(recovered=(UNKNOWN,) * key_size)


@dataclass(frozen=True)
class LeakCondition:
    """Assignment making one PO a function of a single RC, independent of
    every net the attacker cannot control.

    Nets absent from the assignments are don't-cares (X). `key_assignment`
    holds key-net values the attacker will force through the scan shift
    before observing; `exact` marks conditions certified by exhaustive
    enumeration instead of the conservative three-valued check."""

    lc: str
    po: str
    rc_assignment: tuple[tuple[str, int], ...]
    pi_assignment: tuple[tuple[str, int], ...]
    key_assignment: tuple[tuple[str, int], ...]
    polarity: bool  # True: PO equals the leaked bit
    distance: int = 0
    exact: bool = False


def _pair(bit_or_tri) -> tuple[int, int]:
    if bit_or_tri is X:
        return (0, 0)
    if bit_or_tri in (1, ONE):
        return (1, 0)
    return (0, 1)


def check_leak_condition(
    n: Netlist, cond: LeakCondition, fixed: dict[str, int] | None = None
) -> bool:
    """Three-valued certificate: with every unpinned net at X, the chosen PO
    must take definite, opposite values for lc=0 and lc=1."""
    cone = extract_cone(n, [cond.po])
    if cond.lc not in cone.primary_inputs:
        return False
    assigned = dict(cond.rc_assignment) | dict(cond.pi_assignment) | dict(
        cond.key_assignment
    )
    if fixed:
        assigned.update(fixed)
    assign = {}
    for net in cone.primary_inputs:
        if net == cond.lc:
            assign[net] = (2, 1)  # pattern 0: lc=0, pattern 1: lc=1
        elif net in assigned:
            assign[net] = (3, 0) if assigned[net] else (0, 3)
        else:
            assign[net] = (0, 0)
    one, zero = eval3_packed(cone, assign, 2)[cond.po]
    if cond.polarity:
        return (one, zero) == (2, 1)
    return (one, zero) == (1, 2)


# ---------------------------------------------------------------------------
# Leak-condition search

class _ConeCache:
    def __init__(self, n: Netlist):
        self.n = n
        self.cones: dict[str, Netlist] = {}

    def cone(self, po: str) -> Netlist:
        if po not in self.cones:
            self.cones[po] = extract_cone(self.n, [po])
        return self.cones[po]


def _probe_condition(
    cone: Netlist,
    lc: str,
    po: str,
    free: set[str],
    fixed: dict[str, int],
    rng: random.Random,
    trials: int,
) -> dict[str, int] | None:
    """Random definite probing with greedy X-relaxation; returns the pinned
    assignment over free nets or None."""
    free_nets = [n for n in cone.primary_inputs if n in free and n != lc]
    base: dict[str, tuple[int, int]] = {}
    for net in cone.primary_inputs:
        if net == lc:
            base[net] = (2, 1)
        elif net in fixed:
            base[net] = (3, 0) if fixed[net] else (0, 3)
        elif net not in free:
            base[net] = (0, 0)

    def leaky(assign) -> bool:
        one, zero = eval3_packed(cone, assign, 2)[po]
        return (one, zero) in ((2, 1), (1, 2))

    for _ in range(trials):
        choice = {net: rng.randrange(2) for net in free_nets}
        assign = dict(base)
        for net, v in choice.items():
            assign[net] = (3, 0) if v else (0, 3)
        if not leaky(assign):
            continue
        for net in free_nets:  # relax to X wherever the leak survives
            saved = assign[net]
            assign[net] = (0, 0)
            if not leaky(assign):
                assign[net] = saved
        return {net: 1 if assign[net] == (3, 0) else 0
                for net in free_nets if assign[net] != (0, 0)}
    return None


def _dual_rail_condition(
    cone: Netlist,
    lc: str,
    po: str,
    free: set[str],
    fixed: dict[str, int],
    conflict_budget: int,
) -> dict[str, int] | None:
    """Complete 3-valued search: encode two Kleene copies of the cone (lc=0
    and lc=1) over shared (is-one, is-zero) choice variables and ask the SAT
    solver for an assignment that makes the PO definite and opposite."""
    f = CnfFormula()
    true_var = f.new_var()
    false_var = f.new_var()
    f.add_clause([true_var])
    f.add_clause([-false_var])
    choice: dict[str, tuple[int, int]] = {}
    for net in cone.primary_inputs:
        if net in fixed:
            choice[net] = (true_var, false_var) if fixed[net] else (false_var, true_var)
        elif net in free and net != lc:
            one, zero = f.new_var(), f.new_var()
            f.add_clause([-one, -zero])  # not both
            choice[net] = (one, zero)
        else:
            choice[net] = (false_var, false_var)  # X

    def encode_copy(lc_value: int) -> tuple[int, int]:
        pairs = dict(choice)
        pairs[lc] = (true_var, false_var) if lc_value else (false_var, true_var)
        for out, kind, ins in cone.topo_gates:
            ops = [pairs[i] for i in ins]
            pairs[out] = _pair_gate(f, kind, ops)
        return pairs[po]

    p0_one, p0_zero = encode_copy(0)
    p1_one, p1_zero = encode_copy(1)
    d1, d2 = f.new_var(), f.new_var()
    f.add_gate("AND", d1, [p0_one, p1_zero])
    f.add_gate("AND", d2, [p0_zero, p1_one])
    f.add_clause([d1, d2])
    model = solve_cnf(f, conflict_limit=conflict_budget)
    if model is None or model == "unknown":
        return None
    out = {}
    for net in cone.primary_inputs:
        if net in free and net != lc and net not in fixed:
            one, zero = choice[net]
            if model[one]:
                out[net] = 1
            elif model[zero]:
                out[net] = 0
    return out


def _pair_gate(f: CnfFormula, kind: str, ops) -> tuple[int, int]:
    if kind == "BUF":
        return ops[0]
    if kind == "NOT":
        return (ops[0][1], ops[0][0])
    if kind in ("NAND", "NOR", "XNOR"):
        one, zero = _pair_gate(f, {"NAND": "AND", "NOR": "OR", "XNOR": "XOR"}[kind], ops)
        return (zero, one)
    acc = ops[0]
    for nxt in ops[1:]:
        one, zero = f.new_var(), f.new_var()
        if kind == "AND":
            f.add_gate("AND", one, [acc[0], nxt[0]])
            f.add_gate("OR", zero, [acc[1], nxt[1]])
        elif kind == "OR":
            f.add_gate("OR", one, [acc[0], nxt[0]])
            f.add_gate("AND", zero, [acc[1], nxt[1]])
        else:  # XOR in Kleene dual-rail form
            t1, t2, t3, t4 = (f.new_var() for _ in range(4))
            f.add_gate("AND", t1, [acc[0], nxt[1]])
            f.add_gate("AND", t2, [acc[1], nxt[0]])
            f.add_gate("OR", one, [t1, t2])
            f.add_gate("AND", t3, [acc[0], nxt[0]])
            f.add_gate("AND", t4, [acc[1], nxt[1]])
            f.add_gate("OR", zero, [t3, t4])
        acc = (one, zero)
    return acc


def _exact_condition(
    cone: Netlist,
    lc: str,
    po: str,
    free: set[str],
    fixed: dict[str, int],
    rng: random.Random,
    trials: int,
    max_unknowns: int = 14,
) -> dict[str, int] | None:
    """Exact pass: probe definite assignments and certify them by exhausting
    every assignment of the uncontrollable nets (instead of Kleene X, which
    can under-claim when unknowns reconverge)."""
    unknowns = [
        n
        for n in cone.primary_inputs
        if n != lc and n not in free and n not in fixed
    ]
    if len(unknowns) > max_unknowns:
        return None
    free_nets = [n for n in cone.primary_inputs if n in free and n != lc]
    width = 1 << len(unknowns)
    mask = (1 << (2 * width)) - 1
    base: dict[str, int] = {}
    for i, net in enumerate(unknowns):  # walking-bit patterns, duplicated per lc value
        v = 0
        for p in range(width):
            if (p >> i) & 1:
                v |= 1 << p
        base[net] = v | (v << width)
    base[lc] = ((1 << width) - 1) << width  # lc=0 on low half, 1 on high half
    for net, b in fixed.items():
        base[net] = mask if b else 0

    def verdict(assign) -> bool | None:
        out = eval_packed(cone, assign, 2 * width)[po]
        lo, hi = out & ((1 << width) - 1), out >> width
        if lo == 0 and hi == (1 << width) - 1:
            return True  # PO == lc everywhere
        if lo == (1 << width) - 1 and hi == 0:
            return False  # PO == NOT lc everywhere
        return None

    for _ in range(trials):
        choice = {net: rng.randrange(2) for net in free_nets}
        assign = dict(base)
        for net, v in choice.items():
            assign[net] = mask if v else 0
        if verdict(assign) is None:
            continue
        return {net: (1 if assign[net] == mask else 0) for net in free_nets}
    return None


def _build_condition(
    n: Netlist, lc: str, po: str, pinned: dict[str, int], fixed: dict[str, int],
    exact: bool,
) -> LeakCondition | None:
    key_nets = {x for x in n.primary_inputs if x.startswith(KEY_PREFIX)}
    pis = set(n.primary_inputs) - key_nets
    qs = {q for q, _ in n.dffs}
    combined = pinned | fixed  # known-constant nets are part of the certificate
    rc_assign = tuple(sorted((k, v) for k, v in combined.items() if k in qs))
    pi_assign = tuple(sorted((k, v) for k, v in combined.items() if k in pis))
    key_assign = tuple(sorted((k, v) for k, v in combined.items() if k in key_nets))
    cone = extract_cone(n, [po])
    for pol in (True, False):
        cond = LeakCondition(lc, po, rc_assign, pi_assign, key_assign, pol, exact=exact)
        if exact:
            if _check_exact(cone, cond, {}):
                return cond
        elif check_leak_condition(n, cond):
            return cond
    return None


def _check_exact(cone: Netlist, cond: LeakCondition, state_fixed: dict[str, int]) -> bool:
    assigned = dict(cond.rc_assignment) | dict(cond.pi_assignment) | dict(
        cond.key_assignment
    ) | state_fixed
    unknowns = [x for x in cone.primary_inputs if x != cond.lc and x not in assigned]
    if len(unknowns) > 20:
        return False
    width = 1 << len(unknowns)
    total = 2 * width
    mask = (1 << total) - 1
    assign = {}
    for i, net in enumerate(unknowns):
        v = 0
        for p in range(width):
            if (p >> i) & 1:
                v |= 1 << p
        assign[net] = v | (v << width)
    assign[cond.lc] = ((1 << width) - 1) << width
    for net in cone.primary_inputs:
        if net in assigned:
            assign[net] = mask if assigned[net] else 0
    out = eval_packed(cone, assign, total)[cond.po]
    lo, hi = out & ((1 << width) - 1), out >> width
    if cond.polarity:
        return lo == 0 and hi == (1 << width) - 1
    return lo == (1 << width) - 1 and hi == 0


@dataclass
class SearchBudget:
    probe_trials: int = 24
    sat_conflicts: int = 50_000
    exact_trials: int = 24
    use_sat: bool = True
    use_exact: bool = True


def search_leak_condition(
    n: Netlist,
    lc: str,
    pos: list[str],
    free: set[str],
    fixed: dict[str, int],
    rng: random.Random,
    budget: SearchBudget,
    cones: _ConeCache | None = None,
    fail_memo: dict | None = None,
) -> LeakCondition | None:
    """Find a leak condition for RC `lc` onto one of the POs in `pos`.

    `free` nets may be pinned to 0/1 by the condition; `fixed` nets hold a
    known constant; everything else is treated as unknown. Tries cheap
    random probing first, then the complete three-valued SAT search, then
    the exact enumeration pass. `fail_memo` remembers (lc, po, unknowns,
    constants) combinations that already failed, since plans for different
    target cells often collapse to the same search."""
    cones = cones or _ConeCache(n)
    for po in pos:
        cone = cones.cone(po)
        if lc not in cone.primary_inputs:
            continue
        fixed_cone = {k: v for k, v in fixed.items() if k in cone.primary_inputs}
        memo_key = None
        if fail_memo is not None:
            unknown_cone = frozenset(
                net for net in cone.primary_inputs
                if net != lc and net not in free and net not in fixed_cone
            )
            memo_key = (lc, po, unknown_cone, frozenset(fixed_cone.items()))
            if memo_key in fail_memo:
                continue
        pinned = _probe_condition(cone, lc, po, free, fixed_cone, rng, budget.probe_trials)
        if pinned is None and budget.use_sat:
            pinned = _dual_rail_condition(cone, lc, po, free, fixed_cone, budget.sat_conflicts)
        if pinned is not None:
            cond = _build_condition(n, lc, po, pinned, fixed_cone, exact=False)
            if cond is not None:
                return cond
        if budget.use_exact:
            pinned = _exact_condition(cone, lc, po, free, fixed_cone, rng, budget.exact_trials)
            if pinned is not None:
                cond = _build_condition(n, lc, po, pinned, fixed_cone, exact=True)
                if cond is not None:
                    return cond
        if memo_key is not None:
            fail_memo[memo_key] = True
    return None


def find_leak_condition(
    sd,
    lc: str,
    forbid=(),
    known: dict[int, int] | None = None,
    budget: SearchBudget | None = None,
    seed: int = 0,
) -> LeakCondition | None:
    """Spec-level search: key nets unknown (except already-recovered bits in
    `known`, keyed by key index), every RC and PI pinnable except `forbid`,
    POs tried smallest-cone-first. Returns None when the LC cannot leak;
    that rules the cell out."""
    n = sd.locked.netlist
    key_nets = set(sd.locked.key_inputs)
    fixed = {f"{KEY_PREFIX}{i}": b for i, b in (known or {}).items()}
    free = {
        net
        for net in n.comb_inputs
        if net not in key_nets and net != lc and net not in set(forbid)
    }
    rng = random.Random(seed)
    pos = _pos_by_cone_size(n)
    return search_leak_condition(
        n, lc, pos, free, fixed, rng, budget or SearchBudget()
    )


def _pos_by_cone_size(n: Netlist) -> list[str]:
    cache = _ConeCache(n)
    return sorted(n.primary_outputs, key=lambda po: (len(cache.cone(po).gates), po))



# ---------------------------------------------------------------------------
# Shift-and-leak

def _cell_net(cell) -> str:
    kind, ident = cell
    return ident if kind == "rc" else f"{KEY_PREFIX}{ident}"


# Symbolic value provenance through a planned phase sequence. Every storage
# slot holds one of:  ("in", id)  a scan-in bit the attacker may choose,
# ("key", i) the i-th secret bit, ("junk",) an uncontrolled don't-know.
_JUNK = ("junk",)


class _SymChip:
    """Replays a phase plan over symbols instead of bits, so the planner can
    read off exactly which nets end up controllable, known, or unknown, and
    where each controllable value must be injected."""

    def __init__(self, sd):
        self.sd = sd
        self.cells = [[None] * len(chain) for chain in sd.chains]
        self.inject: dict[int, tuple[int, int, int]] = {}  # id -> phase, chain, cycle
        self._next = 0

    def boot_r_dfs(self) -> None:
        for ci, chain in enumerate(self.sd.chains):
            for m, (kind, ident) in enumerate(chain):
                self.cells[ci][m] = ("key", ident) if kind == "sc" else _JUNK

    def boot_mr_dfs(self) -> None:
        for ci, chain in enumerate(self.sd.chains):
            for m, _cell in enumerate(chain):
                self.cells[ci][m] = _JUNK

    def _fresh(self, phase: int, ci: int, cyc: int):
        sym = ("in", self._next)
        self.inject[self._next] = (phase, ci, cyc)
        self._next += 1
        return sym

    def run_phase(self, phase_idx: int, phase) -> None:
        op = phase[0]
        if op == "gated_m0":  # SCs recapture the key, RCs hold
            for ci, chain in enumerate(self.sd.chains):
                for m, (kind, ident) in enumerate(chain):
                    if kind == "sc":
                        self.cells[ci][m] = ("key", ident)
            return
        cycles = phase[1]
        mixed = op in ("m2", "pulse")
        for cyc in range(cycles):
            for ci, chain in enumerate(self.sd.chains):
                idx = [
                    m for m, cell in enumerate(chain) if mixed or cell[0] == "rc"
                ]
                vals = [self.cells[ci][m] for m in idx]
                vals = [self._fresh(phase_idx, ci, cyc)] + vals[:-1]
                for m, v in zip(idx, vals):
                    self.cells[ci][m] = v

    def final(self) -> dict[str, tuple]:
        out = {}
        for ci, chain in enumerate(self.sd.chains):
            for m, cell in enumerate(chain):
                out[_cell_net(cell)] = self.cells[ci][m]
        return out


@dataclass
class _Plan:
    key_index: int
    num_chains: int
    phases: list  # ("m1a"|"m2"|"pulse", cycles) or ("gated_m0",)
    lc: str  # RC q-net holding the target key bit after the phases
    free: set[str]
    fixed: dict[str, int]
    inject: dict[int, tuple[int, int, int]]
    final_syms: dict[str, tuple]
    cond: LeakCondition | None = None

    def si_tables(self) -> list:
        """Per phase: chains x cycles scan-in bits realizing the condition."""
        tables = [
            None if phase[0] == "gated_m0"
            else [[0] * phase[1] for _ in range(self.num_chains)]
            for phase in self.phases
        ]
        assert self.cond is not None
        for net, value in list(self.cond.rc_assignment) + list(self.cond.key_assignment):
            sym = self.final_syms.get(net)
            if sym is not None and sym[0] == "in":
                phase_idx, ci, cyc = self.inject[sym[1]]
                tables[phase_idx][ci][cyc] = value
        return tables


def _simulate_plan(sd, boot: str, phases) -> _SymChip:
    chip = _SymChip(sd)
    if boot == "r":
        chip.boot_r_dfs()
    else:
        chip.boot_mr_dfs()
    for idx, phase in enumerate(phases):
        chip.run_phase(idx, phase)
    return chip


def _classify_final(sd, final_syms: dict[str, tuple], lc: str, known_bits):
    """Split nets by their final symbol: injections are attacker-free, known
    key bits are constants, unknown key bits and junk stay X."""
    free = {
        net
        for net in sd.locked.netlist.primary_inputs
        if not net.startswith(KEY_PREFIX)
    }
    fixed: dict[str, int] = {}
    for net, sym in final_syms.items():
        if net == lc:
            continue
        if sym[0] == "in":
            free.add(net)
        elif sym[0] == "key" and sym[1] in known_bits:
            fixed[net] = known_bits[sym[1]]
    return free, fixed


def _candidate_plans(sd, key_index: int, known_bits, max_plans: int):
    """Phase plans that land the target key bit in some RC.

    R-DFS: M1a preload, a d-cycle M2 mixed shift, then an optional M1a tail
    that walks the bit further down the RC subchain while reloading every
    other RC. mR-DFS (glitch): M2 preload while Test has stayed high, the
    gated functional cycle that traps the key, t pulse shifts, and a final
    gated cycle that recaptures the key into the SCs."""
    ci, p = sd.chain_of_key(key_index)
    chain = sd.chains[ci]
    rc_positions = [m for m, cell in enumerate(chain) if cell[0] == "rc"]
    depth = max(len(c) for c in sd.chains)
    rc_depth = max(sum(1 for cell in c if cell[0] == "rc") for c in sd.chains)
    plans = []
    if sd.arch is ArchKind.R_DFS:
        for q0 in rc_positions:
            if q0 <= p:
                continue
            d = q0 - p
            j0 = rc_positions.index(q0)
            for jt in range(j0, len(rc_positions)):
                t = jt - j0
                phases = [("m1a", rc_depth), ("m2", d)]
                if t:
                    phases.append(("m1a", t))
                chip = _simulate_plan(sd, "r", phases)
                lc = chain[rc_positions[jt]][1]
                if chip.final()[lc] != ("key", key_index):
                    continue
                plans.append((phases, lc, chip))
    else:
        for q0 in rc_positions:
            if q0 <= p:
                continue
            t = q0 - p
            for reload in (True, False):
                phases = [("m2", depth), ("gated_m0",), ("pulse", t)]
                if reload:
                    phases.append(("gated_m0",))
                chip = _simulate_plan(sd, "mr", phases)
                lc = chain[q0][1]
                if chip.final()[lc] != ("key", key_index):
                    continue
                plans.append((phases, lc, chip))
    scored = []
    seen = set()
    for phases, lc, chip in plans:
        final = chip.final()
        free, fixed = _classify_final(sd, final, lc, known_bits)
        unknown = frozenset(
            net for net, sym in final.items()
            if net != lc and sym[0] != "in" and net not in fixed
        )
        sig = (lc, unknown)
        if sig in seen:
            continue
        seen.add(sig)
        scored.append((len(unknown), len(phases), _Plan(
            key_index, sd.num_chains, phases, lc, free, fixed, chip.inject, final
        )))
    scored.sort(key=lambda x: (x[0], x[1], x[2].lc))
    return [plan for _u, _p, plan in scored[:max_plans]]


def _m1a_load(o: Oracle, desired: dict[str, int]) -> None:
    """Load every RC with the desired bit via M1a shifting (SCs hold)."""
    rc_chains = o.design.rc_chain_order
    depth = max(len(c) for c in rc_chains)
    pins = ModePins.r_dfs(0, 1)
    for t in range(1, depth + 1):
        si = []
        for c in rc_chains:
            pad = depth - len(c)
            si.append(desired.get(c[depth - t], 0) if t > pad else 0)
        o.clock(pins, si_bits=si)


def _calibrate_shift_path(o: Oracle, rng: random.Random) -> bool:
    """Echo a known pattern through the M1a shift path and watch SO.

    R-DFS echoes it back; mR-DFS gates the shift off, so the echo fails and
    the attack abstains rather than replaying leaks against stale state."""
    rc_chains = o.design.rc_chain_order
    depth = max(len(c) for c in rc_chains)
    probe = [rng.randrange(2) for _ in range(depth)]
    pins = ModePins.r_dfs(0, 1)
    seen: list[list] = [[] for _ in rc_chains]
    for t in range(2 * depth):
        so = o.clock(pins, si_bits=[probe[t % depth]] * len(rc_chains))
        if so is None:
            return False
        for c, bit in enumerate(so):
            seen[c].append(bit)
    for c, chain in enumerate(rc_chains):
        expect = [probe[t % depth] for t in range(2 * depth - len(chain))]
        if seen[c][len(chain):] != expect:
            return False
    return True


def _report_from_log(o: Oracle, before: dict, recovered, dips, t0) -> AttackReport:
    log = o.query_log
    return AttackReport(
        recovered=tuple(recovered),
        dip_count=dips,
        shift_cycles=log["shift_cycles"] - before.get("shift_cycles", 0),
        power_cycles=log["power_cycle"] - before.get("power_cycle", 0),
        oracle_queries=log["total"] - before.get("total", 0),
        wall_ms=(time.perf_counter() - t0) * 1000.0,
    )


def shift_and_leak(
    o: Oracle,
    budget: SearchBudget | None = None,
    seed: int = 0,
    preprocess: bool = False,
    max_plans_per_sc: int = 12,
) -> AttackReport:
    """The R-DFS key-leakage attack.

    Per secure cell: pick a leaky cell downstream in the mixed chain, place
    the (reverse-shifted) leak condition with an M1a shift while the SCs
    hold the captured key, shift d cycles in M2 to move the key bit into
    the leaky cell, then clocklessly read the PO in functional mode.
    Recovered bits feed back into later searches as known constants until
    no further cell yields. Bits with no usable leak condition stay UNKNOWN.
    """
    t0 = time.perf_counter()
    before = dict(o.query_log)
    k = o.design.key_size
    recovered: list[Tri] = [UNKNOWN] * k
    rng = random.Random(seed)
    budget = budget or SearchBudget()
    if o.arch not in (ArchKind.R_DFS, ArchKind.MR_DFS) or k == 0:
        return _report_from_log(o, before, recovered, 0, t0)
    o.power_cycle(rng.randrange(1 << 30))
    if not _calibrate_shift_path(o, rng):
        return _report_from_log(o, before, recovered, 0, t0)

    dips = 0
    known_bits: dict[int, int] = {}
    if preprocess:
        partial, dips = cone_sat_preprocess(o, seed=seed)
        for i, b in partial.items():
            known_bits[i] = b
            recovered[i] = ONE if b else ZERO

    n = o.design.locked.netlist
    cones = _ConeCache(n)
    pos_order = _pos_by_cone_size(n)
    store = _CondStore()
    fail_memo: dict = {}
    progress = True
    while progress:
        progress = False
        for i in range(k):
            if recovered[i] is not UNKNOWN:
                continue
            plan = _plan_for_bit(
                o.design, i, known_bits, cones, pos_order, rng, budget,
                max_plans_per_sc, store, fail_memo,
            )
            if plan is None:
                continue
            bit = _execute_plan(o, plan, rng)
            if bit is None:
                continue
            recovered[i] = ONE if bit else ZERO
            known_bits[i] = bit
            progress = True
    return _report_from_log(o, before, recovered, dips, t0)


def _execute_plan(o: Oracle, plan: _Plan, rng: random.Random, pulse_width: int | None = None) -> int | None:
    """Replay a condition-bearing plan against the oracle and read the bit."""
    o.power_cycle(rng.randrange(1 << 30))
    tables = plan.si_tables()
    for phase, table in zip(plan.phases, tables):
        op = phase[0]
        if op == "gated_m0":
            o.set_pins(ModePins.r_dfs(0, 0))
            o.clock(ModePins.r_dfs(0, 0))
            continue
        for cyc in range(phase[1]):
            si = [table[ci][cyc] for ci in range(plan.num_chains)]
            if op == "m1a":
                o.clock(ModePins.r_dfs(0, 1), si_bits=si)
            elif op == "m2":
                o.clock(ModePins.r_dfs(1, 1), si_bits=si)
            else:  # pulse
                if o.pulse_test(pulse_width, si_bits=si) is not PulseOutcome.SHIFT_HAPPENED:
                    return None
    o.set_pins(ModePins.r_dfs(0, 0))  # clockless switch to functional mode
    o.set_pi(dict(plan.cond.pi_assignment))
    po_bits = o.read_po()
    po_index = o.design.locked.netlist.primary_outputs.index(plan.cond.po)
    bit = po_bits[po_index]
    return bit if plan.cond.polarity else 1 - bit


class _CondStore:
    """Found conditions per LC, reusable across target SCs.

    A stored condition transfers to a new plan when every net it pins is
    either attacker-controllable there or a known constant with the same
    value; everything it treated as unknown only ever gets refined."""

    def __init__(self):
        self.by_lc: dict[str, list[LeakCondition]] = {}

    def add(self, cond: LeakCondition) -> None:
        self.by_lc.setdefault(cond.lc, []).append(cond)

    def usable(self, lc: str, free: set[str], fixed: dict[str, int]):
        for cond in self.by_lc.get(lc, ()):
            ok = True
            for net, value in (
                list(cond.rc_assignment)
                + list(cond.pi_assignment)
                + list(cond.key_assignment)
            ):
                if net in free or fixed.get(net) == value:
                    continue
                ok = False
                break
            if ok:
                return cond
        return None


def _plan_for_bit(
    sd, key_index: int, known_bits, cones, pos_order, rng, budget, max_plans,
    store: _CondStore, fail_memo: dict,
) -> _Plan | None:
    for plan in _candidate_plans(sd, key_index, known_bits, max_plans):
        cond = store.usable(plan.lc, plan.free, plan.fixed)
        if cond is None:
            cond = search_leak_condition(
                sd.locked.netlist, plan.lc, pos_order, plan.free, plan.fixed,
                rng, budget, cones, fail_memo,
            )
            if cond is not None:
                store.add(cond)
        if cond is None:
            continue
        plan.cond = cond
        return plan
    return None


# ---------------------------------------------------------------------------
# Cone-SAT preprocessing

def cone_sat_preprocess(
    o: Oracle, seed: int = 0, max_iterations: int | None = None,
    conflict_limit: int | None = None,
) -> tuple[dict[int, int], int]:
    """SAT-attack preprocessing over PO fan-in cones, treating RCs as
    primary inputs and SCs as key inputs.

    Each eval is: power cycle, M1a shift of the DIP into the RCs, clockless
    switch to M0, PO read. Returns ({key index: bit}, dip count); only bits
    forced by the accumulated constraints are reported."""
    if o.arch is not ArchKind.R_DFS:
        raise UnsupportedForArch("cone-SAT preprocessing drives the R-DFS surface")
    n = o.design.locked.netlist
    key_nets = list(o.design.locked.key_inputs)
    rng = random.Random(seed)
    recovered: dict[int, int] = {}
    dips_total = 0
    for po in n.primary_outputs:
        cone = extract_cone(n, [po])
        cone_keys = [kn for kn in key_nets if kn in cone.primary_inputs]
        if not cone_keys:
            continue

        def cone_oracle(dip: dict[str, int]) -> dict[str, int]:
            o.power_cycle(rng.randrange(1 << 30))
            _m1a_load(o, {q: dip.get(q, 0) for q, _ in n.dffs})
            o.set_pins(ModePins.r_dfs(0, 0))
            o.set_pi({p: dip.get(p, 0) for p in o._real_pis()})
            bits = o.read_po()
            return {po: bits[n.primary_outputs.index(po)]}

        forced, dips = _dip_loop_forced_bits(
            cone, cone_keys, cone_oracle, max_iterations, conflict_limit
        )
        dips_total += dips
        for kn, bit in forced.items():
            idx = int(kn[len(KEY_PREFIX):])
            assert recovered.get(idx, bit) == bit, "cross-cone inconsistency"
            recovered[idx] = bit
    return recovered, dips_total


def _dip_loop_forced_bits(
    circuit: Netlist, key_nets: list[str], io_oracle, max_iterations, conflict_limit
) -> tuple[dict[str, int], int]:
    f, act, dips = _run_dip_loop(circuit, key_nets, io_oracle, max_iterations, conflict_limit)
    forced: dict[str, int] = {}
    for kn in key_nets:
        v = f.var("A", kn)
        can0 = solve_cnf(f, assumptions=[-act, -v], conflict_limit=conflict_limit)
        can1 = solve_cnf(f, assumptions=[-act, v], conflict_limit=conflict_limit)
        if can0 is not None and can0 != "unknown" and (can1 is None):
            forced[kn] = 0
        elif can1 is not None and can1 != "unknown" and (can0 is None):
            forced[kn] = 1
    return forced, dips


def _out_alias(circuit: Netlist) -> dict[str, str]:
    """Oracle answers are keyed functionally: POs by name, next-state values
    by their q-net; this maps circuit output nets to those keys."""
    alias = {po: po for po in circuit.primary_outputs}
    for q, d in circuit.dffs:
        alias[d] = q
    return alias


def _run_dip_loop(
    circuit: Netlist, key_nets: list[str], io_oracle, max_iterations, conflict_limit
) -> tuple[CnfFormula, int, int]:
    """Shared DIP loop core: returns (formula, activation literal, dips).

    With the activation literal assumed, the formula asks for a new DIP;
    without it, it constrains the keys to agree with every oracle answer."""
    key_set = set(key_nets)
    xs = [i for i in circuit.comb_inputs if i not in key_set]
    outs = list(dict.fromkeys(circuit.comb_outputs))
    alias = _out_alias(circuit)
    f = CnfFormula()
    act = f.new_var()
    f.add_circuit(circuit, "A")
    for net in xs:
        f.bind("B", net, f.var("A", net))
    f.add_circuit(circuit, "B")
    diffs = []
    for net in outs:
        d = f.new_var()
        f.add_gate("XOR", d, [f.var("A", net), f.var("B", net)])
        diffs.append(d)
    f.add_clause([-act] + diffs)
    limit = max_iterations if max_iterations is not None else 10 * max(len(key_nets), 1)
    dips = 0
    while True:
        model = solve_cnf(f, assumptions=[act], conflict_limit=conflict_limit)
        if model == "unknown":
            raise IterationLimit("conflict budget exhausted in DIP search")
        if model is None:
            return f, act, dips
        dips += 1
        if dips > limit:
            raise IterationLimit(f"more than {limit} DIPs")
        dip = {net: int(model[f.var("A", net)]) for net in xs}
        y = io_oracle(dip)
        for copy in ("A", "B"):
            tag = f"eval{dips}{copy}"
            for kn in key_nets:
                f.bind(tag, kn, f.var(copy, kn))
            f.add_circuit(circuit, tag)
            for net in xs:
                f.add_clause([f.lit(tag, net, dip[net])])
            for net in outs:
                f.add_clause([f.lit(tag, net, y[alias[net]])])


# ---------------------------------------------------------------------------
# SAT attack and brute force (combinational, oracle as a function)

def sat_attack(
    locked: LockedDesign, io_oracle, max_iterations: int | None = None,
    conflict_limit: int | None = None,
) -> tuple[Key, int]:
    """Classic DIP loop on a combinational locked circuit.

    `io_oracle` maps an input assignment (dict over non-key combinational
    inputs) to the correct-key output values (dict over POs and d-nets).
    Returns (key, dip count); the key agrees with the oracle on every
    queried DIP and, once the miter is UNSAT, on all inputs."""
    n = locked.netlist
    f, act, dips = _run_dip_loop(n, list(locked.key_inputs), io_oracle,
                                 max_iterations, conflict_limit)
    model = solve_cnf(f, assumptions=[-act], conflict_limit=conflict_limit)
    if model is None:
        raise Unsatisfiable("oracle answers admit no key")
    if model == "unknown":
        raise IterationLimit("conflict budget exhausted extracting the key")
    bits = tuple(int(model[f.var("A", kn)]) for kn in locked.key_inputs)
    return Key(bits), dips


def brute_force_key(
    locked: LockedDesign, io_oracle, max_patterns: int = 1 << 16
) -> Key:
    """Exhaustive key sweep cross-checking `io_oracle` on every input
    pattern (or a deterministic sample when the input space is larger)."""
    k = locked.key_size
    if k > 20:
        raise TooLarge(f"{k} key bits is beyond exhaustive search")
    n = locked.netlist
    key_set = set(locked.key_inputs)
    xs = [i for i in n.comb_inputs if i not in key_set]
    outs = list(dict.fromkeys(n.comb_outputs))
    if 1 << len(xs) <= max_patterns:
        patterns = list(range(1 << len(xs)))
    else:
        rng = random.Random(0xBF)
        patterns = [rng.getrandbits(len(xs)) for _ in range(max_patterns)]
    width = len(patterns)
    mask = (1 << width) - 1
    alias = _out_alias(n)
    assign = {net: 0 for net in xs}
    for col, pat in enumerate(patterns):
        for i, net in enumerate(xs):
            if (pat >> i) & 1:
                assign[net] |= 1 << col
    want = {net: 0 for net in outs}
    for col, pat in enumerate(patterns):
        y = io_oracle({net: (pat >> i) & 1 for i, net in enumerate(xs)})
        for net in outs:
            if y[alias[net]]:
                want[net] |= 1 << col
    for key_val in range(1 << k):
        trial = dict(assign)
        for i, kn in enumerate(locked.key_inputs):
            trial[kn] = mask if (key_val >> i) & 1 else 0
        values = eval_packed(n, trial, width)
        if all(values[net] == want[net] for net in outs):
            return Key(tuple((key_val >> i) & 1 for i in range(k)))
    raise Unsatisfiable("no key matches the oracle")


def comb_io_oracle(reference: Netlist):
    """io_oracle adapter: answer queries from a plain netlist (the unlocked
    design or any golden model). POs are keyed by name, next-state values by
    their q-net."""

    def call(assign: dict[str, int]) -> dict[str, int]:
        values = eval_packed(reference, assign, 1)
        out = {po: values[po] for po in reference.primary_outputs}
        for q, d in reference.dffs:
            out[q] = values[d]
        return out

    return call


def scan_io_oracle(o: Oracle, seed: int = 0):
    """io_oracle adapter over an OPEN_SCAN oracle: state goes in through the
    scan chain, POs are read clockless, a capture grabs the next state, and
    the chains shift it back out."""
    if o.arch is not ArchKind.OPEN_SCAN:
        raise UnsupportedForArch("scan io oracle needs open scan access")
    n = o.design.locked.netlist
    rng = random.Random(seed)
    o.power_cycle(rng.randrange(1 << 30))
    rc_chains = o.design.rc_chain_order
    depth = max(len(c) for c in rc_chains)

    def call(assign: dict[str, int]) -> dict[str, int]:
        for t in range(1, depth + 1):
            si = []
            for c in rc_chains:
                pad = depth - len(c)
                si.append(assign.get(c[depth - t], 0) if t > pad else 0)
            o.clock(ModePins.open_scan(1), si_bits=si)
        o.set_pi({p: assign.get(p, 0) for p in o._real_pis()})
        o.set_pins(ModePins.open_scan(0))
        po_bits = o.read_po()
        o.clock(ModePins.open_scan(0))
        captured: dict[str, list] = {q: None for q, _ in n.dffs}
        streams = [[] for _ in rc_chains]
        for _ in range(depth):
            so = o.clock(ModePins.open_scan(1), si_bits=[0] * len(rc_chains))
            for c, bit in enumerate(so):
                streams[c].append(bit)
        result = {po: po_bits[i] for i, po in enumerate(n.primary_outputs)}
        for c, chain in enumerate(rc_chains):
            for pos, q in enumerate(chain):
                result[q] = streams[c][len(chain) - 1 - pos]
        return result

    return call


# ---------------------------------------------------------------------------
# Glitch-and-leak (mR-DFS)

def glitch_and_leak(
    o: Oracle,
    dm: DelayModel | None = None,
    budget: SearchBudget | None = None,
    seed: int = 0,
    max_plans_per_sc: int = 12,
) -> AttackReport:
    """Shift-and-leak against mR-DFS using sub-window Test pulses.

    The mixed chains are preloaded in M2 while Test has stayed high since
    power-on, one gated functional cycle captures the key into the SCs
    without disturbing the RCs, and every subsequent shift cycle is a
    narrow Test pulse that the MSSD delay unit never registers (each pulse
    re-arms the clock gate, so the key can even be recaptured afterwards)."""
    t0 = time.perf_counter()
    before = dict(o.query_log)
    k = o.design.key_size
    recovered: list[Tri] = [UNKNOWN] * k
    rng = random.Random(seed)
    budget = budget or SearchBudget()
    if o.arch is not ArchKind.MR_DFS or k == 0:
        return _report_from_log(o, before, recovered, 0, t0)
    dm = dm or o.delay_model
    width = glitch_window(dm)
    if pulse_outcome(dm, width) != "shift":
        raise WindowNotFound("no pulse width both avoids the trip and shifts")

    n = o.design.locked.netlist
    cones = _ConeCache(n)
    pos_order = _pos_by_cone_size(n)
    store = _CondStore()
    fail_memo: dict = {}
    known_bits: dict[int, int] = {}
    progress = True
    while progress:
        progress = False
        for i in range(k):
            if recovered[i] is not UNKNOWN:
                continue
            plan = _plan_for_bit(
                o.design, i, known_bits, cones, pos_order, rng, budget,
                max_plans_per_sc, store, fail_memo,
            )
            if plan is None:
                continue
            bit = _execute_plan(o, plan, rng, pulse_width=width)
            if bit is None:
                continue
            recovered[i] = ONE if bit else ZERO
            known_bits[i] = bit
            progress = True
    return _report_from_log(o, before, recovered, 0, t0)
