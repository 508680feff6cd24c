"""Gate-level netlists: BENCH parsing, 2- and 3-valued evaluation, cones, area.

A ``Netlist`` is an immutable DAG of gates plus primary I/O and DFF state
elements. The combinational portion treats DFF q-nets as pseudo-inputs and
d-nets as pseudo-outputs; evaluation is always a single topological pass.

Multi-pattern evaluation packs one pattern per bit into Python integers so
that a whole pattern set costs one pass over the gates.
"""

from __future__ import annotations

import enum
import graphlib
import re
from dataclasses import dataclass, field
from functools import reduce

from .errors import (
    BenchSyntaxError,
    CycleError,
    DuplicateNet,
    MissingAssignment,
    UndefinedNet,
    UnknownNet,
)

GATE_KINDS = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF")

# NAND2-equivalent weights. Two-input weights scale as (k-1)x for k-input
# gates; storage and mux weights feed the scan-architecture area accounting.
GE = {
    "NAND": 1.0,
    "NOR": 1.0,
    "AND": 1.5,
    "OR": 1.5,
    "NOT": 0.5,
    "BUF": 0.5,
    "XOR": 2.5,
    "XNOR": 2.5,
    "MUX21": 2.0,
    "MUX41": 5.0,
    "DFF": 6.0,
    "DFF_RST": 7.0,
}


class Tri(enum.Enum):
    """Kleene three-valued logic value."""

    ZERO = 0
    ONE = 1
    X = 2

    def __repr__(self):
        return self.name


ZERO, ONE, X = Tri.ZERO, Tri.ONE, Tri.X

Gate = tuple[str, str, tuple[str, ...]]  # (output net, kind, input nets)


@dataclass(eq=False)
class Netlist:
    """Immutable gate-level netlist. Do not mutate fields after construction."""

    gates: tuple[Gate, ...]
    primary_inputs: tuple[str, ...]
    primary_outputs: tuple[str, ...]
    dffs: tuple[tuple[str, str], ...] = ()  # (q-net, d-net)
    name: str = "netlist"

    def __post_init__(self):
        self.gates = tuple((o, k, tuple(i)) for o, k, i in self.gates)
        self.primary_inputs = tuple(self.primary_inputs)
        self.primary_outputs = tuple(self.primary_outputs)
        self.dffs = tuple(tuple(p) for p in self.dffs)
        self._validate()
        self._index()

    def _validate(self):
        driven = set()
        for pi in self.primary_inputs:
            if pi in driven:
                raise DuplicateNet(pi)
            driven.add(pi)
        for q, _d in self.dffs:
            if q in driven:
                raise DuplicateNet(q)
            driven.add(q)
        for out, kind, ins in self.gates:
            if out in driven:
                raise DuplicateNet(out)
            driven.add(out)
            if kind not in GATE_KINDS:
                raise ValueError(f"unknown gate kind {kind!r} for net {out}")
            if kind in ("NOT", "BUF"):
                if len(ins) != 1:
                    raise ValueError(f"{kind} gate {out} must have exactly 1 input")
            elif len(ins) < 2:
                raise ValueError(f"{kind} gate {out} must have >= 2 inputs")
        for out, _kind, ins in self.gates:
            for i in ins:
                if i not in driven:
                    raise UndefinedNet(f"{i} (input of gate {out})")
        for q, d in self.dffs:
            if d not in driven:
                raise UndefinedNet(f"{d} (data input of DFF {q})")
        for po in self.primary_outputs:
            if po not in driven:
                raise UndefinedNet(f"{po} (primary output)")

    def _index(self):
        self.gate_map: dict[str, tuple[str, tuple[str, ...]]] = {
            out: (kind, ins) for out, kind, ins in self.gates
        }
        self.comb_inputs: tuple[str, ...] = self.primary_inputs + tuple(
            q for q, _ in self.dffs
        )
        self.comb_outputs: tuple[str, ...] = self.primary_outputs + tuple(
            d for _, d in self.dffs
        )
        graph = {out: ins for out, _kind, ins in self.gates}
        try:
            order = tuple(graphlib.TopologicalSorter(graph).static_order())
        except graphlib.CycleError as exc:
            raise CycleError(f"combinational loop: {exc.args[1]}") from None
        self.topo_gates: tuple[Gate, ...] = tuple(
            (n,) + self.gate_map[n] for n in order if n in self.gate_map
        )

    @property
    def nets(self) -> tuple[str, ...]:
        return self.comb_inputs + tuple(out for out, _k, _i in self.gates)

    def fanout(self) -> dict[str, list[tuple]]:
        """Consumers of each net: ('gate', out, pos), ('dff', q) or ('po', net)."""
        sinks: dict[str, list[tuple]] = {n: [] for n in self.nets}
        for out, _kind, ins in self.gates:
            for pos, i in enumerate(ins):
                sinks[i].append(("gate", out, pos))
        for q, d in self.dffs:
            sinks[d].append(("dff", q))
        for po in self.primary_outputs:
            sinks[po].append(("po", po))
        return sinks

    def __eq__(self, other):
        if not isinstance(other, Netlist):
            return NotImplemented
        return (
            self.gates == other.gates
            and self.primary_inputs == other.primary_inputs
            and self.primary_outputs == other.primary_outputs
            and self.dffs == other.dffs
        )

    def __hash__(self):
        return hash((self.gates, self.primary_inputs, self.primary_outputs, self.dffs))


# ---------------------------------------------------------------------------
# BENCH format

_DEF_RE = re.compile(r"^([^\s(),=#]+)\s*=\s*([A-Za-z]+)\s*\((.*)\)$")
_IO_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s(),=#]+)\s*\)$", re.IGNORECASE)


def parse_bench(text: str | bytes, name: str = "netlist") -> Netlist:
    """Parse BENCH text into a Netlist.

    Accepts `INPUT(n)`, `OUTPUT(n)`, `n = KIND(a, b, ...)` and `n = DFF(d)`.
    Keywords are case-insensitive, `INV` is a synonym for `NOT`, `#` starts a
    comment. Declaration order of inputs and outputs is preserved.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[Gate] = []
    dffs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO_RE.match(line)
        if m:
            (inputs if m.group(1).upper() == "INPUT" else outputs).append(m.group(2))
            continue
        m = _DEF_RE.match(line)
        if not m:
            raise BenchSyntaxError(f"unrecognized statement {line!r}", lineno)
        out, kind, args = m.group(1), m.group(2).upper(), m.group(3)
        ins = tuple(a.strip() for a in args.split(",")) if args.strip() else ()
        if any(not i or re.search(r"[\s(),=#]", i) for i in ins):
            raise BenchSyntaxError(f"bad argument list {args!r}", lineno, m.start(3))
        if kind == "INV":
            kind = "NOT"
        if kind == "DFF":
            if len(ins) != 1:
                raise BenchSyntaxError("DFF takes exactly one input", lineno)
            dffs.append((out, ins[0]))
        elif kind in GATE_KINDS:
            if kind in ("NOT", "BUF"):
                if len(ins) != 1:
                    raise BenchSyntaxError(f"{kind} takes exactly one input", lineno)
            elif len(ins) < 2:
                raise BenchSyntaxError(f"{kind} needs at least two inputs", lineno)
            gates.append((out, kind, ins))
        else:
            raise BenchSyntaxError(f"unknown gate kind {kind!r}", lineno, m.start(2))
    return Netlist(tuple(gates), tuple(inputs), tuple(outputs), tuple(dffs), name)


def serialize_bench(n: Netlist) -> str:
    """Emit BENCH text; parse_bench(serialize_bench(n)) reproducesn."""
    lines = [f"# {n.name}"]
    lines += [f"INPUT({p})" for p in n.primary_inputs]
    lines += [f"OUTPUT({p})" for p in n.primary_outputs]
    lines += [f"{q} = DFF({d})" for q, d in n.dffs]
    lines += [f"{out} = {kind}({', '.join(ins)})" for out, kind, ins in n.gates]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Evaluation

def _apply_packed(kind: str, vals: list[int], mask: int) -> int:
    if kind == "AND":
        return reduce(lambda a, b: a & b, vals)
    if kind == "NAND":
        return ~reduce(lambda a, b: a & b, vals) & mask
    if kind == "OR":
        return reduce(lambda a, b: a | b, vals)
    if kind == "NOR":
        return ~reduce(lambda a, b: a | b, vals) & mask
    if kind == "XOR":
        return reduce(lambda a, b: a ^ b, vals)
    if kind == "XNOR":
        return ~reduce(lambda a, b: a ^ b, vals) & mask
    if kind == "NOT":
        return ~vals[0] & mask
    return vals[0]  # BUF


def eval_packed(
    n: Netlist,
    assign: dict[str, int],
    width: int,
    stem_force: dict[str, int] | None = None,
    branch_force: dict[tuple[str, int], int] | None = None,
) -> dict[str, int]:
    """Evaluate `width` patterns at once, one pattern per bit.

    `assign` maps every PI and q-net to a packed integer. `stem_force`
    overrides whole nets and `branch_force` overrides single gate inputs
    keyed by (gate output net, input position); both model stuck-at faults.
    """
    mask = (1 << width) - 1
    values: dict[str, int] = {}
    for net in n.comb_inputs:
        if net not in assign:
            raise MissingAssignment(net)
        values[net] = assign[net] & mask
    if stem_force:
        for net, v in stem_force.items():
            if net in values:
                values[net] = v & mask
    for out, kind, ins in n.topo_gates:
        if branch_force:
            vals = [
                branch_force.get((out, pos), values[i]) & mask
                for pos, i in enumerate(ins)
            ]
        else:
            vals = [values[i] for i in ins]
        v = _apply_packed(kind, vals, mask)
        if stem_force and out in stem_force:
            v = stem_force[out] & mask
        values[out] = v
    return values


def eval_comb(n: Netlist, assign: dict[str, int]) -> dict[str, int]:
    """Single-pattern two-valued evaluation over all nets."""
    return eval_packed(n, assign, 1)


def _tri_to_pair(v: Tri) -> tuple[int, int]:
    return (1, 0) if v is ONE else (0, 1) if v is ZERO else (0, 0)


def _pair_to_tri(one: int, zero: int) -> Tri:
    return ONE if one else ZERO if zero else X


def eval3_packed(
    n: Netlist, assign: dict[str, tuple[int, int]], width: int
) -> dict[str, tuple[int, int]]:
    """Packed Kleene evaluation; nets are (is-one, is-zero) bitmask pairs."""
    mask = (1 << width) - 1
    values: dict[str, tuple[int, int]] = {}
    for net in n.comb_inputs:
        if net not in assign:
            raise MissingAssignment(net)
        one, zero = assign[net]
        values[net] = (one & mask, zero & mask)

    def kleene(kind, pairs):
        if kind in ("NAND", "NOR", "XNOR", "NOT"):
            one, zero = kleene({"NAND": "AND", "NOR": "OR", "XNOR": "XOR", "NOT": "BUF"}[kind], pairs)
            return zero, one
        one, zero = pairs[0]
        for o, z in pairs[1:]:
            if kind == "AND":
                one, zero = one & o, zero | z
            elif kind == "OR":
                one, zero = one | o, zero & z
            elif kind == "XOR":
                one, zero = (one & z) | (zero & o), (one & o) | (zero & z)
        return one, zero

    for out, kind, ins in n.topo_gates:
        values[out] = kleene(kind, [values[i] for i in ins])
    return values


def eval3(n: Netlist, assign: dict[str, Tri]) -> dict[str, Tri]:
    """Three-valued evaluation in topological order.

    Monotone in the Kleene order: refining any X input to 0/1 never flips a
    definite output.
    """
    packed = eval3_packed(n, {k: _tri_to_pair(v) for k, v in assign.items()}, 1)
    return {net: _pair_to_tri(one, zero) for net, (one, zero) in packed.items()}


# ---------------------------------------------------------------------------
# Structure

def extract_cone(n: Netlist, po_subset) -> Netlist:
    """Transitive fan-in cone of the given POs and/or DFF d-nets.

    The cone is purely combinational: reachable PIs and q-nets become its
    primary inputs, and it agrees with the parent on `po_subset` for every
    assignment.
    """
    targets = list(po_subset)
    allowed = set(n.primary_outputs) | {d for _, d in n.dffs}
    for t in targets:
        if t not in allowed:
            raise UnknownNet(t)
    reached: set[str] = set()
    stack = list(targets)
    while stack:
        net = stack.pop()
        if net in reached:
            continue
        reached.add(net)
        if net in n.gate_map:
            stack.extend(n.gate_map[net][1])
    cone_gates = tuple(g for g in n.gates if g[0] in reached)
    cone_pis = tuple(p for p in n.comb_inputs if p in reached)
    target_set = set(targets)
    cone_pos = tuple(t for t in n.comb_outputs if t in target_set)
    return Netlist(cone_gates, cone_pis, cone_pos, (), f"{n.name}.cone")


def transitive_fanin_sets(n: Netlist) -> dict[str, set[str]]:
    """Map each net to the set of nets in its transitive fan-in (inclusive)."""
    sets: dict[str, set[str]] = {p: {p} for p in n.comb_inputs}
    for out, _kind, ins in n.topo_gates:
        s = {out}
        for i in ins:
            s |= sets[i]
        sets[out] = s
    return sets


def gate_equivalents(n: Netlist) -> float:
    """NAND2-equivalent area of the netlist; k-input gates cost (k-1)x."""
    total = 0.0
    for _out, kind, ins in n.gates:
        if kind in ("NOT", "BUF"):
            total += GE[kind]
        else:
            total += GE[kind] * (len(ins) - 1)
    total += GE["DFF"] * len(n.dffs)
    return total
