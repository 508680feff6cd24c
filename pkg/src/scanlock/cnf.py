"""Tseitin CNF encoding of netlists, DIMACS emission, and miter building.

Variables are positive integers; a literal is a signed variable. One
``CnfFormula`` can hold several circuit copies distinguished by a tag, with
shared nets bound to the same variable, which is how miters and the
attack-loop constraints are composed.
"""

from __future__ import annotations

import itertools
import os
import subprocess
import tempfile
from dataclasses import dataclass, field

from .errors import UnknownNet
from .netlist import Netlist
from .sat import SatSolver


@dataclass
class CnfFormula:
    clauses: list[list[int]] = field(default_factory=list)
    var_of_net: dict[tuple[str, str], int] = field(default_factory=dict)
    num_vars: int = 0

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def var(self, tag: str, net: str) -> int:
        key = (tag, net)
        v = self.var_of_net.get(key)
        if v is None:
            v = self.var_of_net[key] = self.new_var()
        return v

    def bind(self, tag: str, net: str, var: int) -> None:
        """Pre-map a net of a copy to an existing variable (net sharing)."""
        self.var_of_net[(tag, net)] = var

    def add_clause(self, lits) -> None:
        lits = list(lits)
        if not lits:
            raise ValueError("empty clause")
        if any(abs(l) > self.num_vars or l == 0 for l in lits):
            raise ValueError(f"literal out of range in {lits}")
        self.clauses.append(lits)

    def add_gate(self, kind: str, out: int, ins: list[int]) -> None:
        if kind == "NOT":
            self.add_clause([-out, -ins[0]])
            self.add_clause([out, ins[0]])
        elif kind == "BUF":
            self.add_clause([-out, ins[0]])
            self.add_clause([out, -ins[0]])
        elif kind in ("AND", "NAND"):
            o = out if kind == "AND" else -out
            for i in ins:
                self.add_clause([-o, i])
            self.add_clause([o] + [-i for i in ins])
        elif kind in ("OR", "NOR"):
            o = out if kind == "OR" else -out
            for i in ins:
                self.add_clause([o, -i])
            self.add_clause([-o] + list(ins))
        elif kind in ("XOR", "XNOR"):
            flip = kind == "XNOR"
            for bits in itertools.product((0, 1), repeat=len(ins)):
                parity = (sum(bits) & 1) ^ flip
                clause = [i if b == 0 else -i for i, b in zip(ins, bits)]
                clause.append(out if parity else -out)
                self.add_clause(clause)
        else:
            raise ValueError(f"unknown gate kind {kind}")

    def add_circuit(self, n: Netlist, tag: str) -> None:
        """Tseitin-encode every gate of `n` under copy tag `tag`."""
        for out, kind, ins in n.gates:
            self.add_gate(kind, self.var(tag, out), [self.var(tag, i) for i in ins])
        for net in n.comb_inputs:  # ensure inputs have variables even if unused
            self.var(tag, net)

    def lit(self, tag: str, net: str, value: int) -> int:
        key = (tag, net)
        if key not in self.var_of_net:
            raise UnknownNet(f"{tag}:{net}")
        v = self.var_of_net[key]
        return v if value else -v

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def to_cnf(n: Netlist, copy_tag: str = "") -> CnfFormula:
    """Tseitin encoding of the combinational portion of `n`.

    The formula's satisfying assignments are exactly the net valuations
    consistent with gate semantics; variable count equals the net count.
    """
    f = CnfFormula()
    f.add_circuit(n, copy_tag)
    return f


def miter(a: Netlist, b: Netlist, formula: CnfFormula | None = None,
          tag_a: str = "a", tag_b: str = "b") -> CnfFormula:
    """Inequivalence miter over shared combinational inputs.

    Satisfiable iff some input assignment makes the two circuits differ on
    a PO or a DFF d-net. Both netlists must agree on comb input/output sets.
    """
    if set(a.comb_inputs) != set(b.comb_inputs) or set(a.comb_outputs) != set(
        b.comb_outputs
    ):
        raise ValueError("miter requires matching I/O signatures")
    f = formula if formula is not None else CnfFormula()
    f.add_circuit(a, tag_a)
    for net in b.comb_inputs:
        f.bind(tag_b, net, f.var(tag_a, net))
    f.add_circuit(b, tag_b)
    diffs = []
    for net in dict.fromkeys(a.comb_outputs):
        d = f.new_var()
        f.add_gate("XOR", d, [f.var(tag_a, net), f.var(tag_b, net)])
        diffs.append(d)
    f.add_clause(diffs)
    return f


def solve_cnf(
    f: CnfFormula, assumptions=(), conflict_limit: int | None = None
) -> list[bool] | None | str:
    """Solve a formula; returns a model (list indexed by var), None when
    unsatisfiable, or "unknown" when the conflict budget ran out.

    Set SCANLOCK_SOLVER to the path of a MiniSat-compatible binary to run an
    external DIMACS solver instead of the built-in one.
    """
    external = os.environ.get("SCANLOCK_SOLVER")
    if external:
        return _solve_external(external, f, assumptions)
    s = SatSolver(f.num_vars)
    for c in f.clauses:
        s.add_clause(c)
    res = s.solve(assumptions, conflict_limit=conflict_limit)
    if res is None:
        return "unknown"
    return s.model() if res else None


def _solve_external(path: str, f: CnfFormula, assumptions) -> list[bool] | None:
    with tempfile.TemporaryDirectory() as d:
        cnf_path = os.path.join(d, "problem.cnf")
        out_path = os.path.join(d, "result.txt")
        extra = [[l] for l in assumptions]
        with open(cnf_path, "w") as fh:
            fh.write(f"p cnf {f.num_vars} {len(f.clauses) + len(extra)}\n")
            for c in f.clauses + extra:
                fh.write(" ".join(map(str, c)) + " 0\n")
        proc = subprocess.run(
            [path, cnf_path, out_path], capture_output=True, text=True
        )
        text = ""
        if os.path.exists(out_path):
            with open(out_path) as fh:
                text = fh.read()
        if not text:  # solvers that print to stdout instead
            text = proc.stdout
        if "UNSAT" in text:
            return None
        model = [False] * (f.num_vars + 1)
        for tok in text.replace("SAT", " ").replace("v", " ").split():
            try:
                lit = int(tok)
            except ValueError:
                continue
            if lit != 0 and abs(lit) <= f.num_vars:
                model[abs(lit)] = lit > 0
        return model


def enumerate_models(
    f: CnfFormula, project_vars: list[int], limit: int = 1 << 20
) -> list[tuple[int, ...]]:
    """All satisfying assignments projected onto `project_vars`.

    Blocking-clause enumeration; intended for small projections.
    """
    s = SatSolver(f.num_vars)
    for c in f.clauses:
        s.add_clause(c)
    found: list[tuple[int, ...]] = []
    while len(found) < limit:
        res = s.solve()
        if not res:
            break
        m = s.model()
        proj = tuple(1 if m[v] else 0 for v in project_vars)
        found.append(proj)
        block = [(-v if m[v] else v) for v in project_vars]
        if not block:
            break
        s.add_clause(block)
    return found
