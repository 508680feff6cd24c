"""In-repo SAT solver: DPLL search with two watched literals per clause,
first-UIP conflict learning, activity-ordered decisions, and phase saving.

Small and dependency-free; the problem sizes in this package are desk-scale.
A conflict budget turns hard instances into an explicit "unknown" answer
instead of an open-ended run.
"""

from __future__ import annotations

import heapq


class SatSolver:
    def __init__(self, num_vars: int = 0):
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[list[int]]] = {}
        self.assign: list[int] = [0]  # 0 unassigned, 1 true, -1 false
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.heap: list[tuple[float, int]] = []
        self.ok = True
        self.ensure_vars(num_vars)

    # -- setup ------------------------------------------------------------

    def ensure_vars(self, n: int) -> None:
        while len(self.assign) <= n:
            self.assign.append(0)
            self.level.append(0)
            self.reason.append(None)
            self.activity.append(0.0)
            self.phase.append(False)
            heapq.heappush(self.heap, (0.0, len(self.assign) - 1))

    def add_clause(self, lits) -> bool:
        """Add a clause at decision level 0. Returns False if the solver is
        now known unsatisfiable."""
        assert not self.trail_lim, "clauses may only be added at level 0"
        lits = sorted(set(lits), key=abs)
        if any(-l in lits for l in lits):
            return self.ok  # tautology
        self.ensure_vars(max((abs(l) for l in lits), default=0))
        lits = [l for l in lits if self._value(l) != -1]
        if any(self._value(l) == 1 for l in lits):
            return self.ok
        if not lits:
            self.ok = False
            return False
        if len(lits) == 1:
            self._enqueue(lits[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.clauses.append(lits)
        self.watches.setdefault(lits[0], []).append(lits)
        self.watches.setdefault(lits[1], []).append(lits)
        return self.ok

    # -- core -------------------------------------------------------------

    def _value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _enqueue(self, lit: int, reason) -> None:
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            ws = self.watches.get(-p)
            if not ws:
                continue
            self.watches[-p] = kept = []
            for ci, c in enumerate(ws):
                if c[0] == -p:
                    c[0], c[1] = c[1], c[0]
                if self._value(c[0]) == 1:
                    kept.append(c)
                    continue
                for k in range(2, len(c)):
                    if self._value(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(c[1], []).append(c)
                        break
                else:
                    kept.append(c)
                    if self._value(c[0]) == -1:
                        kept.extend(ws[ci + 1 :])
                        self.qhead = len(self.trail)
                        return c
                    self._enqueue(c[0], c)
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for i in range(1, len(self.activity)):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100
        heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, conflict):
        learnt: list[int] = []
        seen: set[int] = set()
        counter = 0
        p = None
        c = conflict
        idx = len(self.trail) - 1
        cur = len(self.trail_lim)
        while True:
            for q in c[1:] if p is not None else c:
                v = abs(q)
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen.discard(abs(p))
            counter -= 1
            if counter == 0:
                break
            c = self.reason[abs(p)]
        learnt.insert(0, -p)
        bt = max((self.level[abs(q)] for q in learnt[1:]), default=0)
        return learnt, bt

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        bound = self.trail_lim[lvl]
        for lit in reversed(self.trail[bound:]):
            v = abs(lit)
            self.phase[v] = lit > 0
            self.assign[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[bound:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _decide_var(self) -> int:
        while self.heap:
            _, v = heapq.heappop(self.heap)
            if self.assign[v] == 0:
                return v
        for v in range(1, len(self.assign)):
            if self.assign[v] == 0:
                return v
        return 0

    def _record_learnt(self, learnt) -> None:
        if len(learnt) == 1:
            self._enqueue(learnt[0], None)
            return
        # watch the asserting literal and one literal from the backjump level
        top = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
        learnt[1], learnt[top] = learnt[top], learnt[1]
        self.clauses.append(learnt)
        self.watches.setdefault(learnt[0], []).append(learnt)
        self.watches.setdefault(learnt[1], []).append(learnt)
        self._enqueue(learnt[0], learnt)

    def solve(self, assumptions=(), conflict_limit: int | None = None):
        """True if satisfiable, False if not, None if the budget ran out."""
        if not self.ok:
            return False
        if self._propagate() is not None:
            self.ok = False
            return False
        assumptions = list(assumptions)
        conflicts = 0
        restart_at = 100
        self._model: list[bool] | None = None
        while True:
            conflict = self._propagate()
            if conflict is not None:
                conflicts += 1
                if conflict_limit is not None and conflicts > conflict_limit:
                    self._cancel_until(0)
                    return None
                if not self.trail_lim:
                    self.ok = False
                    return False
                learnt, bt = self._analyze(conflict)
                self._cancel_until(max(bt, 0))
                self._record_learnt(learnt)
                self.var_inc /= 0.95
                if conflicts >= restart_at:
                    restart_at += restart_at // 2
                    self._cancel_until(0)
                continue
            # (re-)assert assumptions in order before any free decision
            pending = None
            for a in assumptions:
                val = self._value(a)
                if val == -1:
                    self._cancel_until(0)
                    return False
                if val == 0:
                    pending = a
                    break
            if pending is not None:
                self.trail_lim.append(len(self.trail))
                self._enqueue(pending, None)
                continue
            v = self._decide_var()
            if v == 0:
                self._model = [False] + [self.assign[i] == 1 for i in range(1, len(self.assign))]
                self._cancel_until(0)
                return True
            self.trail_lim.append(len(self.trail))
            self._enqueue(v if self.phase[v] else -v, None)

    def model(self) -> list[bool]:
        """Assignment of the last satisfiable solve(), indexed by variable."""
        if self._model is None:
            raise RuntimeError("no model available")
        return self._model
