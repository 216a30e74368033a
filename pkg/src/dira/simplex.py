"""Exact rational feasibility check for systems of linear constraints.

Arithmetic runs on gmpy2.mpq; witnesses come back as Fraction.

Implements the bounded "general simplex" used by SMT solvers: every
constraint with two or more variables gets a slack variable ``s = a.x``
whose bounds carry the constraint's relation; single-variable constraints
become bounds directly.  Pivoting follows Bland's rule (smallest index for
both the leaving and the entering variable), so the procedure never cycles.

The tableau is built once per :class:`Solver`; :meth:`Solver.check` takes
the subset of constraints to enforce and only switches bounds on and off,
so repeated checks over shrinking subsets (the IIS deletion filter) start
from the previous assignment instead of from scratch.

On infeasibility the violated tableau row yields a Farkas-style
explanation: the set of constraints whose bounds that row depends on.  The
explanation is itself infeasible, which the IIS search relies on.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from gmpy2 import mpq

from .linear import EQ, LinearConstraint

_ZERO = mpq(0)


def _q(x: Fraction) -> mpq:
    return mpq(x.numerator, x.denominator)


def _frac(x: mpq) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


class Solver:
    """Incremental feasibility checker over a fixed constraint list."""

    def __init__(self, constraints: Sequence[LinearConstraint], variables: Sequence[str] = ()):
        names: list[str] = list(dict.fromkeys(variables))
        index: dict[str, int] = {n: i for i, n in enumerate(names)}
        for c in constraints:
            for k, _ in c.terms:
                if k not in index:
                    index[k] = len(names)
                    names.append(k)
        self.names = names
        self.nvars = nvars = len(names)
        self.size = len(constraints)
        # per constraint: list of (variable, is_lower, value)
        self.asserts: list[list[tuple[int, bool, mpq]]] = []
        self.falsum: set[int] = set()
        rows: dict[int, dict[int, mpq]] = {}
        cols: dict[int, set[int]] = {i: set() for i in range(nvars)}
        nxt = nvars
        for ci, c in enumerate(constraints):
            if not c.terms:
                if not c.trivially_true():
                    self.falsum.add(ci)
                self.asserts.append([])
                continue
            if len(c.terms) == 1:
                (name, a), = c.terms
                v, val = index[name], _q(c.bound) / _q(a)
                if c.relation == EQ:
                    self.asserts.append([(v, True, val), (v, False, val)])
                else:
                    self.asserts.append([(v, a < 0, val)])
                continue
            s = nxt
            nxt += 1
            cols[s] = set()
            row = {}
            for name, a in c.terms:
                v = index[name]
                row[v] = _q(a)
                cols[v].add(s)
            rows[s] = row
            b = _q(c.bound)
            self.asserts.append([(s, True, b), (s, False, b)] if c.relation == EQ else [(s, False, b)])
        self.rows, self.cols = rows, cols
        self.basic = set(rows)
        self.beta: list[mpq] = [_ZERO] * nxt
        self.lower: list[tuple[mpq, int] | None] = [None] * nxt
        self.upper: list[tuple[mpq, int] | None] = [None] * nxt
        self.active: frozenset[int] = frozenset()

    # -- bounds -----------------------------------------------------------------

    def _set_active(self, active: frozenset[int]):
        touched = set()
        for ci in self.active ^ active:
            touched.update(v for v, _, _ in self.asserts[ci])
        self.active = active
        if not touched:
            return
        for v in touched:
            self.lower[v] = self.upper[v] = None
        for ci in sorted(active):
            for v, is_lower, val in self.asserts[ci]:
                if v not in touched:
                    continue
                if is_lower:
                    b = self.lower[v]
                    if b is None or val > b[0]:
                        self.lower[v] = (val, ci)
                else:
                    b = self.upper[v]
                    if b is None or val < b[0]:
                        self.upper[v] = (val, ci)
        # keep non-basic variables inside their bounds
        for v in sorted(touched):
            if v in self.basic:
                continue
            lo, hi = self.lower[v], self.upper[v]
            if lo is not None and self.beta[v] < lo[0]:
                self._update(v, lo[0])
            elif hi is not None and self.beta[v] > hi[0]:
                self._update(v, hi[0])

    def _update(self, v: int, value: mpq):
        delta = value - self.beta[v]
        self.beta[v] = value
        for k in self.cols[v]:
            self.beta[k] += self.rows[k][v] * delta

    # -- pivoting ---------------------------------------------------------------

    def _pivot_and_update(self, i: int, j: int, target: mpq):
        rows, cols, beta = self.rows, self.cols, self.beta
        row_i = rows[i]
        a_ij = row_i[j]
        theta = (target - beta[i]) / a_ij
        beta[i] = target
        beta[j] += theta
        for k in cols[j]:
            if k != i:
                beta[k] += rows[k][j] * theta
        # express j in terms of i and the rest of row i
        inv = 1 / a_ij
        new_row = {i: inv}
        for v, a in row_i.items():
            if v != j:
                new_row[v] = -a * inv
        for v in row_i:
            cols[v].discard(i)
        del rows[i]
        self.basic.discard(i)
        for k in list(cols[j]):
            row_k = rows[k]
            c = row_k.pop(j)
            for v, a in new_row.items():
                nv = row_k.get(v, _ZERO) + c * a
                if nv == 0:
                    if v in row_k:
                        del row_k[v]
                        cols[v].discard(k)
                else:
                    if v not in row_k:
                        cols[v].add(k)
                    row_k[v] = nv
        cols[j] = set()
        rows[j] = new_row
        self.basic.add(j)
        for v in new_row:
            cols[v].add(j)

    def check(self, active: Iterable[int] | None = None, witness: bool = True):
        """Decide feasibility of the constraints with indices in ``active``.

        Returns ``(True, point)`` with an exact witness over every variable
        (``None`` when ``witness`` is false), or ``(False, conflict)`` where
        ``conflict`` is a sorted tuple of active constraint indices forming an
        infeasible subset.
        """
        active = frozenset(range(self.size) if active is None else active)
        bad = self.falsum & active
        if bad:
            return False, (min(bad),)
        self._set_active(active)
        lower, upper, beta = self.lower, self.upper, self.beta
        for v in range(len(beta)):
            lo, hi = lower[v], upper[v]
            if lo is not None and hi is not None and lo[0] > hi[0]:
                return False, tuple(sorted({lo[1], hi[1]}))
        while True:
            violated = None
            for b in sorted(self.basic):
                lo, hi = lower[b], upper[b]
                if lo is not None and beta[b] < lo[0]:
                    violated = (b, True)
                    break
                if hi is not None and beta[b] > hi[0]:
                    violated = (b, False)
                    break
            if violated is None:
                break
            i, below = violated
            row_i = self.rows[i]
            entering = None
            for j in sorted(row_i):
                a = row_i[j]
                if below:
                    ok = (a > 0 and (upper[j] is None or beta[j] < upper[j][0])) or \
                         (a < 0 and (lower[j] is None or beta[j] > lower[j][0]))
                else:
                    ok = (a < 0 and (upper[j] is None or beta[j] < upper[j][0])) or \
                         (a > 0 and (lower[j] is None or beta[j] > lower[j][0]))
                if ok:
                    entering = j
                    break
            if entering is None:
                reasons = {lower[i][1] if below else upper[i][1]}
                for j, a in row_i.items():
                    if below:
                        b = upper[j] if a > 0 else lower[j]
                    else:
                        b = lower[j] if a > 0 else upper[j]
                    reasons.add(b[1])
                return False, tuple(sorted(reasons))
            self._pivot_and_update(i, entering, lower[i][0] if below else upper[i][0])
        if not witness:
            return True, None
        return True, {self.names[v]: _frac(beta[v]) for v in range(self.nvars)}


def solve(constraints: Sequence[LinearConstraint], variables: Sequence[str] = ()):
    """One-shot :meth:`Solver.check` over every constraint."""
    return Solver(constraints, variables).check()
