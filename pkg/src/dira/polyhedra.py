"""Tagged linear systems: feasibility, IIS extraction, Fourier-Motzkin projection."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from . import simplex
from .linear import EQ, LE, LinearConstraint


class FeasibleInput(ValueError):
    """Raised by :func:`find_iis` when the system has a solution."""


@dataclass(frozen=True)
class LinearSystem:
    """An ordered list of constraints, each with a unique provenance tag.

    ``origin`` optionally maps LP variable names back to state variables (or
    ``None`` for auxiliary variables such as dwell times); without it every
    variable stands for itself.
    """

    constraints: tuple[LinearConstraint, ...]
    tags: tuple[Hashable, ...] = None
    variables: tuple[str, ...] = ()
    origin: Mapping[str, str | None] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tags is None:
            object.__setattr__(self, "tags", tuple(range(len(self.constraints))))
        if len(self.tags) != len(self.constraints):
            raise ValueError("one tag per constraint required")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("constraint tags must be unique")
        used = dict.fromkeys(self.variables)
        for c in self.constraints:
            used.update(dict.fromkeys(k for k, _ in c.terms))
        object.__setattr__(self, "variables", tuple(used))

    @classmethod
    def of(cls, constraints: Iterable[LinearConstraint], variables: Sequence[str] = ()) -> "LinearSystem":
        return cls(tuple(constraints), None, tuple(variables))

    def __len__(self) -> int:
        return len(self.constraints)

    def subset(self, positions: Iterable[int]) -> "LinearSystem":
        pos = sorted(positions)
        return LinearSystem(tuple(self.constraints[i] for i in pos),
                            tuple(self.tags[i] for i in pos), self.variables, self.origin)

    def by_tag(self) -> dict[Hashable, LinearConstraint]:
        return dict(zip(self.tags, self.constraints))

    def to_text(self) -> str:
        return "\n".join(f"{c.to_text()}    # {t}" for t, c in zip(self.tags, self.constraints))


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: dict[str, Fraction] | None = None

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class IIS:
    """An irreducible infeasible subset of a :class:`LinearSystem`."""

    system: LinearSystem

    @property
    def tags(self) -> tuple[Hashable, ...]:
        return self.system.tags

    @property
    def constraints(self) -> tuple[LinearConstraint, ...]:
        return self.system.constraints

    def __len__(self) -> int:
        return len(self.system)


def is_feasible(system: LinearSystem | Sequence[LinearConstraint]) -> Feasibility:
    if not isinstance(system, LinearSystem):
        system = LinearSystem.of(system)
    ok, result = simplex.solve(system.constraints, system.variables)
    if not ok:
        return Feasibility(False)
    assert all(c.satisfied_by(result) for c in system.constraints), "simplex witness check failed"
    return Feasibility(True, result)


def find_iis(system: LinearSystem) -> IIS:
    """Deletion filter over the solver's infeasibility explanation.

    Candidates are scanned in system order; a constraint is dropped for good
    when the rest stays infeasible, and the candidate set then shrinks to the
    new explanation (which always keeps the constraints already proven
    necessary).
    """
    cons = system.constraints
    ok, conflict = simplex.solve(cons, system.variables)
    if ok:
        raise FeasibleInput("system is feasible; no IIS exists")
    # positions below index into the explanation, which the solver keeps fixed
    solver = simplex.Solver([cons[k] for k in conflict])
    candidate = list(range(len(conflict)))
    i = 0
    while i < len(candidate):
        trial = candidate[:i] + candidate[i + 1:]
        ok, sub_conflict = solver.check(trial, witness=False)
        if ok:
            i += 1
        else:
            candidate = list(sub_conflict)
    return IIS(system.subset([conflict[k] for k in candidate]))


def var_basis(iis: IIS) -> frozenset[str]:
    """State variables occurring with a nonzero coefficient in the IIS."""
    origin = iis.system.origin
    out = set()
    for c in iis.constraints:
        for k, _ in c.terms:
            v = origin.get(k, k) if origin is not None else k
            if v is not None:
                out.add(v)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Fourier-Motzkin

def fm_eliminate(system: LinearSystem, var: str) -> LinearSystem:
    """Existentially project ``var`` out of ``system``.

    Equalities mentioning ``var`` are split into two inequalities first.
    Combined constraints are tagged ``("fm", pos_tag, neg_tag)``.
    """
    if var not in system.variables:
        raise KeyError(var)
    keep_c, keep_t = [], []
    pos, neg = [], []
    for c, t in zip(system.constraints, system.tags):
        a = c.coeff(var)
        if a == 0:
            keep_c.append(c)
            keep_t.append(t)
            continue
        halves = c.split()
        half_tags = (t,) if len(halves) == 1 else (("le", t), ("ge", t))
        for h, ht in zip(halves, half_tags):
            (pos if h.coeff(var) > 0 else neg).append((h, ht))
    for p, pt in pos:
        ap = p.coeff(var)
        for n, nt in neg:
            an = -n.coeff(var)
            coeffs: dict[str, Fraction] = {}
            for k, c in p.terms:
                coeffs[k] = coeffs.get(k, Fraction(0)) + c * an
            for k, c in n.terms:
                coeffs[k] = coeffs.get(k, Fraction(0)) + c * ap
            coeffs.pop(var, None)
            keep_c.append(LinearConstraint.le(coeffs, p.bound * an + n.bound * ap).normalized())
            keep_t.append(("fm", pt, nt))
    variables = tuple(v for v in system.variables if v != var)
    return LinearSystem(tuple(keep_c), tuple(keep_t), variables, system.origin)


def simplify(constraints: Iterable[LinearConstraint]) -> list[LinearConstraint]:
    """Syntactic cleanup: drop tautologies, keep the tightest of parallel rows.

    A set containing a constant contradiction collapses to ``[0 <= -1]``.
    """
    best: dict[tuple, LinearConstraint] = {}
    eqs: dict[tuple, LinearConstraint] = {}
    for c in constraints:
        if c.is_constant():
            if c.trivially_true():
                continue
            return [LinearConstraint.le({}, -1)]
        n = c.normalized()
        if n.relation == EQ:
            prev = eqs.get(n.terms)
            if prev is not None and prev.bound != n.bound:
                return [LinearConstraint.le({}, -1)]
            eqs[n.terms] = n
            continue
        prev = best.get(n.terms)
        if prev is None or n.bound < prev.bound:
            best[n.terms] = n
    out: list[LinearConstraint] = list(eqs.values())
    for terms, c in best.items():
        neg = tuple((k, -v) for k, v in terms)
        e = eqs.get(terms) or eqs.get(neg)
        if e is not None:
            continue_if_implied = _implied_by_equality(c, e)
            if continue_if_implied is True:
                continue
            if continue_if_implied is False:
                return [LinearConstraint.le({}, -1)]
        out.append(c)
    # merge opposite inequality pairs with equal bounds into equalities
    merged: list[LinearConstraint] = []
    used = set()
    by_terms = {c.terms: c for c in out if c.relation == LE}
    for c in out:
        if id(c) in used:
            continue
        if c.relation == LE:
            neg = tuple((k, -v) for k, v in c.terms)
            o = by_terms.get(neg)
            if o is not None and id(o) not in used:
                if o.bound == -c.bound:
                    used.add(id(o))
                    used.add(id(c))
                    merged.append(LinearConstraint.eq(c.terms, c.bound).normalized())
                    continue
                if o.bound < -c.bound:
                    return [LinearConstraint.le({}, -1)]
        used.add(id(c))
        merged.append(c)
    merged.sort(key=_sort_key)
    return merged


def _implied_by_equality(c: LinearConstraint, e: LinearConstraint):
    # c is an inequality with terms equal to +-e.terms; both normalized
    if c.terms == e.terms:
        return True if e.bound <= c.bound else False
    return True if -e.bound <= c.bound else False


def _sort_key(c: LinearConstraint):
    return (tuple(k for k, _ in c.terms), c.relation, tuple(v for _, v in c.terms), c.bound)


def implies(premises: Sequence[LinearConstraint], c: LinearConstraint) -> bool:
    """True when every point of the (nonempty) premise set satisfies ``c``.

    Decided by Farkas' lemma as a feasibility problem over multipliers:
    ``y >= 0`` (free for equalities) with ``sum y_r a_r = a`` and
    ``sum y_r b_r <= b``.
    """
    if c.relation == EQ:
        return all(implies(premises, h) for h in c.split())
    if c.trivially_true():
        return True
    names = sorted({k for p in premises for k, _ in p.terms} | set(c.variables))
    rows: list[LinearConstraint] = []
    cols: dict[str, dict[str, Fraction]] = {n: {} for n in names}
    bound_row: dict[str, Fraction] = {}
    for r, p in enumerate(premises):
        y = f"y{r}"
        if p.relation == LE:
            rows.append(LinearConstraint.ge({y: 1}, 0))
        for k, a in p.terms:
            cols[k][y] = a
        if p.bound != 0:
            bound_row[y] = p.bound
    coeff = c.coeffs
    for n in names:
        rows.append(LinearConstraint.eq(cols[n], coeff.get(n, 0)))
    rows.append(LinearConstraint.le(bound_row, c.bound))
    return simplex.solve(rows)[0]


def remove_redundant(constraints: Sequence[LinearConstraint]) -> list[LinearConstraint]:
    """Drop constraints implied by the others (scan in order)."""
    cons = simplify(constraints)
    if len(cons) <= 1:
        return cons
    if not simplex.solve(cons)[0]:
        return [LinearConstraint.le({}, -1)]
    keep = list(cons)
    i = 0
    while i < len(keep):
        others = keep[:i] + keep[i + 1:]
        if others and implies(others, keep[i]):
            keep = others
        else:
            i += 1
    return keep


def project(constraints: Iterable[LinearConstraint], keep: Iterable[str]) -> list[LinearConstraint]:
    """Existential projection onto ``keep`` by repeated Fourier-Motzkin steps.

    Elimination order is greedy on the pos*neg product (ties by name).  The
    result is redundancy-free.
    """
    keep = set(keep)
    cons = simplify(constraints)
    elim = {k for c in cons for k, _ in c.terms} - keep
    if not elim:
        return cons
    if not simplex.solve(cons)[0]:
        return [LinearConstraint.le({}, -1)]
    system = LinearSystem.of(cons)
    while elim:
        def cost(v):
            p = n = 0
            for c in system.constraints:
                a = c.coeff(v)
                if a == 0:
                    continue
                if c.relation == EQ:
                    p += 1
                    n += 1
                elif a > 0:
                    p += 1
                else:
                    n += 1
            return (p * n - p - n, v)
        v = min(elim, key=cost)
        elim.discard(v)
        if v not in system.variables:
            continue
        system = fm_eliminate(system, v)
        cons = simplify(system.constraints)
        if len(cons) > 12:
            cons = remove_redundant(cons)
        system = LinearSystem.of(cons)
    return remove_redundant(system.constraints)


def contains(outer: Sequence[LinearConstraint], inner: Sequence[LinearConstraint]) -> bool:
    """``inner`` (assumed nonempty) is a subset of ``outer``."""
    return all(implies(inner, c) for c in outer)
