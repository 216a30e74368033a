"""Counterexample analysis: path encoding, dominance, and counterexample selection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .automata import FiniteAbstraction, Word, intersect, iter_words
from .lha import LinearHybridAutomaton
from .linear import LinearConstraint
from .polyhedra import IIS, LinearSystem, find_iis, is_feasible, var_basis
from .reach import location_graph


class ReplayError(ValueError):
    """A word that is not a path of the automaton ending in a bad location."""


class NotInfeasible(ValueError):
    """Dominance is only defined between refuted counterexamples."""


class ConstraintTag(NamedTuple):
    step: int
    kind: str
    origin: str
    index: int | str
    state_vars: tuple[str, ...]

    def __str__(self):
        return f"{self.kind}[{self.step}] {self.origin}#{self.index}"


@dataclass(frozen=True)
class Counterexample:
    word: Word
    locations: tuple[str, ...]

    @classmethod
    def replay(cls, h: LinearHybridAutomaton, word: Sequence[str]) -> "Counterexample":
        loc = h.initial[0]
        locs = [loc]
        for lab in word:
            try:
                e = h.edge(lab)
            except KeyError:
                raise ReplayError(f"unknown edge label {lab!r}") from None
            if e.source != loc:
                raise ReplayError(f"edge {lab!r} does not leave location {loc!r}")
            loc = e.target
            locs.append(loc)
        if not h.bad_at(loc):
            raise ReplayError(f"path ends in {loc!r}, which has no bad set")
        return cls(tuple(word), tuple(locs))

    @property
    def path(self) -> list[tuple[str, str | None]]:
        """(location, outgoing edge label) pairs; the last step has no edge."""
        return list(zip(self.locations, list(self.word) + [None]))


def _entry(v: str, k: int) -> str:
    return f"{v}@{k}"


def _exit(v: str, k: int) -> str:
    return f"{v}'@{k}"


def _dwell(k: int) -> str:
    return f"t@{k}"


def encode_path(h: LinearHybridAutomaton, ce: Counterexample | Sequence[str], bad_index: int = 0) -> LinearSystem:
    """Linear constraints feasible iff the path can be realized in ``h``."""
    if not isinstance(ce, Counterexample):
        ce = Counterexample.replay(h, ce)
    steps = len(ce.locations)
    origin: dict[str, str | None] = {}
    variables: list[str] = []
    for k in range(steps):
        for v in h.variables:
            origin[_entry(v, k)] = v
            origin[_exit(v, k)] = v
            variables += [_entry(v, k), _exit(v, k)]
        origin[_dwell(k)] = None
        variables.append(_dwell(k))
    cons: list[LinearConstraint] = []
    tags: list[ConstraintTag] = []

    def emit(c: LinearConstraint, step: int, kind: str, src: str, idx):
        cons.append(c)
        tags.append(ConstraintTag(step, kind, src, idx,
                                  tuple(sorted({origin[x] for x in c.variables} - {None}))))

    for i, c in enumerate(h.initial[1]):
        emit(c.rename(lambda v: _entry(v, 0)), 0, "init", h.initial[0], i)
    for k, lid in enumerate(ce.locations):
        loc = h.location(lid)
        for i, c in enumerate(loc.invariant):
            emit(c.rename(lambda v: _entry(v, k)), k, "inv-in", lid, i)
            emit(c.rename(lambda v: _exit(v, k)), k, "inv-out", lid, i)
        emit(LinearConstraint.ge({_dwell(k): 1}, 0), k, "dwell", lid, 0)
        for i, row in enumerate(loc.flow):
            coeffs: dict[str, Fraction] = {}
            for v, a in row.terms:
                coeffs[_exit(v, k)] = a
                coeffs[_entry(v, k)] = -a
            coeffs[_dwell(k)] = -row.bound
            emit(LinearConstraint.make(coeffs, row.relation, 0), k, "flow", lid, i)
        if k == steps - 1:
            break
        e = h.edge(ce.word[k])
        for i, c in enumerate(e.guard):
            emit(c.rename(lambda v: _exit(v, k)), k, "guard", e.label, i)
        resets = e.reset_map
        for v in h.variables:
            if v in resets:
                expr = resets[v]
                coeffs = {_entry(v, k + 1): Fraction(1)}
                for u, a in expr.terms:
                    coeffs[_exit(u, k)] = coeffs.get(_exit(u, k), Fraction(0)) - a
                emit(LinearConstraint.eq(coeffs, expr.constant), k, "reset", e.label, v)
            elif v not in e.havoc:
                emit(LinearConstraint.eq({_entry(v, k + 1): 1, _exit(v, k): -1}, 0), k, "reset", e.label, v)
        for i, c in enumerate(e.relation):
            ren = lambda u: _entry(u[:-1], k + 1) if u.endswith("'") else _exit(u, k)
            emit(c.rename(ren), k, "relation", e.label, i)
    last = steps - 1
    bad_sets = h.bad_at(ce.locations[-1])
    for i, c in enumerate(bad_sets[bad_index]):
        emit(c.rename(lambda v: _exit(v, last)), last, "bad", ce.locations[-1], f"{bad_index}.{i}")
    return LinearSystem(tuple(cons), tuple(tags), tuple(variables), origin)


@dataclass(frozen=True)
class AnalyzedCE:
    """A counterexample with its path LP and verdict.

    When the final location carries several bad sets, one LP is built per bad
    set: the counterexample is feasible if any is, and otherwise ``iis`` has
    one entry per bad set and ``basis`` is the union of their bases.
    """

    ce: Counterexample
    system: LinearSystem
    feasible: bool
    witness: dict[str, Fraction] | None = None
    iis: tuple[IIS, ...] = ()
    basis: frozenset[str] | None = None

    @property
    def word(self) -> Word:
        return self.ce.word


def analyze(h: LinearHybridAutomaton, ce: Counterexample | Sequence[str]) -> AnalyzedCE:
    if not isinstance(ce, Counterexample):
        ce = Counterexample.replay(h, ce)
    systems = [encode_path(h, ce, i) for i in range(len(h.bad_at(ce.locations[-1])))]
    for s in systems:
        verdict = is_feasible(s)
        if verdict.feasible:
            return AnalyzedCE(ce, s, True, verdict.witness)
    found = tuple(find_iis(s) for s in systems)
    basis = frozenset().union(*(var_basis(x) for x in found))
    return AnalyzedCE(ce, systems[0], False, None, found, basis)


def _require_refuted(*items: AnalyzedCE):
    for a in items:
        if a.feasible:
            raise NotInfeasible(f"counterexample {' '.join(a.word) or '<empty>'} is feasible")


def dominates(a: AnalyzedCE, b: AnalyzedCE) -> bool:
    _require_refuted(a, b)
    return a.basis <= b.basis


def equivalent(a: AnalyzedCE, b: AnalyzedCE) -> bool:
    _require_refuted(a, b)
    return a.basis == b.basis


def non_dominated(pool: Sequence[AnalyzedCE]) -> list[AnalyzedCE]:
    """Drop strictly dominated candidates; keep the first of each equivalence class."""
    kept = []
    seen: set[frozenset[str]] = set()
    for a in pool:
        if a.basis in seen:
            continue
        if any(b.basis < a.basis for b in pool):
            continue
        seen.add(a.basis)
        kept.append(a)
    return kept


@dataclass(frozen=True)
class FeasibleFound:
    witness: AnalyzedCE
    refuted: tuple[AnalyzedCE, ...] = ()


@dataclass(frozen=True)
class Selected:
    selected: tuple[AnalyzedCE, ...]
    refuted: tuple[AnalyzedCE, ...] = ()
    candidates: int = 0


@dataclass(frozen=True)
class Exhausted:
    refuted: tuple[AnalyzedCE, ...] = ()


SelectionResult = FeasibleFound | Selected | Exhausted


@dataclass
class Analyzer:
    """Memoizes :func:`analyze` per word; analysis is deterministic per word."""

    h: LinearHybridAutomaton
    cache: dict = field(default_factory=dict)
    calls: int = 0

    def __call__(self, word: Word) -> AnalyzedCE:
        hit = self.cache.get(word)
        if hit is None:
            self.calls += 1
            hit = self.cache[word] = analyze(self.h, word)
        return hit


def select_ce(a: FiniteAbstraction, h: LinearHybridAutomaton, n: int, timeout: float | None = 5.0,
              m0: int | None = None, *, max_candidates: int = 64,
              analyzer: Analyzer | None = None) -> SelectionResult:
    """Pick up to ``n`` pairwise non-dominated refuted counterexamples.

    Candidates are the accepted words of ``a`` that replay in ``h``, taken in
    length-lexicographic order, ``m`` at a time with ``m`` doubling.  The
    doubling stops once ``n`` classes are found, the language runs out, a
    doubling round brings no new class, ``m`` reaches ``max_candidates`` or
    the wall-clock ``timeout`` (``None`` disables it) expires.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    analyzer = analyzer or Analyzer(h)
    m = m0 if m0 is not None else 2 * n
    deadline = None if timeout is None else time.monotonic() + timeout
    words = iter_words(intersect(a, location_graph(h)))
    pool: list[AnalyzedCE] = []
    drained = False
    previous = None
    while True:
        while len(pool) < m and not drained:
            w = next(words, None)
            if w is None:
                drained = True
                break
            result = analyzer(w)
            if result.feasible:
                return FeasibleFound(result, tuple(pool))
            pool.append(result)
        if not pool:
            return Exhausted()
        kept = non_dominated(pool)
        classes = [x.basis for x in kept]
        timed_out = deadline is not None and time.monotonic() >= deadline
        if (len(kept) >= n or drained or m >= max_candidates or timed_out
                or classes == previous):
            return Selected(tuple(kept[:n]), tuple(pool), len(pool))
        previous = classes
        m *= 2
