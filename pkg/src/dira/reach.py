"""Discrete abstractions of (relaxed) automata via bounded polyhedral reachability."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .automata import FiniteAbstraction, canonical
from .lha import Edge, LinearHybridAutomaton
from .linear import LinearConstraint
from .polyhedra import contains, is_feasible, project, remove_redundant

Polyhedron = tuple[LinearConstraint, ...]
RegionMap = dict[str, list[Polyhedron]]

_TIME = "~t"


def _pre(v: str) -> str:
    return f"{v}~"


@dataclass(frozen=True)
class EngineLimits:
    max_fixpoint_iterations: int = 400
    max_polyhedra_per_location: int = 32

    def __post_init__(self):
        if self.max_fixpoint_iterations < 1 or self.max_polyhedra_per_location < 1:
            raise ValueError("engine limits must be at least 1")


def time_elapse(p: Polyhedron, flow, invariant, variables) -> Polyhedron:
    """States reachable from ``p`` by letting time pass under ``flow`` inside ``invariant``.

    Uses ``A(x' - x) <= t*b`` for flow rows ``A d <= b`` and ``t >= 0``;
    the invariant is convex so checking both endpoints suffices.
    """
    if not flow:
        if not is_feasible(p):
            return (LinearConstraint.le({}, -1),)
        return tuple(remove_redundant(invariant))
    cons = [c.rename(_pre) for c in p]
    for row in flow:
        coeffs: dict[str, Fraction] = {}
        for v, a in row.terms:
            coeffs[v] = coeffs.get(v, Fraction(0)) + a
            coeffs[_pre(v)] = coeffs.get(_pre(v), Fraction(0)) - a
        coeffs[_TIME] = -row.bound
        cons.append(LinearConstraint.make(coeffs, row.relation, 0))
    cons.append(LinearConstraint.ge({_TIME: 1}, 0))
    out = project(cons, variables)
    return tuple(remove_redundant(list(out) + list(invariant)))


def discrete_post(p: Polyhedron, edge: Edge, target_invariant, variables) -> Polyhedron:
    resets = edge.reset_map
    updated = set(resets) | set(edge.havoc)
    rename = lambda v: _pre(v) if v in updated else v
    cons = [c.rename(rename) for c in p]
    cons += [c.rename(rename) for c in edge.guard]
    for v, expr in edge.reset:
        coeffs = {v: Fraction(1)}
        for k, c in expr.terms:
            coeffs[rename(k)] = coeffs.get(rename(k), Fraction(0)) - c
        cons.append(LinearConstraint.eq(coeffs, expr.constant))
    for c in edge.relation:
        cons.append(c.rename(lambda k: k[:-1] if k.endswith("'") else rename(k)))
    if updated:
        cons = project(cons, variables)
    return tuple(remove_redundant(list(cons) + list(target_invariant)))


def _nonempty(p: Polyhedron) -> bool:
    return bool(is_feasible(p))


def reach_fixpoint(h: LinearHybridAutomaton, limits: EngineLimits = EngineLimits()) -> tuple[RegionMap, bool]:
    regions: RegionMap = {l.id: [] for l in h.locations}
    variables = set(h.variables)
    loc0, init = h.initial
    start = tuple(init) + h.location(loc0).invariant
    work: deque = deque()
    out_edges: dict[str, list[Edge]] = {}
    for e in h.edges:
        out_edges.setdefault(e.source, []).append(e)

    def add(lid: str, q: Polyhedron) -> bool:
        loc = h.location(lid)
        r = time_elapse(q, loc.flow, loc.invariant, variables)
        if not _nonempty(r):
            return True
        if any(contains(s, r) for s in regions[lid]):
            return True
        regions[lid] = [s for s in regions[lid] if not contains(r, s)] + [r]
        work.append((lid, r))
        return len(regions[lid]) <= limits.max_polyhedra_per_location

    if _nonempty(start) and not add(loc0, start):
        return regions, False
    steps = 0
    while work:
        lid, p = work.popleft()
        if p not in regions[lid]:
            continue
        if steps >= limits.max_fixpoint_iterations:
            return regions, False
        steps += 1
        for e in out_edges.get(lid, ()):
            q = discrete_post(p, e, h.location(e.target).invariant, variables)
            if _nonempty(q) and not add(e.target, q):
                return regions, False
    return regions, True


def location_graph(h: LinearHybridAutomaton) -> FiniteAbstraction:
    """Every structural edge enabled; locations with a bad entry accept."""
    delta = {(e.source, e.label): e.target for e in h.edges}
    accepting = {loc for loc, _ in h.bad}
    return canonical(h.labels, h.initial[0], accepting, delta)


def build_abstraction(h: LinearHybridAutomaton, limits: EngineLimits = EngineLimits()) -> FiniteAbstraction:
    regions, converged = reach_fixpoint(h, limits)
    if not converged:
        return location_graph(h)
    variables = set(h.variables)
    delta = {}
    for e in h.edges:
        inv = h.location(e.target).invariant
        if any(_nonempty(discrete_post(p, e, inv, variables)) for p in regions[e.source]):
            delta[(e.source, e.label)] = e.target
    accepting = set()
    for loc, cs in h.bad:
        if any(_nonempty(p + tuple(cs)) for p in regions[loc]):
            accepting.add(loc)
    return canonical(h.labels, h.initial[0], accepting, delta)
