"""Linear hybrid automata: data model, model-file format, ACC family, relaxation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from .linear import (Affine, ExprSyntaxError, LinearConstraint, parse_affine,
                     parse_constraints)
from .polyhedra import project

Constraints = tuple[LinearConstraint, ...]


class ModelError(ValueError):
    """Invalid model: syntax or referential integrity."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Location:
    id: str
    invariant: Constraints = ()
    # flow constraints are keyed by the state variable whose derivative they bound
    flow: Constraints = ()


@dataclass(frozen=True)
class Edge:
    label: str
    source: str
    target: str
    guard: Constraints = ()
    reset: tuple[tuple[str, Affine], ...] = ()
    # nondeterministic updates: variables in ``havoc`` take any post value
    # satisfying ``relation`` (post-state names carry a trailing "'")
    havoc: tuple[str, ...] = ()
    relation: Constraints = ()

    @property
    def reset_map(self) -> dict[str, Affine]:
        return dict(self.reset)


@dataclass(frozen=True)
class LinearHybridAutomaton:
    variables: tuple[str, ...]
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...]
    initial: tuple[str, Constraints]
    bad: tuple[tuple[str, Constraints], ...] = ()
    _index: dict = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        validate(self)
        object.__setattr__(self, "_index", {
            "loc": {l.id: l for l in self.locations},
            "edge": {e.label: e for e in self.edges},
        })

    def location(self, lid: str) -> Location:
        return self._index["loc"][lid]

    def edge(self, label: str) -> Edge:
        return self._index["edge"][label]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges)

    def bad_at(self, lid: str) -> list[Constraints]:
        return [cs for loc, cs in self.bad if loc == lid]

    def content_hash(self) -> str:
        return hashlib.sha256(write_lha(self).encode()).hexdigest()


def validate(h: LinearHybridAutomaton):
    if len(set(h.variables)) != len(h.variables):
        raise ModelError("duplicate variable")
    vs = set(h.variables)
    lids = [l.id for l in h.locations]
    if len(set(lids)) != len(lids):
        raise ModelError("duplicate location id")
    lset = set(lids)

    def check(cs: Iterable[LinearConstraint], where: str, allowed=vs):
        for c in cs:
            for k in c.variables:
                if k not in allowed:
                    raise ModelError(f"undeclared variable {k!r} in {where}")

    for l in h.locations:
        check(l.invariant, f"invariant of {l.id}")
        check(l.flow, f"flow of {l.id}")
    labels = set()
    for e in h.edges:
        if e.label in labels:
            raise ModelError(f"duplicate edge label {e.label!r}")
        labels.add(e.label)
        for end in (e.source, e.target):
            if end not in lset:
                raise ModelError(f"edge {e.label!r} references unknown location {end!r}")
        check(e.guard, f"guard of {e.label}")
        for v, expr in e.reset:
            if v not in vs:
                raise ModelError(f"reset of undeclared variable {v!r} on {e.label}")
            check([LinearConstraint.le(expr.terms, 0)], f"reset of {e.label}")
        for v in e.havoc:
            if v not in vs:
                raise ModelError(f"havoc of undeclared variable {v!r} on {e.label}")
        check(e.relation, f"relation of {e.label}", vs | {f"{v}'" for v in e.havoc})
    loc0, init = h.initial
    if loc0 not in lset:
        raise ModelError(f"initial location {loc0!r} does not exist")
    check(init, "init")
    for loc, cs in h.bad:
        if loc not in lset:
            raise ModelError(f"bad location {loc!r} does not exist")
        check(cs, f"bad set at {loc}")


# ---------------------------------------------------------------------------
# model file format

def _braced(text: str, lineno: int) -> tuple[str, list[str]]:
    head, sep, rest = text.partition("{")
    if not sep or not rest.rstrip().endswith("}"):
        raise ModelError("expected '<loc> { constraints }'", lineno)
    body = rest.rstrip()[:-1].strip()
    parts = [p.strip() for p in body.split(",")] if body else []
    return head.strip(), parts


def parse_lha(text: str) -> LinearHybridAutomaton:
    variables: list[str] = []
    locs: dict[str, dict] = {}
    edges: list[dict] = []
    initial = None
    bad: list[tuple[str, list]] = []
    current = None  # ("loc", dict) or ("edge", dict)
    declared: set[str] = set()

    def constraints_of(src: str, lineno: int, *, deriv: bool = False, primed=()) -> list[LinearConstraint]:
        try:
            cs, plain, derivs = parse_constraints(src)
        except ExprSyntaxError as exc:
            raise ModelError(str(exc), lineno) from None
        if deriv and plain:
            raise ModelError(f"flow constraints may only use d(<var>), found {sorted(plain)[0]!r}", lineno)
        if not deriv and derivs:
            raise ModelError("d(<var>) only allowed in flow lines", lineno)
        for name in sorted(plain | derivs):
            ok = name in declared or name in primed
            if not ok:
                raise ModelError(f"undeclared variable {name!r}", lineno)
        return cs

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indented = line[0].isspace()
        words = line.split()
        kw = words[0]
        rest = line.strip()[len(kw):].strip()
        if not indented:
            current = None
        if kw == "vars" and not indented:
            if variables:
                raise ModelError("duplicate 'vars' line", lineno)
            variables = words[1:]
            declared = set(variables)
        elif kw == "loc" and not indented:
            if len(words) != 2:
                raise ModelError("expected 'loc <id>'", lineno)
            if words[1] in locs:
                raise ModelError(f"duplicate location {words[1]!r}", lineno)
            current = ("loc", {"id": words[1], "inv": [], "flow": []})
            locs[words[1]] = current[1]
        elif kw == "edge" and not indented:
            if len(words) != 5 or words[3] != "->":
                raise ModelError("expected 'edge <label> <src> -> <dst>'", lineno)
            if any(e["label"] == words[1] for e in edges):
                raise ModelError(f"duplicate edge label {words[1]!r}", lineno)
            current = ("edge", {"label": words[1], "src": words[2], "dst": words[4], "line": lineno,
                                "guard": [], "reset": [], "havoc": [], "relation": []})
            edges.append(current[1])
        elif kw in ("init", "bad") and not indented:
            loc, parts = _braced(rest, lineno)
            cs = [c for p in parts for c in constraints_of(p, lineno)]
            if kw == "init":
                if initial is not None:
                    raise ModelError("duplicate 'init' line", lineno)
                initial = (loc, cs, lineno)
            else:
                bad.append((loc, cs, lineno))
        elif indented and current is not None and current[0] == "loc" and kw in ("inv", "flow"):
            if kw == "inv":
                current[1]["inv"].extend(constraints_of(rest, lineno))
            else:
                current[1]["flow"].extend(constraints_of(rest, lineno, deriv=True))
        elif indented and current is not None and current[0] == "edge" and kw in ("guard", "reset", "havoc", "relation"):
            e = current[1]
            if kw == "guard":
                e["guard"].extend(constraints_of(rest, lineno))
            elif kw == "reset":
                var, sep, expr = rest.partition(":=")
                var = var.strip()
                if not sep:
                    raise ModelError("expected 'reset <var> := <expr>'", lineno)
                if var not in declared:
                    raise ModelError(f"undeclared variable {var!r}", lineno)
                try:
                    aff = parse_affine(expr)
                except ExprSyntaxError as exc:
                    raise ModelError(str(exc), lineno) from None
                for name in sorted(aff.variables):
                    if name not in declared:
                        raise ModelError(f"undeclared variable {name!r}", lineno)
                if any(v == var for v, _ in e["reset"]):
                    raise ModelError(f"variable {var!r} reset twice", lineno)
                e["reset"].append((var, aff))
            elif kw == "havoc":
                for v in words[1:]:
                    if v not in declared:
                        raise ModelError(f"undeclared variable {v!r}", lineno)
                e["havoc"].extend(words[1:])
            else:
                primed = {f"{v}'" for v in e["havoc"]}
                e["relation"].extend(constraints_of(rest, lineno, primed=primed))
        else:
            raise ModelError(f"unexpected line starting with {kw!r}", lineno)

    if not variables:
        raise ModelError("missing 'vars' line (at least one variable is required)")
    if initial is None:
        raise ModelError("missing 'init' line")
    for e in edges:
        for end in (e["src"], e["dst"]):
            if end not in locs:
                raise ModelError(f"unknown location {end!r}", e["line"])
    if initial[0] not in locs:
        raise ModelError(f"unknown location {initial[0]!r}", initial[2])
    for loc, _, lineno in bad:
        if loc not in locs:
            raise ModelError(f"unknown location {loc!r}", lineno)

    return LinearHybridAutomaton(
        variables=tuple(variables),
        locations=tuple(Location(l["id"], tuple(l["inv"]), tuple(l["flow"])) for l in locs.values()),
        edges=tuple(Edge(e["label"], e["src"], e["dst"], tuple(e["guard"]), tuple(e["reset"]),
                         tuple(e["havoc"]), tuple(e["relation"])) for e in edges),
        initial=(initial[0], tuple(initial[1])),
        bad=tuple((loc, tuple(cs)) for loc, cs, _ in bad),
    )


def write_lha(h: LinearHybridAutomaton) -> str:
    lines = [f"vars {' '.join(h.variables)}"]
    deriv = lambda v: f"d({v})"
    for l in h.locations:
        lines.append(f"loc {l.id}")
        lines.extend(f"  inv {c.to_text()}" for c in l.invariant)
        lines.extend(f"  flow {c.to_text(deriv)}" for c in l.flow)
    for e in h.edges:
        lines.append(f"edge {e.label} {e.source} -> {e.target}")
        lines.extend(f"  guard {c.to_text()}" for c in e.guard)
        lines.extend(f"  reset {v} := {expr.to_text()}" for v, expr in e.reset)
        if e.havoc:
            lines.append(f"  havoc {' '.join(e.havoc)}")
        lines.extend(f"  relation {c.to_text()}" for c in e.relation)
    loc, cs = h.initial
    lines.append(f"init {loc} {{ {', '.join(c.to_text() for c in cs)} }}".replace("{  }", "{ }"))
    for loc, cs in h.bad:
        lines.append(f"bad {loc} {{ {', '.join(c.to_text() for c in cs)} }}".replace("{  }", "{ }"))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# adaptive cruise control stand-in family

ACC_INITIAL_GAP = 6
ACC_MAX_GAP = 10
ACC_PERIOD = 5


def generate_acc(n: int, unsafe: bool = False) -> LinearHybridAutomaton:
    """A platoon of ``n`` cars: gaps ``g1..g{n-1}`` plus a mode timer ``v``.

    In ``cruise`` every gap may shrink at rate up to 1 for one period of
    length 5; ``brake`` then reopens every gap at rate 1..2.  A gap starting
    at 6 therefore never drops below 1.  The unsafe variant lets ``g1``
    shrink at rate 2, reaching 0 within one period.  Crashes are modelled
    by edges ``hit<i>`` guarded by ``g<i> <= 0`` into the bad location.
    """
    if n < 2:
        raise ValueError("ACC family needs at least 2 cars")
    gaps = [f"g{i}" for i in range(1, n)]
    variables = tuple(gaps + ["v"])
    le, ge, eq = LinearConstraint.le, LinearConstraint.ge, LinearConstraint.eq
    bounds = tuple([le({"v": 1}, ACC_PERIOD)] + [le({g: 1}, ACC_MAX_GAP) for g in gaps])
    cruise_flow = [eq({"v": 1}, 1)]
    for i, g in enumerate(gaps):
        rate = 2 if (unsafe and i == 0) else 1
        cruise_flow += [ge({g: 1}, -rate), le({g: 1}, 0)]
    brake_flow = [eq({"v": 1}, 1)]
    for g in gaps:
        brake_flow += [ge({g: 1}, 1), le({g: 1}, 2)]
    locations = (
        Location("cruise", bounds, tuple(cruise_flow)),
        Location("brake", bounds, tuple(brake_flow)),
        Location("crash"),
    )
    switch = (ge({"v": 1}, ACC_PERIOD),)
    zero_v = (("v", Affine.make({}, 0)),)
    edges = [Edge("brake", "cruise", "brake", switch, zero_v),
             Edge("resume", "brake", "cruise", switch, zero_v)]
    edges += [Edge(f"hit{i}", "cruise", "crash", (le({g: 1}, 0),)) for i, g in enumerate(gaps, start=1)]
    init = tuple([eq({"v": 1}, 0)] + [eq({g: 1}, ACC_INITIAL_GAP) for g in gaps])
    return LinearHybridAutomaton(variables, locations, tuple(edges), ("cruise", init), (("crash", ()),))


# ---------------------------------------------------------------------------
# relaxation

def _prime(v: str) -> str:
    return f"{v}'"


def relax(h: LinearHybridAutomaton, keep: Iterable[str]) -> LinearHybridAutomaton:
    """Over-approximate ``h`` over the variable subset ``keep``.

    Every constraint set is existentially projected onto ``keep``.  Resets of
    kept variables whose right-hand side mentions a dropped variable turn
    into nondeterministic updates bounded by the projection of the edge's
    guard and update relation.
    """
    keep_set = set(keep)
    unknown = keep_set - set(h.variables)
    if unknown:
        raise ValueError(f"not variables of the automaton: {sorted(unknown)}")
    if keep_set == set(h.variables):
        return h
    variables = tuple(v for v in h.variables if v in keep_set)
    proj = lambda cs: tuple(project(cs, keep_set))

    locations = tuple(replace(l, invariant=proj(l.invariant), flow=proj(l.flow)) for l in h.locations)
    edges = tuple(_relax_edge(h, e, keep_set) for e in h.edges)
    loc0, init = h.initial
    return LinearHybridAutomaton(
        variables, locations, edges, (loc0, proj(init)),
        tuple((loc, proj(cs)) for loc, cs in h.bad))


def _update_relation(h: LinearHybridAutomaton, e: Edge) -> list[LinearConstraint]:
    """Joint pre/post constraints of an edge (post names primed)."""
    rel = list(e.guard)
    resets = e.reset_map
    havoc = set(e.havoc)
    for v in h.variables:
        if v in resets:
            expr = resets[v]
            coeffs = {_prime(v): Fraction(1)}
            for k, c in expr.terms:
                coeffs[k] = coeffs.get(k, Fraction(0)) - c
            rel.append(LinearConstraint.eq(coeffs, expr.constant))
        elif v not in havoc:
            rel.append(LinearConstraint.eq({_prime(v): 1, v: -1}, 0))
    rel.extend(e.relation)
    return rel


def _relax_edge(h: LinearHybridAutomaton, e: Edge, keep: set[str]) -> Edge:
    guard = tuple(project(e.guard, keep))
    resets = e.reset_map
    new_reset = []
    havoc = []
    for v in h.variables:
        if v not in keep:
            continue
        if v in e.havoc:
            havoc.append(v)
        elif v in resets:
            if resets[v].variables <= keep:
                new_reset.append((v, resets[v]))
            else:
                havoc.append(v)
    relation: tuple[LinearConstraint, ...] = ()
    if havoc:
        target = keep | {_prime(v) for v in havoc}
        relation = tuple(c for c in project(_update_relation(h, e), target)
                         if any(k.endswith("'") for k in c.variables) or c.is_constant())
    return replace(e, guard=guard, reset=tuple(new_reset), havoc=tuple(havoc), relation=relation)
