"""Independent reference implementations used to cross-check the library.

Nothing here calls the code under test except where noted (the bounded-path
oracle deliberately goes through ``encode_path`` + ``is_feasible``, since
that is the oracle the acceptance criteria name).
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from dira.ce import encode_path
from dira.lha import LinearHybridAutomaton, parse_lha
from dira.polyhedra import is_feasible


# ---------------------------------------------------------------------------
# Fourier-Motzkin elimination down to constants

def fm_oracle_feasible(rows) -> bool:
    """Decide feasibility of ``rows`` by plain Fourier-Motzkin elimination.

    ``rows`` are ``(coeffs: dict, relation, bound)`` triples or objects with
    ``coeffs``/``relation``/``bound`` attributes.  Exponential; keep inputs
    small.
    """
    ineqs = []
    for r in rows:
        if not isinstance(r, tuple):
            r = (r.coeffs, r.relation, r.bound)
        coeffs, rel, b = r
        c = {k: Fraction(v) for k, v in coeffs.items() if v != 0}
        ineqs.append((c, Fraction(b)))
        if rel == "=":
            ineqs.append(({k: -v for k, v in c.items()}, -Fraction(b)))
    names = sorted({k for c, _ in ineqs for k in c})
    for v in names:
        pos, neg, rest = [], [], []
        for c, b in ineqs:
            a = c.get(v, 0)
            (pos if a > 0 else neg if a < 0 else rest).append((c, b))
        for (cp, bp), (cn, bn) in itertools.product(pos, neg):
            ap, an = cp[v], -cn[v]
            comb = {}
            for k in set(cp) | set(cn):
                if k == v:
                    continue
                val = cp.get(k, 0) * an + cn.get(k, 0) * ap
                if val != 0:
                    comb[k] = val
            rest.append((comb, bp * an + bn * ap))
        ineqs = _dedup(rest)
    return all(b >= 0 for c, b in ineqs if not c)


def _dedup(ineqs):
    seen = {}
    for c, b in ineqs:
        if not c:
            seen.setdefault((), []).append(b)
            continue
        # scale so the first coefficient has magnitude 1
        k0 = min(c)
        s = abs(c[k0])
        key = tuple(sorted((k, v / s) for k, v in c.items()))
        nb = b / s
        if key not in seen or nb < seen[key]:
            seen[key] = nb
    out = []
    for key, b in seen.items():
        if key == ():
            out.extend(({}, x) for x in b)
        else:
            out.append((dict(key), b))
    return out


# ---------------------------------------------------------------------------
# automata by brute force

def random_dfa(rng: random.Random, states: int, alphabet, density: float = 0.6, accept: float = 0.4):
    delta = {}
    for s in range(states):
        for a in alphabet:
            if rng.random() < density:
                delta[(s, a)] = rng.randrange(states)
    accepting = {s for s in range(states) if rng.random() < accept}
    return delta, accepting


def dfa_accepts(delta, initial, accepting, word) -> bool:
    s = initial
    for a in word:
        s = delta.get((s, a))
        if s is None:
            return False
    return s in accepting


def dfa_words(delta, initial, accepting, alphabet, max_len: int) -> set:
    """All accepted words up to ``max_len`` by exhaustive enumeration."""
    out = set()
    for n in range(max_len + 1):
        for w in itertools.product(sorted(alphabet), repeat=n):
            if dfa_accepts(delta, initial, accepting, w):
                out.add(w)
    return out


def length_lex(words) -> list:
    return sorted(words, key=lambda w: (len(w), w))


def bfs_words(delta, initial, accepting, alphabet, m: int, max_len: int = 12) -> list:
    """First ``m`` accepted words in length-lex order, by breadth-first search."""
    out = []
    alphabet = tuple(alphabet)
    frontier = [((), initial)]
    for _ in range(max_len + 1):
        for w, s in frontier:
            if s in accepting:
                out.append(w)
                if len(out) == m:
                    return out
        nxt = []
        for w, s in frontier:
            for a in alphabet:       # alphabet order decides ties
                t = delta.get((s, a))
                if t is not None:
                    nxt.append((w + (a,), t))
        nxt.sort(key=lambda p: [alphabet.index(x) for x in p[0]])
        frontier = nxt
    return out


# ---------------------------------------------------------------------------
# bounded-path reachability oracle

def location_paths(h: LinearHybridAutomaton, max_len: int):
    """Words of edge labels through the location graph from the initial location
    to a location carrying a bad set, in length-lex order (alphabet order)."""
    out = []
    order = {lab: i for i, lab in enumerate(h.labels)}
    frontier = [((), h.initial[0])]
    for n in range(max_len + 1):
        for w, loc in frontier:
            if h.bad_at(loc):
                out.append(w)
        if n == max_len:
            break
        nxt = []
        for w, loc in frontier:
            for e in h.edges:
                if e.source == loc:
                    nxt.append((w + (e.label,), e.target))
        nxt.sort(key=lambda p: [order[x] for x in p[0]])
        frontier = nxt
    return out


def path_feasible(h: LinearHybridAutomaton, word) -> bool:
    loc = h.initial[0]
    for lab in word:
        loc = h.edge(lab).target
    return any(is_feasible(encode_path(h, word, i)).feasible for i in range(len(h.bad_at(loc))))


def oracle_feasible_words(h: LinearHybridAutomaton, max_len: int = 6) -> list:
    return [w for w in location_paths(h, max_len) if path_feasible(h, w)]


# ---------------------------------------------------------------------------
# random small models

VAR_NAMES = ("x", "y", "z", "w")


def random_lha_text(rng: random.Random, nvars: int, nlocs: int, max_edges: int | None = None) -> str:
    vs = VAR_NAMES[:nvars]
    lines = ["vars " + " ".join(vs)]
    for k in range(nlocs):
        lines.append(f"loc l{k}")
        for v in vs:
            if rng.random() < 0.8:
                lines.append(f"  inv {v} <= {rng.randint(2, 8)}")
            if rng.random() < 0.5:
                lines.append(f"  inv {v} >= {rng.randint(-3, 0)}")
        if nvars >= 2 and rng.random() < 0.3:
            a, b = rng.sample(vs, 2)
            lines.append(f"  inv {a} - {b} <= {rng.randint(0, 4)}")
        for v in vs:
            lo = rng.randint(-2, 1)
            hi = lo + rng.randint(0, 2)
            lines.append(f"  flow {lo} <= d({v}) <= {hi}")
    n_edges = rng.randint(nlocs - 1, max_edges or nlocs + 2)
    for i in range(n_edges):
        src = i if i < nlocs - 1 else rng.randrange(nlocs)
        dst = i + 1 if i < nlocs - 1 else rng.randrange(nlocs)
        lines.append(f"edge e{i} l{src} -> l{dst}")
        for v in vs:
            r = rng.random()
            if r < 0.3:
                lines.append(f"  guard {v} >= {rng.randint(-1, 6)}")
            elif r < 0.5:
                lines.append(f"  guard {v} <= {rng.randint(0, 6)}")
        for v in vs:
            r = rng.random()
            if r < 0.25:
                lines.append(f"  reset {v} := {rng.randint(0, 3)}")
            elif r < 0.35 and nvars >= 2:
                u = rng.choice([u for u in vs if u != v])
                lines.append(f"  reset {v} := {u} + {rng.randint(-1, 1)}")
    init = ", ".join(f"{v} = {rng.randint(0, 2)}" for v in vs)
    lines.append(f"init l0 {{ {init} }}")
    bad_loc = rng.randrange(1, nlocs) if nlocs > 1 else 0
    v = rng.choice(vs)
    bad = rng.choice([f"{v} >= {rng.randint(1, 9)}", f"{v} <= {rng.randint(-3, 1)}", ""])
    lines.append(f"bad l{bad_loc} {{ {bad} }}")
    return "\n".join(lines) + "\n"


def random_lha(rng: random.Random, nvars: int, nlocs: int, **kw) -> LinearHybridAutomaton:
    return parse_lha(random_lha_text(rng, nvars, nlocs, **kw))
