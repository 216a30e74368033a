"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (see ``conftest.py``), which the
terminal summary prints under "acceptance criteria".  Tests run in file
order; criteria 6 and 8 also read the session counters kept by
``monitors.py``, so they see every run made before them.
"""

import itertools
import os
import random
import time
from dataclasses import replace

from dira.automata import iter_words
from dira.ce import AnalyzedCE, Counterexample, dominates, encode_path, equivalent
from dira.lha import generate_acc, parse_lha, relax
from dira.linear import LinearConstraint
from dira.polyhedra import LinearSystem, find_iis, is_feasible
from dira.reach import location_graph
from dira.runtime import FaultPlan, RunConfig, run_dira, run_ira
from dira.sim import run_simulated, seal_trace
from monitors import COUNTERS, check_iis
from oracles import location_paths, oracle_feasible_words, path_feasible, random_lha

SIM = RunConfig(mode="sim")


class Clock:
    def __init__(self, limit):
        self.limit = limit
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def within(self):
        return self.elapsed < self.limit


def finish(record, number, title, ok, clock, detail):
    within = clock.within()
    record(number, title, ok and within, f"{detail}; {clock.elapsed:.1f} s (limit {clock.limit:.0f} s)")
    assert ok, detail
    assert within, f"took {clock.elapsed:.1f} s, limit {clock.limit} s"


# -- 1 ------------------------------------------------------------------------------------

def _refuted(basis):
    return AnalyzedCE(Counterexample((), ("l",)), LinearSystem(()), False, None, (), frozenset(basis))


def test_criterion_1_dominance_is_a_partial_order(acceptance_record):
    clock = Clock(5)
    rng = random.Random(1)
    pool = "abcdefg"
    cases = 0
    for _ in range(1500):
        a, b, c = (_refuted(x for x in pool if rng.random() < 0.4) for _ in range(3))
        assert dominates(a, a) and equivalent(a, a)
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)
        if dominates(a, b) and dominates(b, a):
            assert equivalent(a, b)
        assert dominates(a, b) == (a.basis <= b.basis)
        cases += 1
    # exhaustive over a four-letter pool as well
    subsets = [_refuted(s) for k in range(5) for s in itertools.combinations("wxyz", k)]
    for a, b, c in itertools.product(subsets, repeat=3):
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)
        if dominates(a, b) and dominates(b, a):
            assert equivalent(a, b)
        cases += 1
    finish(acceptance_record, 1, "dominance preorder", cases >= 1000, clock, f"{cases} triples")


# -- 2 ------------------------------------------------------------------------------------

def _random_rows(rng, nvars=4):
    names = "abcdef"[:nvars]
    rows = []
    for _ in range(rng.randint(2, 9)):
        coeffs = {v: rng.randint(-3, 3) for v in rng.sample(names, rng.randint(1, 3))}
        rel = rng.choice(["<=", "<=", "<=", "="])
        rows.append(LinearConstraint.make(coeffs, rel, rng.randint(-5, 5)))
    return LinearSystem.of(rows)


def test_criterion_2_every_iis_is_irreducible(acceptance_record):
    clock = Clock(30)
    before = COUNTERS.iis_checked
    rng = random.Random(2)
    systems = [_random_rows(rng) for _ in range(400)]
    h = generate_acc(4)
    words = []
    for w in iter_words(location_graph(h)):
        if len(w) > 7:
            break
        words.append(w)
    systems += [encode_path(h, w) for w in words]
    for seed in range(30):
        m = random_lha(random.Random(seed), 3, 4)
        for w in location_paths(m, 3):
            systems.append(encode_path(m, w))
    checked = 0
    for s in systems:
        if is_feasible(s).feasible:
            continue
        iis = find_iis(s)           # wrapped: clauses checked by the monitor
        check_iis(s, iis)           # and once more explicitly
        checked += 1
    total = COUNTERS.iis_checked - before
    finish(acceptance_record, 2, "IIS irreducibility", checked >= 100 and total >= checked, clock,
           f"{checked} infeasible systems, {COUNTERS.iis_checked} IIS checked this session")


# -- 3 ------------------------------------------------------------------------------------

def test_criterion_3_relaxation_is_monotone(acceptance_record):
    clock = Clock(60)
    instances = paths = 0
    for seed in range(60):
        rng = random.Random(1000 + seed)
        h = random_lha(rng, rng.randint(1, 4), rng.randint(2, 4))
        j = {v for v in h.variables if rng.random() < 0.7}
        i = {v for v in j if rng.random() < 0.5}
        hj, hi = relax(h, j), relax(h, i)
        for w in location_paths(h, 4):
            if path_feasible(hj, w):
                assert path_feasible(hi, w), (seed, w, sorted(i), sorted(j))
            paths += 1
        instances += 1
    finish(acceptance_record, 3, "relaxation monotonicity", instances >= 50, clock,
           f"{instances} instances, {paths} paths")


# -- 4 ------------------------------------------------------------------------------------

HAND_BUILT = {
    "ramp": """\
vars x
loc l
  flow 1 <= d(x) <= 2
loc done
edge go l -> done
  guard x >= 5
init l { x = 0 }
bad done { }
""",
    "ramp-blocked": """\
vars x
loc l
  inv x <= 3
  flow 1 <= d(x) <= 2
loc done
edge go l -> done
  guard x >= 5
init l { x = 0 }
bad done { }
""",
    "two-vars": """\
vars x y
loc a
  flow d(x) = 1
  flow d(y) = 0
loc b
edge go a -> b
  guard x >= 1
  guard y >= 1
init a { x = 0, y = 0 }
bad b { }
""",
    "seesaw": """\
vars x
loc a
  inv x <= 4
  flow d(x) = 1
loc b
  inv x >= -2
  flow d(x) = -1
edge ab a -> b
  guard x >= 3
edge ba b -> a
  guard x <= -1
  reset x := x + 2
init a { x = 0 }
bad a { x <= -1 }
bad b { x <= -2 }
""",
    "three-bases": """\
vars a b c
loc s
  flow d(a) = 0
  flow d(b) = 0
  flow d(c) = 0
loc bad
edge e1 s -> bad
  guard a >= 1
edge e2 s -> bad
  guard a + b >= 1
edge e3 s -> bad
  guard c >= 1
init s { a = 0, b = 0, c = 0 }
bad bad { }
""",
}


def _oracle_models():
    out = [(name, parse_lha(text)) for name, text in HAND_BUILT.items()]
    out += [("acc2", generate_acc(2)), ("acc2-unsafe", generate_acc(2, True))]
    for seed in range(24):
        rng = random.Random(4000 + seed)
        out.append((f"random-{seed}", random_lha(rng, rng.randint(1, 3), rng.randint(2, 4))))
    return out


def test_criterion_4_verdicts_match_the_bounded_oracle(acceptance_record):
    clock = Clock(300)
    models = _oracle_models()
    tally = {"safe": 0, "reachable": 0}
    for name, h in models:
        assert len(h.variables) <= 3 and len(h.locations) <= 4
        found = oracle_feasible_words(h, 6)
        r = run_dira(h, 2, SIM)
        kind = r.verdict.kind
        if kind == "safe":
            assert not found, f"{name}: safe but the oracle reaches bad via {found[0]}"
        else:
            assert kind == "reachable", f"{name}: {kind}"
            w = r.verdict.witness.word
            assert path_feasible(h, w), f"{name}: witness {w} is infeasible"
            if len(w) <= 6:
                assert w in found
        tally[kind] += 1
    finish(acceptance_record, 4, "oracle equivalence", len(models) >= 20, clock,
           f"{len(models)} models ({tally['safe']} safe, {tally['reachable']} reachable)")


# -- 5 ------------------------------------------------------------------------------------

def _fault_plans(rng, count, workers=4, horizon=4):
    plans = []
    for _ in range(count):
        kills = frozenset((rng.randrange(workers), rng.randrange(horizon))
                          for _ in range(rng.randint(0, 5)))
        crash = rng.choice([None, None, 0, 1, 2, 3])
        plans.append(FaultPlan(kills, crash))
    return plans


def test_criterion_5_faults_preserve_the_verdict(acceptance_record):
    clock = Clock(300)
    runs = identical = 0
    for n, unsafe in [(4, False), (4, True), (8, False), (8, True)]:
        h = generate_acc(n, unsafe)
        base = run_simulated(h, 4, SIM).verdict.kind
        assert base == ("reachable" if unsafe else "safe")
        for k, plan in enumerate(_fault_plans(random.Random(500 + n + unsafe), 20)):
            r = run_simulated(h, 4, SIM, plan, seed=k)
            assert r.verdict.kind == base, (n, unsafe, plan)
            if unsafe:
                assert path_feasible(h, r.verdict.witness.word)
            if k < 2:
                again = run_simulated(h, 4, SIM, plan, seed=k)
                assert seal_trace(again.trace) == seal_trace(r.trace)
                identical += 1
            runs += 1
    finish(acceptance_record, 5, "fault tolerance", runs == 80, clock,
           f"{runs} faulty runs agree, {identical} same-seed replays byte-identical")


# -- 6 ------------------------------------------------------------------------------------

def test_criterion_6_assignments_are_non_redundant(acceptance_record):
    clock = Clock(60)
    run_dira(generate_acc(8), 4, SIM)       # guarantees at least one multi-selection
    ok = COUNTERS.multi_select_checked > 0 and not COUNTERS.failures
    finish(acceptance_record, 6, "non-redundant assignments", ok, clock,
           f"{COUNTERS.continues_checked} continue decisions checked, "
           f"{COUNTERS.multi_select_checked} with >= 2 selections")


# -- 7 ------------------------------------------------------------------------------------

def _cores():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def test_criterion_7_parallel_acc_family(acceptance_record):
    clock = Clock(600)
    cores = _cores()
    cfg = replace(SIM, mode="parallel", iteration_timeout=300)
    notes, ok = [], True
    for n in (8, 16):
        h = generate_acc(n)
        t = time.perf_counter()
        d = run_dira(h, 4, cfg)
        td = time.perf_counter() - t
        t = time.perf_counter()
        s = run_ira(h)
        ts = time.perf_counter() - t
        assert d.verdict.kind == s.verdict.kind == "safe"
        dim = d.stats.max_relaxation_dim
        ok &= dim < n
        if cores >= 4:
            ok &= td <= ts
        notes.append(f"ACC-{n}: dim {dim}/{n}, speedup {ts / td:.2f}x")
    gate = "wall-time gate applied" if cores >= 4 else f"wall-time gate skipped ({cores} core(s))"
    finish(acceptance_record, 7, "scaled ACC benchmark", ok, clock, "; ".join(notes) + f"; {gate}")


# -- 8 ------------------------------------------------------------------------------------

def test_criterion_8_communication_bound(acceptance_record):
    clock = Clock(60)
    before = COUNTERS.rounds_bounded
    for n in (4, 8):
        run_simulated(generate_acc(n), 4, SIM, FaultPlan(frozenset({(1, 0)}), master_crash=1))
    ok = COUNTERS.rounds_bounded > before
    finish(acceptance_record, 8, "communication bound", ok, clock,
           f"{COUNTERS.rounds_bounded} simulated rounds within the byte bound this session")
