from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dira.automata import sigma_star, subtract_words
from dira.ce import (AnalyzedCE, Analyzer, ConstraintTag, Counterexample, Exhausted, FeasibleFound,
                     NotInfeasible, ReplayError, Selected, analyze, dominates, encode_path,
                     equivalent, non_dominated, select_ce)
from dira.lha import generate_acc, parse_lha
from dira.linear import LinearConstraint
from dira.polyhedra import LinearSystem, is_feasible
from oracles import path_feasible

RAMP = """\
vars x
loc l
  {inv}
  flow 1 <= d(x) <= 2
loc done
edge go l -> done
  guard x >= 5
init l {{ x = 0 }}
bad done {{ }}
"""

TWO_VARS = """\
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
"""

# three refutable edges with bases {a}, {a, b} and {c}
BASES = """\
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
"""


def ramp(inv=""):
    return parse_lha(RAMP.format(inv=f"inv {inv}" if inv else ""))


def refuted(*basis):
    return AnalyzedCE(Counterexample((), ("l",)), LinearSystem(()), False, None, (), frozenset(basis))


# -- encode_path -------------------------------------------------------------------------

def test_ramp_is_feasible_with_minimal_dwell_five_halves():
    h = ramp()
    s = encode_path(h, ("go",))
    r = is_feasible(s)
    assert r.feasible
    at_min = list(s.constraints) + [LinearConstraint.le({"t@0": 1}, F(5, 2))]
    w = is_feasible(at_min).witness
    assert w["t@0"] == F(5, 2) and w["x'@0"] - w["x@0"] == 2 * w["t@0"]
    below = list(s.constraints) + [LinearConstraint.le({"t@0": 1}, F(5, 2) - F(1, 1000))]
    assert not is_feasible(below).feasible


def test_invariant_blocks_the_ramp():
    h = ramp("x <= 3")
    assert not is_feasible(encode_path(h, ("go",))).feasible
    a = analyze(h, ("go",))
    assert not a.feasible and a.basis == {"x"}


def test_empty_word_at_a_bad_initial_location():
    h = parse_lha("vars x\nloc a\ninit a { x = 0 }\nbad a { x <= 1 }\n")
    assert is_feasible(encode_path(h, ())).feasible
    assert analyze(h, ()).feasible


def test_basis_excludes_unrelated_variable():
    a = analyze(parse_lha(TWO_VARS), ("go",))
    assert not a.feasible and a.basis == {"y"}


def test_tags_carry_provenance():
    s = encode_path(ramp("x <= 10"), ("go",))
    kinds = {t.kind for t in s.tags}
    assert {"init", "inv-in", "inv-out", "flow", "guard", "dwell"} <= kinds
    assert all(isinstance(t, ConstraintTag) for t in s.tags)
    guard = next(t for t in s.tags if t.kind == "guard")
    assert guard.origin == "go" and guard.state_vars == ("x",)


def test_replay_errors():
    h = ramp()
    with pytest.raises(ReplayError):
        Counterexample.replay(h, ("nope",))
    with pytest.raises(ReplayError):
        Counterexample.replay(h, ())           # initial location carries no bad set
    with pytest.raises(ReplayError):
        Counterexample.replay(h, ("go", "go"))


@pytest.mark.parametrize("unsafe, word, feasible", [
    (False, ("hit1",), False),                 # gap drops by at most 5 from 6
    (True, ("hit1",), True),                   # rate 2 reaches 0 after 3 time units
    (False, ("brake", "resume", "hit1"), False),
    (True, ("brake", "resume", "hit1"), True),
])
def test_acc2_paths_match_hand_analysis(unsafe, word, feasible):
    h = generate_acc(2, unsafe)
    assert is_feasible(encode_path(h, word)).feasible is feasible


def test_feasible_witness_satisfies_every_constraint():
    a = analyze(generate_acc(4, True), ("hit1",))
    assert a.feasible
    assert all(c.satisfied_by(a.witness) for c in a.system.constraints)


def test_acc_spurious_basis_is_one_gap_and_the_timer():
    a = analyze(generate_acc(4), ("hit3",))
    assert not a.feasible and a.basis == {"g3", "v"}


# -- dominance ----------------------------------------------------------------------------

def test_dominance_examples():
    x, xy, y = refuted("x"), refuted("x", "y"), refuted("y")
    assert dominates(x, xy) and not dominates(xy, x)
    assert not dominates(x, y) and not dominates(y, x)
    assert dominates(xy, refuted("y", "x")) and dominates(refuted("y", "x"), xy)


def test_equivalence_examples():
    x, xy = refuted("x"), refuted("x", "y")
    assert equivalent(x, x)
    assert equivalent(xy, refuted("y", "x"))
    assert not equivalent(x, xy)


def test_dominance_needs_refuted_counterexamples():
    feasible = analyze(generate_acc(2, True), ("hit1",))
    with pytest.raises(NotInfeasible):
        dominates(feasible, refuted("x"))


bases = st.frozensets(st.sampled_from("uvwxyz"), max_size=4)


@given(bases, bases, bases)
def test_dominance_is_a_preorder_modulo_equivalence(a, b, c):
    a, b, c = refuted(*a), refuted(*b), refuted(*c)
    assert dominates(a, a)
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)
    if dominates(a, b) and dominates(b, a):
        assert equivalent(a, b)


@given(st.lists(bases, max_size=8))
def test_non_dominated_is_an_antichain_covering_the_pool(pool):
    pool = [refuted(*b) for b in pool]
    kept = non_dominated(pool)
    for i, p in enumerate(kept):
        for q in kept[i + 1:]:
            assert not dominates(p, q) and not dominates(q, p)
    for p in pool:
        assert any(dominates(k, p) for k in kept)


# -- select_ce ------------------------------------------------------------------------------

def test_select_drops_the_dominated_candidate():
    h = parse_lha(BASES)
    sel = select_ce(sigma_star(h.labels), h, 3, timeout=None)
    assert isinstance(sel, Selected)
    assert [a.basis for a in sel.selected] == [{"a"}, {"c"}]
    assert {a.word for a in sel.refuted} == {("e1",), ("e2",), ("e3",)}


def test_select_keeps_one_representative_of_equivalent_candidates():
    h = parse_lha(BASES.replace("a + b >= 1", "a >= 2").replace("c >= 1", "a >= 3"))
    sel = select_ce(sigma_star(h.labels), h, 3, timeout=None)
    assert isinstance(sel, Selected) and len(sel.selected) == 1
    assert sel.selected[0].word == ("e1",)


def test_select_short_circuits_on_a_feasible_candidate():
    h = parse_lha(BASES.replace("c >= 1", "c >= 0"))
    sel = select_ce(sigma_star(h.labels), h, 3, timeout=None)
    assert isinstance(sel, FeasibleFound) and sel.witness.word == ("e3",)


def test_select_on_an_empty_language_is_exhausted():
    h = parse_lha(BASES)
    a = subtract_words(sigma_star(h.labels), [("e1",), ("e2",), ("e3",)])
    assert isinstance(select_ce(a, h, 2, timeout=None), Exhausted)


def test_analyzer_memoizes():
    h = parse_lha(BASES)
    an = Analyzer(h)
    assert an(("e1",)) is an(("e1",)) and an.calls == 1


SEESAW = """\
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
"""


@pytest.mark.parametrize("word, feasible", [
    ((), False),                    # x starts at 0 and only grows in a
    (("ab",), True),                # leave a with x in [3, 4], fall to -2
    (("ab", "ba"), False),          # re-enter a with x in [0, 1]
    (("ab", "ba", "ab"), True),
])
def test_seesaw_paths_match_hand_analysis(word, feasible):
    assert path_feasible(parse_lha(SEESAW), word) is feasible
