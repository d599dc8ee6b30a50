import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaware.errors import LtlSyntaxError, TargetUnreachableWarning
from kaware.knowledge import Interpretation
from kaware.ltl import (Always, AndF, CompositeSpec, Eventually, GameObjective,
                        Implies, Next, NotF, OrF, Prop, TrueF, Until,
                        check_trace, compile_objective, desugar, parse_ltl,
                        pretty, propositions)

import oracles


# ---------------------------------------------------------------------------
# parsing


def test_parse_reach_avoid_objective():
    assert parse_ltl("!Obstacle U Target") == \
        Until(NotF(Prop("Obstacle")), Prop("Target"))


def test_parse_true():
    assert parse_ltl("true") == TrueF()


def test_parse_nested_always():
    got = parse_ltl("G (Detected -> G !NoEntry)")
    assert got == Always(Implies(Prop("Detected"),
                                 Always(NotF(Prop("NoEntry")))))


def test_until_is_right_associative():
    assert parse_ltl("a U b U c") == Until(Prop("a"),
                                           Until(Prop("b"), Prop("c")))


def test_implies_is_right_associative():
    assert parse_ltl("a -> b -> c") == Implies(Prop("a"),
                                               Implies(Prop("b"), Prop("c")))


def test_precedence_ladder():
    # ! > X/F/G > U > & > | > ->
    assert parse_ltl("!a U b") == Until(NotF(Prop("a")), Prop("b"))
    assert parse_ltl("F a U b") == Until(Eventually(Prop("a")), Prop("b"))
    assert parse_ltl("a U b & c") == AndF(Until(Prop("a"), Prop("b")),
                                          Prop("c"))
    assert parse_ltl("a & b | c") == OrF(AndF(Prop("a"), Prop("b")), Prop("c"))
    assert parse_ltl("a | b -> c") == Implies(OrF(Prop("a"), Prop("b")),
                                              Prop("c"))
    assert parse_ltl("X a & b") == AndF(Next(Prop("a")), Prop("b"))


@pytest.mark.parametrize("text,pos", [
    ("", 0),
    ("a U", 3),
    ("(a", 2),
    ("a b", 2),
    ("a -", 2),
    ("a # b", 2),
])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(LtlSyntaxError) as exc:
        parse_ltl(text)
    assert exc.value.pos == pos


def test_propositions():
    phi = parse_ltl("G (a -> b U !c)")
    assert propositions(phi) == {"a", "b", "c"}


# ---------------------------------------------------------------------------
# printing


@st.composite
def formulas(draw, depth=6):
    if depth == 0:
        return draw(st.sampled_from([TrueF(), Prop("a"), Prop("b")]))
    kind = draw(st.integers(0, 9))
    sub = formulas(depth=depth - 1)
    if kind == 0:
        return draw(formulas(depth=0))
    if kind == 1:
        return NotF(draw(sub))
    if kind == 2:
        return AndF(draw(sub), draw(sub))
    if kind == 3:
        return OrF(draw(sub), draw(sub))
    if kind == 4:
        return Implies(draw(sub), draw(sub))
    if kind == 5:
        return Next(draw(sub))
    if kind == 6:
        return Until(draw(sub), draw(sub))
    if kind == 7:
        return Eventually(draw(sub))
    if kind == 8:
        return Always(draw(sub))
    return draw(formulas(depth=0))


@settings(max_examples=300)
@given(formulas())
def test_pretty_roundtrip(phi):
    assert parse_ltl(pretty(phi)) == phi


def test_pretty_examples():
    assert pretty(parse_ltl("!Obstacle U Target")) == "!Obstacle U Target"
    assert pretty(parse_ltl("G (a -> G !b)")) == "G (a -> G !b)"


# ---------------------------------------------------------------------------
# desugaring


def test_desugar_sugar_forms():
    assert desugar(Eventually(Prop("a"))) == Until(TrueF(), Prop("a"))
    assert desugar(Always(Prop("a"))) == \
        NotF(Until(TrueF(), NotF(Prop("a"))))
    assert desugar(Implies(Prop("a"), Prop("b"))) == \
        OrF(NotF(Prop("a")), Prop("b"))


@settings(max_examples=150)
@given(formulas(depth=4))
def test_desugar_preserves_finite_trace_semantics(phi):
    core = desugar(phi)
    for trace in itertools.product([set(), {"a"}, {"b"}, {"a", "b"}],
                                   repeat=3):
        assert check_trace(phi, list(trace)) == check_trace(core, list(trace))


# ---------------------------------------------------------------------------
# finite-trace checking


def test_check_trace_hand_examples():
    obj = parse_ltl("!Obstacle U Target")
    assert check_trace(obj, [set(), {"Target"}])
    assert not check_trace(obj, [{"Obstacle"}, {"Target"}])
    assert check_trace(TrueF(), [set()])
    # bounded semantics: no witness inside the trace means false
    assert not check_trace(obj, [set(), set()])
    # Next at the last position is false
    assert not check_trace(parse_ltl("X a"), [{"a"}])
    assert check_trace(parse_ltl("X a"), [set(), {"a"}])


FORMULA_BATTERY = [
    "!a U b",
    "a U b",
    "G a",
    "F b",
    "G (a -> X b)",
    "a U (b U a)",
    "F a & G !b",
    "X X a",
    "G (a -> F b)",
    "!(a U b) | F a",
]


def test_checker_matches_oracle_exhaustively():
    formulas_ = [parse_ltl(t) for t in FORMULA_BATTERY]
    tuples = [oracles.to_tuple_formula(f) for f in formulas_]
    letters = [set(), {"a"}, {"b"}, {"a", "b"}]
    for length in (1, 2, 3, 4):
        for trace in itertools.product(letters, repeat=length):
            trace = list(trace)
            for phi, tup in zip(formulas_, tuples):
                assert check_trace(phi, trace) == oracles.ltl_holds(tup, trace)


def test_empty_trace_rejected():
    with pytest.raises(ValueError):
        check_trace(TrueF(), [])


# ---------------------------------------------------------------------------
# game objective compilation


def test_game_objective_overlap_rejected():
    with pytest.raises(ValueError):
        GameObjective(target=frozenset({1, 2}), avoid=frozenset({2}))


def _interp(target, obstacle):
    return Interpretation(domain_size=30, concept_extents={
        "Target": frozenset(target), "Obstacle": frozenset(obstacle)})


def test_compile_objective_no_known_signs():
    interp = _interp({1, 2}, {5, 6})
    links = [(frozenset({10}), frozenset({11, 12}))]
    obj = compile_objective(interp, links, set())
    assert obj.target == {1, 2}
    assert obj.avoid == {5, 6}


def test_compile_objective_all_signs_known():
    interp = _interp({1, 2}, {5, 6})
    links = [(frozenset({10}), frozenset({11, 12})),
             (frozenset({20}), frozenset({21}))]
    obj = compile_objective(interp, links, {10, 20})
    assert obj.avoid == {5, 6, 11, 12, 21}


def test_compile_objective_one_sign_grows_by_its_street():
    interp = _interp({1, 2}, {5, 6})
    links = [(frozenset({10}), frozenset({11, 12})),
             (frozenset({20}), frozenset({21}))]
    base = compile_objective(interp, links, set())
    one = compile_objective(interp, links, {10})
    assert one.avoid - base.avoid == {11, 12}
    assert one.target == base.target


def test_compile_objective_monotone_in_known_signs():
    interp = _interp({1}, {5})
    links = [(frozenset({10}), frozenset({11})),
             (frozenset({20}), frozenset({21, 22}))]
    prev = compile_objective(interp, links, set()).avoid
    for known in ({10}, {10, 20}):
        cur = compile_objective(interp, links, known).avoid
        assert prev <= cur
        prev = cur


def test_compile_objective_warns_when_target_swallowed():
    interp = _interp({11}, {5})
    links = [(frozenset({10}), frozenset({11, 12}))]
    with pytest.warns(TargetUnreachableWarning):
        obj = compile_objective(interp, links, {10})
    assert obj.target == frozenset()


def test_composite_spec_formula():
    obj = parse_ltl("!Obstacle U Target")
    game = GameObjective(frozenset({1}), frozenset({2}))
    spec = CompositeSpec(objective=obj, kb_part=TrueF(), game=game)
    assert spec.formula() == obj
    kb = parse_ltl("G !Street")
    spec2 = CompositeSpec(objective=obj, kb_part=kb, game=game)
    assert spec2.formula() == AndF(kb, obj)
