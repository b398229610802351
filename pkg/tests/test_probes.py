import numpy as np
import pytest

from fraclab.core import FracParams, Grid, constant, make_domain, sample_profile
from fraclab.probes import (
    barrier_certificate_at,
    classify,
    exterior_shell_barrier,
    exterior_value_check,
    ordered_solutions,
    puncture_experiment,
    regular_point_experiment,
    rhs_independence_experiment,
)
from fraclab.schema import validate

LADDER = (33, 65, 129)


def test_classify_rules():
    assert classify(1.0, [0.5, 0.8, 0.95], [0.5, 0.5, 0.5], 1.0) == "attaining"
    assert classify(1.0, [0.1, 0.1, 0.1], [0.3, 0.1, 0.02], 1.0) == "ignoring"
    assert classify(1.0, [0.5, 0.4, 0.6], [0.3, 0.4, 0.2], 1.0) == "inconclusive"
    assert classify(1.0, [0.5, 0.8], [0.3, 0.1], 1.0) == "inconclusive"
    assert classify(0.0, [0.5, 0.8, 0.9], [0.3, 0.1, 0.0], 0.0) == "inconclusive"


def test_puncture_verdicts_split_at_sp_one():
    reps = puncture_experiment([FracParams(0.75, 2.0, 1), FracParams(0.25, 2.0, 1)], LADDER)
    assert [r.verdict for r in reps] == ["attaining", "ignoring"]
    doc = {"kind": "regularity", "experiment": "puncture",
           "reports": [r.to_dict() for r in reps]}
    validate(doc, "regularity_report")


@pytest.mark.parametrize("shift, scale", [(2.0, 1.0), (0.0, 3.0), (-1.0, 0.5)])
def test_puncture_verdict_is_affine_invariant(shift, scale):
    params = [FracParams(0.75, 2.0, 1), FracParams(0.25, 2.0, 1)]
    base = [r.verdict for r in puncture_experiment(params, LADDER)]
    moved = [r.verdict for r in puncture_experiment(params, LADDER, shift=shift, scale=scale)]
    assert moved == base


def test_puncture_requires_odd_ladder_and_one_dimension():
    with pytest.raises(ValueError):
        puncture_experiment([FracParams(0.75, 2.0, 1)], (32, 64, 128))
    with pytest.raises(ValueError):
        puncture_experiment([FracParams(0.75, 2.0, 2)], LADDER)


def test_regular_point_is_attained():
    rep, sols = regular_point_experiment(FracParams(0.75, 2.0, 1), LADDER)
    assert rep.verdict == "attaining" and len(sols) == len(LADDER)
    assert rep.target == 1.0


@pytest.mark.parametrize("kind, s", [("regular", 0.75), ("puncture", 0.25)])
def test_rhs_independence(kind, s):
    _, summary = rhs_independence_experiment(kind, FracParams(s, 2.0, 1), LADDER)
    assert summary["identical"] and summary["ordered"]
    with pytest.raises(ValueError):
        rhs_independence_experiment("corner", FracParams(s, 2.0, 1), LADDER)


def test_ordered_solutions_follow_the_source():
    sols, reps = ordered_solutions(FracParams(0.6, 2.0, 1), 65)
    assert len(sols) == 3 and all(r.passed for r in reps)


def test_shell_barrier_certifies_at_the_boundary():
    grid = Grid(2.0, 129, 1)
    P = FracParams(0.5, 2.0, 1)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    gamma = exterior_shell_barrier(grid, P, xi0=1.0)
    rep = barrier_certificate_at(1.0, gamma, dom, P)
    assert rep.passed, rep.failing
    assert rep.info["value_at_xi0"] == 0.0


@pytest.mark.parametrize("beta, ok", [(0.2, True), (0.5, True), (1.0, False)])
def test_cone_barrier_needs_beta_at_most_s(beta, ok):
    grid = Grid(2.0, 129, 1)
    P = FracParams(0.5, 2.0, 1)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    # (1 - |x|)_+^beta vanishes at x = 1 and is positive inside
    cone = sample_profile("cone", {"beta": beta}, grid)
    rep = barrier_certificate_at(1.0, cone, dom, P)
    assert rep.clauses["positive"] and rep.clauses["vanishes"]
    assert rep.clauses["supersolution"] is ok


def test_zero_is_not_a_barrier():
    grid = Grid(2.0, 65, 1)
    P = FracParams(0.5, 2.0, 1)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    rep = barrier_certificate_at(1.0, constant(0.0, grid), dom, P)
    assert not rep.passed and "positive" in rep.failing


def test_exterior_value_is_exact():
    P = FracParams(0.6, 2.0, 1)

    def problem(m):
        grid = Grid(2.0, m, 1)
        g = sample_profile("hat", {"c": 1.5, "w": 0.5}, grid)
        return g, make_domain("ball", grid, exhaustion=False, radius=1.0)

    g, dom = problem(65)
    rep = exterior_value_check(1.5, g, 0.0, dom, P, ladder=(33, 65, 129), problem=problem)
    assert rep.clauses["exact_value"] and rep.clauses["f_independent_patch"]
    assert rep.clauses["oscillation_shrinks"] and rep.passed
    with pytest.raises(ValueError):
        exterior_value_check(0.5, g, 0.0, dom, P)
