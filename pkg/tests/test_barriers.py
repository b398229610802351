import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from fraclab.barriers import (
    BARRIER_FAMILIES,
    BarrierSpec,
    CertificationError,
    certify_family,
    cutoff_minorant,
    cutoff_supersolution_margin,
    find_ring_delta,
    find_shell_delta,
    inf_convolution,
    lemma_simple_check,
    minorant_bracket,
    power_constant,
    rhs_modify,
    ring_decomposition,
    shell_1d_decomposition,
)
from fraclab.core import FracParams, Grid, constant, sample_profile
from fraclab.operator import eval_profile_1d, radial_reduce_3d
from fraclab.profiles import make_profile
from fraclab.quadrature import ConstantTable
from fraclab.schema import validate


def test_power_constant_closed_case():
    # t = u^2 turns the main integral into pi; the prefactor 2 beta (p-1)/(sp) is 1/2
    C, err = power_constant(0.25, 0.5, 2.0, with_error=True)
    assert C == pytest.approx(math.pi / 2, abs=1e-12) and err < 1e-9


def test_power_constant_vanishes_at_beta_equal_s():
    assert power_constant(0.4, 0.4, 1.7) == 0.0


def test_power_constant_rejects_beta_above_s():
    with pytest.raises(ValueError):
        power_constant(0.6, 0.5, 2.0)


@pytest.mark.parametrize("beta, s, p", [(0.1, 0.5, 2.0), (0.3, 0.7, 1.5), (0.2, 0.45, 3.0)])
def test_power_constant_matches_operator(beta, s, p):
    C = power_constant(beta, s, p)
    v, e = eval_profile_1d(make_profile("power-positive-part", 1, beta=beta), 1.0,
                           FracParams(s, p, 1), with_error=True)
    assert C > 0
    assert abs(-v - C) <= 2 * e + 1e-8


def ring_oracle(beta, s, p, r0, r):
    """Azimuth-reduced radial integral by adaptive scipy quadrature, paired around r."""
    sp = s * p

    def w(rho):
        return max(rho - r0, 0.0) ** beta

    def phi(x):
        return math.copysign(abs(x) ** (p - 1), x)

    def paired(t):
        a = phi(w(r + t) - w(r)) * (r + t) * (t ** (-1 - sp) - (2 * r + t) ** (-1 - sp))
        b = phi(w(r - t) - w(r)) * (r - t) * (t ** (-1 - sp) - (2 * r - t) ** (-1 - sp))
        return a + b

    def far(rho):
        return phi(w(rho) - w(r)) * rho * ((rho - r) ** (-1 - sp) - (rho + r) ** (-1 - sp))

    kw = dict(limit=500, epsabs=1e-13, epsrel=1e-12)
    with warnings.catch_warnings():
        # tight tolerances hit the roundoff floor for sp > 1; the value is still good
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        near = integrate.quad(paired, 0.0, r, points=[r - r0], **kw)[0]
        tail = integrate.quad(far, 2 * r, np.inf, **kw)[0]
    return 4 * math.pi / (r * (1 + sp)) * (near + tail)


@pytest.mark.parametrize("d", [1e-3, 1e-2, 0.1, 0.5])
def test_ring_decomposition_matches_independent_integral(d):
    beta, s, p = 0.25, 0.5, 2.0
    dec = ring_decomposition(beta, s, p, 1.0, 1.0 + d)
    assert dec.total == pytest.approx(ring_oracle(beta, s, p, 1.0, 1.0 + d), rel=1e-9)
    v = radial_reduce_3d(make_profile("ring", 3, beta=beta, r0=1.0), 1.0 + d, FracParams(s, p, 3))
    assert dec.total == pytest.approx(v, rel=1e-4)
    assert dec.total == pytest.approx(dec.prefactor * (dec.I + dec.II + dec.III + dec.IV))


@pytest.mark.parametrize("s, p", [(0.5, 2.0), (0.75, 2.0), (0.4, 2.5)])
def test_ring_decomposition_across_sp(s, p):
    beta = s / 2
    dec = ring_decomposition(beta, s, p, 1.0, 1.05)
    assert dec.total == pytest.approx(ring_oracle(beta, s, p, 1.0, 1.05), rel=1e-7)


def test_ring_main_term_dominates_near_sphere():
    dec = ring_decomposition(0.25, 0.5, 2.0, 1.0, 1.0 + 1e-3)
    assert dec.I == pytest.approx(-math.pi, rel=1e-9)
    assert dec.I + dec.II + dec.III + dec.IV < 0
    assert abs(dec.I) > 10 * (dec.II + dec.III + dec.IV)


def test_find_ring_delta():
    table = ConstantTable()
    delta = find_ring_delta(0.25, 0.5, 2.0, 1.0, table=table)
    assert 0 < delta < 1
    for frac in (0.1, 0.5, 0.99):
        assert ring_decomposition(0.25, 0.5, 2.0, 1.0, 1.0 + frac * delta).total <= -1.0
    assert table.get("delta_ring", beta=0.25, s=0.5, p=2.0, r0=1.0)["value"] == delta


def test_shell_decomposition_matches_operator():
    beta, s, p = 0.2, 0.5, 2.0
    for x in (1.01, 1.2, 1.7):
        dec = shell_1d_decomposition(beta, s, p, x)
        v, e = eval_profile_1d(make_profile("one-dim-shell", 1, beta=beta, r0=1.0), x,
                               FracParams(s, p, 1), with_error=True)
        assert abs(dec.total - v) <= 2 * (e + dec.error) + 1e-9 * abs(v)
    assert find_shell_delta(beta, s, p) > 0


def test_shell_rejects_inside_points():
    with pytest.raises(ValueError):
        shell_1d_decomposition(0.2, 0.5, 2.0, 0.5)


@pytest.mark.parametrize("L", [0.5, 1.0, 2.0])
def test_minorant_bracket(L):
    P = FracParams(0.5, 2.0, 1)
    rep = minorant_bracket(L, P)
    assert rep.passed
    k = (P.p - 1) / P.sp * L ** (-P.s)
    assert rep.bound == pytest.approx(-k) and rep.bound_lo == pytest.approx(-4 * k)


def test_minorant_scales_like_L_to_minus_s():
    P = FracParams(0.5, 2.0, 1)
    a = minorant_bracket(1.0, P).samples[0][1]
    b = minorant_bracket(2.0, P).samples[0][1]
    assert b == pytest.approx(a * 2 ** -0.5, rel=1e-6)


def test_cutoff_margin():
    P = FracParams(0.25, 2.0, 1)
    m = cutoff_supersolution_margin(1.0, P, details=True)
    assert cutoff_minorant(1.0, P) == pytest.approx(8.0)
    assert m.naive_minorant == pytest.approx(8.0)
    # |y - x| <= 3|y|/2 on |y| > 2R gives a valid lower bound
    assert m.corrected_minorant <= m.delta < m.naive_minorant
    d2 = cutoff_supersolution_margin(2.0, P)
    assert d2 == pytest.approx(m.delta * 2 ** -P.sp, rel=1e-9)
    for n in (2, 3):
        Pn = P.with_dim(n)
        assert cutoff_supersolution_margin(1.0, Pn) >= cutoff_minorant(1.0, Pn) * 3.0 ** -(n + 0.5)


@pytest.mark.parametrize("p, cp", [(2.0, 1.0), (3.0, 0.5), (4.0, 0.25)])
def test_elementary_inequality_constants(p, cp):
    rep = lemma_simple_check(p)
    assert rep.passed
    assert rep.info["c_p"] == pytest.approx(cp, rel=1e-3)


def test_elementary_inequality_subquadratic():
    rep = lemma_simple_check(1.5)
    assert rep.passed and 0 < rep.info["c_p"] < 1


def test_rhs_modification_on_zero():
    grid = Grid(5.0, 201, 1)
    P = FracParams(0.5, 2.0, 1)
    u = constant(0.0, grid)
    ut, rep = rhs_modify(u, 3.0, P)
    assert rep.passed and rep.info["margin"] > 0
    _, rep6 = rhs_modify(u, 6.0, P)
    assert rep6.info["margin"] == pytest.approx(2 * rep.info["margin"], rel=1e-9)
    assert np.all(ut.values[np.abs(grid.nodes()[:, 0]) <= 2] == 0)


def test_rhs_modification_preconditions():
    P = FracParams(0.5, 2.0, 1)
    with pytest.raises(ValueError):
        rhs_modify(constant(0.0, Grid(3.0, 61, 1)), 3.0, P)
    with pytest.raises(ValueError):
        rhs_modify(constant(0.0, Grid(5.0, 101, 1)), 2.0, P)
    with pytest.raises(ValueError):
        rhs_modify(constant(2.0, Grid(5.0, 101, 1)), 4.0, P)


def test_inf_convolution():
    grid = Grid(2.0, 81, 1)
    v = sample_profile("cone", {"beta": 1.0}, grid)
    w = inf_convolution(v, 0.1)
    assert np.all(w.values <= v.values + 1e-15)
    assert w(np.array([[0.5]]))[0] == pytest.approx(0.45)
    # x^2 / (2 eps) - w is convex, i.e. w is semiconcave
    X = grid.nodes()[:, 0]
    q = X**2 / 0.2 - w.values
    assert np.all(np.diff(q, 2) >= -1e-9)
    with pytest.raises(ValueError):
        inf_convolution(v, 0.0)


def _spec(fam, s=0.4, p=2.0, beta=None, **kw):
    n = {"ring": 3, "half-space": 2}.get(fam, 1)
    return BarrierSpec(fam, FracParams(s, p, n), beta, **kw)


@pytest.mark.parametrize("fam", BARRIER_FAMILIES)
def test_every_family_certifies_at_half_s(fam):
    needs = fam in ("power-positive-part", "half-space", "cone", "ring", "one-dim-shell")
    rep = certify_family(_spec(fam, beta=0.2 if needs else None))
    assert rep.passed, rep.failing


@pytest.mark.parametrize("fam", ["power-positive-part", "cone", "one-dim-shell", "ring",
                                 "half-space"])
def test_beta_above_s_is_rejected_then_fails(fam):
    with pytest.raises(ValueError):
        _spec(fam, beta=0.6)
    rep = certify_family(_spec(fam, beta=0.6, validate=False))
    assert not rep.passed


def test_power_family_at_beta_equal_s_is_harmonic():
    rep = certify_family(_spec("power-positive-part", beta=0.4))
    assert rep.passed and max(abs(v) for _, v, _ in rep.samples) < 1e-4


def test_spec_validation():
    with pytest.raises(ValueError):
        BarrierSpec("indicator-ball", FracParams(0.6, 2.0, 1))  # sp >= 1
    with pytest.raises(ValueError):
        BarrierSpec("ring", FracParams(0.5, 2.0, 1), 0.2)
    with pytest.raises(ValueError):
        BarrierSpec("one-dim-shell", FracParams(0.5, 2.0, 2), 0.2)
    with pytest.raises(ValueError):
        BarrierSpec("triangle", FracParams(0.5, 2.0, 1))


def test_certification_error_is_runtime_error():
    assert issubclass(CertificationError, RuntimeError)


def test_constant_table_round_trip(tmp_path):
    table = ConstantTable()
    power_constant(0.25, 0.5, 2.0, table=table)
    path = table.save(tmp_path / "constants.json")
    back = ConstantTable.load(path)
    assert back.entries == table.entries
    validate(back.to_dict(), "constant_table")
