import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multidec import patterns as pat
from multidec.errors import InfeasibleError
from multidec.rd_closed import rde_rate0
from multidec.rd_numeric import (SolverParams, blahut_component, factored_arimoto,
                                 factored_blahut, rd_at_rate, rde_at, sample_curve, save_curve,
                                 slope_gap)

from oracles import arimoto, joint_source

TIGHT = SolverParams(tau_max=200_000, tol=1e-14)
MBM1 = pat.build_spec("mbm", n=8, k=4, ell=1)
MBM2 = pat.build_spec("mbm", n=8, k=4, ell=2)


def _sources(rng, n, J):
    return rng.dirichlet(np.ones(J) * 2, size=n)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("delta", [MBM1.delta, MBM2.delta], ids=["binary", "ternary"])
def test_blahut_matches_joint(n, delta, rng):
    P = _sources(rng, n, delta.shape[0])
    p, d = joint_source(P, delta)
    for t in np.linspace(-6.0, -0.25, 25):
        _, r_ref, d_ref = arimoto(p, d, 0.0, t)
        r, dd, _, ok = factored_blahut(P, delta, t, TIGHT)
        assert ok
        assert abs(r - r_ref) <= 1e-6 and abs(dd - d_ref) <= 1e-6


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("delta", [MBM1.delta, MBM2.delta], ids=["binary", "ternary"])
def test_arimoto_matches_joint(n, delta, rng):
    P = _sources(rng, n, delta.shape[0])
    p, d = joint_source(P, delta)
    for s in (0.25, 0.75, 1.5):
        for t in np.linspace(-5.0, -0.5, 9):
            f_ref, r_ref, d_ref = arimoto(p, d, s, t)
            pt = factored_arimoto(P, delta, s, t, TIGHT)
            assert abs(pt.r - r_ref) <= 1e-5 and abs(pt.d - d_ref) <= 1e-5
            assert abs(pt.f - f_ref) <= 1e-5


def test_single_component_example():
    r, d, q, _ = blahut_component([0.1, 0.9], MBM1.delta, -3.0, TIGHT)
    assert 0 < r < 0.469 + 1e-9  # below H(0.9)
    assert q.sum() == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-8.0, -0.1))
def test_blahut_outputs_are_consistent(seed, t):
    rng = np.random.default_rng(seed)
    P = _sources(rng, 6, 3)
    r, d, Q, _ = factored_blahut(P, MBM2, t)
    assert r >= 0
    assert np.allclose(Q.sum(axis=1), 1.0)
    assert np.all(Q >= 0)
    dmin = float((P * MBM2.delta.min(axis=1)).sum())
    assert dmin - 1e-9 <= d <= pat.d_max(P, MBM2) + 1e-6


def test_rd_curve_monotone(rng):
    P = _sources(rng, 20, 2)
    ds = [rd_at_rate(P, MBM1, r)[0] for r in (0.0, 1.0, 2.0, 4.0, 8.0)]
    assert all(a >= b - 1e-6 for a, b in zip(ds, ds[1:]))
    assert ds[0] == pytest.approx(pat.d_max(P, MBM1))


def test_rd_hits_rate(rng):
    P = _sources(rng, 30, 3)
    d, Q, t = rd_at_rate(P, MBM2, 5.0)
    r, d2, _, _ = factored_blahut(P, MBM2, t)
    assert abs(r - 5.0) <= 1e-4 * 30
    assert d == pytest.approx(d2, abs=1e-6)


def test_rde_hits_target(rng):
    P = np.tile([0.03, 0.97], (40, 1))
    spec = pat.build_spec("mbm", n=40, k=30)
    d_rd = rd_at_rate(P, spec, 3.0)[0]
    target = d_rd + 2.0
    pt = rde_at(P, spec, 3.0, target)
    assert abs(pt.r - 3.0) <= 4e-3 and abs(pt.d - target) <= 4e-3
    assert pt.f > 0


def test_rde_below_curve_is_infeasible(rng):
    P = np.tile([0.05, 0.95], (255, 1))
    spec = pat.build_spec("mbm", n=255, k=239)
    with pytest.raises(InfeasibleError) as err:
        rde_at(P, spec, 11.0, 17.0)
    assert err.value.d_limit > 17.0


def test_rde_rate_zero_is_singleton(rng):
    P = _sources(rng, 10, 2)
    spec = pat.build_spec("mbm", n=10, k=5)
    dm = pat.d_max(P, spec)
    pt = rde_at(P, spec, 0.0, dm + 1.0)
    ref = rde_rate0(P, spec, dm + 1.0)
    assert pt.f == pytest.approx(ref.f)
    assert np.all(pt.q.max(axis=1) == 1.0)


def test_exponent_increases_with_rate():
    P = np.tile([0.02, 0.98], (50, 1))
    spec = pat.build_spec("mbm", n=50, k=40)
    fs = [rde_at(P, spec, r, 11.0).f for r in (1.0, 2.0, 3.0)]
    assert fs[0] < fs[1] < fs[2]


def test_curve_csv(tmp_path, rng):
    P = _sources(rng, 4, 2)
    pts = sample_curve(P, MBM1, [0.0, 0.5], [-2.0, -1.0])
    save_curve(tmp_path / "c.csv", pts)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "t,s,F,R,D" and len(lines) == 5


def test_slope_gap_smooth_interior():
    p1 = np.array([0.7, 0.8, 0.9, 0.95, 0.99])
    P = np.column_stack([1 - p1, p1])
    gap = slope_gap(P, MBM1, 0.0, -2.0, params=TIGHT)
    assert gap.shape == (5,)
    assert np.all(gap < 0.05)


def test_validation():
    with pytest.raises(ValueError):
        factored_blahut([[0.5, 0.6]], MBM1, -1.0)
    with pytest.raises(ValueError):
        factored_arimoto([[0.5, 0.5]], MBM1, -1.0, -1.0)
    with pytest.raises(ValueError):
        SolverParams(t_min=1.0)
