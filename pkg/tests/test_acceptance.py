"""Acceptance criteria 1-9; a PASS/FAIL line per criterion is printed at the end of the run."""
import itertools
from fractions import Fraction

import numpy as np
import pytest

from multidec import patterns as pat
from multidec.channel import simulate_awgn, source_dist
from multidec.cli import main
from multidec.codebook import a_ranges, f_decreasing_bound
from multidec.errors import InfeasibleError
from multidec.harness import SimConfig, fer_campaign
from multidec.rd_closed import (h_inverse, h_map, g_inverse, kl, msc_parametric, rd_basd_closed,
                                rd_mbm1_closed, rde_msc_F)
from multidec.rd_numeric import SolverParams, factored_arimoto, factored_blahut
from multidec.rs import RSCode, Status, bm_decode, rs_encode

from oracles import arimoto, joint_source

TIGHT = SolverParams(tau_max=200_000, tol=1e-14)


@pytest.mark.criterion(1, "errors-and-erasures decoding and distortion predicate")
def test_c1_decoding_condition(record_property):
    code = RSCode.create(15, 9)
    spec = pat.build_spec("mbm", code)
    rng = np.random.default_rng(1)
    violations = 0
    inside = 0
    for _ in range(10_000):
        # most cases inside the decoding radius, the rest just beyond it
        e = int(rng.integers(0, code.d_min + 1))
        nu = int(rng.integers(0, max(code.d_min - e, 0) // 2 + 2))
        c = rs_encode(code, rng.integers(0, 16, code.k))
        pos = rng.permutation(code.n)
        err, era = pos[:nu], pos[nu:nu + e]
        r = c.copy()
        r[err] ^= rng.integers(1, 16, nu)
        r[era] = rng.integers(0, 16, e)
        out = bm_decode(code, r, era)
        # error pattern x (0 = hard decision wrong) against erase/keep pattern xhat
        x = np.ones(code.n, dtype=np.int64)
        x[err] = 0
        x[era] = (r[era] == c[era]).astype(np.int64)
        xhat = np.ones(code.n, dtype=np.int64)
        xhat[era] = 0
        kept_wrong = int(np.sum((x == 0) & (xhat == 1)))
        predicate = pat.distortion(x, xhat, spec) < spec.threshold
        if predicate != (2 * kept_wrong + e < code.d_min):
            violations += 1
        if 2 * nu + e < code.d_min:
            inside += 1
            if not (out.ok and np.array_equal(out.codeword, c)):
                violations += 1
        elif out.status is not Status.FAILURE and not code.is_codeword(out.codeword):
            violations += 1
    record_property("within_radius", inside)
    record_property("violations", violations)
    assert violations == 0 and inside > 5000


@pytest.mark.criterion(2, "factored Blahut/Arimoto vs super-alphabet solvers")
def test_c2_factored_vs_direct(record_property):
    rng = np.random.default_rng(2)
    specs = {"binary": pat.build_spec("mbm", n=8, k=4).delta,
             "ternary": pat.build_spec("mbm", n=8, k=4, ell=2).delta}
    worst_b = worst_a = 0.0
    nb = na = 0
    for n, (name, delta) in itertools.product((2, 3), specs.items()):
        P = rng.dirichlet(np.ones(delta.shape[0]) * 2, size=n)
        p, d = joint_source(P, delta)
        for t in np.linspace(-6.0, -0.3, 50):
            _, r0, d0 = arimoto(p, d, 0.0, t)
            r, dd, _, _ = factored_blahut(P, delta, t, TIGHT)
            worst_b = max(worst_b, abs(r - r0), abs(dd - d0))
            nb += 1
        for s, t in itertools.product(np.linspace(0.2, 3.0, 5), np.linspace(-5.0, -0.5, 10)):
            f0, r0, d0 = arimoto(p, d, s, t)
            pt = factored_arimoto(P, delta, s, t, TIGHT)
            worst_a = max(worst_a, abs(pt.r - r0), abs(pt.d - d0))
            na += 1
    record_property("blahut_max_err", f"{worst_b:.2e} over {nb}")
    record_property("arimoto_max_err", f"{worst_a:.2e} over {na}")
    assert worst_b <= 1e-6 and worst_a <= 1e-5


@pytest.mark.criterion(3, "closed forms vs numeric solvers")
def test_c3_closed_forms(record_property):
    rng = np.random.default_rng(3)
    n = 40
    p1 = rng.uniform(0.3, 0.999, n)
    P = np.column_stack([1 - p1, p1])
    mbm = pat.build_spec("mbm", n=n, k=30)
    basd = pat.build_spec("bit_asd", n=15, k=11)
    err_wf = err_basd = 0.0
    for t in np.linspace(-6.0, -0.5, 12):
        r, d, _, _ = factored_blahut(P, mbm, t, TIGHT)
        err_wf = max(err_wf, abs(rd_mbm1_closed(p1, d).r_total - r))
        r, d, _, _ = factored_blahut(P, basd, t, TIGHT)
        err_basd = max(err_basd, abs(rd_basd_closed(p1, d).r_total - r))
    # m-SC: parametric and (R, D) -> F forms against factored Arimoto on i.i.d. components
    delta = mbm.delta
    err_msc = 0.0
    for p in (0.9, 0.95, 0.99):
        Pm = np.tile([1 - p, p], (n, 1))
        for s, t in itertools.product((0.3, 1.0, 2.5), (-4.0, -2.0, -1.0)):
            pt = factored_arimoto(Pm, delta, s, t, TIGHT)
            f, r, d = msc_parametric(p, s, t)
            err_msc = max(err_msc, abs(pt.f - n * f), abs(pt.r - n * r), abs(pt.d - n * d))
            if pt.r > 1e-6 and pt.f > 1e-6:
                u = h_inverse(pt.r / n, pt.d / n)
                err_msc = max(err_msc, abs(n * kl(u, p) - pt.f))
    err_inv = 0.0
    for dbar in (0.05, 0.1, 0.2):
        for frac in (0.1, 0.5, 0.9):
            rbar = frac * h_map(1 - dbar, dbar)
            err_inv = max(err_inv, abs(h_map(h_inverse(rbar, dbar), dbar) - rbar))
            p = 1 - dbar / 3
            fbar = frac * kl(1 - dbar, p)
            err_inv = max(err_inv, abs(kl(g_inverse(fbar, p, dbar), p) - fbar))
    record_property("waterfill", f"{err_wf:.1e}")
    record_property("bit_asd", f"{err_basd:.1e}")
    record_property("msc", f"{err_msc:.1e}")
    record_property("inverse", f"{err_inv:.1e}")
    assert err_wf <= 1e-4 and err_basd <= 1e-4 and err_msc <= 1e-3 and err_inv <= 1e-6


@pytest.mark.criterion(4, "ranges of a (two tables)")
def test_c4_tables():
    assert a_ranges((255, 191), 2)[0] == (2, 3)
    assert a_ranges((255, 191), 3)[0] == (3, 5)
    assert a_ranges((255, 127), 2)[0] == (2, 6)
    assert a_ranges((255, 127), 3)[0] == (3, 9)
    assert [a_ranges((255, 191), mu)[1] for mu in (2, 3, 12)] == [(2, 2), (3, 3), (12, 13)]
    assert [a_ranges((255, 127), mu)[1] for mu in (2, 3, 12)] == [(2, 3), (3, 4), (12, 17)]


@pytest.mark.criterion(5, "ASD algebra: score/cost inequality, exact condition, allowable sets")
def test_c5_asd_algebra(record_property):
    rng = np.random.default_rng(5)
    bad = 0
    exact = 0
    for _ in range(10_000):
        mu = int(rng.integers(1, 5))
        ell = int(rng.integers(1, 5))
        n = int(rng.integers(4, 20))
        k = int(rng.integers(2, n))
        types = pat.allowable_set(mu, ell)
        tarr = np.array(types)
        x = rng.integers(0, ell + 1, n)
        xh = rng.integers(1, len(types) + 1, n)
        s = int(sum(tarr[xh[i] - 1][x[i] - 1] for i in range(n) if x[i] > 0))
        cost2 = int(sum((tarr[j - 1] * (tarr[j - 1] + 1)).sum() for j in xh))
        if cost2 < (mu + 1) * s:
            bad += 1
        if s == 0:
            continue
        a = pat.interval_a(s, k)
        if a < mu:
            continue
        spec = pat.build_spec("asd", n=n, k=k, mu=mu, ell=ell, a=a, types=types)
        d = pat.distortion(x, xh, spec, exact=True)
        if not isinstance(d, Fraction):
            bad += 1
        if ((a + 1) * (2 * s - a * (k - 1)) > cost2) != (d < spec.d_thresh):
            bad += 1
        exact += 1
    assert pat.allowable_set(2, 2) == [(2, 0), (1, 1), (0, 2), (0, 0)]
    expect = set()
    for base in [(3, 0, 0), (0, 0, 0), (1, 1, 0), (2, 1, 0), (1, 1, 1)]:
        expect |= set(itertools.permutations(base))
    got = pat.allowable_set(3, 3)
    record_property("exact_checks", exact)
    record_property("violations", bad)
    assert got[0] == (3, 0, 0) and set(got) == expect
    assert bad == 0 and exact > 1000


def _exponent(P, n, k, mu, a, rate):
    spec = pat.build_spec("asd", n=n, k=k, mu=mu, a=a)
    try:
        return rde_at(P, spec, rate, spec.threshold).f
    except InfeasibleError:
        return 0.0


from multidec.rd_numeric import rde_at  # noqa: E402


@pytest.mark.criterion(6, "exponent vs a at R=6 on a (255,127) profile")
@pytest.mark.parametrize("mu", [2, 3])
def test_c6_exponent_in_a(mu, record_property):
    n, k = 255, 127
    # 17 reliability levels of 15 positions each, sorted like a real profile
    pc = np.repeat(np.linspace(0.6, 0.999, 17), 15)
    P = np.column_stack([1 - pc, pc])
    (_, hi), _ = a_ranges((n, k), mu)
    fs = {a: _exponent(P, n, k, mu, a, 6.0) for a in range(mu, hi + 1)}
    bound = f_decreasing_bound(n, k, mu)
    record_property(f"F_a(mu={mu})", ",".join(f"{a}:{f:.3f}" for a, f in fs.items()))
    beyond = [a for a in fs if a > bound]
    assert all(fs[a] >= fs[a + 1] - 1e-6 for a in beyond if a + 1 in fs)
    assert max(fs, key=fs.get) in (mu, mu + 1)


@pytest.mark.criterion(7, "simulated FER vs 2^-F on the m-SC")
def test_c7_fer_vs_exponent(record_property):
    p = 0.987
    cfg = SimConfig(n=255, k=239, channel="msc", grid=(p,), scheme="mbm", ell=1,
                    approach="rde", rate=11.0, codebook="algorithm_a",
                    frames=30_000, min_errors=30_000, seed=7)
    pt = fer_campaign(cfg).points[0]
    predicted = 2.0 ** -pt.exponent
    ratio = pt.fer / predicted
    record_property("fer", f"{pt.fer:.3e} ({pt.errors}/{pt.frames})")
    record_property("2^-F", f"{predicted:.3e}")
    record_property("F_closed", f"{rde_msc_F(p, 255, 239, 11.0):.4f}")
    record_property("ratio", f"{ratio:.3f}")
    assert 0.2 <= ratio <= 5.0


def _fer(**kw):
    base = dict(n=255, k=239, channel="awgn_bpsk", grid=(5.5,), frames=200_000,
                min_errors=300, seed=8, tau=1000, block=16)
    base.update(kw)
    return fer_campaign(SimConfig(**base)).points[0]


@pytest.mark.criterion(8, "ordering at one SNR point on AWGN/BPSK")
def test_c8_ordering(record_property):
    gmd = _fer(codebook="gmd")
    m1 = _fer(codebook="algorithm_b", ell=1, rate=11.0)
    m2 = _fer(codebook="algorithm_b", ell=2, rate=11.0)
    for name, pt in (("gmd", gmd), ("mbm1", m1), ("mbm2", m2)):
        record_property(name, f"{pt.fer:.4f} ({pt.errors}/{pt.frames})")
    assert min(gmd.errors, m1.errors, m2.errors) >= 300
    assert m2.fer <= gmd.fer and m2.fer <= m1.fer
    # D_max comparison on every simulated profile
    code = RSCode.create(255, 239)
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(500):
        c = rs_encode(code, rng.integers(0, 256, code.k))
        rel = simulate_awgn(code, c, "bpsk", 5.5, rng)
        for ell in (1, 2):
            P = source_dist(rel, "top", ell)
            bm = pat.d_max(P, pat.build_spec("mbm", code, ell=ell))
            asd = pat.d_max(P, pat.build_spec("asd", code, mu=2, ell=ell))
            assert asd <= bm + 1e-9
            checked += 1
    record_property("dmax_profiles", checked)


@pytest.mark.criterion(9, "byte-identical CSV for repeated seeded runs")
def test_c9_determinism(tmp_path, capsys):
    sim = tmp_path / "sim.toml"
    sim.write_text('n = 15\nk = 9\ngrid = [3.0]\ntau = 20\nrate = 3.0\n')
    commands = [
        ["rd", "--code", "15,9", "--profile", "awgn_bpsk:4", "--tau", "50", "--rate", "0:3:1"],
        ["rde", "--code", "15,9", "--profile", "awgn_bpsk:3", "--tau", "50", "--rate", "2"],
        ["rde", "--code", "15,9", "--profile", "msc:0.9", "--s", "0.5,1", "--t=-2,-1"],
        ["closed", "msc-F", "--p", "0.99", "--rate", "5,11"],
        ["closed", "mbm1", "--code", "15,9", "--profile", "awgn_bpsk:4", "--tau", "30",
         "--distortion", "3"],
        ["tables"],
        ["codebook", "--kind", "random", "--code", "15,9", "--profile", "awgn_bpsk:4",
         "--tau", "30", "--rate", "4"],
        ["codebook", "--kind", "hybrid", "--code", "15,9", "--profile", "msc:0.9", "--rate", "6"],
        ["simulate", "--config", str(sim), "--frames", "40"],
    ]
    for i, argv in enumerate(commands):
        outs = []
        for rep in range(2):
            dest = tmp_path / f"{i}_{rep}.csv"
            assert main(argv + ["--seed", "11", "--out", str(dest)]) == 0, argv
            outs.append(dest.read_bytes())
        assert outs[0] == outs[1] and outs[0], argv
    capsys.readouterr()
