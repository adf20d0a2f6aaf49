import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from multidec.channel import (ReliabilityMatrix, average_profile,
                              extract_error_pattern, load_profile, noise_n0, qam_constellation,
                              save_profile, simulate_awgn, simulate_msc, source_dist,
                              symbol_bits)
from multidec.rs import RSCode, rs_encode

PI_EX = np.array([[0.01, 0.01, 0.93],
                  [0.94, 0.03, 0.04],
                  [0.03, 0.49, 0.01],
                  [0.02, 0.47, 0.02]])


def _codeword(code, rng):
    return rs_encode(code, rng.integers(0, code.field.size, code.k))


def test_small_example_permutations():
    rel = ReliabilityMatrix.from_pi(PI_EX)
    assert rel.phi.tolist() == [[1, 2, 3, 0], [2, 3, 1, 0], [0, 1, 3, 2]]
    assert rel.sigma.tolist() == [1, 2, 0]
    c = [rel.phi[0, 1], rel.phi[1, 0], rel.phi[2, 2]]
    assert extract_error_pattern(rel, c, "top", ell=2).tolist() == [2, 1, 0]


def test_ties_broken_by_index():
    rel = ReliabilityMatrix.from_pi(np.full((4, 3), 0.25))
    assert rel.phi.tolist() == [[0, 1, 2, 3]] * 3
    assert rel.sigma.tolist() == [0, 1, 2]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-2.0, 10.0), st.sampled_from(["bpsk", "mqam"]))
def test_awgn_reliability_invariants(seed, snr, mod):
    code = RSCode.create(15, 9)
    rng = np.random.default_rng(seed)
    rel = simulate_awgn(code, _codeword(code, rng), mod, snr, rng)
    assert np.allclose(rel.pi.sum(axis=0), 1.0, atol=1e-9)
    sp = rel.sorted_probs()
    assert np.all(np.diff(sp, axis=1) <= 1e-15)
    best = sp[rel.sigma, 0]
    assert np.all(np.diff(best) >= 0)


def test_noiseless_limits(rs15, rng):
    c = _codeword(rs15, rng)
    for mod in ("bpsk", "mqam"):
        rel = simulate_awgn(rs15, c, mod, 0.0, rng, noise_var=1e-6)
        assert np.allclose(rel.pi[c, np.arange(15)], 1.0)
        assert extract_error_pattern(rel, c).tolist() == [1] * 15
    rel = simulate_msc(rs15, c, 1.0, rng)
    assert np.array_equal(rel.hard_decision(), c)


def test_low_snr_is_nearly_uniform(rs15, rng):
    rel = simulate_awgn(rs15, _codeword(rs15, rng), "bpsk", -60.0, rng)
    assert np.allclose(rel.pi, 1 / 16, atol=2e-3)


def test_nonpositive_noise_rejected(rs15, rng):
    with pytest.raises(ValueError):
        simulate_awgn(rs15, _codeword(rs15, rng), "bpsk", 0.0, rng, noise_var=0.0)


def test_noise_conventions():
    assert noise_n0(0.0, 8, 0.5, "bpsk", "ebn0") == pytest.approx(2.0)
    assert noise_n0(0.0, 8, 0.5, "mqam", "ebn0") == pytest.approx(0.25)
    assert noise_n0(10.0, 8, 0.5, "bpsk", "esn0") == pytest.approx(0.1)


@pytest.mark.parametrize("m", [4, 16, 64, 256])
def test_qam_gray_unit_energy(m):
    pts = qam_constellation(m)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    dmin = min(abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:])
    for a in range(m):
        for b in range(a + 1, m):
            if abs(pts[a] - pts[b]) < dmin * 1.01:
                assert bin(a ^ b).count("1") == 1


def test_qam_rejects_odd_power():
    with pytest.raises(ValueError):
        qam_constellation(32)


def test_msc_matrix_values(rs255, rng):
    rel = simulate_msc(rs255, _codeword(rs255, rng), 0.95, rng)
    col = np.sort(rel.pi[:, 0])
    assert col[-1] == pytest.approx(0.95)
    assert np.allclose(col[:-1], 0.05 / 255)


def test_msc_symbol_error_rate(rng):
    code = RSCode.create(255, 239)
    errs = 0
    total = 0
    for _ in range(400):
        c = _codeword(code, rng)
        rel = simulate_msc(code, c, 0.9, rng)
        errs += int(np.sum(rel.hard_decision() != c))
        total += code.n
    assert total >= 10**5
    assert abs(errs / total - 0.1) < 0.005


def test_msc_pattern_letters_iid(rng):
    code = RSCode.create(255, 239)
    counts = np.zeros(2)
    for _ in range(40):
        c = _codeword(code, rng)
        x = extract_error_pattern(simulate_msc(code, c, 0.8, rng), c)
        counts += np.bincount(x, minlength=2)
    n = counts.sum()
    assert n >= 10**4
    assert abs(counts[1] / n - 0.8) < 0.01
    assert chisquare(counts, [0.2 * n, 0.8 * n]).pvalue > 0.01


def test_msc_domain(rs15, rng):
    with pytest.raises(ValueError):
        simulate_msc(rs15, _codeword(rs15, rng), 1 / 16, rng)


def test_determinism(rs15):
    c = rs_encode(rs15, np.arange(9))
    a = simulate_awgn(rs15, c, "bpsk", 3.0, np.random.default_rng(5))
    b = simulate_awgn(rs15, c, "bpsk", 3.0, np.random.default_rng(5))
    assert np.array_equal(a.pi, b.pi)


def test_bit_pattern(rs15, rng):
    c = _codeword(rs15, rng)
    rel = simulate_awgn(rs15, c, "bpsk", 2.0, rng)
    b = extract_error_pattern(rel, c, "bit")
    hd = (rel.bit_marginals() > 0.5).astype(int)
    assert np.array_equal(b, (hd == symbol_bits(c, 4)).astype(int))
    assert b.size == 15 * 4


def test_source_dist_msc():
    pi = np.full((16, 5), 0.1 / 15)
    pi[3, :] = 0.9
    rel = ReliabilityMatrix.from_pi(pi)
    P = source_dist(rel, "top", 1)
    assert np.allclose(P.p, [[0.1, 0.9]] * 5)
    full = source_dist(rel, "top", 16)
    assert np.allclose(full.p[:, 0], 0.0)


def test_profile_training_order(rs15, rng):
    rels = [simulate_awgn(rs15, _codeword(rs15, rng), "bpsk", 4.0, rng) for _ in range(1000)]
    prof = average_profile(rels)
    P = source_dist(prof, "top", 2)
    assert np.allclose(P.p.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(np.diff(prof.probs[:, 0]) >= 0)


def test_profile_roundtrip(tmp_path, rng):
    probs = rng.dirichlet(np.ones(3), size=7)
    save_profile(tmp_path / "p.csv", probs)
    back, first = load_profile(tmp_path / "p.csv")
    assert first == 1
    assert np.allclose(back, probs, rtol=1e-8)
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header == "position,letter,prob"


def test_mean_dmax_at_moderate_snr(rs255):
    # Eb/N0 = 5.2 dB with the code rate in the energy per bit
    rng = np.random.default_rng(11)
    vals = []
    for _ in range(200):
        rel = simulate_awgn(rs255, _codeword(rs255, rng), "bpsk", 5.2, rng)
        p1 = rel.sorted_probs()[:, 0]
        vals.append(np.minimum(1.0, 2.0 * (1.0 - p1)).sum())
    assert 22.0 < np.mean(vals) < 27.0
