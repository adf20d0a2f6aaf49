"""Closed-form rate-distortion and exponent evaluators.

All logarithms are base 2. ``H`` is the binary entropy and ``kl`` the binary
divergence, both with the convention ``0 log 0 = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import InfeasibleError

_BISECT_TOL = 1e-12


def H(u):
    u = np.asarray(u, dtype=float)
    out = -(xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)) / np.log(2.0)
    return float(out) if out.ndim == 0 else out


def kl(u, p):
    """Binary divergence ``D(u || p)`` in bits."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(u > 0, xlogy(u, u) - xlogy(u, p), 0.0)
        b = np.where(u < 1, xlogy(1 - u, 1 - u) - xlogy(1 - u, 1 - p), 0.0)
    out = (a + b) / np.log(2.0)
    return float(out) if out.ndim == 0 else out


def _bisect_decreasing(f, target: float, lo: float, hi: float, tol: float = _BISECT_TOL) -> float:
    """Solve ``f(x) = target`` for ``f`` nonincreasing on ``[lo, hi]``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bisect_increasing(f, target: float, lo: float, hi: float, tol: float = _BISECT_TOL) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class WaterfillResult:
    r_total: float
    d: np.ndarray
    r: np.ndarray
    level: float
    q: np.ndarray


def rd_mbm1_single(p: float, d: float) -> float:
    """``[H(p) - H(D + p - 1)]^+`` for one binary component with the mBM-1 measure."""
    dt = d + p - 1.0
    if dt < -1e-15:
        raise InfeasibleError("distortion below the minimum", d_target=d, d_limit=1.0 - p)
    dt = min(max(dt, 0.0), min(p, 1.0 - p))
    return max(H(p) - H(dt), 0.0)


def rd_mbm1_closed(p1, d_target: float) -> WaterfillResult:
    """Reverse water-filling for the mBM-1 measure over independent positions.

    ``p1[i]`` is the probability that the hard decision at position ``i`` is
    correct. The shifted distortions ``D~_i = D_i + p_i - 1`` are
    ``min(level, min(p_i, 1 - p_i))`` where the level meets the budget.
    """
    p = np.asarray(p1, dtype=float)
    n = p.size
    caps = np.minimum(p, 1.0 - p)
    budget = d_target + p.sum() - n
    if budget < -1e-12:
        raise InfeasibleError("distortion below the minimum", d_target=d_target,
                              d_limit=float(n - p.sum()))
    if budget >= caps.sum():
        level = 0.5
        dt = caps.copy()
    else:
        # S(level) = sum min(level, cap_i) is piecewise linear; solve exactly
        cs = np.sort(caps)
        prefix = np.concatenate([[0.0], np.cumsum(cs)])
        level = 0.5
        for j in range(n):
            # level in [cs[j-1], cs[j]]: S = prefix[j] + level * (n - j)
            cand = (budget - prefix[j]) / (n - j)
            lo = cs[j - 1] if j else 0.0
            if lo - 1e-15 <= cand <= cs[j] + 1e-15:
                level = max(cand, 0.0)
                break
        dt = np.minimum(level, caps)
    r = np.maximum(H(p) - H(dt), 0.0)
    q = np.empty((n, 2))
    active = dt < caps - 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        q0 = (1.0 - p - dt) / (1.0 - 2.0 * dt)
    q[:, 0] = np.where(active, q0, 0.0)
    # capped components are deterministic: erase when p <= 1/2, keep otherwise
    q[~active, 0] = (p[~active] <= 0.5).astype(float)
    q[:, 0] = np.clip(q[:, 0], 0.0, 1.0)
    q[:, 1] = 1.0 - q[:, 0]
    return WaterfillResult(float(r.sum()), dt + 1.0 - p, r, float(level), q)


def _basd_u(lam):
    return (1.0 + lam) / (1.0 + lam + lam * lam)


def basd_component_rate(r1, lam):
    u = _basd_u(lam)
    return H(r1) - H(u) + (r1 - u) * H(lam / (1.0 + lam))


def basd_component_distortion(r1, lam) -> np.ndarray:
    r1 = np.asarray(r1, dtype=float)
    act = (1.0 + 2 * lam + 3 * lam * lam) / (1.0 + lam + lam * lam) - r1 * (1.0 + 2 * lam) / (1.0 + lam)
    return np.where(basd_component_rate(r1, lam) > 0, act, np.minimum(1.0, 3.0 * (1.0 - r1)))


def rd_basd_closed(r1, d_target: float) -> WaterfillResult:
    """Bit-level ASD allocation: find ``lam`` in (0, 1) with ``sum D_i = D``.

    ``r1[i]`` is the probability that hard-decision bit ``i`` is correct.
    """
    r = np.asarray(r1, dtype=float)
    lo_d = float(np.sum(1.0 - r))
    hi_d = float(np.sum(np.minimum(1.0, 3.0 * (1.0 - r))))
    if d_target < lo_d - 1e-12:
        raise InfeasibleError("distortion below the minimum", d_target=d_target, d_limit=lo_d)
    if d_target >= hi_d:
        lam = 1.0
    else:
        lam = _bisect_increasing(lambda x: float(basd_component_distortion(r, x).sum()),
                                 d_target, 0.0, 1.0)
    rc = np.maximum(basd_component_rate(r, lam), 0.0) if lam < 1.0 else np.zeros_like(r)
    d = basd_component_distortion(r, lam) if lam < 1.0 else np.minimum(1.0, 3.0 * (1.0 - r))
    active = rc > 0
    q = np.empty((r.size, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = ((1 + lam) - r * (1 + lam + lam * lam)) / (1 - lam * lam)
    q[:, 0] = np.where(active, np.clip(s0, 0.0, 1.0), (3.0 * (1.0 - r) >= 1.0).astype(float))
    q[:, 1] = 1.0 - q[:, 0]
    return WaterfillResult(float(rc.sum()), d, rc, float(lam), q)


# m-ary symmetric channel exponent -------------------------------------------

def _msc_dbar(n: int, k: int) -> float:
    return (n - k + 1) / n


def h_map(u, dbar: float):
    return H(u) - H(u + dbar - 1.0)


def h_inverse(rbar: float, dbar: float) -> float:
    """Inverse of ``h`` on ``[1 - dbar, 1 - dbar/2)``."""
    top = H(1.0 - dbar)
    if not 0.0 < rbar <= top + 1e-15:
        raise ValueError(f"rate {rbar} outside (0, {top}]")
    return _bisect_decreasing(lambda u: h_map(u, dbar), rbar, 1.0 - dbar, 1.0 - dbar / 2.0)


def g_inverse(fbar: float, p: float, dbar: float) -> float:
    """Inverse of ``u -> D(u || p)`` on ``[1 - dbar, p]``."""
    lo = 1.0 - dbar
    if p < lo:
        raise ValueError("p is below 1 - D/N; the exponent is zero for every rate")
    top = kl(lo, p)
    if not 0.0 <= fbar <= top + 1e-15:
        raise ValueError(f"exponent {fbar} outside [0, {top}]")
    return _bisect_decreasing(lambda u: kl(u, p), fbar, lo, p)


def rde_msc_F(p: float, n: int, k: int, R: float) -> float:
    """Exponent of mBM-1 with ``2^R`` attempts on an i.i.d. m-SC(p) error pattern.

    Returns 0 when ``R`` already exceeds the rate needed at the typical
    source (the minimizing ``u`` lies above ``p``).
    """
    dbar = _msc_dbar(n, k)
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if 1.0 - dbar > p:
        raise ValueError("p is below 1 - D/N")
    u = h_inverse(R / n, dbar)
    if u >= p:
        return 0.0
    return n * kl(u, p)


def rde_msc_R(p: float, n: int, k: int, F: float) -> float:
    """Smallest rate reaching exponent ``F`` (inverse of :func:`rde_msc_F`)."""
    dbar = _msc_dbar(n, k)
    u = g_inverse(F / n, p, dbar)
    return n * max(h_map(u, dbar), 0.0)


def msc_parametric(p: float, s: float, t: float) -> tuple[float, float, float]:
    """Per-component ``(F, R, D)`` of the mBM-1 binary source at multipliers ``(s, t)``."""
    if s < 0 or t > 0:
        raise ValueError("need s >= 0 and t <= 0")
    pb = 1.0 - p
    lo = 2.0 ** t / (1.0 + 2.0 ** t)
    hi = 1.0 / (1.0 + 2.0 ** (t * (2 * s + 1)))
    if p <= lo:
        return 0.0, 0.0, 1.0
    if p >= hi:
        d = 2.0 * pb / (p * 2.0 ** (2 * t * s) + pb)
        return kl(1.0 - d / 2.0, p), 0.0, d
    a = 2.0 ** (s * t / (s + 1)) * p ** (1.0 / (s + 1))
    u = a / (a + pb ** (1.0 / (s + 1)))
    d = lo + 1.0 - u
    r = H(u) - H(u + d - 1.0)
    return kl(u, p), r, d


# single decoding attempt ------------------------------------------------------

@dataclass(frozen=True)
class Rate0Result:
    f: float
    k_star: np.ndarray
    alpha: float
    d_alloc: np.ndarray


def _cumulants(p: np.ndarray, delta: np.ndarray, alpha: float):
    """``Lambda[i, k] = log2 sum_j p_ij 2^(alpha delta_jk)`` and its alpha-derivative."""
    with np.errstate(divide="ignore"):
        logp = np.log2(p)  # N x J
    e = logp[:, :, None] + alpha * delta[None, :, :]  # N x J x K
    m = e.max(axis=1, keepdims=True)
    w = np.exp2(e - m)
    z = w.sum(axis=1)
    lam = np.log2(z) + m[:, 0, :]
    mean = (w * delta[None, :, :]).sum(axis=1) / z
    return lam, mean


def rate0_objective(p, delta, d_target: float, alpha: float) -> tuple[float, np.ndarray]:
    lam, _ = _cumulants(p, delta, alpha)
    k = np.argmin(lam, axis=1)
    return alpha * d_target - float(lam[np.arange(lam.shape[0]), k].sum()), k


def rde_rate0(P, spec, d_target: float) -> Rate0Result:
    """Exponent of a single decoding attempt with the best deterministic pattern.

    ``F = sup_{alpha >= 0} [alpha D - sum_i min_k log2 E 2^(alpha delta(X_i, k))]``;
    the inner minimizer gives the pattern letters and the common ``alpha``
    equalizes the marginal exponents across positions.
    """
    p = P.p if hasattr(P, "p") else np.asarray(P, dtype=float)
    delta = spec.delta
    n = p.shape[0]
    rows = np.arange(n)
    support = p > 0
    worst = np.where(support[:, :, None], delta[None, :, :], -np.inf).max(axis=1)  # N x K
    d_top = float(worst.min(axis=1).sum())
    if d_target > d_top + 1e-12:
        raise InfeasibleError("distortion unreachable by any single pattern",
                              d_target=d_target, d_limit=d_top)
    means = p @ delta
    d0 = float(means.min(axis=1).sum())
    rep = np.asarray(spec.rep_letters)
    if d_target <= d0:
        k0 = np.argmin(means, axis=1)
        return Rate0Result(0.0, rep[k0], 0.0, means[rows, k0])

    def phi(a):
        return rate0_objective(p, delta, d_target, a)[0]

    grid = np.concatenate([[0.0], np.geomspace(1e-4, 2e3, 600)])
    vals = np.array([phi(a) for a in grid])
    g = int(np.argmax(vals))
    best_a, best_f = float(grid[g]), float(vals[g])
    lo = float(grid[max(g - 1, 0)])
    hi = float(grid[min(g + 1, len(grid) - 1)])
    _, k = rate0_objective(p, delta, d_target, best_a)
    for _ in range(20):
        # with k fixed the objective is concave; its derivative is D - sum mean
        def deriv(a, k=k):
            _, mean = _cumulants(p, delta, a)
            return d_target - float(mean[rows, k].sum())

        a_lo, a_hi = lo, hi
        if deriv(a_hi) > 0:
            a_star = a_hi
        elif deriv(a_lo) < 0:
            a_star = a_lo
        else:
            while a_hi - a_lo > 1e-13 * max(1.0, a_hi):
                mid = 0.5 * (a_lo + a_hi)
                if deriv(mid) > 0:
                    a_lo = mid
                else:
                    a_hi = mid
            a_star = 0.5 * (a_lo + a_hi)
        f_star, k_new = rate0_objective(p, delta, d_target, a_star)
        if f_star > best_f:
            best_f, best_a = f_star, a_star
        if np.array_equal(k_new, k):
            break
        k = k_new
    _, k = rate0_objective(p, delta, d_target, best_a)
    _, mean = _cumulants(p, delta, best_a)
    return Rate0Result(max(best_f, 0.0), rep[k], best_a, mean[rows, k])
