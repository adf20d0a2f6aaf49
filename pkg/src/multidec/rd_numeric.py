"""Blahut and Arimoto iterations for sources made of independent components.

Each component ``i`` has letter probabilities ``P[i]`` and shares the
distortion matrix ``delta``. Because a product-form test channel stays
product-form under both iterations, the whole problem is solved row by row
and the rates, distortions and exponents add up. Rows are iterated together
as one vectorized batch; converged rows are frozen.

Rates and exponents are in bits. ``t <= 0`` is the slope multiplier,
``s >= 0`` the tilt of the exponent problem.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import BracketError, InfeasibleError

_LN2 = np.log(2.0)


@dataclass(frozen=True)
class SolverParams:
    tau_max: int = 5000
    tol: float = 1e-10
    eps_r: float | None = None  # default 1e-4 * N
    eps_d: float | None = None
    t_min: float = -10.0
    s_max: float = 2.0
    max_doublings: int = 40
    max_bisections: int = 200

    def __post_init__(self):
        if self.tau_max < 1:
            raise ValueError("tau_max must be positive")
        for name in ("eps_r", "eps_d"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_min >= 0:
            raise ValueError("t_min must be negative")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")

    def tolerances(self, n: int) -> tuple[float, float]:
        er = self.eps_r if self.eps_r is not None else 1e-4 * n
        ed = self.eps_d if self.eps_d is not None else 1e-4 * n
        return er, ed


@dataclass(frozen=True)
class ComponentResult:
    """Per-row results of one solve; sums are exposed as properties."""

    f: np.ndarray
    r: np.ndarray
    d: np.ndarray
    q: np.ndarray
    p_tilt: np.ndarray
    iterations: int
    converged: bool

    @property
    def F(self) -> float:
        return float(self.f.sum())

    @property
    def R(self) -> float:
        return float(self.r.sum())

    @property
    def D(self) -> float:
        return float(self.d.sum())


@dataclass(frozen=True)
class RDEPoint:
    f: float
    r: float
    d: float
    s: float
    t: float
    q: np.ndarray
    converged: bool = True

    @property
    def normalized(self) -> tuple[float, float, float]:
        n = self.q.shape[0]
        return self.f / n, self.r / n, self.d / n


def _as_matrix(P) -> np.ndarray:
    p = P.p if hasattr(P, "p") else P
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if np.any(p < -1e-15) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("rows of P must be probability vectors")
    return np.clip(p, 0.0, None)


def _delta_of(spec_or_delta) -> np.ndarray:
    d = spec_or_delta.delta if hasattr(spec_or_delta, "delta") else spec_or_delta
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distortion entries must be nonnegative")
    return d


def _kernel(delta: np.ndarray, t: float) -> np.ndarray:
    # 2^(t delta), floored away from exact zero so denominators stay positive
    return np.exp2(np.maximum(t * delta, -1000.0))


def _measures(p, pt, q, A, delta, s):
    """F, R, D per row for the tilted source ``pt`` and channel built from ``q``."""
    den = q @ A.T  # N x J
    w = q[:, None, :] * A[None, :, :] / den[:, :, None]  # N x J x K
    d = np.einsum("ij,ijk,jk->i", pt, w, delta)
    qout = np.einsum("ij,ijk->ik", pt, w)
    joint = pt[:, :, None] * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, w / qout[:, None, :], 1.0)
    r = (xlogy(joint, ratio)).sum(axis=(1, 2)) / _LN2
    r = np.maximum(r, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (xlogy(pt, pt) - xlogy(pt, np.where(p > 0, p, 1.0))).sum(axis=1) / _LN2
    f = np.maximum(f, 0.0) if s > 0 else np.zeros_like(f)
    return f, r, d


def _iterate(p, delta, s, t, params: SolverParams, q0=None) -> ComponentResult:
    n, J = p.shape
    K = delta.shape[1]
    if delta.shape[0] != J:
        raise ValueError("distortion matrix rows do not match the source alphabet")
    if s < 0 or t > 0:
        raise ValueError("need s >= 0 and t <= 0")
    A = _kernel(delta, t)
    q = np.full((n, K), 1.0 / K) if q0 is None else np.array(q0, dtype=float)
    active = np.ones(n, dtype=bool)
    prev_r = np.full(n, np.inf)
    it = 0
    for it in range(1, params.tau_max + 1):
        idx = np.nonzero(active)[0]
        qa = q[idx]
        pa = p[idx]
        den = qa @ A.T
        pt = _tilt_den(pa, den, s)
        # exponent 1/(1+s) damps the period-2 cycle the plain update falls into for s > 1
        g = (pt / den) @ A
        qn = qa * (g if s == 0 else g ** (1.0 / (1.0 + s)))
        qn /= qn.sum(axis=1, keepdims=True)
        q[idx] = qn
        # rate change is the stopping rule; evaluate it on a cheap cadence
        if it % 10 == 0 or it == params.tau_max:
            _, r, _ = _measures(pa, _tilt(pa, qn, A, s), qn, A, delta, s)
            done = np.abs(r - prev_r[idx]) < params.tol
            prev_r[idx] = r
            active[idx[done]] = False
            if not active.any():
                break
    pt = _tilt(p, q, A, s)
    f, r, d = _measures(p, pt, q, A, delta, s)
    return ComponentResult(f, r, d, q, pt, it, not active.any())


def _tilt(p, q, A, s):
    return _tilt_den(p, q @ A.T, s)


def _tilt_den(p, den, s):
    # p * den^(-s), normalized in the log domain so large s cannot overflow
    if s == 0:
        return p
    with np.errstate(divide="ignore"):
        e = np.log(p) - s * np.log(den)
    e -= e.max(axis=1, keepdims=True)
    wgt = np.exp(e)
    return wgt / wgt.sum(axis=1, keepdims=True)


def _dedupe(p: np.ndarray):
    uniq, inv = np.unique(p, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def _solve(P, spec, s, t, params, q0=None) -> ComponentResult:
    p = _as_matrix(P)
    delta = _delta_of(spec)
    uniq, inv = _dedupe(p)
    q0u = None
    if q0 is not None:
        q0 = np.asarray(q0, dtype=float)
        q0u = np.zeros((uniq.shape[0], delta.shape[1]))
        q0u[inv] = q0  # any representative of each group will do
    res = _iterate(uniq, delta, s, t, params, q0u)
    if uniq.shape[0] == p.shape[0] and np.array_equal(uniq, p):
        return res
    return ComponentResult(res.f[inv], res.r[inv], res.d[inv], res.q[inv],
                           res.p_tilt[inv], res.iterations, res.converged)


def blahut_component(p_row, delta, t: float, params: SolverParams = SolverParams()):
    """``(R_i, D_i, q_row, converged)`` at slope ``t`` for a single source."""
    res = _iterate(_as_matrix(p_row), _delta_of(delta), 0.0, t, params)
    return float(res.r[0]), float(res.d[0]), res.q[0], res.converged


def factored_blahut(P, spec, t: float, params: SolverParams = SolverParams(), q0=None):
    """``(R_t, D_t, Q, converged)``: component sums at slope ``t``."""
    res = _solve(P, spec, 0.0, t, params, q0)
    return res.R, res.D, res.q, res.converged


def arimoto_component(p_row, delta, s: float, t: float, params: SolverParams = SolverParams()):
    """``(F_i, R_i, D_i, q_row, converged)`` at multipliers ``(s, t)``."""
    res = _iterate(_as_matrix(p_row), _delta_of(delta), s, t, params)
    return float(res.f[0]), float(res.r[0]), float(res.d[0]), res.q[0], res.converged


def factored_arimoto(P, spec, s: float, t: float, params: SolverParams = SolverParams(),
                     q0=None) -> RDEPoint:
    res = _solve(P, spec, s, t, params, q0)
    return RDEPoint(res.F, res.R, res.D, s, t, res.q, res.converged)


def factored_arimoto_components(P, spec, s, t, params: SolverParams = SolverParams()) -> ComponentResult:
    return _solve(P, spec, s, t, params)


# bisection schedules ----------------------------------------------------------

def _degenerate_q(p, delta):
    means = p @ delta
    k = np.argmin(means, axis=1)
    q = np.zeros((p.shape[0], delta.shape[1]))
    q[np.arange(p.shape[0]), k] = 1.0
    return float(means[np.arange(p.shape[0]), k].sum()), q


def _warm(q, weight: float = 1e-3):
    if q is None:
        return None
    return (1.0 - weight) * q + weight / q.shape[1]


def _t_saturated(spec) -> float:
    # most negative t whose kernel 2^(t delta) is computed without the floor
    return -1000.0 / max(float(_delta_of(spec).max()), 1e-12)


def _t_for_rate(P, spec, s, r_target, params, eps_r, q_hint=None):
    """Bracket then bisect on ``t`` so that ``R(s, t)`` hits ``r_target``.

    For ``s = 0`` the rate grows as ``t`` decreases, so the bracket starts at
    ``t_min`` and doubles. For ``s > 0`` the rate rises to a peak and falls
    again once the tilt concentrates the source, so ``t`` is scanned outward
    from zero and the first crossing is kept. Raises :class:`BracketError`
    when the target is never reached.
    """
    if s == 0:
        t_sat = _t_saturated(spec)
        t_prev, t_cur = 0.0, max(params.t_min, t_sat)
        pt = factored_arimoto(P, spec, s, t_cur, params, _warm(q_hint))
        doublings = 0
        while pt.r < r_target - eps_r:
            doublings += 1
            if doublings > params.max_doublings or t_cur <= t_sat:
                raise BracketError(f"rate {r_target} not reached down to t = {t_cur}")
            t_prev, t_cur = t_cur, max(2.0 * t_cur, t_sat)
            pt = factored_arimoto(P, spec, s, t_cur, params, _warm(pt.q))
    else:
        t_prev, t_cur = 0.0, -1.0 / 16
        pt = factored_arimoto(P, spec, s, t_cur, params, _warm(q_hint))
        peak = pt.r
        doublings = 0
        while pt.r < r_target - eps_r:
            doublings += 1
            if doublings > params.max_doublings or (peak > eps_r and pt.r < 0.5 * peak):
                raise BracketError(f"rate {r_target} above the peak {peak:.6g} at s = {s}")
            t_prev, t_cur = t_cur, 2.0 * t_cur
            pt = factored_arimoto(P, spec, s, t_cur, params, _warm(pt.q))
            peak = max(peak, pt.r)
    lo, hi = t_cur, t_prev  # R(lo) >= target > R(hi) up to eps_r
    best = pt
    for _ in range(params.max_bisections):
        if abs(best.r - r_target) <= eps_r:
            break
        mid = 0.5 * (lo + hi)
        cur = factored_arimoto(P, spec, s, mid, params, _warm(best.q))
        if cur.r > r_target:
            lo = mid
        else:
            hi = mid
        if abs(cur.r - r_target) <= abs(best.r - r_target):
            best = cur
        if hi - lo < 1e-13:
            break
    return best


def rd_at_rate(P, spec, r_target: float, params: SolverParams = SolverParams()):
    """Distortion and test channel at design rate ``r_target``; returns ``(D, Q, t)``."""
    p = _as_matrix(P)
    delta = _delta_of(spec)
    if r_target < 0:
        raise ValueError("rate must be nonnegative")
    if r_target == 0:
        d, q = _degenerate_q(p, delta)
        return d, q, 0.0
    eps_r, _ = params.tolerances(p.shape[0])
    try:
        pt = _t_for_rate(p, delta, 0.0, r_target, params, eps_r)
    except BracketError:
        # beyond the largest useful rate the curve is flat at the minimum distortion
        pt = factored_arimoto(p, delta, 0.0, _t_saturated(delta), params)
        if pt.r >= r_target - eps_r:
            raise
    return pt.d, pt.q, pt.t


def rde_at(P, spec, r_target: float, d_target: float,
           params: SolverParams = SolverParams()) -> RDEPoint:
    """Exponent at ``(R, D)`` by nested bisection: outer on ``s``, inner on ``t``.

    Raises :class:`InfeasibleError` when ``D`` is below the rate-distortion
    curve at ``R`` (no large deviation is needed, the exponent is zero) or
    beyond what any tilt reaches.
    """
    p = _as_matrix(P)
    delta = _delta_of(spec)
    n = p.shape[0]
    if r_target < 0:
        raise ValueError("rate must be nonnegative")
    if r_target == 0:
        from .rd_closed import rde_rate0
        res = rde_rate0(p, spec, d_target)
        cols = np.searchsorted(np.asarray(spec.rep_letters), res.k_star)
        q = np.zeros((n, delta.shape[1]))
        q[np.arange(n), cols] = 1.0
        return RDEPoint(res.f, 0.0, float(res.d_alloc.sum()), 0.0, 0.0, q)
    eps_r, eps_d = params.tolerances(n)

    base = _t_for_rate(p, delta, 0.0, r_target, params, eps_r)
    if d_target < base.d - eps_d:
        raise InfeasibleError("distortion below the rate-distortion curve; exponent is zero",
                              d_target=d_target, d_limit=base.d, r_target=r_target)
    if abs(d_target - base.d) <= eps_d:
        return base

    # D(s) grows with s along R = r_target; s beyond the rate peak counts as too far
    s_max = params.s_max
    lo, hi = 0.0, None
    best = base
    hint = base.q
    for _ in range(params.max_doublings):
        try:
            cur = _t_for_rate(p, delta, s_max, r_target, params, eps_r, hint)
        except BracketError:
            hi = s_max
            break
        hint = cur.q
        if abs(cur.d - d_target) <= abs(best.d - d_target):
            best = cur
        if abs(cur.d - d_target) <= eps_d:
            return cur
        if cur.d > d_target:
            hi = s_max
            break
        lo = s_max
        s_max *= 2.0
    if hi is None:
        raise InfeasibleError("distortion not reachable at this rate",
                              d_target=d_target, d_limit=best.d, r_target=r_target)
    for _ in range(params.max_bisections):
        mid = 0.5 * (lo + hi)
        try:
            cur = _t_for_rate(p, delta, mid, r_target, params, eps_r, hint)
        except BracketError:
            hi = mid
            continue
        hint = cur.q
        if abs(cur.d - d_target) <= abs(best.d - d_target):
            best = cur
        if abs(cur.d - d_target) <= eps_d:
            return cur
        if cur.d < d_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    if abs(best.d - d_target) > eps_d:
        raise InfeasibleError("distortion not reachable at this rate",
                              d_target=d_target, d_limit=best.d, r_target=r_target)
    return best


def slope_gap(P, spec, s: float, t: float, h: float = 1e-3,
              params: SolverParams = SolverParams()) -> np.ndarray:
    """Per-component gap between left and right secant slopes ``dR_i/dD_i`` around ``t``.

    On a smooth component both secants approach ``t``; a large gap flags a
    slope discontinuity where the parametric form may undershoot the curve.
    """
    mid = factored_arimoto_components(P, spec, s, t, params)
    left = factored_arimoto_components(P, spec, s, t - h, params)
    right = factored_arimoto_components(P, spec, s, min(t + h, 0.0), params)
    with np.errstate(divide="ignore", invalid="ignore"):
        sl = (mid.r - left.r) / (mid.d - left.d)
        sr = (right.r - mid.r) / (right.d - mid.d)
        gap = np.abs(sl - sr)
    return np.where(np.isfinite(gap), gap, 0.0)


def sample_curve(P, spec, s_values, t_values, params: SolverParams = SolverParams()) -> list[RDEPoint]:
    out = []
    for s in s_values:
        for t in t_values:
            out.append(factored_arimoto(P, spec, float(s), float(t), params))
    return out


def save_curve(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s", "F", "R", "D"])
        for pt in points:
            w.writerow([f"{v:.9g}" for v in (pt.t, pt.s, pt.f, pt.r, pt.d)])


__all__ = [
    "SolverParams", "RDEPoint", "ComponentResult", "blahut_component", "factored_blahut",
    "arimoto_component", "factored_arimoto", "factored_arimoto_components", "rd_at_rate",
    "rde_at", "slope_gap", "sample_curve", "save_curve",
]
