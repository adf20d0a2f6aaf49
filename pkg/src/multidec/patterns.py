"""Distortion measures that turn decoding-success conditions into threshold tests.

Every scheme maps an error pattern ``x`` (what the channel did) and an
erasure pattern ``xhat`` (what the decoder is told to do) to a distortion
``d(x, xhat) = sum_i delta(x_i, xhat_i)``. A single decoding attempt
succeeds exactly when ``d < d_thresh``.

Schemes:

* ``mbm``: errors-and-erasures BM with the top ``ell`` candidates; letters
  ``0..ell`` on both sides, 0 meaning "none correct" / "erase".
* ``errors_only``: BM without erasures; reproduction letters ``1..ell``.
* ``bit_asd``: bit-level ASD, binary letters per bit.
* ``asd``: symbol-level ASD with multiplicity types; reproduction letter
  ``k`` (1-based) selects the k-th type.
"""
from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Sequence

import numpy as np

Type = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    scheme: str
    src_letters: tuple[int, ...]
    rep_letters: tuple[int, ...]
    delta_exact: np.ndarray = field(repr=False)  # object array of Fraction
    d_thresh: Fraction
    ell: int = 1
    mu: int | None = None
    a: int | None = None
    types: tuple[Type, ...] | None = None

    @cached_property
    def delta(self) -> np.ndarray:
        return self.delta_exact.astype(float)

    @property
    def threshold(self) -> float:
        return float(self.d_thresh)

    @property
    def shape(self) -> tuple[int, int]:
        return self.delta_exact.shape

    def rep_index(self, xhat) -> np.ndarray:
        """Map reproduction letters to column indices of ``delta``."""
        xhat = np.asarray(xhat, dtype=np.int64)
        off = self.rep_letters[0]
        idx = xhat - off
        if np.any(idx < 0) or np.any(idx >= len(self.rep_letters)):
            raise ValueError("erasure-pattern letter outside the reproduction alphabet")
        return idx


def _frac_matrix(rows) -> np.ndarray:
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            arr[i, j] = Fraction(v)
    return arr


def type_allowed(t: Sequence[int], mu: int) -> bool:
    if any(m < 0 for m in t) or sum(t) > mu:
        return False
    nz = [m for m in t if m]
    min_nz = min(nz) if nz else 0
    lhs = sum(m * (mu - m) for m in t)
    return lhs <= (mu + 1) * (len(nz) - 1) * min_nz


def _order_types(types, mu: int, ell: int) -> list[Type]:
    first = (mu,) + (0,) * (ell - 1)
    rest = sorted((t for t in types if t != first), reverse=True)
    return [first] + rest


def allowable_set(mu: int, ell: int, relaxed: bool = False) -> list[Type]:
    """Allowable multiplicity types, ``(mu, 0, ..., 0)`` first.

    ``relaxed=True`` keeps every type with total multiplicity at most ``mu``;
    with it the score/cost inequality and the high-rate equivalence are no
    longer guaranteed.
    """
    if mu < 1 or ell < 1:
        raise ValueError("need mu >= 1 and ell >= 1")
    cand = [t for t in itertools.product(range(mu + 1), repeat=ell) if sum(t) <= mu]
    if not relaxed:
        cand = [t for t in cand if type_allowed(t, mu)]
    return _order_types(cand, mu, ell)


def rho(t: Sequence[int], mu: int, a: int) -> Fraction:
    return Fraction(mu * (2 * a + 1 - mu) + sum(m * (m + 1) for m in t), a * (a + 1))


def asd_threshold(n: int, k: int, mu: int, a: int) -> Fraction:
    return Fraction(mu * (2 * a + 1 - mu) * n, a * (a + 1)) - k + 1


def build_spec(scheme: str, code=None, *, n: int | None = None, k: int | None = None,
               ell: int = 1, mu: int | None = None, a: int | None = None,
               types: Sequence[Sequence[int]] | None = None,
               relaxed: bool = False) -> DistortionSpec:
    """Distortion matrix and threshold for ``scheme`` on an (n, k) code."""
    if code is not None:
        n, k = code.n, code.k
    if n is None or k is None:
        raise ValueError("need a code or explicit n and k")
    dmin = n - k + 1
    if scheme == "mbm":
        if ell < 1:
            raise ValueError("ell must be positive")
        rows = [[1] + [2] * ell]
        for j in range(1, ell + 1):
            rows.append([1] + [0 if kk == j else 2 for kk in range(1, ell + 1)])
        return DistortionSpec("mbm", tuple(range(ell + 1)), tuple(range(ell + 1)),
                              _frac_matrix(rows), Fraction(dmin), ell=ell)
    if scheme == "errors_only":
        rows = [[1] * ell]
        for j in range(1, ell + 1):
            rows.append([0 if kk == j else 1 for kk in range(1, ell + 1)])
        return DistortionSpec("errors_only", tuple(range(ell + 1)), tuple(range(1, ell + 1)),
                              _frac_matrix(rows), Fraction(dmin, 2), ell=ell)
    if scheme == "bit_asd":
        rows = [[1, 3], [1, 0]]
        return DistortionSpec("bit_asd", (0, 1), (0, 1), _frac_matrix(rows),
                              Fraction(3 * dmin, 2), ell=1, mu=2)
    if scheme == "asd":
        if mu is None:
            raise ValueError("asd needs mu")
        if a is None:
            a = mu
        if a < mu:
            raise ValueError(f"a must be at least mu ({a} < {mu})")
        if types is None:
            tlist = allowable_set(mu, ell, relaxed=relaxed)
        else:
            tlist = [tuple(int(m) for m in t) for t in types]
        first = (mu,) + (0,) * (ell - 1)
        if not tlist or tlist[0] != first:
            raise ValueError(f"type 1 must be {first}")
        for t in tlist:
            if len(t) != ell:
                raise ValueError(f"type {t} does not have length {ell}")
            if relaxed:
                if any(m < 0 for m in t) or sum(t) > mu:
                    raise ValueError(f"type {t} exceeds total multiplicity {mu}")
            elif not type_allowed(t, mu):
                raise ValueError(f"type {t} is not allowable for mu={mu}")
        if relaxed:
            warnings.warn("relaxed multiplicity types: score/cost guarantees do not hold",
                          stacklevel=2)
        cols = []
        for t in tlist:
            r = rho(t, mu, a)
            cols.append([r] + [r - Fraction(2 * m, a) for m in t])
        rows = [list(r) for r in zip(*cols)]
        return DistortionSpec("asd", tuple(range(ell + 1)), tuple(range(1, len(tlist) + 1)),
                              _frac_matrix(rows), asd_threshold(n, k, mu, a),
                              ell=ell, mu=mu, a=a, types=tuple(tlist))
    raise ValueError(f"unknown scheme {scheme!r}")


def distortion(x, xhat, spec: DistortionSpec, exact: bool = False):
    """``sum_i delta(x_i, xhat_i)``; a Fraction when ``exact`` is set."""
    x = np.asarray(x, dtype=np.int64)
    xhat = np.asarray(xhat, dtype=np.int64)
    if x.shape != xhat.shape:
        raise ValueError("error and erasure patterns differ in length")
    if np.any(x < 0) or np.any(x >= len(spec.src_letters)):
        raise ValueError("error-pattern letter outside the source alphabet")
    cols = spec.rep_index(xhat)
    if exact:
        return sum(spec.delta_exact[x, cols].tolist(), Fraction(0))
    return float(spec.delta[x, cols].sum())


def distortion_batch(x, xhats: np.ndarray, spec: DistortionSpec) -> np.ndarray:
    """Distortion of one error pattern against each row of ``xhats``."""
    x = np.asarray(x, dtype=np.int64)
    cols = spec.rep_index(xhats)
    return spec.delta[x[None, :], cols].sum(axis=1)


def success(x, xhat, spec: DistortionSpec) -> bool:
    return distortion(x, xhat, spec, exact=True) < spec.d_thresh


def d_max(P, spec: DistortionSpec) -> float:
    """Largest useful distortion: ``sum_i min_k sum_j p_ij delta_jk``."""
    p = P.p if hasattr(P, "p") else np.asarray(P, dtype=float)
    if p.shape[1] != spec.shape[0]:
        raise ValueError("source alphabet does not match the distortion matrix")
    return float(np.sum(np.min(p @ spec.delta, axis=1)))


@dataclass(frozen=True)
class PatternStats:
    """Joint letter counts ``chi[j, k]`` of an (error, erasure) pattern pair.

    Columns follow the reproduction alphabet of ``spec``. ``e`` counts
    erased positions (reproduction letter 0) and ``nu`` positions whose
    chosen symbol is wrong; both are 0-filled where a scheme has no erasure
    letter.
    """

    chi: np.ndarray
    e_k: np.ndarray
    nu_jk: np.ndarray
    e: int
    nu: int


def pattern_stats(x, xhat, spec: DistortionSpec) -> PatternStats:
    x = np.asarray(x, dtype=np.int64)
    cols = spec.rep_index(xhat)
    ns, nr = spec.shape
    chi = np.zeros((ns, nr), dtype=np.int64)
    np.add.at(chi, (x, cols), 1)
    e_k = chi.sum(axis=0)
    nu_jk = e_k[None, :] - chi
    e = 0
    nu = 0
    for c, letter in enumerate(spec.rep_letters):
        if letter == 0:
            e += int(e_k[c])
        else:
            nu += int(e_k[c] - (chi[letter, c] if letter < ns else 0))
    return PatternStats(chi, e_k, nu_jk, e, nu)


# multiplicity assignment ------------------------------------------------------

def multiplicity_matrix(xhat, types: Sequence[Type], rel) -> np.ndarray:
    """``m x N`` multiplicity matrix; letter ``k`` puts type ``k`` on the sorted candidates."""
    xhat = np.asarray(xhat, dtype=np.int64)
    tarr = np.asarray(types, dtype=np.int64)
    if np.any(xhat < 1) or np.any(xhat > len(types)):
        raise ValueError("erasure-pattern letter does not index a type")
    ell = tarr.shape[1]
    n = rel.n
    M = np.zeros((rel.m, n), dtype=np.int64)
    cols = np.arange(n)
    mult = tarr[xhat - 1]  # N x ell
    for j in range(ell):
        M[rel.phi[:, j], cols] += mult[:, j]
    return M


def bit_multiplicity_matrix(bhat, hd_bits, eta: int) -> np.ndarray:
    """Bit-level assignment: 2 on a fully kept symbol, 1 on each of the two
    candidates when one bit is erased, nothing when two or more are erased.

    ``bhat`` has one entry per bit (0 = erase), ``hd_bits`` are the
    hard-decision bits in the same layout (bit ``b`` of position ``i`` at
    ``i*eta + b``).
    """
    bhat = np.asarray(bhat, dtype=np.int64).reshape(-1, eta)
    hd = np.asarray(hd_bits, dtype=np.int64).reshape(-1, eta)
    n = bhat.shape[0]
    weights = 1 << np.arange(eta)
    sym = hd @ weights
    M = np.zeros((1 << eta, n), dtype=np.int64)
    nerased = (bhat == 0).sum(axis=1)
    for i in range(n):
        if nerased[i] == 0:
            M[sym[i], i] = 2
        elif nerased[i] == 1:
            b = int(np.argmin(bhat[i]))
            M[sym[i], i] = 1
            M[sym[i] ^ (1 << b), i] = 1
    return M


@dataclass(frozen=True)
class ScoreCost:
    score: int
    cost: int


def score_cost(M, transmitted) -> ScoreCost:
    M = np.asarray(M, dtype=np.int64)
    c = np.asarray(transmitted, dtype=np.int64)
    s = int(M[c, np.arange(M.shape[1])].sum())
    cost2 = int((M * (M + 1)).sum())
    return ScoreCost(s, cost2 // 2)


def interval_a(score: int, k: int) -> int:
    """The unique ``a`` with ``a(K-1) < S <= (a+1)(K-1)``."""
    if k < 2:
        raise ValueError("score interval needs K >= 2")
    return -(-score // (k - 1)) - 1


def score_condition(score: int, cost: int, k: int, a: int) -> bool:
    """``(a+1) [S - a(K-1)/2] > C`` in integer arithmetic."""
    return (a + 1) * (2 * score - a * (k - 1)) > 2 * cost


def asd_success(sc: ScoreCost, code_or_k) -> bool:
    k = code_or_k if isinstance(code_or_k, (int, np.integer)) else code_or_k.k
    if sc.score <= 0:
        return False
    return score_condition(sc.score, sc.cost, int(k), interval_a(sc.score, int(k)))


def asd_success_batch(x, xhats: np.ndarray, types: Sequence[Type], k: int) -> np.ndarray:
    """Score/cost oracle for one error pattern against many type patterns.

    Uses ``S = sum_i m_{x_i, xhat_i}`` and ``C = sum_i cost(type xhat_i)``,
    which equal the matrix sums because type entries sit on distinct symbols.
    """
    x = np.asarray(x, dtype=np.int64)
    tarr = np.asarray(types, dtype=np.int64)
    T, ell = tarr.shape
    w = np.zeros((ell + 1, T), dtype=np.int64)
    w[1:, :] = tarr.T
    cost2 = (tarr * (tarr + 1)).sum(axis=1)
    cols = np.asarray(xhats, dtype=np.int64) - 1
    s = w[x[None, :], cols].sum(axis=1)
    c2 = cost2[cols].sum(axis=1)
    a = np.where(s > 0, -(-s // (k - 1)) - 1, 0)
    return (s > 0) & ((a + 1) * (2 * s - a * (k - 1)) > c2)


def high_rate(n: int, k: int, mu: int) -> bool:
    """True when ``K/N >= 1/N + mu(mu+3)/((mu+1)(mu+2))``, where ``a = mu`` is forced."""
    return Fraction(k, n) >= Fraction(1, n) + Fraction(mu * (mu + 3), (mu + 1) * (mu + 2))


# CSV export -----------------------------------------------------------------

def save_spec(path, spec: DistortionSpec) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_letter", "col_letter", "delta"])
        for i, rl in enumerate(spec.src_letters):
            for j, cl in enumerate(spec.rep_letters):
                w.writerow([rl, cl, _fmt_frac(spec.delta_exact[i, j])])


def _fmt_frac(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{float(v):.12g}"


def generalized_counts(x, xhat) -> tuple[int, int]:
    """``(nu, e)`` for a top-ell error pattern against an erasure pattern."""
    x = np.asarray(x)
    xhat = np.asarray(xhat)
    e = int(np.sum(xhat == 0))
    nu = int(np.sum((xhat != 0) & (x != xhat)))
    return nu, e


def bit_counts(b, bhat) -> tuple[int, int]:
    """``(nu_b, e_b)``: unerased bit errors and bit erasures."""
    b = np.asarray(b)
    bhat = np.asarray(bhat)
    e = int(np.sum(bhat == 0))
    nu = int(np.sum((bhat == 1) & (b == 0)))
    return nu, e


__all__ = [
    "DistortionSpec", "PatternStats", "ScoreCost", "allowable_set", "type_allowed",
    "build_spec", "distortion", "distortion_batch", "success", "d_max", "pattern_stats",
    "multiplicity_matrix", "bit_multiplicity_matrix", "score_cost", "asd_success",
    "asd_success_batch", "interval_a", "score_condition", "high_rate", "save_spec",
    "rho", "asd_threshold", "generalized_counts", "bit_counts",
]
