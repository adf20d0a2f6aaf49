"""Erasure-pattern codebooks and the choice of ``a`` for multiple ASD decoding."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import patterns as pat
from .errors import InfeasibleError
from .rd_numeric import SolverParams, rd_at_rate, rde_at


def pattern_count(rate: float) -> int:
    return max(1, int(round(2.0 ** rate)))


@dataclass(frozen=True, eq=False)
class Codebook:
    """``patterns[b]`` is one erasure pattern in actual position order."""

    patterns: np.ndarray
    rate: float
    scheme: str
    seed: int | None = None

    def __len__(self) -> int:
        return self.patterns.shape[0]

    @property
    def length(self) -> int:
        return self.patterns.shape[1]


def _unsort(sorted_patterns: np.ndarray, sigma) -> np.ndarray:
    """Rows are in reliability order; place column ``r`` at position ``sigma[r]``."""
    if sigma is None:
        return sorted_patterns
    sigma = np.asarray(sigma, dtype=np.int64)
    out = np.empty_like(sorted_patterns)
    out[:, sigma] = sorted_patterns
    return out


def _draw(Q: np.ndarray, count: int, rng: np.random.Generator, letters) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < -1e-12) or np.any(np.abs(Q.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("rows of Q must be probability vectors")
    n, K = Q.shape
    # one uniform per (pattern, position), drawn row-major so that a smaller
    # codebook with the same seed is a prefix of a larger one
    u = rng.random((count, n))
    cum = np.cumsum(np.clip(Q, 0.0, None), axis=1)
    cum /= cum[:, -1:]
    # letter index = number of cumulative bounds not exceeding u
    idx = np.zeros((count, n), dtype=np.int64)
    for j in range(K - 1):
        idx += u >= cum[None, :, j]
    return np.asarray(letters, dtype=np.int64)[idx]


def gen_random(Q, rate: float, seed: int, letters: Sequence[int] | None = None,
               sigma=None, scheme: str = "random") -> Codebook:
    """``round(2^rate)`` patterns with independent letters drawn from the rows of ``Q``.

    ``letters`` labels the columns of ``Q`` (default ``0..K-1``). When
    ``sigma`` is given, row ``r`` of ``Q`` describes position ``sigma[r]``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if letters is None:
        letters = range(Q.shape[1])
    rng = np.random.default_rng(seed)
    pats = _draw(Q, pattern_count(rate), rng, list(letters))
    return Codebook(_unsort(pats, sigma), float(rate), scheme, seed)


# covering codes ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoveringCode:
    """An ``q``-ary code of length ``n_c`` with covering radius ``t_c``.

    Codeword symbols are ``0..q-1``.
    """

    n_c: int
    k_c: int
    t_c: int
    codewords: np.ndarray
    q: int = 2

    @property
    def size(self) -> int:
        return self.codewords.shape[0]


def _all_words(n: int, q: int) -> np.ndarray:
    return np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)


def covering_radius(codewords: np.ndarray, q: int) -> int:
    """Exhaustive covering radius; practical for ``q^n`` up to a few million."""
    n = codewords.shape[1]
    words = _all_words(n, q)
    worst = 0
    for start in range(0, words.shape[0], 4096):
        chunk = words[start:start + 4096]
        dist = (chunk[:, None, :] != codewords[None, :, :]).sum(axis=2).min(axis=1)
        worst = max(worst, int(dist.max()))
    return worst


def hamming74() -> CoveringCode:
    G = np.array([[1, 0, 0, 0, 1, 1, 0],
                  [0, 1, 0, 0, 1, 0, 1],
                  [0, 0, 1, 0, 0, 1, 1],
                  [0, 0, 0, 1, 1, 1, 1]], dtype=np.int64)
    msgs = _all_words(4, 2)
    cw = (msgs @ G) % 2
    t = covering_radius(cw, 2)
    if t != 1:
        raise AssertionError("Hamming(7,4) must have covering radius 1")
    return CoveringCode(7, 4, 1, cw, 2)


def golay23() -> CoveringCode:
    g = 0xC75  # x^11 + x^10 + x^6 + x^5 + x^4 + x^2 + 1
    words = []
    for m in range(1 << 12):
        c = 0
        mm, sh = m, 0
        while mm:
            if mm & 1:
                c ^= g << sh
            mm >>= 1
            sh += 1
        words.append(c)
    arr = np.array(words, dtype=np.int64)
    cw = ((arr[:, None] >> np.arange(23)[None, :]) & 1).astype(np.int64)
    # linear code: minimum distance = minimum nonzero weight; distance 7 with
    # 2^12 * (1 + 23 + 253 + 1771) = 2^23 makes it perfect, radius 3
    wt = cw.sum(axis=1)
    if wt[1:].min() != 7:
        raise AssertionError("Golay(23,12) generator does not give distance 7")
    vol = sum(math.comb(23, i) for i in range(4))
    if (1 << 12) * vol != 1 << 23:
        raise AssertionError("sphere packing bound not met with equality")
    return CoveringCode(23, 12, 3, cw, 2)


def covering_from_file(path, q: int | None = None, t_c: int | None = None) -> CoveringCode:
    """Read one codeword per line (symbols space-separated or as a digit string)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split() if " " in line else list(line)
            rows.append([int(v) for v in parts])
    if not rows:
        raise ValueError(f"{path}: no codewords")
    cw = np.array(rows, dtype=np.int64)
    if q is None:
        q = int(cw.max()) + 1
    n = cw.shape[1]
    if t_c is None:
        if q ** n > 1 << 22:
            raise ValueError("covering radius must be given for large codes")
        t_c = covering_radius(cw, q)
    elif q ** n <= 1 << 22 and covering_radius(cw, q) > t_c:
        raise ValueError(f"{path}: covering radius exceeds {t_c}")
    k_c = math.log(cw.shape[0], q)
    return CoveringCode(n, int(round(k_c)), int(t_c), cw, q)


def gen_hybrid(cover: CoveringCode, Q_mrp, rate: float, sigma, seed: int,
               letters: Sequence[int] | None = None, offset: int = 1) -> Codebook:
    """Covering-code codewords on the least reliable positions, random tails elsewhere.

    Cover symbol ``b`` becomes reproduction letter ``b + offset`` (``offset=1``
    for the 1..ell alphabet of errors-only decoding, 0 for erase/keep
    letters). ``Q_mrp`` rows describe ``sigma[n_c:]`` in order.
    """
    Q_mrp = np.atleast_2d(np.asarray(Q_mrp, dtype=float))
    sigma = np.asarray(sigma, dtype=np.int64)
    n = sigma.size
    if Q_mrp.shape[0] != n - cover.n_c:
        raise ValueError("Q_mrp must cover the remaining positions")
    cover_rate = cover.k_c * math.log2(cover.q)
    if rate < cover_rate - 1e-12:
        raise ValueError(f"rate {rate} is below the covering-code rate {cover_rate}")
    if letters is None:
        letters = range(Q_mrp.shape[1])
    rng = np.random.default_rng(seed)
    tails = _draw(Q_mrp, pattern_count(rate - cover_rate), rng, list(letters))
    heads = cover.codewords + offset
    nt, nh = tails.shape[0], heads.shape[0]
    sorted_pats = np.empty((nt * nh, n), dtype=np.int64)
    sorted_pats[:, :cover.n_c] = np.tile(heads, (nt, 1))
    sorted_pats[:, cover.n_c:] = np.repeat(tails, nh, axis=0)
    return Codebook(_unsort(sorted_pats, sigma), float(rate), "hybrid", seed)


def gmd_codebook(n: int, d_min: int, sigma=None) -> Codebook:
    """Erase the 0, 2, 4, ... least reliable positions, up to ``d_min - 1``."""
    counts = list(range(0, d_min, 2))
    pats = np.ones((len(counts), n), dtype=np.int64)
    for b, e in enumerate(counts):
        pats[b, :e] = 0
    return Codebook(_unsort(pats, sigma), math.log2(len(counts)), "gmd")


def sed_codebook(n: int, l: int, f: int, sigma=None) -> Codebook:
    """Every even-size erasure set of size at most ``f`` inside the ``l`` least reliable positions."""
    rows = []
    for size in range(0, min(f, l) + 1, 2):
        for combo in itertools.combinations(range(l), size):
            r = np.ones(n, dtype=np.int64)
            r[list(combo)] = 0
            rows.append(r)
    pats = np.array(rows, dtype=np.int64)
    return Codebook(_unsort(pats, sigma), math.log2(len(rows)), f"sed({l},{f})")


def reference_codebooks(kind: str, code, sigma=None, l: int = 3, f: int = 2) -> Codebook:
    if kind == "gmd":
        return gmd_codebook(code.n, code.d_min, sigma)
    if kind == "sed":
        return sed_codebook(code.n, l, f, sigma)
    raise ValueError(f"unknown reference codebook {kind!r}")


def singleton(pattern, sigma=None, scheme: str = "singleton") -> Codebook:
    p = np.asarray(pattern, dtype=np.int64)[None, :]
    return Codebook(_unsort(p, sigma), 0.0, scheme)


def format_codebook(cb: Codebook) -> str:
    lines = [f"# {cb.scheme} {cb.rate:.9g} {cb.seed if cb.seed is not None else '-'}"]
    lines += [" ".join(str(int(v)) for v in row) for row in cb.patterns]
    return "\n".join(lines) + "\n"


def save_codebook(path, cb: Codebook) -> None:
    with open(path, "w") as fh:
        fh.write(format_codebook(cb))


def load_codebook(path) -> Codebook:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing header")
        fields = header[1:].split()
        if len(fields) != 3:
            raise ValueError(f"{path}: header must be '# scheme rate seed'")
        scheme, rate, seed = fields
        rows = [[int(v) for v in line.split()] for line in fh if line.strip()]
    return Codebook(np.array(rows, dtype=np.int64), float(rate), scheme,
                    None if seed == "-" else int(seed))


# choosing a -----------------------------------------------------------------

def _possible_ok(n: int, k: int, mu: int, a: int) -> bool:
    # mu - mu(mu+1)/(2(a+1)) > a(K-1)/(2N), cleared of denominators
    return 2 * n * mu * (a + 1) - n * mu * (mu + 1) > a * (a + 1) * (k - 1)


def a_ranges(code_or_nk, mu: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """``((mu, a_hi), (mu, a_best_hi))``: feasible ``a`` and where the best exponent lies."""
    if isinstance(code_or_nk, tuple):
        n, k = code_or_nk
    else:
        n, k = code_or_nk.n, code_or_nk.k
    if k < 2:
        raise ValueError("need K >= 2")
    theta = n / (k - 1)
    root = mu * theta - 0.5 + math.sqrt(mu * mu * theta * (theta - 1) + 0.25)
    hi = max(math.ceil(root) - 1, 0)
    while _possible_ok(n, k, mu, hi + 1):
        hi += 1
    while hi > 0 and not _possible_ok(n, k, mu, hi):
        hi -= 1
    # smallest integer strictly above (sqrt(1 + 4 theta mu (mu+1)) - 3) / 2
    best = max(int(math.floor((math.sqrt(1 + 4 * theta * mu * (mu + 1)) - 3) / 2)) + 1, 0)
    lhs = lambda a: (2 * a + 3) ** 2 * (k - 1)
    rhs = (k - 1) + 4 * n * mu * (mu + 1)
    while best > 0 and lhs(best - 1) > rhs:
        best -= 1
    while lhs(best) <= rhs:
        best += 1
    hi = max(hi, mu)
    best = min(max(best, mu), hi)
    return (mu, hi), (mu, best)


def f_decreasing_bound(n: int, k: int, mu: int) -> float:
    """Exponents strictly decrease in ``a`` beyond this value."""
    theta = n / (k - 1)
    return 0.5 * (math.sqrt(1 + 4 * theta * mu * (mu + 1)) - 3)


def expected_score(P, Q, types) -> float:
    """``sum_k sum_j sum_i m_jk p_ij q_ik`` for patterns drawn from ``Q``."""
    p = P.p if hasattr(P, "p") else np.asarray(P, dtype=float)
    q = np.asarray(Q, dtype=float)
    m = np.asarray(types, dtype=float)  # T x ell
    return float(np.einsum("ij,kj,ik->", p[:, 1:], m, q))


@dataclass(frozen=True)
class HeuristicA:
    a: int
    q: np.ndarray
    expected_score: float
    converged: bool
    used_rd_fallback: bool


def heuristic_a(P, code, mu: int, ell: int, rate: float, types=None,
                params: SolverParams = SolverParams(), relaxed: bool = False) -> HeuristicA:
    """Increase ``a`` from ``mu`` until ``ceil(E[S] / (K-1)) = a + 1``.

    When the exponent problem is infeasible at ``(rate, D_a)`` (the target is
    below the RD curve, exponent zero) the RD test channel at ``rate`` is used
    for the expected score instead.
    """
    (_, a_hi), _ = a_ranges(code, mu)
    k = code.k
    last = None
    fallback = False
    for a in range(mu, a_hi + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = pat.build_spec("asd", code, mu=mu, ell=ell, a=a, types=types, relaxed=relaxed)
        fb = False
        try:
            q = rde_at(P, spec, rate, spec.threshold, params).q
        except InfeasibleError:
            _, q, _ = rd_at_rate(P, spec, rate, params)
            fb = True
        es = expected_score(P, q, spec.types)
        last = (a, q, es, fb)
        fallback = fallback or fb
        if math.ceil(es / (k - 1)) == a + 1:
            return HeuristicA(a, q, es, True, fb)
    warnings.warn("heuristic a-selection exhausted the feasible range", stacklevel=2)
    a, q, es, fb = last
    return HeuristicA(a, q, es, False, fb)
