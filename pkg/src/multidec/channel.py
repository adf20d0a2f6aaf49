"""Channel models and the per-position reliability information derived from them.

Symbols are identified with their integer field representation, so row ``a``
of ``pi`` is the posterior probability that the transmitted symbol is ``a``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

_CLAMP = 1e-300


@dataclass(frozen=True, eq=False)
class ReliabilityMatrix:
    """Posterior matrix ``pi`` (m x N) with its sorting permutations.

    ``phi[i]`` lists the symbols at position ``i`` from most to least likely,
    ``sigma`` lists positions from least to most reliable. Both are 0-based.
    """

    pi: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_pi(cls, pi: np.ndarray) -> "ReliabilityMatrix":
        pi = np.asarray(pi, dtype=float)
        if pi.ndim != 2:
            raise ValueError("pi must be an m x N matrix")
        # stable sorts: ties go to the lower symbol / position index
        phi = np.argsort(-pi, axis=0, kind="stable").T.copy()
        best = pi[phi[:, 0], np.arange(pi.shape[1])]
        sigma = np.argsort(best, kind="stable")
        return cls(pi, phi, sigma)

    @property
    def m(self) -> int:
        return self.pi.shape[0]

    @property
    def n(self) -> int:
        return self.pi.shape[1]

    @property
    def eta(self) -> int:
        return int(self.m).bit_length() - 1

    def hard_decision(self) -> np.ndarray:
        return self.phi[:, 0].astype(np.int64)

    def candidates(self, ell: int) -> np.ndarray:
        """``ell x N`` array whose row ``j`` is the (j+1)-th most likely symbol."""
        return np.ascontiguousarray(self.phi[:, :ell].T, dtype=np.int64)

    def sorted_probs(self) -> np.ndarray:
        """``N x m`` matrix: entry ``[i, j]`` is the probability of the (j+1)-th best symbol."""
        return np.take_along_axis(self.pi.T, self.phi, axis=1)

    def symbol_log_likelihood(self, word: Sequence[int]) -> float:
        w = np.asarray(word, dtype=np.int64)
        vals = self.pi[w, np.arange(self.n)]
        return float(np.sum(np.log(np.maximum(vals, _CLAMP))))

    def bit_marginals(self) -> np.ndarray:
        """``N*eta`` vector of Pr(bit = 1); bit ``b`` of position ``i`` sits at ``i*eta + b``."""
        bits = _bit_table(self.eta)  # m x eta
        p1 = self.pi.T @ bits  # N x eta
        return p1.reshape(-1)


@lru_cache(maxsize=None)
def _bit_table(eta: int) -> np.ndarray:
    a = np.arange(1 << eta)
    t = ((a[:, None] >> np.arange(eta)[None, :]) & 1).astype(float)
    t.setflags(write=False)
    return t


def symbol_bits(symbols: np.ndarray, eta: int) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64)
    return ((s[:, None] >> np.arange(eta)[None, :]) & 1).reshape(-1)


def _normalize_log(logl: np.ndarray) -> np.ndarray:
    logl = logl - logl.max(axis=0, keepdims=True)
    pi = np.maximum(np.exp(logl), _CLAMP)
    return pi / pi.sum(axis=0, keepdims=True)


def _gray(n: int) -> np.ndarray:
    g = np.arange(n)
    return g ^ (g >> 1)


@lru_cache(maxsize=None)
def qam_constellation(m: int) -> np.ndarray:
    """Gray-mapped square m-QAM, unit average energy, indexed by symbol value."""
    side = int(round(np.sqrt(m)))
    if side * side != m or side & (side - 1):
        raise ValueError(f"m-QAM needs m to be an even power of two, got {m}")
    half = side.bit_length() - 1
    levels = 2 * np.arange(side) - (side - 1)
    # level index whose Gray label equals each half-symbol value
    inv = np.empty(side, dtype=np.int64)
    inv[_gray(side)] = np.arange(side)
    sym = np.arange(m)
    re = levels[inv[sym & (side - 1)]]
    im = levels[inv[sym >> half]]
    pts = re + 1j * im
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return pts


def noise_n0(snr_db: float, eta: int, rate: float, modulation: str, snr_type: str) -> float:
    """One-sided noise density N0 for unit energy per channel symbol.

    Energy per BPSK symbol (one bit) or per QAM point is 1. For ``ebn0``
    the energy per information bit accounts for the code rate.
    """
    snr = 10.0 ** (snr_db / 10.0)
    if snr_type == "ebn0":
        bits_per_channel_symbol = 1 if modulation == "bpsk" else eta
        n0 = 1.0 / (snr * rate * bits_per_channel_symbol)
    elif snr_type == "esn0":
        n0 = 1.0 / snr
    else:
        raise ValueError(f"unknown SNR convention {snr_type!r}")
    if not np.isfinite(n0) or n0 <= 0:
        raise ValueError("noise variance must be positive")
    return n0


def simulate_awgn(code, codeword: Sequence[int], modulation: str, snr_db: float,
                  rng: np.random.Generator, snr_type: str = "ebn0",
                  noise_var: float | None = None) -> ReliabilityMatrix:
    """Transmit ``codeword`` over AWGN and return the exact posteriors.

    ``noise_var`` (per real dimension) overrides the SNR when given.
    """
    eta = code.field.eta
    m = 1 << eta
    c = np.asarray(codeword, dtype=np.int64)
    rate = code.k / code.n
    if noise_var is None:
        n0 = noise_n0(snr_db, eta, rate, modulation, snr_type)
        var = n0 / 2.0
    else:
        var = float(noise_var)
        if not var > 0:
            raise ValueError("noise variance must be positive")
    if modulation == "bpsk":
        bits = _bit_table(eta)  # m x eta
        x = 1.0 - 2.0 * bits[c]  # N x eta
        y = x + rng.standard_normal(x.shape) * np.sqrt(var)
        # log p(y | a) up to a constant is sum_b x_b(a) y_b / var
        logl = (1.0 - 2.0 * bits) @ y.T / var
    elif modulation == "mqam":
        pts = qam_constellation(m)
        s = pts[c]
        noise = (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)) * np.sqrt(var)
        r = s + noise
        logl = -np.abs(r[None, :] - pts[:, None]) ** 2 / (2.0 * var)
    else:
        raise ValueError(f"unknown modulation {modulation!r}")
    return ReliabilityMatrix.from_pi(_normalize_log(logl))


def simulate_msc(code, codeword: Sequence[int], p: float,
                 rng: np.random.Generator) -> ReliabilityMatrix:
    """m-ary symmetric channel: correct with probability ``p``, otherwise uniform."""
    m = code.field.size
    if not (1.0 / m < p <= 1.0):
        raise ValueError(f"p must lie in (1/m, 1], got {p}")
    c = np.asarray(codeword, dtype=np.int64)
    n = c.shape[0]
    err = rng.random(n) >= p
    offs = rng.integers(1, m, n)
    r = np.where(err, c ^ offs, c)
    pi = np.full((m, n), (1.0 - p) / (m - 1))
    pi[r, np.arange(n)] = p
    return ReliabilityMatrix.from_pi(pi)


def extract_error_pattern(rel: ReliabilityMatrix, transmitted: Sequence[int],
                          scheme: str = "top", ell: int = 1) -> np.ndarray:
    """Error pattern of ``transmitted`` relative to the sorted candidates.

    ``top``: ``x_i = j`` if the j-th most likely symbol (``j <= ell``) is
    correct, else 0. ``bit``: one entry per bit, 1 where the hard-decision
    bit is right.
    """
    c = np.asarray(transmitted, dtype=np.int64)
    if scheme == "top":
        hit = rel.phi[:, :ell] == c[:, None]
        return np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, 0).astype(np.int64)
    if scheme == "bit":
        hd = (rel.bit_marginals() > 0.5).astype(np.int64)
        return (hd == symbol_bits(c, rel.eta)).astype(np.int64)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True, eq=False)
class SourceDist:
    """Letter probabilities ``p[i, j] = Pr(X_i = j)`` of the error pattern.

    ``kind`` is ``top`` (letters 0..ell) or ``bit`` (letters 0, 1 with
    ``N*eta`` rows).
    """

    p: np.ndarray
    kind: str = "top"
    ell: int = 1

    @property
    def n(self) -> int:
        return self.p.shape[0]


def _top_source(sorted_probs: np.ndarray, ell: int) -> np.ndarray:
    top = np.clip(sorted_probs[:, :ell], 0.0, 1.0)
    p0 = np.clip(1.0 - top.sum(axis=1), 0.0, 1.0)
    return np.column_stack([p0, top])


def source_dist(rel: "ReliabilityMatrix | AverageProfile", scheme: str = "top",
                ell: int = 1, order: str = "identity") -> SourceDist:
    """Error-pattern letter distribution from a reliability matrix or averaged profile.

    With ``order="reliability"`` the rows of a reliability matrix are listed
    in ``sigma`` order (least reliable first); a profile is already stored
    that way.
    """
    if isinstance(rel, AverageProfile):
        if scheme != "top":
            raise ValueError("averaged profiles only support the top-ell scheme")
        return SourceDist(_top_source(rel.probs, ell), "top", ell)
    if scheme == "top":
        sp = rel.sorted_probs()
        if order == "reliability":
            sp = sp[rel.sigma]
        return SourceDist(_top_source(sp, ell), "top", ell)
    if scheme == "bit":
        p1 = rel.bit_marginals()
        good = np.maximum(p1, 1.0 - p1)
        if order == "reliability":
            good = good[np.argsort(good, kind="stable")]
        return SourceDist(np.column_stack([1.0 - good, good]), "bit", 1)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True, eq=False)
class AverageProfile:
    """Entry-wise average of sorted posteriors in reliability order.

    ``probs[r, j]`` is the mean probability of the (j+1)-th most likely
    symbol at the r-th least reliable position.
    """

    probs: np.ndarray
    frames: int

    @property
    def n(self) -> int:
        return self.probs.shape[0]


class ProfileAccumulator:
    """Running average for building an :class:`AverageProfile` on the fly."""

    def __init__(self):
        self._sum: np.ndarray | None = None
        self._count = 0

    def add(self, rel: ReliabilityMatrix) -> None:
        sp = rel.sorted_probs()[rel.sigma]
        if self._sum is None:
            self._sum = np.zeros_like(sp)
        self._sum += sp
        self._count += 1

    def result(self) -> AverageProfile:
        if self._sum is None:
            raise ValueError("no frames accumulated")
        return AverageProfile(self._sum / self._count, self._count)


def average_profile(rels: Iterable[ReliabilityMatrix]) -> AverageProfile:
    acc = ProfileAccumulator()
    for rel in rels:
        acc.add(rel)
    return acc.result()


def save_profile(path, probs: np.ndarray, first_letter: int = 1) -> None:
    """Write a position x letter matrix as ``position,letter,prob`` rows."""
    probs = np.asarray(probs, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position", "letter", "prob"])
        for i in range(probs.shape[0]):
            for j in range(probs.shape[1]):
                w.writerow([i, j + first_letter, f"{probs[i, j]:.9g}"])


def load_profile(path) -> tuple[np.ndarray, int]:
    """Inverse of :func:`save_profile`; returns the matrix and its first letter."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty profile")
    pos = np.array([int(r["position"]) for r in rows])
    let = np.array([int(r["letter"]) for r in rows])
    val = np.array([float(r["prob"]) for r in rows])
    first = int(let.min())
    out = np.zeros((pos.max() + 1, let.max() - first + 1))
    out[pos, let - first] = val
    return out, first
