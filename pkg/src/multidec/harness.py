"""Monte-Carlo FER campaigns: design a codebook, run multi-trial decoding, pick by ML."""
from __future__ import annotations

import csv
import io
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import binomtest

from . import _kernels
from . import codebook as cbm
from . import patterns as pat
from .channel import (ReliabilityMatrix, SourceDist, extract_error_pattern, simulate_awgn,
                      simulate_msc, source_dist, ProfileAccumulator)
from .errors import InfeasibleError
from .rd_numeric import SolverParams, rd_at_rate, rde_at
from .rs import RSCode, rs_encode

CHANNELS = ("awgn_bpsk", "awgn_mqam", "msc")
SCHEMES = ("mbm", "errors_only", "asd", "bit_asd")
CODEBOOKS = ("algorithm_a", "algorithm_b", "gmd", "sed", "singleton", "file")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n: int = 255
    k: int = 239
    eta: int | None = None
    channel: str = "awgn_bpsk"
    grid: tuple[float, ...] = (5.0,)
    snr_type: str = "ebn0"
    scheme: str = "mbm"
    ell: int = 1
    mu: int | None = None
    a: int | str | None = None  # an integer or "heuristic"
    types: tuple[tuple[int, ...], ...] | None = None
    relaxed: bool = False
    approach: str = "rd"
    rate: float = 0.0
    design_rate: float | None = None  # Q is designed here; defaults to rate
    d_target: float | None = None
    codebook: str = "algorithm_b"
    codebook_file: str | None = None
    sed_l: int = 3
    sed_f: int = 2
    tau: int = 1000
    frames: int = 1000
    min_errors: int = 200
    seed: int = 0
    threads: int = 1
    block: int = 32
    eps: float | None = None  # solver tolerance on R and D

    def validate(self) -> "SimConfig":
        def bad(msg):
            raise ConfigError(msg)
        if self.frames < 1:
            bad("frames must be at least 1")
        if not self.grid:
            bad("grid must not be empty")
        if self.channel not in CHANNELS:
            bad(f"channel must be one of {CHANNELS}")
        if self.scheme not in SCHEMES:
            bad(f"scheme must be one of {SCHEMES}")
        if self.codebook not in CODEBOOKS:
            bad(f"codebook must be one of {CODEBOOKS}")
        if self.approach not in ("rd", "rde"):
            bad("approach must be rd or rde")
        if not 1 <= self.k < self.n:
            bad("need 1 <= k < n")
        if self.ell < 1:
            bad("ell must be positive")
        if self.rate < 0:
            bad("rate must be nonnegative")
        if self.min_errors < 1:
            bad("min_errors must be positive")
        if self.threads < 1 or self.block < 1:
            bad("threads and block must be positive")
        if self.codebook == "algorithm_b" and self.tau < 1:
            bad("algorithm_b needs tau >= 1")
        if self.codebook == "file" and not self.codebook_file:
            bad("codebook=file needs codebook_file")
        if self.scheme == "asd" and self.mu is None:
            bad("asd needs mu")
        if isinstance(self.a, str) and self.a != "heuristic":
            bad("a must be an integer or 'heuristic'")
        if self.codebook in ("gmd", "sed") and self.scheme != "mbm":
            bad("gmd/sed codebooks are erase/keep patterns for scheme mbm")
        if self.scheme == "bit_asd" and self.codebook not in ("algorithm_a", "algorithm_b",
                                                              "singleton", "file"):
            bad("bit_asd supports random, singleton or file codebooks")
        if self.channel == "msc":
            for p in self.grid:
                if not 0 < p <= 1:
                    bad("m-SC grid values are probabilities in (0, 1]")
        return self

    @property
    def grid_name(self) -> str:
        return "p" if self.channel == "msc" else "snr_db"

    @property
    def fer_name(self) -> str:
        return "p_e_oracle" if self.scheme in ("asd", "bit_asd") else "fer"

    @classmethod
    def from_mapping(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(data)
        if "grid" in d:
            g = d["grid"]
            d["grid"] = tuple(float(v) for v in (g if isinstance(g, (list, tuple)) else [g]))
        if d.get("types") is not None:
            d["types"] = tuple(tuple(int(m) for m in t) for t in d["types"])
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# designs ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Design:
    """Reproduction distribution rows in the order of the profile used."""

    spec: pat.DistortionSpec
    q: np.ndarray | None
    exponent: float | None = None
    distortion: float | None = None
    rd_fallback: bool = False


def make_code(cfg: SimConfig) -> RSCode:
    return RSCode.create(cfg.n, cfg.k, eta=cfg.eta)


def make_spec(cfg: SimConfig, code: RSCode, a: int | None = None) -> pat.DistortionSpec:
    with warnings.catch_warnings():
        if cfg.relaxed:
            warnings.simplefilter("ignore")
        return pat.build_spec(cfg.scheme, code, ell=cfg.ell, mu=cfg.mu,
                              a=a if a is not None else (cfg.a if isinstance(cfg.a, int) else None),
                              types=cfg.types, relaxed=cfg.relaxed)


def solver_params(cfg: SimConfig) -> SolverParams:
    return SolverParams(eps_r=cfg.eps, eps_d=cfg.eps)


def design(P: SourceDist | np.ndarray, cfg: SimConfig, code: RSCode) -> Design:
    """Test-channel input distribution for the configured approach.

    For the exponent approach a target below the RD curve has exponent zero;
    the RD solution at the design rate is used then.
    """
    params = solver_params(cfg)
    rate = cfg.design_rate if cfg.design_rate is not None else cfg.rate
    if cfg.scheme == "asd" and cfg.a == "heuristic":
        res = cbm.heuristic_a(P, code, cfg.mu, cfg.ell, rate, cfg.types, params, cfg.relaxed)
        return Design(make_spec(cfg, code, res.a), res.q, rd_fallback=res.used_rd_fallback)
    spec = make_spec(cfg, code)
    if cfg.approach == "rd":
        d, q, _ = rd_at_rate(P, spec, rate, params)
        return Design(spec, q, distortion=d)
    d_target = cfg.d_target if cfg.d_target is not None else spec.threshold
    try:
        pt = rde_at(P, spec, rate, d_target, params)
    except InfeasibleError:
        d, q, _ = rd_at_rate(P, spec, rate, params)
        return Design(spec, q, exponent=0.0, distortion=d, rd_fallback=True)
    return Design(spec, pt.q, exponent=pt.f, distortion=pt.d)


# one frame --------------------------------------------------------------------

@dataclass(frozen=True)
class FrameOutcome:
    success: bool
    codeword: np.ndarray | None
    candidates: int
    min_distortion: float
    oracle_success: bool


def _ml_select(rel: ReliabilityMatrix, words: np.ndarray):
    """Distinct candidates and the most likely one (first occurrence on ties)."""
    uniq = []
    rest = words
    while rest.shape[0]:
        first = rest[0]
        uniq.append(first)
        rest = rest[np.any(rest != first, axis=1)]
    if not uniq:
        return 0, None
    cols = np.arange(rel.n)
    ll = [np.log(np.maximum(rel.pi[w, cols], 1e-300)).sum() for w in uniq]
    # copy so the outcome does not pin the whole candidate array
    return len(uniq), uniq[int(np.argmax(ll))].copy()


def _symbol_bits_correct(rel: ReliabilityMatrix, transmitted) -> np.ndarray:
    return extract_error_pattern(rel, transmitted, scheme="bit")


def _bit_asd_oracle(xbits: np.ndarray, patterns: np.ndarray, eta: int, k: int) -> np.ndarray:
    """Score/cost oracle for bit-level patterns (0 = erase bit, 1 = keep)."""
    B = patterns.shape[0]
    er = (patterns == 0).reshape(B, -1, eta)
    wrong = (xbits == 0).reshape(1, -1, eta)
    ne = er.sum(axis=2)
    kept_wrong = (wrong & ~er).any(axis=2)
    score = np.where(kept_wrong, 0, np.where(ne == 0, 2, np.where(ne == 1, 1, 0))).sum(axis=1)
    cost2 = np.where(ne == 0, 6, np.where(ne == 1, 4, 0)).sum(axis=1)
    a = np.where(score > 0, -(-score // (k - 1)) - 1, 0)
    return (score > 0) & ((a + 1) * (2 * score - a * (k - 1)) > cost2)


def decode_frame(code: RSCode, rel: ReliabilityMatrix, transmitted, patterns: np.ndarray,
                 spec: pat.DistortionSpec) -> FrameOutcome:
    """Run every pattern of a codebook on one received frame and select by ML.

    mBM schemes decode each trial with errors-and-erasures BM. ASD schemes
    judge each multiplicity assignment by the score/cost condition against
    the transmitted codeword, so the candidate list is the transmitted
    codeword or nothing.
    """
    c = np.asarray(transmitted, dtype=np.int64)
    patterns = np.ascontiguousarray(patterns, dtype=np.int64)
    if spec.scheme == "bit_asd":
        x = _symbol_bits_correct(rel, c)
        dist = pat.distortion_batch(x, patterns, spec)
        ok = _bit_asd_oracle(x, patterns, rel.eta, code.k)
        hit = bool(ok.any())
        return FrameOutcome(hit, c if hit else None, int(hit), float(dist.min()), hit)
    x = extract_error_pattern(rel, c, scheme="top", ell=spec.ell)
    dist = pat.distortion_batch(x, patterns, spec)
    if spec.scheme == "asd":
        ok = pat.asd_success_batch(x, patterns, spec.types, code.k)
        hit = bool(ok.any())
        return FrameOutcome(hit, c if hit else None, int(hit), float(dist.min()), hit)
    cands = rel.candidates(spec.ell)
    out = np.empty((patterns.shape[0], code.n), dtype=np.int64)
    ok = np.empty(patterns.shape[0], dtype=np.bool_)
    _kernels.decode_patterns(cands, patterns, *code.kernel_args(), out, ok)
    count, best = _ml_select(rel, out[ok])
    success = best is not None and bool(np.array_equal(best, c))
    oracle = bool(np.any(dist < spec.threshold - 1e-9))
    return FrameOutcome(success, best, count, float(dist.min()), oracle)


# campaign ---------------------------------------------------------------------

@dataclass
class GridResult:
    param: float
    frames: int
    errors: int
    ci_lo: float
    ci_hi: float
    min_dist_mean: float
    oracle_failures: int
    ml_misses: int
    list_mean: float
    list_max: int
    wall_time: float = 0.0
    exponent: float | None = None
    design_distortion: float | None = None

    @property
    def fer(self) -> float:
        return self.errors / self.frames


@dataclass
class SimResult:
    config: SimConfig
    points: list[GridResult] = field(default_factory=list)

    def header(self) -> list[str]:
        return [self.config.grid_name, "frames", "errors", self.config.fer_name, "ci_lo",
                "ci_hi", "min_dist_mean", "oracle_failures", "ml_misses", "list_mean",
                "list_max"]

    def rows(self) -> list[list[str]]:
        out = []
        for g in self.points:
            out.append([f"{g.param:.9g}", str(g.frames), str(g.errors), f"{g.fer:.9g}",
                        f"{g.ci_lo:.9g}", f"{g.ci_hi:.9g}", f"{g.min_dist_mean:.9g}",
                        str(g.oracle_failures), str(g.ml_misses), f"{g.list_mean:.9g}",
                        str(g.list_max)])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.rows())
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def wilson(errors: int, frames: int) -> tuple[float, float]:
    ci = binomtest(errors, frames).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _frame_rng(seed: int, g: int, phase: int, f: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([seed, g, phase, f])
    chan, cb = ss.spawn(2)
    return np.random.default_rng(chan), int(cb.generate_state(1, dtype=np.uint64)[0])


class _Campaign:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg.validate()
        self.code = make_code(cfg)
        self.eta = self.code.field.eta
        self._designs: dict[bytes, Design] = {}
        self.file_cb = cbm.load_codebook(cfg.codebook_file) if cfg.codebook == "file" else None

    def transmit(self, param: float, g: int, phase: int, f: int):
        rng, cb_seed = _frame_rng(self.cfg.seed, g, phase, f)
        msg = rng.integers(0, self.code.field.size, self.code.k)
        c = rs_encode(self.code, msg)
        if self.cfg.channel == "msc":
            rel = simulate_msc(self.code, c, param, rng)
        else:
            mod = "bpsk" if self.cfg.channel == "awgn_bpsk" else "mqam"
            rel = simulate_awgn(self.code, c, mod, param, rng, snr_type=self.cfg.snr_type)
        return c, rel, cb_seed

    def source(self, rel: ReliabilityMatrix) -> SourceDist:
        kind = "bit" if self.cfg.scheme == "bit_asd" else "top"
        return source_dist(rel, kind, self.cfg.ell, order="reliability")

    def bit_sigma(self, rel: ReliabilityMatrix) -> np.ndarray:
        p1 = rel.bit_marginals()
        return np.argsort(np.maximum(p1, 1.0 - p1), kind="stable")

    def sigma(self, rel: ReliabilityMatrix) -> np.ndarray:
        return self.bit_sigma(rel) if self.cfg.scheme == "bit_asd" else rel.sigma

    def cached_design(self, P: SourceDist) -> Design:
        key = np.ascontiguousarray(P.p).tobytes()
        d = self._designs.get(key)
        if d is None:
            d = design(P, self.cfg, self.code)
            self._designs[key] = d
        return d

    def train(self, param: float, g: int) -> Design:
        """Average the sorted reliabilities over ``tau`` frames and design once."""
        acc = ProfileAccumulator()
        bits = []
        for f in range(self.cfg.tau):
            _, rel, _ = self.transmit(param, g, 1, f)
            if self.cfg.scheme == "bit_asd":
                bits.append(self.source(rel).p)
            else:
                acc.add(rel)
        if self.cfg.scheme == "bit_asd":
            P = SourceDist(np.mean(bits, axis=0), "bit", 1)
        else:
            P = source_dist(acc.result(), "top", self.cfg.ell)
        return design(P, self.cfg, self.code)

    def base_spec(self) -> pat.DistortionSpec:
        a = self.cfg.a if isinstance(self.cfg.a, int) else None
        return make_spec(self.cfg, self.code, a)

    def frame(self, param: float, g: int, f: int,
              shared: Design | None) -> tuple[FrameOutcome, Design]:
        cfg = self.cfg
        c, rel, cb_seed = self.transmit(param, g, 0, f)
        sig = self.sigma(rel)
        d = shared
        if cfg.codebook == "algorithm_a":
            d = self.cached_design(self.source(rel))
            spec = d.spec
            pats = cbm.gen_random(d.q, cfg.rate, cb_seed, spec.rep_letters, sig).patterns
        elif cfg.codebook == "algorithm_b":
            spec = shared.spec
            pats = cbm.gen_random(shared.q, cfg.rate, cb_seed, spec.rep_letters, sig).patterns
        else:
            spec = shared.spec
            if cfg.codebook == "gmd":
                pats = cbm.gmd_codebook(cfg.n, self.code.d_min, sig).patterns
            elif cfg.codebook == "sed":
                pats = cbm.sed_codebook(cfg.n, cfg.sed_l, cfg.sed_f, sig).patterns
            elif cfg.codebook == "singleton":
                letter = 1 if spec.rep_letters[0] == 0 else spec.rep_letters[0]
                pats = np.full((1, len(sig)), letter, dtype=np.int64)
            else:
                pats = self.file_cb.patterns
                if pats.shape[1] != len(sig):
                    raise ConfigError("codebook file length does not match the code")
                out = np.empty_like(pats)
                out[:, sig] = pats
                pats = out
        return decode_frame(self.code, rel, c, pats, spec), d

    def run_point(self, param: float, g: int) -> GridResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        if cfg.codebook == "algorithm_b":
            shared = self.train(param, g)
        elif cfg.codebook == "algorithm_a":
            shared = None
        else:
            shared = Design(self.base_spec(), None)
        outcomes: list[FrameOutcome] = []
        used: list[Design] = []
        errors = 0
        stop_at = None
        pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
        try:
            start = 0
            while start < cfg.frames and stop_at is None:
                wave = min(cfg.block * cfg.threads, cfg.frames - start)
                idx = range(start, start + wave)
                if pool is None:
                    res = [self.frame(param, g, f, shared) for f in idx]
                else:
                    res = list(pool.map(lambda f: self.frame(param, g, f, shared), idx))
                for o, d in res:
                    outcomes.append(o)
                    used.append(d)
                    errors += not o.success
                    if errors >= cfg.min_errors:
                        stop_at = len(outcomes)
                        break
                start += wave
        finally:
            if pool is not None:
                pool.shutdown()
        n = len(outcomes)
        lo, hi = wilson(errors, n)
        oracle_fail = sum(not o.oracle_success for o in outcomes)
        ml_miss = sum(o.oracle_success and not o.success for o in outcomes)
        lists = [o.candidates for o in outcomes]
        # designs made per frame profile are summarized by their mean
        exps = [d.exponent for d in used if d.exponent is not None]
        dists = [d.distortion for d in used if d.distortion is not None]
        exponent = float(np.mean(exps)) if exps else None
        dd = float(np.mean(dists)) if dists else None
        return GridResult(param, n, errors, lo, hi,
                          float(np.mean([o.min_distortion for o in outcomes])),
                          oracle_fail, ml_miss, float(np.mean(lists)), int(max(lists)),
                          time.perf_counter() - t0, exponent, dd)


def fer_campaign(cfg: SimConfig) -> SimResult:
    """Run every grid point; results are deterministic given ``cfg.seed``."""
    camp = _Campaign(cfg)
    res = SimResult(cfg)
    for g, param in enumerate(cfg.grid):
        res.points.append(camp.run_point(float(param), g))
    return res
