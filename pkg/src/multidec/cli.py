"""Command-line entry point: ``multidec <command> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import codebook as cbm
from . import patterns as pat
from . import rd_closed as rc
from .channel import (ProfileAccumulator, SourceDist, load_profile, simulate_awgn, simulate_msc,
                      source_dist)
from .errors import BracketError, InfeasibleError
from .rd_numeric import SolverParams, rd_at_rate, rde_at, sample_curve
from .rs import RSCode, rs_encode

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# argument helpers -----------------------------------------------------------

def _code(text: str) -> RSCode:
    try:
        n, k = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--code expects N,K, got {text!r}") from None
    return RSCode.create(n, k)


def _floats(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop included)."""
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise UsageError(f"range {text!r} must be start:stop:step with step > 0")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


_SCHEME_RE = re.compile(r"^(mbm|errors_only|eo|asd|bit_asd|basd)(\d*)$")


def _scheme(name: str, ell: int | None, mu: int | None) -> dict:
    """``mbm2`` means mbm with ell=2, ``asd3`` means asd with mu=3."""
    m = _SCHEME_RE.match(name)
    if not m:
        raise UsageError(f"unknown scheme {name!r}")
    base, num = m.group(1), m.group(2)
    base = {"eo": "errors_only", "basd": "bit_asd"}.get(base, base)
    out = {"scheme": base, "ell": ell or 1, "mu": mu}
    if num:
        if base == "asd":
            out["mu"] = int(num)
        elif base != "bit_asd":
            out["ell"] = int(num)
    if base == "asd":
        if out["mu"] is None:
            raise UsageError("asd needs --mu or a name like asd2")
        out["ell"] = ell or out["mu"]
    return out


def _spec(args, code) -> pat.DistortionSpec:
    s = _scheme(args.scheme, args.ell, args.mu)
    return pat.build_spec(s["scheme"], code, ell=s["ell"], mu=s["mu"], a=args.a)


def _msc_top(p: float, m: int, n: int, ell: int) -> np.ndarray:
    other = (1.0 - p) / (m - 1)
    row = [p] + [other] * (ell - 1)
    row = [1.0 - sum(row)] + row
    return np.tile(row, (n, 1))


def build_profile(text: str, code: RSCode, spec: pat.DistortionSpec, tau: int,
                  seed: int) -> SourceDist:
    """``msc:p``, ``awgn_bpsk:snr`` / ``awgn_mqam:snr`` (averaged over ``tau``
    simulated frames, positions in reliability order) or a profile CSV path."""
    kind, _, val = text.partition(":")
    bit = spec.scheme == "bit_asd"
    ell = 1 if bit else spec.ell
    if kind == "msc" and not bit:
        return SourceDist(_msc_top(float(val), code.field.size, code.n, ell), "top", ell)
    if kind in ("msc", "awgn", "awgn_bpsk", "awgn_mqam"):
        if not val:
            raise UsageError(f"profile {text!r} needs a parameter")
        param = float(val)
        rng = np.random.default_rng([seed, 7])
        acc = ProfileAccumulator()
        bits = []
        for _ in range(tau):
            c = rs_encode(code, rng.integers(0, code.field.size, code.k))
            if kind == "msc":
                rel = simulate_msc(code, c, param, rng)
            else:
                mod = "mqam" if kind == "awgn_mqam" else "bpsk"
                rel = simulate_awgn(code, c, mod, param, rng)
            if bit:
                bits.append(source_dist(rel, "bit", order="reliability").p)
            else:
                acc.add(rel)
        if bit:
            return SourceDist(np.mean(bits, axis=0), "bit", 1)
        return source_dist(acc.result(), "top", ell)
    path = Path(text[5:] if text.startswith("file:") else text)
    if not path.exists():
        raise UsageError(f"profile {text!r} is neither a channel spec nor a file")
    probs, first = load_profile(path)
    if first == 0:
        return SourceDist(probs, "bit" if bit else "top", ell)
    top = np.clip(probs[:, :ell], 0.0, 1.0)
    return SourceDist(np.column_stack([np.clip(1.0 - top.sum(axis=1), 0.0, 1.0), top]),
                      "top", ell)


def _params(args) -> SolverParams:
    return SolverParams(eps_r=args.eps, eps_d=args.eps)


# output ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def _emit(args, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _figure_path(args) -> Path | None:
    if not args.figure:
        return None
    if isinstance(args.figure, str):
        return Path(args.figure)
    base = Path(args.out) if args.out else Path(f"{args.command}.csv")
    return base.with_suffix(".png")


# commands -------------------------------------------------------------------

def cmd_rd(args) -> int:
    code = _code(args.code)
    spec = _spec(args, code)
    P = build_profile(args.profile, code, spec, args.tau, args.seed)
    rows = []
    for r in _floats(args.rate):
        d, _, _ = rd_at_rate(P, spec, r, _params(args))
        rows.append((r, d))
    _emit(args, ["rate", "distortion"], rows)
    fig = _figure_path(args)
    if fig:
        from .plotting import plot_rd
        plot_rd([r for r, _ in rows], [d for _, d in rows], fig, args.scheme)
    return EXIT_OK


def cmd_rde(args) -> int:
    code = _code(args.code)
    spec = _spec(args, code)
    P = build_profile(args.profile, code, spec, args.tau, args.seed)
    params = _params(args)
    if args.s is not None or args.t is not None:
        if args.s is None or args.t is None:
            raise UsageError("surface mode needs both --s and --t")
        points = sample_curve(P, spec, _floats(args.s), _floats(args.t), params)
    else:
        points = []
        ds = _floats(args.distortion) if args.distortion else [spec.threshold]
        for r in _floats(args.rate):
            for d in ds:
                try:
                    points.append(rde_at(P, spec, r, d, params))
                except InfeasibleError:
                    # below the RD curve: no large deviation needed
                    from .rd_numeric import RDEPoint
                    d_rd, q, t = rd_at_rate(P, spec, r, params)
                    points.append(RDEPoint(0.0, r, d_rd, 0.0, t, q))
    _emit(args, ["s", "t", "F", "R", "D"], [(p.s, p.t, p.f, p.r, p.d) for p in points])
    fig = _figure_path(args)
    if fig:
        from .plotting import plot_rde
        plot_rde(points, fig, args.scheme)
    return EXIT_OK


def cmd_closed(args) -> int:
    kind = args.kind
    if kind in ("msc-F", "msc-R"):
        if args.p is None or args.code is None:
            raise UsageError(f"{kind} needs --p and --code")
        n, k = (int(v) for v in args.code.split(","))
        if kind == "msc-F":
            rows = [(args.p, r, rc.rde_msc_F(args.p, n, k, r)) for r in _floats(args.rate)]
            _emit(args, ["p", "R", "F"], rows)
        else:
            rows = [(args.p, f, rc.rde_msc_R(args.p, n, k, f)) for f in _floats(args.exponent)]
            _emit(args, ["p", "F", "R"], rows)
        return EXIT_OK
    code = _code(args.code)
    if kind == "mbm1":
        args.scheme = "mbm1"
    elif kind == "basd":
        args.scheme = "bit_asd"
    spec = _spec(args, code)
    P = build_profile(args.profile, code, spec, args.tau, args.seed)
    ds = _floats(args.distortion) if args.distortion else [spec.threshold]
    rows = []
    if kind == "rate0":
        for d in ds:
            res = rc.rde_rate0(P, spec, d)
            rows.append((d, res.f, res.alpha))
        _emit(args, ["D", "F", "alpha"], rows)
        return EXIT_OK
    for d in ds:
        if kind == "mbm1":
            res = rc.rd_mbm1_closed(P.p[:, 1], d)
        else:
            res = rc.rd_basd_closed(P.p[:, 1], d)
        rows.append((d, res.r_total, res.level))
    _emit(args, ["distortion", "rate", "level"], rows)
    return EXIT_OK


TABLE_CELLS = [((255, 191), 2), ((255, 191), 3), ((255, 127), 2), ((255, 127), 3),
               ((255, 191), 12), ((255, 127), 12)]


def cmd_tables(args) -> int:
    if args.code:
        n, k = (int(v) for v in args.code.split(","))
        mus = [int(v) for v in args.mu.split(",")] if args.mu else [2, 3]
        cells = [((n, k), mu) for mu in mus]
    else:
        cells = TABLE_CELLS
    rows = []
    for nk, mu in cells:
        (lo, hi), (blo, bhi) = cbm.a_ranges(nk, mu)
        rows.append((f"{nk[0]},{nk[1]}", mu, lo, hi, blo, bhi))
    if args.out:
        _emit(args, ["code", "mu", "a_min", "a_max", "best_min", "best_max"], rows)
    for code, mu, lo, hi, blo, bhi in rows:
        if len(rows) > 1:
            print(f"RS({code}) mu={mu}")
        print(f"possible: {lo}..{hi}")
        print(f"best: {blo}..{bhi}")
    return EXIT_OK


def _cover(text: str) -> cbm.CoveringCode:
    if text == "hamming74":
        return cbm.hamming74()
    if text == "golay23":
        return cbm.golay23()
    if text.startswith("file:"):
        return cbm.covering_from_file(text[5:])
    raise UsageError(f"unknown covering code {text!r}")


def cmd_codebook(args) -> int:
    code = _code(args.code)
    spec = _spec(args, code)
    kind = args.kind
    if kind == "gmd":
        cb = cbm.gmd_codebook(code.n, code.d_min)
    elif kind == "sed":
        cb = cbm.sed_codebook(code.n, args.sed_l, args.sed_f)
    elif kind == "singleton":
        letter = 1 if spec.rep_letters[0] == 0 else spec.rep_letters[0]
        cb = cbm.singleton(np.full(code.n, letter))
    else:
        if not args.profile:
            raise UsageError(f"{kind} codebooks need --profile")
        P = build_profile(args.profile, code, spec, args.tau, args.seed)
        rate = float(args.rate)
        params = _params(args)
        if kind == "random":
            if args.approach == "rde":
                try:
                    q = rde_at(P, spec, rate, spec.threshold, params).q
                except InfeasibleError:
                    q = rd_at_rate(P, spec, rate, params)[1]
            else:
                q = rd_at_rate(P, spec, rate, params)[1]
            cb = cbm.gen_random(q, rate, args.seed, spec.rep_letters)
        elif kind == "hybrid":
            cover = _cover(args.cover)
            tail = SourceDist(P.p[cover.n_c:], P.kind, P.ell)
            cover_rate = cover.k_c * np.log2(cover.q)
            q = rd_at_rate(tail, spec, max(rate - cover_rate, 0.0), params)[1]
            offset = 0 if spec.rep_letters[0] == 0 else 1
            cb = cbm.gen_hybrid(cover, q, rate, np.arange(code.n), args.seed,
                                spec.rep_letters, offset=offset)
        else:
            raise UsageError(f"unknown codebook kind {kind!r}")
    if args.out:
        cbm.save_codebook(args.out, cb)
    else:
        sys.stdout.write(cbm.format_codebook(cb))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .config import build_config
    from .harness import fer_campaign
    extra = {"seed": args.seed, "threads": args.threads, "frames": args.frames,
             "min_errors": args.min_errors}
    if args.grid:
        extra["grid"] = _floats(args.grid)
    cfg = build_config(args.config, args.set or (), **extra)
    res = fer_campaign(cfg)
    text = res.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    fig = _figure_path(args)
    if fig:
        from .plotting import plot_fer
        plot_fer(res, fig)
    return EXIT_OK


# parser ---------------------------------------------------------------------

def _add_globals(p, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="master seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for simulate")
    p.add_argument("--out", default=d(None), help="write CSV here instead of stdout")
    p.add_argument("--config", default=d(None), help="TOML configuration file")
    p.add_argument("--figure", nargs="?", const=True, default=d(None),
                   help="also save a figure (default: next to --out, .png)")


def _add_source(p) -> None:
    p.add_argument("--code", default="255,239", help="N,K")
    p.add_argument("--scheme", default="mbm1", help="mbm<ell>, errors_only<ell>, asd<mu>, bit_asd")
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--a", type=int, default=None, help="ASD design parameter (default mu)")
    p.add_argument("--profile", default=None,
                   help="msc:p, awgn_bpsk:snr, awgn_mqam:snr or a profile CSV")
    p.add_argument("--tau", type=int, default=1000, help="training frames for awgn profiles")
    p.add_argument("--eps", type=float, default=None, help="solver tolerance on R and D")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multidec", description="Multiple decoding attempts for RS codes.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rd", help="rate-distortion curve")
    _add_globals(p, True)
    _add_source(p)
    p.add_argument("--rate", default="0:16:1", help="rates: list or start:stop:step")
    p.set_defaults(func=cmd_rd, need_profile=True)

    p = sub.add_parser("rde", help="rate-distortion exponent points or surface")
    _add_globals(p, True)
    _add_source(p)
    p.add_argument("--rate", default="11")
    p.add_argument("--distortion", default=None, help="targets (default: decoding threshold)")
    p.add_argument("--s", default=None, help="surface mode: s values")
    p.add_argument("--t", default=None, help="surface mode: t values")
    p.set_defaults(func=cmd_rde, need_profile=True)

    p = sub.add_parser("closed", help="closed-form evaluators")
    _add_globals(p, True)
    _add_source(p)
    p.add_argument("kind", choices=["msc-F", "msc-R", "mbm1", "basd", "rate0"])
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--rate", default="11")
    p.add_argument("--exponent", default="1")
    p.add_argument("--distortion", default=None)
    p.set_defaults(func=cmd_closed, need_profile=False)

    p = sub.add_parser("tables", help="ranges of the ASD design parameter a")
    _add_globals(p, True)
    p.add_argument("--code", default=None)
    p.add_argument("--mu", default=None)
    p.set_defaults(func=cmd_tables, need_profile=False)

    p = sub.add_parser("codebook", help="generate and save an erasure-pattern codebook")
    _add_globals(p, True)
    _add_source(p)
    p.add_argument("--kind", default="random",
                   choices=["random", "hybrid", "gmd", "sed", "singleton"])
    p.add_argument("--rate", default="11")
    p.add_argument("--approach", default="rd", choices=["rd", "rde"])
    p.add_argument("--cover", default="hamming74", help="hamming74, golay23 or file:path")
    p.add_argument("--sed-l", type=int, default=3)
    p.add_argument("--sed-f", type=int, default=2)
    p.set_defaults(func=cmd_codebook, need_profile=False)

    p = sub.add_parser("simulate", help="Monte-Carlo FER campaign")
    _add_globals(p, True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--min-errors", type=int, default=None)
    p.add_argument("--grid", default=None)
    p.set_defaults(func=cmd_simulate, need_profile=False)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "need_profile", False) and not args.profile:
            raise UsageError(f"{args.command} needs --profile")
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error for us
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except UsageError as exc:
        print(f"multidec: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, BracketError) as exc:
        print(f"multidec: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"multidec: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"multidec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
