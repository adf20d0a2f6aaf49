"""Reed-Solomon codes in evaluation form and a hard-decision errors-and-erasures decoder."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .gf import FieldContext


class Status(Enum):
    CODEWORD = "Codeword"
    FAILURE = "Failure"


@dataclass(frozen=True)
class DecodeOutcome:
    status: Status
    codeword: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.CODEWORD


@dataclass(frozen=True, eq=False)
class RSCode:
    """An (n, k) RS code ``c_i = f(beta_i)`` with ``deg f < k``.

    Parity checks are ``sum_i v_i c_i beta_i^j = 0`` for ``j = 0 .. n-k-1``
    where ``v_i = 1 / prod_{l != i} (beta_i - beta_l)``. For the default
    points ``beta_i = alpha^i`` at full length this reduces to ``v_i = beta_i``.
    """

    n: int
    k: int
    field: FieldContext
    eval_points: np.ndarray
    blog: np.ndarray = field(repr=False)
    vlog: np.ndarray = field(repr=False)
    powlog: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, n: int, k: int, eta: int | None = None,
               ctx: FieldContext | None = None,
               eval_points: Sequence[int] | None = None) -> "RSCode":
        if ctx is None:
            if eta is None:
                eta = max(2, int(np.ceil(np.log2(n + 1))))
            ctx = FieldContext.create(eta)
        order = ctx.order
        if not 1 <= k < n <= order:
            raise ValueError(f"need 1 <= k < n <= {order}, got n={n}, k={k}")
        if eval_points is None:
            pts = np.array([ctx.alpha(i) for i in range(n)], dtype=np.int64)
        else:
            pts = np.asarray(eval_points, dtype=np.int64)
            if pts.shape != (n,):
                raise ValueError("need exactly n evaluation points")
            if np.any(pts <= 0) or np.any(pts >= ctx.size):
                raise ValueError("evaluation points must be nonzero field elements")
            if len(set(pts.tolist())) != n:
                raise ValueError("evaluation points must be distinct")
        blog = ctx.log[pts].astype(np.int64)
        vlog = np.empty(n, dtype=np.int64)
        for i in range(n):
            acc = 0
            for l in range(n):
                if l != i:
                    acc += ctx.log[int(pts[i]) ^ int(pts[l])]
            vlog[i] = (-acc) % order
        nsyn = n - k
        powlog = (vlog[:, None] + np.arange(nsyn)[None, :] * blog[:, None]) % order
        for a in (pts, blog, vlog, powlog):
            a.setflags(write=False)
        return cls(n, k, ctx, pts, blog, vlog, np.ascontiguousarray(powlog, dtype=np.int64))

    @property
    def d_min(self) -> int:
        return self.n - self.k + 1

    @property
    def nsyn(self) -> int:
        return self.n - self.k

    def syndromes(self, word: Sequence[int]) -> np.ndarray:
        w = np.ascontiguousarray(word, dtype=np.int64)
        out = np.zeros(self.nsyn, dtype=np.int64)
        _kernels.syndromes(w, self.powlog, self.field.exp, self.field.log, out)
        return out

    def is_codeword(self, word: Sequence[int]) -> bool:
        return not np.any(self.syndromes(word))

    def kernel_args(self) -> tuple:
        """Arguments shared by every compiled decode call."""
        f = self.field
        return (self.blog, self.vlog, self.powlog, f.exp, f.log, f.order)


def rs_encode(code: RSCode, message: Sequence[int]) -> np.ndarray:
    msg = np.ascontiguousarray(message, dtype=np.int64)
    if msg.shape != (code.k,):
        raise ValueError(f"message must have {code.k} symbols, got shape {msg.shape}")
    if np.any(msg < 0) or np.any(msg >= code.field.size):
        raise ValueError("message symbols outside the field")
    out = np.empty(code.n, dtype=np.int64)
    f = code.field
    _kernels.encode_eval(msg, code.blog, f.exp, f.log, f.order, out)
    return out


def bm_decode(code: RSCode, hd_symbols: Sequence[int],
              erasures: Iterable[int] = ()) -> DecodeOutcome:
    """Errors-and-erasures decoding of a hard-decision word."""
    word = np.array(hd_symbols, dtype=np.int64)
    if word.shape != (code.n,):
        raise ValueError(f"received word must have {code.n} symbols")
    if np.any(word < 0) or np.any(word >= code.field.size):
        raise ValueError("received symbols outside the field")
    erased = np.zeros(code.n, dtype=np.uint8)
    idx = np.fromiter(erasures, dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= code.n:
            raise ValueError("erasure index out of range")
        erased[idx] = 1
    if int(erased.sum()) >= code.d_min:
        return DecodeOutcome(Status.FAILURE)
    # the value at an erased position is irrelevant; zero it so the
    # syndromes only see unerased symbols plus errata
    word[erased.astype(bool)] = 0
    synd = code.syndromes(word)
    out = np.empty(code.n, dtype=np.int64)
    blog, vlog, powlog, exp, log, order = code.kernel_args()
    ok = _kernels.decode_core(word, erased, synd, blog, vlog, powlog, exp, log, order, out)
    if not ok:
        return DecodeOutcome(Status.FAILURE)
    return DecodeOutcome(Status.CODEWORD, out)
