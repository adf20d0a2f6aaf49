"""Compiled inner loops for Reed-Solomon encoding and errors-and-erasures decoding.

All arrays are int64. ``exp`` is the double-length antilog table of
:class:`multidec.gf.FieldContext`, ``log`` the discrete-log table. A code is
described by ``blog`` (discrete logs of the evaluation points), ``vlog``
(discrete logs of the dual column multipliers) and ``powlog[i, j] =
(vlog[i] + j * blog[i]) mod order`` so that syndrome ``j`` picks up
``exp[log r_i + powlog[i, j]]`` from position ``i``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _mul(a, b, exp, log):
    if a == 0 or b == 0:
        return 0
    return exp[log[a] + log[b]]


@njit(cache=True, nogil=True)
def _inv(a, exp, log, order):
    return exp[(order - log[a]) % order]


@njit(cache=True, nogil=True)
def encode_eval(msg, blog, exp, log, order, out):
    """``out[i] = f(beta_i)`` for the message polynomial with coefficients ``msg``."""
    n = blog.shape[0]
    k = msg.shape[0]
    for i in range(n):
        acc = 0
        for l in range(k - 1, -1, -1):
            # acc = acc * beta_i + msg[l]
            if acc != 0:
                acc = exp[(log[acc] + blog[i]) % order]
            acc ^= msg[l]
        out[i] = acc


@njit(cache=True, nogil=True)
def syndromes(word, powlog, exp, log, out):
    n, nsyn = powlog.shape
    for j in range(nsyn):
        out[j] = 0
    for i in range(n):
        r = word[i]
        if r != 0:
            lr = log[r]
            for j in range(nsyn):
                out[j] ^= exp[lr + powlog[i, j]]


@njit(cache=True, nogil=True)
def decode_core(word, erased, synd, blog, vlog, powlog, exp, log, order, out):
    """Errors-and-erasures decoding of ``word`` given its syndromes.

    Returns True and writes the codeword to ``out`` on success. Erasure
    positions are those with ``erased[i] != 0``; their entries in ``word``
    are ignored by the algebra (any value works).
    """
    n, nsyn = powlog.shape
    e = 0
    for i in range(n):
        if erased[i] != 0:
            e += 1
    if e > nsyn:
        return False

    allzero = True
    for j in range(nsyn):
        if synd[j] != 0:
            allzero = False
            break
    if allzero:
        for i in range(n):
            out[i] = word[i]
        return True

    size = nsyn + 2
    lam = np.zeros(size, dtype=np.int64)
    bpoly = np.zeros(size, dtype=np.int64)
    tmp = np.zeros(size, dtype=np.int64)
    lam[0] = 1
    # erasure locator: prod (1 + X_i x)
    deg = 0
    for i in range(n):
        if erased[i] != 0:
            xl = blog[i]
            for d in range(deg + 1, 0, -1):
                if lam[d - 1] != 0:
                    lam[d] ^= exp[log[lam[d - 1]] + xl]
            deg += 1
    for d in range(size):
        bpoly[d] = lam[d]

    big_l = e
    for r in range(e, nsyn):
        delta = 0
        top = r if r < size - 1 else size - 1
        for i in range(top + 1):
            if lam[i] != 0 and synd[r - i] != 0:
                delta ^= exp[log[lam[i]] + log[synd[r - i]]]
        if delta == 0:
            for d in range(size - 1, 0, -1):
                bpoly[d] = bpoly[d - 1]
            bpoly[0] = 0
            continue
        ld = log[delta]
        for d in range(size):
            tmp[d] = lam[d]
        for d in range(1, size):
            if bpoly[d - 1] != 0:
                tmp[d] ^= exp[ld + log[bpoly[d - 1]]]
        if 2 * big_l <= r + e:
            inv_ld = (order - ld) % order
            for d in range(size):
                if lam[d] != 0:
                    bpoly[d] = exp[log[lam[d]] + inv_ld]
                else:
                    bpoly[d] = 0
            big_l = r + 1 + e - big_l
        else:
            for d in range(size - 1, 0, -1):
                bpoly[d] = bpoly[d - 1]
            bpoly[0] = 0
        for d in range(size):
            lam[d] = tmp[d]

    deg = 0
    for d in range(size - 1, -1, -1):
        if lam[d] != 0:
            deg = d
            break
    if deg != big_l or 2 * big_l - e > nsyn:
        return False

    # Chien search over the evaluation points only
    roots = np.empty(deg, dtype=np.int64)
    count = 0
    for i in range(n):
        xinv = (order - blog[i]) % order
        val = lam[deg]
        for d in range(deg - 1, -1, -1):
            if val != 0:
                val = exp[log[val] + xinv]
            val ^= lam[d]
        if val == 0:
            roots[count] = i
            count += 1
            if count == deg:
                break
    if count != deg:
        return False

    omega = np.zeros(nsyn, dtype=np.int64)
    for k in range(nsyn):
        acc = 0
        top = k if k < deg else deg
        for i in range(top + 1):
            if lam[i] != 0 and synd[k - i] != 0:
                acc ^= exp[log[lam[i]] + log[synd[k - i]]]
        omega[k] = acc

    for i in range(n):
        out[i] = word[i]
    errv = np.zeros(deg, dtype=np.int64)
    for c in range(deg):
        i = roots[c]
        xinv = (order - blog[i]) % order
        num = 0
        for k in range(nsyn - 1, -1, -1):
            if num != 0:
                num = exp[log[num] + xinv]
            num ^= omega[k]
        den = 0
        # formal derivative: odd-degree coefficients shifted down
        for d in range(1, deg + 1, 2):
            if lam[d] != 0:
                den ^= exp[log[lam[d]] + ((d - 1) * xinv) % order]
        if den == 0:
            return False
        if num == 0:
            errv[c] = 0
            continue
        # Y' = X * num / den, error value = Y' / v
        lg = (blog[i] + log[num] - log[den] - vlog[i]) % order
        if lg < 0:
            lg += order
        errv[c] = exp[lg]
        out[i] = word[i] ^ errv[c]

    # the errata must reproduce the received syndromes exactly
    for j in range(nsyn):
        acc = 0
        for c in range(deg):
            if errv[c] != 0:
                acc ^= exp[log[errv[c]] + powlog[roots[c], j]]
        if acc != synd[j]:
            return False
    return True


@njit(cache=True, nogil=True)
def decode_patterns(cands, patterns, blog, vlog, powlog, exp, log, order, out, ok):
    """Decode one received frame under every erasure pattern in ``patterns``.

    ``cands[j, i]`` is the (j+1)-th most likely symbol at position ``i``.
    Pattern letter 0 erases a position, letter ``k >= 1`` uses ``cands[k-1]``.
    """
    n, nsyn = powlog.shape
    base = np.zeros(nsyn, dtype=np.int64)
    syndromes(cands[0], powlog, exp, log, base)
    synd = np.empty(nsyn, dtype=np.int64)
    word = np.empty(n, dtype=np.int64)
    erased = np.zeros(n, dtype=np.uint8)
    for b in range(patterns.shape[0]):
        for j in range(nsyn):
            synd[j] = base[j]
        e = 0
        for i in range(n):
            letter = patterns[b, i]
            word[i] = cands[0, i]
            if letter == 0:
                erased[i] = 1
                e += 1
            else:
                erased[i] = 0
                if letter >= 2:
                    sym = cands[letter - 1, i]
                    diff = sym ^ cands[0, i]
                    if diff != 0:
                        word[i] = sym
                        ld = log[diff]
                        for j in range(nsyn):
                            synd[j] ^= exp[ld + powlog[i, j]]
        if e > nsyn:
            ok[b] = False
            continue
        ok[b] = decode_core(word, erased, synd, blog, vlog, powlog, exp, log, order, out[b])
