"""Iterative decoding of the XOR codeword at the relay.

Two variants share the flooding schedule, decision rule, and syndrome-based
early stop:

* ``decode``: 4-ary probability-domain belief propagation.  Messages are
  probability vectors over the joint symbol (x_a, x_b); check nodes combine
  inputs with the XOR-group convolution, variable nodes multiply elementwise.
* ``decode_simplified``: binary-style propagation of the primary LLR
  ln((P0+P3)/(P1+P2)) alone - boxplus at check nodes, sums at variable nodes.

The per-message operations (``cn_update_q`` etc.) are the reference
implementations used by the tests; the per-codeword loops run as numba
kernels over CSR edge arrays.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from numba import njit

from .protocode import LiftedCode

LLR_CLAMP = 50.0
PROB_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# message-level operations (reference surface)
# ---------------------------------------------------------------------------

def quaternary_from_llrs(primary: float, rho1: float, rho2: float) -> np.ndarray:
    """Probability 4-vector from (primary, secondary1, secondary2) LLRs."""
    p03 = 1.0 / (1.0 + np.exp(-primary))
    a0 = 1.0 / (1.0 + np.exp(-rho1))
    a1 = 1.0 / (1.0 + np.exp(-rho2))
    return np.array([p03 * a0, (1 - p03) * a1, (1 - p03) * (1 - a1), p03 * (1 - a0)])


def llrs_from_quaternary(p: np.ndarray):
    """(primary, secondary1, secondary2) LLRs of a probability 4-vector."""
    p = np.asarray(p, dtype=np.float64)
    return (
        float(np.log((p[0] + p[3]) / (p[1] + p[2]))),
        float(np.log(p[0] / p[3])),
        float(np.log(p[1] / p[2])),
    )


def primary_llr(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(np.log((p[0] + p[3]) / (p[1] + p[2])))


def _conv_pair(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """XOR-group convolution of two 4-ary messages."""
    return np.array([
        p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] + p[3] * q[2],
        p[0] * q[2] + p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] + p[2] * q[1] + p[3] * q[0],
    ])


def cn_update_q(inputs) -> np.ndarray:
    """Check-node output message: left fold of the group convolution."""
    if len(inputs) == 0:
        raise ValueError("check-node update needs at least one input message")
    out = np.asarray(inputs[0], dtype=np.float64).copy()
    for msg in inputs[1:]:
        out = _conv_pair(out, np.asarray(msg, dtype=np.float64))
    return out / out.sum()


def vn_update_q(channel, inputs) -> np.ndarray:
    """Variable-node output: elementwise product of channel and input messages.

    An all-zero product is reset to uniform (degenerate numerically dead
    message); callers needing diagnostics count via the returned flag on the
    codeword-level path.
    """
    out = np.asarray(channel, dtype=np.float64).copy()
    for msg in inputs:
        out = out * np.asarray(msg, dtype=np.float64)
    total = out.sum()
    if total <= 0.0:
        return np.full(4, 0.25)
    return out / total


def boxplus(a: float, b: float) -> float:
    """ln((1 + e^(a+b)) / (e^a + e^b)), stabilized.

    +inf acts as the identity; 0 is absorbing.
    """
    if np.isinf(a) and np.isinf(b):
        return float(min(a, b)) if (a > 0 and b > 0) else -float(min(abs(a), abs(b)))
    sign = np.sign(a) * np.sign(b)
    mag = min(abs(a), abs(b))
    corr = np.log1p(np.exp(-abs(a + b))) - np.log1p(np.exp(-abs(a - b)))
    return float(sign * mag + corr)


def cn_update_llr(inputs) -> float:
    """Left boxplus fold of primary LLRs."""
    if len(inputs) == 0:
        raise ValueError("check-node update needs at least one input LLR")
    out = float(inputs[0])
    for v in inputs[1:]:
        out = boxplus(out, float(v))
    return out


def vn_update_llr(l_g: float, inputs) -> float:
    """Channel LLR plus all input primary LLRs (secondaries held at zero)."""
    return float(l_g) + float(sum(inputs))


@dataclass
class DecodeResult:
    xor_estimate: np.ndarray
    converged: bool
    iterations_used: int
    per_iteration_error_counts: np.ndarray | None = None


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bp4_kernel(cn_ptr, cn_edges, vn_ptr, vn_edges, edge_vn, gmsg, t_max,
                ref_bits, track_errors):
    n_cn = cn_ptr.shape[0] - 1
    n_vn = vn_ptr.shape[0] - 1
    n_edges = edge_vn.shape[0]
    v2c = np.empty((n_edges, 4))
    c2v = np.empty((n_edges, 4))
    bits = np.zeros(n_vn, dtype=np.uint8)
    err_counts = np.full(t_max, -1, dtype=np.int64)

    max_deg = 0
    for c in range(n_cn):
        d = cn_ptr[c + 1] - cn_ptr[c]
        if d > max_deg:
            max_deg = d
    for v in range(n_vn):
        d = vn_ptr[v + 1] - vn_ptr[v]
        if d > max_deg:
            max_deg = d
    pre = np.empty((max_deg + 1, 4))
    suf = np.empty((max_deg + 1, 4))

    for v in range(n_vn):
        for ii in range(vn_ptr[v], vn_ptr[v + 1]):
            e = vn_edges[ii]
            for x in range(4):
                v2c[e, x] = gmsg[v, x]

    iterations = 0
    converged = False
    for t in range(t_max):
        iterations = t + 1
        # check-node update: leave-one-out group convolution via prefix/suffix
        for c in range(n_cn):
            lo, hi = cn_ptr[c], cn_ptr[c + 1]
            d = hi - lo
            pre[0, 0] = 1.0
            pre[0, 1] = 0.0
            pre[0, 2] = 0.0
            pre[0, 3] = 0.0
            for i in range(d):
                e = cn_edges[lo + i]
                a0, a1, a2, a3 = pre[i, 0], pre[i, 1], pre[i, 2], pre[i, 3]
                b0, b1, b2, b3 = v2c[e, 0], v2c[e, 1], v2c[e, 2], v2c[e, 3]
                pre[i + 1, 0] = a0 * b0 + a1 * b1 + a2 * b2 + a3 * b3
                pre[i + 1, 1] = a0 * b1 + a1 * b0 + a2 * b3 + a3 * b2
                pre[i + 1, 2] = a0 * b2 + a1 * b3 + a2 * b0 + a3 * b1
                pre[i + 1, 3] = a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0
            suf[d, 0] = 1.0
            suf[d, 1] = 0.0
            suf[d, 2] = 0.0
            suf[d, 3] = 0.0
            for i in range(d - 1, -1, -1):
                e = cn_edges[lo + i]
                a0, a1, a2, a3 = suf[i + 1, 0], suf[i + 1, 1], suf[i + 1, 2], suf[i + 1, 3]
                b0, b1, b2, b3 = v2c[e, 0], v2c[e, 1], v2c[e, 2], v2c[e, 3]
                suf[i, 0] = a0 * b0 + a1 * b1 + a2 * b2 + a3 * b3
                suf[i, 1] = a0 * b1 + a1 * b0 + a2 * b3 + a3 * b2
                suf[i, 2] = a0 * b2 + a1 * b3 + a2 * b0 + a3 * b1
                suf[i, 3] = a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0
            for i in range(d):
                e = cn_edges[lo + i]
                a0, a1, a2, a3 = pre[i, 0], pre[i, 1], pre[i, 2], pre[i, 3]
                b0, b1, b2, b3 = suf[i + 1, 0], suf[i + 1, 1], suf[i + 1, 2], suf[i + 1, 3]
                u0 = a0 * b0 + a1 * b1 + a2 * b2 + a3 * b3
                u1 = a0 * b1 + a1 * b0 + a2 * b3 + a3 * b2
                u2 = a0 * b2 + a1 * b3 + a2 * b0 + a3 * b1
                u3 = a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0
                tot = u0 + u1 + u2 + u3
                if tot <= 0.0:
                    c2v[e, 0] = 0.25
                    c2v[e, 1] = 0.25
                    c2v[e, 2] = 0.25
                    c2v[e, 3] = 0.25
                else:
                    c2v[e, 0] = u0 / tot
                    c2v[e, 1] = u1 / tot
                    c2v[e, 2] = u2 / tot
                    c2v[e, 3] = u3 / tot

        # variable-node update + decision, leave-one-out elementwise product
        for v in range(n_vn):
            lo, hi = vn_ptr[v], vn_ptr[v + 1]
            d = hi - lo
            for x in range(4):
                pre[0, x] = gmsg[v, x]
            for i in range(d):
                e = vn_edges[lo + i]
                for x in range(4):
                    val = pre[i, x] * c2v[e, x]
                    pre[i + 1, x] = val if val > PROB_FLOOR else PROB_FLOOR
            for x in range(4):
                suf[d, x] = 1.0
            for i in range(d - 1, -1, -1):
                e = vn_edges[lo + i]
                for x in range(4):
                    val = suf[i + 1, x] * c2v[e, x]
                    suf[i, x] = val if val > PROB_FLOOR else PROB_FLOOR
            for i in range(d):
                e = vn_edges[lo + i]
                tot = 0.0
                for x in range(4):
                    val = pre[i, x] * suf[i + 1, x]
                    v2c[e, x] = val if val > PROB_FLOOR else PROB_FLOOR
                    tot += v2c[e, x]
                for x in range(4):
                    v2c[e, x] /= tot
            app0 = pre[d, 0] + pre[d, 3]
            app1 = pre[d, 1] + pre[d, 2]
            bits[v] = 1 if app1 > app0 else 0

        if track_errors:
            errs = 0
            for v in range(n_vn):
                if bits[v] != ref_bits[v]:
                    errs += 1
            err_counts[t] = errs

        # syndrome
        ok = True
        for c in range(n_cn):
            acc = 0
            for ii in range(cn_ptr[c], cn_ptr[c + 1]):
                acc ^= bits[edge_vn[cn_edges[ii]]]
            if acc != 0:
                ok = False
                break
        if ok:
            converged = True
            break
    return bits, converged, iterations, err_counts


@njit(cache=True)
def _boxplus_scalar(a, b):
    if a == np.inf:
        return b
    if b == np.inf:
        return a
    sign = 1.0
    if (a < 0.0) != (b < 0.0):
        sign = -1.0
    if a == 0.0 or b == 0.0:
        sign = 0.0
    mag = min(abs(a), abs(b))
    return sign * mag + np.log1p(np.exp(-abs(a + b))) - np.log1p(np.exp(-abs(a - b)))


@njit(cache=True)
def _bp_llr_kernel(cn_ptr, cn_edges, vn_ptr, vn_edges, edge_vn, llr, t_max,
                   ref_bits, track_errors):
    n_cn = cn_ptr.shape[0] - 1
    n_vn = vn_ptr.shape[0] - 1
    n_edges = edge_vn.shape[0]
    v2c = np.empty(n_edges)
    c2v = np.empty(n_edges)
    bits = np.zeros(n_vn, dtype=np.uint8)
    err_counts = np.full(t_max, -1, dtype=np.int64)

    max_deg = 0
    for c in range(n_cn):
        d = cn_ptr[c + 1] - cn_ptr[c]
        if d > max_deg:
            max_deg = d
    pre = np.empty(max_deg + 1)
    suf = np.empty(max_deg + 1)

    for v in range(n_vn):
        for ii in range(vn_ptr[v], vn_ptr[v + 1]):
            v2c[vn_edges[ii]] = llr[v]

    iterations = 0
    converged = False
    for t in range(t_max):
        iterations = t + 1
        for c in range(n_cn):
            lo, hi = cn_ptr[c], cn_ptr[c + 1]
            d = hi - lo
            pre[0] = np.inf
            for i in range(d):
                pre[i + 1] = _boxplus_scalar(pre[i], v2c[cn_edges[lo + i]])
            suf[d] = np.inf
            for i in range(d - 1, -1, -1):
                suf[i] = _boxplus_scalar(suf[i + 1], v2c[cn_edges[lo + i]])
            for i in range(d):
                c2v[cn_edges[lo + i]] = _boxplus_scalar(pre[i], suf[i + 1])

        for v in range(n_vn):
            lo, hi = vn_ptr[v], vn_ptr[v + 1]
            tot = llr[v]
            for ii in range(lo, hi):
                tot += c2v[vn_edges[ii]]
            for ii in range(lo, hi):
                e = vn_edges[ii]
                out = tot - c2v[e]
                if out > LLR_CLAMP:
                    out = LLR_CLAMP
                elif out < -LLR_CLAMP:
                    out = -LLR_CLAMP
                v2c[e] = out
            bits[v] = 1 if tot < 0.0 else 0

        if track_errors:
            errs = 0
            for v in range(n_vn):
                if bits[v] != ref_bits[v]:
                    errs += 1
            err_counts[t] = errs

        ok = True
        for c in range(n_cn):
            acc = 0
            for ii in range(cn_ptr[c], cn_ptr[c + 1]):
                acc ^= bits[edge_vn[cn_edges[ii]]]
            if acc != 0:
                ok = False
                break
        if ok:
            converged = True
            break
    return bits, converged, iterations, err_counts


class _Graph:
    """CSR adjacency of a lifted code, built once per code object."""

    __slots__ = ("cn_ptr", "cn_edges", "vn_ptr", "vn_edges", "edge_vn")

    def __init__(self, code: LiftedCode):
        order_c = np.argsort(code.edge_cn, kind="stable").astype(np.int64)
        order_v = np.argsort(code.edge_vn, kind="stable").astype(np.int64)
        self.cn_edges = order_c
        self.vn_edges = order_v
        self.cn_ptr = np.zeros(code.num_checks + 1, dtype=np.int64)
        np.add.at(self.cn_ptr, code.edge_cn + 1, 1)
        self.cn_ptr = np.cumsum(self.cn_ptr)
        self.vn_ptr = np.zeros(code.n + 1, dtype=np.int64)
        np.add.at(self.vn_ptr, code.edge_vn + 1, 1)
        self.vn_ptr = np.cumsum(self.vn_ptr)
        self.edge_vn = code.edge_vn.astype(np.int64)


_GRAPH_CACHE: "weakref.WeakKeyDictionary[LiftedCode, _Graph]" = weakref.WeakKeyDictionary()


def _graph(code: LiftedCode) -> _Graph:
    g = _GRAPH_CACHE.get(code)
    if g is None:
        g = _Graph(code)
        _GRAPH_CACHE[code] = g
    return g


def decode(code: LiftedCode, channel_msgs: np.ndarray, t_max: int,
           reference: np.ndarray | None = None) -> DecodeResult:
    """4-ary belief-propagation decode of the XOR codeword.

    ``channel_msgs``: (n, 4) normalized symbol likelihoods (uniform rows at
    punctured positions).  Stops early on a zero syndrome.  Pass ``reference``
    (the true XOR codeword) to record per-iteration error counts.
    """
    if channel_msgs.shape != (code.n, 4):
        raise ValueError(f"channel messages must have shape ({code.n}, 4)")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    g = _graph(code)
    track = reference is not None
    ref = (np.asarray(reference, dtype=np.uint8)
           if track else np.zeros(0, dtype=np.uint8))
    gmsg = np.ascontiguousarray(channel_msgs, dtype=np.float64)
    bits, converged, iters, errs = _bp4_kernel(
        g.cn_ptr, g.cn_edges, g.vn_ptr, g.vn_edges, g.edge_vn, gmsg,
        t_max, ref, track,
    )
    return DecodeResult(
        xor_estimate=bits,
        converged=bool(converged),
        iterations_used=int(iters),
        per_iteration_error_counts=errs[:iters].copy() if track else None,
    )


def decode_simplified(code: LiftedCode, l_g: np.ndarray, t_max: int,
                      reference: np.ndarray | None = None) -> DecodeResult:
    """Primary-LLR belief-propagation decode (boxplus / sum updates)."""
    if l_g.shape != (code.n,):
        raise ValueError(f"channel LLRs must have shape ({code.n},)")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    g = _graph(code)
    track = reference is not None
    ref = (np.asarray(reference, dtype=np.uint8)
           if track else np.zeros(0, dtype=np.uint8))
    llr = np.clip(np.asarray(l_g, dtype=np.float64), -LLR_CLAMP, LLR_CLAMP)
    bits, converged, iters, errs = _bp_llr_kernel(
        g.cn_ptr, g.cn_edges, g.vn_ptr, g.vn_edges, g.edge_vn, llr,
        t_max, ref, track,
    )
    return DecodeResult(
        xor_estimate=bits,
        converged=bool(converged),
        iterations_used=int(iters),
        per_iteration_error_counts=errs[:iters].copy() if track else None,
    )
