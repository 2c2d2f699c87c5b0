"""
Differentiable primitives.

Each primitive computes its value with numpy, records a backward closure
on the active tape and returns a Tensor. In 'fixed' evaluation order,
products are evaluated one row at a time and reductions over rows are
strictly sequential; rows whose gradient is exactly zero then add exact
zeros, so extra independent rows never perturb a result.
"""
import logging
import math

import numpy as np

from .Tensor import Tensor, as_tensor, is_fixed_order, make_result
from .errors import ConfigurationError, DimensionError, InputError, MaskError
from .kinds import IGNORE

logger = logging.getLogger(__name__)

_GELU_C = math.sqrt(2.0 / math.pi)


def _row_sum(x):
    """
    Sum over axis 0; sequential in fixed order.
    """
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:], dtype=x.dtype)
    if is_fixed_order():
        return np.cumsum(x, axis=0)[-1]
    return x.sum(axis=0)


def _rowwise_matmul(a, b):
    # (m, k) @ (k, n), each output row from its own product
    return np.matmul(a[:, None, :], b)[:, 0, :]


def _outer_accumulate(a, g):
    """
    a.T @ g with rows accumulated in order; all-zero gradient rows are skipped.
    """
    out = np.zeros((a.shape[1], g.shape[1]), dtype=a.dtype)
    for row in range(a.shape[0]):
        if not g[row].any():
            continue
        out += a[row][:, None] * g[row][None, :]
    return out


def matmul(a, b):
    """
    Matrix product of 2-D tensors.

    @param a:   Tensor[m x k]
    @param b:   Tensor[k x n]

    @return Tensor[m x n]
    """
    if a.ndim != 2 or b.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError("matmul: cannot multiply %s by %s" % (a.shape, b.shape))
    fixed = is_fixed_order()
    av, bv = a.data, b.data
    out = _rowwise_matmul(av, bv) if fixed else av @ bv

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _rowwise_matmul(g, bv.T) if fixed else g @ bv.T
        if b.requires_grad:
            gb = _outer_accumulate(av, g) if fixed else av.T @ g
        return [ga, gb]

    return make_result('matmul', [a, b], out, backward)


def add(a, b):
    """
    Elementwise sum. b may also be a vector broadcast over a's last axis.
    """
    if a.data.shape != b.data.shape and not (b.ndim == 1 and a.data.shape[-1:] == b.data.shape):
        raise DimensionError("add: shapes %s and %s do not match" % (a.shape, b.shape))
    broadcast = a.data.shape != b.data.shape

    def backward(g):
        gb = g
        if broadcast and b.requires_grad:
            gb = _row_sum(g.reshape(-1, g.shape[-1]))
        return [g, gb]

    return make_result('add', [a, b], a.data + b.data, backward)


def scale(a, factor):
    """
    Multiply by a Python scalar.
    """
    factor = float(factor)

    def backward(g):
        return [g * np.asarray(factor, dtype=g.dtype)]

    return make_result('scale', [a], a.data * np.asarray(factor, dtype=a.data.dtype), backward)


def linear_combination(terms):
    """
    Weighted sum of scalar tensors.

    @param terms:   Sequence of (coefficient, scalar Tensor)

    @return scalar Tensor sum(coefficient * tensor)
    """
    coefs = [float(coef) for coef, _ in terms]
    tensors = [as_tensor(t) for _, t in terms]
    for t in tensors:
        if t.size != 1:
            raise DimensionError("linear_combination needs scalars, got shape %s" % (t.shape,))
    dtype = tensors[0].data.dtype
    total = np.zeros(1, dtype=dtype)
    for coef, t in zip(coefs, tensors):
        total = total + np.asarray(coef, dtype=dtype) * t.data.reshape(1)

    def backward(g):
        return [g.reshape(t.data.shape) * np.asarray(coef, dtype=g.dtype) for coef, t in zip(coefs, tensors)]

    return make_result('linear_combination', tensors, total, backward)


def reshape(a, shape):
    old_shape = a.data.shape

    def backward(g):
        return [g.reshape(old_shape)]

    return make_result('reshape', [a], a.data.reshape(shape), backward)


def transpose(a):
    if a.ndim != 2:
        raise DimensionError("transpose needs a 2-D tensor, got %s" % (a.shape,))

    def backward(g):
        return [np.ascontiguousarray(g.T)]

    return make_result('transpose', [a], np.ascontiguousarray(a.data.T), backward)


def embedding(table, ids):
    """
    Gather rows of table.

    @param table:   Tensor[rows x d]
    @param ids:     Integer array of any shape

    @return Tensor[ids.shape + (d,)]
    """
    ids = np.asarray(ids, dtype=np.int64)
    rows = table.data.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= rows):
        raise InputError("embedding: id out of range [0, %d)" % rows)

    def backward(g):
        gt = np.zeros_like(table.data)
        # add.at applies indices in order, unbuffered
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return [gt]

    return make_result('embedding', [table], table.data[ids], backward)


def take_rows(table, stop):
    """
    First `stop` rows of a 2-D tensor.
    """
    total = table.data.shape[0]

    def backward(g):
        gt = np.zeros((total,) + g.shape[1:], dtype=g.dtype)
        gt[:stop] = g
        return [gt]

    return make_result('take_rows', [table], table.data[:stop].copy(), backward)


def rms_norm(x, weight, eps=1e-6):
    """
    Root-mean-square normalisation over the last axis, times a gain vector.
    """
    if x.data.shape[-1:] != weight.data.shape:
        raise DimensionError("rms_norm: gain %s does not match %s" % (weight.shape, x.shape))
    xv, wv = x.data, weight.data
    rms = np.sqrt(np.mean(xv * xv, axis=-1, keepdims=True) + np.asarray(eps, dtype=xv.dtype))
    xhat = xv / rms

    def backward(g):
        gxhat = g * wv
        gx = (gxhat - xhat * np.mean(gxhat * xhat, axis=-1, keepdims=True)) / rms
        gw = _row_sum((g * xhat).reshape(-1, wv.shape[0]))
        return [gx, gw]

    return make_result('rms_norm', [x, weight], xhat * wv, backward)


def gelu(x):
    """
    GELU, tanh form.
    """
    xv = x.data
    c = np.asarray(_GELU_C, dtype=xv.dtype)
    inner = c * (xv + np.asarray(0.044715, dtype=xv.dtype) * xv ** 3)
    t = np.tanh(inner)
    out = np.asarray(0.5, dtype=xv.dtype) * xv * (1 + t)

    def backward(g):
        dinner = c * (1 + np.asarray(3 * 0.044715, dtype=xv.dtype) * xv * xv)
        local = 0.5 * (1 + t) + 0.5 * xv * (1 - t * t) * dinner
        return [g * local.astype(xv.dtype)]

    return make_result('gelu', [x], out, backward)


def rope_angles(position_ids, d_head, theta):
    """
    @return angles[..., d_head/2] = p * theta^(-2i/d_head), in float64
    """
    if d_head % 2:
        raise ConfigurationError("RoPE needs an even head dimension, got %d" % d_head)
    inv_freq = float(theta) ** (-np.arange(0, d_head, 2, dtype=np.float64) / d_head)
    return np.asarray(position_ids, dtype=np.float64)[..., None] * inv_freq


def rope_apply(x, position_ids, theta=10000.0):
    """
    Rotate each value pair (2i, 2i+1) by position_id * theta^(-2i/d_head).

    @param x:               Tensor[..., n, heads, d_head]
    @param position_ids:    Integer array [..., n]; custom per-token ids
    @param theta:           RoPE base

    @return rotated Tensor of the same shape
    """
    d_head = x.data.shape[-1]
    angles = rope_angles(position_ids, d_head, theta)
    if angles.shape[:-1] != x.data.shape[:-2]:
        raise DimensionError("rope_apply: position ids %s do not match %s" % (angles.shape[:-1], x.shape))
    dtype = x.data.dtype
    cos = np.cos(angles).astype(dtype)[..., None, :]
    sin = np.sin(angles).astype(dtype)[..., None, :]
    xe, xo = x.data[..., 0::2], x.data[..., 1::2]
    out = np.empty_like(x.data)
    out[..., 0::2] = xe * cos - xo * sin
    out[..., 1::2] = xe * sin + xo * cos

    def backward(g):
        ge, go = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(g)
        gx[..., 0::2] = ge * cos + go * sin
        gx[..., 1::2] = go * cos - ge * sin
        return [gx]

    return make_result('rope_apply', [x], out, backward)


def _check_attention_inputs(q, k, v, mask):
    if not (q.data.shape == k.data.shape == v.data.shape) or q.ndim < 3:
        raise DimensionError("masked_attention: q/k/v shapes %s %s %s" % (q.shape, k.shape, v.shape))
    n = q.data.shape[-3]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != q.data.shape[:-3] + (n, n):
        raise DimensionError("masked_attention: mask %s does not fit q %s" % (mask.shape, q.shape))
    empty = ~mask.any(axis=-1)
    if empty.any():
        where = np.argwhere(empty)[0]
        raise MaskError("masked_attention: row %s allows no column" % (tuple(int(i) for i in where),))
    return mask


def masked_attention(q, k, v, mask):
    """
    Scaled dot-product attention with a boolean allow-mask.

    Disallowed cells get zero weight exactly. In fixed order each row
    attends over the gathered allowed columns only.

    @param q, k, v:     Tensor[..., n, heads, d_head]
    @param mask:        bool[..., n, n]; mask[i, j] True if row i may attend column j

    @return Tensor[..., n, heads, d_head]
    """
    mask = _check_attention_inputs(q, k, v, mask)
    qv, kv, vv = q.data, k.data, v.data
    lead = qv.shape[:-3]
    n, heads, d_head = qv.shape[-3:]
    dtype = qv.dtype
    scale_factor = np.asarray(1.0 / math.sqrt(d_head), dtype=dtype)
    fixed = is_fixed_order()

    q3 = qv.reshape((-1, n, heads, d_head))
    k3 = kv.reshape((-1, n, heads, d_head))
    v3 = vv.reshape((-1, n, heads, d_head))
    m3 = mask.reshape((-1, n, n))
    batch = q3.shape[0]
    probs = np.zeros((batch, heads, n, n), dtype=dtype)
    out = np.empty_like(q3)

    if fixed:
        for b in range(batch):
            for i in range(n):
                cols = np.flatnonzero(m3[b, i])
                ksel = k3[b, cols].transpose(1, 0, 2)
                vsel = v3[b, cols].transpose(1, 0, 2)
                scores = np.matmul(ksel, q3[b, i][:, :, None])[:, :, 0] * scale_factor
                scores = scores - scores.max(axis=-1, keepdims=True)
                e = np.exp(scores)
                p = e / e.sum(axis=-1, keepdims=True)
                probs[b, :, i, cols] = p.T
                out[b, i] = np.matmul(p[:, None, :], vsel)[:, 0, :]
    else:
        qh = q3.transpose(0, 2, 1, 3)
        kh = k3.transpose(0, 2, 1, 3)
        vh = v3.transpose(0, 2, 1, 3)
        scores = np.matmul(qh, kh.transpose(0, 1, 3, 2)) * scale_factor
        scores = np.where(m3[:, None, :, :], scores, -np.inf)
        scores = scores - scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        probs = e / e.sum(axis=-1, keepdims=True)
        out = np.matmul(probs, vh).transpose(0, 2, 1, 3)

    def backward(g):
        g3 = g.reshape((-1, n, heads, d_head))
        gq = np.zeros_like(q3)
        gk = np.zeros_like(k3)
        gv = np.zeros_like(v3)
        if fixed:
            for b in range(batch):
                for i in range(n):
                    go = g3[b, i]
                    if not go.any():
                        continue
                    cols = np.flatnonzero(m3[b, i])
                    p = probs[b, :, i, cols].T
                    vsel = v3[b, cols].transpose(1, 0, 2)
                    ksel = k3[b, cols].transpose(1, 0, 2)
                    dp = np.matmul(vsel, go[:, :, None])[:, :, 0]
                    ds = p * (dp - (p * dp).sum(axis=-1, keepdims=True))
                    gq[b, i] = np.matmul(ds[:, None, :], ksel)[:, 0, :] * scale_factor
                    gk[b, cols] += (ds[:, :, None] * q3[b, i][:, None, :]).transpose(1, 0, 2) * scale_factor
                    gv[b, cols] += (p[:, :, None] * go[:, None, :]).transpose(1, 0, 2)
        else:
            gh = g3.transpose(0, 2, 1, 3)
            qh = q3.transpose(0, 2, 1, 3)
            kh = k3.transpose(0, 2, 1, 3)
            vh = v3.transpose(0, 2, 1, 3)
            dp = np.matmul(gh, vh.transpose(0, 1, 3, 2))
            ds = probs * (dp - (probs * dp).sum(axis=-1, keepdims=True))
            gq = (np.matmul(ds, kh) * scale_factor).transpose(0, 2, 1, 3)
            gk = (np.matmul(ds.transpose(0, 1, 3, 2), qh) * scale_factor).transpose(0, 2, 1, 3)
            gv = np.matmul(probs.transpose(0, 1, 3, 2), gh).transpose(0, 2, 1, 3)
        shape = lead + (n, heads, d_head)
        return [np.ascontiguousarray(gq).reshape(shape),
                np.ascontiguousarray(gk).reshape(shape),
                np.ascontiguousarray(gv).reshape(shape)]

    result = make_result('masked_attention', [q, k, v], np.ascontiguousarray(out).reshape(lead + (n, heads, d_head)), backward)
    result.attention_probs = probs.reshape(lead + (heads, n, n))
    return result


def softmax_cross_entropy(logits, targets, weights=None):
    """
    Weighted mean of -log softmax(logits)[target].

    Positions with target IGNORE or weight 0 contribute nothing to value
    or gradient. When every position is excluded the result is 0 with a
    zero gradient.

    @param logits:      Tensor[n x V]
    @param targets:     Integer array [n]; ids in [0, V) or IGNORE
    @param weights:     Non-negative array [n] (default all ones)

    @return 1-element Tensor
    """
    if logits.ndim != 2:
        raise DimensionError("softmax_cross_entropy needs 2-D logits, got %s" % (logits.shape,))
    n, vocab = logits.data.shape
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != n:
        raise DimensionError("softmax_cross_entropy: %d targets for %d rows" % (targets.shape[0], n))
    dtype = logits.data.dtype
    weights = np.ones(n, dtype=dtype) if weights is None else np.asarray(weights, dtype=dtype).reshape(-1)
    if (weights < 0).any():
        raise InputError("softmax_cross_entropy: negative weight")
    active = (targets != IGNORE) & (weights > 0)
    rows = np.flatnonzero(active)
    if rows.size and (targets[rows].min() < 0 or targets[rows].max() >= vocab):
        raise InputError("softmax_cross_entropy: target id out of range [0, %d)" % vocab)
    if rows.size == 0:
        return make_result('softmax_cross_entropy', [logits], np.zeros(1, dtype=dtype),
                           lambda g: [np.zeros_like(logits.data)])

    sel = logits.data[rows]
    shifted = sel - sel.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logsumexp
    tgt = targets[rows]
    w = weights[rows]
    nll = -logp[np.arange(rows.size), tgt]
    if is_fixed_order():
        total_w = np.cumsum(w)[-1]
        value = np.cumsum(w * nll)[-1] / total_w
    else:
        total_w = w.sum()
        value = (w * nll).sum() / total_w

    def backward(g):
        grad_sel = np.exp(logp)
        grad_sel[np.arange(rows.size), tgt] -= 1
        grad_sel *= (w / total_w)[:, None] * g.reshape(())
        grad = np.zeros_like(logits.data)
        grad[rows] = grad_sel
        return [grad]

    return make_result('softmax_cross_entropy', [logits], np.asarray([value], dtype=dtype), backward)
