"""
Scalar reductions for building test losses on the tape.
"""
import numpy as np

from spinward.mutor.Tensor import Tensor, is_fixed_order, make_result


def mul(a, b):
    av, bv = a.data, b.data

    def backward(g):
        return [g * bv, g * av]

    return make_result('mul', [a, b], av * bv, backward)


def sum_all(a):
    flat = a.data.reshape(-1)
    total = np.cumsum(flat)[-1:] if (is_fixed_order() and flat.size) else np.asarray([flat.sum()], dtype=flat.dtype)

    def backward(g):
        return [np.broadcast_to(g.reshape(()), a.data.shape).copy()]

    return make_result('sum_all', [a], total.reshape(1), backward)


def weighted_sum(out, weights):
    """Scalar that weights every output element differently."""
    return sum_all(mul(out, Tensor(weights)))
