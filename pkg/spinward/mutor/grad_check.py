"""
Finite-difference gradient oracle.
"""
import logging

import numpy as np

from .Tensor import ComputationTape, precision

logger = logging.getLogger(__name__)


def grad_check(f, params, h=1e-5, max_coords=None, seed=0):
    """
    Compare tape gradients of a scalar graph against central differences.

    The check runs in float64: parameter buffers are promoted for the
    duration of the call and restored afterwards.

    @param f:           Callable with no arguments building the graph from
                        `params` and returning a scalar Tensor
    @param params:      dict name -> Tensor (leaves with requires_grad)
    @param h:           Finite-difference step
    @param max_coords:  If set, check at most this many randomly chosen
                        coordinates per parameter
    @param seed:        Seed for choosing coordinates

    @return max over checked coordinates of
            |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    """
    rng = np.random.default_rng(seed)
    saved = dict((name, p.data) for name, p in params.items())
    worst = 0.0
    try:
        with precision(np.float64):
            for name, p in params.items():
                p.data = saved[name].astype(np.float64)
                p.grad = None
            with ComputationTape() as tape:
                loss = f()
            tape.backward(loss)
            analytic = dict((name, p.grad if p.grad is not None else np.zeros_like(p.data))
                            for name, p in params.items())

            for name, p in params.items():
                flat = p.data.reshape(-1)
                coords = np.arange(flat.size)
                if max_coords is not None and flat.size > max_coords:
                    coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
                grad_flat = analytic[name].reshape(-1)
                for j in coords:
                    original = flat[j]
                    flat[j] = original + h
                    f_plus = float(f().data.reshape(-1)[0])
                    flat[j] = original - h
                    f_minus = float(f().data.reshape(-1)[0])
                    flat[j] = original
                    numeric = (f_plus - f_minus) / (2.0 * h)
                    exact = float(grad_flat[j])
                    err = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
                    if err > worst:
                        worst = err
                        logger.debug("grad_check %s[%d]: analytic %.6g numeric %.6g", name, j, exact, numeric)
    finally:
        for name, p in params.items():
            p.data = saved[name]
            p.grad = None
    return worst
