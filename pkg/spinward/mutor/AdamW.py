"""
AdamW with bias correction, plus global-norm gradient clipping.
"""
import logging
import math

import numpy as np

from .errors import CheckpointError, NonFiniteGradientError

logger = logging.getLogger(__name__)


def init_state(params):
    """
    @param params:  dict name -> Tensor

    @return fresh optimizer state: step count and zero moment buffers
    """
    return {
        'step': 0,
        'm': dict((name, np.zeros_like(p.data)) for name, p in params.items()),
        'v': dict((name, np.zeros_like(p.data)) for name, p in params.items()),
    }


def check_finite(grads):
    """
    @raise NonFiniteGradientError naming the first bad parameter and flat index
    """
    for name, grad in grads.items():
        if grad is None:
            continue
        finite = np.isfinite(grad)
        if not finite.all():
            raise NonFiniteGradientError(name, int(np.flatnonzero(~finite.reshape(-1))[0]))


def clip_grad_norm(grads, max_norm):
    """
    Scale gradients in place so their global L2 norm is at most max_norm.

    @return the norm before clipping
    """
    total = 0.0
    for name in sorted(grads):
        grad = grads[name]
        if grad is not None:
            total += float(np.dot(grad.reshape(-1).astype(np.float64), grad.reshape(-1).astype(np.float64)))
    norm = math.sqrt(total)
    if max_norm and norm > max_norm:
        factor = max_norm / (norm + 1e-6)
        for grad in grads.values():
            if grad is not None:
                grad *= np.asarray(factor, dtype=grad.dtype)
    return norm


def adamw_step(params, grads, state, lr, beta1=0.9, beta2=0.95, eps=1e-8, weight_decay=0.0):
    """
    One AdamW update, in place.

    Every gradient is checked before any parameter moves, so a
    non-finite gradient leaves params and state untouched.

    @param params:          dict name -> Tensor
    @param grads:           dict name -> gradient array (None or missing = zero)
    @param state:           dict from init_state(); updated in place
    @param lr:              Learning rate for this step
    @param beta1, beta2:    Moment decay rates
    @param eps:             Denominator term
    @param weight_decay:    Decoupled decay coefficient; 0 gives Adam

    @return state
    """
    check_finite(grads)
    step = state['step'] + 1
    bias1 = 1.0 - beta1 ** step
    bias2 = 1.0 - beta2 ** step
    for name in params:
        param = params[name]
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        dtype = param.data.dtype
        m = state['m'][name]
        v = state['v'][name]
        m *= dtype.type(beta1)
        m += dtype.type(1.0 - beta1) * grad
        v *= dtype.type(beta2)
        v += dtype.type(1.0 - beta2) * grad * grad
        if weight_decay:
            param.data *= dtype.type(1.0 - lr * weight_decay)
        m_hat = m / dtype.type(bias1)
        v_hat = v / dtype.type(bias2)
        param.data -= dtype.type(lr) * m_hat / (np.sqrt(v_hat) + dtype.type(eps))
    state['step'] = step
    return state


class AdamW(object):
    """
    Optimizer object around adamw_step, holding hyperparameters and state.
    """

    def __init__(self, params, beta1=0.9, beta2=0.95, eps=1e-8, weight_decay=0.0, grad_clip=0.0):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.state = init_state(params)


    def load_state(self, state):
        """
        Replace the moments and step count, e.g. from checkpoint.load_optimizer_state.

        @raise CheckpointError if a parameter's moments are missing or misshapen
        """
        loaded = {'step': int(state['step']), 'm': {}, 'v': {}}
        for kind in ('m', 'v'):
            for name, param in self.params.items():
                moment = state[kind].get(name)
                if moment is None or moment.shape != param.data.shape:
                    raise CheckpointError("Optimizer state has no %s moment of shape %s for %s"
                                          % (kind, tuple(param.data.shape), name))
                loaded[kind][name] = np.array(moment, dtype=param.data.dtype)
        self.state = loaded


    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()


    def step(self, lr):
        """
        Apply one update from the parameters' .grad buffers.

        @return gradient norm before clipping
        """
        grads = dict((name, p.grad) for name, p in self.params.items())
        check_finite(grads)
        norm = clip_grad_norm(grads, self.grad_clip) if self.grad_clip else None
        adamw_step(self.params, grads, self.state, lr, self.beta1, self.beta2, self.eps, self.weight_decay)
        return norm
