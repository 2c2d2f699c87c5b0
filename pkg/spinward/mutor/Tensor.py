"""
Dense tensors with a reverse-mode computation tape.

Operations (see tensor_ops) record themselves on the innermost active
ComputationTape; outside a tape they only compute values. Two
thread-local settings control arithmetic:

    precision(np.float64)      dtype of newly created tensors (float32 default)
    evaluation_order('fixed')  row-wise products and sequential row
                               reductions, so that appending rows that a
                               result does not depend on leaves it
                               bit-identical ('fast' uses plain BLAS)
"""
import collections
import contextlib
import logging
import threading

import numpy as np

from .errors import TapeError

logger = logging.getLogger(__name__)

ORDER_FAST = 'fast'
ORDER_FIXED = 'fixed'

_local = threading.local()


def _settings():
    if not hasattr(_local, 'dtype'):
        _local.dtype = np.float32
        _local.order = ORDER_FAST
        _local.tapes = []
    return _local


def get_dtype():
    return _settings().dtype


def get_evaluation_order():
    return _settings().order


def is_fixed_order():
    return _settings().order == ORDER_FIXED


@contextlib.contextmanager
def precision(dtype):
    """
    Create tensors with the given float dtype inside the block.
    """
    state = _settings()
    old = state.dtype
    state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        state.dtype = old


@contextlib.contextmanager
def evaluation_order(order):
    """
    Select 'fixed' or 'fast' arithmetic inside the block.
    """
    if order not in (ORDER_FAST, ORDER_FIXED):
        raise ValueError("Unknown evaluation order %r" % (order,))
    state = _settings()
    old = state.order
    state.order = order
    try:
        yield
    finally:
        state.order = old


def active_tape():
    """
    @return the innermost active ComputationTape, or None
    """
    tapes = _settings().tapes
    return tapes[-1] if tapes else None


class Tensor(object):
    """
    Dense row-major array plus an optional gradient buffer of the same shape.
    """

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=get_dtype())
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name


    @property
    def shape(self):
        return list(self.data.shape)


    @property
    def ndim(self):
        return self.data.ndim


    @property
    def size(self):
        return self.data.size


    def item(self):
        return float(self.data.reshape(-1)[0])


    def numpy(self):
        return self.data


    def zero_grad(self):
        self.grad = None


    def accumulate_grad(self, grad):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad


    def __repr__(self):
        label = " name=%r" % self.name if self.name else ""
        return "Tensor(shape=%s%s)" % (self.shape, label)


TapeRecord = collections.namedtuple('TapeRecord', 'op inputs output backward')


class ComputationTape(object):
    """
    Ordered record of executed primitives.

    Used as a context manager; backward() replays the records in exact
    reverse execution order and may be called once per reset().
    """

    def __init__(self):
        self.records = []
        self._consumed = False


    def __enter__(self):
        _settings().tapes.append(self)
        return self


    def __exit__(self, exc_type, exc_value, traceback):
        tapes = _settings().tapes
        if tapes and tapes[-1] is self:
            tapes.pop()
        return False


    def __len__(self):
        return len(self.records)


    def record(self, op, inputs, output, backward):
        """
        Append one primitive.

        @param op:          Primitive name
        @param inputs:      Input tensors
        @param output:      Output tensor
        @param backward:    Callable mapping the output gradient to a list
                            of input gradients (None for "no gradient")
        """
        if self._consumed:
            raise TapeError("Tape already consumed by backward(); call reset() first")
        self.records.append(TapeRecord(op, tuple(inputs), output, backward))


    def backward(self, loss):
        """
        Accumulate d(loss)/d(leaf) into the .grad of every leaf tensor
        with requires_grad set.

        @param loss:    Scalar tensor produced on this tape
        """
        if self._consumed:
            raise TapeError("backward() called twice without reset()")
        if loss.size != 1:
            raise TapeError("backward() needs a scalar, got shape %s" % (loss.shape,))
        self._consumed = True
        grads = {id(loss): np.ones_like(loss.data)}
        produced = set(id(rec.output) for rec in self.records)
        leaves = collections.OrderedDict()
        for rec in reversed(self.records):
            grad = grads.pop(id(rec.output), None)
            if grad is None:
                continue
            input_grads = rec.backward(grad)
            for tensor, input_grad in zip(rec.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + input_grad
                else:
                    grads[key] = input_grad
                if key not in produced:
                    leaves[key] = tensor
        for key, tensor in leaves.items():
            grad = grads.get(key)
            if grad is not None:
                tensor.accumulate_grad(grad)
        if id(loss) not in produced and loss.requires_grad:
            loss.accumulate_grad(np.ones_like(loss.data))


    def reset(self):
        self.records = []
        self._consumed = False


def make_result(op, inputs, data, backward):
    """
    Wrap a primitive's output and record it if any input needs a gradient
    and a tape is active.

    @return output Tensor
    """
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    tape = active_tape()
    out.requires_grad = needs_grad and tape is not None
    if out.requires_grad:
        tape.record(op, inputs, out, backward)
    return out


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
