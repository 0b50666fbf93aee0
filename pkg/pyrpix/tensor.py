"""
Minimal dense tensors with reverse-mode automatic differentiation.

Every operation returns a new :py:class:`Tensor`. When a :py:class:`Tape` is active in the current
thread and at least one input requires gradient, the operation is recorded on that tape together
with a closure computing gradients of its inputs. :py:func:`backward` then walks the tape in exact
reverse recording order, accumulating gradients.

.. code-block:: python

   w = parameter(np.ones(3), name='w')

   with Tape() as tape:
       loss = sum_all(w * w)
       backward(loss)

   print(w.grad)

Layout of image tensors is NCHW. Data is ``float32`` unless :py:func:`precision` says otherwise, which
is how the gradient checks run in ``float64``.

Broadcasting is limited to python scalars and to the bias of :py:func:`conv2d`; everything else
needs operands of identical shape.
"""

import contextlib
import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ShapeError, TensorError

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Callable, Iterator, List, Optional, Sequence, Tuple, Union  # noqa


BackwardType = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

ScalarType = Union[int, float, np.floating]


_state = threading.local()


def default_dtype():
    # type: () -> np.dtype

    return np.dtype(getattr(_state, 'dtype', np.float32))


@contextlib.contextmanager
def precision(dtype):
    # type: (Any) -> Iterator[None]
    """
    Within the block, new tensors and parameters default to ``dtype``. Thread-local.
    """

    previous = default_dtype()
    _state.dtype = np.dtype(dtype)

    try:
        yield

    finally:
        _state.dtype = previous


def debug_enabled():
    # type: () -> bool

    return bool(getattr(_state, 'debug', False))


def set_debug(enabled):
    # type: (bool) -> None
    """
    In debug mode, :py:func:`log` refuses non-positive inputs instead of producing ``nan``/``-inf``.
    """

    _state.debug = enabled


class Tensor(object):
    """
    N-dimensional array taking part in gradient recording.

    :param data: array-like content. Converted to ``dtype``, or to the current default dtype.
    :param bool requires_grad: leaves with this flag receive gradients in :py:func:`backward`.
    :param str name: optional name, used by parameters.

    :ivar numpy.ndarray data: contiguous content.
    :ivar numpy.ndarray grad: accumulated gradient of a leaf, same shape as ``data``, or ``None``.
    :ivar Node node: the operation which produced this tensor, ``None`` for leaves and detached tensors.
    """

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        # type: (Any, bool, Optional[str], Optional[Any]) -> None

        self.data = np.ascontiguousarray(np.asarray(data, dtype=dtype or default_dtype()))
        self.grad = None  # type: Optional[np.ndarray]
        self.requires_grad = requires_grad
        self.name = name
        self.node = None  # type: Optional[Node]

    def __repr__(self):
        # type: () -> str

        return '<Tensor{} shape={} dtype={}{}>'.format(
            ' {}'.format(self.name) if self.name else '',
            self.shape,
            self.dtype,
            ' grad' if self.requires_grad else ''
        )

    @property
    def shape(self):
        # type: () -> Tuple[int, ...]

        return cast(Tuple[int, ...], self.data.shape)

    @property
    def ndim(self):
        # type: () -> int

        return int(self.data.ndim)

    @property
    def size(self):
        # type: () -> int

        return int(self.data.size)

    @property
    def dtype(self):
        # type: () -> np.dtype

        return self.data.dtype

    def item(self):
        # type: () -> float

        if self.size != 1:
            raise ShapeError('item() needs a single-element tensor, got shape {}'.format(self.shape), axis='size')

        return float(self.data.reshape(()))

    def numpy(self):
        # type: () -> np.ndarray

        return self.data

    def detach(self):
        # type: () -> Tensor
        """
        Same data, no gradient, no link to any tape.
        """

        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        # type: () -> None

        self.grad = None

    def backward(self):
        # type: () -> None

        backward(self)

    def __add__(self, other):
        # type: (Union[Tensor, ScalarType]) -> Tensor

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        # type: (Union[Tensor, ScalarType]) -> Tensor

        return sub(self, other)

    def __rsub__(self, other):
        # type: (ScalarType) -> Tensor

        return add(neg(self), other)

    def __mul__(self, other):
        # type: (Union[Tensor, ScalarType]) -> Tensor

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        # type: () -> Tensor

        return neg(self)


def parameter(data, name=None):
    # type: (Any, Optional[str]) -> Tensor
    """
    Create a leaf tensor which receives gradients.
    """

    return Tensor(data, requires_grad=True, name=name)


def constant(data):
    # type: (Any) -> Tensor
    """
    Create a tensor which never receives gradient.
    """

    return Tensor(data)


class Node(object):
    # pylint: disable=too-few-public-methods
    """
    One recorded operation.

    :ivar Tensor output: tensor the operation produced.
    :ivar list parents: input tensors, in the order ``backward_fn`` returns their gradients.
    :ivar callable backward_fn: maps gradient of ``output`` to gradients of ``parents``.
    :ivar str op: operation name, for error messages.
    """

    def __init__(self, tape, output, parents, backward_fn, op):
        # type: (Tape, Tensor, Sequence[Tensor], BackwardType, str) -> None

        self.tape = tape
        self.output = output
        self.parents = list(parents)
        self.backward_fn = backward_fn
        self.op = op


class Tape(object):
    """
    Ordered record of operations. Use as a context manager to make it the active tape of
    the current thread; tapes nest, and :py:func:`no_grad` suspends recording.

    A tape supports a single :py:func:`backward`; call :py:meth:`reset` before recording again.
    """

    def __init__(self):
        # type: () -> None

        self.nodes = []  # type: List[Node]
        self.consumed = False

    def __len__(self):
        # type: () -> int

        return len(self.nodes)

    def __enter__(self):
        # type: () -> Tape

        _tape_stack().append(self)

        return self

    def __exit__(self, *args):
        # type: (*Any) -> None

        _tape_stack().pop()

    def record(self, node):
        # type: (Node) -> None

        if self.consumed:
            raise TensorError('Cannot record on a tape consumed by backward, reset it first')

        self.nodes.append(node)

    def reset(self):
        # type: () -> None

        for node in self.nodes:
            node.output.node = None

        self.nodes = []
        self.consumed = False

    def backward(self, loss):
        # type: (Tensor) -> None

        backward(loss)


def _tape_stack():
    # type: () -> List[Optional[Tape]]

    if not hasattr(_state, 'tapes'):
        _state.tapes = []

    return cast(List[Optional[Tape]], _state.tapes)


def current_tape():
    # type: () -> Optional[Tape]

    stack = _tape_stack()

    return stack[-1] if stack else None


@contextlib.contextmanager
def no_grad():
    # type: () -> Iterator[None]
    """
    Suspend recording in the current thread.
    """

    _tape_stack().append(None)

    try:
        yield

    finally:
        _tape_stack().pop()


def backward(loss):
    # type: (Tensor) -> None
    """
    Accumulate ``d loss / d leaf`` into ``grad`` of every leaf requiring gradient which ``loss`` depends on.

    :param Tensor loss: single-element tensor produced on an active tape.
    :raises TensorError: when ``loss`` is not scalar, is not connected to a tape, or its tape was
        already consumed by a previous call.
    """

    if loss.size != 1:
        raise TensorError('backward needs a scalar loss, got shape {}'.format(loss.shape))

    if loss.node is None:
        raise TensorError('backward needs a loss recorded on a tape, this one is detached')

    tape = loss.node.tape

    if tape.consumed:
        raise TensorError('tape was already consumed by backward, reset it before another pass')

    pending = {id(loss): np.ones_like(loss.data)}

    for node in reversed(tape.nodes):
        grad = pending.pop(id(node.output), None)

        if grad is None:
            continue

        parent_grads = node.backward_fn(grad)

        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue

            parent_grad = np.asarray(parent_grad, dtype=parent.data.dtype)

            if parent.node is None:
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)

                parent.grad += parent_grad

            elif id(parent) in pending:
                pending[id(parent)] += parent_grad

            else:
                pending[id(parent)] = np.array(parent_grad, copy=True)

    tape.consumed = True


def _record(data, parents, backward_fn, op):
    # type: (np.ndarray, Sequence[Tensor], BackwardType, str) -> Tensor

    out = Tensor(data, dtype=data.dtype)

    tape = current_tape()

    if tape is not None and any(parent.requires_grad for parent in parents):
        out.requires_grad = True
        out.node = Node(tape, out, parents, backward_fn, op)
        tape.record(out.node)

    return out


def _is_scalar(value):
    # type: (Any) -> bool

    return isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool)


def _check_same_shape(op, a, b):
    # type: (str, Tensor, Tensor) -> None

    if a.shape == b.shape:
        return

    if a.ndim != b.ndim:
        raise ShapeError('{}: rank {} does not match rank {}'.format(op, a.ndim, b.ndim), axis='rank')

    axis = next(i for i, (x, y) in enumerate(zip(a.shape, b.shape)) if x != y)

    raise ShapeError('{}: shapes {} and {} differ'.format(op, a.shape, b.shape), axis=str(axis))


def _normalize_axis(op, x, axis):
    # type: (str, Tensor, int) -> int

    if not -x.ndim <= axis < x.ndim:
        raise TensorError('{}: axis {} out of range for rank {}'.format(op, axis, x.ndim))

    return axis % x.ndim


#
# Elementwise
#

def add(a, b):
    # type: (Tensor, Union[Tensor, ScalarType]) -> Tensor

    if _is_scalar(b):
        return _record(a.data + b, [a], lambda g: (g,), 'add')

    b = cast(Tensor, b)
    _check_same_shape('add', a, b)

    return _record(a.data + b.data, [a, b], lambda g: (g, g), 'add')


def sub(a, b):
    # type: (Tensor, Union[Tensor, ScalarType]) -> Tensor

    if _is_scalar(b):
        return _record(a.data - b, [a], lambda g: (g,), 'sub')

    b = cast(Tensor, b)
    _check_same_shape('sub', a, b)

    return _record(a.data - b.data, [a, b], lambda g: (g, -g), 'sub')


def neg(x):
    # type: (Tensor) -> Tensor

    return _record(-x.data, [x], lambda g: (-g,), 'neg')


def mul(a, b):
    # type: (Tensor, Union[Tensor, ScalarType]) -> Tensor

    if _is_scalar(b):
        return _record(a.data * b, [a], lambda g: (g * b,), 'mul')

    b = cast(Tensor, b)
    _check_same_shape('mul', a, b)

    a_data, b_data = a.data, b.data

    return _record(a_data * b_data, [a, b], lambda g: (g * b_data, g * a_data), 'mul')


def exp(x):
    # type: (Tensor) -> Tensor

    y = np.exp(x.data)

    return _record(y, [x], lambda g: (g * y,), 'exp')


def log(x):
    # type: (Tensor) -> Tensor

    if debug_enabled() and np.any(x.data <= 0):
        raise TensorError('log: {} non-positive input values'.format(int(np.sum(x.data <= 0))))

    x_data = x.data

    with np.errstate(divide='ignore', invalid='ignore'):
        y = np.log(x_data)

    return _record(y, [x], lambda g: (g / x_data,), 'log')


def np_sigmoid(x):
    # type: (np.ndarray) -> np.ndarray
    """
    Overflow-free logistic function.
    """

    e = np.exp(-np.abs(x))

    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)


def sigmoid(x):
    # type: (Tensor) -> Tensor

    y = np_sigmoid(x.data)

    return _record(y, [x], lambda g: (g * y * (1 - y),), 'sigmoid')


def tanh(x):
    # type: (Tensor) -> Tensor

    y = np.tanh(x.data)

    return _record(y, [x], lambda g: (g * (1 - y * y),), 'tanh')


def softplus(x):
    # type: (Tensor) -> Tensor

    x_data = x.data
    y = np.logaddexp(0, x_data).astype(x_data.dtype, copy=False)

    return _record(y, [x], lambda g: (g * np_sigmoid(x_data),), 'softplus')


def clamp_min(x, floor):
    # type: (Tensor, float) -> Tensor
    """
    ``max(x, floor)``; values at or below the floor get no gradient.
    """

    above = x.data > floor

    return _record(np.maximum(x.data, floor).astype(x.dtype, copy=False), [x], lambda g: (g * above,), 'clamp_min')


def where(condition, a, b):
    # type: (np.ndarray, Tensor, Tensor) -> Tensor
    """
    Pick from ``a`` where the constant boolean ``condition`` holds, from ``b`` elsewhere.
    """

    _check_same_shape('where', a, b)

    condition = np.asarray(condition, dtype=bool)

    if condition.shape != a.shape:
        raise ShapeError('where: condition shape {} does not match {}'.format(condition.shape, a.shape), axis='condition')

    return _record(
        np.where(condition, a.data, b.data),
        [a, b],
        lambda g: (np.where(condition, g, 0), np.where(condition, 0, g)),
        'where'
    )


#
# Reductions
#

def sum_all(x):
    # type: (Tensor) -> Tensor
    """
    Sum of all elements, accumulated and returned in ``float64`` whatever the input dtype.
    """

    shape = x.shape
    total = np.asarray(np.sum(x.data, dtype=np.float64))

    return _record(total, [x], lambda g: (np.full(shape, g),), 'sum_all')


def sum_axis(x, axis):
    # type: (Tensor, int) -> Tensor

    axis = _normalize_axis('sum', x, axis)
    shape = x.shape

    return _record(
        np.sum(x.data, axis=axis),
        [x],
        lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape),),
        'sum'
    )


def np_logsumexp(x, axis):
    # type: (np.ndarray, int) -> np.ndarray

    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0)

    with np.errstate(divide='ignore'):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(x - m), axis=axis))


def np_softmax(x, axis):
    # type: (np.ndarray, int) -> np.ndarray

    e = np.exp(x - np.max(x, axis=axis, keepdims=True))

    return cast(np.ndarray, e / np.sum(e, axis=axis, keepdims=True))


def logsumexp(x, axis):
    # type: (Tensor, int) -> Tensor
    """
    ``log(sum(exp(x)))`` over ``axis``, stable for large inputs.
    """

    axis = _normalize_axis('logsumexp', x, axis)
    x_data = x.data

    y = np_logsumexp(x_data, axis)

    def _backward(g):
        # type: (np.ndarray) -> Tuple[np.ndarray]

        return (np.expand_dims(g, axis) * np_softmax(x_data, axis),)

    return _record(y, [x], _backward, 'logsumexp')


def softmax(x, axis):
    # type: (Tensor, int) -> Tensor

    axis = _normalize_axis('softmax', x, axis)

    y = np_softmax(x.data, axis)

    def _backward(g):
        # type: (np.ndarray) -> Tuple[np.ndarray]

        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _record(y, [x], _backward, 'softmax')


def log_softmax(x, axis):
    # type: (Tensor, int) -> Tensor

    axis = _normalize_axis('log_softmax', x, axis)
    x_data = x.data

    y = x_data - np.expand_dims(np_logsumexp(x_data, axis), axis)

    def _backward(g):
        # type: (np.ndarray) -> Tuple[np.ndarray]

        return (g - np_softmax(x_data, axis) * np.sum(g, axis=axis, keepdims=True),)

    return _record(y, [x], _backward, 'log_softmax')


#
# Shape manipulation
#

def reshape(x, shape):
    # type: (Tensor, Sequence[int]) -> Tensor

    original = x.shape

    try:
        y = x.data.reshape(tuple(shape))

    except ValueError as exc:
        raise ShapeError('reshape: cannot reshape {} to {}: {}'.format(original, tuple(shape), exc), axis='size')

    return _record(y, [x], lambda g: (g.reshape(original),), 'reshape')


def concat(tensors, axis):
    # type: (Sequence[Tensor], int) -> Tensor

    if not tensors:
        raise TensorError('concat: nothing to concatenate')

    axis = _normalize_axis('concat', tensors[0], axis)

    for other in tensors[1:]:
        if other.ndim != tensors[0].ndim:
            raise ShapeError('concat: rank {} does not match rank {}'.format(other.ndim, tensors[0].ndim), axis='rank')

        for i, (x, y) in enumerate(zip(tensors[0].shape, other.shape)):
            if i != axis and x != y:
                raise ShapeError('concat: shapes {} and {} differ'.format(tensors[0].shape, other.shape), axis=str(i))

    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    return _record(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: np.split(g, boundaries, axis=axis),
        'concat'
    )


def slice_axis(x, axis, start, stop):
    # type: (Tensor, int, int, int) -> Tensor
    """
    ``x[..., start:stop, ...]`` along ``axis``.
    """

    axis = _normalize_axis('slice', x, axis)

    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeError('slice: [{}:{}] out of bounds for extent {}'.format(start, stop, x.shape[axis]), axis=str(axis))

    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    region = tuple(index)

    shape, dtype = x.shape, x.dtype

    def _backward(g):
        # type: (np.ndarray) -> Tuple[np.ndarray]

        full = np.zeros(shape, dtype=dtype)
        full[region] = g

        return (full,)

    return _record(np.ascontiguousarray(x.data[region]), [x], _backward, 'slice')


def nearest_upsample2x(x):
    # type: (Tensor) -> Tensor
    """
    Repeat every pixel of an NCHW tensor into a 2x2 block.
    """

    if x.ndim != 4:
        raise ShapeError('upsample: expected NCHW, got rank {}'.format(x.ndim), axis='rank')

    n, c, h, w = x.shape

    y = x.data.repeat(2, axis=2).repeat(2, axis=3)

    return _record(y, [x], lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),), 'upsample')


def dropout(x, rate, train, rng=None):
    # type: (Tensor, float, bool, Optional[np.random.Generator]) -> Tensor
    """
    Inverted dropout: at train time zero each element with probability ``rate`` and scale the rest
    by ``1 / (1 - rate)``. At eval time the very same tensor is returned.
    """

    if not 0.0 <= rate < 1.0:
        raise TensorError('dropout: rate must be in [0, 1), got {}'.format(rate))

    if not train or rate == 0.0:
        return x

    if rng is None:
        raise TensorError('dropout: training mode needs a random generator')

    mask = ((rng.random(x.shape) >= rate) / (1.0 - rate)).astype(x.dtype)

    return _record(x.data * mask, [x], lambda g: (g * mask,), 'dropout')


#
# Convolution
#

def conv2d(x, weight, bias=None, stride=1, pad=0):
    # type: (Tensor, Tensor, Optional[Tensor], int, int) -> Tensor
    """
    2D cross-correlation of an NCHW input with an OIKK weight.

    Output extent is ``floor((H + 2 * pad - K) / stride) + 1`` along each spatial axis.

    :raises ShapeError: naming the axis that does not fit.
    :raises TensorError: for ``stride < 1`` or ``pad < 0``.
    """

    if x.ndim != 4:
        raise ShapeError('conv2d: input must be NCHW, got rank {}'.format(x.ndim), axis='rank')

    if weight.ndim != 4:
        raise ShapeError('conv2d: weight must be OIKK, got rank {}'.format(weight.ndim), axis='rank')

    if stride < 1:
        raise TensorError('conv2d: stride must be at least 1, got {}'.format(stride))

    if pad < 0:
        raise TensorError('conv2d: padding cannot be negative, got {}'.format(pad))

    n, c, h, w = x.shape
    o, i, k, k2 = weight.shape

    if k != k2:
        raise ShapeError('conv2d: kernel must be square, got {}x{}'.format(k, k2), axis='kernel')

    if i != c:
        raise ShapeError('conv2d: weight expects {} input channels, input has {}'.format(i, c), axis='channels')

    if h + 2 * pad < k:
        raise ShapeError('conv2d: padded height {} smaller than kernel {}'.format(h + 2 * pad, k), axis='height')

    if w + 2 * pad < k:
        raise ShapeError('conv2d: padded width {} smaller than kernel {}'.format(w + 2 * pad, k), axis='width')

    if bias is not None and bias.shape != (o,):
        raise ShapeError('conv2d: bias shape {} does not match {} output channels'.format(bias.shape, o), axis='bias')

    out_h = (h + 2 * pad - k) // stride + 1
    out_w = (w + 2 * pad - k) // stride + 1

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

    # (N, C, out_h, out_w, K, K)
    cols = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :out_h, :out_w]

    w_data = weight.data

    y = np.tensordot(cols, w_data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    if bias is not None:
        y = y + bias.data[None, :, None, None]

    y = np.ascontiguousarray(y, dtype=x.dtype)

    def _backward(g):
        # type: (np.ndarray) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]

        grad_weight = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = g.sum(axis=(0, 2, 3)) if bias is not None else None

        # (N, out_h, out_w, C, K, K)
        grad_cols = np.tensordot(g, w_data, axes=([1], [0]))

        grad_padded = np.zeros(padded.shape, dtype=g.dtype)

        for ki in range(k):
            for kj in range(k):
                grad_padded[:, :, ki:ki + stride * out_h:stride, kj:kj + stride * out_w:stride] += \
                    grad_cols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)

        grad_input = grad_padded[:, :, pad:pad + h, pad:pad + w]

        return grad_input, grad_weight, grad_bias

    parents = [x, weight] + ([bias] if bias is not None else [])

    return _record(y, parents, _backward, 'conv2d')
