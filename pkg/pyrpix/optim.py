"""
Adam with bias correction and an exponential learning rate decay applied after every step.
"""

import collections

import numpy as np

from .core import ShapeError, TensorError
from .tensor import Tensor

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import Dict, Mapping, Optional  # noqa


class AdamState(object):
    # pylint: disable=too-few-public-methods
    """
    First and second moment estimates by parameter name, and the number of steps taken.
    """

    def __init__(self):
        # type: () -> None

        self.step = 0
        self.m = collections.OrderedDict()  # type: collections.OrderedDict[str, np.ndarray]
        self.v = collections.OrderedDict()  # type: collections.OrderedDict[str, np.ndarray]


# pylint: disable=too-many-arguments
def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    # type: (Mapping[str, np.ndarray], Mapping[str, Optional[np.ndarray]], AdamState, float, float, float, float) -> None
    """
    Update ``params`` in place by one Adam step.

    Moments start at zero; a missing gradient counts as zero.

    :param dict params: arrays by name.
    :param dict grads: gradients by name, same shapes as ``params``.
    :param AdamState state: moments, updated in place.
    :raises ShapeError: when a gradient does not match its parameter.
    """

    state.step += 1

    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    for name, param in params.items():
        grad = grads.get(name)

        if grad is None:
            grad = np.zeros_like(param)

        if grad.shape != param.shape:
            raise ShapeError("Gradient of '{}' has shape {}, parameter has {}".format(
                name, grad.shape, param.shape
            ), axis=name)

        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)

        m, v = state.m[name], state.v[name]

        m *= beta1
        m += (1.0 - beta1) * grad

        v *= beta2
        v += (1.0 - beta2) * grad * grad

        param -= (lr * (m / correction1) / (np.sqrt(v / correction2) + eps)).astype(param.dtype)


class Adam(object):
    """
    Optimizer over named parameter tensors, reading their accumulated gradients.

    .. code-block:: python

       optimizer = Adam(net.parameters(), lr=0.001, lr_decay=0.99999)

       with Tape() as tape:
           backward(loss_of(net))

       optimizer.step()
       optimizer.zero_grad()

    :param dict params: tensors by name.
    :param float lr: initial learning rate.
    :param float lr_decay: learning rate multiplier applied after every step.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, params, lr=0.001, lr_decay=1.0, beta1=0.9, beta2=0.999, eps=1e-8):
        # type: (Mapping[str, Tensor], float, float, float, float, float) -> None

        if lr < 0:
            raise TensorError('Learning rate cannot be negative, got {}'.format(lr))

        self.params = collections.OrderedDict(params)  # type: collections.OrderedDict[str, Tensor]
        self.lr = lr
        self.lr_decay = lr_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

        self.state = AdamState()

    def step(self):
        # type: () -> float
        """
        Apply one update with the current learning rate, then decay it. Returns the rate used.
        """

        lr = self.lr

        adam_step(
            collections.OrderedDict((name, param.data) for name, param in self.params.items()),
            {name: param.grad for name, param in self.params.items()},
            self.state,
            lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps
        )

        self.lr *= self.lr_decay

        return lr

    def zero_grad(self):
        # type: () -> None

        for param in self.params.values():
            param.zero_grad()
