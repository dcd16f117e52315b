"""GRU and LSTM layers built on the autodiff ops."""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .optim import glorot_init


class GRU:
    """Gated recurrent unit with the reset gate applied to h before projection.

        z = sigmoid(x Wz + h Uz + bz)
        r = sigmoid(x Wr + h Ur + br)
        n = tanh(x Wn + (r * h) Un + bn)
        h' = z * h + (1 - z) * n
    """

    def __init__(self, name, input_size, hidden_size, rng):
        H = hidden_size
        self.hidden_size = H
        self.W = Parameter(glorot_init((input_size, 3 * H), rng), f"{name}.W")
        self.U_zr = Parameter(glorot_init((H, 2 * H), rng), f"{name}.U_zr")
        self.U_n = Parameter(glorot_init((H, H), rng), f"{name}.U_n")
        self.b = Parameter(np.zeros(3 * H), f"{name}.b")

    def parameters(self):
        return [self.W, self.U_zr, self.U_n, self.b]

    def run(self, x):
        """x: (B, T, D) tensor -> (B, T, H) tensor of states, from h0 = 0."""
        H = self.hidden_size
        proj = ag.matmul(x, self.W) + self.b
        T = x.shape[1]
        h = None
        states = []
        for t in range(T):
            x_zr = proj[:, t, : 2 * H]
            x_n = proj[:, t, 2 * H:]
            if h is None:
                zr = ag.sigmoid(x_zr)
                z = zr[:, :H]
                n = ag.tanh(x_n)
                h = (1.0 - z) * n
            else:
                zr = ag.sigmoid(x_zr + h @ self.U_zr)
                z, r = zr[:, :H], zr[:, H:]
                n = ag.tanh(x_n + (r * h) @ self.U_n)
                h = n + z * (h - n)
            states.append(h)
        return ag.stack(states, axis=1)


class LSTMCell:
    """Standard LSTM cell; gate order i, f, g, o."""

    def __init__(self, name, input_size, hidden_size, rng):
        H = hidden_size
        self.hidden_size = H
        self.W = Parameter(glorot_init((input_size, 4 * H), rng), f"{name}.W")
        self.U = Parameter(glorot_init((H, 4 * H), rng), f"{name}.U")
        self.b = Parameter(np.zeros(4 * H), f"{name}.b")

    def parameters(self):
        return [self.W, self.U, self.b]

    def step(self, x, state=None):
        H = self.hidden_size
        gates = x @ self.W + self.b
        if state is not None:
            gates = gates + state[0] @ self.U
        i = ag.sigmoid(gates[:, :H])
        f = ag.sigmoid(gates[:, H: 2 * H])
        g = ag.tanh(gates[:, 2 * H: 3 * H])
        o = ag.sigmoid(gates[:, 3 * H:])
        c = i * g if state is None else f * state[1] + i * g
        h = o * ag.tanh(c)
        return h, c


def reversal_index(lengths, T):
    """Index (rows, cols) reversing each row within its true length; padding stays put.

    The permutation is its own inverse.
    """
    lengths = np.asarray(lengths)
    t = np.arange(T)[None, :]
    cols = np.where(t < lengths[:, None], lengths[:, None] - 1 - t, t)
    rows = np.broadcast_to(np.arange(len(lengths))[:, None], cols.shape)
    return rows, cols
