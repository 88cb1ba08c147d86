# impactgraph/layers.py
"""
Parameterized building blocks on top of autodiff: Linear, GRU, BiGRU.
Parameters live in a shared ParameterStore under a name prefix.
"""

import numpy as np

from . import autodiff as ad


class Linear:
    def __init__(self, store, name, in_dim, out_dim):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = store.glorot(f"{name}.w", (in_dim, out_dim))
        self.b = store.zeros(f"{name}.b", (out_dim,))

    def __call__(self, x):
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"Linear expects width {self.in_dim}, got {x.shape[-1]}")
        return ad.matmul(x, self.w) + self.b


class GRU:
    """
    Gate layout (r, z, n):
      r = sigmoid(x W_xr + b_xr + h W_hr + b_hr)
      z = sigmoid(x W_xz + b_xz + h W_hz + b_hz)
      n = tanh(x W_xn + b_xn + r * (h W_hn + b_hn))
      h' = (1 - z) * n + z * h
    """

    def __init__(self, store, name, in_dim, hidden):
        self.in_dim, self.hidden = in_dim, hidden
        self.w_x = store.glorot(f"{name}.w_x", (in_dim, 3 * hidden))
        self.w_h = store.glorot(f"{name}.w_h", (hidden, 3 * hidden))
        self.b_x = store.zeros(f"{name}.b_x", (3 * hidden,))
        self.b_h = store.zeros(f"{name}.b_h", (3 * hidden,))

    def step(self, x, h):
        H = self.hidden
        gx = ad.matmul(x, self.w_x) + self.b_x
        gh = ad.matmul(h, self.w_h) + self.b_h
        r = ad.sigmoid(ad.slice_(gx, 0, H) + ad.slice_(gh, 0, H))
        z = ad.sigmoid(ad.slice_(gx, H, 2 * H) + ad.slice_(gh, H, 2 * H))
        n = ad.tanh(ad.slice_(gx, 2 * H, 3 * H) + r * ad.slice_(gh, 2 * H, 3 * H))
        return n + z * (h - n)

    def run(self, xs, reverse=False, masks=None):
        """
        Run over a list of [B, in] steps; returns the state at every position
        (position order, whatever the direction). With masks ([B, 1], 1 for
        real steps) the state is frozen outside each row's natural length.
        """
        if not xs:
            raise ValueError("GRU over an empty sequence")
        for x in xs:
            if x.shape[-1] != self.in_dim:
                raise ValueError(f"GRU expects input width {self.in_dim}, got {x.shape[-1]}")
        h = ad.constant(np.zeros((xs[0].shape[0], self.hidden)))
        order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
        states = [None] * len(xs)
        for t in order:
            h_new = self.step(xs[t], h)
            if masks is not None:
                h_new = h + masks[t] * (h_new - h)
            h = h_new
            states[t] = h
        return states


class BiGRU:
    """Forward and backward GRUs; pass tied=True to share one parameter set."""

    def __init__(self, store, name, in_dim, hidden, tied=False):
        self.fwd = GRU(store, f"{name}.fwd", in_dim, hidden)
        self.bwd = self.fwd if tied else GRU(store, f"{name}.bwd", in_dim, hidden)
        self.hidden = hidden

    @property
    def out_dim(self):
        return 2 * self.hidden

    def run(self, xs, masks=None):
        """Returns (per-position concat states, final forward, final backward)."""
        f = self.fwd.run(xs, masks=masks)
        b = self.bwd.run(xs, reverse=True, masks=masks)
        states = [ad.concat([f[t], b[t]], axis=-1) for t in range(len(xs))]
        return states, f[-1], b[0]

    def mean_state(self, xs, masks=None):
        states, _, _ = self.run(xs, masks=masks)
        return ad.mean_pool(states, axis=0)
