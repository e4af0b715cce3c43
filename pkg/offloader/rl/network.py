"""Recurrent policy and value networks written directly against numpy.

Each network is an LSTM layer followed by a rectified fully connected layer
and a linear head. The actor turns the head into action probabilities with a
softmax; the critic reads the head as a state value. All parameters live in
one flat float64 vector so that gradient clipping and RMSprop act on a single
array.

The LSTM weight matrix stacks a bias row, the input rows and the recurrent
rows; its columns hold the candidate, input, forget and output gates in that
order.
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np

from ..errors import ShapeError
from ..mdp import NUM_ACTIONS, NUM_FEATURES

NetKind = Literal["actor", "critic"]


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def orthogonal(shape: Tuple[int, int], rng: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    """Orthogonal matrix from the QR decomposition of a Gaussian sample."""

    rows, cols = shape
    sample = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(sample)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class PolicyNet:
    """LSTM -> FC(ReLU) -> linear head, with RMSprop accumulators."""

    def __init__(
        self,
        kind: NetKind,
        input_dim: int = NUM_FEATURES,
        hidden_size: int = 64,
        fc_size: int = 256,
        params: Optional[np.ndarray] = None,
        accumulators: Optional[np.ndarray] = None,
    ) -> None:
        if kind not in ("actor", "critic"):
            raise ValueError(f"kind must be 'actor' or 'critic', got {kind!r}")
        self.kind: NetKind = kind
        self.input_dim = input_dim
        self.hidden_size = hidden_size
        self.fc_size = fc_size
        self.output_dim = NUM_ACTIONS if kind == "actor" else 1

        self.size = sum(int(np.prod(shape)) for _, shape in self.layout)
        self.params = np.zeros(self.size) if params is None else np.array(params, dtype=np.float64)
        self.accumulators = (
            np.zeros(self.size) if accumulators is None else np.array(accumulators, dtype=np.float64)
        )
        if self.params.shape != (self.size,) or self.accumulators.shape != (self.size,):
            raise ShapeError(
                f"{kind} expects {self.size} parameters, got {self.params.shape} and {self.accumulators.shape}"
            )

    # --- layout --------------------------------------------------------------

    @property
    def layout(self) -> List[Tuple[str, Tuple[int, ...]]]:
        H = self.hidden_size
        return [
            ("lstm_W", (1 + self.input_dim + H, 4 * H)),
            ("fc_W", (H, self.fc_size)),
            ("fc_b", (self.fc_size,)),
            ("head_W", (self.fc_size, self.output_dim)),
            ("head_b", (self.output_dim,)),
        ]

    def unpack(self, flat: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
        """Return named views into ``flat`` (the parameters by default)."""

        flat = self.params if flat is None else flat
        views: Dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in self.layout:
            count = int(np.prod(shape))
            views[name] = flat[offset : offset + count].reshape(shape)
            offset += count
        return views

    def dims(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden_size": self.hidden_size,
            "fc_size": self.fc_size,
        }

    def copy(self) -> "PolicyNet":
        return PolicyNet(params=self.params, accumulators=self.accumulators, **self.dims())

    # --- inference -------------------------------------------------------------

    def initial_state(self, batch: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        zeros = np.zeros((batch, self.hidden_size))
        return zeros, zeros.copy()

    def _head_output(self, z: np.ndarray) -> np.ndarray:
        return softmax(z) if self.kind == "actor" else z

    def step(
        self, x: np.ndarray, h: np.ndarray, c: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Advance one timestep for a batch ``x`` of shape ``(B, input_dim)``."""

        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[-1] != self.input_dim:
            raise ShapeError(f"Expected {self.input_dim} input features, got {x.shape[-1]}")
        p = self.unpack()
        H = self.hidden_size
        hin = np.concatenate([np.ones((x.shape[0], 1)), x, h], axis=1)
        gates = hin @ p["lstm_W"]
        g = np.tanh(gates[:, :H])
        i, f, o = (sigmoid(gates[:, k * H : (k + 1) * H]) for k in (1, 2, 3))
        c = g * i + f * c
        h = np.tanh(c) * o
        fc = np.maximum(h @ p["fc_W"] + p["fc_b"], 0.0)
        z = fc @ p["head_W"] + p["head_b"]
        return self._head_output(z), h, c

    def forward(self, xs: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        """Run a whole sequence from a zero state.

        ``xs`` is ``(T, input_dim)`` or ``(T, B, input_dim)``; outputs keep the
        same leading dimensions. Returns the outputs and the final ``(h, c)``.
        """

        xs = np.asarray(xs, dtype=np.float64)
        single = xs.ndim == 2
        z, cache = self.forward_cached(xs[:, None, :] if single else xs)
        out = self._head_output(z)
        final = (cache["Hout"][-1], cache["C"][-1])
        return (out[:, 0, :] if single else out), final

    def forward_cached(self, xs: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """Forward pass over ``(T, B, input_dim)`` keeping what backward needs.

        Returns head pre-activations (logits or values) and the cache.
        """

        if xs.ndim != 3 or xs.shape[-1] != self.input_dim:
            raise ShapeError(f"Expected inputs of shape (T, B, {self.input_dim}), got {xs.shape}")
        p = self.unpack()
        W = p["lstm_W"]
        T, B, D = xs.shape
        H = self.hidden_size

        Hin = np.zeros((T, B, 1 + D + H))
        gates = np.zeros((T, B, 4 * H))
        C = np.zeros((T, B, H))
        Ct = np.zeros((T, B, H))
        Hout = np.zeros((T, B, H))
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        for t in range(T):
            Hin[t, :, 0] = 1.0
            Hin[t, :, 1 : D + 1] = xs[t]
            Hin[t, :, D + 1 :] = h
            pre = Hin[t] @ W
            gates[t, :, :H] = np.tanh(pre[:, :H])
            gates[t, :, H:] = sigmoid(pre[:, H:])
            c = gates[t, :, :H] * gates[t, :, H : 2 * H] + gates[t, :, 2 * H : 3 * H] * c
            C[t] = c
            Ct[t] = np.tanh(c)
            h = Ct[t] * gates[t, :, 3 * H :]
            Hout[t] = h

        fc_pre = Hout @ p["fc_W"] + p["fc_b"]
        fc = np.maximum(fc_pre, 0.0)
        z = fc @ p["head_W"] + p["head_b"]
        cache = {"Hin": Hin, "gates": gates, "C": C, "Ct": Ct, "Hout": Hout, "fc_pre": fc_pre, "fc": fc}
        return z, cache

    # --- training --------------------------------------------------------------

    def backward(self, dz: np.ndarray, cache: Dict[str, np.ndarray]) -> np.ndarray:
        """Backpropagate ``dLoss/dz`` through time; returns the flat gradient."""

        p = self.unpack()
        grad = np.zeros(self.size)
        g = self.unpack(grad)
        H = self.hidden_size
        D = self.input_dim

        fc, fc_pre, Hout = cache["fc"], cache["fc_pre"], cache["Hout"]
        g["head_W"][:] = np.einsum("tbf,tbo->fo", fc, dz)
        g["head_b"][:] = dz.sum(axis=(0, 1))
        dfc_pre = (dz @ p["head_W"].T) * (fc_pre > 0)
        g["fc_W"][:] = np.einsum("tbh,tbf->hf", Hout, dfc_pre)
        g["fc_b"][:] = dfc_pre.sum(axis=(0, 1))
        dHout = dfc_pre @ p["fc_W"].T

        Hin, gates, C, Ct = cache["Hin"], cache["gates"], cache["C"], cache["Ct"]
        W = p["lstm_W"]
        dW = g["lstm_W"]
        T, B, _ = Hin.shape
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            cand = gates[t, :, :H]
            i = gates[t, :, H : 2 * H]
            f = gates[t, :, 2 * H : 3 * H]
            o = gates[t, :, 3 * H :]
            c_prev = C[t - 1] if t > 0 else np.zeros((B, H))

            dh = dHout[t] + dh_next
            do = Ct[t] * dh
            dc = dc_next + (1.0 - Ct[t] ** 2) * o * dh
            dpre = np.concatenate(
                [
                    (1.0 - cand**2) * (dc * i),
                    i * (1.0 - i) * (dc * cand),
                    f * (1.0 - f) * (dc * c_prev),
                    o * (1.0 - o) * do,
                ],
                axis=1,
            )
            dc_next = dc * f
            dW += Hin[t].T @ dpre
            dh_next = (dpre @ W.T)[:, D + 1 :]
        return grad


def init_network(
    kind: NetKind,
    seed: int,
    input_dim: int = NUM_FEATURES,
    hidden_size: int = 64,
    fc_size: int = 256,
    gain: float = 1.0,
    forget_bias: float = 1.0,
) -> PolicyNet:
    """Orthogonally initialized network with zero biases and forget bias 1."""

    net = PolicyNet(kind, input_dim=input_dim, hidden_size=hidden_size, fc_size=fc_size)
    rng = np.random.default_rng(seed)
    p = net.unpack()
    H = hidden_size
    lstm = p["lstm_W"]
    lstm[1 : input_dim + 1] = orthogonal((input_dim, 4 * H), rng, gain)
    for k in range(4):
        lstm[input_dim + 1 :, k * H : (k + 1) * H] = orthogonal((H, H), rng, gain)
    lstm[0, 2 * H : 3 * H] = forget_bias
    p["fc_W"][:] = orthogonal((H, fc_size), rng, gain)
    p["head_W"][:] = orthogonal((fc_size, net.output_dim), rng, gain)
    return net
