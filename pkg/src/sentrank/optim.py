"""Adam optimizer over named numpy parameter dicts."""

from __future__ import annotations

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class Adam:
    def __init__(self, lr: float = 0.001):
        self.lr = lr
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
    ) -> dict[str, np.ndarray]:
        """One update; returns new parameter arrays (inputs untouched)."""
        self.t += 1
        out = {}
        for name, value in params.items():
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            v = self.v[name]
            m = BETA1 * m + (1.0 - BETA1) * g
            v = BETA2 * v + (1.0 - BETA2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - BETA1**self.t)
            v_hat = v / (1.0 - BETA2**self.t)
            out[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + EPS)
        return out

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": {k: v.tolist() for k, v in self.m.items()},
            "v": {k: v.tolist() for k, v in self.v.items()},
        }

    @classmethod
    def from_state_dict(cls, state: dict, lr: float) -> "Adam":
        opt = cls(lr=lr)
        opt.t = int(state["t"])
        opt.m = {k: np.asarray(v, dtype=float) for k, v in state["m"].items()}
        opt.v = {k: np.asarray(v, dtype=float) for k, v in state["v"].items()}
        return opt
