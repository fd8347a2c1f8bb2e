"""Disjoint-arms LinUCB over a shared patient context."""

from __future__ import annotations

import json
import math

import numpy as np

DEFAULT_ALPHA = 10.0
CONTEXT_DIM = 5


def build_context(emissions, measured_fluency: float) -> np.ndarray:
    """Feature vector ``(1, e_dep, e_anx, e_ins, fluency)``."""
    e = [float(v) for v in emissions]
    if len(e) != 3:
        raise ValueError(f"expected 3 emissions, got {len(e)}")
    return np.array([1.0, e[0], e[1], e[2], float(measured_fluency)])


class LinUcbPolicy:
    """One ridge model per arm, ``A_a = I + sum x x^T`` and ``b_a = sum r x``.

    Scores are computed through a Cholesky factor of ``A_a``; no inverse is
    formed.
    """

    def __init__(self, arm_names, d: int = CONTEXT_DIM, alpha: float = DEFAULT_ALPHA):
        self.arm_names = list(arm_names)
        if not self.arm_names:
            raise ValueError("need at least one arm")
        if not alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.d = int(d)
        self.alpha = float(alpha)
        n = len(self.arm_names)
        self.A = np.tile(np.eye(self.d), (n, 1, 1))
        self.b = np.zeros((n, self.d))
        self._chol = np.tile(np.eye(self.d), (n, 1, 1))

    @property
    def n_arms(self) -> int:
        return len(self.arm_names)

    def _factor(self, arm: int) -> None:
        try:
            self._chol[arm] = np.linalg.cholesky(self.A[arm])
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"design matrix of arm {arm} is not positive definite") from exc

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"context must have shape ({self.d},), got {x.shape}")
        return x

    def theta(self, arm: int) -> np.ndarray:
        L = self._chol[arm]
        w = np.linalg.solve(L, self.b[arm])
        return np.linalg.solve(L.T, w)

    def scores(self, x) -> np.ndarray:
        """UCB score of every arm at context ``x``."""
        x = self._check_x(x)
        n = self.n_arms
        rhs = np.empty((n, self.d, 2))
        rhs[:, :, 0] = x
        rhs[:, :, 1] = self.b
        # L^{-1} [x, b]: x^T A^{-1} x = |L^{-1}x|^2 and x^T theta = <L^{-1}x, L^{-1}b>
        w = np.linalg.solve(self._chol, rhs)
        wx = w[:, :, 0]
        mean = np.einsum("ad,ad->a", wx, w[:, :, 1])
        width = np.sqrt(np.einsum("ad,ad->a", wx, wx))
        return mean + self.alpha * width

    def ucb_score(self, arm: int, x) -> float:
        x = self._check_x(x)
        L = self._chol[arm]
        wx = np.linalg.solve(L, x)
        wb = np.linalg.solve(L, self.b[arm])
        return float(wx @ wb + self.alpha * math.sqrt(wx @ wx))

    def select(self, x, rng=None) -> int:
        """Arm with the highest score; ties go to the lowest index."""
        return int(np.argmax(self.scores(x)))

    def update(self, arm: int, x, reward: float) -> None:
        x = self._check_x(x)
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} outside 0..{self.n_arms - 1}")
        if not math.isfinite(reward):
            raise ValueError(f"reward must be finite, got {reward}")
        self.A[arm] += np.outer(x, x)
        self.b[arm] += reward * x
        self._factor(arm)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "d": self.d,
            "arm_names": self.arm_names,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinUcbPolicy":
        policy = cls(data["arm_names"], d=data["d"], alpha=data["alpha"])
        A = np.array(data["A"], dtype=float)
        b = np.array(data["b"], dtype=float)
        if A.shape != policy.A.shape or b.shape != policy.b.shape:
            raise ValueError("policy arrays do not match arm count and dimension")
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise ValueError("design matrices must be symmetric")
        policy.A, policy.b = A, b
        for arm in range(policy.n_arms):
            policy._factor(arm)
        return policy

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LinUcbPolicy":
        return cls.from_dict(json.loads(text))


class RandomPolicy:
    """Uniformly random arm; ignores feedback."""

    def __init__(self, arm_names):
        self.arm_names = list(arm_names)

    @property
    def n_arms(self) -> int:
        return len(self.arm_names)

    def select(self, x, rng) -> int:
        return int(rng.integers(self.n_arms))

    def update(self, arm, x, reward) -> None:
        pass
