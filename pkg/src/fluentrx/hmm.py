"""Discrete-state hidden Markov chains with Gaussian emissions.

States are 1-indexed by severity: state 1 means no symptoms, state ``n`` the
most severe.  All sampling goes through an injected ``numpy.random.Generator``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-9

#: Mean context emission per severity state, shared by all three conditions.
DEFAULT_EMISSION_MEANS = (0.8, 0.7, 0.6, 0.5, 0.4)
DEFAULT_EMISSION_VAR = 0.0025


class HmmValidationError(ValueError):
    """Raised when HMM parameters violate an invariant."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def persistence_matrix(n_states: int = 5, stay: float = 0.90) -> np.ndarray:
    """Tridiagonal transition matrix: stay with ``stay``, move one level either way.

    Boundary states fold the missing neighbour's mass back into staying.
    """
    move = (1.0 - stay) / 2.0
    T = np.zeros((n_states, n_states))
    for i in range(n_states):
        if i > 0:
            T[i, i - 1] = move
        if i < n_states - 1:
            T[i, i + 1] = move
        T[i, i] = 1.0 - T[i].sum()
    return T


@dataclass(eq=False)
class GaussianHmm:
    initial_dist: np.ndarray
    transition: np.ndarray
    emission_mean: np.ndarray
    emission_var: np.ndarray
    _frozen: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.initial_dist = np.array(self.initial_dist, dtype=float)
        self.transition = np.array(self.transition, dtype=float)
        self.emission_mean = np.array(self.emission_mean, dtype=float)
        self.emission_var = np.array(self.emission_var, dtype=float)
        for arr in (self.initial_dist, self.transition, self.emission_mean, self.emission_var):
            arr.flags.writeable = False
        problems = validate(self)
        if problems:
            raise HmmValidationError(problems)
        self._frozen = True

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False) and name != "_frozen":
            raise AttributeError(f"use set_{name}() to change {name!r}")
        super().__setattr__(name, value)

    def __eq__(self, other):
        if not isinstance(other, GaussianHmm):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("initial_dist", "transition", "emission_mean", "emission_var")
        )

    __hash__ = None

    @property
    def n_states(self) -> int:
        return len(self.initial_dist)

    @classmethod
    def default(cls, n_states: int = 5) -> "GaussianHmm":
        means = DEFAULT_EMISSION_MEANS if n_states == 5 else np.linspace(0.8, 0.4, n_states)
        return cls(
            initial_dist=np.full(n_states, 1.0 / n_states),
            transition=persistence_matrix(n_states),
            emission_mean=means,
            emission_var=np.full(n_states, DEFAULT_EMISSION_VAR),
        )

    def _replace(self, **changes) -> "GaussianHmm":
        params = {
            "initial_dist": self.initial_dist,
            "transition": self.transition,
            "emission_mean": self.emission_mean,
            "emission_var": self.emission_var,
        }
        params.update(changes)
        return GaussianHmm(**params)

    # Validated setters return a new chain; the original stays untouched.
    def set_transition(self, transition) -> "GaussianHmm":
        return self._replace(transition=transition)

    def set_initial_dist(self, initial_dist) -> "GaussianHmm":
        return self._replace(initial_dist=initial_dist)

    def set_emission_var(self, emission_var) -> "GaussianHmm":
        return self._replace(emission_var=emission_var)

    def to_dict(self) -> dict:
        return {
            "initial": self.initial_dist.tolist(),
            "transition": self.transition.tolist(),
            "emission_mean": self.emission_mean.tolist(),
            "emission_var": self.emission_var.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianHmm":
        return cls(
            initial_dist=data["initial"],
            transition=data["transition"],
            emission_mean=data["emission_mean"],
            emission_var=data["emission_var"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianHmm":
        return cls.from_dict(json.loads(text))


def validate(hmm: GaussianHmm) -> list[str]:
    """Return every violated invariant; an empty list means the chain is valid."""
    out = []
    pi = np.asarray(hmm.initial_dist, dtype=float)
    T = np.asarray(hmm.transition, dtype=float)
    mu = np.asarray(hmm.emission_mean, dtype=float)
    var = np.asarray(hmm.emission_var, dtype=float)
    n = pi.shape[0] if pi.ndim == 1 else -1
    if pi.ndim != 1 or n < 1:
        return ["initial_dist must be a non-empty vector"]
    if np.any(pi < 0):
        out.append("initial_dist has negative entries")
    if abs(pi.sum() - 1.0) > ROW_TOL:
        out.append(f"initial_dist sums to {pi.sum():.12g}, not 1")
    if T.shape != (n, n):
        out.append(f"transition shape {T.shape} != ({n}, {n})")
    else:
        for i, row in enumerate(T, start=1):
            if np.any(row < 0):
                out.append(f"transition row {i} has negative entries")
            if abs(row.sum() - 1.0) > ROW_TOL:
                out.append(f"transition row {i} sums to {row.sum():.12g}, not 1")
    if mu.shape != (n,):
        out.append(f"emission_mean length {mu.shape} != ({n},)")
    if var.shape != (n,):
        out.append(f"emission_var length {var.shape} != ({n},)")
    else:
        for k, v in enumerate(var, start=1):
            if not v >= 0:
                out.append(f"emission_var of state {k} is negative ({v})")
    return out


def _check_state(hmm: GaussianHmm, state: int) -> int:
    if not (1 <= state <= hmm.n_states):
        raise ValueError(f"state {state} outside 1..{hmm.n_states}")
    return int(state)


def sample_categorical(probs, u: float) -> int:
    """0-based index of the bucket of ``u`` in the cumulative distribution ``probs``.

    Accumulates left to right; if rounding leaves ``u`` past the total, the last
    bucket with positive mass is returned.
    """
    acc = 0.0
    last = 0
    for j, p in enumerate(probs):
        if p > 0.0:
            last = j
            acc += p
            if u < acc:
                return j
    return last


def sample_initial(hmm: GaussianHmm, rng: np.random.Generator) -> int:
    return sample_categorical(hmm.initial_dist, rng.random()) + 1


def step(hmm: GaussianHmm, current: int, rng: np.random.Generator, transition=None) -> int:
    """Draw the next state from the row of ``current``.

    ``transition`` overrides the chain's own matrix for this one step (used for
    medication-adjusted dynamics).
    """
    current = _check_state(hmm, current)
    T = hmm.transition if transition is None else transition
    return sample_categorical(T[current - 1], rng.random()) + 1


def emit(hmm: GaussianHmm, state: int, rng: np.random.Generator) -> float:
    state = _check_state(hmm, state)
    mean = hmm.emission_mean[state - 1]
    std = np.sqrt(hmm.emission_var[state - 1])
    # Always consume one draw so the stream does not depend on the variance.
    return float(mean + std * rng.standard_normal())


def stationary_distribution(T, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Left Perron eigenvector of ``T`` by power iteration."""
    T = np.asarray(T, dtype=float)
    pi = np.full(T.shape[0], 1.0 / T.shape[0])
    for _ in range(max_iter):
        nxt = pi @ T
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi
