import json
from types import SimpleNamespace

import numpy as np
import pytest

from fluentrx.hmm import (
    GaussianHmm, HmmValidationError, emit, persistence_matrix, sample_initial,
    stationary_distribution, step, validate,
)


def chain(transition=None, initial=None, var=0.0, n=5):
    return GaussianHmm(
        initial_dist=np.full(n, 1 / n) if initial is None else initial,
        transition=np.eye(n) if transition is None else transition,
        emission_mean=np.linspace(0.8, 0.4, n),
        emission_var=np.full(n, var),
    )


def test_uniform_initial_frequencies(rng):
    h = GaussianHmm.default()
    draws = np.array([sample_initial(h, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=6)[1:] / len(draws)
    assert np.all(np.abs(freq - 0.2) < 0.01)


def test_single_state_chain_always_state_one(rng):
    h = GaussianHmm([1.0], [[1.0]], [0.8], [0.0])
    assert all(sample_initial(h, rng) == 1 for _ in range(100))
    assert step(h, 1, rng) == 1


def test_point_mass_initial(rng):
    h = chain(initial=[0, 0, 1, 0, 0])
    assert {sample_initial(h, rng) for _ in range(1000)} == {3}


def test_identity_transition_absorbs(rng):
    h = chain()
    assert all(step(h, 4, rng) == 4 for _ in range(100))


def test_deterministic_row(rng):
    T = np.eye(5)
    T[1] = [0, 0, 1, 0, 0]
    h = chain(T)
    assert all(step(h, 2, rng) == 3 for _ in range(100))


def test_row_frequencies_match(rng):
    T = np.eye(5)
    T[1] = [0.25, 0.5, 0.25, 0, 0]
    h = chain(T)
    draws = np.array([step(h, 2, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=6)[1:] / len(draws)
    assert np.all(np.abs(freq - T[1]) < 0.01)


@pytest.mark.parametrize("state", [0, 6, -1])
def test_step_rejects_out_of_range(state, rng):
    with pytest.raises(ValueError):
        step(GaussianHmm.default(), state, rng)


def test_zero_variance_emission_ladder(rng):
    h = GaussianHmm.default().set_emission_var(np.zeros(5))
    assert [emit(h, s, rng) for s in range(1, 6)] == [0.8, 0.7, 0.6, 0.5, 0.4]


def test_emission_moments(rng):
    h = GaussianHmm.default().set_emission_var(np.full(5, 0.01))
    x = np.array([emit(h, 3, rng) for _ in range(100_000)])
    assert abs(x.mean() - 0.6) < 0.003
    assert abs(x.var() / 0.01 - 1) < 0.10


def test_default_is_valid():
    assert validate(GaussianHmm.default()) == []


def test_validate_names_bad_row():
    T = persistence_matrix()
    T[2] = [0, 0.05, 0.8, 0.05, 0]
    problems = validate(SimpleNamespace(initial_dist=np.full(5, 0.2), transition=T,
                                        emission_mean=np.zeros(5), emission_var=np.zeros(5)))
    assert len(problems) == 1 and "row 3" in problems[0]
    with pytest.raises(HmmValidationError) as err:
        chain(T)
    assert any("row 3" in v for v in err.value.violations)


def test_validate_names_negative_variance():
    var = np.zeros(5)
    var[3] = -0.1
    with pytest.raises(HmmValidationError) as err:
        GaussianHmm(np.full(5, 0.2), np.eye(5), np.zeros(5), var)
    assert err.value.violations == ["emission_var of state 4 is negative (-0.1)"]


def test_invalid_initial_rejected():
    with pytest.raises(HmmValidationError):
        chain(initial=[0.5, 0.5, 0.5, 0, 0])


def test_immutable_except_through_setters():
    h = GaussianHmm.default()
    with pytest.raises(AttributeError):
        h.transition = np.eye(5)
    with pytest.raises(ValueError):
        h.transition[0, 0] = 0.5
    with pytest.raises(HmmValidationError):
        h.set_transition(np.full((5, 5), 0.5))
    h2 = h.set_transition(np.eye(5))
    assert np.array_equal(h.transition, persistence_matrix())
    assert np.array_equal(h2.transition, np.eye(5))


def test_persistence_matrix_shape():
    T = persistence_matrix()
    assert np.allclose(T.sum(axis=1), 1.0)
    assert T[0, 0] == pytest.approx(0.95) and T[4, 4] == pytest.approx(0.95)
    assert T[2].tolist() == pytest.approx([0, 0.05, 0.9, 0.05, 0])


def test_json_round_trip():
    h = GaussianHmm.default()
    data = json.loads(h.to_json())
    assert set(data) == {"initial", "transition", "emission_mean", "emission_var"}
    assert GaussianHmm.from_json(h.to_json()) == h


def test_zero_variance_emit_is_pure():
    h = GaussianHmm.default().set_emission_var(np.zeros(5))
    a = [emit(h, 2, np.random.default_rng(s)) for s in range(20)]
    assert set(a) == {0.7}


def test_long_chain_occupancy_matches_stationary():
    rng = np.random.default_rng(7)
    T = rng.uniform(0.05, 1.0, (5, 5))
    T /= T.sum(axis=1, keepdims=True)
    h = chain(T)
    pi = stationary_distribution(T)
    assert np.allclose(pi @ T, pi, atol=1e-12)
    states = np.empty(1_000_001, dtype=np.int64)
    states[0] = 1
    for t in range(1_000_000):
        states[t + 1] = step(h, states[t], rng)
    freq = np.bincount(states, minlength=6)[1:] / len(states)
    assert np.all(np.abs(freq - pi) < 0.02)
