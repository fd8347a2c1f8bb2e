import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_med
from fluentrx.hmm import persistence_matrix
from fluentrx.pharmacology import (
    ActiveDose, CatalogError, MedicationCatalog, OnsetParseError, ResponseRateParseError,
    administer, apply_pressure, concentration, effective_concentration, load_default_catalog,
    net_pressure, parse_catalog, parse_onset, parse_response_rate, serialize_catalog,
)

HEADER = "name,onset,response_rate,conditions,effect_depression,effect_anxiety,effect_insomnia,effect_std,half_life_days\n"


@pytest.mark.parametrize("dosage,half_life,elapsed,expected", [
    (1.0, 2, 2, 0.5),
    (1.0, 2, 4, 0.25),
    (1.5, 7, 0, 1.5),
])
def test_concentration(dosage, half_life, elapsed, expected):
    dose = ActiveDose(make_med(half_life=half_life), start_day=10, dosage=dosage)
    assert concentration(dose, 10 + elapsed) == expected


def test_concentration_before_start_rejected():
    with pytest.raises(ValueError):
        concentration(ActiveDose(make_med(), 5), 4)


def test_effective_concentration_gate():
    dose = ActiveDose(make_med(half_life=56, time_to_effect=28), 0, 1.0)
    assert effective_concentration(dose, 10) == 0.0
    assert effective_concentration(dose, 28) == pytest.approx(0.7071067811865476, rel=1e-15)
    assert effective_concentration(dose, 28) == pytest.approx(math.sqrt(0.5), rel=1e-15)


def test_ungated_matches_concentration():
    dose = ActiveDose(make_med(half_life=3.3, time_to_effect=0), 2, 1.2)
    for day in range(2, 60):
        assert effective_concentration(dose, day) == concentration(dose, day)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 60.0))
def test_halves_every_half_life(dosage, half_life):
    med = make_med(half_life=half_life)
    dose = ActiveDose(med, 0, dosage)
    for k in range(1, 21):
        # fractional half-lives: evaluate at the exact (non-integer) elapsed time
        expected = dosage * 0.5 ** k
        got = concentration(dose, k * half_life)
        assert abs(got - expected) / expected < 1e-12
    prev = concentration(dose, 0)
    for day in range(1, 50):
        cur = concentration(dose, day)
        assert cur < prev
        prev = cur


@pytest.mark.parametrize("half_life", [1, 2, 5, 7, 14])
def test_integer_half_life_exact_halving(half_life):
    dose = ActiveDose(make_med(half_life=half_life), 0, 1.3)
    for k in range(1, 21):
        got = concentration(dose, k * half_life)
        assert abs(got / (1.3 * 0.5 ** k) - 1) < 1e-12


def test_dosage_bounds_enforced_at_administration():
    med = make_med()
    assert administer(med, 3, 1.5).dosage == 1.5
    for bad in (0.4, 2.1):
        with pytest.raises(ValueError):
            administer(med, 0, bad)
    with pytest.raises(ValueError):
        ActiveDose(med, 0, 0.0)


def test_net_pressure_cases(rng):
    assert net_pressure([], "depression", 0, rng) == 0.0
    one = ActiveDose(make_med(effects=(0.3, 0, 0)), 0, 1.0)
    assert net_pressure([one], "depression", 0, rng) == pytest.approx(0.3)
    hot = ActiveDose(make_med(effects=(0.7, 0, 0)), 0, 1.0)
    assert net_pressure([hot, hot], "depression", 0, rng) == 1.0
    neg = ActiveDose(make_med(effects=(0, -0.7, 0)), 0, 1.0)
    assert net_pressure([neg, neg], "anxiety", 0, rng) == -1.0


def test_net_pressure_additive_when_deterministic(rng):
    a = ActiveDose(make_med(effects=(0.2, 0.1, 0), half_life=3), 0, 1.0)
    b = ActiveDose(make_med(effects=(0.15, -0.05, 0), half_life=9), 2, 1.5)
    for c in (0, 1):
        both = net_pressure([a, b], c, 6, rng)
        assert both == pytest.approx(net_pressure([a], c, 6, rng) + net_pressure([b], c, 6, rng), abs=1e-15)


def test_net_pressure_mean_and_spread():
    dose = ActiveDose(make_med(effects=(0.2, 0, 0), std=0.05), 0, 1.0)
    rng = np.random.default_rng(3)
    x = np.array([net_pressure([dose], 0, 0, rng) for _ in range(20_000)])
    assert abs(x.mean() - 0.2) < 0.002
    assert abs(x.std() - 0.05) < 0.002


def test_apply_pressure_zero_is_identity():
    T = persistence_matrix()
    assert np.array_equal(apply_pressure(T, 0.0), T)


def test_apply_pressure_full():
    T = persistence_matrix()
    out = apply_pressure(T, 1.0)
    for i in range(1, 5):
        assert np.array_equal(out[i], np.eye(5)[i - 1])
    assert np.array_equal(out[0], np.eye(5)[0])
    out = apply_pressure(T, -1.0)
    assert np.array_equal(out[4], np.eye(5)[4])
    assert np.array_equal(out[0], np.eye(5)[1])


def test_apply_pressure_half_on_row_three():
    out = apply_pressure(persistence_matrix(), 0.5)
    assert out[2] == pytest.approx([0, 0.525, 0.45, 0.025, 0], abs=1e-15)


def test_apply_pressure_rejects_large():
    with pytest.raises(ValueError):
        apply_pressure(np.eye(5), 1.01)


@st.composite
def stochastic_and_pressure(draw):
    n = draw(st.integers(2, 7))
    raw = draw(st.lists(st.floats(0, 1), min_size=n * n, max_size=n * n))
    T = np.array(raw).reshape(n, n) + 1e-9
    T /= T.sum(axis=1, keepdims=True)
    return T, draw(st.floats(-1, 1))


@settings(max_examples=300, deadline=None)
@given(stochastic_and_pressure())
def test_apply_pressure_stays_stochastic(case):
    T, p = case
    out = apply_pressure(T, p)
    assert np.all(out >= 0)
    assert np.all(np.abs(out.sum(axis=1) - 1) < 1e-12)


def test_opposite_pressures_move_opposite_ways():
    T = persistence_matrix()
    up = apply_pressure(T, 0.4)[2] - T[2]
    down = apply_pressure(T, -0.4)[2] - T[2]
    assert np.argmax(up) == 1 and np.argmax(down) == 3


@pytest.mark.parametrize("text,expected", [
    ("1-3 weeks", (7, 21)),
    ("4-6 weeks", (28, 42)),
    ("3 days", (3, 3)),
    ("First few days", (1, 3)),
    ("1 week", (7, 7)),
    ("4 weeks", (28, 28)),
    ("Within 6 weeks", (1, 42)),
    ("1-2 weeks to start working, 4-6 weeks for full benefit", (7, 14)),
    ("2-4 weeks (epilepsy), 3 months (migraines)", (14, 28)),
    ("2-8 weeks for full improvement", (14, 56)),
    ("2-3 days", (2, 3)),
])
def test_parse_onset(text, expected):
    assert parse_onset(text) == expected


@pytest.mark.parametrize("text", ["soon", "", "weeks", "3-1 weeks"])
def test_parse_onset_rejects(text):
    with pytest.raises(OnsetParseError, match="onset"):
        parse_onset(text)


@pytest.mark.parametrize("text,expected", [
    ("33-40%", (0.33, 0.40)),
    ("67.2%", (0.672, 0.672)),
    ("17.2% - 37.6% (600 mg-1800mg dosage)", (0.172, 0.376)),
    ("60%-80.7%", (0.60, 0.807)),
    ("40%", (0.40, 0.40)),
    ("Low remission rate (20%)", (0.20, 0.20)),
    ("63.4% (4 mg), 65.8% (8 mg)", (0.634, 0.634)),
    ("80.6% patients after 12-week treatment, compared to 48.0% in the placebo", (0.806, 0.806)),
    ("30.2% after 2 weeks of treatment and 75.8% after 8 weeks of treatment", (0.302, 0.302)),
])
def test_parse_response_rate(text, expected):
    assert parse_response_rate(text) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("text", ["", "high", "120%"])
def test_parse_response_rate_rejects(text):
    with pytest.raises(ResponseRateParseError):
        parse_response_rate(text)


def test_parse_catalog_rows():
    text = HEADER + (
        'Venlafaxine,4-6 weeks,67.2%,"Depression, anxiety",0.3,0.3,0.0,0.03,7\n'
        "Pregabalin,3 days,40%,Anxiety,0.0,0.2,0.0,0.02,7\n"
    )
    cat = parse_catalog(text)
    assert cat["Venlafaxine"].onset_range == (28, 42)
    assert cat["Venlafaxine"].response_rate_range == (0.672, 0.672)
    assert cat["Venlafaxine"].time_to_effect == 35
    assert cat["Pregabalin"].onset_range == (3, 3)
    assert cat["Pregabalin"].response_rate_range == (0.40, 0.40)


def test_parse_catalog_errors_name_line_and_column():
    with pytest.raises(CatalogError) as err:
        parse_catalog(HEADER + "A,3 days,40%,x,0,0,0,0,7\nB,soon,40%,x,0,0,0,0,7\n")
    assert err.value.line == 3 and err.value.column == "onset"
    assert "line 3" in str(err.value) and "soon" in str(err.value)
    with pytest.raises(CatalogError) as err:
        parse_catalog(HEADER + "A,3 days,40%,x,zero,0,0,0,7\n")
    assert err.value.column == "effect_depression"
    with pytest.raises(CatalogError, match="duplicate"):
        parse_catalog(HEADER + "A,3 days,40%,x,0,0,0,0,7\nA,3 days,40%,x,0,0,0,0,7\n")
    with pytest.raises(CatalogError, match="no data rows"):
        parse_catalog("")
    with pytest.raises(CatalogError, match="no data rows"):
        parse_catalog(HEADER)
    with pytest.raises(CatalogError, match="header"):
        parse_catalog("name,onset\nA,3 days\n")
    with pytest.raises(CatalogError, match="half_life"):
        parse_catalog(HEADER + "A,3 days,40%,x,0,0,0,0,0\n")


def test_default_catalog_round_trip():
    cat = load_default_catalog()
    again = parse_catalog(serialize_catalog(cat))
    assert again == cat
    assert serialize_catalog(again) == serialize_catalog(cat)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
                          st.floats(0, 0.5), st.floats(0.1, 100)), min_size=1, max_size=6))
def test_round_trip_random_catalogs(rows):
    meds = []
    for k, (d, a, i, s, h) in enumerate(rows):
        m = make_med(name=f"Drug {k}, \"quoted\"", effects=(d, a, i), std=s, half_life=h)
        meds.append(m)
    cat = MedicationCatalog(meds)
    assert parse_catalog(serialize_catalog(cat)) == cat


def test_shipped_catalog_spot_rows():
    cat = load_default_catalog()
    assert cat["Venlafaxine"].onset_range == (28, 42)
    assert cat["Venlafaxine"].response_rate_range[0] == pytest.approx(0.672)
    assert cat["Pregabalin"].onset_range == (3, 3)
    assert cat["Lithium"].onset_range == (7, 21)
    assert cat["Lithium"].response_rate_range == pytest.approx((0.33, 0.33))
    assert cat["Selegiline"].response_rate_range == pytest.approx((0.33, 0.40))
    assert cat["Carbamazepine"].onset_range == (1, 3)
    # effect heuristic: half the response midpoint on treated conditions
    assert cat["Venlafaxine"].effect_mean == pytest.approx((0.336, 0.336, 0.0))
    assert cat["Pregabalin"].effect_mean == pytest.approx((0.0, 0.2, 0.0))
    assert cat["Clomipramine"].is_inert
    assert all(m.half_life == 7.0 for m in cat)
