import numpy as np
import pytest

from fluentrx.pharmacology import Medication


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_med(name="TestMed", effects=(0.0, 0.0, 0.0), std=0.0, half_life=7.0,
             time_to_effect=0):
    return Medication(
        name=name,
        onset_text=f"{time_to_effect} days",
        onset_range=(time_to_effect, time_to_effect),
        response_text="50%",
        response_rate_range=(0.5, 0.5),
        conditions="Depression",
        effect_mean=tuple(effects),
        effect_std=(std, std, std),
        half_life=half_life,
        time_to_effect=time_to_effect,
    )


@pytest.fixture
def med_factory():
    return make_med
