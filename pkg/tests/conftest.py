import numpy as np
import pytest

import phonoradar as pr


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_test_subject(seed=3, f0=150.0, tau_samples=2, duration=1.0,
                      rate=2000.0, k_d=0.8, jitter=0.0, lead_in=0.05):
    glottal = pr.GlottalConfig(f0_hz=f0, open_quotient=0.6, jitter_pct=jitter)
    neck = pr.NeckChannel(k_d=k_d, tau_d_s=tau_samples / rate)
    tract = pr.random_vocal_tract(np.random.default_rng(seed), rate)
    return pr.make_subject(glottal, neck, tract, duration, rate, seed=seed,
                           lead_in_s=lead_in)


@pytest.fixture
def subject():
    return make_test_subject()
