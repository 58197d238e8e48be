import os

import hypothesis
import numpy as np
import pytest

from config import Config
from data_collection.synthetic import ShiftSpec, generate_synthetic
from utils.logger import setup_logger

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    # Console only; the CLI's own setup_logger() calls become no-ops
    setup_logger(to_file=False, console_level="WARNING")


@pytest.fixture(autouse=True)
def no_progress_bars(monkeypatch):
    monkeypatch.setattr(Config, "PROGRESS", False)


@pytest.fixture
def shifted_dataset():
    """Small seeded dataset with the default domain shift"""
    return generate_synthetic(400, 200, Config.default_shift(seed=3))


@pytest.fixture
def null_shift_dataset():
    shift = ShiftSpec(mean_offset_scale=0.0, feature_gain_spread=0.0,
                      noise_sigma_source=1.0, noise_sigma_target=1.0, seed=5)
    return generate_synthetic(400, 200, shift)
