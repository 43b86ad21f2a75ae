import numpy as np
import pytest

from deepesn.data import ClassLabel, Sequence, Dataset
from deepesn.reservoir import DeepEsnConfig, build_stack


@pytest.fixture
def small_config():
    return DeepEsnConfig(
        num_layers=3,
        units_per_layer=12,
        leak_rates=(0.3, 0.3, 0.3),
        input_scaling=0.8,
        inter_layer_scaling=0.6,
        spectral_radius=0.9,
        input_dim=4,
        master_seed=101,
    )


@pytest.fixture
def small_stack(small_config):
    return build_stack(small_config)


def make_dataset(n_per_class=4, length=30, seed=0, separation=2.0):
    """Tiny labeled dataset whose classes differ by a constant offset on
    every channel; linearly separable from mean states at any scale."""
    rng = np.random.default_rng(seed)
    sequences = []
    for label, prefix, shift in (
        (ClassLabel.CONTROL, "c", -separation / 2),
        (ClassLabel.PD, "p", separation / 2),
    ):
        for i in range(n_per_class):
            channels = rng.uniform(-0.5, 0.5, (4, length)) + shift
            sequences.append(
                Sequence(subject_id=f"{prefix}{i:02d}", label=label, channels=channels)
            )
    return Dataset(sequences=tuple(sequences), provenance=f"fixture|seed={seed}", test_id=-1)


@pytest.fixture
def offset_dataset():
    return make_dataset()
