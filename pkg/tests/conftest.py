import numpy as np
import pytest

from fedgh.config import ExperimentConfig
from fedgh.nn import FeatureExtractor, PredictionHeader, SplitModel


def make_model(seed, d_x=6, hidden=(8,), d_r=5, d_y=4, header_hidden=()):
    rng = np.random.default_rng(seed)
    ext = FeatureExtractor.build(d_x, list(hidden), d_r, rng)
    head = PredictionHeader.build(d_r, d_y, rng, list(header_hidden))
    for p in ext.parameters() + head.parameters():
        # non-zero biases so the bias paths are exercised
        if p.ndim == 1:
            p[:] = rng.normal(0, 0.1, size=p.shape)
    return SplitModel(ext, head)


@pytest.fixture
def small_config():
    """A fast heterogeneous run: 4 clients, 4 classes, a handful of rounds."""
    return ExperimentConfig(
        n_clients=4, participation=1.0, rounds=4, epochs=2, batch=16,
        input_dim=6, rep_dim=5, num_classes=4, classes_per_client=2,
        per_class_samples=40, hidden_sizes=[[8], [12, 6], [4]], seed=7,
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
