import numpy as np
import pytest

from ais_sentinel import kernels


BACKENDS = ["numpy"] + (["numba"] if kernels.numba_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the module-level kernels through one backend for the test's duration."""
    ns = kernels.load_backend(request.param)
    monkeypatch.setattr(kernels, "_active", ns)
    return ns


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_reports():
    """Decoded reports of a small simulated fleet, shared across test modules."""
    from ais_sentinel.codec import decode_lines
    from ais_sentinel.simgen import generate_scenario

    scenario = generate_scenario(n_vessels=10, duration=2400.0, seed=3, name="tiny")
    reports, stats = decode_lines(f"{t}\t{line}" for t, line in scenario.run())
    assert stats.rejected_total == 0
    return reports


@pytest.fixture(scope="session")
def tiny_dataset_3c(tiny_reports):
    from ais_sentinel.pipeline import PrepConfig, encode_dataset, prepare_samples

    cfg = PrepConfig(mode="3-class")
    samples, _ = prepare_samples(tiny_reports, cfg, seed=0)
    return encode_dataset(samples, cfg)
