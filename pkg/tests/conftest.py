import numpy as np
import pytest

from iqabench import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # one-time numba compilation so per-test timings measure the operation
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_int_image(rng, height, width, lo=0, hi=256):
    return rng.integers(lo, hi, size=(height, width)).astype(np.float64)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if report.passed:
            print(f"\n[ACCEPTANCE] {name}: PASS", flush=True)
        elif report.failed:
            print(f"\n[ACCEPTANCE] {name}: FAIL", flush=True)
