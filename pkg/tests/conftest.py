import numpy as np
import pytest

from wafergpt.model import ModelConfig

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"[acceptance {number}] {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def tiny_config():
    return ModelConfig(seq_len=9, d_model=4, n_heads=2, n_layers=2, resolution=7, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class _CvdRuns:
    """Full-model CVD replica runs, trained once per session and shared."""

    def __init__(self):
        self._runs = {}

    def __call__(self, seed: int):
        if seed not in self._runs:
            from wafergpt.experiments import CVD_EPOCHS, run_experiment
            from wafergpt.faults import cvd_replica
            from wafergpt.train import TrainConfig

            rep = cvd_replica(seed)
            cfg = ModelConfig(seq_len=rep.train.seq_len, seed=seed)
            res = run_experiment(rep.train, rep.test, cfg, TrainConfig(epochs=CVD_EPOCHS, seed=seed),
                                 rep.manifest)
            self._runs[seed] = (rep, res)
        return self._runs[seed]


@pytest.fixture(scope="session")
def cvd_runs():
    return _CvdRuns()
