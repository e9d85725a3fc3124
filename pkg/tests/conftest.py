import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _CRITERIA.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


def random_orthogonal(rng, q):
    qmat, rmat = np.linalg.qr(rng.standard_normal((q, q)))
    return qmat * np.sign(np.diag(rmat))


def random_icm_loadings(rng, p, q, noise=0.15):
    """Block loadings with random salients and small random cross-loadings."""
    per = p // q
    lam = noise * rng.standard_normal((p, q))
    for j in range(q):
        lam[j * per:(j + 1) * per, j] = rng.uniform(0.4, 0.8, per)
    return lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
