import numpy as np
import pytest

from ves_bo.gp_model import GpPosterior, KernelSpec, ObservationSet, kernel_matrix


def prior_draw_observations(rng, n, d, lengthscale=0.3, signal_variance=1.0):
    """Noiseless observations of one exact prior draw at ``n`` uniform points."""
    x = rng.uniform(size=(n, d))
    kern = KernelSpec(np.full(d, lengthscale), signal_variance)
    k = kernel_matrix(x, x, kern) + 1e-10 * np.eye(n)
    y = np.linalg.cholesky(k) @ rng.standard_normal(n)
    return ObservationSet(x, y)


def conditioned_gp(rng, n, d, lengthscale=0.3, jitter=1e-10):
    obs = prior_draw_observations(rng, n, d, lengthscale)
    return GpPosterior.condition(obs, KernelSpec(np.full(d, lengthscale), 1.0, jitter))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gp_1d_three():
    """A 1-d posterior with three observations, used for bound and density checks."""
    obs = ObservationSet(np.array([[0.15], [0.5], [0.8]]), np.array([0.2, 1.0, -0.3]))
    return GpPosterior.condition(obs, KernelSpec(np.array([0.2]), 1.0, 1e-10))


# ---------------------------------------------------------------------------
# acceptance verdicts: one PASS/FAIL line per criterion in the terminal summary
# ---------------------------------------------------------------------------

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record ``(criterion, passed, detail)``; a test that dies first is recorded as FAIL."""
    table = request.config.stash[_VERDICTS]
    number = request.node.get_closest_marker("criterion").args[0]

    def record(passed, detail):
        table[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    yield record
    table.setdefault(number, (False, "no verdict (test raised before the check)"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_VERDICTS, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
