import time

import numpy as np
import pytest

from convexflow.spectral import NCOMP, SpectralField

DESK_TIMES = [0.0, 0.2, 0.4, 0.6, 0.9]


def random_field(rng, K, rank="scalar", nmodes=12, mean=True, scale=1.0):
    """Real band-limited field with random coefficients at random modes."""
    modes = rng.integers(-K, K + 1, size=(nmodes, 3))
    C = NCOMP[rank]
    c = (rng.standard_normal((nmodes, C)) + 1j * rng.standard_normal((nmodes, C))) * scale
    f = SpectralField.from_modes(np.vstack([modes, -modes]), np.vstack([c, c.conj()]), rank)
    if not mean:
        from convexflow.spectral import project_nonzero
        f = project_nonzero(f)
    return f


def random_solenoidal(rng, K, nmodes=12, scale=1.0):
    from convexflow.spectral import leray_project, project_nonzero
    return leray_project(project_nonzero(random_field(rng, K, "vector", nmodes, scale=scale)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_run():
    """One perturbation step from the shear bootstrap at the desk parameters."""
    from convexflow.iteration import run_iteration
    from convexflow.params import desk_params
    from convexflow.step import bootstrap, shear_flow
    t0 = time.perf_counter()
    state = bootstrap(shear_flow(DESK_TIMES))
    res = run_iteration(state, n_steps=1, params_list=[desk_params()])
    return {"initial": state, "result": res, "seconds": time.perf_counter() - t0}


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
