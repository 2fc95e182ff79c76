import numpy as np
import pytest

from nvmag.bath import (
    BathRealization,
    LatticeConfig,
    NuclearSpin,
    generate_lattice_sites,
    nuclear_dipolar_coupling,
    sample_bath,
)

_ACCEPTANCE_ATTR = "_acceptance_lines"


@pytest.fixture(scope="session")
def criterion_log(pytestconfig):
    """Shared sink for acceptance verdict lines, echoed in the run summary."""
    if not hasattr(pytestconfig, _ACCEPTANCE_ATTR):
        setattr(pytestconfig, _ACCEPTANCE_ATTR, [])
    return getattr(pytestconfig, _ACCEPTANCE_ATTR)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, _ACCEPTANCE_ATTR, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_sites():
    """Lattice sites within a 1.5 nm ball: enough for few-spin baths."""
    return generate_lattice_sites(LatticeConfig(cutoff_radius=1.5))


@pytest.fixture(scope="session")
def full_sites():
    """Lattice sites at the production 4 nm cutoff."""
    return generate_lattice_sites(LatticeConfig())


def make_tiny_bath(n_spins: int, seed: int = 7, spread_nm: float = 0.6) -> BathRealization:
    """A hand-rolled bath of n random nearby nuclei with all pair couplings.

    Positions are drawn directly (not from the lattice) so tests control
    the spin count exactly; couplings use the production dipolar form.
    """
    from nvmag.bath import hyperfine_vector

    rng = np.random.default_rng(seed)
    positions = []
    while len(positions) < n_spins:
        p = rng.uniform(-spread_nm, spread_nm, size=3)
        if np.linalg.norm(p) > 0.2:
            positions.append(p)
    spins = [
        NuclearSpin(tuple(p), tuple(hyperfine_vector(p))) for p in positions
    ]
    pairs = {
        (i, j): nuclear_dipolar_coupling(positions[i], positions[j])
        for i in range(n_spins)
        for j in range(i + 1, n_spins)
    }
    return BathRealization(spins=spins, pair_couplings=pairs, seed=seed)


@pytest.fixture()
def bath2():
    return make_tiny_bath(2)


@pytest.fixture()
def bath3():
    return make_tiny_bath(3)
