import numpy as np
import pytest

from stabfem.mesh import Mesh, generate_structured


def jittered(nx, ny, rect=(-1.0, 1.0, -1.0, 1.0), amount=0.2, seed=0):
    """Structured mesh with randomly displaced interior vertices."""
    base = generate_structured(nx, ny, rect)
    rng = np.random.default_rng(seed)
    v = base.vertices.copy()
    interior = np.setdiff1d(np.arange(base.num_nodes), base.boundary_nodes)
    hx = (rect[1] - rect[0]) / nx
    hy = (rect[3] - rect[2]) / ny
    v[interior] += rng.uniform(-amount, amount, (len(interior), 2)) * [hx, hy]
    return Mesh(v, base.triangles.copy(), base.boundary_nodes.copy(), base.domain)


@pytest.fixture
def unit_pair():
    """Two triangles on the unit square."""
    return generate_structured(1, 1, (0.0, 1.0, 0.0, 1.0))


@pytest.fixture
def small_mesh():
    return jittered(4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
