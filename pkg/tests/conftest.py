import numpy as np
import pytest

from pcprep.core import PointCloud

ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def oct_code(quad: str) -> int:
    """Embed a quadtree code (two bits per level, X then Y) as an octree code with Z=0."""
    assert len(quad) % 2 == 0
    bits = 0
    for i in range(0, len(quad), 2):
        bits = (bits << 3) | (int(quad[i]) << 2) | (int(quad[i + 1]) << 1)
    return bits


def quad_point(quad: str, frac=(0.5, 0.5)) -> tuple[float, float, float]:
    """Point inside the unit-square quadtree cell named by ``quad``, on the z=0 plane."""
    x = y = 0.0
    size = 1.0
    for i in range(0, len(quad), 2):
        size /= 2
        x += int(quad[i]) * size
        y += int(quad[i + 1]) * size
    return (x + frac[0] * size, y + frac[1] * size, 0.0)


@pytest.fixture
def letter_a():
    """Planar character-"A" cloud on a depth-3 quadtree.

    The original index 0 is the bottom-left seed at the origin.  The right leg
    ends at (1, 0), which pins the root square to the unit square.
    """
    cells = [
        "000000",  # seed corner
        "000011",
        "001100", "001101", "001101", "001101", "001101",
        "001111",
        "010110", "011100",
        "100101", "101010",
        "110001", "110010", "110010",
        "110011",
        "110100", "110100", "110101",
    ]
    pts = [quad_point(c) for c in cells]
    pts[0] = (0.0, 0.0, 0.0)
    # one point deep in the lower-left quarter of leaf 110011
    pts[cells.index("110011")] = quad_point("11001100")
    # spread the four points of 001101 inside their cell
    offs = iter([(0.2, 0.2), (0.7, 0.3), (0.3, 0.8), (0.8, 0.7)])
    for i, c in enumerate(cells):
        if c == "001101":
            pts[i] = quad_point(c, next(offs))
    pts[cells.index("101010")] = (1.0, 0.0, 0.0)
    return PointCloud(np.array(pts)), cells


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
