"""Independent reference implementations used only by the tests."""
import numpy as np


def fps_quadratic(xyz, original_index, K, seed_pos):
    """FPS recomputing every point's distance to every pick at each step (no cache)."""
    n = len(xyz)
    picks = [seed_pos]
    unpicked = np.ones(n, dtype=bool)
    unpicked[seed_pos] = False
    while len(picks) < K:
        cand = np.flatnonzero(unpicked)
        chosen = xyz[picks]
        dx = xyz[cand, None, 0] - chosen[None, :, 0]
        dy = xyz[cand, None, 1] - chosen[None, :, 1]
        dz = xyz[cand, None, 2] - chosen[None, :, 2]
        nearest = ((dx * dx + dy * dy) + dz * dz).min(axis=1)
        best = nearest.max()
        ties = cand[nearest == best]
        nxt = int(ties[np.argmin(original_index[ties])])
        picks.append(nxt)
        unpicked[nxt] = False
    return picks


def coverage_scan(xyz, picks):
    """Nearest-pick distance for every point, one point at a time."""
    worst = 0.0
    centres = xyz[np.asarray(picks)]
    for p in xyz:
        worst = max(worst, float(np.sqrt(((centres - p) ** 2).sum(1)).min()))
    return worst
