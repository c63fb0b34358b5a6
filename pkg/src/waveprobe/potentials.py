"""Standard test potentials on the space-time grid."""

from __future__ import annotations

import numpy as np

from .grid import GridError, SpaceTimeGrid

TIME_PROFILES = ("const", "sin")


def _bump_profile(grid: SpaceTimeGrid, radius: float, center) -> np.ndarray:
    xs = grid.space_coords
    center = np.broadcast_to(np.asarray(center, float), (grid.n_space,))
    d2 = sum((x - c) ** 2 for x, c in zip(xs, center)) / radius**2
    inside = d2 < 1.0
    out = np.zeros(grid.space_shape)
    # normalized so the peak value is 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - d2[inside]))
    return out


def bump(grid: SpaceTimeGrid, amp: float = 1.0, radius: float = 0.3, center=0.5,
         time: str = "const", t_on: float = 0.0, t_off: float | None = None) -> np.ndarray:
    """C-infinity bump in x times a time profile, zero outside [t_on, t_off).

    ``time="sin"`` multiplies by sin(pi t / T); ``"const"`` leaves it flat.
    """
    if radius <= 0:
        raise GridError("bump radius must be > 0")
    if time not in TIME_PROFILES:
        raise GridError(f"unknown time profile {time!r}")
    t = grid.t
    prof = np.sin(np.pi * t / grid.T) if time == "sin" else np.ones_like(t)
    t_off = grid.T + 1.0 if t_off is None else t_off
    prof = np.where((t >= t_on) & (t < t_off), prof, 0.0)
    b = _bump_profile(grid, radius, center)
    return amp * prof.reshape((-1,) + (1,) * grid.n_space) * b[None]


def mode(grid: SpaceTimeGrid, xi, amp: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """amp cos(xi.(t,x) + phase) on Q."""
    xi = np.asarray(xi, float)
    if xi.shape != (grid.n_space + 1,):
        raise GridError(f"mode frequency needs {grid.n_space + 1} components")
    arg = xi[0] * grid.time_column() + np.zeros(grid.shape)
    for a, xa in enumerate(grid.space_coords):
        arg = arg + xi[a + 1] * xa[None]
    return amp * np.cos(arg + phase)
