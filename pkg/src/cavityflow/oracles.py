"""Independent reference computations used by the test and acceptance suites.

Three oracles: central finite differences of configuration-dependent
quantities, the separation-of-variables solution in a concentric annulus, and
the classical image system for a point vortex in a disk cavity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CavityFlowError


def fd_gradient(f, q: np.ndarray, h: float, richardson: bool = False) -> np.ndarray:
    """Central finite differences of f with respect to every coordinate of q.

    f maps a configuration vector to a scalar or array; the result gains one
    trailing axis of length len(q).  With ``richardson`` the two-step
    extrapolation (4 D_{h/2} - D_h) / 3 removes the leading h^2 error term.
    If a perturbed configuration is rejected the step is shrunk once by 10x.
    """
    q = np.asarray(q, dtype=float)

    def central(step):
        cols = []
        for k in range(q.size):
            e = np.zeros_like(q)
            e[k] = step
            cols.append((np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2.0 * step))
        return np.stack(cols, axis=-1)

    def attempt(step):
        try:
            return central(step)
        except CavityFlowError:
            return central(step / 10.0)

    if not richardson:
        return attempt(h)
    d_h = attempt(h)
    d_h2 = attempt(h / 2.0)
    return (4.0 * d_h2 - d_h) / 3.0


@dataclass
class AnnulusReference:
    """Closed-form fields for a disk of radius a centered in a cavity of radius R."""

    a: float
    R: float
    mode: str
    added_mass: float | None = None
    circulation_constant: float | None = None
    coeff_inner: float | None = None
    coeff_outer: float | None = None

    def potential(self, pts: np.ndarray):
        """Values and gradients of the reference field at points (x, y)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        r = np.hypot(x, y)
        if self.mode == "translation":
            A, B = self.coeff_inner, self.coeff_outer
            # phi = (A r + B / r) cos(theta) = A x + B x / r^2
            vals = A * x + B * x / r**2
            gx = A + B * (y * y - x * x) / r**4
            gy = -2.0 * B * x * y / r**4
            return vals, np.stack([gx, gy], axis=-1)
        vals = np.log(r / self.R) / (2.0 * np.pi)
        g = pts / (2.0 * np.pi * r[:, None] ** 2)
        return vals, g


def annulus_series(a: float, R: float, mode: str) -> AnnulusReference:
    """Reference solution in the annulus a < r < R.

    ``translation``: the potential of the inner disk moving with unit velocity
    along x, with the classical added mass pi a^2 (R^2 + a^2) / (R^2 - a^2).
    ``circulation``: the stream of unit (negative-flux-normalized) circulation
    around the inner disk, log(r/R) / 2 pi, whose boundary constant on the
    inner circle is log(a/R) / 2 pi.

    The boundary data closes at a single angular mode, so the series needs no
    truncation parameter.
    """
    if not 0 < a < R:
        raise ValueError("annulus requires 0 < a < R")
    if mode == "translation":
        # (A r + B/r) cos(theta) with d/dr = 1 at r=a (unit body velocity,
        # normal derivative matching) and d/dr = 0 at r=R
        B = a * a * R * R / (a * a - R * R)
        A = B / (R * R)
        added = np.pi * a * a * (R * R + a * a) / (R * R - a * a)
        return AnnulusReference(
            a=a, R=R, mode=mode, added_mass=added, coeff_inner=A, coeff_outer=B
        )
    if mode == "circulation":
        C = np.log(a / R) / (2.0 * np.pi)
        return AnnulusReference(a=a, R=R, mode=mode, circulation_constant=C)
    raise ValueError(f"unknown annulus mode {mode!r}")


def image_vortex_disk(d: float, cavity_radius: float):
    """Speed and orbital period of a unit vortex at radius d inside a disk cavity.

    The image vortex at the inverse point gives tangential speed
    d / (2 pi (b^2 - d^2)); the orbit is the circle of radius d, traversed
    counterclockwise for positive circulation.
    """
    b = cavity_radius
    if not 0 <= d < b:
        raise ValueError("vortex must sit strictly inside the cavity")
    if d == 0.0:
        return 0.0, np.inf
    speed = d / (2.0 * np.pi * (b * b - d * d))
    period = 2.0 * np.pi * d / speed
    return speed, period
