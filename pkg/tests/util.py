"""Shared test helpers, including the brute-force 2-D feasibility oracle."""

from __future__ import annotations

import math

import numpy as np

from dpsla.feasibility import HalfSpace


def brute_force_margin(halfspaces: list[HalfSpace], grid_lim: float = 50.0,
                       grid_points: int = 101) -> float:
    """Smallest max-violation over a candidate set: a fine grid plus every
    pairwise intersection of constraint boundaries.

    Independent of the simplex path: the system is declared feasible iff some
    candidate satisfies every constraint within 1e-6. Any nonempty polyhedron
    from the generators below either contains a deep grid point or has a
    vertex, and vertices are exactly the pairwise boundary intersections.
    """
    A = np.stack([h.a for h in halfspaces])
    b = np.array([h.b for h in halfspaces])
    xs = np.linspace(-grid_lim, grid_lim, grid_points)
    gx, gy = np.meshgrid(xs, xs)
    cands = [np.column_stack([gx.ravel(), gy.ravel()])]
    inter = []
    for i in range(len(halfspaces)):
        for j in range(i + 1, len(halfspaces)):
            M = np.stack([A[i], A[j]])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            inter.append(np.linalg.solve(M, np.array([b[i], b[j]])))
    if inter:
        cands.append(np.stack(inter))
    C = np.vstack(cands)
    violations = C @ A.T - b
    return float(np.max(violations, axis=1).min())


def brute_force_feasible(halfspaces: list[HalfSpace]) -> bool:
    return brute_force_margin(halfspaces) <= 1e-6


def random_halfspace_system(rng: np.random.Generator, n_constraints: int) -> list[HalfSpace]:
    """Random 2-D systems whose interesting geometry stays near the origin."""
    out = []
    for _ in range(n_constraints):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        scale = rng.uniform(0.5, 2.0)
        a = scale * np.array([math.cos(ang), math.sin(ang)])
        anchor = rng.uniform(-20.0, 20.0, size=2)
        b = float(a @ anchor + rng.uniform(-3.0, 3.0))
        out.append(HalfSpace(a=a, b=b))
    return out
