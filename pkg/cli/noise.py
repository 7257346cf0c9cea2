"""
Seeded noise for truth simulation and random test problems.

Algorithm (documented so other implementations can reproduce a run):

  uniform  – numpy PCG64 bit generator seeded with the scenario seed,
             doubles from ``Generator.random`` (53-bit, [0, 1)).
  normal   – Box-Muller on consecutive uniform pairs (u1, u2):
                 ρ  = √(−2 ln(1 − u1))
                 z0 = ρ cos(2π u2),  z1 = ρ sin(2π u2)
             emitted in the order z0, z1; an odd request discards the last z1.
  N(0, C)  – S z with S = V √max(Λ, 0) from the symmetric eigendecomposition
             C = V Λ Vᵀ.
"""

from __future__ import annotations

import numpy as np


class NoiseSource:
    """Deterministic uniform / normal stream for one seed."""

    ALGORITHM = "PCG64+box-muller"

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size: int) -> np.ndarray:
        return self._gen.random(size)

    def normal(self, size: int) -> np.ndarray:
        if size <= 0:
            return np.zeros(0)
        pairs = (size + 1) // 2
        u = self._gen.random(2 * pairs)
        rho = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = rho * np.cos(theta)
        z[1::2] = rho * np.sin(theta)
        return z[:size]

    def gaussian(self, cov: np.ndarray) -> np.ndarray:
        """One draw from N(0, cov)."""
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        if cov.size == 0:
            return np.zeros(0)
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        root = vecs * np.sqrt(np.maximum(vals, 0.0))
        return root @ self.normal(cov.shape[0])

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def spd(self, n: int, shift: float = 1.0) -> np.ndarray:
        """A Aᵀ + shift·I from a standard normal A."""
        a = self.matrix(n, n)
        p = a @ a.T + shift * np.eye(n)
        return 0.5 * (p + p.T)

    def conditioned_ud(self, n: int, exponent: float) -> tuple[np.ndarray, np.ndarray]:
        """Unit upper-triangular U (off-diagonals N(0, 1/n)) and D log-spaced from 1 to 10^-exponent.

        U D Uᵀ has a condition number near 10^exponent, and it is built from
        factors so no decomposition is needed to start a UD filter from it.
        """
        u = np.eye(n) + np.triu(self.matrix(n, n), 1) / np.sqrt(n)
        d = np.logspace(0.0, -exponent, n)
        return u, d
