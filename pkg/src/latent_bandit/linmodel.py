"""Per-arm incremental ridge regression with UCB scoring.

Each arm keeps a precision matrix A (starting at reg * I, growing by rank-1
outer products) and a moment vector b; the point estimate solves A theta = b.
A is stored explicitly and linear systems are solved per query -- at the
feature dimensions used here (d <= ~10) that is cheap and avoids the drift
of maintaining an explicit inverse.
"""

from __future__ import annotations

import numpy as np


class ArmLinearModel:
    """Ridge model for one arm: score, predict, sample, rank-1 update."""

    def __init__(self, dim: int, reg: float = 1.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if reg <= 0.0:
            raise ValueError("reg must be positive")
        self.dim = int(dim)
        self.reg = float(reg)
        self.precision = self.reg * np.eye(self.dim)
        self.moment = np.zeros(self.dim)
        self._theta = np.zeros(self.dim)
        self._theta_fresh = True

    def _check_phi(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.dim,):
            raise ValueError(f"context has shape {phi.shape}, expected ({self.dim},)")
        return phi

    @property
    def theta(self) -> np.ndarray:
        if not self._theta_fresh:
            self._theta = np.linalg.solve(self.precision, self.moment)
            self._theta_fresh = True
        return self._theta

    def update(self, phi, reward: float):
        phi = self._check_phi(phi)
        self.precision += np.outer(phi, phi)
        self.moment += reward * phi
        self._theta_fresh = False

    def predict(self, phi) -> tuple[float, float]:
        """Point prediction and its model variance phi' A^-1 phi."""
        phi = self._check_phi(phi)
        x = np.linalg.solve(self.precision, phi)
        return float(self.theta @ phi), float(phi @ x)

    def ucb_score(self, phi, alpha: float) -> float:
        mean, var = self.predict(phi)
        return mean + alpha * np.sqrt(var)

    def sample_parameters(self, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
        """Draw theta ~ Normal(theta_hat, noise_scale^2 * A^-1).

        With A = L L', solving L' y = z for z ~ N(0, I) gives y with
        covariance A^-1.
        """
        z = rng.standard_normal(self.dim)
        if noise_scale == 0.0:
            return self.theta.copy()
        chol = np.linalg.cholesky(self.precision)
        y = np.linalg.solve(chol.T, z)
        return self.theta + noise_scale * y
