"""Covariance matrix adaptation evolution strategy (maximisation by rank)."""
from __future__ import annotations

import numpy as np

EIG_FLOOR = 1e-12


class CMAES:
    """Standard CMA-ES with log-linear weights, CSA, rank-one and rank-mu updates.

    ``tell`` takes the last batch already sorted best first, so the same
    machinery serves objective ranking and archive-improvement ranking.
    """

    def __init__(self, mean, sigma: float, popsize: int = 36):
        mean = np.array(mean, dtype=np.float64)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        n = mean.size
        self.n = n
        self.popsize = int(popsize)
        self.mu = max(self.popsize // 2, 1)
        w = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        mueff = self.mueff
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))
        self.mean = mean
        self.sigma = float(sigma)
        self.C = np.eye(n)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.generation = 0
        self._eig()

    def _eig(self):
        self.C = (self.C + self.C.T) / 2
        d2, B = np.linalg.eigh(self.C)
        if d2.min() < EIG_FLOOR:
            # Repair a degenerate covariance by flooring its spectrum.
            d2 = np.maximum(d2, EIG_FLOOR)
            self.C = (B * d2) @ B.T
        self.B, self.D = B, np.sqrt(d2)
        self.invsqrtC = (B / self.D) @ B.T

    def ask(self, rng, popsize: int | None = None) -> np.ndarray:
        lam = self.popsize if popsize is None else popsize
        z = rng.standard_normal((lam, self.n))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, ranked) -> None:
        """Update from solutions sorted best first (at least ``mu`` rows)."""
        x = np.asarray(ranked, dtype=np.float64)[: self.mu]
        if len(x) < self.mu:
            raise ValueError(f"need at least {self.mu} ranked solutions")
        n, g = self.n, self.generation
        y = (x - self.mean) / self.sigma
        ymean = self.weights @ y
        self.mean = self.mean + self.sigma * ymean
        self.ps = (1 - self.cs) * self.ps + np.sqrt(self.cs * (2 - self.cs) * self.mueff) * (self.invsqrtC @ ymean)
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / np.sqrt(1 - (1 - self.cs) ** (2 * (g + 1))) / self.chi_n < 1.4 + 2 / (n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * np.sqrt(self.cc * (2 - self.cc) * self.mueff) * ymean
        rank_mu = (y.T * self.weights) @ y
        c1a = self.c1 * (1 - (1 - hsig) * self.cc * (2 - self.cc))
        self.C = ((1 - c1a - self.cmu) * self.C + self.c1 * np.outer(self.pc, self.pc)
                  + self.cmu * rank_mu)
        self.sigma *= np.exp(min(1.0, (self.cs / self.damps) * (ps_norm / self.chi_n - 1)))
        self.generation += 1
        self._eig()

    def should_stop(self) -> bool:
        """Numerical breakdown: ill conditioning, collapsed or exploded step."""
        if not np.all(np.isfinite(self.mean)) or not np.isfinite(self.sigma):
            return True
        if self.D.max() ** 2 / self.D.min() ** 2 > 1e14:
            return True
        spread = self.sigma * self.D.max()
        return spread < 1e-12 or spread > 1e8
