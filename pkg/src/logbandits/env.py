"""Counter-keyed Bernoulli reward environment."""

from __future__ import annotations

import numpy as np

from .core import LogisticDataset, link_mu


class RewardEnv:
    """Bernoulli(mu(x^T theta*)) rewards with replayable randomness.

    Every sampling request ``(arm, count)`` gets the next draw index ``i`` and
    is answered from a generator keyed by ``(seed, i)``, so the outcome of
    request ``i`` depends on nothing but the seed and ``i``. Large requests
    are answered with one binomial draw, which keeps 10^9-sample rounds cheap.
    """

    def __init__(self, theta_star, seed):
        self.theta_star = np.asarray(theta_star, dtype=float).reshape(-1)
        self.seed = int(seed)
        self.draws = 0
        self.samples = 0

    def _rng(self, index):
        return np.random.default_rng([self.seed, index])

    def pull(self, arm, count=1):
        """Number of successes in ``count`` pulls of ``arm``."""
        p = float(link_mu(np.asarray(arm, dtype=float) @ self.theta_star))
        rng = self._rng(self.draws)
        self.draws += 1
        self.samples += int(count)
        return int(rng.binomial(int(count), p))

    def sample(self, arms, counts, tag=""):
        """Dataset with ``counts[i]`` pulls of ``arms[i]`` (zero-count rows dropped)."""
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        counts = np.asarray(counts, dtype=np.int64)
        keep = np.flatnonzero(counts > 0)
        succ = np.array([self.pull(arms[i], counts[i]) for i in keep], dtype=np.int64)
        tags = (tag,) * keep.size if tag else ()
        return LogisticDataset(arms[keep], counts[keep], succ.reshape(-1), tags)
