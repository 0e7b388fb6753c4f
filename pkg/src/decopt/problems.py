"""Stochastic first-order oracles held by the agents.

Two families are provided. The streaming least-squares family mirrors the
synthetic experiments (Gaussian features, optional variance spike on the
first coordinate); the heterogeneous quadratic family gives each agent its
own closed-form objective, which is what the tracking and brute-force tests
want.

Every sampling call is a pure function of (agent, t) and the seeds: the
draws come from per-agent counter-based streams (see ``_rng``), never from
shared mutable RNG state.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from . import _rng
from .errors import ConfigError, NumericalError

__all__ = [
    "Problem",
    "LeastSquares",
    "HeterogeneousQuadratic",
    "make_least_squares",
    "random_quadratic",
    "make_problem",
    "PROBLEM_KINDS",
]

PROBLEM_KINDS = ("lsq", "lsq_spike", "hetero_quad")


class Problem(ABC):
    """Distributed objective f(x) = (1/n) sum_i f_i(x) with per-agent sampling."""

    d: int
    n_agents: int

    @abstractmethod
    def sample_grad(self, agent: int, x: np.ndarray, t: int) -> np.ndarray:
        """One stochastic gradient for ``agent`` at iterate ``x``, iteration ``t``."""

    @abstractmethod
    def exact_grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the expected global objective at ``x``."""

    @abstractmethod
    def exact_loss(self, x: np.ndarray) -> float:
        """Expected global objective value at ``x``."""

    @abstractmethod
    def finite_test_loss(self, x: np.ndarray, n_test: int, seed: int) -> float:
        """Empirical loss over a fixed seeded evaluation set."""

    def _check_iterate(self, x: np.ndarray, t: int):
        if x.shape != (self.d,):
            raise ValueError(f"iterate shape {x.shape} does not match d={self.d}")
        # A non-finite coordinate always makes the plain sum non-finite.
        if not math.isfinite(x.sum()):
            raise NumericalError(
                f"non-finite iterate passed to sample_grad at iteration {t}",
                iteration=t,
            )

    def _check_agent(self, agent: int):
        if not 0 <= agent < self.n_agents:
            raise IndexError(f"agent {agent} out of range [0, {self.n_agents})")


class LeastSquares(Problem):
    """Streaming least squares min E[(y - x^T theta)^2] with Gaussian features.

    Each sample draws features x ~ N(0, diag(cov_diag)) and a label
    y = x^T theta_star + eps with eps ~ N(0, noise_sigma^2). The gradient
    keeps the factor 2 of the squared loss (no 1/2 convention):

        g(theta) = (2/B) sum_b x_b (x_b^T theta - y_b)
        E g(theta) = 2 diag(cov_diag) (theta - theta_star)
        E loss     = (theta - theta_star)^T diag(cov_diag) (theta - theta_star)
                     + noise_sigma^2

    Agents share theta_star and the covariance; heterogeneity across agents
    comes only from their independent sampling streams.
    """

    def __init__(
        self,
        theta_star: np.ndarray,
        cov_diag: np.ndarray,
        n_agents: int,
        noise_sigma: float = 0.0,
        batch_size: int = 1,
        seed: int | tuple[int, ...] = 0,
    ):
        theta_star = np.asarray(theta_star, dtype=float)
        cov_diag = np.asarray(cov_diag, dtype=float)
        if theta_star.ndim != 1 or theta_star.shape != cov_diag.shape:
            raise ConfigError("theta_star and cov_diag must be 1-d with equal length")
        if np.any(cov_diag <= 0):
            raise ConfigError("cov_diag entries must be positive")
        if noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        self.d = theta_star.size
        self.n_agents = n_agents
        self.theta_star = theta_star
        self.cov_diag = cov_diag
        self.noise_sigma = float(noise_sigma)
        self.batch_size = int(batch_size)
        entropy = seed if isinstance(seed, tuple) else (seed,)
        self._streams = _rng.AgentStreams((_rng.DATA, *entropy), n_agents)
        self._sqrt_cov = np.sqrt(cov_diag)

    @property
    def smoothness_diag(self) -> float:
        """Lipschitz constant of the expected gradient; diagnostic only, never fed to algorithms."""
        return 2.0 * float(self.cov_diag.max())

    def sample_grad(self, agent, x, t):
        self._check_agent(agent)
        self._check_iterate(x, t)
        rng = self._streams.generator(agent, t)
        b = self.batch_size
        block = rng.standard_normal((b, self.d + 1))  # features | label noise
        feats = block[:, : self.d] * self._sqrt_cov
        y = feats @ self.theta_star + self.noise_sigma * block[:, self.d]
        return (2.0 / b) * (feats.T @ (feats @ x - y))

    def exact_grad(self, x):
        return 2.0 * self.cov_diag * (x - self.theta_star)

    def exact_loss(self, x):
        err = x - self.theta_star
        return float(self.cov_diag @ (err * err)) + self.noise_sigma**2

    def finite_test_loss(self, x, n_test, seed):
        if n_test < 1:
            raise ConfigError(f"n_test must be >= 1, got {n_test}")
        rng = _rng.one_shot(_rng.EVALUATION, seed)
        feats = rng.standard_normal((n_test, self.d)) * self._sqrt_cov
        y = feats @ self.theta_star + self.noise_sigma * rng.standard_normal(n_test)
        resid = y - feats @ x
        return float(np.mean(resid * resid))


class HeterogeneousQuadratic(Problem):
    """Per-agent quadratics f_i(x) = 1/2 x^T A_i x + b_i^T x with additive gradient noise.

    Every expectation is closed-form, so this family backs the brute-force
    and tracking oracles. With noise_sigma = 0 the gradients are fully
    deterministic.
    """

    def __init__(self, a_mats, b_vecs, noise_sigma: float = 0.0,
                 seed: int | tuple[int, ...] = 0):
        a_mats = np.asarray(a_mats, dtype=float)
        b_vecs = np.asarray(b_vecs, dtype=float)
        if a_mats.ndim != 3 or a_mats.shape[1] != a_mats.shape[2]:
            raise ConfigError("a_mats must have shape (n_agents, d, d)")
        if b_vecs.shape != a_mats.shape[:2]:
            raise ConfigError("b_vecs must have shape (n_agents, d)")
        if not np.allclose(a_mats, a_mats.transpose(0, 2, 1)):
            raise ConfigError("each A_i must be symmetric")
        if noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
        self.n_agents, self.d = b_vecs.shape
        self.a_mats = a_mats
        self.b_vecs = b_vecs
        self.noise_sigma = float(noise_sigma)
        self._a_mean = a_mats.mean(axis=0)
        self._b_mean = b_vecs.mean(axis=0)
        entropy = seed if isinstance(seed, tuple) else (seed,)
        self._streams = _rng.AgentStreams((_rng.DATA, *entropy), self.n_agents)

    def sample_grad(self, agent, x, t):
        self._check_agent(agent)
        self._check_iterate(x, t)
        g = self.a_mats[agent] @ x + self.b_vecs[agent]
        if self.noise_sigma > 0:
            g = g + self.noise_sigma * self._streams.generator(agent, t).standard_normal(self.d)
        return g

    def exact_grad(self, x):
        return self._a_mean @ x + self._b_mean

    def exact_loss(self, x):
        return float(0.5 * x @ (self._a_mean @ x) + self._b_mean @ x)

    def finite_test_loss(self, x, n_test, seed):
        # The objective itself is deterministic; there is no held-out data set.
        return self.exact_loss(x)


def make_least_squares(
    d: int,
    n_agents: int,
    spike: bool = False,
    noise_sigma: float = 0.1,
    batch_size: int = 1,
    theta_star_seed: int = 0,
    seed: int | tuple[int, ...] = 0,
) -> LeastSquares:
    """Least-squares instance with seeded standard-normal theta_star.

    ``spike=True`` sets the first feature variance to 100 (the rest stay 1),
    which inflates the objective's curvature along that coordinate.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    theta_star = _rng.one_shot(_rng.THETA_STAR, theta_star_seed).standard_normal(d)
    cov_diag = np.ones(d)
    if spike:
        cov_diag[0] = 100.0
    return LeastSquares(theta_star, cov_diag, n_agents, noise_sigma, batch_size, seed)


def random_quadratic(
    d: int,
    n_agents: int,
    noise_sigma: float = 0.0,
    instance_seed: int = 0,
    seed: int | tuple[int, ...] = 0,
) -> HeterogeneousQuadratic:
    """Random symmetric A_i and b_i, genuinely different per agent."""
    rng = _rng.one_shot(_rng.THETA_STAR, instance_seed)
    m = rng.standard_normal((n_agents, d, d)) / math.sqrt(d)
    a_mats = (m + m.transpose(0, 2, 1)) / 2.0
    b_vecs = rng.standard_normal((n_agents, d))
    return HeterogeneousQuadratic(a_mats, b_vecs, noise_sigma, seed)


def make_problem(
    kind: str,
    d: int,
    n_agents: int,
    noise_sigma: float = 0.1,
    batch_size: int = 1,
    theta_star_seed: int = 0,
    seed: int | tuple[int, ...] = 0,
) -> Problem:
    """Build a problem from its config key: lsq, lsq_spike or hetero_quad."""
    if kind == "lsq":
        return make_least_squares(d, n_agents, False, noise_sigma, batch_size,
                                  theta_star_seed, seed)
    if kind == "lsq_spike":
        return make_least_squares(d, n_agents, True, noise_sigma, batch_size,
                                  theta_star_seed, seed)
    if kind == "hetero_quad":
        return random_quadratic(d, n_agents, noise_sigma, theta_star_seed, seed)
    raise ConfigError(f"unknown problem kind {kind!r}; expected one of {PROBLEM_KINDS}")
