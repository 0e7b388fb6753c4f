"""One-iteration steppers for the four decentralized methods.

State convention: row i of every (n, d) matrix belongs to agent i, and a
communication round is the row-mixing product W @ A (row_i <- sum_j W_ij
row_j). Per iteration t the updates are:

    dsgd    x_i <- sum_j W_ij (x_j - eta_t g_j(x_j, t))

    dsgt    x_i <- sum_j W_ij (x_j - eta_t u_j)
            v_i' = g_i(x_i', t+1)                (sampled at the NEW iterate)
            u_i <- sum_j W_ij u_j + v_i' - v_i

    dnasa   local:  x~ = x - eta_t z/||z||       (zero rows step nowhere)
                    v' = g(x, t)                 (sampled at the OLD iterate)
                    u~ = u + v' - v
                    z~ = (1 - alpha_t) z + alpha_t u~
            then    x, u, z <- mixed x~, u~, z~

    dasagt  dnasa without the normalization: x~ = x - eta_t z

The tracker construction makes the row-mean of U equal the row-mean of the
latest sampled gradients after every step (u-bar = v-bar); with ``check=True``
the steppers assert this identity, the averaged-iterate recursions, and the
one-step consensus contraction on every call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantViolation, NumericalError
from .problems import Problem
from .topology import MixingMatrix

__all__ = [
    "ALGORITHMS",
    "SwarmState",
    "init_state",
    "normalize_rows",
    "consensus_sq",
    "dsgd_step",
    "dsgt_step",
    "dnasa_step",
    "dasagt_step",
    "step",
]

ALGORITHMS = ("dsgd", "dsgt", "dasagt", "dnasa")

# Relative tolerance for the averaged-state identities.
IDENTITY_RTOL = 1e-9


@dataclass
class SwarmState:
    """Full multi-agent state; matrices absent for an algorithm stay None."""

    t: int
    x: np.ndarray
    v: np.ndarray | None = None
    u: np.ndarray | None = None
    z: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def init_state(algorithm: str, problem: Problem, n: int, d: int) -> SwarmState:
    """Initial state at the origin.

    dsgt seeds both the tracker and the gradient memory with a first sample
    at x = 0 (consuming stream slice t = 0); dnasa/dasagt start all matrices
    at exactly zero and draw their first sample inside the first step.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if n != problem.n_agents or d != problem.d:
        raise ConfigError(
            f"state shape ({n}, {d}) does not match problem ({problem.n_agents}, {problem.d})"
        )
    x = np.zeros((n, d))
    if algorithm == "dsgd":
        return SwarmState(t=0, x=x)
    if algorithm == "dsgt":
        g0 = _sample_all(problem, x, 0)
        return SwarmState(t=0, x=x, v=g0, u=g0.copy())
    return SwarmState(t=0, x=x, v=np.zeros((n, d)), u=np.zeros((n, d)), z=np.zeros((n, d)))


def normalize_rows(z: np.ndarray) -> np.ndarray:
    """Each row divided by its Euclidean norm; zero rows stay zero."""
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return np.divide(z, norms, out=np.zeros_like(z), where=norms > 0.0)


def consensus_sq(a: np.ndarray) -> float:
    """Squared Frobenius distance from the stack to its row-repeated mean."""
    dev = a - a.mean(axis=0)
    return float(np.sum(dev * dev))


def dsgd_step(state: SwarmState, mixing: MixingMatrix, eta_t: float,
              problem: Problem, check: bool = False) -> SwarmState:
    """Gossip-averaged stochastic gradient step."""
    w = mixing.w
    g = _sample_all(problem, state.x, state.t)
    x_new = w @ (state.x - eta_t * g)
    _require_finite(x_new, "dsgd", state.t)
    state.x = x_new
    state.t += 1
    return state


def dsgt_step(state: SwarmState, mixing: MixingMatrix, eta_t: float,
              problem: Problem, check: bool = False) -> SwarmState:
    """Gradient-tracking step: mix the gradient-step iterates, refresh trackers."""
    _require_tracker(state, "dsgt")
    w = mixing.w
    if check:
        xbar_pre = state.x.mean(axis=0)
        ubar_pre = state.u.mean(axis=0)
    x_new = w @ (state.x - eta_t * state.u)
    v_new = _sample_all(problem, x_new, state.t + 1)
    u_new = w @ state.u + v_new - state.v
    _require_finite(x_new, "dsgt", state.t)
    state.x, state.u, state.v = x_new, u_new, v_new
    state.t += 1
    if check:
        _check_finite_stack(state, "dsgt")
        _check_identity("tracker mean equals gradient mean (u-bar = v-bar)",
                        "dsgt", state.t, u_new.mean(axis=0), v_new.mean(axis=0))
        _check_identity("averaged iterate recursion (x-bar' = x-bar - eta u-bar)",
                        "dsgt", state.t, x_new.mean(axis=0), xbar_pre - eta_t * ubar_pre)
    return state


def dnasa_step(state: SwarmState, mixing: MixingMatrix, eta_t: float, alpha_t: float,
               problem: Problem, check: bool = False) -> SwarmState:
    """Normalized moving-average tracking step."""
    _require_tracker(state, "dnasa", need_z=True)
    _require_alpha(alpha_t)
    w = mixing.w
    zhat = normalize_rows(state.z)
    if check:
        xbar_pre = state.x.mean(axis=0)
        zbar_pre = state.z.mean(axis=0)
        cons_x_pre = consensus_sq(state.x)
        cons_zhat = consensus_sq(zhat)
        _check_normalized_bound(cons_zhat, state.n, "dnasa", state.t)
    x_tilde = state.x - eta_t * zhat
    v_new = _sample_all(problem, state.x, state.t)  # sampled at the pre-step iterate
    u_tilde = state.u + v_new - state.v
    z_tilde = (1.0 - alpha_t) * state.z + alpha_t * u_tilde
    x_new = w @ x_tilde
    u_new = w @ u_tilde
    z_new = w @ z_tilde
    _require_finite(x_new, "dnasa", state.t)
    state.x, state.u, state.z, state.v = x_new, u_new, z_new, v_new
    state.t += 1
    if check:
        _check_finite_stack(state, "dnasa")
        _check_identity("tracker mean equals gradient mean (u-bar = v-bar)",
                        "dnasa", state.t, u_new.mean(axis=0), v_new.mean(axis=0))
        _check_identity("averaged iterate recursion (x-bar' = x-bar - eta mean(z-hat))",
                        "dnasa", state.t, x_new.mean(axis=0),
                        xbar_pre - eta_t * zhat.mean(axis=0))
        _check_identity("moving-average recursion (z-bar' = (1-a) z-bar + a u-bar')",
                        "dnasa", state.t, z_new.mean(axis=0),
                        (1.0 - alpha_t) * zbar_pre + alpha_t * u_new.mean(axis=0))
        _check_consensus_recursion(consensus_sq(x_new), cons_x_pre, cons_zhat,
                                   eta_t, mixing.rho, "dnasa", state.t)
    return state


def dasagt_step(state: SwarmState, mixing: MixingMatrix, eta_t: float, alpha_t: float,
                problem: Problem, check: bool = False) -> SwarmState:
    """Moving-average tracking step without normalization (baseline)."""
    _require_tracker(state, "dasagt", need_z=True)
    _require_alpha(alpha_t)
    w = mixing.w
    if check:
        xbar_pre = state.x.mean(axis=0)
        zbar_pre = state.z.mean(axis=0)
        cons_x_pre = consensus_sq(state.x)
        cons_z_pre = consensus_sq(state.z)
    x_tilde = state.x - eta_t * state.z
    v_new = _sample_all(problem, state.x, state.t)
    u_tilde = state.u + v_new - state.v
    z_tilde = (1.0 - alpha_t) * state.z + alpha_t * u_tilde
    x_new = w @ x_tilde
    u_new = w @ u_tilde
    z_new = w @ z_tilde
    _require_finite(x_new, "dasagt", state.t)
    state.x, state.u, state.z, state.v = x_new, u_new, z_new, v_new
    state.t += 1
    if check:
        _check_finite_stack(state, "dasagt")
        _check_identity("tracker mean equals gradient mean (u-bar = v-bar)",
                        "dasagt", state.t, u_new.mean(axis=0), v_new.mean(axis=0))
        _check_identity("averaged iterate recursion (x-bar' = x-bar - eta z-bar)",
                        "dasagt", state.t, x_new.mean(axis=0), xbar_pre - eta_t * zbar_pre)
        _check_identity("moving-average recursion (z-bar' = (1-a) z-bar + a u-bar')",
                        "dasagt", state.t, z_new.mean(axis=0),
                        (1.0 - alpha_t) * zbar_pre + alpha_t * u_new.mean(axis=0))
        _check_consensus_recursion(consensus_sq(x_new), cons_x_pre, cons_z_pre,
                                   eta_t, mixing.rho, "dasagt", state.t)
    return state


def step(state: SwarmState, algorithm: str, mixing: MixingMatrix, eta_t: float,
         alpha_t: float, problem: Problem, check: bool = False) -> SwarmState:
    """Dispatch one iteration of ``algorithm``; dsgd/dsgt ignore alpha_t."""
    if algorithm == "dsgd":
        return dsgd_step(state, mixing, eta_t, problem, check)
    if algorithm == "dsgt":
        return dsgt_step(state, mixing, eta_t, problem, check)
    if algorithm == "dnasa":
        return dnasa_step(state, mixing, eta_t, alpha_t, problem, check)
    if algorithm == "dasagt":
        return dasagt_step(state, mixing, eta_t, alpha_t, problem, check)
    raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def _sample_all(problem: Problem, xs: np.ndarray, t: int) -> np.ndarray:
    # Streams are keyed by (agent, t), so the loop order is irrelevant and
    # the stack may equally be filled by a worker pool.
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = problem.sample_grad(i, xs[i], t)
    return out


def _require_finite(x_new: np.ndarray, algorithm: str, t: int):
    if not np.isfinite(x_new).all():
        raise NumericalError(
            f"{algorithm} produced a non-finite iterate at iteration {t}", iteration=t
        )


def _require_tracker(state: SwarmState, algorithm: str, need_z: bool = False):
    if state.u is None or state.v is None or (need_z and state.z is None):
        raise ConfigError(f"state was not initialized for {algorithm}")


def _require_alpha(alpha_t: float):
    if not 0.0 <= alpha_t <= 1.0:
        raise ConfigError(f"alpha_t must lie in [0, 1], got {alpha_t}")


def _check_finite_stack(state: SwarmState, algorithm: str):
    for name in ("x", "v", "u", "z"):
        a = getattr(state, name)
        if a is not None and not np.isfinite(a).all():
            raise InvariantViolation(f"finite state matrix {name}", algorithm,
                                     state.t, float("-inf"))


def _check_identity(name: str, algorithm: str, t: int, lhs: np.ndarray, rhs: np.ndarray):
    err = float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(rhs)))
    if err > IDENTITY_RTOL:
        raise InvariantViolation(name, algorithm, t, IDENTITY_RTOL - err)


def _check_normalized_bound(cons_zhat: float, n: int, algorithm: str, t: int):
    slack = 1.0 + 1e-12 - cons_zhat / n
    if slack < 0:
        raise InvariantViolation("normalized consensus bound (1/n)||Z-hat - mean||^2 <= 1",
                                 algorithm, t, slack)


def _check_consensus_recursion(cons_x_new: float, cons_x_pre: float, cons_dir: float,
                               eta_t: float, rho: float, algorithm: str, t: int):
    rhs = 0.5 * (1.0 + rho) * cons_x_pre
    if rho < 1.0:
        rhs += eta_t**2 * (1.0 + rho**2) / (1.0 - rho**2) * cons_dir
    slack = rhs + 1e-9 - cons_x_new
    if slack < 0:
        raise InvariantViolation("one-step consensus recursion", algorithm, t, slack)
