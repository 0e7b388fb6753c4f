"""Deterministic substream derivation for every random draw in the library.

Sampling streams are counter-based (Philox): one key per (seed material,
purpose, agent) and a disjoint counter window per iteration index. Draws for
a given (agent, step) are a pure function of the key material, so
trajectories never depend on call order, evaluation cadence, or how work is
spread across workers.
"""

from __future__ import annotations

import numpy as np

# Purpose tags keep streams for different roles disjoint under equal seeds.
DATA = 0
THETA_STAR = 1
TOPOLOGY = 2
EVALUATION = 3


def derive_key(*entropy: int) -> np.ndarray:
    """128-bit Philox key hashed from a tuple of non-negative integers."""
    return np.random.SeedSequence(list(entropy)).generate_state(2, np.uint64)


def one_shot(*entropy: int) -> np.random.Generator:
    """Fresh generator for a single-use stream (topology samples, theta-star, eval sets)."""
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


class AgentStreams:
    """Per-agent Philox streams with a 2^128-block counter window per step.

    ``generator(agent, step)`` rewinds the agent's stream to the start of the
    window for ``step``, so calling it twice with the same arguments replays
    identical draws. The returned generator is shared per agent: each agent's
    stream must be consumed by one worker at a time (drain it before asking
    for another window of the same agent).
    """

    def __init__(self, entropy: tuple[int, ...], n_agents: int):
        if n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {n_agents}")
        self._bitgens = []
        self._generators = []
        self._states = []
        for agent in range(n_agents):
            bg = np.random.Philox(key=derive_key(*entropy, agent))
            self._bitgens.append(bg)
            self._generators.append(np.random.Generator(bg))
            state = bg.state
            state["buffer_pos"] = 4  # nothing buffered at a window start
            state["has_uint32"] = 0
            state["uinteger"] = 0
            self._states.append(state)

    def generator(self, agent: int, step: int) -> np.random.Generator:
        state = self._states[agent]
        counter = state["state"]["counter"]
        counter[0] = 0  # words 0-1 advance freely inside the window
        counter[1] = 0
        counter[2] = step
        self._bitgens[agent].state = state
        return self._generators[agent]
