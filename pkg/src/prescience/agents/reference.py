from __future__ import annotations

from dataclasses import dataclass

from prescience.agents.policies import RandomPolicy
from prescience.agents.scripted import make_scripted


@dataclass(frozen=True)
class ReferenceScores:
    r_random: float
    r_reference: float

    @property
    def degenerate(self) -> bool:
        """Normalisation is undefined when the two scores coincide."""
        return self.r_random == self.r_reference


def mean_reward(env_factory, policy, config) -> float:
    from prescience.verifier import initial_labellers, initial_set, rollout

    init = initial_set(env_factory, config)
    total = 0
    for i in range(config.nu):
        env = env_factory()
        initial_labellers(env, init, i, [], False)
        total += rollout(env, policy, [], i, config)[1]
    return total / config.nu


def reference_scores(env_factory, nu: int = 30, frame_cap: int = 2000) -> ReferenceScores:
    """Random (seed 0) and scripted-expert mean rewards over the ``nu`` initial states.

    Raises MissingExpert when the game has no scripted expert.
    """
    from prescience.verifier import AnalysisConfig

    expert = make_scripted(env_factory.kind, "expert", env_factory.params)
    config = AnalysisConfig(nu=nu, frame_cap=frame_cap, prefix_audit=False)
    rnd = RandomPolicy(env_factory.kind, expert.n_actions, 0)
    return ReferenceScores(mean_reward(env_factory, rnd, config), mean_reward(env_factory, expert, config))
