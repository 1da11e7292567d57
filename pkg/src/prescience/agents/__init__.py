from prescience.agents.policies import (
    GreedyQPolicy,
    MissingExpert,
    Policy,
    PreferenceOrder,
    RandomPolicy,
    WrongEnvKind,
    nth_permutation,
)
from prescience.agents.qlearning import EpsilonSchedule, QTable, q_update, train_q
from prescience.agents.reference import ReferenceScores, mean_reward, reference_scores
from prescience.agents.scripted import SCRIPTS, ScriptedPolicy, make_scripted


def act(policy: Policy, outcome):
    return policy.act(outcome)


__all__ = [
    "EpsilonSchedule", "GreedyQPolicy", "MissingExpert", "Policy", "PreferenceOrder", "QTable",
    "RandomPolicy", "ReferenceScores", "SCRIPTS", "ScriptedPolicy", "WrongEnvKind", "act", "make_scripted",
    "mean_reward", "nth_permutation", "q_update", "reference_scores", "train_q",
]
