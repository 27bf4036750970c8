import json

import numpy as np

from cmdp_toolkit.generators import RandomCMDPGenerator
from cmdp_toolkit.models import TabularCMDP
from cmdp_toolkit.simplex import DenseSimplex


def bandit_model(gamma=0.5, thresholds=(), utilities=None):
    """
    One state, two actions paying reward 1 and 0.
    """
    transition = np.ones((1, 2, 1))
    reward = [[1.0, 0.0]]
    if utilities is None:
        utilities = [[[0.0, 1.0]]] if thresholds else []
    return TabularCMDP(transition, reward, utilities, list(thresholds), gamma, [1.0])


def chain_model(num_states=3, gamma=0.9):
    """
    Deterministic chain: action 1 moves right, action 0 stays. Only the last state pays.
    """
    transition = np.zeros((num_states, 2, num_states))
    for s in range(num_states):
        transition[s, 0, s] = 1.0
        transition[s, 1, min(s + 1, num_states - 1)] = 1.0
    reward = np.zeros((num_states, 2))
    reward[-1] = 1.0
    utility = np.zeros((1, num_states, 2))
    utility[0, :, 0] = 1.0
    initial_dist = np.full(num_states, 1.0 / num_states)
    return TabularCMDP(transition, reward, utility, [0.0], gamma, initial_dist)


def write_model(path, model, **overrides):
    data = model.to_dict()
    data.update(overrides)
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class FixedRandomGenerator(RandomCMDPGenerator):
    """
    Ignores the requested seed.
    """

    def generate(self):
        self.seed = 1234
        return super().generate()


class CountingSimplex(DenseSimplex):
    calls = 0

    def solve(self, c, A_eq, b_eq):
        CountingSimplex.calls += 1
        return super().solve(c, A_eq, b_eq)
