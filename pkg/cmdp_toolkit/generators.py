import logging
from collections import deque
from typing import NamedTuple

import numpy as np

from .dual import slater_slack
from .evaluation import utility_values
from .exceptions import InvalidArgumentError
from .models import DecisionRule, Policy, TabularCMDP
from .settings import cmdp_settings


logger = logging.getLogger(__name__)

# up, right, down, left as (row, col) offsets
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


class GeneratedInstance(NamedTuple):
    model: TabularCMDP
    slater_policy: DecisionRule


class BaseInstanceGenerator:
    """
    All generators should extend this class overriding `.generate()`.
    """

    def generate(self):
        raise NotImplementedError()


class RandomCMDPGenerator(BaseInstanceGenerator):
    """
    Dense random CMDPs whose uniform policy is a certified Slater point.

    Transition rows are normalized draws from U(0.01, 1), rewards and
    utilities are U(0, 1), rho is uniform, and b_i = factor U_{g_i}^{uniform}(rho).
    """

    def __init__(self, seed, num_states, num_actions, num_constraints, gamma, threshold_factor=None):
        if num_states < 1 or num_actions < 1 or num_constraints < 0:
            raise InvalidArgumentError("sizes must be positive")
        if not 0 <= gamma < 1:
            raise InvalidArgumentError("gamma must lie in [0, 1), got %r" % gamma)
        self.seed = seed
        self.num_states = num_states
        self.num_actions = num_actions
        self.num_constraints = num_constraints
        self.gamma = gamma
        if threshold_factor is None:
            threshold_factor = cmdp_settings.THRESHOLD_FACTOR
        self.threshold_factor = threshold_factor

    def generate(self):
        rng = np.random.default_rng(self.seed)
        shape = (self.num_states, self.num_actions)
        transition = rng.uniform(0.01, 1.0, size=shape + (self.num_states,))
        transition /= transition.sum(axis=2, keepdims=True)
        reward = rng.uniform(0.0, 1.0, size=shape)
        utilities = rng.uniform(0.0, 1.0, size=(self.num_constraints,) + shape)
        initial_dist = np.full(self.num_states, 1.0 / self.num_states)

        uniform = Policy.uniform(*shape)
        unconstrained = TabularCMDP(
            transition, reward, utilities, np.zeros(self.num_constraints), self.gamma, initial_dist
        )
        thresholds = self.threshold_factor * utility_values(unconstrained, uniform)
        model = unconstrained.with_thresholds(thresholds)
        logger.debug("generated random CMDP seed=%s %s", self.seed, model)
        return GeneratedInstance(model, uniform)


class GridworldGenerator(BaseInstanceGenerator):
    """
    Deterministic gridworld with an absorbing goal in the bottom-right corner.

    Actions are up, right, down and left; moves into a wall stay put. The goal
    pays reward 1 under every action. The single utility is 1 on safe cells
    and 0 on hazards, and the threshold is the utility of the Slater policy
    minus a small slack. The Slater policy follows a shortest safe path,
    mixed with a little uniform exploration so that it lies in the soft-max class.
    By default a hazard sits at (height - 1, 1) on grids at least 3 wide.
    """

    def __init__(self, width, height, gamma, hazards=None, slack=None, exploration=None):
        if width < 2 or height < 2:
            raise InvalidArgumentError("gridworlds must be at least 2x2, got %dx%d" % (width, height))
        if not 0 <= gamma < 1:
            raise InvalidArgumentError("gamma must lie in [0, 1), got %r" % gamma)
        self.width = width
        self.height = height
        self.gamma = gamma
        self.goal = (height - 1, width - 1)
        if hazards is None:
            hazards = [(height - 1, 1)] if width >= 3 else []
        self.hazards = {tuple(cell) for cell in hazards}
        for cell in self.hazards:
            if not (0 <= cell[0] < height and 0 <= cell[1] < width) or cell == self.goal:
                raise InvalidArgumentError("invalid hazard cell %s" % (cell,))
        self.slack = cmdp_settings.GRIDWORLD_SLACK if slack is None else slack
        self.exploration = cmdp_settings.GRIDWORLD_EXPLORATION if exploration is None else exploration

    def state(self, row, col):
        return row * self.width + col

    def step(self, row, col, action):
        if (row, col) == self.goal:
            return row, col
        d_row, d_col = MOVES[action]
        new_row, new_col = row + d_row, col + d_col
        if 0 <= new_row < self.height and 0 <= new_col < self.width:
            return new_row, new_col
        return row, col

    def cells(self):
        for row in range(self.height):
            for col in range(self.width):
                yield row, col

    def safe_distances(self):
        """
        Shortest number of moves to the goal through safe cells (breadth-first from the goal).
        """
        distances = {self.goal: 0}
        queue = deque([self.goal])
        while queue:
            cell = queue.popleft()
            for d_row, d_col in MOVES:
                neighbour = (cell[0] - d_row, cell[1] - d_col)
                if neighbour in distances or neighbour in self.hazards:
                    continue
                if not (0 <= neighbour[0] < self.height and 0 <= neighbour[1] < self.width):
                    continue
                distances[neighbour] = distances[cell] + 1
                queue.append(neighbour)
        return distances

    def safe_actions(self):
        distances = self.safe_distances()
        unreachable = self.width * self.height
        actions = np.zeros(self.width * self.height, dtype=int)
        for row, col in self.cells():
            scores = [distances.get(self.step(row, col, a), unreachable) for a in range(len(MOVES))]
            actions[self.state(row, col)] = int(np.argmin(scores))
        return actions

    def generate(self):
        num_states = self.width * self.height
        num_actions = len(MOVES)
        transition = np.zeros((num_states, num_actions, num_states))
        reward = np.zeros((num_states, num_actions))
        utility = np.ones((num_states, num_actions))
        for row, col in self.cells():
            s = self.state(row, col)
            for a in range(num_actions):
                transition[s, a, self.state(*self.step(row, col, a))] = 1.0
            if (row, col) == self.goal:
                reward[s] = 1.0
            if (row, col) in self.hazards:
                utility[s] = 0.0
        initial_dist = np.full(num_states, 1.0 / num_states)

        greedy = np.zeros((num_states, num_actions))
        greedy[np.arange(num_states), self.safe_actions()] = 1.0
        kappa = self.exploration
        slater = Policy.from_probabilities((1.0 - kappa) * greedy + kappa / num_actions)

        unconstrained = TabularCMDP(transition, reward, [utility], [0.0], self.gamma, initial_dist)
        threshold = max(float(utility_values(unconstrained, slater)[0]) - self.slack, 0.0)
        model = unconstrained.with_thresholds([threshold])
        logger.debug(
            "generated %dx%d gridworld, hazards=%s, slack=%s",
            self.width,
            self.height,
            sorted(self.hazards),
            slater_slack(model, slater),
        )
        return GeneratedInstance(model, slater)


def gen_random_cmdp(seed, num_states, num_actions, n_constraints, gamma, threshold_factor=None):
    generator_class = cmdp_settings.RANDOM_GENERATOR_CLASS
    return generator_class(seed, num_states, num_actions, n_constraints, gamma, threshold_factor).generate()


def gen_gridworld(width, height, gamma, hazards=None, slack=None):
    generator_class = cmdp_settings.GRIDWORLD_GENERATOR_CLASS
    return generator_class(width, height, gamma, hazards=hazards, slack=slack).generate()
