import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidArgumentError
from .settings import cmdp_settings


def _frozen(values, ndim, name):
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise InvalidArgumentError("%s must have %d dimensions, got shape %s" % (name, ndim, array.shape))
    array.setflags(write=False)
    return array


class TabularCMDP:
    """
    A finite constrained MDP.

    The arrays are copied on construction and made read-only, so a model can be
    shared freely. Only shapes are checked here; the numerical invariants are
    checked by `cmdp_toolkit.validators.validate_model`.
    """

    def __init__(self, transition, reward, utilities, thresholds, gamma, initial_dist):
        self.transition = _frozen(transition, 3, "transition")
        num_states, num_actions, next_states = self.transition.shape
        if num_states < 1 or num_actions < 1 or next_states != num_states:
            raise InvalidArgumentError(
                "transition must have shape (S, A, S), got %s" % (self.transition.shape,)
            )

        self.reward = _frozen(reward, 2, "reward")
        if self.reward.shape != (num_states, num_actions):
            raise InvalidArgumentError(
                "reward must have shape %s, got %s" % ((num_states, num_actions), self.reward.shape)
            )

        utilities = np.asarray(utilities, dtype=float)
        if utilities.size == 0:
            utilities = np.zeros((0, num_states, num_actions))
        self.utilities = _frozen(utilities, 3, "utilities")
        if self.utilities.shape[1:] != (num_states, num_actions):
            raise InvalidArgumentError(
                "utilities must have shape (n, %d, %d), got %s"
                % (num_states, num_actions, self.utilities.shape)
            )

        self.thresholds = _frozen(np.reshape(thresholds, -1), 1, "thresholds")
        if self.thresholds.shape[0] != self.utilities.shape[0]:
            raise InvalidArgumentError(
                "%d thresholds given for %d utilities" % (self.thresholds.shape[0], self.utilities.shape[0])
            )

        self.initial_dist = _frozen(initial_dist, 1, "initial_dist")
        if self.initial_dist.shape[0] != num_states:
            raise InvalidArgumentError(
                "initial_dist must have %d entries, got %d" % (num_states, self.initial_dist.shape[0])
            )
        self.gamma = float(gamma)

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_actions(self):
        return self.transition.shape[1]

    @property
    def num_constraints(self):
        return self.utilities.shape[0]

    @property
    def shape(self):
        return self.num_states, self.num_actions

    def with_thresholds(self, thresholds):
        return TabularCMDP(
            self.transition, self.reward, self.utilities, thresholds, self.gamma, self.initial_dist
        )

    def without_constraints(self):
        return TabularCMDP(self.transition, self.reward, [], [], self.gamma, self.initial_dist)

    def to_dict(self):
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "utilities": self.utilities.tolist(),
            "thresholds": self.thresholds.tolist(),
            "initial_dist": self.initial_dist.tolist(),
        }

    def __repr__(self):
        return "<TabularCMDP |S|=%d |A|=%d n=%d gamma=%g>" % (
            self.num_states,
            self.num_actions,
            self.num_constraints,
            self.gamma,
        )


class DecisionRule:
    """
    A stationary stochastic decision rule pi(a|s), stored as a row-stochastic table.

    Zero probabilities are allowed; this is the class LP-recovered and greedy
    policies live in. Use `Policy` for the strictly positive soft-max class.
    """

    def __init__(self, prob):
        prob = _frozen(prob, 2, "prob")
        tolerance = cmdp_settings.POLICY_NORMALIZATION_TOLERANCE
        if not np.all(np.isfinite(prob)) or np.any(prob < 0):
            raise InvalidArgumentError("policy probabilities must be finite and nonnegative")
        row_sums = prob.sum(axis=1)
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        if abs(row_sums[worst] - 1.0) > tolerance:
            raise InvalidArgumentError("policy row %d sums to %.12g" % (worst, row_sums[worst]))
        self._prob = prob

    @property
    def prob(self):
        return self._prob

    @property
    def num_states(self):
        return self._prob.shape[0]

    @property
    def num_actions(self):
        return self._prob.shape[1]

    @property
    def shape(self):
        return self._prob.shape

    @classmethod
    def deterministic(cls, actions, num_actions):
        actions = np.asarray(actions, dtype=int)
        prob = np.zeros((actions.shape[0], num_actions))
        prob[np.arange(actions.shape[0]), actions] = 1.0
        return cls(prob)

    def __repr__(self):
        return "<%s %dx%d>" % (self.__class__.__name__, self.num_states, self.num_actions)


class Policy(DecisionRule):
    """
    A soft-max policy pi(a|s) > 0, stored in log space.

    `prob` is materialized from `log_prob` on construction. Build instances with
    `uniform`, `from_logits` or `from_probabilities`.
    """

    def __init__(self, log_prob):
        log_prob = _frozen(log_prob, 2, "log_prob")
        if not np.all(np.isfinite(log_prob)):
            raise InvalidArgumentError("soft-max policies need finite log-probabilities")
        super().__init__(np.exp(log_prob))
        self._log_prob = log_prob

    @property
    def log_prob(self):
        return self._log_prob

    @classmethod
    def uniform(cls, num_states, num_actions):
        return cls(np.full((num_states, num_actions), -np.log(num_actions)))

    @classmethod
    def from_logits(cls, logits):
        logits = np.asarray(logits, dtype=float)
        return cls(logits - logsumexp(logits, axis=1, keepdims=True))

    @classmethod
    def from_probabilities(cls, prob):
        prob = np.asarray(prob, dtype=float)
        if np.any(prob <= 0):
            s, a = np.argwhere(prob <= 0)[0]
            raise InvalidArgumentError(
                "soft-max policies need pi(a|s) > 0, got pi(%d|%d) = %.12g" % (a, s, prob[s, a])
            )
        return cls.from_logits(np.log(prob))


class ValueTable:
    """
    A state-value vector V(s).
    """

    def __init__(self, v):
        self.v = _frozen(v, 1, "v")

    def at(self, initial_dist):
        """
        Contract against an initial distribution, V(rho).
        """
        return float(np.dot(initial_dist, self.v))

    def __len__(self):
        return self.v.shape[0]


class QTable:
    def __init__(self, q):
        self.q = _frozen(q, 2, "q")

    def advantage(self, value):
        return self.q - value.v[:, None]


class VisitationDistribution:
    """
    The normalized discounted state visitation distribution d_rho^pi.
    """

    def __init__(self, d):
        self.d = _frozen(d, 1, "d")

    @property
    def floor(self):
        return float(self.d.min())
