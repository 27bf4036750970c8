import logging

import numpy as np

from .exceptions import InfeasibleProblemError, SolverError
from .settings import cmdp_settings


logger = logging.getLogger(__name__)


class BaseLPSolver:
    """
    All LP backends should extend this class overriding `.solve()`.

    `solve(c, A_eq, b_eq)` maximizes c @ x subject to A_eq @ x = b_eq, x >= 0
    and returns the optimal x.
    """

    def solve(self, c, A_eq, b_eq):
        raise NotImplementedError()


class DenseSimplex(BaseLPSolver):
    """
    Two-phase tableau simplex with Bland's anti-cycling rule.

    Sized for the occupancy LP of small CMDPs: |S||A| + n columns and |S| + n rows.
    """

    def __init__(self, tolerance=None, max_pivots=None):
        self.tolerance = tolerance if tolerance is not None else cmdp_settings.SIMPLEX_PIVOT_TOLERANCE
        self.max_pivots = max_pivots if max_pivots is not None else cmdp_settings.SIMPLEX_MAX_PIVOTS
        self.pivots = 0

    def _pivot(self, tableau, basis, row, col):
        tableau[row] /= tableau[row, col]
        for i in range(tableau.shape[0]):
            if i != row and tableau[i, col] != 0.0:
                tableau[i] -= tableau[i, col] * tableau[row]
        basis[row] = col
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise SolverError("simplex exceeded %d pivots" % self.max_pivots)

    def _optimize(self, tableau, basis, num_columns):
        """
        Minimize the objective whose reduced costs sit in the last tableau row.
        """
        m = tableau.shape[0] - 1
        tol = self.tolerance
        while True:
            reduced = tableau[m, :num_columns]
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return
            # Bland: lowest-index entering column
            col = int(candidates[0])
            column = tableau[:m, col]
            rows = np.flatnonzero(column > tol)
            if rows.size == 0:
                raise SolverError("linear program is unbounded")
            ratios = tableau[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            # Bland: among ties, the row whose basic variable has the lowest index
            row = int(min(ties, key=lambda i: basis[i]))
            self._pivot(tableau, basis, row, col)

    def solve(self, c, A_eq, b_eq):
        c = np.asarray(c, dtype=float)
        A = np.array(A_eq, dtype=float)
        b = np.array(b_eq, dtype=float)
        negative = b < 0
        A[negative] *= -1.0
        b[negative] *= -1.0
        m, n = A.shape
        self.pivots = 0

        # phase one: minimize the sum of artificial variables
        tableau = np.zeros((m + 1, n + m + 1))
        tableau[:m, :n] = A
        tableau[:m, n : n + m] = np.eye(m)
        tableau[:m, -1] = b
        tableau[m, :n] = -A.sum(axis=0)
        tableau[m, -1] = -b.sum()
        basis = list(range(n, n + m))
        self._optimize(tableau, basis, n + m)

        infeasibility = -tableau[m, -1]
        if infeasibility > self.tolerance * max(1.0, np.abs(b).sum()):
            raise InfeasibleProblemError(
                "linear program is infeasible (phase one residual %.3g)" % infeasibility
            )

        # drive artificials out of the basis, dropping redundant rows
        keep = []
        for row in range(m):
            if basis[row] >= n:
                candidates = np.flatnonzero(np.abs(tableau[row, :n]) > self.tolerance)
                if candidates.size == 0:
                    logger.debug("dropping redundant equality row %d", row)
                    continue
                self._pivot(tableau, basis, row, int(candidates[0]))
            keep.append(row)

        phase_two = np.zeros((len(keep) + 1, n + 1))
        phase_two[:-1, :n] = tableau[keep, :n]
        phase_two[:-1, -1] = tableau[keep, -1]
        basis = [basis[row] for row in keep]

        # phase two: minimize -c
        cost = -c
        basic_cost = cost[basis]
        phase_two[-1, :n] = cost - basic_cost @ phase_two[:-1, :n]
        phase_two[-1, -1] = -basic_cost @ phase_two[:-1, -1]
        self._optimize(phase_two, basis, n)

        x = np.zeros(n)
        x[basis] = phase_two[:-1, -1]
        logger.debug("simplex finished after %d pivots", self.pivots)
        return np.clip(x, 0.0, None)
