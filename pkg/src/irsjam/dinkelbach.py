"""Dinkelbach iteration for max N(x)/D(x)."""
from __future__ import annotations

from dataclasses import dataclass, field

CONVERGED = "converged"
ITERATION_LIMIT = "iteration-limit"
INNER_FAILED = "inner-failed"


@dataclass
class DinkelbachResult:
    x: object
    eta: float
    status: str
    iterations: int
    residual: float
    etas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def monotone(self):
        return all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(self.etas, self.etas[1:]))


def dinkelbach(solve_inner, numerator, denominator, tol=1e-7, max_iters=50, eta0=0.0, x0=None):
    """Maximize N/D by the parametric sequence max N - eta D.

    ``solve_inner(eta, x_prev)`` returns the maximizer of ``N - eta*D`` (or
    None if the subproblem failed); the previous iterate is passed along so
    callers can refresh any linearization around it.  Iteration stops once
    ``|N(x) - eta*D(x)| <= tol`` for the eta that produced ``x``.
    """
    eta = float(eta0)
    x = x0
    etas = [eta]
    residuals = []
    for it in range(1, max_iters + 1):
        x_new = solve_inner(eta, x)
        if x_new is None:
            # the last good iterate (possibly x0) rides along; callers decide
            res = abs(residuals[-1]) if residuals else float("inf")
            return DinkelbachResult(x, eta, INNER_FAILED, it, res, etas, residuals)
        x = x_new
        n, d = numerator(x), denominator(x)
        res = n - eta * d
        residuals.append(res)
        eta = n / d
        etas.append(eta)
        if abs(res) <= tol:
            return DinkelbachResult(x, eta, CONVERGED, it, abs(res), etas, residuals)
    return DinkelbachResult(x, eta, ITERATION_LIMIT, max_iters, abs(residuals[-1]), etas, residuals)
