"""Derivative-free local optimization of circuit rotation angles.

Thin, budget-enforcing wrapper over scipy's COBYLA and Nelder-Mead. Both
algorithms are deterministic, so results are bit-reproducible for identical
(objective, x0, config); the ``rng`` argument exists for interface symmetry
with stochastic callers and is unused. Angles are unconstrained: the VQE
objective is 2*pi-periodic, so box constraints would only hurt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

ALGORITHMS = ("cobyla", "nelder-mead")


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int = 200
    initial_step: float = 0.5  # radians: COBYLA rhobeg / Nelder-Mead simplex edge
    convergence_tol: float = 1e-8
    algorithm: str = "cobyla"

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")


@dataclass
class OptimizeResult:
    best_params: np.ndarray
    best_value: float
    n_evals: int
    converged: bool
    trace: list = field(default_factory=list)  # monotone best-so-far values


class _Budget(Exception):
    pass


class _CountingObjective:
    def __init__(self, objective, max_evals):
        self.objective = objective
        self.max_evals = max_evals
        self.n_evals = 0
        self.best_x = None
        self.best_f = np.inf
        self.trace = []

    def __call__(self, x):
        if self.n_evals >= self.max_evals:
            raise _Budget
        value = float(self.objective(np.asarray(x, dtype=float)))
        self.n_evals += 1
        if not np.isfinite(value):
            raise OptimizerError(
                f"non-finite objective value {value!r} at evaluation"
                f" {self.n_evals}, x={np.asarray(x)!r}"
            )
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=float)
        self.trace.append(self.best_f)
        return value


def minimize(objective, x0, cfg: OptimizerConfig, rng=None) -> OptimizeResult:
    """Minimize ``objective`` from ``x0`` under the configured eval budget.

    Returns the best point seen across all evaluations, so the result is
    never worse than the start.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValueError(f"x0 must be a 1-D vector, got shape {x0.shape}")
    if x0.size == 0:
        value = float(objective(x0))
        if not np.isfinite(value):
            raise OptimizerError(f"non-finite objective value {value!r} at x0")
        return OptimizeResult(best_params=x0.copy(), best_value=value,
                              n_evals=1, converged=True, trace=[value])

    counter = _CountingObjective(objective, cfg.max_evals)
    converged = False
    try:
        if cfg.algorithm == "cobyla":
            result = _scipy_minimize(
                counter, x0, method="COBYLA", tol=cfg.convergence_tol,
                options={"rhobeg": cfg.initial_step, "maxiter": cfg.max_evals},
            )
            converged = bool(result.success)
        else:
            simplex = np.tile(x0, (x0.size + 1, 1))
            for i in range(x0.size):
                simplex[i + 1, i] += cfg.initial_step
            result = _scipy_minimize(
                counter, x0, method="Nelder-Mead",
                options={
                    "maxfev": cfg.max_evals,
                    "initial_simplex": simplex,
                    "fatol": cfg.convergence_tol,
                    "xatol": cfg.convergence_tol,
                },
            )
            converged = bool(result.success)
    except _Budget:
        converged = False

    return OptimizeResult(
        best_params=counter.best_x,
        best_value=counter.best_f,
        n_evals=counter.n_evals,
        converged=converged,
        trace=counter.trace,
    )
