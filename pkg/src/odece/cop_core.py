"""Parametric linear constraint systems and their feasibility indicators.

All three supported families are normalised to ``g_i(x; rho) <= 0``.  Every
family is affine in ``x`` and linear in the predicted slots, so each one can be
written as ``g(x) = A x - b`` for an ``(M, N)`` matrix ``A`` and a vector ``b``
built from the predicted and fixed parameters.

Parameter layout: whenever a family carries an ``N * M`` block (item weights or
metal contents) it is stored constraint-major, i.e. slot ``i * N + n`` holds the
coefficient of variable ``n`` in constraint ``i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._lp_kernels import row_activity


class ContractError(ValueError):
    """Raised when inputs violate a shape or domain contract."""


class Family(str, enum.Enum):
    KNAPSACK_WEIGHTS = "knapsack_weights"
    KNAPSACK_CAPACITIES = "knapsack_capacities"
    COVERING_LHS = "covering_lhs"


class VarDomain(str, enum.Enum):
    BINARY = "binary"
    NONNEGATIVE = "nonnegative"


_DOMAIN = {
    Family.KNAPSACK_WEIGHTS: VarDomain.BINARY,
    Family.KNAPSACK_CAPACITIES: VarDomain.BINARY,
    Family.COVERING_LHS: VarDomain.NONNEGATIVE,
}


@dataclass(frozen=True)
class ConstraintSystem:
    """Known structure of a COP family plus its non-predicted parameters.

    ``fixed_params`` holds capacities (``KNAPSACK_WEIGHTS``), the weight block
    (``KNAPSACK_CAPACITIES``) or the requirements (``COVERING_LHS``).
    """

    family: Family
    num_vars: int
    num_constraints: int
    fixed_params: np.ndarray = field(repr=False)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        fixed = np.asarray(self.fixed_params, dtype=float).ravel()
        fixed.setflags(write=False)
        object.__setattr__(self, "fixed_params", fixed)
        if self.num_vars < 1 or self.num_constraints < 1:
            raise ContractError("need at least one variable and one constraint")
        if fixed.size != self._fixed_len():
            raise ContractError(
                f"{family.value}: fixed_params has length {fixed.size}, "
                f"expected {self._fixed_len()}"
            )
        if not np.all(np.isfinite(fixed)):
            raise ContractError("fixed_params must be finite")

    def _fixed_len(self) -> int:
        if self.family is Family.KNAPSACK_CAPACITIES:
            return self.num_vars * self.num_constraints
        return self.num_constraints

    @property
    def var_domain(self) -> VarDomain:
        return _DOMAIN[self.family]

    @property
    def predicted_slot_count(self) -> int:
        if self.family is Family.KNAPSACK_CAPACITIES:
            return self.num_constraints
        return self.num_vars * self.num_constraints

    def check_rho(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (self.predicted_slot_count,):
            raise ContractError(
                f"parameter vector has shape {rho.shape}, "
                f"expected ({self.predicted_slot_count},)"
            )
        if not np.all(np.isfinite(rho)):
            raise ContractError("parameter vector must be finite")
        return rho

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,):
            raise ContractError(
                f"assignment has shape {x.shape}, expected ({self.num_vars},)"
            )
        if self.var_domain is VarDomain.BINARY:
            if not np.all((x == 0.0) | (x == 1.0)):
                raise ContractError("binary assignment has entries outside {0, 1}")
        elif np.any(x < 0.0):
            raise ContractError("continuous assignment has negative entries")
        return x

    def linear_form(self, rho) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A, b)`` with ``g(x; rho) = A @ x - b``."""
        rho = self.check_rho(rho)
        m, n = self.num_constraints, self.num_vars
        if self.family is Family.KNAPSACK_WEIGHTS:
            return rho.reshape(m, n), np.array(self.fixed_params)
        if self.family is Family.KNAPSACK_CAPACITIES:
            return self.fixed_params.reshape(m, n), rho
        return -rho.reshape(m, n), -np.array(self.fixed_params)


def constraint_values(system: ConstraintSystem, x, rho) -> np.ndarray:
    """All ``M`` constraint values ``g_i(x; rho)``."""
    x = system.check_x(x)
    a, b = system.linear_form(rho)
    return row_activity(np.ascontiguousarray(a), x) - b


def constraint_value(system: ConstraintSystem, x, rho, i: int) -> float:
    if not 0 <= i < system.num_constraints:
        raise ContractError(f"constraint index {i} out of range")
    return float(constraint_values(system, x, rho)[i])


def constraint_vjp(system: ConstraintSystem, x, weights) -> np.ndarray:
    """Gradient of ``sum_i weights[i] * g_i(x; rho)`` with respect to ``rho``.

    Independent of ``rho`` because every family is linear in it.
    """
    x = system.check_x(x)
    w = np.asarray(weights, dtype=float)
    if w.shape != (system.num_constraints,):
        raise ContractError("need one weight per constraint")
    if system.family is Family.KNAPSACK_WEIGHTS:
        return np.outer(w, x).ravel()
    if system.family is Family.KNAPSACK_CAPACITIES:
        return -w
    return -np.outer(w, x).ravel()


def constraint_grad_rho(system: ConstraintSystem, x, rho, i: int) -> np.ndarray:
    system.check_rho(rho)
    if not 0 <= i < system.num_constraints:
        raise ContractError(f"constraint index {i} out of range")
    onehot = np.zeros(system.num_constraints)
    onehot[i] = 1.0
    return constraint_vjp(system, x, onehot)


CONTINUOUS_FEAS_TOL = 1e-7


def default_tolerance(system: ConstraintSystem) -> float:
    # Binary assignments are checked exactly; LP vertices carry rounding noise.
    return 0.0 if system.var_domain is VarDomain.BINARY else CONTINUOUS_FEAS_TOL


def unsat_mask(system: ConstraintSystem, x, rho, tol: float | None = None) -> np.ndarray:
    """1 where the constraint is strictly violated (``g > tol``); boundary counts as satisfied.

    ``tol`` defaults to 0 for binary systems and 1e-7 for continuous ones.
    """
    tol = default_tolerance(system) if tol is None else tol
    return (constraint_values(system, x, rho) > tol).astype(np.int8)


def is_feasible(system: ConstraintSystem, x, rho, tol: float | None = None) -> bool:
    return not unsat_mask(system, x, rho, tol).any()


def objective_value(q, x) -> float:
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    if q.shape != x.shape or q.ndim != 1:
        raise ContractError(f"objective shape {q.shape} does not match assignment {x.shape}")
    return float(q @ x)


@dataclass
class CopInstance:
    """One predict-then-optimize instance.

    ``q`` holds minimisation coefficients (knapsack stores negated values).
    ``x_star`` is the optimum under ``rho_true`` when known.
    """

    features: np.ndarray
    rho_true: np.ndarray
    q: np.ndarray
    x_star: np.ndarray | None = None

    def validate(self, system: ConstraintSystem, atol: float = 1e-7) -> None:
        if not np.all(np.isfinite(self.features)):
            raise ContractError("features must be finite")
        system.check_rho(self.rho_true)
        q = np.asarray(self.q, dtype=float)
        if q.shape != (system.num_vars,) or not np.all(np.isfinite(q)):
            raise ContractError("objective must be a finite vector of length N")
        if self.x_star is not None:
            g = constraint_values(system, self.x_star, self.rho_true)
            tol = 0.0 if system.var_domain is VarDomain.BINARY else atol
            if np.any(g > tol):
                raise ContractError("x_star is infeasible under rho_true")
