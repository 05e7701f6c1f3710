"""Infeasibility-aware losses on predicted constraint parameters.

For a prediction ``rho_hat`` with true parameters ``rho``:

    IAL(x)  = sum_i UNSAT_i(x, rho) * h(margin - g_i(x, rho_hat))
    IPL     = (1 - Feas(x_hat, rho)) * IAL(x_hat),   x_hat = x*(q, rho_hat)
    OPL     = sum_i h(margin + g_i(x*, rho_hat))
    loss    = alpha * IPL + (1 - alpha) * OPL

where ``h`` is softplus (smooth variant) or ``max(0, .)`` (hinge variant).
IAL is the negative log-probability that the violated constraints stay
violated under ``rho_hat``; OPL is the negative log-probability that the true
optimum stays feasible.  Solutions and masks carry no gradient, so every
gradient is a weighted sum of ``dg_i / drho_hat``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cop_core import ConstraintSystem, ContractError, constraint_values, constraint_vjp, unsat_mask
from .solve import NumericalFailure, SolveOutcome, Status, solve_cop


class Variant(str, enum.Enum):
    SOFTPLUS = "softplus"
    RELU = "relu"


class Reduction(str, enum.Enum):
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.1
    alpha: float = 0.5
    variant: Variant = Variant.SOFTPLUS
    reduction: Reduction = Reduction.MEAN
    allow_zero_margin: bool = False  # only the lemma checks run with margin 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not np.isfinite(self.margin) or self.margin < 0:
            raise ContractError("margin must be finite and non-negative")
        if self.margin == 0 and not self.allow_zero_margin:
            raise ContractError("margin must be positive (set allow_zero_margin for lemma checks)")


@dataclass
class LossValue:
    value: float
    grad_rho_hat: np.ndarray
    x_hat: np.ndarray | None = None
    solve_status: Status | None = None
    predicted_infeasible: bool = False
    truly_feasible: bool | None = None


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(t):
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def sat_probability(g):
    """P(SAT) = 1 / (1 + exp(g)); stable for any finite g."""
    out = sigmoid(-np.asarray(g, dtype=float))
    return float(out) if out.ndim == 0 else out


def _hinge(t, variant: Variant):
    if variant is Variant.SOFTPLUS:
        return softplus(t), sigmoid(t)
    # Subgradient 0 at the kink.
    return np.maximum(t, 0.0), (t > 0).astype(float)


def ial_loss(system: ConstraintSystem, x_neg, rho_true, rho_hat, cfg: LossConfig) -> LossValue:
    rho_hat = system.check_rho(rho_hat)
    mask = unsat_mask(system, x_neg, rho_true)
    if not mask.any():
        return LossValue(0.0, np.zeros_like(rho_hat))
    g_hat = constraint_values(system, x_neg, rho_hat)
    h, d = _hinge(cfg.margin - g_hat, cfg.variant)
    value = float(np.sum(mask * h))
    grad = -constraint_vjp(system, x_neg, mask * d)
    return LossValue(value, grad)


def ipl_loss(
    system: ConstraintSystem,
    q,
    rho_true,
    rho_hat,
    cfg: LossConfig,
    solver=solve_cop,
    outcome: SolveOutcome | None = None,
) -> LossValue:
    """IPL at the optimum under ``rho_hat``.  Pass ``outcome`` to reuse a solve."""
    rho_hat = system.check_rho(rho_hat)
    out = solver(system, q, rho_hat) if outcome is None else outcome
    if out.status is Status.NUMERICAL_FAILURE:
        raise NumericalFailure("solver broke down on the predicted problem")
    zero = np.zeros_like(rho_hat)
    if not out.optimal:
        # No predicted solution exists, so there is nothing to penalise here.
        return LossValue(0.0, zero, None, out.status, predicted_infeasible=True)
    x_hat = out.assignment
    if not unsat_mask(system, x_hat, rho_true).any():
        return LossValue(0.0, zero, x_hat, out.status, truly_feasible=True)
    lv = ial_loss(system, x_hat, rho_true, rho_hat, cfg)
    lv.x_hat, lv.solve_status, lv.truly_feasible = x_hat, out.status, False
    return lv


def opl_loss(system: ConstraintSystem, x_star, rho_hat, cfg: LossConfig) -> LossValue:
    rho_hat = system.check_rho(rho_hat)
    g_hat = constraint_values(system, x_star, rho_hat)
    h, d = _hinge(cfg.margin + g_hat, cfg.variant)
    return LossValue(float(np.sum(h)), constraint_vjp(system, x_star, d))


def combined_loss(
    system: ConstraintSystem,
    q,
    rho_true,
    rho_hat,
    x_star,
    cfg: LossConfig,
    solver=solve_cop,
    outcome: SolveOutcome | None = None,
) -> LossValue:
    a = cfg.alpha
    opl = opl_loss(system, x_star, rho_hat, cfg)
    if a == 0.0:
        return opl
    ipl = ipl_loss(system, q, rho_true, rho_hat, cfg, solver, outcome)
    if a == 1.0:
        return ipl
    return LossValue(
        a * ipl.value + (1.0 - a) * opl.value,
        a * ipl.grad_rho_hat + (1.0 - a) * opl.grad_rho_hat,
        ipl.x_hat,
        ipl.solve_status,
        ipl.predicted_infeasible,
        ipl.truly_feasible,
    )


def mse_loss(rho_true, rho_hat) -> LossValue:
    """Mean squared error over the predicted slots, with its gradient."""
    diff = np.asarray(rho_hat, dtype=float) - np.asarray(rho_true, dtype=float)
    return LossValue(float(np.mean(diff**2)), 2.0 * diff / diff.size)


def reduce(values, cfg: LossConfig):
    values = np.asarray(values, dtype=float)
    return float(values.mean()) if cfg.reduction is Reduction.MEAN else float(values.sum())
