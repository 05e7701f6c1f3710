"""Decision-focused learning of constraint parameters (Odece)."""

from .cop_core import ConstraintSystem, ContractError, CopInstance, Family, VarDomain
from .loss import LossConfig, LossValue, combined_loss, ipl_loss, opl_loss
from .solve import SolveOutcome, Status, solve_binary_bnb, solve_cop, solve_lp

__version__ = "0.1.0"
