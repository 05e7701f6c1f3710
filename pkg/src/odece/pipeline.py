"""Training loops, test metrics, alpha sweeps and result tables."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cop_core import Family, objective_value, unsat_mask
from .dataset import Dataset
from .loss import LossConfig, LossValue, Variant, combined_loss, mse_loss
from .model import DivergenceError, LinearPredictor, Predictor, SlotwisePredictor, make_optimizer
from .rng import STREAM_SHUFFLE, CounterRNG
from .solve import NumericalFailure, SolveOutcome, Status, solve_cop

log = logging.getLogger(__name__)

# Learning rates per problem (Adam).
DEFAULT_LR = {"mdkp_weights": 0.05, "mdkp_capacities": 0.005, "alloy": 0.001}


class LossKind(str, enum.Enum):
    ODECE = "odece"
    MSE = "mse"


class Selection(str, enum.Enum):
    FINAL_EPOCH = "final_epoch"
    BEST_VALIDATION = "best_validation"


@dataclass
class TrainConfig:
    loss_kind: LossKind = LossKind.ODECE
    alpha: float = 0.5
    margin: float = 0.1
    variant: Variant = Variant.SOFTPLUS
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float | None = None  # None: per-problem default
    optimizer: str = "adam"
    seed: int = 0
    model_selection: Selection = Selection.BEST_VALIDATION
    workers: int = 1

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)
        self.variant = Variant(self.variant)
        self.model_selection = Selection(self.model_selection)
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.loss_config()  # validates alpha and margin

    def loss_config(self) -> LossConfig:
        return LossConfig(margin=self.margin, alpha=self.alpha, variant=self.variant)

    def lr_for(self, problem: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LR.get(problem, 0.01)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, enum.Enum):
                d[k] = v.value
        return d


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_infeasibility: float
    val_regret: float | None
    wall_time_s: float


@dataclass
class InstanceResult:
    index: int
    status: str
    feasible: bool
    regret: float | None
    objective_pred: float | None
    objective_true: float


@dataclass
class EvalReport:
    num_instances: int
    num_feasible: int
    infeasibility_ratio: float
    normalized_regret: float | None
    num_predicted_infeasible: int = 0
    records: list[InstanceResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "num_instances": self.num_instances,
            "num_feasible": self.num_feasible,
            "infeasibility_ratio": self.infeasibility_ratio,
            "normalized_regret": self.normalized_regret,
            "num_predicted_infeasible": self.num_predicted_infeasible,
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def default_model(ds: Dataset, seed: int = 0) -> Predictor:
    """Linear model for the knapsack families, slot-wise MLP for covering."""
    if ds.family is Family.COVERING_LHS:
        m, n = ds.num_constraints, ds.num_vars
        return SlotwisePredictor(ds.num_features // (m * n), m, n, seed=seed)
    return LinearPredictor(ds.num_features, ds.system(0).predicted_slot_count, seed=seed)


def instance_regret(f_pred: float, f_true: float) -> float:
    # Normalise by |f*| so negated-value objectives still give positive regret.
    gap = f_pred - f_true
    return gap / abs(f_true) if f_true != 0 else gap


def _solve_all(ds: Dataset, idx, rho_hat, workers: int) -> list[SolveOutcome]:
    jobs = [(ds.system(k), ds.instances[k].q, rho_hat[j]) for j, k in enumerate(idx)]
    if workers > 1 and len(jobs) > 1:
        # The compiled solver kernels release the GIL; map keeps input order.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda a: solve_cop(*a), jobs))
    return [solve_cop(*a) for a in jobs]


def _score(ds: Dataset, idx, rho_hat, outcomes) -> EvalReport:
    records = []
    n_pred_infeasible = 0
    for j, k in enumerate(idx):
        inst = ds.instances[k]
        system = ds.system(k)
        f_true = objective_value(inst.q, inst.x_star)
        out = outcomes[j]
        if not out.optimal:
            n_pred_infeasible += out.status is Status.INFEASIBLE
            records.append(InstanceResult(int(k), out.status.value, False, None, None, f_true))
            continue
        feasible = not unsat_mask(system, out.assignment, inst.rho_true).any()
        regret = instance_regret(out.objective, f_true) if feasible else None
        records.append(InstanceResult(int(k), out.status.value, feasible, regret, out.objective, f_true))
    K = len(records)
    feas = [r for r in records if r.feasible]
    return EvalReport(
        num_instances=K,
        num_feasible=len(feas),
        infeasibility_ratio=(K - len(feas)) / K if K else 0.0,
        normalized_regret=float(np.mean([r.regret for r in feas])) if feas else None,
        num_predicted_infeasible=n_pred_infeasible,
        records=records,
    )


def evaluate(ds: Dataset, model: Predictor, split: str = "test", workers: int = 1) -> EvalReport:
    """Predict, solve under the prediction and score against the true parameters.

    A predicted problem without an optimal solution (infeasible, unbounded or
    a solver breakdown) counts as an infeasible outcome and has no regret.
    """
    idx = ds.splits[split]
    if not idx:
        raise ValueError(f"split {split!r} is empty")
    rho_hat = model.predict(ds.features(idx))
    return _score(ds, idx, rho_hat, _solve_all(ds, idx, rho_hat, workers))


def _instance_loss(ds, k, rho_hat, cfg: TrainConfig, lcfg, outcome) -> LossValue:
    inst = ds.instances[k]
    if cfg.loss_kind is LossKind.MSE:
        return mse_loss(inst.rho_true, rho_hat)
    return combined_loss(ds.system(k), inst.q, inst.rho_true, rho_hat, inst.x_star, lcfg, outcome=outcome)


def _needs_solve(cfg: TrainConfig) -> bool:
    return cfg.loss_kind is LossKind.ODECE and cfg.alpha > 0


def _validate(ds: Dataset, model: Predictor, cfg: TrainConfig, lcfg):
    idx = ds.splits.get("val") or []
    if not idx:
        return float("nan"), float("nan"), None
    rho_hat = model.predict(ds.features(idx))
    outcomes = _solve_all(ds, idx, rho_hat, cfg.workers)
    report = _score(ds, idx, rho_hat, outcomes)
    losses = [
        _instance_loss(ds, k, rho_hat[j], cfg, lcfg, outcomes[j]).value for j, k in enumerate(idx)
    ]
    return float(np.mean(losses)), report.infeasibility_ratio, report.normalized_regret


def train(ds: Dataset, model: Predictor, cfg: TrainConfig):
    """Mini-batch training; returns ``(model, history)``.

    With ``BEST_VALIDATION`` selection the returned model is the snapshot
    with the lowest validation loss (combined loss for Odece, MSE for the
    baseline); ties keep the earliest epoch.
    """
    lcfg = cfg.loss_config()
    opt = make_optimizer(cfg.optimizer, cfg.lr_for(ds.problem))
    train_idx = np.asarray(ds.splits["train"], dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("training split is empty")
    X_all = ds.features(range(len(ds)))
    history: list[EpochRecord] = []
    best, best_loss = model.copy(), float("inf")
    solve = _needs_solve(cfg)
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = train_idx[CounterRNG(cfg.seed, STREAM_SHUFFLE, epoch).permutation(train_idx.size)]
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            rho_hat, cache = model.forward(X_all[batch])
            outcomes = _solve_all(ds, batch, rho_hat, cfg.workers) if solve else [None] * batch.size
            grad_out = np.empty_like(rho_hat)
            for j, k in enumerate(batch):
                try:
                    lv = _instance_loss(ds, k, rho_hat[j], cfg, lcfg, outcomes[j])
                except NumericalFailure as exc:
                    raise DivergenceError(f"epoch {epoch}, instance {k}: {exc}", epoch, int(k)) from exc
                if not (np.isfinite(lv.value) and np.all(np.isfinite(lv.grad_rho_hat))):
                    raise DivergenceError(f"epoch {epoch}, instance {k}: non-finite loss", epoch, int(k))
                total += lv.value
                grad_out[j] = lv.grad_rho_hat
            if lcfg.reduction.value == "mean":
                grad_out /= batch.size
            grads = model.backward(cache, grad_out)
            try:
                opt.step(model, grads)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}: {exc}", epoch) from None
        val_loss, val_inf, val_regret = _validate(ds, model, cfg, lcfg)
        rec = EpochRecord(epoch, total / order.size, val_loss, val_inf, val_regret, time.perf_counter() - t0)
        history.append(rec)
        log.info(
            "epoch %d train %.5f val %.5f infeas %.3f regret %s",
            epoch, rec.train_loss, val_loss, val_inf, "n/a" if val_regret is None else f"{val_regret:.4f}",
        )
        if cfg.model_selection is Selection.BEST_VALIDATION and val_loss < best_loss:
            best, best_loss = model.copy(), val_loss
    if cfg.model_selection is Selection.FINAL_EPOCH or not np.isfinite(best_loss):
        return model, history
    return best, history


HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "val_infeasibility", "val_regret", "wall_time_s"]
FRONTIER_COLUMNS = ["alpha", "seed", "infeasibility", "regret", "n_test", "wall_time_s", "method"]
AGGREGATE_COLUMNS = [
    "method", "alpha", "n_runs", "infeasibility_mean", "infeasibility_sd", "regret_mean", "regret_sd",
]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return path


def write_history(path, history) -> Path:
    return write_csv(path, HISTORY_COLUMNS, [asdict(h) for h in history])


def write_instance_csv(path, report: EvalReport) -> Path:
    cols = ["index", "status", "feasible", "regret", "objective_pred", "objective_true"]
    return write_csv(path, cols, [asdict(r) for r in report.records])


@dataclass
class RunSpec:
    method: str
    alpha: float | None
    seed: int


def _run_one(ds: Dataset, spec: RunSpec, base: TrainConfig, model_factory) -> dict:
    t0 = time.perf_counter()
    if spec.method == "mse":
        cfg = TrainConfig(**{**base.to_dict(), "loss_kind": LossKind.MSE, "seed": spec.seed, "workers": 1})
    else:
        cfg = TrainConfig(**{**base.to_dict(), "alpha": spec.alpha, "seed": spec.seed, "workers": 1})
    row = {"alpha": spec.alpha, "seed": spec.seed, "method": spec.method}
    try:
        model, _ = train(ds, model_factory(ds, spec.seed), cfg)
        rep = evaluate(ds, model, "test")
        row.update(infeasibility=rep.infeasibility_ratio, regret=rep.normalized_regret, n_test=rep.num_instances)
    except (DivergenceError, NumericalFailure) as exc:
        log.error("run %s alpha=%s seed=%d failed: %s", spec.method, spec.alpha, spec.seed, exc)
        row.update(infeasibility=None, regret=None, n_test=len(ds.splits["test"]), error=str(exc))
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def _run_star(args):
    return _run_one(*args)


def alpha_sweep(
    ds: Dataset,
    alphas,
    seeds,
    base: TrainConfig | None = None,
    model_factory=default_model,
    include_mse: bool = True,
    workers: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Train and test one model per (alpha, seed), plus an MSE run per seed.

    Returns ``(rows, aggregates)``.  Failed runs are kept as rows with empty
    metrics and left out of the aggregates.  Rows come back in a fixed order
    (MSE first, then alphas ascending in the given order, seeds inner)
    regardless of ``workers``.
    """
    base = base or TrainConfig()
    alphas = [float(a) for a in alphas]
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValueError("alphas must lie in [0, 1]")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    specs = [RunSpec("mse", None, s) for s in seeds] if include_mse else []
    specs += [RunSpec("odece", a, s) for a in alphas for s in seeds]
    args = [(ds, s, base, model_factory) for s in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_star, args))
    else:
        rows = [_run_star(a) for a in args]
    return rows, aggregate(rows)


def aggregate(rows) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["alpha"]), []).append(r)
    out = []
    for (method, alpha), rs in groups.items():
        ok = [r for r in rs if r.get("infeasibility") is not None]
        inf = np.array([r["infeasibility"] for r in ok], dtype=float)
        reg = np.array([r["regret"] for r in ok if r["regret"] is not None], dtype=float)
        out.append({
            "method": method,
            "alpha": alpha,
            "n_runs": len(ok),
            "infeasibility_mean": float(inf.mean()) if inf.size else None,
            "infeasibility_sd": float(inf.std(ddof=1)) if inf.size > 1 else None,
            "regret_mean": float(reg.mean()) if reg.size else None,
            "regret_sd": float(reg.std(ddof=1)) if reg.size > 1 else None,
        })
    return out
