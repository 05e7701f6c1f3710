"""Seeded generators for the benchmark families plus alloy CSV ingestion.

Every random quantity comes from a ``CounterRNG`` stream keyed by
``(seed, tag, ...)``: the true model ``B`` from STRUCTURE, per-instance draws
from ``(INSTANCE, k)``, the split permutation from SPLIT and the fixed weight
block of the capacity variant from FIXED.  Instance ``k`` is therefore the
same no matter how many instances are generated or in which order.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cop_core import ConstraintSystem, CopInstance, Family
from .dataset import Dataset, DatasetError, load_dataset, read_manifest
from .rng import (
    STREAM_FIXED,
    STREAM_INSTANCE,
    STREAM_SPLIT,
    STREAM_STRUCTURE,
    CounterRNG,
)
from .solve import Status, solve_cop

log = logging.getLogger(__name__)

GUMBEL_LOC = 100.0
GUMBEL_SCALE = 20.0
ALLOY_REQUIREMENTS = (627.54, 369.72)
ALLOY_PRICE_RANGE = (5.0, 15.0)
NONTRIVIAL_BLOCK = 100
MAX_REGEN_ATTEMPTS = 20


class ConfigError(ValueError):
    pass


@dataclass
class MdkpGenConfig:
    num_items: int = 50
    num_dims: int = 3
    num_features: int = 10
    deg: int = 6
    noise_half_width: float = 0.25
    tightness: float | None = None  # None: 0.2 for weights, 0.5 * N for capacities
    num_instances: int = 1500
    split: tuple[int, int, int] = (900, 100, 500)
    seed: int = 0

    def validate(self):
        if self.num_items < 1 or self.num_dims < 1 or self.num_features < 1:
            raise ConfigError("num_items, num_dims and num_features must be positive")
        if self.deg < 1 or self.deg % 2:
            # An odd power of the (possibly negative) base could yield negative weights.
            raise ConfigError(f"deg must be a positive even integer, got {self.deg}")
        if not 0.0 <= self.noise_half_width < 1.0:
            raise ConfigError("noise_half_width must lie in [0, 1)")
        if self.tightness is not None and not self.tightness > 0:
            raise ConfigError("tightness must be positive")
        _check_split(self.split, self.num_instances)


@dataclass
class AlloyGenConfig:
    num_suppliers: int = 10
    num_metals: int = 2
    requirements: tuple[float, ...] = ALLOY_REQUIREMENTS
    feature_dim: int = 4096
    deg: int = 6
    noise_half_width: float = 0.25
    price_range: tuple[float, float] = ALLOY_PRICE_RANGE
    num_instances: int = 500
    split: tuple[int, int, int] = (350, 50, 100)
    seed: int = 0

    def validate(self):
        if self.num_suppliers < 1 or self.num_metals < 1 or self.feature_dim < 1:
            raise ConfigError("num_suppliers, num_metals and feature_dim must be positive")
        if len(self.requirements) != self.num_metals:
            raise ConfigError("need one requirement per metal")
        if any(not r > 0 for r in self.requirements):
            raise ConfigError("requirements must be positive")
        if self.deg < 1 or self.deg % 2:
            raise ConfigError(f"deg must be a positive even integer, got {self.deg}")
        if not 0.0 <= self.noise_half_width < 1.0:
            raise ConfigError("noise_half_width must lie in [0, 1)")
        lo, hi = self.price_range
        if not 0 < lo <= hi:
            raise ConfigError("price_range must satisfy 0 < low <= high")
        _check_split(self.split, self.num_instances)


def _check_split(split, k):
    if len(split) != 3 or any(s < 0 for s in split):
        raise ConfigError("split must be three non-negative counts (train, val, test)")
    if sum(split) != k:
        raise ConfigError(f"split {tuple(split)} does not sum to num_instances={k}")


def make_splits(seed: int, split) -> dict[str, list[int]]:
    perm = CounterRNG(seed, STREAM_SPLIT).permutation(sum(split))
    a, b = split[0], split[0] + split[1]
    return {
        "train": sorted(int(i) for i in perm[:a]),
        "val": sorted(int(i) for i in perm[a:b]),
        "test": sorted(int(i) for i in perm[b:]),
    }


def poly_bracket(z, deg: int) -> np.ndarray:
    """``(z + 3)**deg / 3.5**deg + 1``, the shared nonlinearity of all generators."""
    return (np.asarray(z) + 3.0) ** deg / 3.5**deg + 1.0


def gumbel_values(rng: CounterRNG, n: int) -> np.ndarray:
    return rng.gumbel(GUMBEL_LOC, GUMBEL_SCALE, size=(n,))


def clip_knapsack(weights: np.ndarray, capacity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Enforce ``capacity_i < sum_n w_ni / 2`` and then ``w_ni < capacity_i``.

    ``weights`` is ``(M, N)``.  Capping a weight lowers the row total, so the
    capacity cap is taken as ``min(S/2, S - w_max)``: after the largest
    weight drops to just below the capacity the total is still above twice
    the capacity.  Re-applying the function changes nothing.
    """
    w = np.array(weights, dtype=float)
    cap = np.array(capacity, dtype=float)
    total = w.sum(axis=1)
    cap_max = np.minimum(0.5 * total, total - w.max(axis=1))
    cap = np.minimum(cap, cap_max * (1.0 - 1e-9))
    below = np.nextafter(cap, -np.inf)[:, None]
    w = np.minimum(w, below)
    if not (np.all(cap < 0.5 * w.sum(axis=1)) and np.all(w < cap[:, None])):
        raise AssertionError("knapsack clipping failed to establish its invariants")
    return w, cap


def clipping_holds(weights: np.ndarray, capacity: np.ndarray) -> bool:
    w = np.asarray(weights, dtype=float)
    cap = np.asarray(capacity, dtype=float)
    return bool(np.all(cap < 0.5 * w.sum(axis=1)) and np.all(w < cap[:, None]))


def _solve_true(system, q, rho, k):
    out = solve_cop(system, q, rho)
    if out.status is not Status.OPTIMAL:
        raise RuntimeError(f"instance {k}: true problem is {out.status.value}")
    return out.assignment


def _weight_block(rng: CounterRNG, phi, B, deg, w):
    # B is (M, N, P); result is (M, N).
    z = np.einsum("inp,p->in", B, phi) / math.sqrt(phi.size)
    xi = rng.uniform(1.0 - w, 1.0 + w, size=z.shape)
    return poly_bracket(z, deg) * xi


def gen_mdkp_weights(cfg: MdkpGenConfig) -> Dataset:
    """MDKP instances whose item weights are predicted and capacities are known."""
    cfg.validate()
    n, m, p = cfg.num_items, cfg.num_dims, cfg.num_features
    r = 0.2 if cfg.tightness is None else cfg.tightness
    B = CounterRNG(cfg.seed, STREAM_STRUCTURE).bernoulli(0.5, size=(m, n, p))
    row_mass = B.sum(axis=(1, 2))
    instances, fixed = [], []
    for k in range(cfg.num_instances):
        rng = CounterRNG(cfg.seed, STREAM_INSTANCE, k)
        phi = rng.normal(size=(p,))
        weights = _weight_block(rng, phi, B, cfg.deg, cfg.noise_half_width)
        capacity = r * rng.uniform(1.0 - cfg.noise_half_width, 1.0 + cfg.noise_half_width, size=(m,)) * row_mass
        values = gumbel_values(rng, n)
        weights, capacity = clip_knapsack(weights, capacity)
        system = ConstraintSystem(Family.KNAPSACK_WEIGHTS, n, m, capacity)
        rho = weights.ravel()
        q = -values
        instances.append(CopInstance(phi, rho, q, _solve_true(system, q, rho, k)))
        fixed.append(capacity)
    return Dataset(
        problem="mdkp_weights",
        family=Family.KNAPSACK_WEIGHTS,
        num_vars=n,
        num_constraints=m,
        instances=instances,
        fixed_params=fixed,
        splits=make_splits(cfg.seed, cfg.split),
        config=_config_dict(cfg),
        seed=cfg.seed,
    )


def nontrivial(x) -> bool:
    s = float(np.sum(x))
    return 1.0 <= s <= len(x) - 1.0


def _capacity_attempt(cfg: MdkpGenConfig, seed: int):
    n, m, p = cfg.num_items, cfg.num_dims, cfg.num_features
    r = 0.5 * n if cfg.tightness is None else cfg.tightness
    w = cfg.noise_half_width
    B = CounterRNG(seed, STREAM_STRUCTURE).bernoulli(0.5, size=(m, p))
    frng = CounterRNG(seed, STREAM_FIXED)
    Bw = frng.bernoulli(0.5, size=(m, n, p))
    weights = _weight_block(frng, frng.normal(size=(p,)), Bw, cfg.deg, w)
    fixed = weights.ravel()
    system = ConstraintSystem(Family.KNAPSACK_CAPACITIES, n, m, fixed)
    instances = []
    for k in range(cfg.num_instances):
        rng = CounterRNG(seed, STREAM_INSTANCE, k)
        phi = rng.normal(size=(p,))
        z = B @ phi / math.sqrt(p)
        capacity = r * poly_bracket(z, cfg.deg) * rng.uniform(1.0 - w, 1.0 + w, size=(m,))
        q = -gumbel_values(rng, n)
        instances.append(CopInstance(r * phi, capacity, q, _solve_true(system, q, capacity, k)))
    return fixed, instances


def gen_mdkp_capacities(cfg: MdkpGenConfig) -> Dataset:
    """MDKP instances whose capacities are predicted; one weight block per dataset.

    Features are stored scaled by the same factor ``r`` as the capacities.
    Every block of 100 instances must contain a true optimum that selects some
    but not all items; otherwise the whole dataset is redrawn with the next
    seed (logged) and the seed actually used is recorded in the manifest.
    """
    cfg.validate()
    seed = cfg.seed
    for _ in range(MAX_REGEN_ATTEMPTS):
        fixed, instances = _capacity_attempt(cfg, seed)
        blocks_ok = all(
            any(nontrivial(inst.x_star) for inst in instances[s : s + NONTRIVIAL_BLOCK])
            for s in range(0, len(instances), NONTRIVIAL_BLOCK)
        )
        if blocks_ok:
            break
        log.warning("seed %d produced a block of trivial optima; regenerating with seed %d", seed, seed + 1)
        seed += 1
    else:
        raise RuntimeError(f"no non-trivial capacity dataset after {MAX_REGEN_ATTEMPTS} seeds")
    conf = _config_dict(cfg)
    conf["seed_used"] = seed
    return Dataset(
        problem="mdkp_capacities",
        family=Family.KNAPSACK_CAPACITIES,
        num_vars=cfg.num_items,
        num_constraints=cfg.num_dims,
        instances=instances,
        fixed_params=[fixed] * cfg.num_instances,
        splits=make_splits(cfg.seed, cfg.split),
        config=conf,
        seed=cfg.seed,
    )


def gen_alloy_synthetic(cfg: AlloyGenConfig) -> Dataset:
    """Covering-LP stand-in for the brass alloy data.

    Each (metal, supplier) slot has its own ``feature_dim`` feature vector and
    the content of that slot follows the shared bracket nonlinearity through a
    per-metal Bernoulli model, so a single slot-wise predictor can learn it.
    Features are stored constraint-major: slot ``i * N + n`` occupies columns
    ``[(i * N + n) * P, (i * N + n + 1) * P)``.
    """
    cfg.validate()
    n, m, p = cfg.num_suppliers, cfg.num_metals, cfg.feature_dim
    w = cfg.noise_half_width
    req = np.asarray(cfg.requirements, dtype=float)
    system = ConstraintSystem(Family.COVERING_LHS, n, m, req)
    B = CounterRNG(cfg.seed, STREAM_STRUCTURE).bernoulli(0.5, size=(m, p))
    lo, hi = cfg.price_range
    instances = []
    for k in range(cfg.num_instances):
        rng = CounterRNG(cfg.seed, STREAM_INSTANCE, k)
        phi = rng.normal(size=(m, n, p))
        z = np.einsum("inp,ip->in", phi, B) / math.sqrt(p)
        contents = poly_bracket(z, cfg.deg) * rng.uniform(1.0 - w, 1.0 + w, size=(m, n))
        q = rng.uniform(lo, hi, size=(n,))
        rho = contents.ravel()
        instances.append(CopInstance(phi.ravel(), rho, q, _solve_true(system, q, rho, k)))
    return Dataset(
        problem="alloy",
        family=Family.COVERING_LHS,
        num_vars=n,
        num_constraints=m,
        instances=instances,
        fixed_params=[req] * cfg.num_instances,
        splits=make_splits(cfg.seed, cfg.split),
        config=_config_dict(cfg),
        seed=cfg.seed,
    )


def _config_dict(cfg) -> dict:
    d = asdict(cfg)
    d["kind"] = type(cfg).__name__
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


GENERATORS = {
    "mdkp_weights": (MdkpGenConfig, gen_mdkp_weights),
    "mdkp_capacities": (MdkpGenConfig, gen_mdkp_capacities),
    "alloy": (AlloyGenConfig, gen_alloy_synthetic),
}


def config_for(problem: str, overrides: dict | None = None):
    if problem not in GENERATORS:
        raise ConfigError(f"unknown problem {problem!r}; choose from {sorted(GENERATORS)}")
    cls = GENERATORS[problem][0]
    fields = set(cls.__dataclass_fields__)
    overrides = dict(overrides or {})
    overrides.pop("kind", None)
    overrides.pop("seed_used", None)
    unknown = set(overrides) - fields
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    for key in ("split", "requirements", "price_range"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    return cls(**overrides)


def generate(problem: str, cfg) -> Dataset:
    return GENERATORS[problem][1](cfg)


def regenerate(data_dir) -> Dataset:
    """Rebuild a dataset from the config and seed recorded in its manifest."""
    man = read_manifest(data_dir)
    cfg = config_for(man["problem"], man["config"])
    return generate(man["problem"], cfg)


# ---------------------------------------------------------------------------
# Alloy CSV exchange format
#
# One header row, then one row per instance:
#   phi_{i}_{n}_{j}   features of metal i / supplier n, j < P   (M*N*P columns)
#   rho_{i}_{n}       true content of metal i in supplier n's ore (M*N columns)
#   price_{n}         unit price of supplier n                   (N columns)
# Groups appear in that order; within a group i is outermost, then n, then j.


def _alloy_header(m, n, p):
    head = [f"phi_{i}_{s}_{j}" for i in range(m) for s in range(n) for j in range(p)]
    head += [f"rho_{i}_{s}" for i in range(m) for s in range(n)]
    head += [f"price_{s}" for s in range(n)]
    return head


def write_alloy_csv(ds: Dataset, path) -> Path:
    if ds.family is not Family.COVERING_LHS:
        raise ValueError("only covering datasets can be exported as alloy CSV")
    m, n = ds.num_constraints, ds.num_vars
    p = ds.num_features // (m * n)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_alloy_header(m, n, p))
        for inst in ds.instances:
            row = np.concatenate([inst.features, inst.rho_true, inst.q])
            writer.writerow([repr(float(v)) for v in row])
    return path


def load_alloy_csv(
    path,
    num_suppliers: int = 10,
    num_metals: int = 2,
    requirements=ALLOY_REQUIREMENTS,
    split=None,
    seed: int = 0,
) -> Dataset:
    """Parse an alloy CSV (layout above) and solve every instance's true LP.

    Malformed rows raise ``DatasetError`` naming the 1-based data row.
    Negative true contents are accepted but logged as a warning listing the
    offending rows.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"alloy CSV not found: {path}")
    m, n = num_metals, num_suppliers
    rows = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        extra = m * n + n
        if (len(header) - extra) <= 0 or (len(header) - extra) % (m * n):
            raise DatasetError(
                f"{path}: header has {len(header)} columns; expected M*N*P + M*N + N with M={m}, N={n}"
            )
        p = (len(header) - extra) // (m * n)
        if header != _alloy_header(m, n, p):
            raise DatasetError(f"{path}: header does not follow the phi/rho/price layout")
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {rownum} has {len(row)} columns, expected {len(header)}")
            try:
                vals = np.array([float(v) for v in row])
            except ValueError:
                raise DatasetError(f"{path}: row {rownum} has a non-numeric entry") from None
            if not np.all(np.isfinite(vals)):
                raise DatasetError(f"{path}: row {rownum} has a non-finite entry")
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    req = np.asarray(requirements, dtype=float)
    system = ConstraintSystem(Family.COVERING_LHS, n, m, req)
    nf = m * n * p
    bad = [k + 1 for k, r in enumerate(rows) if np.any(r[nf : nf + m * n] < 0)]
    if bad:
        log.warning("%s: negative true contents in rows %s", path, bad)
    instances = []
    for k, r in enumerate(rows):
        feats, rho, q = r[:nf], r[nf : nf + m * n], r[nf + m * n :]
        out = solve_cop(system, q, rho)
        if out.status is not Status.OPTIMAL:
            raise DatasetError(f"{path}: row {k + 1} has no optimal purchase plan ({out.status.value})")
        instances.append(CopInstance(feats, rho, q, out.assignment))
    k = len(rows)
    if split is None:
        a = int(round(0.7 * k))
        b = int(round(0.1 * k))
        split = (a, b, k - a - b)
    _check_split(split, k)
    return Dataset(
        problem="alloy",
        family=Family.COVERING_LHS,
        num_vars=n,
        num_constraints=m,
        instances=instances,
        fixed_params=[req] * k,
        splits=make_splits(seed, split),
        config={"kind": "AlloyCsv", "source": path.name, "split": list(split)},
        seed=seed,
    )


__all__ = [
    "AlloyGenConfig",
    "ConfigError",
    "MdkpGenConfig",
    "clip_knapsack",
    "clipping_holds",
    "config_for",
    "gen_alloy_synthetic",
    "gen_mdkp_capacities",
    "gen_mdkp_weights",
    "generate",
    "load_alloy_csv",
    "load_dataset",
    "make_splits",
    "regenerate",
    "write_alloy_csv",
]
