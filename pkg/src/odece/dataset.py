"""In-memory datasets and their on-disk directory format.

A dataset directory holds ``manifest.json`` plus five CSV shards with one
row per instance, in instance order:

    features.csv   f0 .. f{P-1}          feature vector
    rho.csv        r0 .. r{S-1}          true predicted-slot parameters
    fixed.csv      c0 .. c{F-1}          known (non-predicted) parameters
    objective.csv  q0 .. q{N-1}          minimisation coefficients
    x_star.csv     x0 .. x{N-1}          optimum under the true parameters

Numbers are written with Python's shortest round-trip ``repr`` so a reload
is bit-exact.  Files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cop_core import ConstraintSystem, ContractError, CopInstance, Family

FORMAT_VERSION = 1
SHARDS = ("features", "rho", "fixed", "objective", "x_star")
_PREFIX = {"features": "f", "rho": "r", "fixed": "c", "objective": "q", "x_star": "x"}


class DatasetError(ValueError):
    """Malformed or missing dataset files."""


@dataclass
class Dataset:
    problem: str
    family: Family
    num_vars: int
    num_constraints: int
    instances: list[CopInstance]
    fixed_params: list[np.ndarray]
    splits: dict[str, list[int]]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __len__(self):
        return len(self.instances)

    def system(self, k: int) -> ConstraintSystem:
        return ConstraintSystem(self.family, self.num_vars, self.num_constraints, self.fixed_params[k])

    @property
    def num_features(self) -> int:
        return int(np.asarray(self.instances[0].features).size)

    def features(self, idx) -> np.ndarray:
        return np.stack([self.instances[k].features for k in idx])

    def manifest(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "problem": self.problem,
            "family": self.family.value,
            "num_vars": self.num_vars,
            "num_constraints": self.num_constraints,
            "num_features": self.num_features,
            "num_instances": len(self),
            "seed": self.seed,
            "config": self.config,
            "splits": {k: [int(i) for i in v] for k, v in self.splits.items()},
        }


def check_splits(splits: dict[str, list[int]], k: int) -> None:
    seen = np.concatenate([np.asarray(v, dtype=np.int64) for v in splits.values()])
    if seen.size != k or not np.array_equal(np.sort(seen), np.arange(k)):
        raise DatasetError("train/val/test splits must partition the instance indices")


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_matrix(path: Path, prefix: str, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    rows = [np.asarray(r, dtype=float).ravel() for r in rows]
    width = rows[0].size if rows else 0
    writer.writerow([f"{prefix}{j}" for j in range(width)])
    for r in rows:
        writer.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _read_matrix(path: Path, prefix: str, expected_rows: int) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing dataset shard {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if any(not h.startswith(prefix) for h in header):
            raise DatasetError(f"{path}: unexpected header {header[:3]}...")
        out = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {rownum} has {len(row)} columns, expected {len(header)}")
            try:
                out.append([float(v) for v in row])
            except ValueError:
                raise DatasetError(f"{path}: row {rownum} has a non-numeric entry") from None
    if len(out) != expected_rows:
        raise DatasetError(f"{path}: {len(out)} rows, expected {expected_rows}")
    return np.array(out, dtype=float).reshape(expected_rows, len(header))


def save_dataset(ds: Dataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"cannot write to {out}")
    check_splits(ds.splits, len(ds))
    if any(inst.x_star is None for inst in ds.instances):
        raise DatasetError("every instance needs x_star before saving")
    manifest = json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(manifest, encoding="utf-8", newline="\n")
    cols = {
        "features": [i.features for i in ds.instances],
        "rho": [i.rho_true for i in ds.instances],
        "fixed": ds.fixed_params,
        "objective": [i.q for i in ds.instances],
        "x_star": [i.x_star for i in ds.instances],
    }
    for name in SHARDS:
        _write_matrix(out / f"{name}.csv", _PREFIX[name], cols[name])
    return out


def read_manifest(data_dir) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.is_file():
        raise DatasetError(f"no manifest at {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc})") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported format_version {manifest.get('format_version')}")
    return manifest


def load_dataset(data_dir) -> Dataset:
    root = Path(data_dir)
    man = read_manifest(root)
    k = int(man["num_instances"])
    mats = {name: _read_matrix(root / f"{name}.csv", _PREFIX[name], k) for name in SHARDS}
    instances = [
        CopInstance(mats["features"][i], mats["rho"][i], mats["objective"][i], mats["x_star"][i])
        for i in range(k)
    ]
    ds = Dataset(
        problem=man["problem"],
        family=Family(man["family"]),
        num_vars=int(man["num_vars"]),
        num_constraints=int(man["num_constraints"]),
        instances=instances,
        fixed_params=list(mats["fixed"]),
        splits={s: list(v) for s, v in man["splits"].items()},
        config=man.get("config", {}),
        seed=int(man.get("seed", 0)),
    )
    check_splits(ds.splits, k)
    for i in range(k):
        try:
            ds.instances[i].validate(ds.system(i))
        except ContractError as exc:
            raise DatasetError(f"instance {i}: {exc}") from None
    return ds
