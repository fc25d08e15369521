"""On-disk model bundles: a JSON manifest plus raw float64 array files.

A bundle is a directory holding ``manifest.json`` and an ``arrays/``
folder of flat little-endian float64 files (C row order, shapes recorded
in the manifest). The format has no pickled objects, so files are
bit-exact reproducible and readable from any language.

Everything written here is a deterministic function of the fitted
content: manifests are serialized with sorted keys and carry no
timestamps, so re-running a seeded pipeline reproduces every byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DataError
from .approx import Approximator
from .costmodel import CostModel, CVReport
from .data import DataMatrix, FeatureStats
from .detectors import DetectorSpec, FittedDetector, restore_detector
from .forest import ForestParams, ForestRegressor
from .projection import ProjectionPlan

FORMAT_VERSION = 1


def _forest_params_dict(params: ForestParams) -> dict:
    return {
        "n_trees": params.n_trees,
        "max_depth": params.max_depth,
        "min_samples_leaf": params.min_samples_leaf,
        "mtry": params.mtry,
        "seed": params.seed,
        "bootstrap": params.bootstrap,
    }


def _forest_params_from(d: dict) -> ForestParams:
    return ForestParams(
        n_trees=d["n_trees"], max_depth=d["max_depth"],
        min_samples_leaf=d["min_samples_leaf"], mtry=d["mtry"],
        seed=d["seed"], bootstrap=d["bootstrap"],
    )


class _ArrayStore:
    """Accumulates named arrays and flushes them as .f64 files."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}

    def put(self, name: str, arr: np.ndarray) -> str:
        if name in self._arrays:
            raise DataError(f"duplicate array name {name!r}")
        self._arrays[name] = np.ascontiguousarray(arr, dtype=np.float64)
        return name

    def put_all(self, prefix: str, arrays: dict[str, np.ndarray]) -> list[str]:
        keys = []
        for key in sorted(arrays):
            self.put(f"{prefix}_{key}", arrays[key])
            keys.append(key)
        return keys

    def manifest_entry(self) -> dict:
        return {
            name: {"file": f"arrays/{name}.f64", "shape": list(arr.shape)}
            for name, arr in self._arrays.items()
        }

    def flush(self, root: Path) -> None:
        arrays_dir = root / "arrays"
        arrays_dir.mkdir(parents=True, exist_ok=True)
        for name, arr in self._arrays.items():
            (arrays_dir / f"{name}.f64").write_bytes(
                arr.astype("<f8").tobytes(order="C")
            )


def _write_manifest(root: Path, manifest: dict) -> None:
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    (root / "manifest.json").write_text(text, encoding="utf-8")


def _read_manifest(root: Path) -> dict:
    path = root / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest at {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"bundle format version {version} not supported "
            f"(reader expects {FORMAT_VERSION})"
        )
    return manifest


def _read_arrays(root: Path, manifest: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, entry in manifest["arrays"].items():
        path = root / entry["file"]
        if not path.exists():
            raise DataError(f"bundle is missing array file {entry['file']}")
        flat = np.frombuffer(path.read_bytes(), dtype="<f8")
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) if shape else 1
        if flat.size != expected:
            raise DataError(
                f"array {name!r} has {flat.size} values, shape {shape} "
                f"needs {expected}"
            )
        out[name] = flat.reshape(shape).copy()
    return out


def _plan_manifest(plan: ProjectionPlan, store: _ArrayStore, prefix: str) -> dict:
    entry = {"method": plan.method, "d": plan.d, "k": plan.k, "seed": plan.seed}
    if plan.matrix is not None:
        entry["array"] = store.put(f"{prefix}_plan", plan.matrix)
    return entry


def _plan_from_manifest(entry: dict, arrays: dict[str, np.ndarray]) -> ProjectionPlan:
    matrix = arrays[entry["array"]] if "array" in entry else None
    return ProjectionPlan(method=entry["method"], d=entry["d"], k=entry["k"],
                          seed=entry["seed"], matrix=matrix)


@dataclass
class EnsembleBundle:
    """In-memory view of a fitted-ensemble bundle.

    ``indices`` are the original ensemble positions of the detectors
    (gaps appear when some members failed to fit); ``approximators`` is
    keyed by those same positions.
    """

    config: dict
    stats: FeatureStats | None
    train: DataMatrix
    detectors: list[FittedDetector]
    indices: list[int]
    approximators: dict[int, Approximator]
    path: Path


def save_ensemble(path, config: dict, stats: FeatureStats | None,
                  train: DataMatrix, detectors: list[FittedDetector],
                  indices: list[int] | None = None,
                  approximators: dict[int, Approximator] | None = None) -> Path:
    """Persist a fitted ensemble; see module docstring for the format."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if indices is None:
        indices = list(range(len(detectors)))
    if len(indices) != len(detectors):
        raise DataError("indices and detectors must align")
    store = _ArrayStore()
    manifest: dict = {
        "format_version": FORMAT_VERSION,
        "kind": "ensemble",
        "tool": f"fastod {__version__}",
        "config": config,
    }
    store.put("train_values", train.values)
    manifest["train"] = {"n": train.n, "d": train.d, "array": "train_values"}
    if stats is not None:
        store.put("scale_mean", stats.mean)
        store.put("scale_std", stats.std)
        store.put("scale_degenerate", stats.degenerate.astype(np.float64))
        manifest["standardize"] = {
            "mean": "scale_mean", "std": "scale_std",
            "degenerate": "scale_degenerate",
        }
    entries = []
    entry_by_index = {}
    for i, fd in zip(indices, detectors):
        prefix = f"det{i:03d}"
        state_keys = store.put_all(prefix, fd.estimator._export_state())
        entry = {
            "index": i,
            "algo": fd.spec.algo,
            "params": fd.spec.params,
            "seed": fd.spec.seed,
            "plan": _plan_manifest(fd.plan, store, prefix),
            "state_prefix": prefix,
            "state_keys": state_keys,
        }
        entries.append(entry)
        entry_by_index[i] = entry
    manifest["detectors"] = entries
    approximators = approximators or {}
    for i, approximator in approximators.items():
        _put_approximator(store, entry_by_index[i], i, approximator)
    manifest["arrays"] = store.manifest_entry()
    store.flush(root)
    _write_manifest(root, manifest)
    return root


def _put_approximator(store: _ArrayStore, det_entry: dict, index: int,
                      approximator: Approximator) -> None:
    prefix = f"apx{index:03d}"
    keys = store.put_all(prefix, approximator.forest.to_arrays())
    det_entry["approximator"] = {
        "forest_params": _forest_params_dict(approximator.forest._params()),
        "state_prefix": prefix,
        "state_keys": keys,
    }


def _collect_state(prefix: str, keys: list[str],
                   arrays: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    state = {}
    for key in keys:
        name = f"{prefix}_{key}"
        if name not in arrays:
            raise DataError(f"bundle is missing state array {name!r}")
        state[key] = arrays[name]
    return state


def load_ensemble(path) -> EnsembleBundle:
    root = Path(path)
    manifest = _read_manifest(root)
    if manifest.get("kind") != "ensemble":
        raise DataError(f"bundle at {root} is not an ensemble bundle")
    arrays = _read_arrays(root, manifest)
    train = DataMatrix(arrays[manifest["train"]["array"]])
    stats = None
    if "standardize" in manifest:
        entry = manifest["standardize"]
        stats = FeatureStats(
            mean=arrays[entry["mean"]],
            std=arrays[entry["std"]],
            degenerate=arrays[entry["degenerate"]].astype(bool),
        )
    detectors = []
    indices = []
    approximators: dict[int, Approximator] = {}
    for entry in manifest["detectors"]:
        spec = DetectorSpec(algo=entry["algo"], params=entry["params"],
                            seed=entry["seed"])
        plan = _plan_from_manifest(entry["plan"], arrays)
        state = _collect_state(entry["state_prefix"], entry["state_keys"], arrays)
        detectors.append(restore_detector(spec, plan, state))
        indices.append(entry["index"])
        if "approximator" in entry:
            aentry = entry["approximator"]
            forest = ForestRegressor.from_arrays(
                _forest_params_from(aentry["forest_params"]),
                _collect_state(aentry["state_prefix"], aentry["state_keys"],
                               arrays),
            )
            approximators[entry["index"]] = Approximator(
                spec=spec, plan=plan, forest=forest,
            )
    return EnsembleBundle(
        config=manifest.get("config", {}),
        stats=stats, train=train, detectors=detectors, indices=indices,
        approximators=approximators, path=root,
    )


def add_approximators(path, approximators: dict[int, Approximator]) -> None:
    """Insert forest stand-ins into an existing ensemble bundle."""
    root = Path(path)
    bundle = load_ensemble(root)
    merged = dict(bundle.approximators)
    merged.update(approximators)
    save_ensemble(root, bundle.config, bundle.stats, bundle.train,
                  bundle.detectors, indices=bundle.indices,
                  approximators=merged)


def save_cost_model(path, model: CostModel, report: CVReport | None = None) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    store = _ArrayStore()
    keys = store.put_all("forest", model.forest.to_arrays())
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "cost_model",
        "tool": f"fastod {__version__}",
        "algo_vocabulary": model.algo_vocabulary,
        "target_transform": model.target_transform,
        "forest_params": _forest_params_dict(model.forest._params()),
        "state_prefix": "forest",
        "state_keys": keys,
        "arrays": store.manifest_entry(),
    }
    if report is not None:
        manifest["cv_report"] = report.as_dict()
    store.flush(root)
    _write_manifest(root, manifest)
    return root


def load_cost_model(path) -> CostModel:
    root = Path(path)
    manifest = _read_manifest(root)
    if manifest.get("kind") != "cost_model":
        raise DataError(f"bundle at {root} is not a cost-model bundle")
    arrays = _read_arrays(root, manifest)
    forest = ForestRegressor.from_arrays(
        _forest_params_from(manifest["forest_params"]),
        _collect_state(manifest["state_prefix"], manifest["state_keys"], arrays),
    )
    return CostModel(
        forest=forest,
        algo_vocabulary=list(manifest["algo_vocabulary"]),
        target_transform=manifest["target_transform"],
    )
