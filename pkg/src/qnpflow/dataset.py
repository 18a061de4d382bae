"""Load-perturbation dataset generation, deterministic splitting, scaling, and file I/O.

Angle convention: targets are radians in memory and degrees in CSV exports
(columns named delta_*_deg). The CSV reader converts back to radians.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    NotConverged,
    ParseError,
    SingularJacobian,
    TooFewConverged,
    ValidationError,
)
from .grid import BusKind, NetworkModel
from .neuralnet import TrainSet
from .powerflow import SolveOptions, solve

CONVERGED_SHARE = 0.9
CONSTANT_EPS = 1e-12


@dataclass(frozen=True)
class GenerateOptions:
    """Knobs for the perturbation scheme and the embedded solver."""

    coupled: bool = False
    perturb_all_loads: bool = False
    solver: SolveOptions = field(default_factory=SolveOptions)


@dataclass
class SampleRecord:
    """One perturbed load case: draw factors, solver inputs, solved targets."""

    sample_id: int
    scale_factors: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    converged: bool


@dataclass
class DatasetMeta:
    seed: int
    n_requested: int
    n_converged: int
    mult_low: float
    mult_high: float
    coupled: bool
    perturb_all_loads: bool
    network_fingerprint: str
    mult_labels: list[str]
    input_labels: list[str]
    target_labels: list[str]
    split_ratio: float | None = None
    split_seed: int | None = None
    scaler_kind: str | None = None


def _labels(net: NetworkModel, opts: GenerateOptions) -> tuple[list[str], list[str], list[str]]:
    perturbed = range(net.n) if opts.perturb_all_loads else net.pq_indices
    mults = []
    for i in perturbed:
        bus = net.buses[i].id
        if opts.coupled:
            mults.append(f"mult_pq{bus}")
        else:
            mults.extend([f"mult_p{bus}", f"mult_q{bus}"])
    inputs = [f"p_load_{b.id}" for b in net.buses] + [f"q_load_{b.id}" for b in net.buses]
    inputs.append(f"v_slack_{net.buses[net.slack_index].id}")
    inputs.extend(f"v_pv_{net.buses[i].id}" for i in net.pv_indices)
    targets = [f"v_mag_{net.buses[i].id}" for i in net.pq_indices]
    targets.extend(f"delta_{net.buses[i].id}_deg" for i in net.non_slack_indices)
    return mults, inputs, targets


def generate(
    net: NetworkModel,
    n: int,
    mult_range: tuple[float, float] = (0.8, 1.2),
    seed: int = 0,
    opts: GenerateOptions | None = None,
) -> tuple[list[SampleRecord], DatasetMeta]:
    """Draw uniform load multipliers, solve each case, and record the map.

    Each sample uses its own generator seeded by (seed, index), so sample i
    is identical no matter how many samples are requested. Non-converged
    cases are kept with converged=False and NaN targets. Raises
    TooFewConverged when fewer than 90% of the cases solve.
    """
    opts = opts if opts is not None else GenerateOptions()
    low, high = float(mult_range[0]), float(mult_range[1])
    if not (0 < low <= high):
        raise ValidationError(f"multiplier range must satisfy 0 < low <= high, got {mult_range}")
    if n < 1:
        raise ValidationError(f"need at least one sample, got {n}")

    perturbed = list(range(net.n)) if opts.perturb_all_loads else list(net.pq_indices)
    mult_labels, input_labels, target_labels = _labels(net, opts)
    n_targets = len(net.pq_indices) + len(net.non_slack_indices)

    samples: list[SampleRecord] = []
    n_converged = 0
    for idx in range(n):
        rng = np.random.default_rng([seed, idx])
        factors = []
        buses = list(net.buses)
        for i in perturbed:
            if opts.coupled:
                m = rng.uniform(low, high)
                mp, mq = m, m
                factors.append(m)
            else:
                mp = rng.uniform(low, high)
                mq = rng.uniform(low, high)
                factors.extend([mp, mq])
            buses[i] = replace(buses[i], p_load=buses[i].p_load * mp, q_load=buses[i].q_load * mq)
        case = NetworkModel(buses=tuple(buses), ybus=net.ybus, base=net.base)

        inputs = np.concatenate([
            [net.base.to_pu(b.p_load) for b in case.buses],
            [net.base.to_pu(b.q_load) for b in case.buses],
            [case.buses[case.slack_index].v_mag],
            [case.buses[i].v_mag for i in case.pv_indices],
        ])
        try:
            sol = solve(case, opts.solver)
            targets = np.concatenate([
                sol.v_mag[list(case.pq_indices)],
                sol.delta[list(case.non_slack_indices)],
            ])
            converged = True
            n_converged += 1
        except (NotConverged, SingularJacobian):
            targets = np.full(n_targets, np.nan)
            converged = False
        samples.append(SampleRecord(
            sample_id=idx,
            scale_factors=np.array(factors),
            inputs=inputs,
            targets=targets,
            converged=converged,
        ))

    if n_converged < CONVERGED_SHARE * n:
        raise TooFewConverged(
            f"only {n_converged}/{n} samples converged (need {CONVERGED_SHARE:.0%})"
        )
    meta = DatasetMeta(
        seed=seed,
        n_requested=n,
        n_converged=n_converged,
        mult_low=low,
        mult_high=high,
        coupled=opts.coupled,
        perturb_all_loads=opts.perturb_all_loads,
        network_fingerprint=net.fingerprint,
        mult_labels=mult_labels,
        input_labels=input_labels,
        target_labels=target_labels,
    )
    return samples, meta


def split(samples: list[SampleRecord], ratio: float, seed: int) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Shuffle deterministically and cut at floor(n * ratio)."""
    if not 0 < ratio < 1:
        raise ValidationError(f"split ratio must lie in (0, 1), got {ratio}")
    perm = np.random.default_rng(seed).permutation(len(samples))
    cut = int(math.floor(len(samples) * ratio))
    train = [samples[i] for i in perm[:cut]]
    test = [samples[i] for i in perm[cut:]]
    return train, test


@dataclass
class Scaler:
    """Per-column affine scaler; constant columns pass through unchanged."""

    kind: str
    center: np.ndarray
    scale: np.ndarray
    passthrough: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        safe = np.where(self.passthrough, 1.0, self.scale)
        return np.where(self.passthrough, x, (x - self.center) / safe)

    def invert(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        safe = np.where(self.passthrough, 1.0, self.scale)
        return np.where(self.passthrough, x, x * safe + self.center)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "passthrough": self.passthrough.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scaler":
        return cls(
            kind=doc["kind"],
            center=np.array(doc["center"], dtype=float),
            scale=np.array(doc["scale"], dtype=float),
            passthrough=np.array(doc["passthrough"], dtype=bool),
        )


def fit_scaler(x: np.ndarray, kind: str = "minmax") -> Scaler:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if kind == "minmax":
        center = x.min(axis=0)
        scale = x.max(axis=0) - center
    elif kind == "standard":
        center = x.mean(axis=0)
        scale = x.std(axis=0)
    else:
        raise ValidationError(f"unknown scaler kind {kind!r}")
    return Scaler(kind=kind, center=center, scale=scale, passthrough=scale < CONSTANT_EPS)


@dataclass
class ScaledDataset:
    """Train/test arrays in scaled space plus the fitted scalers."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    feature_scaler: Scaler
    target_scaler: Scaler
    meta: DatasetMeta

    def to_train_set(self) -> TrainSet:
        return TrainSet(
            x_train=self.x_train,
            y_train=self.y_train,
            x_test=self.x_test,
            y_test=self.y_test,
            invert_targets=self.target_scaler.invert,
        )


def _arrays(samples: list[SampleRecord]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([s.inputs for s in samples]),
        np.array([s.targets for s in samples]),
    )


def build_scaled(
    samples: list[SampleRecord],
    meta: DatasetMeta,
    ratio: float = 0.8,
    seed: int | None = None,
    scaler_kind: str = "minmax",
) -> ScaledDataset:
    """Filter to converged samples, split, and fit scalers on the train part only."""
    usable = [s for s in samples if s.converged]
    split_seed = meta.seed if seed is None else seed
    train, test = split(usable, ratio, split_seed)
    if not train or not test:
        raise ValidationError(f"split left an empty side ({len(train)} train / {len(test)} test)")
    x_tr, y_tr = _arrays(train)
    x_te, y_te = _arrays(test)
    fs = fit_scaler(x_tr, scaler_kind)
    ts = fit_scaler(y_tr, scaler_kind)
    meta = replace(meta, split_ratio=ratio, split_seed=split_seed, scaler_kind=scaler_kind)
    return ScaledDataset(
        x_train=fs.transform(x_tr),
        y_train=ts.transform(y_tr),
        x_test=fs.transform(x_te),
        y_test=ts.transform(y_te),
        feature_scaler=fs,
        target_scaler=ts,
        meta=meta,
    )


def _is_angle(label: str) -> bool:
    return label.startswith("delta_") and label.endswith("_deg")


def write_dataset_csv(samples: list[SampleRecord], meta: DatasetMeta, path: str | Path) -> None:
    """One row per sample; angle targets converted to degrees per the labels."""
    header = ["sample_id", *meta.mult_labels, *meta.input_labels, *meta.target_labels, "converged"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            targets = [
                math.degrees(v) if _is_angle(lab) else v
                for lab, v in zip(meta.target_labels, s.targets)
            ]
            writer.writerow([
                s.sample_id,
                *(repr(float(v)) for v in s.scale_factors),
                *(repr(float(v)) for v in s.inputs),
                *(repr(float(v)) for v in targets),
                int(s.converged),
            ])


def write_meta_json(meta: DatasetMeta, path: str | Path,
                    feature_scaler: Scaler | None = None,
                    target_scaler: Scaler | None = None) -> None:
    doc = {
        "seed": meta.seed,
        "n_requested": meta.n_requested,
        "n_converged": meta.n_converged,
        "mult_low": meta.mult_low,
        "mult_high": meta.mult_high,
        "coupled": meta.coupled,
        "perturb_all_loads": meta.perturb_all_loads,
        "network_fingerprint": meta.network_fingerprint,
        "mult_labels": meta.mult_labels,
        "input_labels": meta.input_labels,
        "target_labels": meta.target_labels,
        "split_ratio": meta.split_ratio,
        "split_seed": meta.split_seed,
        "scaler_kind": meta.scaler_kind,
        "feature_scaler": feature_scaler.to_dict() if feature_scaler else None,
        "target_scaler": target_scaler.to_dict() if target_scaler else None,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_meta_json(path: str | Path) -> DatasetMeta:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        return DatasetMeta(**{k: doc[k] for k in (
            "seed", "n_requested", "n_converged", "mult_low", "mult_high", "coupled",
            "perturb_all_loads", "network_fingerprint", "mult_labels", "input_labels",
            "target_labels", "split_ratio", "split_seed", "scaler_kind",
        )})
    except KeyError as exc:
        raise ParseError(f"{path}: missing key {exc}") from None


def read_dataset_csv(path: str | Path, meta: DatasetMeta) -> list[SampleRecord]:
    """Inverse of write_dataset_csv; angle columns come back as radians."""
    expected = ["sample_id", *meta.mult_labels, *meta.input_labels, *meta.target_labels, "converged"]
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise ParseError(f"{path}: header {header} does not match dataset metadata")
        n_m, n_i, n_t = len(meta.mult_labels), len(meta.input_labels), len(meta.target_labels)
        for row in reader:
            if len(row) != len(expected):
                raise ParseError(f"{path}: row with {len(row)} fields, expected {len(expected)}")
            vals = [float(v) for v in row[1: 1 + n_m + n_i + n_t]]
            targets = np.array([
                math.radians(v) if _is_angle(lab) else v
                for lab, v in zip(meta.target_labels, vals[n_m + n_i:])
            ])
            samples.append(SampleRecord(
                sample_id=int(row[0]),
                scale_factors=np.array(vals[:n_m]),
                inputs=np.array(vals[n_m: n_m + n_i]),
                targets=targets,
                converged=bool(int(row[-1])),
            ))
    return samples
