"""Bus-level network model: bus records, admittance matrix, file I/O, per-unit scheduling."""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

SYMMETRY_TOL = 1e-9


class BusKind(str, enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class BusRecord:
    """One bus row in physical units.

    Loads and generation are MW / Mvar, voltage magnitude is per-unit and the
    angle is degrees. Generation fields are ``None`` exactly where the
    quantity is an unknown of the power-flow problem: P and Q at the slack
    bus, Q at PV buses. ``None`` is an absent-marker, not a zero.
    """

    id: int
    kind: BusKind
    p_load: float
    q_load: float
    v_mag: float
    v_angle: float
    p_gen: float | None = None
    q_gen: float | None = None


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Dense complex bus admittance matrix with polar and rectangular views."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"ybus must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def g(self) -> np.ndarray:
        """Conductance G = Re(Y)."""
        return self.entries.real

    @property
    def b(self) -> np.ndarray:
        """Susceptance B = Im(Y)."""
        return self.entries.imag

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.entries)

    @property
    def angle(self) -> np.ndarray:
        """Entry angles Theta in radians."""
        return np.angle(self.entries)


@dataclass(frozen=True)
class PerUnitBase:
    """System power base for per-unit normalization."""

    s_base: float = 100.0

    def __post_init__(self):
        if not self.s_base > 0:
            raise ValidationError(f"s_base must be positive, got {self.s_base}")

    def to_pu(self, mva: float) -> float:
        return mva / self.s_base

    def from_pu(self, pu: float) -> float:
        return pu * self.s_base


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network: ordered bus records, YBUS, power base, content hash."""

    buses: tuple[BusRecord, ...]
    ybus: AdmittanceMatrix
    base: PerUnitBase
    fingerprint: str = ""

    def __post_init__(self):
        _validate(self.buses, self.ybus, self.base)
        if not self.fingerprint:
            digest = hashlib.sha256(
                json.dumps(_payload(self), sort_keys=True).encode()
            ).hexdigest()
            object.__setattr__(self, "fingerprint", digest)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.kind is BusKind.SLACK)

    @property
    def pv_indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.buses) if b.kind is BusKind.PV)

    @property
    def pq_indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.buses) if b.kind is BusKind.PQ)

    @property
    def non_slack_indices(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.buses) if b.kind is not BusKind.SLACK)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ParseError(f"{path}: missing required key {key!r}")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _optional_number(obj: dict, key: str, where: str) -> float | None:
    if key not in obj or obj[key] is None:
        return None
    return _number(obj[key], f"{where}.{key}")


def _parse_bus(obj, idx: int) -> BusRecord:
    where = f"buses[{idx}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    kind_token = _require(obj, "kind", where)
    try:
        kind = BusKind(str(kind_token).lower())
    except ValueError:
        raise ParseError(f"{where}: unknown bus kind {kind_token!r}") from None
    return BusRecord(
        id=int(_number(_require(obj, "id", where), f"{where}.id")),
        kind=kind,
        p_load=_number(_require(obj, "p_load", where), f"{where}.p_load"),
        q_load=_number(_require(obj, "q_load", where), f"{where}.q_load"),
        v_mag=_number(_require(obj, "v_mag", where), f"{where}.v_mag"),
        v_angle=_number(_require(obj, "v_angle", where), f"{where}.v_angle"),
        p_gen=_optional_number(obj, "p_gen", where),
        q_gen=_optional_number(obj, "q_gen", where),
    )


def _parse_ybus(rows) -> AdmittanceMatrix:
    if not isinstance(rows, list) or not rows:
        raise ParseError("ybus: expected a non-empty array of rows")
    n = len(rows)
    arr = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"ybus row {i}: expected {n} entries")
        for j, pair in enumerate(row):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError(f"ybus[{i}][{j}]: expected a [re, im] pair")
            re = _number(pair[0], f"ybus[{i}][{j}][0]")
            im = _number(pair[1], f"ybus[{i}][{j}][1]")
            arr[i, j] = complex(re, im)
    return AdmittanceMatrix(arr)


def _validate(buses, ybus: AdmittanceMatrix, base: PerUnitBase):
    n = len(buses)
    if n == 0:
        raise ValidationError("network has no buses")
    if ybus.n != n:
        raise ValidationError(f"ybus is {ybus.n}x{ybus.n} but network has {n} buses")
    asym = np.max(np.abs(ybus.entries - ybus.entries.T)) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise ValidationError(f"ybus asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    slack_count = sum(1 for b in buses if b.kind is BusKind.SLACK)
    if slack_count != 1:
        raise ValidationError(f"expected exactly one slack bus, found {slack_count}")
    for i, b in enumerate(buses):
        if b.id != i + 1:
            raise ValidationError(f"bus ids must be 1..{n} in order, got {b.id} at position {i}")
        if b.kind is BusKind.SLACK:
            if b.p_gen is not None or b.q_gen is not None:
                raise ValidationError(f"bus {b.id}: slack generation is an unknown, not an input")
            if not b.v_mag > 0:
                raise ValidationError(f"bus {b.id}: slack v_mag must be positive")
        elif b.kind is BusKind.PV:
            if b.p_gen is None:
                raise ValidationError(f"bus {b.id}: PV bus requires p_gen")
            if b.q_gen is not None:
                raise ValidationError(f"bus {b.id}: PV reactive generation is an unknown, not an input")
            if not b.v_mag > 0:
                raise ValidationError(f"bus {b.id}: PV v_mag must be positive")
        else:
            if b.p_gen is None or b.q_gen is None:
                raise ValidationError(f"bus {b.id}: PQ bus requires p_gen and q_gen (zero is allowed)")


def load_network(path: str | Path) -> NetworkModel:
    """Parse and validate a network file, returning an immutable model.

    Raises ParseError for malformed content and ValidationError for semantic
    violations (no or multiple slack buses, asymmetric YBUS, bad ids).
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    base = PerUnitBase(_number(_require(doc, "base_mva", str(path)), "base_mva"))
    bus_objs = _require(doc, "buses", str(path))
    if not isinstance(bus_objs, list):
        raise ParseError(f"{path}: buses must be an array")
    buses = tuple(_parse_bus(obj, i) for i, obj in enumerate(bus_objs))
    ybus = _parse_ybus(_require(doc, "ybus", str(path)))
    return NetworkModel(buses=buses, ybus=ybus, base=base)


def _payload(net: NetworkModel) -> dict:
    bus_rows = []
    for b in net.buses:
        row = {
            "id": b.id,
            "kind": b.kind.value,
            "p_load": b.p_load,
            "q_load": b.q_load,
            "v_mag": b.v_mag,
            "v_angle": b.v_angle,
        }
        if b.p_gen is not None:
            row["p_gen"] = b.p_gen
        if b.q_gen is not None:
            row["q_gen"] = b.q_gen
        bus_rows.append(row)
    ybus_rows = [
        [[net.ybus.entries[i, j].real, net.ybus.entries[i, j].imag] for j in range(net.n)]
        for i in range(net.n)
    ]
    return {"base_mva": net.base.s_base, "buses": bus_rows, "ybus": ybus_rows}


def save_network(net: NetworkModel, path: str | Path):
    """Write a network file that round-trips to bit-identical bus records."""
    Path(path).write_text(json.dumps(_payload(net), indent=2) + "\n")


def scheduled_injections(net: NetworkModel) -> list[tuple[float | None, float | None]]:
    """Per-bus scheduled (P, Q) in per-unit; None where the quantity is unknown.

    P_sch = (p_gen - p_load) / s_base. Slack P and Q and PV-bus Q have no
    schedule and come back as None.
    """
    out: list[tuple[float | None, float | None]] = []
    for b in net.buses:
        if b.kind is BusKind.SLACK:
            out.append((None, None))
        elif b.kind is BusKind.PV:
            out.append((net.base.to_pu(b.p_gen - b.p_load), None))
        else:
            out.append(
                (net.base.to_pu(b.p_gen - b.p_load), net.base.to_pu(b.q_gen - b.q_load))
            )
    return out
