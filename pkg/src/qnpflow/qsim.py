"""Collision-model simulation of a qubit probe coupled to spin-J information reservoirs.

The probe repeatedly interacts with fresh reservoir units prepared in
spin-coherent states. Each collision is a joint unitary generated by the
exchange Hamiltonian H = g (sigma+ J- + sigma- J+), followed by a partial
trace over the unit and optional amplitude damping of the probe.

Probe basis convention: index 0 is excited, index 1 is ground, so
sigma_z = diag(+1, -1) and a unit at theta=0 pumps the probe toward +1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .activation import ActivationCurve
from .errors import InvalidDensityMatrix, InvalidSpin, NoCoupling, ValidationError

STEADY_TOL = 1e-9

SIGMA_Z = np.diag([1.0, -1.0])
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_MINUS = SIGMA_PLUS.T.copy()


class PropagatorMode(enum.Enum):
    """How the per-collision propagator is built from the exchange Hamiltonian."""

    EXACT_EXPONENTIAL = "exact"
    SECOND_ORDER_TRUNCATION = "truncated"


def _check_spin(spin_j: float) -> float:
    two_j = 2.0 * spin_j
    if abs(two_j - round(two_j)) > 1e-9 or spin_j < 0.5:
        raise InvalidSpin(f"spin must be a half-integer >= 1/2, got {spin_j}")
    return spin_j


@dataclass(frozen=True)
class ReservoirSpec:
    """One information reservoir: unit state angles, spin size, coupling."""

    theta: float
    phi: float = 0.0
    spin_j: float = 0.5
    g: float = 0.01

    def __post_init__(self):
        _check_spin(self.spin_j)
        if not 0.0 <= self.theta <= math.pi:
            raise ValidationError(f"theta must lie in [0, pi], got {self.theta}")
        if self.g < 0:
            raise ValidationError(f"coupling g must be non-negative, got {self.g}")


@dataclass(frozen=True)
class CollisionParams:
    tau: float = 3.0
    n_collisions: int = 20000
    gamma: float = 0.0
    propagator_mode: PropagatorMode = PropagatorMode.EXACT_EXPONENTIAL

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if self.n_collisions < 1:
            raise ValidationError(f"n_collisions must be at least 1, got {self.n_collisions}")
        if self.gamma < 0:
            raise ValidationError(f"gamma must be non-negative, got {self.gamma}")


@dataclass(frozen=True)
class DensityMatrix:
    """Square complex matrix wrapper with density-operator checks on demand."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidDensityMatrix(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr.view(float))):
            raise InvalidDensityMatrix("matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def validate(self, trace_tol: float = 1e-10, herm_tol: float = 1e-10,
                 eig_floor: float = -1e-9) -> "DensityMatrix":
        """Check unit trace, hermiticity and spectrum; raise InvalidDensityMatrix."""
        tr = np.trace(self.entries)
        if abs(tr - 1.0) > trace_tol:
            raise InvalidDensityMatrix(f"trace {tr} deviates from 1 beyond {trace_tol}")
        herm = np.max(np.abs(self.entries - self.entries.conj().T))
        if herm > herm_tol:
            raise InvalidDensityMatrix(f"hermiticity defect {herm:.3e} exceeds {herm_tol}")
        lo = float(np.min(np.linalg.eigvalsh(self.entries)))
        if lo < eig_floor:
            raise InvalidDensityMatrix(f"eigenvalue {lo:.3e} below floor {eig_floor}")
        return self

    def expect(self, op: np.ndarray) -> float:
        """Normalized expectation value tr(rho op) / tr(rho)."""
        return float((np.trace(self.entries @ op) / np.trace(self.entries)).real)


def pure_state(vector: np.ndarray) -> DensityMatrix:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


def excited_state() -> DensityMatrix:
    return pure_state(np.array([1.0, 0.0]))


def ground_state() -> DensityMatrix:
    return pure_state(np.array([0.0, 1.0]))


def plus_state() -> DensityMatrix:
    """(|e> + |g>)/sqrt(2), the probe initialization used throughout."""
    return pure_state(np.array([1.0, 1.0]))


@dataclass(frozen=True)
class SpinOperators:
    spin_j: float
    j_plus: np.ndarray
    j_minus: np.ndarray
    j_z: np.ndarray

    @property
    def dim(self) -> int:
        return self.j_z.shape[0]


def spin_ladder(spin_j: float) -> SpinOperators:
    """Ladder and z operators in the |J, m> basis ordered m = J down to -J.

    <m+1| J+ |m> = sqrt(J(J+1) - m(m+1)).
    """
    j = _check_spin(spin_j)
    dim = int(round(2 * j + 1))
    m = j - np.arange(dim)
    j_z = np.diag(m)
    j_plus = np.zeros((dim, dim))
    for k in range(1, dim):
        j_plus[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return SpinOperators(spin_j=j, j_plus=j_plus, j_minus=j_plus.T.copy(), j_z=j_z)


def reservoir_unit_state(spec: ReservoirSpec) -> DensityMatrix:
    """Spin-coherent pure state |theta, phi> of one reservoir unit.

    Amplitude on m = J - k is sqrt(C(2J, k)) cos(theta/2)^(2J-k)
    (e^{i phi} sin(theta/2))^k, which gives <J_z> = J cos(theta).
    """
    two_j = int(round(2 * _check_spin(spec.spin_j)))
    cos_h = math.cos(spec.theta / 2.0)
    sin_h = math.sin(spec.theta / 2.0)
    phase = complex(math.cos(spec.phi), math.sin(spec.phi))
    amps = np.array(
        [
            math.sqrt(math.comb(two_j, k)) * cos_h ** (two_j - k) * (phase * sin_h) ** k
            for k in range(two_j + 1)
        ]
    )
    return DensityMatrix(np.outer(amps, amps.conj()))


def collision_unitary(spec: ReservoirSpec, params: CollisionParams) -> np.ndarray:
    """Joint probe-unit propagator for one collision.

    ExactExponential diagonalizes H = g (sigma+ J- + sigma- J+) and
    exponentiates the spectrum. SecondOrderTruncation keeps the literal
    polynomial 1 - i tau H - (tau^2/2) H^2, which is not exactly unitary and
    exists to mirror the truncated propagator form.
    """
    ops = spin_ladder(spec.spin_j)
    ham = spec.g * (np.kron(SIGMA_PLUS, ops.j_minus) + np.kron(SIGMA_MINUS, ops.j_plus))
    if params.propagator_mode is PropagatorMode.SECOND_ORDER_TRUNCATION:
        eye = np.eye(ham.shape[0], dtype=complex)
        return eye - 1j * params.tau * ham - 0.5 * params.tau**2 * (ham @ ham)
    w, v = np.linalg.eigh(ham)
    return (v * np.exp(-1j * w * params.tau)) @ v.conj().T


def _damping_kraus(params: CollisionParams) -> tuple[np.ndarray, np.ndarray] | None:
    if params.gamma <= 0:
        return None
    p = 1.0 - math.exp(-params.gamma * params.tau)
    k0 = np.array([[math.sqrt(1.0 - p), 0.0], [0.0, 1.0]], dtype=complex)
    k1 = np.array([[0.0, 0.0], [math.sqrt(p), 0.0]], dtype=complex)
    return k0, k1


def _collide(probe_arr: np.ndarray, unit_arr: np.ndarray, u: np.ndarray,
             kraus: tuple[np.ndarray, np.ndarray] | None) -> np.ndarray:
    dim = unit_arr.shape[0]
    joint = np.kron(probe_arr, unit_arr)
    evolved = u @ joint @ u.conj().T
    reduced = np.einsum("ikjk->ij", evolved.reshape(2, dim, 2, dim))
    if kraus is not None:
        k0, k1 = kraus
        reduced = k0 @ reduced @ k0.conj().T + k1 @ reduced @ k1.conj().T
    return reduced


def collide_once(probe: DensityMatrix, spec: ReservoirSpec, u: np.ndarray,
                 params: CollisionParams) -> DensityMatrix:
    """One collision: joint unitary, trace out the fresh unit, damp the probe."""
    unit = reservoir_unit_state(spec)
    return DensityMatrix(_collide(probe.entries, unit.entries, u, _damping_kraus(params)))


@dataclass
class SteadyStateResult:
    sigma_z: float
    rho: DensityMatrix
    collisions_used: int
    converged: bool


def _sigma_z_of(arr: np.ndarray) -> float:
    return float(((arr[0, 0] - arr[1, 1]) / (arr[0, 0] + arr[1, 1])).real)


def evolve_collisions(
    probe: DensityMatrix,
    reservoirs: list[ReservoirSpec],
    params: CollisionParams | None = None,
    schedule: str = "round-robin",
    seed: int | None = None,
    steady_tol: float = STEADY_TOL,
) -> tuple[SteadyStateResult, np.ndarray]:
    """Drive the probe with scheduled collisions until <sigma_z> settles.

    Steady state is declared when the change in <sigma_z> across one full
    schedule cycle drops below steady_tol, capped at params.n_collisions.
    The reported sigma_z averages the final cycle, which removes the
    within-cycle readout bias of multi-reservoir schedules. Returns the
    result plus the full per-collision <sigma_z> trajectory.

    Round-robin carries each reservoir's coupling in its own unitary (pull
    rates scale as g_i^2). Weighted-random instead realizes the convex
    combination of maps: draws follow P_i = g_i^2 / sum g_k^2 while every
    collision uses a common rms coupling, so the probabilities alone carry
    the weights and the same g^2-weighted steady state results.
    """
    params = params if params is not None else CollisionParams()
    if not reservoirs:
        raise ValidationError("at least one reservoir is required")
    if all(r.g == 0 for r in reservoirs):
        raise NoCoupling("all reservoir couplings are zero")
    if schedule not in ("round-robin", "weighted-random"):
        raise ValidationError(f"unknown schedule {schedule!r}")

    units = [reservoir_unit_state(r).entries for r in reservoirs]
    kraus = _damping_kraus(params)
    cycle = len(reservoirs)
    if schedule == "weighted-random":
        rng = np.random.default_rng(0 if seed is None else seed)
        weights = np.array([r.g**2 for r in reservoirs])
        g_rms = math.sqrt(float(weights.mean()))
        weights = weights / weights.sum()
        unitaries = [collision_unitary(replace(r, g=g_rms), params) for r in reservoirs]
    else:
        unitaries = [collision_unitary(r, params) for r in reservoirs]

    arr = probe.entries.copy()
    trajectory: list[float] = []
    prev_cycle_value = _sigma_z_of(arr)
    converged = False
    while len(trajectory) < params.n_collisions:
        if schedule == "round-robin":
            idx = len(trajectory) % cycle
        else:
            idx = int(rng.choice(cycle, p=weights))
        arr = _collide(arr, units[idx], unitaries[idx], kraus)
        trajectory.append(_sigma_z_of(arr))
        if len(trajectory) % cycle == 0:
            if abs(trajectory[-1] - prev_cycle_value) < steady_tol:
                converged = True
                break
            prev_cycle_value = trajectory[-1]

    tail = trajectory[-cycle:] if len(trajectory) >= cycle else trajectory
    rho = DensityMatrix(arr / np.trace(arr))
    result = SteadyStateResult(
        sigma_z=float(np.mean(tail)),
        rho=rho,
        collisions_used=len(trajectory),
        converged=converged,
    )
    return result, np.array(trajectory)


def steady_state_closed_form(reservoirs: list[ReservoirSpec]) -> float:
    """Coupling-weighted mean of the unit magnetizations:
    sum_i g_i^2 cos(theta_i) / sum_i g_i^2."""
    total = sum(r.g**2 for r in reservoirs)
    if total == 0:
        raise NoCoupling("all reservoir couplings are zero")
    return sum(r.g**2 * math.cos(r.theta) for r in reservoirs) / total


def transfer_curve(
    spin_j: float,
    params: CollisionParams | None = None,
    n_points: int = 41,
    g: float = 0.01,
    schedule: str = "round-robin",
    seed: int | None = None,
) -> ActivationCurve:
    """Steady-state response of the probe versus the coupling imbalance u.

    For each u in [-1, 1], two reservoirs at theta = 0 and theta = pi split
    the total coupling as g1^2 = g^2 (1+u)/2, g2^2 = g^2 (1-u)/2, and the
    probe starts in |+>.
    """
    params = params if params is not None else CollisionParams()
    _check_spin(spin_j)
    if n_points < 5 or n_points % 2 == 0:
        raise ValidationError(f"n_points must be odd and at least 5, got {n_points}")
    us = np.linspace(-1.0, 1.0, n_points)
    outputs = np.zeros(n_points)
    used = np.zeros(n_points, dtype=int)
    flags = np.zeros(n_points, dtype=bool)
    for i, u in enumerate(us):
        g1 = g * math.sqrt((1.0 + u) / 2.0)
        g2 = g * math.sqrt((1.0 - u) / 2.0)
        reservoirs = [
            ReservoirSpec(theta=0.0, phi=0.0, spin_j=spin_j, g=g1),
            ReservoirSpec(theta=math.pi, phi=0.0, spin_j=spin_j, g=g2),
        ]
        point_seed = None if seed is None else int(np.random.default_rng([seed, i]).integers(2**31))
        result, _ = evolve_collisions(
            plus_state(), reservoirs, params, schedule=schedule, seed=point_seed
        )
        outputs[i] = result.sigma_z
        used[i] = result.collisions_used
        flags[i] = result.converged
    return ActivationCurve(
        inputs=us,
        outputs=outputs,
        spin_j=spin_j,
        collisions_used=used,
        converged=flags,
        provenance={
            "g": g,
            "tau": params.tau,
            "gamma": params.gamma,
            "n_collisions": params.n_collisions,
            "mode": params.propagator_mode.value,
            "schedule": schedule,
            "seed": seed,
        },
    )
