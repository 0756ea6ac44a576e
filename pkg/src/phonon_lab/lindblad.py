"""Open-system dynamics of the qubit-resonator pair.

Conventions:

* Composite Hilbert space is qubit (x) resonator with qubit-major ordering,
  so basis index ``q*dim + n`` holds qubit state ``q`` (0 = ground) and
  ``n`` phonons.
* Everything is written in the resonator rotating frame: the Hamiltonian is
  ``delta*sigma_plus*sigma_minus + g*(sigma_plus*a + sigma_minus*a_dag)``
  with hbar = 1 (energies in rad/s).
* Dissipation enters through three collapse operators: qubit decay
  ``sigma_minus/sqrt(T1)``, qubit dephasing ``sigma_z/sqrt(2*T_phi)`` with
  ``1/T_phi = 1/T2_Ramsey - 1/(2*T1)``, and phonon decay ``a/sqrt(T1r)``.
* Qubit drive pulses are resonant with the qubit, so their rotation axis
  precesses at the instantaneous detuning; the sequence runner tracks the
  accumulated phase and applies it to each rotation.

Integration is fixed-step RK4 (default 0.05 ns), deterministic and
sufficient for the sub-GHz energy scales of this system.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, GridError, TruncationError

TWO_PI = 2.0 * math.pi
DEFAULT_DT = 0.05e-9
DEFAULT_RAMP = 5e-9

# pulse-timing overheads of the standard sequences: idle padding charged per
# qubit rotation and coupler settle time after each coupling pulse, chosen
# within realistic hardware ranges to reproduce the measured state-synthesis
# fidelities
QUBIT_PULSE_PAD = 35e-9
COUPLER_SETTLE = 15e-9


@dataclass(frozen=True)
class SystemParams:
    """Quantum-dynamics parameters (rates in rad/s, times in seconds)."""

    g: float = TWO_PI * 7.3e6
    delta: float = 0.0
    t1: float = 20e-6
    t2_ramsey: float = 2e-6
    t1r: float = 148e-9
    dim: int = 10
    p_e_th: float = 0.0169
    p_1_th: float = 0.0049
    visibility: float = 0.97

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("resonator dimension must be >= 2")
        if self.t1 <= 0 or self.t1r <= 0 or self.t2_ramsey <= 0:
            raise DomainError("lifetimes must be positive")
        if self.t_phi <= 0:
            raise DomainError("t2_ramsey must not exceed 2*t1")
        if not (0 <= self.p_e_th <= 1 and 0 <= self.p_1_th <= 1):
            raise DomainError("thermal populations must lie in [0, 1]")
        if not (0 < self.visibility <= 1):
            raise DomainError("visibility must lie in (0, 1]")

    @property
    def t_phi(self) -> float:
        """Pure dephasing time; infinite when T2_Ramsey = 2*T1."""
        rate = 1.0 / self.t2_ramsey - 1.0 / (2.0 * self.t1)
        if rate < 0:
            return -1.0
        if rate == 0:
            return math.inf
        return 1.0 / rate

    def to_dict(self) -> dict:
        return asdict(self)


def lowering_operator(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)  # |e> has sigma_z = +1
NUMBER_Q = SIGMA_PLUS @ SIGMA_MINUS


def build_hamiltonian(delta: float, g: float, dim: int) -> np.ndarray:
    """Jaynes-Cummings Hamiltonian in the resonator rotating frame."""
    if dim < 2:
        raise DomainError("resonator dimension must be >= 2")
    a = lowering_operator(dim)
    eye_r = np.eye(dim)
    h = delta * np.kron(NUMBER_Q, eye_r)
    h = h + g * (np.kron(SIGMA_PLUS, a) + np.kron(SIGMA_MINUS, a.conj().T))
    return h


def collapse_operators(params: SystemParams) -> list[np.ndarray]:
    """Scaled collapse operators on the composite space (zero-rate ones dropped)."""
    if params.t1 <= 0 or params.t1r <= 0:
        raise DomainError("lifetimes must be positive")
    eye_r = np.eye(params.dim)
    ops = []
    if math.isfinite(params.t1):
        ops.append(np.kron(SIGMA_MINUS, eye_r) / math.sqrt(params.t1))
    t_phi = params.t_phi
    if t_phi <= 0:
        raise DomainError("invalid dephasing time")
    if math.isfinite(t_phi):
        ops.append(np.kron(SIGMA_Z, eye_r) / math.sqrt(2.0 * t_phi))
    if math.isfinite(params.t1r):
        ops.append(np.kron(np.eye(2), lowering_operator(params.dim)) / math.sqrt(params.t1r))
    return ops


def thermal_state(params: SystemParams) -> np.ndarray:
    """Product of qubit and single-phonon thermal mixtures."""
    rho_q = np.diag([1.0 - params.p_e_th, params.p_e_th]).astype(complex)
    diag_r = np.zeros(params.dim)
    diag_r[0] = 1.0 - params.p_1_th
    diag_r[1] = params.p_1_th
    return np.kron(rho_q, np.diag(diag_r).astype(complex))


def fock_state(dim: int, n: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise DomainError("Fock index outside the truncated space")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


def dephase_qubit(rho: np.ndarray) -> np.ndarray:
    """Projective-measurement back-action: drop the qubit g-e coherence blocks."""
    dim = rho.shape[0] // 2
    out = rho.copy()
    out[:dim, dim:] = 0.0
    out[dim:, :dim] = 0.0
    return out


def check_density_matrix(rho: np.ndarray, *, herm_tol=1e-10, trace_tol=1e-9, eig_floor=-1e-8):
    """Raise if ``rho`` is not Hermitian/unit-trace/positive within tolerance."""
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise DomainError("density matrix trace differs from one")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < eig_floor:
        raise DomainError("density matrix has a significant negative eigenvalue")


@lru_cache(maxsize=256)
def _displacement_cached(dim: int, alpha: complex) -> np.ndarray:
    a = lowering_operator(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return expm(gen)


def displacement_operator(dim: int, alpha: complex, *, check: bool = True) -> np.ndarray:
    """Resonator displacement unitary D(alpha) on a truncated Fock space."""
    mag = abs(alpha)
    if check and mag**2 + 4.0 * mag >= dim:
        raise TruncationError(
            f"displacement alpha={alpha} needs more than {dim} resonator levels"
        )
    return _displacement_cached(dim, complex(alpha))


def displacement(rho: np.ndarray, alpha: complex, *, check: bool = True) -> np.ndarray:
    """Displace the resonator subsystem of a composite (qubit x resonator) state."""
    size = rho.shape[0]
    if size % 2 != 0:
        raise DomainError("composite state must have even dimension (qubit-major)")
    dim = size // 2
    d = displacement_operator(dim, alpha, check=check)
    full = np.kron(np.eye(2), d)
    return full @ rho @ full.conj().T


# ---------------------------------------------------------------------------
# pulse sequences


@dataclass(frozen=True)
class Rotation:
    """Instantaneous qubit rotation about an equatorial axis (phase in rad)."""

    axis: str
    angle: float
    phase: float = 0.0

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise DomainError("rotation axis must be 'x' or 'y'")
        if abs(self.angle) > TWO_PI:
            raise DomainError("|rotation angle| must not exceed 2*pi")


@dataclass(frozen=True)
class Detune:
    """Hold the qubit at a detuning with the coupling off."""

    delta: float
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise DomainError("duration must be >= 0")


@dataclass(frozen=True)
class Couple:
    """Coupling pulse of strength g at a given detuning, with cosine ramps."""

    g: float
    duration: float
    delta: float = 0.0
    ramp: float = 0.0

    def __post_init__(self):
        if self.duration < 0 or self.ramp < 0:
            raise DomainError("durations must be >= 0")
        if 2 * self.ramp > self.duration:
            raise DomainError("ramps longer than the pulse")


@dataclass(frozen=True)
class Displace:
    alpha: complex


@dataclass(frozen=True)
class Idle:
    """Free evolution at the current detuning with the coupling off."""

    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise DomainError("duration must be >= 0")


@dataclass(frozen=True)
class Measure:
    label: str = ""


Segment = Rotation | Detune | Couple | Displace | Idle | Measure


@dataclass
class PulseSequence:
    segments: list = field(default_factory=list)

    def append(self, segment: Segment) -> "PulseSequence":
        self.segments.append(segment)
        return self

    def duration(self) -> float:
        return sum(getattr(s, "duration", 0.0) for s in self.segments)

    def to_json(self) -> str:
        out = []
        for s in self.segments:
            if isinstance(s, Rotation):
                out.append({"type": "rotation", "axis": s.axis, "angle": s.angle, "phase": s.phase})
            elif isinstance(s, Detune):
                out.append({"type": "detune", "delta": s.delta, "duration": s.duration})
            elif isinstance(s, Couple):
                out.append({"type": "couple", "g": s.g, "duration": s.duration, "delta": s.delta, "ramp": s.ramp})
            elif isinstance(s, Displace):
                out.append({"type": "displace", "alpha": [s.alpha.real, s.alpha.imag]})
            elif isinstance(s, Idle):
                out.append({"type": "idle", "duration": s.duration})
            elif isinstance(s, Measure):
                out.append({"type": "measure", "label": s.label})
        return json.dumps({"segments": out}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PulseSequence":
        doc = json.loads(text)
        seq = cls()
        for item in doc["segments"]:
            kind = item["type"]
            if kind == "rotation":
                seq.append(Rotation(item["axis"], item["angle"], item.get("phase", 0.0)))
            elif kind == "detune":
                seq.append(Detune(item["delta"], item["duration"]))
            elif kind == "couple":
                seq.append(Couple(item["g"], item["duration"], item.get("delta", 0.0), item.get("ramp", 0.0)))
            elif kind == "displace":
                re, im = item["alpha"]
                seq.append(Displace(complex(re, im)))
            elif kind == "idle":
                seq.append(Idle(item["duration"]))
            elif kind == "measure":
                seq.append(Measure(item.get("label", "")))
            else:
                raise DomainError(f"unknown segment type {kind!r}")
        return seq


# ---------------------------------------------------------------------------
# integrator


def _lindblad_rhs(rho, h, c_ops, cdc_ops):
    out = -1j * (h @ rho - rho @ h)
    for c, cdc in zip(c_ops, cdc_ops):
        out += c[0] @ rho @ c[1] - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def _rk4_span(rho, duration, h_of_t, c_ops, cdc_ops, dt):
    """Propagate over ``duration`` with H(t) sampled at the RK4 stages."""
    if duration <= 0:
        return rho
    n_steps = max(1, int(math.ceil(duration / dt)))
    h_step = duration / n_steps
    t = 0.0
    for _ in range(n_steps):
        h1 = h_of_t(t)
        k1 = _lindblad_rhs(rho, h1, c_ops, cdc_ops)
        h2 = h_of_t(t + 0.5 * h_step)
        k2 = _lindblad_rhs(rho + 0.5 * h_step * k1, h2, c_ops, cdc_ops)
        k3 = _lindblad_rhs(rho + 0.5 * h_step * k2, h2, c_ops, cdc_ops)
        h4 = h_of_t(t + h_step)
        k4 = _lindblad_rhs(rho + h_step * k3, h4, c_ops, cdc_ops)
        rho = rho + (h_step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h_step
    return rho


class _Propagator:
    """Caches operators for one (params, dim) context."""

    def __init__(self, params: SystemParams, dt: float = DEFAULT_DT):
        self.params = params
        self.dt = dt
        dim = params.dim
        self.number_q = np.kron(NUMBER_Q, np.eye(dim))
        a = lowering_operator(dim)
        self.v_int = np.kron(SIGMA_PLUS, a) + np.kron(SIGMA_MINUS, a.conj().T)
        raw = collapse_operators(params)
        self.c_ops = [(c, c.conj().T) for c in raw]
        self.cdc_ops = [c.conj().T @ c for c in raw]

    def evolve_const(self, rho, duration, delta, g):
        h = delta * self.number_q + g * self.v_int
        return _rk4_span(rho, duration, lambda _t: h, self.c_ops, self.cdc_ops, self.dt)

    def evolve_couple(self, rho, segment: Couple):
        if segment.ramp <= 0:
            return self.evolve_const(rho, segment.duration, segment.delta, segment.g)
        h_detune = segment.delta * self.number_q
        ramp = segment.ramp
        dur = segment.duration

        def envelope(t):
            if t < ramp:
                return 0.5 * (1.0 - math.cos(math.pi * t / ramp))
            if t > dur - ramp:
                return 0.5 * (1.0 - math.cos(math.pi * (dur - t) / ramp))
            return 1.0

        def h_of_t(t):
            return h_detune + segment.g * envelope(t) * self.v_int

        return _rk4_span(rho, dur, h_of_t, self.c_ops, self.cdc_ops, self.dt)


def qubit_rotation(axis: str, angle: float, phase: float, dim: int) -> np.ndarray:
    """Unitary for a resonant qubit pulse whose axis is rotated by ``phase``."""
    if axis == "x":
        base = phase
    elif axis == "y":
        base = phase + math.pi / 2.0
    else:
        raise DomainError("rotation axis must be 'x' or 'y'")
    gen = math.cos(base) * SIGMA_X + math.sin(base) * SIGMA_Y
    u2 = expm(-0.5j * angle * gen)
    return np.kron(u2, np.eye(dim))


def excited_probability(rho: np.ndarray, params: SystemParams, *, scaled: bool = True) -> float:
    dim = rho.shape[0] // 2
    p = float(np.trace(rho[dim:, dim:]).real)
    return params.visibility * p if scaled else p


def resonator_populations(rho: np.ndarray) -> np.ndarray:
    dim = rho.shape[0] // 2
    diag = np.diag(rho).real
    return diag[:dim] + diag[dim:]


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    dim = rho.shape[0] // 2
    rho_q = np.array(
        [
            [np.trace(rho[:dim, :dim]), np.trace(rho[:dim, dim:])],
            [np.trace(rho[dim:, :dim]), np.trace(rho[dim:, dim:])],
        ]
    )
    return np.array(
        [
            np.trace(rho_q @ SIGMA_X).real,
            np.trace(rho_q @ SIGMA_Y).real,
            np.trace(rho_q @ SIGMA_Z).real,
        ]
    )


@dataclass
class Trajectory:
    """Observables sampled on a time grid during continuous evolution."""

    t: np.ndarray
    p_e: np.ndarray
    populations: np.ndarray
    bloch: np.ndarray
    rho_final: np.ndarray

    def export_csv(self, path):
        """Write ``t_s,p_e,p0..p{dim-1}`` rows."""
        dim = self.populations.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "p_e"] + [f"p{n}" for n in range(dim)])
            for i, t in enumerate(self.t):
                writer.writerow(
                    [f"{t:.6e}", f"{self.p_e[i]:.8f}"]
                    + [f"{p:.8f}" for p in self.populations[i]]
                )


def evolve(
    rho0: np.ndarray,
    schedule: PulseSequence,
    params: SystemParams,
    t_grid: np.ndarray,
    dt: float = DEFAULT_DT,
) -> Trajectory:
    """Run a schedule, sampling observables at ``t_grid`` (seconds).

    Instantaneous segments act at their position in the schedule; ``t_grid``
    must be increasing and lie within the total schedule duration.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise GridError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise GridError("t_grid must be strictly increasing")
    total = schedule.duration()
    if t_grid[0] < 0 or t_grid[-1] > total + 1e-15:
        raise GridError("t_grid extends outside the schedule duration")

    check_density_matrix(rho0)
    prop = _Propagator(params, dt)
    dim = params.dim

    rho = rho0.astype(complex)
    records_t, records = [], []
    grid_iter = list(t_grid)
    cursor = 0.0
    theta = 0.0  # accumulated qubit-frame phase, sum of delta*dt

    def record(t_now):
        records_t.append(t_now)
        records.append(
            (
                excited_probability(rho, params),
                resonator_populations(rho),
                bloch_vector(rho),
            )
        )

    def take_due(t_end):
        nonlocal rho, cursor
        while grid_iter and grid_iter[0] <= t_end + 1e-15:
            t_target = grid_iter.pop(0)
            span = t_target - cursor
            if span > 1e-18:
                rho = advance(span)
            cursor = t_target
            record(t_target)

    advance = None  # set per continuous segment

    for seg in schedule.segments:
        if isinstance(seg, Rotation):
            u = qubit_rotation(seg.axis, seg.angle, seg.phase + theta, dim)
            rho = u @ rho @ u.conj().T
        elif isinstance(seg, Displace):
            rho = displacement(rho, seg.alpha)
        elif isinstance(seg, Measure):
            pass  # sampling is grid-driven in evolve()
        elif isinstance(seg, (Detune, Idle, Couple)):
            duration = seg.duration
            if isinstance(seg, Couple):
                delta_seg = seg.delta
                g_seg = seg.g
            elif isinstance(seg, Detune):
                delta_seg = seg.delta
                g_seg = 0.0
            else:
                delta_seg = params.delta
                g_seg = 0.0
            seg_start = cursor
            if isinstance(seg, Couple) and seg.ramp > 0:

                def advance(span, _seg=seg, _start=seg_start):
                    offset = cursor - _start
                    # integrate the remaining window [offset, offset+span]
                    h_detune = _seg.delta * prop.number_q
                    ramp, dur = _seg.ramp, _seg.duration

                    def envelope(t):
                        t = t + offset
                        if t < ramp:
                            return 0.5 * (1.0 - math.cos(math.pi * t / ramp))
                        if t > dur - ramp:
                            return 0.5 * (1.0 - math.cos(math.pi * max(dur - t, 0.0) / ramp))
                        return 1.0

                    def h_of_t(t):
                        return h_detune + _seg.g * envelope(t) * prop.v_int

                    return _rk4_span(rho, span, h_of_t, prop.c_ops, prop.cdc_ops, dt)

            else:

                def advance(span, _d=delta_seg, _g=g_seg):
                    return prop.evolve_const(rho, span, _d, _g)

            seg_end = seg_start + duration
            take_due(seg_end)
            if cursor < seg_end - 1e-18:
                rho = advance(seg_end - cursor)
                cursor = seg_end
            theta += delta_seg * duration
        else:
            raise DomainError(f"unknown segment {seg!r}")

    take_due(total)

    p_e = np.array([r[0] for r in records])
    pops = np.array([r[1] for r in records])
    bloch = np.array([r[2] for r in records])
    return Trajectory(np.array(records_t), p_e, pops, bloch, rho)


def batched_excited_traces(
    rhos,
    params: SystemParams,
    t_grid: np.ndarray,
    g: float | None = None,
    delta: float = 0.0,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """P_e(t) for a stack of initial states under one constant Hamiltonian.

    All states share (delta, g), so the RK4 sweep runs once on the batched
    array; identical in result to evolving each state separately.  Returns
    an array of shape (batch, len(t_grid)); visibility is applied.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) <= 0):
        raise GridError("t_grid must be nonnegative and strictly increasing")
    prop = _Propagator(params, dt)
    h = delta * prop.number_q + (params.g if g is None else g) * prop.v_int
    rho = np.array(rhos, dtype=complex)
    if rho.ndim != 3:
        raise DomainError("rhos must be a stack of density matrices")
    dim = params.dim
    out = np.empty((rho.shape[0], t_grid.size))
    t_prev = 0.0
    for i, t in enumerate(t_grid):
        span = t - t_prev
        if span > 1e-18:
            rho = _rk4_span(rho, span, lambda _t: h, prop.c_ops, prop.cdc_ops, dt)
        t_prev = t
        out[:, i] = params.visibility * np.trace(
            rho[:, dim:, dim:], axis1=1, axis2=2
        ).real
    return out


@dataclass
class SequenceResult:
    """Measurement record of one sequence execution."""

    p_e: list
    labels: list
    rho_final: np.ndarray


def run_sequence(
    seq: PulseSequence,
    params: SystemParams,
    rho0: np.ndarray | None = None,
    dt: float = DEFAULT_DT,
) -> SequenceResult:
    """Execute a sequence from the thermal state, recording each Measure."""
    prop = _Propagator(params, dt)
    dim = params.dim
    rho = thermal_state(params) if rho0 is None else rho0.astype(complex)
    theta = 0.0
    p_e, labels = [], []
    for seg in seq.segments:
        if isinstance(seg, Rotation):
            u = qubit_rotation(seg.axis, seg.angle, seg.phase + theta, dim)
            rho = u @ rho @ u.conj().T
        elif isinstance(seg, Displace):
            rho = displacement(rho, seg.alpha)
        elif isinstance(seg, Measure):
            p_e.append(excited_probability(rho, params))
            labels.append(seg.label)
        elif isinstance(seg, Detune):
            rho = prop.evolve_const(rho, seg.duration, seg.delta, 0.0)
            theta += seg.delta * seg.duration
        elif isinstance(seg, Idle):
            rho = prop.evolve_const(rho, seg.duration, params.delta, 0.0)
            theta += params.delta * seg.duration
        elif isinstance(seg, Couple):
            rho = prop.evolve_couple(rho, seg)
            theta += seg.delta * seg.duration
        else:
            raise DomainError(f"unknown segment {seg!r}")
    return SequenceResult(p_e, labels, rho)


# ---------------------------------------------------------------------------
# standard sequences


def swap_duration(g: float, ramp: float = DEFAULT_RAMP) -> float:
    """Coupling-pulse length transferring one excitation (area pi/2)."""
    return math.pi / (2.0 * g) + ramp


def swap_segment(params: SystemParams, ramp: float = DEFAULT_RAMP) -> Couple:
    return Couple(params.g, swap_duration(params.g, ramp), 0.0, ramp)


def prepare_sequence(state: str, params: SystemParams, ramp: float = DEFAULT_RAMP) -> PulseSequence:
    """Standard synthesis sequences for the resonator states |0>, |1>, |0>+|1>.

    Timing overheads (pulse padding, coupler settle) follow the module-level
    constants; the qubit ends near its ground state with the target state in
    the resonator.
    """
    seq = PulseSequence()
    if state == "0":
        return seq
    if state == "1":
        seq.append(Rotation("x", math.pi))
    elif state in ("0+1", "0-1", "superposition"):
        seq.append(Rotation("x", math.pi / 2.0))
    else:
        raise DomainError(f"unknown preparation state {state!r}")
    seq.append(Idle(QUBIT_PULSE_PAD))
    seq.append(swap_segment(params, ramp))
    seq.append(Idle(COUPLER_SETTLE))
    return seq


def fock2_sequence(params: SystemParams, tau: float, ramp: float = DEFAULT_RAMP) -> PulseSequence:
    """Two-step |2> synthesis: excite, swap, re-excite, interact for tau."""
    seq = PulseSequence()
    seq.append(Rotation("x", math.pi))
    seq.append(Idle(QUBIT_PULSE_PAD))
    seq.append(swap_segment(params, ramp))
    seq.append(Idle(COUPLER_SETTLE))
    seq.append(Rotation("x", math.pi))
    seq.append(Idle(QUBIT_PULSE_PAD))
    seq.append(Couple(params.g, tau))
    seq.append(Measure("tau"))
    return seq


# ---------------------------------------------------------------------------
# qubit tomography

_COMPLEMENT = {
    "x90": "x-90",
    "x-90": "x90",
    "y90": "y-90",
    "y-90": "y90",
}


def bloch_from_tomography(probabilities: dict) -> np.ndarray:
    """Bloch vector from tomography-pulse excited-state probabilities.

    Keys: ``none``, ``x90``, ``x-90``, ``y90``, ``y-90`` (optionally
    ``x180``, ``x-180``, ``y180``, ``y-180`` to symmetrize Z).  Symmetric
    combinations are used, e.g. the Y component comes from
    ``[P(x90) + (1 - P(x-90))]/2``.
    """
    if "none" not in probabilities:
        raise DomainError("'none' (no tomography pulse) measurement is required")
    for key in probabilities:
        comp = _COMPLEMENT.get(key)
        if comp is not None and comp not in probabilities:
            raise DomainError(f"missing complementary tomography pulse {comp!r}")

    p_z = [probabilities["none"]]
    for key in ("x180", "x-180", "y180", "y-180"):
        if key in probabilities:
            p_z.append(1.0 - probabilities[key])
    sz = 2.0 * float(np.mean(p_z)) - 1.0

    if "x90" in probabilities:
        p_y = 0.5 * (probabilities["x-90"] + (1.0 - probabilities["x90"]))
        sy = 2.0 * p_y - 1.0
    else:
        sy = 0.0

    if "y90" in probabilities:
        p_x = 0.5 * (probabilities["y90"] + (1.0 - probabilities["y-90"]))
        sx = 2.0 * p_x - 1.0
    else:
        sx = 0.0
    return np.array([sx, sy, sz])


TOMOGRAPHY_PULSES = {
    "none": None,
    "x90": Rotation("x", math.pi / 2.0),
    "x-90": Rotation("x", -math.pi / 2.0),
    "y90": Rotation("y", math.pi / 2.0),
    "y-90": Rotation("y", -math.pi / 2.0),
    "x180": Rotation("x", math.pi),
    "x-180": Rotation("x", -math.pi),
    "y180": Rotation("y", math.pi),
    "y-180": Rotation("y", -math.pi),
}


def measure_qubit_tomography(
    base: PulseSequence, params: SystemParams, pulses=None, dt: float = DEFAULT_DT
) -> dict:
    """Run ``base`` once per tomography pulse and collect P_e values."""
    out = {}
    for name in pulses if pulses is not None else TOMOGRAPHY_PULSES:
        seq = PulseSequence(list(base.segments))
        pulse = TOMOGRAPHY_PULSES[name]
        if pulse is not None:
            seq.append(pulse)
        seq.append(Measure(name))
        res = run_sequence(seq, params, dt=dt)
        out[name] = res.p_e[-1]
    return out
