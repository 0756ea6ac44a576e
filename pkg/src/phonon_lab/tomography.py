"""Estimation layer: phonon-number fits, Wigner values, state reconstruction.

Analysis conventions (matching the measurement procedure they invert):

* A tomography record at displacement ``alpha`` holds the qubit trace
  ``P_e(t)`` measured while the qubit interacts resonantly with the
  displaced resonator state; the displacement applied physically is
  ``-alpha``, so the fitted populations are those of ``D(-alpha) rho
  D(-alpha)^dag`` and the Wigner value at ``alpha`` is their alternating
  sum times 2/pi.
* The qubit trace is linear in the displaced populations, so the fit uses
  precomputed single-Fock responses; the simplex search runs over a softmax
  parameterization and is polished locally.
* Density matrices are fitted as 4x4 expansions over the 15 generalized
  Gell-Mann generators, displaced inside a 10-level space with the exactly
  unitary truncated-generator displacement (the same operator the forward
  fits use), and compared to the fitted populations in linear least
  squares, giving the parameter covariance directly.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize, nnls

from .errors import (
    ConvergenceError,
    DomainError,
    FitError,
    IdentifiabilityError,
    IllConditionedFitWarning,
)
from . import lindblad as lb

TWO_PI = 2.0 * math.pi
FIT_LEVELS = 10

# integration step for the tomography forward models; coarser than the
# simulator default because the fitted observables vary on 10-ns scales
TOMO_DT = 0.1e-9


@dataclass
class TraceRecord:
    """One Wigner-tomography trace at a single displacement."""

    alpha: complex
    t_s: np.ndarray
    p_e: np.ndarray
    initial_p_e: float = 0.0

    def __post_init__(self):
        self.t_s = np.asarray(self.t_s, dtype=float)
        self.p_e = np.asarray(self.p_e, dtype=float)
        if self.t_s.size != self.p_e.size:
            raise DomainError("time grid and trace differ in length")


@dataclass
class TomographyDataset:
    records: list
    state_label: str = ""
    calibration_scale: float = 1.0
    params: lb.SystemParams = field(default_factory=lb.SystemParams)

    def to_json(self) -> str:
        doc = {
            "state": self.state_label,
            "calibration_scale": self.calibration_scale,
            "params": self.params.to_dict(),
            "records": [
                {
                    "alpha_re": r.alpha.real,
                    "alpha_im": r.alpha.imag,
                    "t_s": list(map(float, r.t_s)),
                    "p_e": list(map(float, r.p_e)),
                    "initial_p_e": r.initial_p_e,
                }
                for r in self.records
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TomographyDataset":
        doc = json.loads(text)
        params = lb.SystemParams(**doc["params"]) if "params" in doc else lb.SystemParams()
        records = [
            TraceRecord(
                alpha=complex(r["alpha_re"], r["alpha_im"]),
                t_s=np.array(r["t_s"]),
                p_e=np.array(r["p_e"]),
                initial_p_e=r.get("initial_p_e", 0.0),
            )
            for r in doc["records"]
        ]
        return cls(
            records=records,
            state_label=doc.get("state", ""),
            calibration_scale=doc.get("calibration_scale", 1.0),
            params=params,
        )


@dataclass
class PopulationFit:
    """Fitted displaced-state phonon distribution with uncertainties."""

    p_n: np.ndarray
    sigma_n: np.ndarray
    residual: float
    alpha: complex

    def __post_init__(self):
        self.p_n = np.asarray(self.p_n, dtype=float)
        self.sigma_n = np.asarray(self.sigma_n, dtype=float)
        if np.any(self.p_n < -1e-12):
            raise DomainError("populations must be nonnegative")
        if abs(self.p_n.sum() - 1.0) > 1e-9:
            raise DomainError("populations must sum to one")


@dataclass
class ReconstructedState:
    """4x4 density-matrix fit embedded in the 10-level analysis space."""

    rho: np.ndarray
    parameters: np.ndarray
    covariance: np.ndarray
    rho_raw: np.ndarray
    residual: float

    @property
    def rho_small(self) -> np.ndarray:
        return self.rho[:4, :4]


def tomography_displacement(alpha: complex, dim: int = FIT_LEVELS) -> np.ndarray:
    """Exactly unitary displacement on the truncated analysis space."""
    return lb.displacement_operator(dim, alpha, check=False)


def basis_responses(
    params: lb.SystemParams,
    t_grid: np.ndarray,
    initial_p_e: float = 0.0,
    dt: float = TOMO_DT,
) -> np.ndarray:
    """Qubit response P_e(t) to each initial Fock state |n><n|.

    The qubit starts in the measured initial mixed state and interacts
    resonantly at the coupling in ``params``; readout visibility is
    applied.  Returns an array of shape (dim, len(t_grid)).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    rho_q = np.diag([1.0 - initial_p_e, initial_p_e]).astype(complex)
    rhos = [np.kron(rho_q, lb.fock_state(params.dim, n)) for n in range(params.dim)]
    return lb.batched_excited_traces(rhos, params, t_grid, dt=dt)


def _softmax(z):
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def fit_populations(
    record: TraceRecord,
    params: lb.SystemParams,
    responses: np.ndarray | None = None,
    dt: float = TOMO_DT,
) -> PopulationFit:
    """Fit the displaced-state populations to one qubit trace.

    Cost is the summed squared error between the measured trace and the
    model prediction (a convex combination of single-Fock responses);
    uncertainties come from the numerical second derivative of the cost
    with respect to each probability.
    """
    y = record.p_e
    if y.size < 30:
        raise FitError("trace too short to constrain ten populations")
    if np.ptp(y) < 1e-4:
        warnings.warn(
            "trace is nearly constant; the population fit is ill-posed",
            IllConditionedFitWarning,
        )
    if responses is None:
        responses = basis_responses(params, record.t_s, record.initial_p_e, dt=dt)
    r_mat = responses.T  # (T, dim)

    def cost_p(p):
        r = r_mat @ p - y
        return float(r @ r)

    # simplex-constrained quadratic solved by nnls with a sum-to-one penalty
    # row, then a softmax simplex search polishes per the analysis recipe
    penalty = 1e4
    a_aug = np.vstack([r_mat, penalty * np.ones((1, params.dim))])
    y_aug = np.concatenate([y, [penalty]])
    sol, _ = nnls(a_aug, y_aug)
    total = sol.sum()
    p0 = sol / total if total > 0 else np.full(params.dim, 1.0 / params.dim)
    e0 = cost_p(p0)

    def cost_z(z):
        return cost_p(_softmax(z))

    z0 = np.log(np.maximum(p0, 1e-8))
    nm = minimize(cost_z, z0, method="Nelder-Mead",
                  options={"maxiter": 4000, "xatol": 1e-9, "fatol": 1e-15})
    polish = minimize(cost_z, nm.x, method="BFGS",
                      options={"maxiter": 500, "gtol": 1e-12})
    z_best = polish.x if polish.fun <= nm.fun else nm.x
    candidates = [_softmax(z_best), p0]
    p_best = min(candidates, key=cost_p)
    # exact simplex projection against round-off
    p_best = np.maximum(p_best, 0.0)
    p_best = p_best / p_best.sum()
    e_min = cost_p(p_best)

    if e_min > e0 + 1e-12:
        raise ConvergenceError(
            "population fit failed to improve on its starting point",
            best=p_best, residual=e_min,
        )

    # curvature of the cost in probability space, central differences
    dof = max(y.size - params.dim, 1)
    s2 = e_min / dof
    step = 1e-3
    sigma = np.empty(params.dim)
    for n in range(params.dim):
        d = np.zeros(params.dim)
        d[n] = step

        def cost_p(p):
            r = r_mat @ p - y
            return float(r @ r)

        h_nn = (cost_p(p_best + d) - 2.0 * e_min + cost_p(p_best - d)) / step**2
        sigma[n] = math.sqrt(2.0 * s2 / h_nn) if h_nn > 0 else math.inf
    return PopulationFit(p_n=p_best, sigma_n=sigma, residual=e_min, alpha=record.alpha)


def wigner_point(p_n) -> float:
    """Wigner value from displaced populations: (2/pi) * sum (-1)^n P_n."""
    p_n = np.asarray(p_n, dtype=float)
    signs = (-1.0) ** np.arange(p_n.size)
    return float(2.0 / math.pi * np.sum(signs * p_n))


def parity_operator(dim: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def wigner_from_state(rho: np.ndarray, alpha: complex) -> float:
    """Direct parity-operator evaluation, for cross-checks against wigner_point."""
    dim = rho.shape[0]
    d = tomography_displacement(-alpha, dim)
    displaced = d @ rho @ d.conj().T
    return float(2.0 / math.pi * np.trace(displaced @ parity_operator(dim)).real)


def gell_mann_basis(dim: int = 4) -> list[np.ndarray]:
    """Traceless Hermitian generators of SU(dim), (dim^2 - 1) matrices."""
    out = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            out.append(sym)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k] = -1.0j
            anti[k, j] = 1.0j
            out.append(anti)
    for l in range(1, dim):
        diag = np.zeros((dim, dim), dtype=complex)
        for j in range(l):
            diag[j, j] = 1.0
        diag[l, l] = -l
        out.append(diag * math.sqrt(2.0 / (l * (l + 1))))
    return out


def _embed(rho_small: np.ndarray, dim: int) -> np.ndarray:
    big = np.zeros((dim, dim), dtype=complex)
    d = rho_small.shape[0]
    big[:d, :d] = rho_small
    return big


def density_from_parameters(c: np.ndarray, dim_small: int = 4) -> np.ndarray:
    basis = gell_mann_basis(dim_small)
    rho = np.eye(dim_small, dtype=complex) / dim_small
    for ci, lam in zip(c, basis):
        rho = rho + ci * lam
    return rho


def project_physical(rho: np.ndarray) -> np.ndarray:
    """Clip small negative eigenvalues to zero and renormalize."""
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0:
        raise FitError("state projection collapsed to zero trace")
    vals = vals / total
    return (vecs * vals) @ vecs.conj().T


def reconstruct_density_matrix(
    fits: list[PopulationFit],
    dim_small: int = 4,
    dim_embed: int = FIT_LEVELS,
) -> ReconstructedState:
    """Weighted linear least squares over the Gell-Mann expansion.

    Each fitted distribution contributes its displaced diagonal; requires at
    least 15 distinct displacements for identifiability.
    """
    n_par = dim_small**2 - 1
    alphas = {complex(f.alpha) for f in fits}
    if len(alphas) < n_par:
        raise IdentifiabilityError(
            f"need >= {n_par} distinct displacements, got {len(alphas)}"
        )

    basis = gell_mann_basis(dim_small)
    rows_m, rows_b, rows_y = [], [], []
    for f in fits:
        d = tomography_displacement(-f.alpha, dim_embed)
        d_dag = d.conj().T
        base = d @ _embed(np.eye(dim_small, dtype=complex) / dim_small, dim_embed) @ d_dag
        rows_b.append(np.diag(base).real)
        cols = [
            np.diag(d @ _embed(lam, dim_embed) @ d_dag).real for lam in basis
        ]
        rows_m.append(np.column_stack(cols))
        rows_y.append(f.p_n)

    m = np.vstack(rows_m)
    b = np.concatenate(rows_b)
    y = np.concatenate(rows_y)

    gram = m.T @ m
    cond = np.linalg.cond(gram)
    if cond > 1e10:
        warnings.warn(
            "reconstruction design is rank-deficient; using pseudo-inverse",
            IllConditionedFitWarning,
        )
        gram_inv = np.linalg.pinv(gram)
    else:
        gram_inv = np.linalg.inv(gram)
    c = gram_inv @ (m.T @ (y - b))
    chi2 = float(np.sum((m @ c - (y - b)) ** 2))
    dof = max(y.size - c.size, 1)
    residual = chi2
    covariance = gram_inv * (chi2 / dof)

    rho_raw = density_from_parameters(c, dim_small)
    rho_phys = project_physical(rho_raw)
    return ReconstructedState(
        rho=_embed(rho_phys, dim_embed),
        parameters=c,
        covariance=covariance,
        rho_raw=rho_raw,
        residual=residual,
    )


def fidelity(
    rho: np.ndarray,
    psi: np.ndarray,
    covariance: np.ndarray | None = None,
    n_samples: int = 1000,
    seed: int = 7,
):
    """State fidelity sqrt(<psi|rho|psi>) with Monte Carlo uncertainty.

    When a parameter covariance from the reconstruction is given, parameter
    vectors are resampled, rebuilt, projected, and re-scored; the standard
    deviation of the resampled fidelities is returned as the uncertainty.
    """
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    d = psi.size
    rho_small = rho[:d, :d]
    overlap = float(np.real(psi.conj() @ rho_small @ psi))
    value = math.sqrt(max(overlap, 0.0))
    if covariance is None:
        return value, 0.0

    covariance = np.asarray(covariance, dtype=float)
    sym = 0.5 * (covariance + covariance.T)
    min_eig = np.min(np.linalg.eigvalsh(sym))
    if min_eig < -1e-12 * max(np.max(np.abs(sym)), 1e-300):
        raise FitError("covariance matrix is not positive semidefinite")
    jitter = max(-min_eig, 0.0) + 1e-300
    chol = np.linalg.cholesky(sym + jitter * np.eye(sym.shape[0]))

    # center the resampling on the parameters implied by rho's 4x4 block
    basis = gell_mann_basis(4)
    c0 = np.array(
        [np.trace(rho[:4, :4] @ lam).real / np.trace(lam @ lam).real for lam in basis]
    )
    rng = np.random.default_rng(seed)
    samples = np.empty(n_samples)
    for i in range(n_samples):
        c = c0 + chol @ rng.standard_normal(c0.size)
        try:
            rho_s = project_physical(density_from_parameters(c))
        except FitError:
            samples[i] = np.nan
            continue
        ov = float(np.real(psi.conj() @ rho_s[:d, :d] @ psi))
        samples[i] = math.sqrt(max(ov, 0.0))
    good = samples[np.isfinite(samples)]
    return value, float(np.std(good))


def calibrate_displacement(
    sweep,
    params: lb.SystemParams,
    initial_scale: float = 1.0,
    dt: float = TOMO_DT,
) -> float:
    """One-parameter fit of the amplitude-to-displacement conversion.

    ``sweep`` is an iterable of (pulse_amplitude, post_swap_p_e) pairs; the
    model displaces the thermal resonator by ``scale*amplitude``, swaps, and
    measures the qubit.
    """
    data = np.asarray(list(sweep), dtype=float)
    if data.shape[0] < 5:
        raise IdentifiabilityError("need at least 5 sweep points")
    u, y = data[:, 0], data[:, 1]
    if np.ptp(y) < 0.3:
        raise IdentifiabilityError(
            "sweep too narrow: the response must rise from near zero past its first maximum"
        )

    def model(scale):
        out = np.empty_like(u)
        for i, amp in enumerate(u):
            seq = lb.PulseSequence()
            if amp != 0:
                seq.append(lb.Displace(complex(scale * amp)))
            seq.append(lb.swap_segment(params))
            seq.append(lb.Measure())
            out[i] = lb.run_sequence(seq, params, dt=dt).p_e[0]
        return out

    sol = least_squares(
        lambda x: model(x[0]) - y, [initial_scale],
        diff_step=0.02, xtol=1e-10, ftol=1e-12,
    )
    if not sol.success:
        raise ConvergenceError("displacement calibration did not converge", best=sol.x)
    return float(sol.x[0])


def fit_oscillation_amplitude(x, y):
    """Peak-to-peak amplitude of a fixed-period cosine fit, with uncertainty.

    The drive-amplitude axis is normalized so x = +-1 is a full transfer;
    the model is ``y = b - (a/2) cos(pi x)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), -0.5 * np.cos(math.pi * x)])
    coef, res, _, _ = np.linalg.lstsq(design, y, rcond=None)
    dof = max(x.size - 2, 1)
    s2 = float(res[0]) / dof if res.size else 0.0
    cov = np.linalg.inv(design.T @ design) * s2
    return float(coef[1]), math.sqrt(max(cov[1, 1], 0.0))


def rabi_population_estimate(a_e, a_g, sigma_e=0.0, sigma_g=0.0):
    """Excited-state population from e-f oscillation amplitudes.

    ``P = A_e/(A_e + A_g)`` with first-order uncertainty propagation from
    the two amplitude uncertainties.
    """
    total = a_e + a_g
    if a_g <= 0:
        raise DomainError("ground-trace amplitude must be positive")
    if total == 0:
        raise DomainError("amplitude sum must be nonzero")
    p = a_e / total
    dp_de = a_g / total**2
    dp_dg = -a_e / total**2
    sigma = math.hypot(dp_de * sigma_e, dp_dg * sigma_g)
    return p, sigma


# ---------------------------------------------------------------------------
# forward synthesis of tomography datasets


def default_alpha_grid(radius: float = 2.0, n_side: int = 5) -> list[complex]:
    """Displacement set: n_side x n_side square grid of half-width ``radius``.

    With odd ``n_side`` the origin is part of the grid; 5x5 gives 25 points,
    comfortably above the 15-parameter identifiability bound.
    """
    axis = np.linspace(-radius, radius, n_side)
    out = []
    for re in axis:
        for im in axis:
            out.append(complex(re, im))
    if 0j not in out:
        out.append(0j)
    return out


def synthesize_dataset(
    state: str,
    params: lb.SystemParams,
    alphas=None,
    t_grid=None,
    noise: float = 0.0,
    seed: int = 0,
    dt: float = TOMO_DT,
) -> TomographyDataset:
    """Simulate the full Wigner-tomography measurement for one target state.

    Runs the synthesis sequence, measures the residual qubit excitation,
    then for each displacement evolves the displaced state under resonant
    coupling and records the qubit trace (plus optional Gaussian noise).
    """
    if t_grid is None:
        t_grid = np.linspace(2e-9, 360e-9, 90)
    t_grid = np.asarray(t_grid, dtype=float)
    if alphas is None:
        alphas = default_alpha_grid()
    rng = np.random.default_rng(seed)

    prep = lb.prepare_sequence(state, params)
    prepped = lb.run_sequence(prep, params, dt=dt).rho_final
    # the qubit is measured before the tomography evolution; the back-action
    # removes its coherence with the resonator
    prepped = lb.dephase_qubit(prepped)
    initial_p_e = lb.excited_probability(prepped, params, scaled=False)

    displaced = [lb.displacement(prepped, -alpha, check=False) for alpha in alphas]
    traces = lb.batched_excited_traces(displaced, params, t_grid, dt=dt)
    records = []
    for alpha, p_e in zip(alphas, traces):
        if noise > 0:
            p_e = p_e + noise * rng.standard_normal(p_e.size)
        records.append(
            TraceRecord(alpha=alpha, t_s=t_grid, p_e=p_e, initial_p_e=initial_p_e)
        )
    return TomographyDataset(records=records, state_label=state, params=params)


def analyze_dataset(
    dataset: TomographyDataset, dt: float = TOMO_DT
) -> tuple[list[PopulationFit], ReconstructedState]:
    """Population fits for every record, then the density-matrix fit."""
    params = dataset.params
    fits = []
    cache = {}
    for rec in dataset.records:
        key = (tuple(np.round(rec.t_s, 15)), round(rec.initial_p_e, 12))
        if key not in cache:
            cache[key] = basis_responses(params, rec.t_s, rec.initial_p_e, dt=dt)
        fits.append(fit_populations(rec, params, responses=cache[key], dt=dt))
    recon = reconstruct_density_matrix(fits)
    return fits, recon


def export_wigner_csv(path, fits: list[PopulationFit]):
    """Write ``alpha_re,alpha_im,w`` rows from fitted distributions."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha_re", "alpha_im", "w"])
        for f in fits:
            writer.writerow(
                [f"{f.alpha.real:.6f}", f"{f.alpha.imag:.6f}", f"{wigner_point(f.p_n):.8f}"]
            )


def reconstruction_report(recon: ReconstructedState, fidelity_value=None) -> dict:
    """JSON-ready report with the density matrix, parameters, and covariance."""
    report = {
        "rho_re": recon.rho.real.tolist(),
        "rho_im": recon.rho.imag.tolist(),
        "parameters": recon.parameters.tolist(),
        "covariance": recon.covariance.tolist(),
        "residual": recon.residual,
    }
    if fidelity_value is not None:
        value, sigma = fidelity_value
        report["fidelity"] = {"value": value, "sigma": sigma}
    return report
