import json
import math

import numpy as np
import pytest

from phonon_lab import lindblad as lb
from phonon_lab import tomography as tg
from phonon_lab.errors import (
    DomainError,
    FitError,
    IdentifiabilityError,
    IllConditionedFitWarning,
)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def device_params():
    return lb.SystemParams()


@pytest.fixture(scope="module")
def trace_grid():
    return np.linspace(2e-9, 360e-9, 90)


@pytest.fixture(scope="module")
def responses(device_params, trace_grid):
    return tg.basis_responses(device_params, trace_grid, initial_p_e=0.03)


class TestFitPopulations:
    def test_noiseless_recovery(self, device_params, trace_grid, responses):
        p_true = np.zeros(10)
        p_true[:3] = [0.5, 0.3, 0.2]
        trace = responses.T @ p_true
        rec = tg.TraceRecord(0j, trace_grid, trace, 0.03)
        fit = tg.fit_populations(rec, device_params, responses=responses)
        assert np.max(np.abs(fit.p_n - p_true)) < 0.01

    def test_vacuum_trace(self, device_params, trace_grid, responses):
        trace = responses.T @ np.eye(10)[0]
        rec = tg.TraceRecord(0j, trace_grid, trace, 0.03)
        fit = tg.fit_populations(rec, device_params, responses=responses)
        assert fit.p_n[0] >= 0.99

    def test_uncertainty_scale_at_nominal_noise(self, device_params, trace_grid, responses):
        rng = np.random.default_rng(3)
        p_true = np.zeros(10)
        p_true[:3] = [0.5, 0.3, 0.2]
        trace = responses.T @ p_true + 0.015 * rng.standard_normal(trace_grid.size)
        rec = tg.TraceRecord(0j, trace_grid, trace, 0.03)
        fit = tg.fit_populations(rec, device_params, responses=responses)
        med = float(np.median(fit.sigma_n))
        assert 0.002 < med < 0.008

    def test_simplex_exact(self, device_params, trace_grid, responses):
        rng = np.random.default_rng(11)
        p_true = rng.dirichlet(np.ones(10))
        trace = responses.T @ p_true + 0.01 * rng.standard_normal(trace_grid.size)
        rec = tg.TraceRecord(0j, trace_grid, trace, 0.03)
        fit = tg.fit_populations(rec, device_params, responses=responses)
        assert np.all(fit.p_n >= 0)
        assert fit.p_n.sum() == pytest.approx(1.0, abs=1e-12)

    def test_short_trace_rejected(self, device_params):
        t = np.linspace(0, 50e-9, 10)
        rec = tg.TraceRecord(0j, t, np.zeros(10), 0.0)
        with pytest.raises(FitError):
            tg.fit_populations(rec, device_params)

    def test_constant_trace_warns(self, device_params, trace_grid, responses):
        rec = tg.TraceRecord(0j, trace_grid, np.full(trace_grid.size, 0.03), 0.03)
        with pytest.warns(IllConditionedFitWarning):
            tg.fit_populations(rec, device_params, responses=responses)


class TestWignerPoint:
    def test_vacuum(self):
        assert tg.wigner_point(np.eye(10)[0]) == pytest.approx(2 / math.pi)

    def test_single_phonon(self):
        assert tg.wigner_point(np.eye(10)[1]) == pytest.approx(-2 / math.pi)

    def test_even_parity_mixture(self):
        p = np.zeros(10)
        p[[0, 2, 4, 6, 8]] = 0.2
        assert tg.wigner_point(p) == pytest.approx(2 / math.pi)

    def test_parity_operator_equivalence(self):
        rng = np.random.default_rng(2)
        for dim in (4, 5, 6):
            x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            rho = x @ x.conj().T
            rho /= np.trace(rho).real
            for alpha in (0.3 + 0.1j, -0.7j, 1.1):
                d = tg.tomography_displacement(-alpha, dim)
                displaced = d @ rho @ d.conj().T
                via_pops = tg.wigner_point(np.diag(displaced).real)
                via_parity = float(
                    2 / math.pi * np.trace(displaced @ tg.parity_operator(dim)).real
                )
                assert abs(via_pops - via_parity) < 1e-10
                assert abs(tg.wigner_from_state(rho, alpha) - via_parity) < 1e-10


def _ideal_fits(rho_res, params, t_grid, responses, alphas):
    fits = []
    for a in alphas:
        d = tg.tomography_displacement(-a, 10)
        pn = np.diag(d @ rho_res @ d.conj().T).real
        rec = tg.TraceRecord(a, t_grid, responses.T @ pn, 0.03)
        fits.append(tg.fit_populations(rec, params, responses=responses))
    return fits


@pytest.fixture(scope="module")
def closed_params():
    return lb.SystemParams(
        t1=math.inf, t2_ramsey=math.inf, t1r=math.inf,
        p_e_th=0.0, p_1_th=0.0, visibility=1.0,
    )


@pytest.fixture(scope="module")
def closed_responses(closed_params):
    t = np.linspace(2e-9, 300e-9, 75)
    return t, tg.basis_responses(closed_params, t, 0.03)


class TestReconstruction:
    def test_pure_fock_one(self, closed_params, closed_responses):
        t, resp = closed_responses
        fits = _ideal_fits(
            lb.fock_state(10, 1), closed_params, t, resp, tg.default_alpha_grid()
        )
        recon = tg.reconstruct_density_matrix(fits)
        psi = np.array([0, 1, 0, 0], dtype=complex)
        value, _ = tg.fidelity(recon.rho, psi, recon.covariance)
        assert value >= 0.999

    def test_maximally_mixed(self, closed_params, closed_responses):
        t, resp = closed_responses
        rho = np.zeros((10, 10), dtype=complex)
        rho[np.arange(4), np.arange(4)] = 0.25
        fits = _ideal_fits(rho, closed_params, t, resp, tg.default_alpha_grid())
        recon = tg.reconstruct_density_matrix(fits)
        off = recon.rho_small - np.diag(np.diag(recon.rho_small))
        assert np.max(np.abs(off)) < 0.02
        assert np.allclose(np.diag(recon.rho_small).real, 0.25, atol=0.02)

    def test_random_state_roundtrip(self, closed_params, closed_responses):
        t, resp = closed_responses
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho4 = x @ x.conj().T
        rho4 /= np.trace(rho4).real
        rho = np.zeros((10, 10), dtype=complex)
        rho[:4, :4] = rho4
        fits = _ideal_fits(rho, closed_params, t, resp, tg.default_alpha_grid())
        recon = tg.reconstruct_density_matrix(fits)
        dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(recon.rho_small - rho4)))
        assert dist < 0.01

    def test_too_few_displacements(self, closed_params, closed_responses):
        t, resp = closed_responses
        alphas = tg.default_alpha_grid()[:12]
        fits = _ideal_fits(lb.fock_state(10, 0), closed_params, t, resp, alphas)
        with pytest.raises(IdentifiabilityError):
            tg.reconstruct_density_matrix(fits)

    def test_projection_bounded_by_truncated_mass(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            rho = x @ x.conj().T
            rho /= np.trace(rho).real
            # inject a small negative eigenvalue like fit noise does
            vals, vecs = np.linalg.eigh(rho)
            vals[0] = -0.02
            vals = vals / vals.sum()
            rho_noisy = (vecs * vals) @ vecs.conj().T
            projected = tg.project_physical(rho_noisy)
            truncated_mass = float(np.sum(np.abs(np.clip(vals, None, 0.0))))
            dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(projected - rho_noisy)))
            assert dist <= truncated_mass + 1e-9

    def test_wigner_normalization_of_reconstruction(self, closed_params, closed_responses):
        t, resp = closed_responses
        rng = np.random.default_rng(21)
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho4 = x @ x.conj().T
        rho4 /= np.trace(rho4).real
        rho = np.zeros((10, 10), dtype=complex)
        rho[:4, :4] = rho4
        fits = _ideal_fits(rho, closed_params, t, resp, tg.default_alpha_grid())
        recon = tg.reconstruct_density_matrix(fits)

        dim_eval = 40
        rho_eval = np.zeros((dim_eval, dim_eval), dtype=complex)
        rho_eval[:4, :4] = recon.rho_small
        axis = np.linspace(-4.0, 4.0, 41)
        step = axis[1] - axis[0]
        total = 0.0
        for re in axis:
            for im in axis:
                if re * re + im * im > 16.0:
                    continue
                total += tg.wigner_from_state(rho_eval, complex(re, im))
        total *= step * step
        assert abs(total - 1.0) < 0.02


class TestFidelity:
    def test_pure_state_unity(self):
        psi = np.array([0.6, 0.8j, 0, 0], dtype=complex)
        rho = np.zeros((10, 10), dtype=complex)
        rho[:4, :4] = np.outer(psi, psi.conj())
        value, sigma = tg.fidelity(rho, psi)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert sigma == 0.0

    def test_orthogonal_states(self):
        rho = np.zeros((10, 10), dtype=complex)
        rho[0, 0] = 1.0
        psi = np.array([0, 1, 0, 0], dtype=complex)
        value, _ = tg.fidelity(rho, psi)
        assert value == 0.0

    def test_monte_carlo_spread(self):
        rho = np.zeros((10, 10), dtype=complex)
        rho[:4, :4] = np.diag([0.9, 0.1, 0.0, 0.0])
        cov = np.eye(15) * 1e-4
        psi = np.array([1, 0, 0, 0], dtype=complex)
        value, sigma = tg.fidelity(rho, psi, cov, n_samples=400, seed=3)
        assert 0 < sigma < 0.1
        # deterministic given the seed
        value2, sigma2 = tg.fidelity(rho, psi, cov, n_samples=400, seed=3)
        assert sigma == sigma2

    def test_invalid_covariance_rejected(self):
        rho = np.zeros((10, 10), dtype=complex)
        rho[0, 0] = 1.0
        cov = -np.eye(15)
        with pytest.raises(FitError):
            tg.fidelity(rho, np.array([1, 0, 0, 0], dtype=complex), cov)


class TestDisplacementCalibration:
    def test_scale_recovery(self):
        params = lb.SystemParams(dim=12)
        true_scale = 0.042
        amps = np.linspace(0.0, 45.0, 10)

        def forward(scale):
            out = []
            for u in amps:
                seq = lb.PulseSequence()
                if u:
                    seq.append(lb.Displace(complex(scale * u)))
                seq.append(lb.swap_segment(params))
                seq.append(lb.Measure())
                out.append(lb.run_sequence(seq, params).p_e[0])
            return np.array(out)

        data = forward(true_scale)
        fitted = tg.calibrate_displacement(zip(amps, data), params, initial_scale=0.03)
        assert abs(fitted - true_scale) / true_scale < 0.01

    def test_gauge_invariance(self):
        params = lb.SystemParams(dim=12)
        amps = np.linspace(0.0, 45.0, 8)
        data = []
        for u in amps:
            seq = lb.PulseSequence()
            if u:
                seq.append(lb.Displace(complex(0.04 * u)))
            seq.append(lb.swap_segment(params))
            seq.append(lb.Measure())
            data.append(lb.run_sequence(seq, params).p_e[0])
        s1 = tg.calibrate_displacement(zip(amps, data), params, initial_scale=0.03)
        s2 = tg.calibrate_displacement(zip(2 * amps, data), params, initial_scale=0.015)
        assert s2 == pytest.approx(s1 / 2, rel=1e-3)

    def test_narrow_sweep_rejected(self):
        params = lb.SystemParams()
        amps = np.linspace(0, 1.0, 6)
        data = np.full(6, 0.02)
        with pytest.raises(IdentifiabilityError):
            tg.calibrate_displacement(zip(amps, data), params)


class TestRabiPopulation:
    def _traces(self, population, rng, noise=0.002, n=100, contrast=0.95):
        x = np.linspace(-1.0, 1.0, n)
        a_e = population * contrast
        a_g = (1.0 - population) * contrast
        y_e = 0.5 - 0.5 * a_e * np.cos(math.pi * x) + noise * rng.standard_normal(n)
        y_g = 0.5 - 0.5 * a_g * np.cos(math.pi * x) + noise * rng.standard_normal(n)
        return x, y_e, y_g

    @pytest.mark.parametrize("population,tol", [(0.0169, 0.001), (0.0049, 0.001)])
    def test_thermal_population_estimates(self, population, tol):
        rng = np.random.default_rng(17)
        x, y_e, y_g = self._traces(population, rng)
        a_e, s_e = tg.fit_oscillation_amplitude(x, y_e)
        a_g, s_g = tg.fit_oscillation_amplitude(x, y_g)
        p, sigma = tg.rabi_population_estimate(a_e, a_g, s_e, s_g)
        assert abs(p - population) < tol
        assert 0.5e-4 < sigma < 1e-3

    def test_zero_excited_amplitude(self):
        p, sigma = tg.rabi_population_estimate(0.0, 0.95)
        assert p == 0.0
        assert sigma == 0.0

    def test_propagation_matches_finite_difference(self):
        a_e, a_g = 0.02, 0.93
        s_e, s_g = 3e-4, 5e-4
        _, sigma = tg.rabi_population_estimate(a_e, a_g, s_e, s_g)
        eps = 1e-8
        dp_de = (
            tg.rabi_population_estimate(a_e + eps, a_g)[0]
            - tg.rabi_population_estimate(a_e - eps, a_g)[0]
        ) / (2 * eps)
        dp_dg = (
            tg.rabi_population_estimate(a_e, a_g + eps)[0]
            - tg.rabi_population_estimate(a_e, a_g - eps)[0]
        ) / (2 * eps)
        expected = math.hypot(dp_de * s_e, dp_dg * s_g)
        assert sigma == pytest.approx(expected, rel=1e-6)

    def test_invalid_amplitudes(self):
        with pytest.raises(DomainError):
            tg.rabi_population_estimate(0.01, 0.0)


class TestDatasetIO:
    def test_json_roundtrip(self):
        params = lb.SystemParams(dim=6)
        t = np.linspace(0, 50e-9, 40)
        rec = tg.TraceRecord(0.5 - 0.25j, t, np.linspace(0, 1, 40), 0.03)
        ds = tg.TomographyDataset([rec], state_label="1", params=params)
        clone = tg.TomographyDataset.from_json(ds.to_json())
        assert clone.state_label == "1"
        assert clone.params.dim == 6
        assert clone.records[0].alpha == 0.5 - 0.25j
        assert np.allclose(clone.records[0].p_e, rec.p_e)
        json.loads(ds.to_json())  # valid JSON document

    def test_wigner_csv(self, tmp_path):
        fits = [
            tg.PopulationFit(np.eye(10)[0], np.zeros(10), 0.0, 0j),
            tg.PopulationFit(np.eye(10)[1], np.zeros(10), 0.0, 1 + 1j),
        ]
        path = tmp_path / "wigner.csv"
        tg.export_wigner_csv(path, fits)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "alpha_re,alpha_im,w"
        assert len(lines) == 3

    def test_reconstruction_report_fields(self):
        rng = np.random.default_rng(1)
        c = rng.standard_normal(15) * 0.01
        rho = tg.project_physical(tg.density_from_parameters(c))
        recon = tg.ReconstructedState(
            rho=np.pad(rho, ((0, 6), (0, 6))),
            parameters=c,
            covariance=np.eye(15) * 1e-6,
            rho_raw=rho,
            residual=0.1,
        )
        report = tg.reconstruction_report(recon, fidelity_value=(0.9, 0.01))
        assert set(report) >= {"rho_re", "rho_im", "parameters", "covariance", "residual", "fidelity"}
        json.dumps(report)
