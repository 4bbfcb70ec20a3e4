import numpy as np
import pytest

from netmodal.modes import mode_artifacts
from netmodal.vectorfit import (
    FitSetupError,
    MeasurementError,
    PoleResidueModel,
    SpectrumSamples,
    count_resonance_peaks,
    fit,
    initial_poles,
    sensitivities_from_fit,
)


def pair_response(omega, pole, residue, direct=0.0):
    s = 1j * omega
    return residue / (s - pole) + np.conj(residue) / (s - np.conj(pole)) + direct


class TestSpectrumSamples:
    def test_requires_ascending_grid(self):
        with pytest.raises(FitSetupError, match="ascending"):
            SpectrumSamples(np.array([1.0, 1.0, 2.0]), {(1, 1): np.zeros(3)})

    def test_requires_density(self):
        omega = np.array([0.01, 10.0])
        with pytest.raises(FitSetupError, match="per decade"):
            SpectrumSamples(omega, {(1, 1): np.zeros(2)})

    def test_requires_matching_shapes(self):
        omega = np.logspace(-1, 1, 30)
        with pytest.raises(FitSetupError, match="does not match"):
            SpectrumSamples(omega, {(1, 1): np.zeros(10)})


class TestExactRecovery:
    def test_single_pair_noiseless(self):
        pole = -1.0 + 5.0j
        residue = 2.0 - 0.5j
        omega = np.logspace(-1, 2, 120)
        samples = SpectrumSamples(omega, {(1, 1): pair_response(omega, pole, residue)})
        model = fit(samples, order=2, iterations=5)
        fitted = model.poles[np.argmax(model.poles.imag)]
        assert abs(fitted - pole) / abs(pole) < 1e-6
        idx = int(np.argmax(model.poles.imag))
        assert abs(model.residues[(1, 1)][idx] - residue) < 1e-6
        assert model.misfit < 1e-8
        assert not model.unstable.any()

    def test_conjugate_closure(self):
        pole = -0.2 + 3.0j
        omega = np.logspace(-1, 1.5, 80)
        samples = SpectrumSamples(omega, {(1, 1): pair_response(omega, pole, 1.0 + 1.0j)})
        model = fit(samples, order=2, iterations=5)
        assert np.allclose(np.sort_complex(model.poles),
                           np.sort_complex(np.conj(model.poles)))
        res = model.residues[(1, 1)]
        order = np.argsort(model.poles.imag)
        assert res[order[0]] == pytest.approx(np.conj(res[order[1]]), rel=1e-8)

    def test_direct_term_recovered(self):
        pole = -0.5 + 2.0j
        omega = np.logspace(-1, 1, 60)
        samples = SpectrumSamples(
            omega, {(1, 1): pair_response(omega, pole, 1.0 + 0.3j, direct=4.0)}
        )
        model = fit(samples, order=2, iterations=6)
        assert model.direct[(1, 1)] == pytest.approx(4.0, rel=1e-6)


@pytest.fixture(scope="module")
def fitted(three_node_model):
    net, ynodal, det, modes = three_node_model
    omega = np.logspace(-2, 1, 200)
    grid = np.linalg.inv(ynodal.eval_grid(1j * omega))
    entries = {
        (k + 1, i + 1): grid[:, k, i] for k in range(3) for i in range(3)
    }
    samples = SpectrumSamples(omega, entries)
    return modes, ynodal, det, fit(samples, order=9, iterations=10)


@pytest.fixture(scope="module")
def diagonal_model(three_node_model):
    _, ynodal, _, _ = three_node_model
    omega = np.logspace(-2, 1, 200)
    grid = np.linalg.inv(ynodal.eval_grid(1j * omega))
    samples = SpectrumSamples(omega, {(2, 2): grid[:, 1, 1]})
    return fit(samples, order=9, iterations=10)


class TestThreeNodeRoundTrip:
    def test_poles_match_modes(self, fitted):
        modes, _, _, model = fitted
        truth = np.sort_complex(np.array([m.eigenvalue for m in modes]))
        mine = np.sort_complex(model.poles)
        rel = np.abs(mine - truth) / np.maximum(1.0, np.abs(truth))
        assert rel.max() < 1e-4

    def test_residues_match_artifacts(self, fitted):
        modes, ynodal, det, model = fitted
        for m in modes:
            if not (m.oscillatory and m.eigenvalue.imag > 0):
                continue
            art = mode_artifacts(ynodal, m.eigenvalue, det=det)
            idx = int(np.argmin(np.abs(model.poles - art.eigenvalue)))
            for k in range(3):
                for i in range(3):
                    mine = model.residues[(k + 1, i + 1)][idx]
                    want = art.residue[k, i]
                    assert abs(mine - want) <= 1e-3 * max(1.0, abs(want))

    def test_sensitivities_match_analytic_route(self, fitted):
        modes, ynodal, det, model = fitted
        for m in modes:
            if not (m.oscillatory and m.eigenvalue.imag > 0):
                continue
            art = mode_artifacts(ynodal, m.eigenvalue, det=det)
            idx = int(np.argmin(np.abs(model.poles - art.eigenvalue)))
            sens = sensitivities_from_fit(model, idx)
            tol = max(1e-4, 10.0 * model.misfit)
            for node in (1, 2, 3):
                analytic = np.conj(-art.residue[node - 1, node - 1])
                assert abs(sens.shunt_factor(node) - analytic) <= tol * max(1, abs(analytic))
            analytic_branch = np.conj(
                -art.residue[0, 0] - art.residue[2, 2]
                + art.residue[0, 2] + art.residue[2, 0]
            )
            assert abs(sens.branch_factor(1, 3) - analytic_branch) \
                <= tol * max(1, abs(analytic_branch))


class TestNoiseMonteCarlo:
    def test_resonance_recovery_under_noise(self):
        pole = -0.05 + 1.0j
        residue = 1.0 + 0.5j
        omega = np.logspace(-1, 0.7, 200)
        clean = pair_response(omega, pole, residue)
        rng = np.random.default_rng(99)
        hits = 0
        for _ in range(50):
            noise = 1.0 + 0.01 / np.sqrt(2) * (
                rng.standard_normal(omega.size) + 1j * rng.standard_normal(omega.size)
            )
            samples = SpectrumSamples(omega, {(1, 1): clean * noise})
            model = fit(samples, order=2, iterations=8)
            fitted = model.poles[np.argmax(model.poles.imag)]
            freq_ok = abs(fitted.imag - pole.imag) / abs(pole.imag) < 0.01
            damp_ok = abs(fitted.real - pole.real) / abs(pole.real) < 0.05
            hits += int(freq_ok and damp_ok)
        assert hits >= 45


class TestPartialMeasurement:
    def test_shunt_factor_available(self, diagonal_model):
        idx = int(np.argmax(diagonal_model.poles.imag))
        sens = sensitivities_from_fit(diagonal_model, idx)
        assert np.isfinite(sens.shunt_factor(2))

    def test_branch_factor_errors_name_missing_entries(self, diagonal_model):
        idx = int(np.argmax(diagonal_model.poles.imag))
        sens = sensitivities_from_fit(diagonal_model, idx)
        with pytest.raises(MeasurementError, match=r"\(1, 1\)"):
            sens.branch_factor(1, 2)

    def test_entries_are_negated_residues(self, diagonal_model):
        idx = 0
        sens = sensitivities_from_fit(diagonal_model, idx)
        assert sens.entries[(2, 2)] == pytest.approx(
            -diagonal_model.residues[(2, 2)][idx]
        )

    def test_zero_residue_gives_zero_shunt_factor(self):
        model = PoleResidueModel(
            poles=np.array([-1.0 + 2.0j, -1.0 - 2.0j]),
            residues={(1, 1): np.array([0.0j, 0.0j])},
            direct={(1, 1): 0j},
            misfit=0.0,
            unstable=np.array([False, False]),
        )
        sens = sensitivities_from_fit(model, 0)
        assert sens.shunt_factor(1) == 0

    def test_pole_index_bounds(self, diagonal_model):
        with pytest.raises(IndexError):
            sensitivities_from_fit(diagonal_model, 99)


class TestSetupErrors:
    def test_insufficient_samples_for_order(self):
        omega = np.logspace(-1, 1, 8)
        samples = SpectrumSamples(omega, {(1, 1): np.ones(8, dtype=complex)})
        with pytest.raises(FitSetupError, match="insufficient samples"):
            fit(samples, order=12, iterations=2)

    def test_order_must_be_positive(self, three_node_model):
        omega = np.logspace(-1, 1, 30)
        samples = SpectrumSamples(omega, {(1, 1): np.ones(30, dtype=complex)})
        with pytest.raises(FitSetupError, match="order"):
            fit(samples, order=0)

    def test_iterations_must_be_positive(self):
        omega = np.logspace(-1, 1, 30)
        samples = SpectrumSamples(omega, {(1, 1): np.ones(30, dtype=complex)})
        with pytest.raises(FitSetupError, match="iteration"):
            fit(samples, order=2, iterations=0)


class TestHelpers:
    def test_initial_poles_lightly_damped_pairs(self):
        omega = np.logspace(-1, 2, 50)
        poles = initial_poles(omega, 6)
        assert poles.size == 6
        uppers = poles[poles.imag > 0]
        assert np.allclose(uppers.real, -uppers.imag / 100.0)

    def test_initial_poles_odd_order_adds_real_pole(self):
        poles = initial_poles(np.logspace(0, 2, 40), 5)
        assert np.sum(np.abs(poles.imag) < 1e-12) == 1

    def test_peak_count_lower_bound(self, three_node_model):
        _, ynodal, _, _ = three_node_model
        omega = np.logspace(-2, 1, 300)
        grid = np.linalg.inv(ynodal.eval_grid(1j * omega))
        samples = SpectrumSamples(omega, {(2, 2): grid[:, 1, 1]})
        peaks = count_resonance_peaks(samples)
        assert peaks >= 1
        assert 2 * peaks <= 9
