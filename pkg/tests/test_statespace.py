import numpy as np
import pytest

from netmodal.modes import find_modes
from netmodal.network import (
    NetworkModel,
    Node,
    RationalBlock,
    SeriesRL,
    Shunt,
    ShuntRLC,
    build_ynodal,
)
from netmodal.rational import RationalFunction
from netmodal.sensitivity import parameter_sensitivity_factor
from netmodal.greybox import component_factors
from netmodal.modes import mode_artifacts
from netmodal.statespace import (
    OracleScopeError,
    TrackingError,
    build_state_space,
    finite_difference_dlambda,
    random_rlc_network,
    track_mode,
)


def parallel_rlc(r=1.0, l=1.0, c=1.0):
    return NetworkModel([Node(1)], [Shunt(1, ShuntRLC(r, l, c), "A1")])


class TestBuildStateSpace:
    def test_parallel_rlc_matrix(self):
        ss = build_state_space(parallel_rlc())
        assert ss.labels == ("v_1", "i_A1")
        assert np.array_equal(ss.matrix, [[0.0, -1.0], [1.0, -1.0]])
        eigs = np.sort_complex(ss.eigenvalues())
        assert np.allclose(eigs, [-0.5 - 0.8660254j, -0.5 + 0.8660254j], atol=1e-7)

    def test_pure_lc_on_imaginary_axis(self):
        ss = build_state_space(parallel_rlc(r=0.0, l=0.25, c=1.0))
        eigs = ss.eigenvalues()
        assert np.allclose(eigs.real, 0.0, atol=1e-12)
        assert np.allclose(np.sort(np.abs(eigs.imag)), [2.0, 2.0])

    def test_three_node_count_and_pair_structure(self, three_node_net):
        ss = build_state_space(three_node_net)
        assert ss.order == 9
        eigs = ss.eigenvalues()
        complex_count = int(np.sum(np.abs(eigs.imag) > 1e-9))
        assert complex_count == 6  # three conjugate pairs
        assert np.sum(np.abs(eigs.imag) <= 1e-9) == 3

    def test_rejects_custom_blocks(self):
        blk = RationalBlock(RationalFunction([0.0, 1.0], [1.0]))
        net = NetworkModel([Node(1)], [Shunt(1, blk, "A1")])
        with pytest.raises(OracleScopeError, match="passive RLC only"):
            build_state_space(net)

    def test_rejects_capacitorless_node(self):
        net = NetworkModel(
            [Node(1), Node(2)],
            [Shunt(1, ShuntRLC(1.0, 1.0, 1.0), "A1"),
             Shunt(2, SeriesRL(1.0, 1.0), "A2")],
        )
        with pytest.raises(OracleScopeError, match="capacitance"):
            build_state_space(net)

    def test_matches_determinant_zeros_on_corpus(self, small_corpus):
        for net in small_corpus:
            eigs = np.sort_complex(build_state_space(net).eigenvalues())
            modes = np.sort_complex(
                np.array([m.eigenvalue for m in find_modes(build_ynodal(net))])
            )
            assert eigs.shape == modes.shape
            rel = np.max(np.abs(eigs - modes) / np.maximum(1, np.abs(eigs)))
            assert rel < 1e-6

    def test_passivity(self, small_corpus):
        for net in small_corpus[:10]:
            eigs = build_state_space(net).eigenvalues()
            assert np.all(eigs.real <= 1e-9)


class TestFiniteDifference:
    def test_rejects_zero_step(self, three_node_net):
        with pytest.raises(ValueError, match="positive"):
            finite_difference_dlambda(three_node_net, "A1", "R", 1j, 0.0)

    def test_matches_analytic_rlc_derivative(self):
        # implicit differentiation of L*C*s^2 + R*C*s + 1 = 0 w.r.t. R
        r, l, c = 1.0, 1.0, 1.0
        net = parallel_rlc(r, l, c)
        lam = (-r * c + 1j * np.sqrt(4 * l * c - r * r * c * c)) / (2 * l * c)
        analytic = -(c * lam) / (2 * l * c * lam + r * c)
        fd = finite_difference_dlambda(net, "A1", "R", lam, 1e-4)
        assert fd == pytest.approx(analytic, rel=1e-3)
        # and against the sensitivity-factor route, tighter
        ynodal = build_ynodal(net)
        art = mode_artifacts(ynodal, lam)
        factor = component_factors(net, art)[0]
        ps = parameter_sensitivity_factor(
            factor, "R", net.component("A1").kind.param_derivative("R", art.eigenvalue), r
        )
        assert fd == pytest.approx(ps.value, rel=1e-3)
        assert abs(fd - ps.value) / abs(ps.value) < 1e-3

    def test_decoupled_parameter_has_no_effect(self):
        net = NetworkModel(
            [Node(1), Node(2)],
            [Shunt(1, ShuntRLC(1.0, 1.0, 1.0), "A1"),
             Shunt(2, ShuntRLC(0.5, 0.3, 0.2), "A2")],
        )
        modes = find_modes(build_ynodal(net))
        lam = next(m.eigenvalue for m in modes
                   if abs(m.eigenvalue - (-0.5 + 0.866j)) < 0.01)
        fd = finite_difference_dlambda(net, "A2", "R", lam, 1e-4)
        assert abs(fd) < 1e-9

    def test_tracking_ambiguity(self):
        # nearly coincident resonators; aiming between the twin modes makes
        # the nearest-neighbour match ambiguous
        net = NetworkModel(
            [Node(1), Node(2)],
            [Shunt(1, ShuntRLC(1.0, 1.0, 1.0), "A1"),
             Shunt(2, ShuntRLC(1.0, 1.0, 1.0004), "A2")],
        )
        upper = sorted(
            (m.eigenvalue for m in find_modes(build_ynodal(net))
             if m.eigenvalue.imag > 0),
            key=lambda z: z.imag,
        )
        midpoint = 0.5 * (upper[0] + upper[1])
        with pytest.raises(TrackingError, match="tracking failure"):
            finite_difference_dlambda(net, "A1", "C", midpoint, 1e-4)

    def test_richardson_consistency(self):
        # halving the step shrinks the truncation error about fourfold
        r, l, c = 1.0, 1.0, 1.0
        net = parallel_rlc(r, l, c)
        lam = (-r * c + 1j * np.sqrt(4 * l * c - r * r * c * c)) / (2 * l * c)
        analytic = -(c * lam) / (2 * l * c * lam + r * c)
        err = [abs(finite_difference_dlambda(net, "A1", "R", lam, eps) - analytic)
               for eps in (0.04, 0.02)]
        assert 2.5 < err[0] / err[1] < 6.5


class TestTrackMode:
    def test_picks_nearest(self, three_node_model):
        _, _, _, modes = three_node_model
        lam = modes[0].eigenvalue
        assert track_mode(modes, lam + 1e-4) == pytest.approx(lam)

    def test_empty_list(self):
        with pytest.raises(TrackingError):
            track_mode([], 1j)


class TestRandomNetworkGenerator:
    def test_deterministic_given_seed(self):
        a = random_rlc_network(np.random.default_rng(5))
        b = random_rlc_network(np.random.default_rng(5))
        assert a.nodes == b.nodes
        assert a.shunts == b.shunts
        assert a.branches == b.branches

    def test_every_node_has_rlc_shunt(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            net = random_rlc_network(rng)
            shunted = {s.node for s in net.shunts}
            assert shunted == {n.id for n in net.nodes}
            assert all(isinstance(s.kind, ShuntRLC) for s in net.shunts)

    def test_parameters_in_declared_range(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            net = random_rlc_network(rng)
            for comp in net.components():
                for value in comp.kind.params.values():
                    assert 0.1 <= value <= 10.0
