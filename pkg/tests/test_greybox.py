import numpy as np
import pytest

from netmodal.greybox import (
    component_factors,
    layer1_ranking,
    layer2_decomposition,
    layer3_guidance,
    mode_report,
)
from netmodal.modes import find_modes, mode_artifacts
from netmodal.network import NetworkModel, RationalBlock, Shunt, build_ynodal
from netmodal.sensitivity import ParamSensitivity, SensitivityFactor
from netmodal.statespace import track_mode


def factor(component, layer1, layer2):
    return SensitivityFactor(
        component, np.array([[1.0 + 0j]]), np.array([[1.0 + 0j]]), layer1, layer2
    )


@pytest.fixture(scope="module")
def sample_report(three_node_model):
    net, ynodal, det, modes = three_node_model
    target = next(m for m in modes if m.oscillatory and m.eigenvalue.imag > 0)
    return net, ynodal, det, mode_report(net, ynodal, target, fraction=0.05, det=det)


class TestLayer1:
    def test_single_component_ranks_first(self):
        ranked = layer1_ranking([factor("A1", 2.0, 1.0)])
        assert ranked == [("A1", 2.0)]

    def test_ties_break_by_component_name(self):
        ranked = layer1_ranking(
            [factor("B2", 1.0, 0.5), factor("A9", 1.0, 0.5), factor("A1", 3.0, 1.0)]
        )
        assert [name for name, _ in ranked] == ["A1", "A9", "B2"]

    def test_top2_matches_exhaustive_probing(self, three_node_model):
        # oracle: bump each admittance by 0.1% of itself, rank actual |shift|
        net, ynodal, det, modes = three_node_model
        eps = 1e-3
        for target in modes:
            if not (target.oscillatory and target.eigenvalue.imag > 0):
                continue
            art = mode_artifacts(ynodal, target.eigenvalue, det=det)
            ranked = layer1_ranking(component_factors(net, art))
            shifts = {}
            for comp in net.components():
                bumped_kind = RationalBlock(comp.kind.admittance() * (1 + eps))
                if comp in net.shunts:
                    shunts = tuple(
                        Shunt(s.node, bumped_kind, s.name) if s.name == comp.name else s
                        for s in net.shunts
                    )
                    bumped = NetworkModel(net.nodes, shunts, net.branches)
                else:
                    from netmodal.network import Branch
                    branches = tuple(
                        Branch(b.node_a, b.node_b, bumped_kind, b.name)
                        if b.name == comp.name else b
                        for b in net.branches
                    )
                    bumped = NetworkModel(net.nodes, net.shunts, branches)
                moved = track_mode(find_modes(build_ynodal(bumped)), art.eigenvalue)
                shifts[comp.name] = abs(moved - art.eigenvalue)
            probe_top2 = set(sorted(shifts, key=shifts.get, reverse=True)[:2])
            layer1_top2 = {name for name, _ in ranked[:2]}
            assert layer1_top2 == probe_top2


class TestLayer2:
    def test_shares_sum_to_one_in_magnitude(self, sample_report):
        _, _, _, report = sample_report
        total = sum(abs(share) for _, _, share in report.layer2)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_share_direction_preserved(self):
        decomposition = layer2_decomposition(
            [factor("A1", 2.0, -1.0 + 1.0j), factor("A2", 1.0, 0.5 + 0j)]
        )
        values = {name: (value, share) for name, value, share in decomposition}
        for value, share in values.values():
            assert np.angle(value) == pytest.approx(np.angle(share))

    def test_negative_real_part_damps_when_scaled_up(self, three_node_model):
        # sign oracle: grow one admittance by 1% of itself and re-solve
        net, ynodal, det, modes = three_node_model
        target = next(m for m in modes if m.oscillatory and m.eigenvalue.imag > 0)
        art = mode_artifacts(ynodal, target.eigenvalue, det=det)
        eps = 0.01
        for name, value, _ in mode_report(net, ynodal, target, det=det).layer2:
            comp = net.component(name)
            bumped_kind = RationalBlock(comp.kind.admittance() * (1 + eps))
            if comp in net.shunts:
                shunts = tuple(
                    Shunt(s.node, bumped_kind, s.name) if s.name == name else s
                    for s in net.shunts
                )
                bumped = NetworkModel(net.nodes, shunts, net.branches)
            else:
                from netmodal.network import Branch
                branches = tuple(
                    Branch(b.node_a, b.node_b, bumped_kind, b.name)
                    if b.name == name else b
                    for b in net.branches
                )
                bumped = NetworkModel(net.nodes, net.shunts, branches)
            moved = track_mode(find_modes(build_ynodal(bumped)), art.eigenvalue)
            actual = moved - art.eigenvalue
            if abs(value.real) > 0.05 * abs(value):
                assert np.sign(actual.real) == np.sign(value.real)

    def test_layer2_never_exceeds_layer1(self, three_node_model, small_corpus):
        net, ynodal, det, modes = three_node_model
        nets = [(net, ynodal, det, modes)]
        for extra in small_corpus[:3]:
            y = build_ynodal(extra)
            d = y.det()
            nets.append((extra, y, d, find_modes(y, det=d)))
        for net_k, y_k, d_k, modes_k in nets:
            for m in modes_k:
                if not (m.oscillatory and m.eigenvalue.imag > 0) or m.near_repeated:
                    continue
                art = mode_artifacts(y_k, m.eigenvalue, det=d_k)
                for f in component_factors(net_k, art):
                    assert abs(f.layer2) <= f.layer1 * (1 + 1e-12)


class TestLayer3:
    def test_negative_real_normalized_means_increase(self):
        # a parameter whose normalized sensitivity points left-up is
        # increased to improve damping
        ps = ParamSensitivity("A12", "f_i", (-5.039 + 13.317j) / 300.0, 300.0)
        _, guidance = layer3_guidance([ps], fraction=0.05)
        assert guidance[0].direction == "increase"

    def test_positive_real_normalized_means_decrease(self):
        ps = ParamSensitivity("A1", "R", 2.0 + 1.0j, 1.0)
        _, guidance = layer3_guidance([ps], fraction=0.05)
        assert guidance[0].direction == "decrease"

    def test_pure_imaginary_flagged_no_leverage(self):
        ps = ParamSensitivity("A1", "C", 3.0j, 1.0)
        _, guidance = layer3_guidance([ps], fraction=0.05)
        assert guidance[0].direction == "none"
        assert "no first-order damping leverage" in guidance[0].rationale

    def test_significance_cutoff(self):
        big = ParamSensitivity("A1", "R", 10.0 + 0j, 1.0)
        small = ParamSensitivity("A2", "R", 0.1 + 0j, 1.0)
        kept, _ = layer3_guidance([big, small], fraction=0.0, significance=0.05)
        assert [p.component for p in kept] == ["A1"]
        kept_all, _ = layer3_guidance([big, small], fraction=0.0, significance=0.001)
        assert len(kept_all) == 2

    def test_sorted_by_normalized_magnitude(self, sample_report):
        _, _, _, report = sample_report
        mags = [abs(p.normalized) for p in report.layer3]
        assert mags == sorted(mags, reverse=True)

    def test_following_guidance_improves_damping(self, three_node_model):
        net, ynodal, det, modes = three_node_model
        for target in modes:
            if not (target.oscillatory and target.eigenvalue.imag > 0):
                continue
            report = mode_report(net, ynodal, target, fraction=0.01, det=det)
            top = next(g for g in report.guidance if g.direction != "none")
            rho = net.component(top.component).kind.params[top.param]
            sign = 1.0 if top.direction == "increase" else -1.0
            bumped = net.with_param(top.component, top.param, rho * (1 + sign * 0.01))
            moved = track_mode(
                find_modes(build_ynodal(bumped)), report.mode.eigenvalue
            )
            assert moved.real < report.mode.eigenvalue.real

    def test_guidance_soundness_small_fraction(self, three_node_model):
        # recommended direction at 0.1% never worsens damping noticeably
        net, ynodal, det, modes = three_node_model
        fraction = 1e-3
        for target in modes:
            if not (target.oscillatory and target.eigenvalue.imag > 0):
                continue
            report = mode_report(net, ynodal, target, fraction=fraction, det=det)
            lam = report.mode.eigenvalue
            for g in report.guidance:
                if g.direction == "none":
                    continue
                rho = net.component(g.component).kind.params[g.param]
                sign = 1.0 if g.direction == "increase" else -1.0
                bumped = net.with_param(g.component, g.param, rho * (1 + sign * fraction))
                moved = track_mode(find_modes(build_ynodal(bumped)), lam)
                assert moved.real <= lam.real + 1e-3 * abs(lam)


class TestReport:
    def test_report_is_complete(self, sample_report):
        net, _, _, report = sample_report
        assert len(report.layer1) == len(net.components())
        assert len(report.layer2) == len(report.layer1)
        assert report.layer3
        assert report.guidance
        assert report.fraction == 0.05

    def test_predictions_scale_with_fraction(self, three_node_model):
        net, ynodal, det, modes = three_node_model
        target = next(m for m in modes if m.oscillatory and m.eigenvalue.imag > 0)
        small = mode_report(net, ynodal, target, fraction=0.01, det=det)
        large = mode_report(net, ynodal, target, fraction=0.05, det=det)
        for g_small, g_large in zip(small.guidance, large.guidance):
            assert g_large.predicted == pytest.approx(5.0 * g_small.predicted)
