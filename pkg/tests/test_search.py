import numpy as np
import pytest
from scipy.optimize import brentq

from bnfi import ir
from bnfi.criteria import CriterionId
from bnfi.engine.forward import accuracy
from bnfi.pruning import uniform_plan, apply_plan
from bnfi.search import (
    SearchCfg,
    bisect_pruning_ratio,
    search_all_ratios,
    search_layer_ratio,
    sweep,
)

from conftest import chain_net


class TestBisect:
    def test_linear_evaluator_reference_value(self):
        # hand-simulated halving with the >= tie rule: u: 0.5, 0.25;
        # l: 0.125, 0.1875, 0.21875; midpoint (0.21875 + 0.25)/2 = 15/64
        cfg = SearchCfg(delta=0.25, iterations=5, lower=0.0, upper=1.0)
        got = bisect_pruning_ratio(1.0, lambda r: 1.0 - r, cfg)
        assert got == 0.234375

    def test_interval_width_default_bounds(self):
        cfg = SearchCfg(delta=0.5)
        got = bisect_pruning_ratio(1.0, lambda r: 1.0 - r, cfg)
        assert cfg.lower < got < cfg.upper

    def test_unreachable_budget_converges_to_upper(self):
        cfg = SearchCfg(delta=0.99)
        got = bisect_pruning_ratio(1.0, lambda r: 1.0 - 0.5 * r, cfg)
        assert got > 0.9

    def test_zero_budget_converges_to_lower(self):
        cfg = SearchCfg(delta=0.0)
        got = bisect_pruning_ratio(1.0, lambda r: 1.0 - r, cfg)
        assert got < 0.05

    def test_agrees_with_scalar_bisection_oracle(self):
        rng = np.random.default_rng(11)
        cfg_proto = SearchCfg(delta=0.1)
        for _ in range(20):
            a = rng.uniform(0.2, 1.5)
            b = rng.uniform(0.0, 1.0)
            degradation = lambda r: a * r + b * r * r  # strictly increasing
            delta = rng.uniform(
                degradation(cfg_proto.lower) + 1e-6, degradation(cfg_proto.upper)
            )
            cfg = SearchCfg(delta=delta, iterations=cfg_proto.iterations)
            got = bisect_pruning_ratio(1.0, lambda r: 1.0 - degradation(r), cfg)
            root = brentq(lambda r: degradation(r) - delta, cfg.lower, cfg.upper, xtol=1e-14)
            width = (cfg.upper - cfg.lower) / 2**cfg.iterations
            assert abs(got - root) <= width

    def test_result_strictly_inside_bounds(self):
        for delta in (0.0, 0.1, 2.0):
            cfg = SearchCfg(delta=delta)
            got = bisect_pruning_ratio(1.0, lambda r: 1.0 - r, cfg)
            assert cfg.lower < got < cfg.upper

    def test_cfg_validation(self):
        with pytest.raises(ValueError):
            SearchCfg(delta=0.1, lower=0.5, upper=0.5)
        with pytest.raises(ValueError):
            SearchCfg(delta=0.1, iterations=0)
        with pytest.raises(ValueError):
            SearchCfg(delta=float("inf"))


class TestSearchLayerRatio:
    def test_channel_counting_evaluator_replays_reference_trajectory(self):
        # a 32-channel unit makes every visited midpoint an exact multiple
        # of 1/32, so the continuous reference value 0.234375 is attained
        net = chain_net(c1=32, c2=4)
        unit = ir.prunable_units(net)[0]
        cfg = SearchCfg(delta=0.25, iterations=5, lower=0.0, upper=1.0)

        def evaluator(candidate):
            return candidate.nodes[0].out_ch / 32.0

        got = search_layer_ratio(net, unit, CriterionId("l1"), cfg, evaluator)
        assert got == 0.234375

    def test_rejects_foreign_unit(self):
        net = chain_net()
        bogus = ir.PrunableUnit(conv_index=3, bn_index=4, act_index=5, consumers=(7,))
        with pytest.raises(ValueError):
            search_layer_ratio(net, bogus, CriterionId("l1"), SearchCfg(delta=0.1), lambda n: 1.0)


class TestSearchAllRatios:
    def test_single_unit_equals_layer_search(self):
        net = chain_net(c1=32, c2=4)
        # make the second conv non-prunable is not easy here; compare unit 0
        cfg = SearchCfg(delta=0.25)
        units = ir.prunable_units(net)

        def evaluator(candidate):
            # symmetric synthetic degradation: surviving channel fraction
            kept = sum(
                candidate.nodes[u.conv_index].out_ch / net.nodes[u.conv_index].out_ch
                for u in ir.prunable_units(candidate)
            )
            return kept / len(units)

        ratios = search_all_ratios(net, CriterionId("l1"), cfg, evaluator)
        per_unit = [
            search_layer_ratio(net, u, CriterionId("l1"), cfg, evaluator) for u in units
        ]
        assert ratios == per_unit

    def test_symmetric_units_get_identical_ratios(self):
        # both units have the same channel count; the evaluator treats
        # them symmetrically, so independent searches must agree exactly
        net = chain_net(c1=8, c2=8)
        base_units = ir.prunable_units(net)

        def evaluator(candidate):
            kept = 1.0
            for u in ir.prunable_units(candidate):
                kept *= candidate.nodes[u.conv_index].out_ch / 8.0
            return kept

        cfg = SearchCfg(delta=0.3)
        ratios = search_all_ratios(net, CriterionId("gamma_mag"), cfg, evaluator)
        assert len(ratios) == 2
        assert ratios[0] == ratios[1]

    def test_zero_delta_with_degrading_evaluator(self):
        net = chain_net(c1=16, c2=16)
        cfg = SearchCfg(delta=0.0)

        def evaluator(candidate):
            kept = sum(
                candidate.nodes[u.conv_index].out_ch for u in ir.prunable_units(candidate)
            )
            return kept / 32.0  # strictly degrades as channels vanish

        ratios = search_all_ratios(net, CriterionId("l1"), cfg, evaluator)
        assert all(r < 0.05 for r in ratios)

    def test_cumulative_mode_runs(self):
        net = chain_net(c1=8, c2=8)
        cfg = SearchCfg(delta=0.2, cumulative=True)
        ratios = search_all_ratios(net, CriterionId("l1"), cfg, lambda n: 1.0)
        assert len(ratios) == 2


class TestSweep:
    def test_ratio_zero_rows_equal_baseline(self, trained_net, trained_data):
        report = sweep(
            trained_net,
            [CriterionId("bnfi"), CriterionId("l1")],
            ["aoi", "doi"],
            [0.0, 0.2],
            trained_data,
        )
        for row in report.rows:
            if row.ratio == 0.0:
                assert row.accuracy == report.baseline_accuracy

    def test_row_count_and_order(self, trained_net, trained_data):
        report = sweep(
            trained_net,
            [CriterionId("bnfi"), CriterionId("l1"), CriterionId("random")],
            ["aoi", "doi"],
            [0.1, 0.3],
            trained_data,
        )
        assert len(report.rows) == 3 * 2 * 2
        labels = [(r.criterion, r.order, r.ratio) for r in report.rows]
        assert labels == sorted(labels, key=lambda t: (t[0] != "bnfi", t[0], t[1], t[2]))

    def test_jobs_do_not_change_results(self, trained_net, trained_data):
        args = (
            trained_net,
            [CriterionId("bnfi"), CriterionId("random")],
            ["aoi"],
            [0.1, 0.3],
            trained_data,
        )
        serial = sweep(*args, jobs=1)
        parallel = sweep(*args, jobs=4)
        assert serial.to_csv() == parallel.to_csv()

    def test_rejects_non_increasing_ratios(self, trained_net, trained_data):
        with pytest.raises(ValueError):
            sweep(trained_net, [CriterionId("l1")], ["aoi"], [0.3, 0.1], trained_data)

    def test_csv_shape(self, trained_net, trained_data):
        report = sweep(trained_net, [CriterionId("l1")], ["aoi"], [0.1], trained_data)
        lines = report.to_csv().splitlines()
        assert lines[0] == "criterion,order,ratio,accuracy,acc_drop,params,flops"
        assert len(lines) == 2
        assert "\r" not in report.to_csv()
