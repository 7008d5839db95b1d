import numpy as np
import pytest

from hypordinal import experiments as ex


def _sweep(**overrides):
    return ex.run_bound_sweep(ex.load_config("bounds", overrides=overrides))


def _by_variant(rows, variant):
    return [r for r in rows if r["variant"] == variant]


class TestBoundSweep:
    def test_single_point_gives_one_row_per_variant(self):
        rows = _sweep(R="1.0")
        assert len(rows) == 5
        assert len({r["variant"] for r in rows}) == 5

    def test_eoe_radius_scales_by_four(self):
        rows = _by_variant(_sweep(R="0.75,1.5,3.0"), "eoe_radius")
        totals = [r["total"] for r in rows]
        assert totals[1] == 4 * totals[0] and totals[2] == 4 * totals[1]

    def test_ratio_grows_with_radius(self):
        rows = _by_variant(_sweep(R="0.5,1.0,2.0,3.0"), "hoe_radius")
        ratios = [r["hoe_eoe_ratio"] for r in rows]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))


class TestRademacherCheck:
    def test_zero_radius_row(self):
        cfg = ex.load_config("rademacher", overrides={"n": "4", "m": "20", "C": "0",
                                                      "draws": "5", "opt_budget": "5"})
        (row,) = ex.run_rademacher_check(cfg, seed=1)
        np.testing.assert_allclose(row["estimate"], 0.0, atol=1e-12)
        assert row["pass"]


class TestTreeComparison:
    def test_uninformative_labels(self):
        cfg = ex.load_config("tree-compare", overrides={
            "tree": "random", "n": "5", "R": "3", "alpha": "0", "epochs": "50",
            "restarts": "1"})
        rows, _ = ex.run_tree_comparison(cfg, seed=0)
        assert [r["method"] for r in rows] == ["margin_certificate", "hoe", "eoe"]
        np.testing.assert_allclose([r["expected_ramp_risk"] for r in rows], 0.5, atol=1e-10)


class TestExcessRisk:
    @pytest.mark.slow
    def test_noiseless_large_sample(self):
        cfg = ex.load_config("excess-risk", overrides={
            "n": "6", "alpha": "0.5", "m": "20000", "seeds": "2", "epochs": "150"})
        rows = ex.run_excess_risk(cfg, seed=3)
        for r in rows:
            assert r["status"] == "ok"
            assert r["excess"] < 0.05
            assert r["excess"] < 0.01 * r["bound"]
