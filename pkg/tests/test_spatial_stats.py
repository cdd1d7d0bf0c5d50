import math

import numpy as np
import pytest

from topospat import (
    Dataset,
    DegenerateDataError,
    DimensionError,
    FeatureRecord,
    ParameterError,
    StateError,
    SummaryMethod,
    TestConfig,
    ValidationError,
    benjamini_hochberg,
    morans_i,
    permutation_test,
    read_report,
    rect_grid_graph,
    run_battery,
    write_report,
)
from topospat.spatial_stats import _feature_rng

from oracles import make_graph, moran_direct, random_graph


def path_graph(n):
    return make_graph([(float(i), 0.0) for i in range(n)], [(i, i + 1) for i in range(n - 1)])


class TestMoransI:
    def test_checkerboard_is_minus_one(self):
        g = rect_grid_graph([(0, 0), (1, 0), (0, 1), (1, 1)])
        assert morans_i(g, [1, 0, 0, 1]) == -1.0

    def test_monotone_path_values(self):
        # centre value equals the mean, so every edge cross-term vanishes
        assert morans_i(path_graph(3), [1, 2, 3]) == 0.0

    def test_skewed_path_values(self):
        assert morans_i(path_graph(3), [1, 2, 4]) == pytest.approx(-1.0 / 28.0, abs=1e-15)

    def test_constant_values_raise(self):
        with pytest.raises(DegenerateDataError):
            morans_i(path_graph(3), [2.0, 2.0, 2.0])

    def test_edgeless_graph_raises(self):
        g = make_graph([(0, 0), (1, 0)], [])
        with pytest.raises(DegenerateDataError):
            morans_i(g, [1.0, 2.0])

    def test_matches_dense_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(4, 25))
            g = random_graph(rng, n, 0.3)
            if g.n_edges == 0:
                continue
            vals = rng.random(n)
            assert morans_i(g, vals) == pytest.approx(moran_direct(g, vals), abs=1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        g = random_graph(rng, 20, 0.3)
        vals = rng.random(20)
        base = morans_i(g, vals)
        assert morans_i(g, 3.7 * vals + 11.0) == pytest.approx(base, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            morans_i(path_graph(3), [1.0, 2.0])


class TestBenjaminiHochberg:
    def test_worked_example(self):
        assert np.allclose(benjamini_hochberg([0.01, 0.02, 0.03]), [0.03, 0.03, 0.03])

    def test_single_p(self):
        assert benjamini_hochberg([0.2]) == pytest.approx([0.2])

    def test_clipped_at_one(self):
        assert np.allclose(benjamini_hochberg([1.0, 1.0]), [1.0, 1.0])

    def test_mixed_example(self):
        assert np.allclose(benjamini_hochberg([0.03, 0.01, 0.04, 0.04]),
                           [0.04, 0.04, 0.04, 0.04])

    def test_rejects_out_of_range(self):
        for bad in ([0.0, 0.5], [0.5, 1.5], [np.nan, 0.5]):
            with pytest.raises(ValidationError):
                benjamini_hochberg(bad)

    def test_invariant_to_input_order(self):
        rng = np.random.default_rng(6)
        ps = rng.uniform(0.001, 1.0, 50)
        perm = rng.permutation(50)
        q = benjamini_hochberg(ps)
        q_perm = benjamini_hochberg(ps[perm])
        assert np.allclose(q[perm], q_perm, atol=1e-15)

    def test_monotone_in_p_order(self):
        rng = np.random.default_rng(7)
        ps = rng.uniform(0.001, 1.0, 40)
        q = benjamini_hochberg(ps)
        order = np.argsort(ps)
        assert np.all(np.diff(q[order]) >= -1e-15)
        assert q.max() <= 1.0


class TestTestConfig:
    def test_defaults(self):
        cfg = TestConfig(method="betti")
        assert cfg.n_perm == 1000 and cfg.p == 2.0 and cfg.alpha == 0.05

    @pytest.mark.parametrize("kwargs", [
        {"n_perm": 0}, {"alpha": 0.0}, {"alpha": 1.0}, {"p": 3}, {"max_levels": 0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ParameterError):
            TestConfig(method="betti", **kwargs)


class TestPermutationTest:
    def test_p_value_floor_for_overwhelming_signal(self):
        # a pure coordinate ramp is as spatially structured as it gets
        g = rect_grid_graph([(x, y) for y in range(6) for x in range(6)])
        values = np.asarray([float(x) for _ in range(6) for x in range(6)])
        cfg = TestConfig(method="moran", n_perm=99, seed=5)
        report = permutation_test(g, values, cfg)
        assert report.p_value == pytest.approx(1.0 / 100.0)
        assert report.statistic == morans_i(g, values)

    def test_constant_total_lifetime_gives_p_one(self):
        # every permutation of a two-valued feature on a complete graph gives
        # the same diagram, so all statistics tie and p must be 1
        g = make_graph([(i, 0) for i in range(4)],
                       [(i, j) for i in range(4) for j in range(i + 1, 4)])
        cfg = TestConfig(method="total", n_perm=25, seed=1)
        report = permutation_test(g, [5.0, 1.0, 1.0, 1.0], cfg)
        assert report.p_value == 1.0

    def test_p_value_bounds_all_methods(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 25, 0.2)
        vals = rng.random(25)
        for method in SummaryMethod:
            cfg = TestConfig(method=method, n_perm=40, seed=3)
            r = permutation_test(g, vals, cfg)
            assert 1.0 / 41.0 <= r.p_value <= 1.0

    def test_statistic_is_distance_from_null_mean_for_curves(self):
        rng = np.random.default_rng(13)
        g = random_graph(rng, 15, 0.3)
        vals = rng.random(15)
        cfg = TestConfig(method="betti", n_perm=20, seed=9)
        r = permutation_test(g, vals, cfg)
        # recompute via public primitives using the same stream
        from topospat import betti_curve, curve_lp_distance, mean_step_curve, superlevel_diagram
        stream = _feature_rng(cfg.seed, np.asarray(vals))
        perms = [stream.permutation(15) for _ in range(cfg.n_perm)]
        curves = [betti_curve(superlevel_diagram(g, v))
                  for v in [vals] + [vals[p] for p in perms]]
        center = mean_step_curve(curves)
        assert r.statistic == pytest.approx(curve_lp_distance(curves[0], center, 2), abs=1e-12)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(15)
        g = random_graph(rng, 20, 0.25)
        vals = rng.random(20)
        cfg = TestConfig(method="landscape", n_perm=15, seed=21)
        r1 = permutation_test(g, vals, cfg)
        r2 = permutation_test(g, vals, cfg)
        assert r1.p_value == r2.p_value and r1.statistic == r2.statistic

    def test_affine_transform_preserves_p_values_exactly(self):
        # integer values, power-of-two count and scale: the transform is exact
        # in floats, distances scale exactly, and the rank-keyed stream draws
        # identical permutations, so the p-values must agree bit for bit
        rng = np.random.default_rng(17)
        g = random_graph(rng, 32, 0.2)
        vals = rng.integers(0, 7, 32).astype(np.float64)
        for method in ("moran", "betti", "total", "landscape"):
            cfg = TestConfig(method=method, n_perm=30, seed=2)
            base = permutation_test(g, vals, cfg)
            moved = permutation_test(g, 2.0 * vals + 3.0, cfg)
            assert moved.p_value == base.p_value, method

    def test_moran_constant_feature_raises(self):
        with pytest.raises(DegenerateDataError):
            permutation_test(path_graph(4), [1.0] * 4,
                             TestConfig(method="moran", n_perm=10))


class TestFeatureStream:
    def test_same_values_same_draws(self):
        vals = np.asarray([1.0, 5.0, 2.0, 0.0])
        g1 = _feature_rng(7, vals)
        g2 = _feature_rng(7, vals.copy())
        assert np.array_equal(g1.permutation(4), g2.permutation(4))

    def test_different_seed_different_draws(self):
        vals = np.arange(50, dtype=np.float64)
        a = _feature_rng(1, vals).permutation(50)
        b = _feature_rng(2, vals).permutation(50)
        assert not np.array_equal(a, b)


def make_dataset(n_loc=30, n_feat=8, seed=0, transformed=True):
    rng = np.random.default_rng(seed)
    locations = rng.random((n_loc, 2))
    feats = [
        FeatureRecord(name=f"g{i:02d}", values=rng.random(n_loc),
                      label=bool(i % 2), transformed=transformed)
        for i in range(n_feat)
    ]
    return Dataset(locations=locations, features=feats)


class TestRunBattery:
    def setup_method(self):
        self.ds = make_dataset()
        from topospat import delaunay_graph
        self.graph = delaunay_graph(self.ds.locations)
        self.cfg = TestConfig(method="betti", n_perm=30, seed=4)

    def test_report_count_and_rank_permutation(self):
        reports = run_battery(self.ds, self.graph, self.cfg)
        assert len(reports) == self.ds.n_features
        assert sorted(r.rank for r in reports) == list(range(1, self.ds.n_features + 1))
        assert [r.feature_name for r in reports] == self.ds.feature_names

    def test_identical_features_get_identical_p(self):
        ds = make_dataset(n_feat=4)
        ds.features[1] = FeatureRecord(name="aa_twin", values=ds.features[0].values.copy(),
                                       transformed=True)
        reports = run_battery(ds, self.graph, self.cfg)
        by_name = {r.feature_name: r for r in reports}
        twin, orig = by_name["aa_twin"], by_name["g00"]
        assert twin.p_value == orig.p_value
        assert abs(twin.rank - orig.rank) == 1
        assert twin.rank < orig.rank  # name tie-break: "aa_twin" < "g00"

    def test_shuffled_feature_order_preserves_p_values(self):
        reports = run_battery(self.ds, self.graph, self.cfg)
        shuffled = Dataset(locations=self.ds.locations,
                           features=list(reversed(self.ds.features)),
                           location_ids=list(self.ds.location_ids))
        reports2 = run_battery(shuffled, self.graph, self.cfg)
        p1 = {r.feature_name: r.p_value for r in reports}
        p2 = {r.feature_name: r.p_value for r in reports2}
        assert p1 == p2

    def test_thread_count_does_not_change_results(self):
        serial = run_battery(self.ds, self.graph, self.cfg, threads=1)
        parallel = run_battery(self.ds, self.graph, self.cfg, threads=3)
        for a, b in zip(serial, parallel):
            assert (a.feature_name, a.statistic, a.p_value, a.q_value, a.rank) == \
                   (b.feature_name, b.statistic, b.p_value, b.q_value, b.rank)

    def test_failed_feature_recorded_not_fatal(self):
        ds = make_dataset(n_feat=4)
        ds.features[2] = FeatureRecord(name="flat", values=np.ones(30), transformed=True)
        cfg = TestConfig(method="moran", n_perm=20, seed=8)
        reports = run_battery(ds, self.graph, cfg)
        by_name = {r.feature_name: r for r in reports}
        assert not by_name["flat"].ok
        assert math.isnan(by_name["flat"].p_value)
        assert by_name["flat"].rank == 4  # failures sort last
        assert all(r.ok for n, r in by_name.items() if n != "flat")
        assert sorted(r.rank for r in reports) == [1, 2, 3, 4]

    def test_raw_dataset_requires_allow_raw(self):
        raw = make_dataset(transformed=False)
        with pytest.raises(StateError):
            run_battery(raw, self.graph, self.cfg)
        reports = run_battery(raw, self.graph, self.cfg, allow_raw=True)
        assert all(r.ok for r in reports)

    def test_q_values_match_bh_of_p_values(self):
        reports = run_battery(self.ds, self.graph, self.cfg)
        qs = benjamini_hochberg([r.p_value for r in reports])
        assert np.allclose([r.q_value for r in reports], qs, atol=1e-15)


def test_report_round_trip(tmp_path):
    ds = make_dataset()
    from topospat import delaunay_graph
    graph = delaunay_graph(ds.locations)
    reports = run_battery(ds, graph, TestConfig(method="total", n_perm=15, seed=2))
    path = tmp_path / "report.tsv"
    write_report(reports, path, meta={"graph": "delaunay"})
    loaded = read_report(path)
    assert [r.feature_name for r in loaded] == [r.feature_name for r in reports]
    assert [r.p_value for r in loaded] == [r.p_value for r in reports]
    assert [r.rank for r in loaded] == [r.rank for r in reports]
    sidecar = (tmp_path / "report.tsv.json").read_text()
    assert '"total"' in sidecar and '"delaunay"' in sidecar
