import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from piterbarg.errors import (ConfigMismatch, GridMeshMismatch, InsufficientExceedances,
                              PreconditionError)
from piterbarg.gp_sim import CorrelationModel, VectorProcessSpec
from piterbarg.harness import (Estimation, ExperimentConfig, alternating_points,
                               config_from_dict, convergence_sweep, empirical_cdf_counts,
                               export_report, independence_gap, lattice_cdf_counts,
                               load_report, mesh_for, mesh_halving_diagnostic,
                               resolve_constants, run_experiment, simulate_maxima,
                               tail_check_lemmaA5)
from piterbarg.limit_laws import (ConstantSpacing, PickandsSpacing, PowerLogSpacing,
                                  TheoremCase)

OU = CorrelationModel(1.0)


def config(p=1, grids=(ConstantSpacing(1.0), PowerLogSpacing(2.0)), case=TheoremCase("T21_iv"),
           T_values=(math.e ** 3, math.e ** 3.5, math.e ** 4), reps=400, **kw):
    spec = VectorProcessSpec.independent(OU, p, T_values[0])
    kw.setdefault("estimation", Estimation(H_alpha=1.0))
    return ExperimentConfig(spec, grids, case, T_values=T_values, reps=reps, seed=8, **kw)


@pytest.fixture(scope="module")
def report():
    return run_experiment(config(lattice=(-1.0, 0.5, 40.0)))


class TestConfig:
    def test_round_trip(self):
        cfg = config(p=2, grids=(ConstantSpacing(1.0), PickandsSpacing(0.5)),
                     case=TheoremCase("T21_iii", D2=0.5),
                     estimation=Estimation(lam=8.0, reps=100, seed=3))
        doc = json.loads(json.dumps(cfg.to_dict()))
        back = config_from_dict(doc)
        assert back.to_dict() == cfg.to_dict() and back.digest() == cfg.digest()

    def test_unknown_keys(self):
        doc = config().to_dict()
        doc["experiment"]["colour"] = "red"
        with pytest.raises(ConfigMismatch):
            config_from_dict(doc)
        doc = config().to_dict()
        doc["extra"] = {}
        with pytest.raises(ConfigMismatch):
            config_from_dict(doc)

    def test_schema_version(self):
        doc = config().to_dict()
        doc["schema_version"] = 2
        with pytest.raises(ConfigMismatch):
            config_from_dict(doc)

    def test_case_grid_mismatch(self):
        with pytest.raises(ConfigMismatch):
            config(case=TheoremCase("T21_i")).validate()
        bad = config(grids=(ConstantSpacing(1.0), PickandsSpacing(1.0)),
                     case=TheoremCase("T21_iii", D2=0.5))
        with pytest.raises(ConfigMismatch):
            bad.validate()


class TestMesh:
    @given(st.floats(2.0, 9.0), st.floats(0.3, 3.0))
    def test_mesh_rule(self, lnT, D):
        cfg = config(grids=(ConstantSpacing(1.0), PickandsSpacing(D)),
                     case=TheoremCase("T21_iii", D2=D))
        T = math.exp(lnT)
        h, deltas = mesh_for(cfg, T)
        assert h <= 0.05 * (2 * lnT) ** -1 * (1 + 1e-12)
        k = deltas[1] / h
        assert abs(k - round(k)) <= 1e-9 * k

    def test_smooth_process_needs_common_divisor(self):
        spec = VectorProcessSpec.independent(CorrelationModel(2.0), 1, 100.0)
        cfg = ExperimentConfig(spec, (ConstantSpacing(1.0), ConstantSpacing(math.sqrt(2))),
                               TheoremCase("T21_i"), T_values=(100.0,))
        with pytest.raises(GridMeshMismatch):
            mesh_for(cfg, 100.0)

    def test_halving_gain_nonnegative(self):
        assert mesh_halving_diagnostic(config(), math.e ** 3, reps=200) >= 0


class TestRun:
    def test_distances(self, report):
        assert all(d >= 0 for d in report.distances)
        assert len(report.results) == 3

    def test_degenerate_point(self, report):
        top = np.all(report.points == 40.0, axis=1)
        for r in report.results:
            assert r.empirical[top] == 1.0 and r.theoretical[top] == pytest.approx(1.0)

    def test_cdf_bounds_and_monotone(self, report):
        L = 3
        for r in report.results:
            e = r.empirical.reshape((L,) * 3)
            assert np.all((0 <= e) & (e <= 1))
            for ax in range(3):
                assert np.all(np.diff(e, axis=ax) >= 0)
            assert np.allclose(r.stderr, np.sqrt(r.empirical * (1 - r.empirical) / 400))

    def test_per_path_ordering(self):
        cfg = config(p=2, T_values=(math.e ** 3,) * 3)
        s = simulate_maxima(cfg, math.e ** 3, 0, resolve_constants(cfg))
        assert np.all(s.raw[1] <= s.raw[0]) and np.all(s.raw[2] <= s.raw[0])

    def test_determinism(self, report):
        cfg = config(lattice=(-1.0, 0.5, 40.0))
        again = run_experiment(cfg, workers=4)
        assert again == report
        assert again.distances == report.distances

    def test_mixing_changes_paths(self):
        base = config(T_values=(math.e ** 3,) * 3)
        strong = replace(base, process=VectorProcessSpec(
            (CorrelationModel(1.0, r_long=0.5),), [[0.5]], math.e ** 3))
        a = simulate_maxima(base, math.e ** 3, 0, resolve_constants(base))
        b = simulate_maxima(strong, math.e ** 3, 0, resolve_constants(strong))
        assert not np.array_equal(a.raw[0], b.raw[0])

    def test_more_reps_tighten_distance(self):
        # binomial noise scaling at a fixed horizon, scaled down from the full-size run
        wins = 0
        for seed in (1, 2, 3):
            cfg = replace(config(T_values=(math.e ** 4,) * 3), seed=seed)
            T = math.e ** 4
            d = [run_experiment(replace(cfg, reps=n, T_values=(T,) * 3)).distances[0]
                 for n in (300, 6000)]
            wins += d[1] < d[0]
        assert wins >= 2

    def test_sweep_needs_three_horizons(self):
        with pytest.raises(PreconditionError):
            convergence_sweep(config(T_values=(math.e ** 3,)))

    def test_sweep_repeatable(self):
        cfg = config(T_values=(math.e ** 3,) * 3)
        s = convergence_sweep(cfg)
        assert convergence_sweep(cfg).distances == s.distances


@pytest.mark.slow
def test_t21_iv_full_size():
    # full-size example: one horizon e^8, 10^4 replications
    T = math.e ** 8
    cfg = replace(config(T_values=(T,), reps=10_000), seed=0)
    assert run_experiment(cfg).distances[-1] <= 0.1


class TestCDF:
    @given(arrays(float, (60, 3), elements=st.floats(-3, 3)),
           st.lists(st.floats(-3, 3), min_size=1, max_size=4, unique=True))
    def test_histogram_matches_brute_force(self, vals, lat):
        lat = sorted(lat)
        grid = np.stack(np.meshgrid(*[lat] * 3, indexing="ij"), -1).reshape(-1, 3)
        assert np.array_equal(lattice_cdf_counts(vals, lat), empirical_cdf_counts(vals, grid))


class TestIndependence:
    lattice = (-1.0, -0.5, 0.0, 0.5, 1.0)

    def test_comonotone(self):
        a = np.random.default_rng(1).standard_normal(20_000)
        gap = independence_gap(a, a, self.lattice)
        F = np.array([(a <= s).mean() for s in self.lattice])
        brute = np.max(np.abs(np.minimum.outer(F, F) - np.outer(F, F)))
        assert gap == pytest.approx(brute, abs=1e-12) and gap > 0.2

    def test_independent(self):
        g = np.random.default_rng(2)
        assert independence_gap(g.standard_normal(20_000), g.standard_normal(20_000),
                                self.lattice) < 0.02

    def test_empty_lattice(self):
        assert independence_gap(np.zeros(3), np.zeros(3), ()) == 0.0


class TestTailRatio:
    def test_single_point(self):
        r = tail_check_lemmaA5(OU, [0.0], 1.9, 20_000, 4)
        assert abs(r.probability - r.bound) <= 3 * r.prob_stderr

    def test_small_level_rejected(self):
        with pytest.raises(PreconditionError):
            tail_check_lemmaA5(OU, alternating_points(200), 0.5, 100, 4)

    def test_insufficient(self):
        with pytest.raises(InsufficientExceedances):
            tail_check_lemmaA5(OU, [0.0], 2.5, 1000, 4)

    def test_points(self):
        pts = alternating_points(5)
        assert pts.tolist() == [0.0, 1.0, 2.5, 3.5, 5.0]


class TestExport:
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_round_trip_and_bytes(self, report, tmp_path, fmt):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        export_report(report, fmt, a)
        export_report(report, fmt, b)
        assert a.read_bytes() == b.read_bytes()
        assert load_report(a) == report

    def test_csv_schema(self, report, tmp_path):
        export_report(report, "csv", tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        header = next(l for l in lines if not l.startswith("#"))
        assert header == "T,point_index,x1,y1_1,y2_1,empirical,theoretical,stderr,sup_distance"
        assert any(l.startswith("# config_hash=") for l in lines)
        assert "# seed=8" in lines

    def test_unwritable(self, report, tmp_path):
        with pytest.raises(OSError):
            export_report(report, "json", tmp_path / "missing" / "r.json")
