import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from piterbarg import rng
from piterbarg.errors import GridMeshMismatch, InvalidHorizon, NonEmbeddable, NonPSD
from piterbarg.gp_sim import (CorrelationModel, MixingVector, PathBatch, SeedRecord,
                              SimulationMesh, VectorProcessSpec, circulant_embed,
                              covariance_sequence, dump_paths_csv, grid_stride, merged_points,
                              sample_fbm, sample_points, sample_scalar_paths,
                              sample_vector_paths, subsample_grid, support_maxima, vector_parts)


def lag_products(x, lag):
    return x[:, 0] * x[:, lag]


def within(sample, target, k=3.0):
    se = sample.std(ddof=1) / math.sqrt(len(sample))
    return abs(sample.mean() - target) <= k * se


class TestCorrelationModel:
    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=2.5), dict(alpha=1, c=0.0),
                                    dict(alpha=1, r_long=-1.0), dict(alpha=1, family="matern")])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            CorrelationModel(**kw)

    @given(st.floats(0.05, 2.0), st.floats(0.1, 5.0))
    def test_local_expansion(self, alpha, c):
        m = CorrelationModel(alpha, c)
        t = (1e-5 / c) ** (1 / alpha)                  # C t^alpha = 1e-5
        assert (1 - m.kernel(t)) / (c * t ** alpha) == pytest.approx(1.0, rel=1e-5)
        assert (1 - m.kernel(t / 10)) / (c * (t / 10) ** alpha) > (1 - m.kernel(t)) / (c * t ** alpha)

    @given(st.floats(0.05, 2.0), st.floats(0.1, 5.0), st.floats(1e-3, 50.0))
    def test_kernel_below_one_off_origin(self, alpha, c, t):
        assert CorrelationModel(alpha, c).kernel(t) < 1.0


class TestCovarianceSequence:
    def test_examples(self):
        assert covariance_sequence(CorrelationModel(1.0), SimulationMesh(0.1, 3))[0] == 1.0
        seq = covariance_sequence(CorrelationModel(2.0, 1.0), SimulationMesh(1.0, 3))
        assert seq[1] == pytest.approx(math.exp(-1), abs=1e-12)
        seq = covariance_sequence(CorrelationModel(1.0, 2.0), SimulationMesh(0.5, 4))
        assert seq[2] == pytest.approx(0.135335283, abs=1e-9)

    @given(st.floats(0.1, 2.0), st.floats(0.01, 1.0))
    def test_strictly_decreasing(self, alpha, h):
        seq = covariance_sequence(CorrelationModel(alpha), SimulationMesh(h, 30))
        tail = seq[seq > 1e-300]
        assert np.all(np.diff(tail) < 0)


class TestCirculantEmbed:
    def test_white_sequence(self):
        eig = circulant_embed(np.r_[1.0, np.zeros(15)])
        assert np.allclose(eig, 1.0)

    def test_constant_sequence_is_rank_one(self):
        eig = circulant_embed(np.ones(9))
        m = len(eig)
        assert eig[0] == pytest.approx(m)
        assert np.allclose(eig[1:], 0.0, atol=1e-9)

    def test_exponential_kernel_nonnegative(self):
        mesh = SimulationMesh(0.1, 64)
        assert circulant_embed(covariance_sequence(CorrelationModel(1.0), mesh)).min() >= 0

    def test_non_embeddable(self):
        with pytest.raises(NonEmbeddable):
            circulant_embed(np.array([1.0, 0.9, -0.9, 0.9]), max_doublings=2)


class TestScalarPaths:
    def test_empty_batch(self):
        b = sample_scalar_paths(CorrelationModel(1.0), SimulationMesh(0.1, 10), 0, 1)
        assert b.values.shape == (0, 1, 10) and b.seed_record.reps == 0

    def test_determinism_and_workers(self):
        m, mesh = CorrelationModel(1.5), SimulationMesh(0.05, 300)
        a = sample_scalar_paths(m, mesh, 700, 42, workers=1).values
        b = sample_scalar_paths(m, mesh, 700, 42, workers=4).values
        assert np.array_equal(a, b)
        c = sample_scalar_paths(m, mesh, 700, 43, workers=1).values
        assert not np.array_equal(a, c)

    def test_lag_one_correlation(self):
        x = sample_scalar_paths(CorrelationModel(1.0), SimulationMesh(0.05, 2048), 4000, 5).values[:, 0]
        assert within(lag_products(x, 1), math.exp(-0.05))

    def test_stationarity_proxy(self):
        x = sample_scalar_paths(CorrelationModel(2.0, 0.5), SimulationMesh(0.2, 200), 4000, 6).values[:, 0]
        a, b = x[:, 10] * x[:, 15], x[:, 150] * x[:, 155]
        se = math.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) <= 3 * se


class TestVectorPaths:
    def test_invalid_horizon(self):
        spec = VectorProcessSpec((CorrelationModel(1.0, r_long=1.0),), [[1.0]], math.e ** 4)
        with pytest.raises(InvalidHorizon):
            spec.at_horizon(math.e ** 0.5).rho()

    def test_non_psd_mixing(self):
        with pytest.raises(NonPSD):
            MixingVector.from_cross([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])

    def test_zero_dependence_collapse(self):
        m, mesh = CorrelationModel(1.0), SimulationMesh(0.1, 64)
        spec = VectorProcessSpec.independent(m, 2, math.e ** 4)
        v = sample_vector_paths(spec, mesh, 50, 9).values
        s = sample_scalar_paths(m, mesh, 50, 9).values
        assert np.array_equal(v[:, 0], s[:, 0])

    def test_random_effect_identity(self):
        comps = (CorrelationModel(1.0, r_long=1.0), CorrelationModel(2.0, r_long=0.5))
        spec = VectorProcessSpec(comps, [[1.0, 0.3], [0.3, 0.5]], math.e ** 4)
        mesh = SimulationMesh(0.1, 32)
        eta, z, rho = vector_parts(spec, mesh, 20, 4)
        x = sample_vector_paths(spec, mesh, 20, 4).values
        for k in range(2):
            lhs = x[:, k] - math.sqrt(1 - rho[k, k]) * eta[:, k]
            rhs = np.broadcast_to((math.sqrt(rho[k, k]) * z[:, k])[:, None], lhs.shape)
            assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_long_lag_correlation(self):
        spec = VectorProcessSpec((CorrelationModel(1.0, r_long=1.0),), [[1.0]], math.e ** 4)
        x = sample_vector_paths(spec, SimulationMesh(1.0, 64), 10_000, 11).values[:, 0]
        assert within(lag_products(x, 60), 0.75 * math.exp(-60) + 0.25)

    def test_cross_correlation(self):
        m = CorrelationModel(1.0, r_long=1.0)
        spec = VectorProcessSpec((m, m), [[1.0, 0.5], [0.5, 1.0]], math.e ** 4)
        x = sample_vector_paths(spec, SimulationMesh(0.5, 16), 10_000, 12).values
        assert within(x[:, 0, 3] * x[:, 1, 3], 0.125)


class TestFbm:
    def test_anchor_and_variance(self):
        b = sample_fbm(0.5, SimulationMesh(0.01, 101), 10_000, 3).values[:, 0]
        assert np.all(b[:, 0] == 0.0)
        assert within(b[:, -1] ** 2, 1.0)

    def test_hurst_one_is_linear(self):
        b = sample_fbm(1.0, SimulationMesh(0.1, 20), 5, 3).values[:, 0]
        slope = b[:, 1:2] / 0.1
        assert np.allclose(b, slope * np.arange(20) * 0.1, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("hurst", [0.25, 0.75])
    @pytest.mark.parametrize("lam", [2, 4])
    def test_self_similarity(self, hurst, lam):
        b = sample_fbm(hurst, SimulationMesh(0.05, 81), 20_000, 8).values[:, 0]
        v1, v2 = b[:, 20] ** 2, b[:, 20 * lam] ** 2
        ratio = v2.mean() / v1.mean()
        # delta method on the ratio of two correlated means
        cov = np.cov(v1, v2) / len(v1)
        g = np.array([-ratio / v1.mean(), 1 / v1.mean()])
        assert abs(ratio - lam ** (2 * hurst)) <= 3 * math.sqrt(g @ cov @ g)


class TestGrids:
    def test_subsample(self):
        mesh = SimulationMesh(0.1, 5)
        assert subsample_grid(mesh, 0.1).tolist() == [0, 1, 2, 3, 4]
        assert subsample_grid(mesh, 0.2).tolist() == [0, 2, 4]
        with pytest.raises(GridMeshMismatch):
            subsample_grid(mesh, 0.37)

    @given(st.integers(1, 500), st.floats(1e-4, 10.0))
    def test_stride_of_multiples(self, k, h):
        assert grid_stride(k * h, h) == k

    def test_merged_points(self):
        pts = merged_points(SimulationMesh(0.5, 7), [1.0, math.sqrt(2)], 3.0)
        on_mesh = pts.bits & 1
        assert on_mesh.sum() == 7
        assert ((pts.bits >> 1) & 1).sum() == 4          # 0, 1, 2, 3
        assert ((pts.bits >> 2) & 1).sum() == 3          # 0, 1.41, 2.83
        assert np.all(np.diff(pts.times) > 0)

    def test_markov_route_matches_circulant(self):
        mesh = SimulationMesh.covering(10.0, 0.05)
        mk = support_maxima(CorrelationModel(1.0), mesh, [0.5], 4000, 1)
        # same law through the generic circulant route (alpha slightly off 1 is not the same
        # law, so compare against an independent Cholesky sample on the same nodes)
        ch = sample_points(CorrelationModel(1.0), mesh.times(), 4000, 2)
        a, b = mk[:, 0], ch.max(axis=1)
        se = math.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) <= 3.5 * se

    def test_bridge_dominates_nodes(self):
        mesh = SimulationMesh.covering(20.0, 0.1)
        plain = support_maxima(CorrelationModel(1.0), mesh, [1.0], 300, 4)
        bridged = support_maxima(CorrelationModel(1.0), mesh, [1.0], 300, 4, bridge=True)
        assert np.array_equal(plain[:, 1], bridged[:, 1])
        assert np.all(bridged[:, 0] >= plain[:, 0])
        assert np.all(bridged[:, 1] <= bridged[:, 0])

    def test_bridge_matches_fine_mesh(self):
        coarse = support_maxima(CorrelationModel(1.0), SimulationMesh.covering(1.0, 0.05), [],
                                8000, 5, bridge=True, horizon=1.0)[:, 0]
        fine = support_maxima(CorrelationModel(1.0), SimulationMesh.covering(1.0, 2e-4), [],
                              8000, 6, horizon=1.0)[:, 0]
        se = math.sqrt(coarse.var() / 8000 + fine.var() / 8000)
        assert abs(coarse.mean() - fine.mean()) <= 3.5 * se
        plain = support_maxima(CorrelationModel(1.0), SimulationMesh.covering(1.0, 0.05), [],
                               8000, 5, horizon=1.0)[:, 0]
        assert fine.mean() - plain.mean() > 5 * se

    def test_grid_max_below_mesh_max(self):
        m = support_maxima(CorrelationModel(1.5), SimulationMesh(0.05, 401), [0.5, 1.0], 200, 3)
        assert np.all(m[:, 1] <= m[:, 0]) and np.all(m[:, 2] <= m[:, 1])


def test_dump_csv(tmp_path):
    mesh = SimulationMesh(0.5, 3)
    b = PathBatch(np.arange(12.0).reshape(2, 2, 3), mesh, SeedRecord(1, (0,), 2))
    dump_paths_csv(b, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,rep0_k0,rep0_k1,rep1_k0,rep1_k1"
    assert lines[1] == "0.0,0.0,3.0,6.0,9.0"


def test_seed_streams_independent_of_scheduling():
    a = rng.rep_normals(5, [3, 4], 4, 0, 1)
    b = np.vstack([rng.rep_normals(5, [r], 4, 0, 1) for r in (3, 4)])
    assert np.array_equal(a, b)
