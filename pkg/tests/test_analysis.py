import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nse.analysis import (
    adaptation_distance,
    class_centroid_distances,
    erd_ers,
    joint_probabilities,
    tile_bands,
    tsne,
)
from nse.analysis.tsne import conditional_probabilities, _sq_distances
from nse.embedding import EmbeddingMatrix, column_mean_mask
from nse.errors import CoverageError, DegenerateInputError, InvalidParameterError
from nse.signal_core import EpochSet
from oracles import knn_purity

FS = 1000.0


def eps_of(x, fs=FS):
    x = np.asarray(x)
    return EpochSet(x, np.zeros(x.shape[0], dtype=int), np.full(x.shape[0], "imagined"), fs)


def burst_epochs(seed=0, n=20, n_ch=4, f0=100.0, t0=0.5, t1=1.25, amp=3.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, n_ch, 2000))
    t = np.arange(2000) / FS
    on = (t >= t0) & (t < t1)
    x[..., on] += amp * np.sin(2 * np.pi * f0 * t[on] + rng.uniform(0, 2 * np.pi, (n, n_ch, 1)))
    return eps_of(x)


# ---------------------------------------------------------------- ERD/ERS

def test_band_tiling_truncates_last_band():
    assert tile_bands(30, 120, 20) == [(30, 50), (50, 70), (70, 90), (90, 110), (110, 120)]


def test_grid_geometry():
    g = erd_ers(eps_of(np.random.default_rng(0).standard_normal((3, 2, 2000))))
    assert g.values.shape == (5, 8)
    assert g.bands[-1] == (110.0, 120.0)
    assert g.time_bins[0] == (0.0, 0.25) and g.time_bins[-1] == (1.75, 2.0)
    assert np.allclose(np.diff([b[0] for b in g.time_bins]), 0.25)
    assert g.scope == "average"
    assert np.all(g.values[:, 0] == 0)


def test_stationary_white_noise_within_15_percent():
    # the bound is a finite-sample one; 50 epochs x 16 channels keeps every
    # cell's relative error well inside it
    x = np.random.default_rng(1).standard_normal((50, 16, 2000))
    g = erd_ers(eps_of(x))
    assert np.max(np.abs(g.values)) <= 15.0
    assert np.all(g.values > -100)


def test_planted_burst_located():
    g = erd_ers(burst_epochs())
    band, b = g.argmax()
    assert g.bands[band] == (90.0, 110.0)
    assert 2 <= b <= 4
    assert g.time_bins[b][0] >= 0.5 and g.time_bins[b][1] <= 1.25


@settings(max_examples=10, deadline=None)
@given(s=st.floats(1e-3, 1e3))
def test_erders_scale_invariance(s):
    e = burst_epochs(n=4)
    a = erd_ers(e).values
    b = erd_ers(e.with_epochs(s * e.epochs)).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_external_reference_and_channel_scope():
    e = burst_epochs(n=6)
    pre = eps_of(np.random.default_rng(4).standard_normal((6, 4, 500)))
    g = erd_ers(e, reference=pre, channels=[0, 2])
    assert g.scope == [0, 2]
    assert g.values.shape == (5, 8)
    # the burst still dominates against an external baseline
    band, b = g.argmax()
    assert g.bands[band] == (90.0, 110.0) and 2 <= b <= 4
    g2 = erd_ers(e, reference=np.ones(5))
    assert g2.values.shape == (5, 8)


def test_zero_reference_power():
    x = np.zeros((2, 1, 2000))
    x[..., 500:] = np.random.default_rng(0).standard_normal((2, 1, 1500))
    with pytest.raises(DegenerateInputError):
        erd_ers(eps_of(x))


@pytest.mark.parametrize("kw", [{"range_hz": (30, 600)}, {"bin_seconds": 5.0}, {"reference": "nope"},
                                {"reference": np.ones(3)}, {"band_width_hz": 0}])
def test_erders_parameter_errors(kw):
    with pytest.raises(InvalidParameterError):
        erd_ers(eps_of(np.ones((1, 1, 2000))), **kw)


def test_grid_csv(tmp_path):
    g = erd_ers(burst_epochs(n=2))
    p = tmp_path / "g.csv"
    g.to_csv(p)
    rows = p.read_text().splitlines()
    assert rows[0].startswith("band_hz,0.000-0.250")
    assert rows[1].startswith("30-50,")
    assert len(rows) == 6


# ---------------------------------------------------------------- t-SNE

def clusters(seed, n_per=50, sigma=0.1, spacing=10.0, d=5):
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, d))
    centers[1, 0] = spacing
    centers[2, 1] = spacing
    x = np.concatenate([c + sigma * rng.standard_normal((n_per, d)) for c in centers])
    return x, np.repeat(np.arange(3), n_per)


@pytest.fixture(scope="module")
def cluster_run():
    x, y = clusters(0)
    return x, y, tsne(x, perplexity=30, iterations=1000, seed=0)


def test_tsne_contract(cluster_run):
    x, _, r = cluster_run
    assert r.points.shape == (x.shape[0], 2)
    assert np.all(np.isfinite(r.points))
    assert r.kl_final <= r.kl_initial
    assert (r.perplexity, r.iterations, r.learning_rate, r.early_exaggeration, r.exaggeration_iters) == \
        (30.0, 1000, 200.0, 12.0, 250)


def test_tsne_cluster_purity(cluster_run):
    _, y, r = cluster_run
    assert knn_purity(r.points, y, 5) > 0.9


def test_tsne_deterministic():
    x, _ = clusters(1, n_per=10)
    a = tsne(x, perplexity=5, iterations=300, seed=4)
    b = tsne(x, perplexity=5, iterations=300, seed=4)
    assert np.array_equal(a.points, b.points)


def test_duplicate_pair_lands_close():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((40, 6)) * 3
    x[17] = x[5]
    r = tsne(x, perplexity=8, iterations=1000, seed=0)
    d = np.sqrt(_sq_distances(r.points))
    iu = np.triu_indices(40, 1)
    assert d[5, 17] < np.median(d[iu])


def test_joint_probabilities_sum_to_one():
    x = np.random.default_rng(3).standard_normal((30, 4))
    p = joint_probabilities(x, 5.0)
    assert abs(p.sum() - 1) < 1e-9
    assert np.allclose(p, p.T)
    assert np.all(np.diag(p) == 0)


def test_conditional_perplexity_matched():
    x = np.random.default_rng(4).standard_normal((25, 3))
    p = conditional_probabilities(_sq_distances(x), 6.0)
    for row in p:
        q = row[row > 0]
        h = -np.sum(q * np.log(q))
        assert abs(h - np.log(6.0)) < 1e-4


def test_tsne_identical_points():
    with pytest.raises(DegenerateInputError):
        tsne(np.ones((10, 3)), perplexity=2, iterations=300)


@pytest.mark.parametrize("n,perp,iters", [(3, 0.5, 1000), (10, 3.0, 1000), (10, 2.0, 100)])
def test_tsne_parameter_errors(n, perp, iters):
    x = np.random.default_rng(0).standard_normal((n, 2))
    with pytest.raises(InvalidParameterError):
        tsne(x, perplexity=perp, iterations=iters)


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 1000))
def test_kl_never_increases(seed):
    x = np.random.default_rng(seed).standard_normal((24, 5))
    r = tsne(x, perplexity=5, iterations=1000, seed=seed)
    assert r.kl_final <= r.kl_initial
    assert np.all(np.isfinite(r.points))


# ---------------------------------------------------------------- adaptation metric

def em(values, label, domain, i=0):
    return EmbeddingMatrix(np.asarray(values, dtype=float), i, label, domain)


def test_identical_domains_zero():
    rng = np.random.default_rng(0)
    ms = []
    for c in range(3):
        for k in range(4):
            v = rng.standard_normal((4, 5))
            ms += [em(v, c, "imagined"), em(v, c, "spoken")]
    assert adaptation_distance(ms) == 0.0


def test_translation_gives_norm():
    rng = np.random.default_rng(1)
    shift = rng.standard_normal((4, 5))
    ms = []
    for c in range(3):
        for k in range(3):
            v = rng.standard_normal((4, 5))
            ms += [em(v, c, "imagined"), em(v + shift, c, "spoken")]
    d = class_centroid_distances(ms)
    assert np.allclose(list(d.values()), np.linalg.norm(shift), atol=1e-12)
    assert adaptation_distance(ms) == pytest.approx(np.linalg.norm(shift), abs=1e-12)


def test_coverage_errors():
    a = [em(np.zeros((2, 2)), 0, "imagined"), em(np.zeros((2, 2)), 1, "imagined")]
    with pytest.raises(CoverageError):
        adaptation_distance(a)
    b = a + [em(np.zeros((2, 2)), 0, "spoken")]
    with pytest.raises(CoverageError):
        adaptation_distance(b)
    c = [em(np.zeros((2, 2)), 0, "imagined"), em(np.zeros((2, 2)), 0, "spoken")]
    with pytest.raises(CoverageError):
        adaptation_distance(c)


def test_masked_input_refused():
    m = em(np.arange(4.0).reshape(2, 2), 0, "imagined")
    with pytest.raises(TypeError):
        adaptation_distance([column_mean_mask(m), m])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 20))
def test_distance_non_negative(seed):
    rng = np.random.default_rng(seed)
    ms = [em(rng.standard_normal((2, 3)), c, d) for c in range(2) for d in ("imagined", "spoken")]
    assert adaptation_distance(ms) >= 0
