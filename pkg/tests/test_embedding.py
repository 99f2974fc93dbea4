import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nse.embedding import (
    EmbeddingMatrix,
    MaskedEmbedding,
    column_mean_mask,
    embed,
    export_csv,
    load_embeddings,
    log_variance,
    read_embedding_header,
    save_embeddings,
    stack,
    window_length,
)
from nse.errors import InvalidParameterError, ParseError
from nse.signal_core import EpochSet
from oracles import sampled_sine_variance


def projected(x, labels=None, domain="imagined", fs=1000.0):
    x = np.asarray(x)
    labels = np.zeros(x.shape[0], dtype=int) if labels is None else labels
    return EpochSet(x, labels, np.full(x.shape[0], domain), fs)


def em(values, i=0, label=0, domain="imagined"):
    return EmbeddingMatrix(np.asarray(values, dtype=float), i, label, domain)


# ---------------------------------------------------------------- embed

def test_default_shape_and_window_length():
    x = np.random.default_rng(0).standard_normal((3, 104, 2000))
    ms = embed(projected(x))
    assert len(ms) == 3
    assert all(m.shape == (16, 104) for m in ms)
    assert window_length(2000, 16) == 125


def test_constant_channel_hits_floor():
    x = np.random.default_rng(1).standard_normal((1, 3, 2000))
    x[0, 1] = 4.2
    v = embed(projected(x), eps=1e-12)[0].values
    assert np.all(v[:, 1] == np.log(1e-12))
    assert np.all(np.isfinite(v))


def test_unit_sine_gives_log_half():
    fs, f0 = 1000.0, 97.0
    t = np.arange(2000) / fs
    x = np.sin(2 * np.pi * f0 * t)[None, None, :]
    v = embed(projected(x))[0].values[:, 0]
    oracle = [np.log(sampled_sine_variance(f0, fs, 125, phase=2 * np.pi * f0 * k * 125 / fs))
              for k in range(16)]
    assert np.allclose(v, oracle, atol=1e-12)
    assert np.all(np.abs(v - np.log(0.5)) < 0.05)


def test_windows_are_disjoint_and_ordered():
    # a ramp of per-window amplitudes makes every window identifiable
    wl, n_win = 10, 4
    base = np.tile([1.0, -1.0], wl // 2)
    x = np.concatenate([(k + 1) * base for k in range(n_win)] + [np.full(3, 100.0)])
    v = log_variance(x[None, None, :], n_windows=n_win)[0, :, 0]
    assert np.allclose(v, np.log((np.arange(n_win) + 1.0) ** 2), atol=1e-12)


def test_remainder_is_truncated():
    x = np.random.default_rng(2).standard_normal((1, 2, 2007))
    a = log_variance(x, 16)
    b = log_variance(x[..., :2000], 16)
    assert np.array_equal(a, b)


def test_population_variance():
    x = np.array([[[1.0, 3.0, 1.0, 3.0]]])
    assert log_variance(x, 2)[0, 0, 0] == pytest.approx(np.log(1.0), abs=1e-15)


@pytest.mark.parametrize("n_samples,n_windows", [(31, 16), (10, 0)])
def test_window_too_short(n_samples, n_windows):
    with pytest.raises(InvalidParameterError):
        embed(projected(np.zeros((1, 2, n_samples))), n_windows=n_windows)


def test_eps_must_be_positive():
    with pytest.raises(InvalidParameterError):
        log_variance(np.ones((1, 1, 64)), eps=0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 20), s=st.floats(1e-3, 1e3))
def test_gain_adds_two_log_s(seed, s):
    x = np.random.default_rng(seed).standard_normal((2, 5, 320))
    a = log_variance(x, 16)
    b = log_variance(s * x, 16)
    assert np.max(np.abs(b - a - 2 * np.log(s))) < 1e-9


def test_metadata_carried():
    x = np.random.default_rng(3).standard_normal((2, 2, 64))
    ms = embed(projected(x, [4, 7], "spoken"), n_windows=4, epoch_ids=[10, 11])
    assert [(m.epoch_id, m.label, m.domain) for m in ms] == [(10, 4, "spoken"), (11, 7, "spoken")]


def test_stack_is_row_major():
    m = em(np.arange(6).reshape(2, 3))
    assert stack([m, m]).tolist() == [[0, 1, 2, 3, 4, 5]] * 2


# ---------------------------------------------------------------- mask

def test_mask_column_1_2_3():
    mm = column_mean_mask(em([[1.0], [2.0], [3.0]]))
    assert mm.mask[:, 0].tolist() == [True, False, False]
    assert mm.export()[:, 0].tolist() == [0.0, 1.0, 2.0]


def test_mask_constant_column():
    mm = column_mean_mask(em([[5.0], [5.0], [5.0]]))
    assert not mm.mask.any()


def test_mask_column_minus2_0_2_4():
    mm = column_mean_mask(em([[-2.0], [0.0], [2.0], [4.0]]))
    assert mm.mask[:, 0].tolist() == [True, True, False, False]
    exported = mm.export()[:, 0]
    assert exported[0] == 0 and exported[1] == 0
    assert exported[2:].tolist() == [4.0, 6.0]


def test_mask_is_separate_type():
    mm = column_mean_mask(em([[1.0], [2.0]]))
    assert isinstance(mm, MaskedEmbedding)
    assert not isinstance(mm, EmbeddingMatrix)
    # the source values stay unmasked
    assert mm.source.values.tolist() == [[1.0], [2.0]]


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=8),
                  elements=st.floats(-50, 50)))
def test_mask_idempotent(values):
    once = column_mean_mask(em(values))
    twice = column_mean_mask(once)
    assert np.array_equal(once.mask, twice.mask)
    assert np.array_equal(once.export(), twice.export())
    # strict rule against the column mean
    assert np.array_equal(once.mask, values < values.mean(axis=0))


# ---------------------------------------------------------------- file format

def f32_matrices(n, shape=(16, 104), seed=0):
    rng = np.random.default_rng(seed)
    return [em(rng.standard_normal(shape).astype(np.float32).astype(float), i, i % 13,
               "imagined" if i % 2 else "spoken") for i in range(n)]


def test_round_trip_100_bitwise(tmp_path):
    ms = f32_matrices(100)
    p = tmp_path / "e.bin"
    save_embeddings(ms, p)
    back = load_embeddings(p)
    assert len(back) == 100
    for a, b in zip(ms, back):
        assert np.array_equal(a.values, b.values)
        assert (a.epoch_id, a.label, a.domain) == (b.epoch_id, b.label, b.domain)
    assert read_embedding_header(p) == {"version": 1, "n_windows": 16, "n_filters": 104, "count": 100}


def test_file_layout(tmp_path):
    ms = f32_matrices(2, (2, 3))
    p = tmp_path / "e.bin"
    save_embeddings(ms, p)
    raw = p.read_bytes()
    nl = raw.index(b"\n")
    assert json.loads(raw[:nl]) == {"version": 1, "n_windows": 2, "n_filters": 3, "count": 2}
    assert len(raw) == nl + 1 + 2 * (16 + 4 * 6)
    rec = raw[nl + 1: nl + 1 + 16]
    assert int.from_bytes(rec[:4], "little") == 0 and rec[8] == 1 and rec[9:] == bytes(7)
    vals = np.frombuffer(raw, "<f4", 6, nl + 1 + 16)
    assert np.array_equal(vals, ms[0].values.reshape(-1))


def test_empty_list(tmp_path):
    p = tmp_path / "e.bin"
    save_embeddings([], p)
    assert load_embeddings(p) == []
    assert read_embedding_header(p)["count"] == 0


def test_truncated_file(tmp_path):
    p = tmp_path / "e.bin"
    save_embeddings(f32_matrices(5, (4, 4)), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-7])
    with pytest.raises(ParseError) as info:
        load_embeddings(p)
    assert info.value.offset == len(raw) - 7


def test_trailing_bytes_and_bad_header(tmp_path):
    p = tmp_path / "e.bin"
    save_embeddings(f32_matrices(1, (2, 2)), p)
    p.write_bytes(p.read_bytes() + b"\0")
    with pytest.raises(ParseError):
        load_embeddings(p)
    p.write_bytes(b"not json\n")
    with pytest.raises(ParseError) as info:
        load_embeddings(p)
    assert info.value.offset == 0


def test_save_is_atomic(tmp_path):
    p = tmp_path / "e.bin"
    save_embeddings(f32_matrices(1, (2, 2)), p)
    assert not (tmp_path / "e.bin.part").exists()


def test_mixed_shapes_rejected(tmp_path):
    with pytest.raises(InvalidParameterError):
        save_embeddings([em(np.zeros((2, 2))), em(np.zeros((3, 2)))], tmp_path / "x.bin")


def test_csv_export(tmp_path):
    p = tmp_path / "e.csv"
    export_csv(f32_matrices(2, (3, 2)), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "epoch_id,label,domain,window,f0,f1"
    assert len(lines) == 1 + 2 * 3
