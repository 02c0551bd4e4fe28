import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cochleanet.clustering import Codebook, MiniBatchConfig
from cochleanet.errors import BadVersion, DimensionMismatch, FeatureOutOfRange, NonMonotoneEvent
from cochleanet.events import CrossStream, LocalStream, RawStream
from cochleanet.network import (
    CrossLayerModel,
    LocalLayerModel,
    NetworkModel,
    histogram,
    infer_cross,
    infer_local,
    load_model,
    process_recording,
    save_model,
    train_cross,
    train_local,
    train_network,
)

from conftest import random_stream

KM = MiniBatchConfig(k=1, batch_size=256, seed=0)


@pytest.fixture(scope="module")
def model():
    rng = np.random.default_rng(99)
    streams = [random_stream(rng, 300, max_gap_us=800) for _ in range(6)]
    return train_network(streams, n=5, lk=3, tau_local=1e-3, ck=8, tau_cr=0.05, kmeans_cfg=KM)


def test_train_local_single_event():
    m = train_local([RawStream.from_events([(10, 4)])], 5, 1, 1e-3, KM)
    assert m.codebook.centers.tolist() == [[1.0, 0.0, 0.0, 0.0, 0.0]]


def test_train_local_duplicates_keep_center(rng):
    s = random_stream(rng, 200)
    one = train_local([s], 5, 1, 1e-3, KM)
    two = train_local([s, s], 5, 1, 1e-3, KM)
    assert np.allclose(one.codebook.centers, two.codebook.centers, atol=1e-12)
    assert two.codebook.counts[0] == 2 * one.codebook.counts[0]


def test_train_local_subsample_cap(rng):
    streams = [random_stream(rng, 300) for _ in range(3)]
    m = train_local(streams, 5, 2, 1e-3, MiniBatchConfig(k=1, num_iterations=1,
                                                          batch_size=10_000), max_vectors=100)
    assert m.codebook.counts.sum() == 100


def test_infer_local_basics(model, rng):
    assert len(infer_local(RawStream.empty(), model.local)) == 0
    s = random_stream(rng, 100)
    out = infer_local(s, model.local)
    assert np.array_equal(out.timestamps, s.timestamps)
    assert np.array_equal(out.channels, s.channels)
    assert out.local_features.max() < model.local.lk
    one = LocalLayerModel(Codebook(np.ones((1, 5))), 1e-3, 5)
    assert np.all(infer_local(s, one).local_features == 0)


def test_infer_local_rejects_unsorted(model):
    with pytest.raises(NonMonotoneEvent):
        infer_local(RawStream.from_events([(5, 0), (1, 0)]), model.local)


def test_train_cross_single_event():
    local = LocalLayerModel(Codebook(np.ones((2, 5))), 1e-3, 5)
    cross = train_cross([RawStream.from_events([(7, 9)])], local, 1, 0.2, KM)
    expected = np.zeros(64)
    expected[9 * 2 + 0] = 1.0
    assert np.array_equal(cross.codebook.centers[0], expected)


def test_cross_dim(model):
    assert model.cross.codebook.dim == 32 * model.local.lk


def test_infer_cross_basics(model, rng):
    empty = infer_local(RawStream.empty(), model.local)
    assert len(infer_cross(empty, model)) == 0
    local = infer_local(random_stream(rng, 150), model.local)
    out = infer_cross(local, model)
    assert len(out) == len(local)
    assert np.array_equal(out.timestamps, local.timestamps)
    single = NetworkModel(model.local, CrossLayerModel(Codebook(np.zeros((1, 96))), 0.1))
    assert np.all(infer_cross(local, single).cross_features == 0)


def test_histogram_examples():
    assert histogram(CrossStream([], []), 96).counts.tolist() == [0] * 96
    h = histogram(CrossStream([1, 2, 3], [5, 5, 5]), 96).counts
    assert h[5] == 3 and h.sum() == 3
    with pytest.raises(FeatureOutOfRange):
        histogram(CrossStream([1], [96]), 96)


def test_process_recording_composition(model, rng):
    s = random_stream(rng, 250)
    h = process_recording(model, s)
    manual = histogram(infer_cross(infer_local(s, model.local), model), model.ck)
    assert h == manual
    assert process_recording(model, s) == h
    assert process_recording(model, RawStream.empty()).counts.tolist() == [0] * model.ck


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_event_count_conservation(model, seed):
    s = random_stream(np.random.default_rng(seed))
    local = infer_local(s, model.local)
    cross = infer_cross(local, model)
    assert len(s) == len(local) == len(cross) == process_recording(model, s).total


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_histogram_time_translation_invariant(model, seed, delta):
    s = random_stream(np.random.default_rng(seed))
    assert process_recording(model, s) == process_recording(model, s.shifted(delta))


def test_inference_does_not_mutate(model, rng):
    before = save_model(model)
    process_recording(model, random_stream(rng, 300))
    assert save_model(model) == before


def test_per_recording_isolation(model, rng):
    a, b = random_stream(rng, 300), random_stream(rng, 300)
    hb = process_recording(model, b)
    process_recording(model, a)
    assert process_recording(model, b) == hb


def test_save_load_round_trip(model):
    data = save_model(model)
    back = load_model(data)
    assert back.local.codebook == model.local.codebook
    assert back.cross.codebook == model.cross.codebook
    assert back.local.tau_local == model.local.tau_local
    assert back.cross.tau_cr == model.cross.tau_cr
    assert save_model(back) == data


def test_truncated_model_rejected(model):
    data = save_model(model)
    for cut in (0, 10, len(data) // 2, len(data) - 3):
        with pytest.raises(BadVersion):
            load_model(data[:cut])


def test_unknown_version_rejected(model):
    doc = json.loads(save_model(model))
    doc["version"] = 99
    with pytest.raises(BadVersion):
        load_model(json.dumps(doc).encode())


def test_cross_dim_mismatch_on_load(model):
    doc = json.loads(save_model(model))
    doc["local"] = None
    doc["network"]["local"]["codebook"]["k"] = 2
    doc["network"]["local"]["codebook"]["counts"] = [0, 0]
    doc["network"]["local"]["codebook"]["centers"] = [[0.0] * 5, [1.0] * 5]
    with pytest.raises(DimensionMismatch):
        load_model(json.dumps(doc).encode())


def test_training_deterministic(rng):
    streams = [random_stream(rng, 200) for _ in range(3)]
    a = train_network(streams, lk=3, ck=5, kmeans_cfg=KM)
    b = train_network(streams, lk=3, ck=5, kmeans_cfg=KM)
    assert save_model(a) == save_model(b)
