import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_epochs
from mibci.data import (
    ALL_TASKS,
    BundleError,
    EmptyClassError,
    EpochSet,
    FeatureDescriptor,
    FeatureMatrix,
    SchemaVersionError,
    TaskId,
    TaskSpec,
    load_epoch_bundle,
    save_epoch_bundle,
    select_task,
)


def test_task_table_pairs():
    pairs = {t.task_id.value: (t.class_a, t.class_b) for t in ALL_TASKS}
    assert pairs == {"I": (0, 1), "II": (0, 2), "III": (0, 3), "IV": (1, 2), "V": (1, 3), "VI": (2, 3)}


def test_taskspec_rejects_equal_classes():
    with pytest.raises(ValueError):
        TaskSpec(TaskId.I, 1, 1)


def test_epochset_rejects_nonfinite():
    data = np.zeros((2, 1, 4))
    data[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        EpochSet(data, 250.0, ("a",), np.array([0, 1]), np.array([0, 0]))


def test_epochset_rejects_bad_lengths_and_fs():
    with pytest.raises(ValueError):
        EpochSet(np.zeros((2, 1, 4)), 250.0, ("a",), np.array([0]), np.array([0, 0]))
    with pytest.raises(ValueError):
        EpochSet(np.zeros((2, 1, 4)), 0.0, ("a",), np.array([0, 1]), np.array([0, 0]))


def test_epochset_is_immutable(epochs4):
    with pytest.raises(ValueError):
        epochs4.data[0, 0, 0] = 1.0


def test_round_trip_identity(tmp_path):
    ep = make_epochs(n_epochs=6, n_channels=2, n_samples=11)
    ep = EpochSet(ep.data.astype(np.float32), ep.fs, ep.channel_names, ep.labels, ep.subjects)
    back = load_epoch_bundle(save_epoch_bundle(ep, tmp_path / "b"))
    assert np.array_equal(back.data, ep.data)
    assert back.fs == ep.fs
    assert back.channel_names == ep.channel_names
    assert np.array_equal(back.labels, ep.labels)
    assert np.array_equal(back.subjects, ep.subjects)


def _write_manual(path, n=(2, 3, 4), nbytes=None):
    path.mkdir()
    e, c, s = n
    manifest = {"n_epochs": e, "n_channels": c, "n_samples": s, "fs_hz": 250.0,
                "channel_names": [f"x{i}" for i in range(c)], "labels": [0] * e, "subjects": [1] * e,
                "dtype": "f32le", "order": "epoch,channel,sample"}
    (path / "manifest.json").write_text(json.dumps(manifest))
    payload = np.arange(e * c * s, dtype="<f4").tobytes()
    (path / "data.bin").write_bytes(payload if nbytes is None else payload[:nbytes])


def test_manual_96_byte_bundle(tmp_path):
    _write_manual(tmp_path / "b")
    assert (tmp_path / "b" / "data.bin").stat().st_size == 96
    ep = load_epoch_bundle(tmp_path / "b")
    assert ep.data.shape == (2, 3, 4)
    assert ep.data[1, 2, 3] == 23.0


def test_truncated_data_is_dimension_mismatch(tmp_path):
    _write_manual(tmp_path / "b", nbytes=92)
    with pytest.raises(BundleError, match="dimension mismatch"):
        load_epoch_bundle(tmp_path / "b")


def test_missing_and_corrupt_manifest(tmp_path):
    with pytest.raises(BundleError):
        load_epoch_bundle(tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(BundleError):
        load_epoch_bundle(tmp_path)


def test_nonfinite_payload_rejected(tmp_path):
    ep = make_epochs(n_epochs=2, n_channels=1, n_samples=4)
    save_epoch_bundle(ep, tmp_path)
    raw = bytearray((tmp_path / "data.bin").read_bytes())
    raw[0:4] = np.array([np.inf], dtype="<f4").tobytes()
    (tmp_path / "data.bin").write_bytes(bytes(raw))
    with pytest.raises(BundleError):
        load_epoch_bundle(tmp_path)


def test_schema_mismatch_rejected(tmp_path):
    ep = make_epochs(n_epochs=2, n_channels=1, n_samples=4)
    save_epoch_bundle(ep, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["schema_version"] = 99
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(SchemaVersionError):
        load_epoch_bundle(tmp_path)


def test_task_one_keeps_hands_only():
    ep = make_epochs(n_epochs=12)
    t = select_task(ep, TaskSpec.from_id("I"))
    assert t.n_epochs == 6
    kept_orig = ep.labels[np.isin(ep.labels, [0, 1])]
    assert np.array_equal(t.labels, kept_orig)


def test_missing_class_raises():
    ep = make_epochs(n_epochs=4, labels=[0, 0, 0, 0])
    with pytest.raises(EmptyClassError):
        select_task(ep, TaskSpec.from_id("I"))


def test_288_trials_give_144_per_task():
    ep = make_epochs(n_epochs=288, n_channels=1, n_samples=8)
    for task in ALL_TASKS:
        t = select_task(ep, task)
        assert t.n_epochs == 144
        assert np.sum(t.labels == 0) == 72 and np.sum(t.labels == 1) == 72


def test_subject_ids_preserved():
    ep = make_epochs(n_epochs=8, subjects=[5, 5, 6, 6, 7, 7, 8, 8])
    t = select_task(ep, TaskSpec.from_id("IV"))
    assert np.array_equal(t.subjects, ep.subjects[np.isin(ep.labels, [1, 2])])


@given(st.integers(1, 20), st.integers(0, 5), st.sampled_from([t.task_id.value for t in ALL_TASKS]))
def test_balanced_four_class_property(per_class, seed, task_id):
    n = 4 * per_class
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(4), per_class))
    ep = make_epochs(n_epochs=n, n_channels=1, n_samples=4, labels=labels, subjects=np.zeros(n, int))
    t = select_task(ep, TaskSpec.from_id(task_id))
    assert t.n_epochs == n // 2
    assert np.sum(t.labels == 0) == n // 4 == np.sum(t.labels == 1)


@given(st.integers(0, 100))
def test_select_task_idempotent_and_commutes_with_reordering(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, 20)
    labels[:4] = [0, 1, 2, 3]
    ep = make_epochs(n_epochs=20, n_channels=2, n_samples=5, labels=labels, seed=seed)
    task = TaskSpec.from_id("II")
    once = select_task(ep, task)
    # idempotent once labels are expressed in the task's own class ids
    relabel = EpochSet(once.data, once.fs, once.channel_names,
                       np.where(once.labels == 1, task.class_b, task.class_a), once.subjects)
    twice = select_task(relabel, task)
    assert np.array_equal(twice.data, once.data) and np.array_equal(twice.labels, once.labels)

    perm = rng.permutation(20)
    shuffled = select_task(ep.subset(perm), task)
    keep = np.isin(ep.labels[perm], [task.class_a, task.class_b])
    order = perm[keep]
    ref_rows = np.searchsorted(np.flatnonzero(np.isin(ep.labels, [0, 2])), order)
    assert np.array_equal(shuffled.data, once.data[ref_rows])
    assert np.array_equal(shuffled.labels, once.labels[ref_rows])


@given(e=st.integers(1, 5), c=st.integers(1, 4), s=st.integers(1, 9), seed=st.integers(0, 50))
def test_bundle_round_trip_property(tmp_path_factory, e, c, s, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((e, c, s)).astype(np.float32).astype(np.float64)
    ep = EpochSet(data, 128.0, tuple(f"n{i}" for i in range(c)), rng.integers(0, 4, e), rng.integers(0, 9, e))
    back = load_epoch_bundle(save_epoch_bundle(ep, tmp_path_factory.mktemp("b")))
    assert np.array_equal(back.data, ep.data)
    assert np.array_equal(back.labels, ep.labels) and np.array_equal(back.subjects, ep.subjects)


def test_feature_matrix_rejects_duplicate_descriptors():
    d = FeatureDescriptor(0, "spectral", "alpha_power")
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 2)), [d, d], np.array([0, 1]))


def test_feature_matrix_rejects_nonfinite():
    d = [FeatureDescriptor(0, "spectral", "alpha_power")]
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.nan], [0.0]]), d, np.array([0, 1]))


def test_descriptor_dict_round_trip():
    d = FeatureDescriptor(3, "wavelet", "cwt_pc1_scale2")
    assert FeatureDescriptor.from_dict(d.to_dict()) == d
