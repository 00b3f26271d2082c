import os

import numpy as np
import pytest

from backbone.extractor import EXTRACT_INVOCATIONS, FeatureCache, encode_mask
from backbone.memory_bank import MemoryBank
from constants import MERGE_ARGMAX
from data_synth.sequences import make_sequence
from data_synth.transforms import make_rng
from memory_manager.policy import MemoryPolicy
from pipeline.model import ModelConfig, build_model, load_model, save_model
from pipeline.segment import VideoTask, merge, run_video, segment_frame, task_from_label_map
from pipeline.video_io import (
    label_map_to_masks,
    list_png_files,
    read_frame,
    read_label_map,
    read_sequence,
    write_frame,
    write_label_map,
)
from tensor_core.serialization import load_tensors, save_tensors
from tensor_core.tensor import Tensor
from utils.errors import ContractError, DimensionError, FormatError


def _p(values):
    return Tensor(np.asarray(values, dtype=np.float64).reshape(1, 1, -1))


def _video(make_synth_config, length, num_objects, seed=4):
    # generated sequences have at least 3 frames; shorter videos are truncations
    config = make_synth_config(32, num_objects)
    clip = make_sequence(make_rng(seed), max(length, 3), num_objects, 32, 32, config, dtype="float64")
    return task_from_label_map(clip.frames[:length], clip.label_map(0))


def test_merge_single_object():
    labels = merge({3: _p([0.9, 0.2, 0.0])})
    assert labels.tolist() == [[3, 0, 0]]
    assert labels.dtype == np.int64


def test_merge_all_background():
    labels = merge({1: _p([0.0, 0.0]), 2: _p([0.0, 0.0])})
    assert labels.tolist() == [[0, 0]]


def test_merge_two_objects():
    assert merge({1: _p([0.9]), 2: _p([0.6])}).tolist() == [[1]]
    assert merge({1: _p([0.3]), 2: _p([0.7])}).tolist() == [[2]]


def test_merge_saturated_probabilities():
    # a certain object drives the background product to 0 before clamping
    labels = merge({1: _p([1.0, 0.0, 0.5]), 2: _p([1.0, 0.0, 0.5]), 3: _p([0.0, 0.0, 0.5])})
    assert labels.tolist() == [[1, 0, 1]]


def test_merge_is_order_free(rng):
    maps = {object_id: Tensor(rng.uniform(size=(1, 6, 6))) for object_id in (1, 4, 9)}
    reversed_maps = {object_id: maps[object_id] for object_id in (9, 4, 1)}
    np.testing.assert_array_equal(merge(maps), merge(reversed_maps))
    assert set(np.unique(merge(maps))) <= {0, 1, 4, 9}


def test_merge_argmax_mode():
    labels = merge({1: _p([0.4, 0.8, 0.6]), 2: _p([0.3, 0.1, 0.7])}, mode=MERGE_ARGMAX)
    assert labels.tolist() == [[0, 1, 2]]


def test_merge_errors():
    with pytest.raises(ContractError):
        merge({})
    with pytest.raises(ContractError):
        merge({1: _p([1.5])})
    with pytest.raises(DimensionError):
        merge({1: _p([0.5]), 2: _p([0.5, 0.5])})
    with pytest.raises(ContractError):
        merge({1: _p([0.5])}, mode="vote")


def _frames(n, h=32, w=32):
    return [Tensor(np.zeros((3, h, w))) for _ in range(n)]


def _mask(h=32, w=32, rows=slice(0, 8)):
    data = np.zeros((1, h, w))
    data[0, rows] = 1.0
    return Tensor(data)


def test_video_task_validation():
    with pytest.raises(ContractError):
        VideoTask(frames=[], first_masks={1: _mask()})
    with pytest.raises(DimensionError):
        VideoTask(frames=_frames(2, 24, 32), first_masks={1: _mask(24, 32)})
    with pytest.raises(DimensionError):
        VideoTask(frames=_frames(1) + _frames(1, 48, 32), first_masks={1: _mask()})
    with pytest.raises(ContractError):
        VideoTask(frames=_frames(2), first_masks={})
    with pytest.raises(ContractError):
        VideoTask(frames=_frames(2), first_masks={0: _mask()})
    with pytest.raises(ContractError):
        VideoTask(frames=_frames(2), first_masks={1: Tensor(np.full((1, 32, 32), 0.5))})
    with pytest.raises(ContractError):
        VideoTask(frames=_frames(2), first_masks={1: _mask(), 2: _mask(rows=slice(4, 12))})
    task = VideoTask(frames=_frames(2), first_masks={2: _mask(), 1: _mask(rows=slice(8, 12))})
    assert task.object_ids == [1, 2]
    assert task.frame_size == (32, 32)


def test_one_frame_video_returns_ground_truth(tiny_model, make_synth_config):
    task = _video(make_synth_config, 3, 2)
    single = VideoTask(frames=task.frames[:1], first_masks=task.first_masks)
    result = run_video(tiny_model, single, MemoryPolicy.first_only())
    expected = np.zeros((32, 32), dtype=np.int64)
    for object_id, mask in task.first_masks.items():
        expected[mask.data[0] > 0.5] = object_id
    assert len(result.label_maps) == 1
    np.testing.assert_array_equal(result.label_maps[0], expected)
    assert result.backbone_calls == 1


def test_memory_sizes_follow_the_policy(tiny_model, make_synth_config):
    result = run_video(tiny_model, _video(make_synth_config, 3, 1), MemoryPolicy.fixed_n(7))
    assert result.memory_sizes == [1, 2]
    assert result.memory_indices == [[0], [0, 1]]
    manifest = result.to_manifest(MemoryPolicy.fixed_n(7))
    assert manifest["memory_indices"] == {"1": [0], "2": [0, 1]}
    assert manifest["policy"] == "fixed-n:7"


def test_backbone_runs_once_per_frame(tiny_model, make_synth_config):
    task = _video(make_synth_config, 20, 2)
    before = EXTRACT_INVOCATIONS.count
    result = run_video(tiny_model, task, MemoryPolicy.first_and_previous(), keep_probs=True)
    assert result.backbone_calls == 20
    assert EXTRACT_INVOCATIONS.count - before == 20
    assert len(result.label_maps) == 20
    for labels in result.label_maps:
        assert set(np.unique(labels)) <= {0, 1, 2}
    assert len(result.per_object_probs) == 19
    assert set(result.per_object_probs[0]) == {1, 2}


def test_segment_frame_extracts_query_once(tiny_model, make_synth_config):
    task = _video(make_synth_config, 2, 2)
    cache = FeatureCache(tiny_model.backbone)
    features = cache.get_features(0, task.frames[0])
    banks = {}
    for object_id, mask in task.first_masks.items():
        banks[object_id] = MemoryBank()
        banks[object_id].append(0, features, encode_mask(mask, tiny_model.mask_encoder))
    before = cache.extract_calls
    global_before = EXTRACT_INVOCATIONS.count
    query = cache.get_features(1, task.frames[1])
    probs = segment_frame(tiny_model, query, 1, banks, MemoryPolicy.first_only())
    assert cache.extract_calls - before == 1
    assert EXTRACT_INVOCATIONS.count - global_before == 1
    assert set(probs) == {1, 2}
    for probability in probs.values():
        assert probability.shape == (1, 32, 32)
        assert 0.0 <= probability.data.min() and probability.data.max() <= 1.0


def test_stationary_video_with_first_frame_memory(tiny_model, make_synth_config):
    task = _video(make_synth_config, 3, 1)
    frozen = VideoTask(frames=[task.frames[0]] * 6, first_masks=task.first_masks)
    result = run_video(tiny_model, frozen, MemoryPolicy.first_only(), keep_probs=True)
    first = result.per_object_probs[0]
    for later in result.per_object_probs[1:]:
        for object_id in first:
            np.testing.assert_array_equal(later[object_id], first[object_id])
    for labels in result.label_maps[2:]:
        np.testing.assert_array_equal(labels, result.label_maps[1])


def test_threads_do_not_change_results(tiny_model, make_synth_config):
    task = _video(make_synth_config, 4, 2)
    serial = run_video(tiny_model, task, MemoryPolicy.first_and_previous(), threads=1)
    threaded = run_video(tiny_model, task, MemoryPolicy.first_and_previous(), threads=3)
    for a, b in zip(serial.label_maps, threaded.label_maps):
        np.testing.assert_array_equal(a, b)


def test_predicted_memories_stay_disjoint(tiny_model, make_synth_config):
    task = _video(make_synth_config, 4, 2)
    result = run_video(tiny_model, task, MemoryPolicy.previous_only())
    for labels in result.label_maps:
        masks = label_map_to_masks(labels)
        if masks:
            assert np.max(sum(masks.values())) <= 1


def test_attention_maps_dumped(tiny_model, make_synth_config, tmp_path):
    task = _video(make_synth_config, 2, 1)
    assert len(task.frames) == 2
    run_video(tiny_model, task, MemoryPolicy.first_only(), attention_dir=str(tmp_path))
    names = sorted(os.listdir(tmp_path))
    assert len(names) == 5
    assert all(name.startswith("f00001_o") and name.endswith(".sitt") for name in names)


def test_save_and_load_model(tiny_model, tmp_path):
    path = str(tmp_path / "model.sitt")
    save_model(tiny_model, path, extra_meta={"stage": "pretrain"})
    loaded, meta = load_model(path)
    assert meta["stage"] == "pretrain"
    assert loaded.config == tiny_model.config
    for name, parameter in tiny_model.named_parameters().items():
        np.testing.assert_array_equal(loaded.named_parameters()[name].value.data, parameter.value.data)


def test_load_model_rejects_mismatch(tiny_model, tmp_path):
    path = str(tmp_path / "model.sitt")
    save_model(tiny_model, path)
    tensors, meta = load_tensors(path)
    tensors.pop("decoder.head")
    save_tensors(tensors, path, meta=meta)
    with pytest.raises(FormatError):
        load_model(path)


def test_build_model_names_and_dtype():
    model = build_model(ModelConfig(channels=8, d_k=4, decoder_channels=4), seed=1, dtype="float64")
    names = model.named_parameters()
    assert model.config.dtype == "float64"
    assert {name.split(".")[0] for name in names} == {"backbone", "mask_encoder", "transformer", "decoder"}
    assert all(parameter.value.dtype == "float64" for parameter in names.values())


def test_label_map_png_round_trip(tmp_path):
    labels = np.zeros((16, 16), dtype=np.int64)
    labels[2:6, 3:9] = 1
    labels[10:, :4] = 7
    path = str(tmp_path / "00000.png")
    write_label_map(labels, path)
    np.testing.assert_array_equal(read_label_map(path), labels)


def test_read_frame_scales_to_unit_interval(tmp_path):
    frame = np.zeros((3, 16, 16))
    frame[0] = 1.0
    path = str(tmp_path / "00000.png")
    write_frame(frame, path)
    loaded = read_frame(path, dtype="float64")
    assert loaded.shape == (3, 16, 16)
    np.testing.assert_allclose(loaded.data, frame)


def test_video_io_errors(tmp_path):
    bad = tmp_path / "00000.png"
    bad.write_bytes(b"not a png")
    with pytest.raises(FormatError, match="00000.png"):
        read_label_map(str(bad))
    rgb = str(tmp_path / "00001.png")
    write_frame(np.zeros((3, 16, 16)), rgb)
    with pytest.raises(FormatError, match="00001.png"):
        read_label_map(rgb)
    (tmp_path / "cover.png").write_bytes(b"")
    with pytest.raises(FormatError):
        list_png_files(str(tmp_path))


def test_read_sequence_requires_first_annotation(tmp_path):
    (tmp_path / "frames").mkdir()
    (tmp_path / "masks").mkdir()
    write_frame(np.zeros((3, 16, 16)), str(tmp_path / "frames" / "00000.png"))
    write_label_map(np.zeros((16, 16), dtype=np.int64), str(tmp_path / "masks" / "00003.png"))
    with pytest.raises(FormatError):
        read_sequence(str(tmp_path))
