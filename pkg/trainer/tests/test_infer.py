"""Windowed inference, re-assembly, self-ensembling, and uncertainty export."""

import csv

import numpy as np
import pytest
import torch

from mrb.patching import PatchSpec, crop
from mrb.quality import ssim_global
from mrb.volume import Volume, make_phantom, normalize

from mrb_trainer import (ModelConfig, ShapeMismatch, TrainConfig, build_model,
                         infer, train, write_epistemic_csv)


def _identity_model(m=3):
    """Exact-copy restorer: the correction path is zeroed out."""
    model = build_model(ModelConfig.toy(in_slices=m, scale=(1, 1)), seed=0)
    with torch.no_grad():
        model.tail.weight.zero_()
        model.tail.bias.zero_()
    return model.eval()


def test_identity_plumbing_exact():
    v = Volume(np.random.default_rng(0).random((40, 40, 10)))
    out, maps = infer(_identity_model(), v, PatchSpec(16, 8, 3))
    assert maps is None
    assert out.dims == v.dims
    assert np.allclose(out.data, v.data, atol=1e-7)


def test_interior_slices_get_three_predictions():
    # enumeration oracle: 3-slice windows at stride 1 over 10 slices
    v = Volume(np.random.default_rng(1).random((16, 16, 10)))
    origins = sorted({o for _d, (_i, _j, o) in crop(v, PatchSpec(16, 0, 3)).patches})
    counts = [sum(o <= s < o + 3 for o in origins) for s in range(10)]
    assert counts == [1, 2, 3, 3, 3, 3, 3, 3, 2, 1]


def test_trained_to_copy_restores_held_out_phantom():
    train_vol = normalize(make_phantom("ellipsoid", (48, 48, 16), seed=2))
    pairs = [(torch.from_numpy(np.transpose(d, (2, 0, 1)).copy()),) * 2
             for d, _o in crop(train_vol, PatchSpec(24, 0, 3, 0)).patches]
    model = build_model(ModelConfig.toy(in_slices=3), seed=0)
    train(model, pairs, TrainConfig(epochs=40, batch=8, seed=0))
    held_out = normalize(make_phantom("ellipsoid", (48, 48, 16), seed=9))
    out, _ = infer(model, held_out, PatchSpec(24, 8, 3))
    assert ssim_global(out.data, held_out.data) > 0.99


def test_uncertainty_maps_match_restored_dims(tmp_path):
    v = Volume(np.random.default_rng(3).random((24, 24, 5)))
    model = build_model(
        ModelConfig.toy(in_slices=3, uncertainty_head=True), seed=1).eval()
    out, maps = infer(model, v, PatchSpec(16, 8, 3))
    assert out.dims == v.dims
    for m in (maps.gamma, maps.v, maps.alpha, maps.beta):
        assert m.shape == out.dims
    assert (maps.v > 0).all() and (maps.alpha > 1).all() and (maps.beta > 0).all()

    path = tmp_path / "epi.csv"
    write_epistemic_csv("vol-a", maps, path)
    write_epistemic_csv("vol-b", maps, path, append=True)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 2 * v.dims[2]
    assert rows[0]["volume_id"] == "vol-a" and rows[-1]["volume_id"] == "vol-b"
    assert all(float(r["mean_epistemic"]) > 0 for r in rows)


def test_super_resolution_output_dims():
    v = Volume(np.random.default_rng(4).random((24, 24, 4)))
    model = build_model(ModelConfig.toy(in_slices=3, scale=(2, 2)), seed=2).eval()
    out, _ = infer(model, v, PatchSpec(16, 8, 3, scale=(2, 2)))
    assert out.dims == (48, 48, 8)


def test_spec_model_mismatch_rejected():
    v = Volume(np.random.default_rng(5).random((24, 24, 5)))
    model = build_model(ModelConfig.toy(in_slices=3), seed=0)
    with pytest.raises(ShapeMismatch):
        infer(model, v, PatchSpec(16, 8, 1))
    with pytest.raises(ShapeMismatch):
        infer(model, v, PatchSpec(16, 8, 3, scale=(2, 1)))
