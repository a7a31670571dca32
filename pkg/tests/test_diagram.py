import math

import numpy as np
import pytest

from ehrsig.diagram import back_transform_change, render_svg, rescale_signature, signature_diagram
from ehrsig.ehr_model import ChannelId, Kind
from ehrsig.ica import ICAModel, reconstruct
from ehrsig.sampler import Standardizer, Transform

CHANNELS = (
    ChannelId(Kind.CODE, "sle"),
    ChannelId(Kind.MEASUREMENT, "ana"),
    ChannelId(Kind.MEDICATION, "hcq"),
    ChannelId(Kind.CODE, "ra"),
)
STD = Standardizer(
    CHANNELS,
    (Transform.LOG_AFFINE, Transform.AFFINE, Transform.IDENTITY, Transform.LOG_AFFINE),
    np.array([0.1, 40.0, 0.0, -1.0]),
    np.array([1.2, 60.0, 1.0, 0.8]),
)


@pytest.fixture
def model():
    A = np.array([[0.9, 0.1], [0.5, -0.3], [-0.2, 0.6], [0.05, 0.2]])
    return ICAModel(A, np.linalg.pinv(A), np.zeros(4))


def test_factor_and_additive_arithmetic():
    eff = back_transform_change(Transform.LOG_AFFINE, math.log(1.754), 10)
    assert eff.per_unit == pytest.approx(1.754, abs=1e-12)
    assert abs(eff.total - 275.6) <= 0.1
    add = back_transform_change(Transform.AFFINE, 31.64, 10)
    assert add.total == 316.4
    scaled = back_transform_change("affine", 0.5, 10, scale=63.28)
    assert scaled.per_unit == 31.64 and scaled.total == pytest.approx(316.4, abs=1e-12)


def test_zero_expression_and_probability_clamp():
    assert back_transform_change(Transform.LOG_AFFINE, 0.7, 0).total == 1.0
    assert back_transform_change(Transform.AFFINE, 0.7, 0).total == 0.0
    assert back_transform_change(Transform.IDENTITY, 0.4, 5).total == 1.0
    assert back_transform_change(Transform.IDENTITY, -0.4, 5).total == -1.0
    with pytest.raises(ValueError):
        back_transform_change("cubic", 1.0)


def test_rescaled_expression_sd_and_invariance(model):
    rng = np.random.default_rng(0)
    S = rng.laplace(0, 3.0, (2, 5000))
    factor, expr, load = rescale_signature(model, S[0], 0)
    assert abs(expr.std() - 0.5) < 1e-8
    np.testing.assert_allclose(np.outer(load, expr), np.outer(model.mixing[:, 0], S[0]), atol=1e-10)
    rescaled = ICAModel(np.column_stack([load, model.mixing[:, 1]]), model.unmixing, model.row_means)
    s2 = np.vstack([expr, S[1]])
    np.testing.assert_allclose(reconstruct(rescaled, s2), reconstruct(model, S), atol=1e-10)
    gauss = rng.standard_normal(20000)
    _, g, _ = rescale_signature(model, gauss, 0)
    assert 0.94 <= np.mean(np.abs(g) <= 1) <= 0.96


def test_diagram_entries(model):
    S_row = np.random.default_rng(1).laplace(0, 1, 2000)
    dg = signature_diagram(model, STD, S_row, 0, top_m=10)
    assert [e.channel for e in dg.entries] == ["code:sle", "measurement:ana", "medication:hcq", "code:ra"]
    assert dg.entries[0].normalized == 1.0
    assert all(abs(e.normalized) <= 1 for e in dg.entries)
    assert dg.entries[0].effect.kind == "factor"
    assert dg.entries[1].effect.kind == "additive"
    assert dg.entries[2].effect.kind == "probability"
    one = signature_diagram(model, STD, S_row, 0, top_m=1)
    assert len(one.entries) == 1 and one.entries[0].channel == "code:sle"
    assert dg.counts.sum() == S_row.size and dg.bin_edges.size == 51
    assert dg.to_dict()["histogram"]["counts"] == dg.counts.tolist()
    with pytest.raises(ValueError):
        signature_diagram(model, STD, S_row, 2)


def test_loading_ties_break_by_name():
    A = np.array([[0.5], [0.5], [-0.5], [0.1]])
    m = ICAModel(A, np.linalg.pinv(A), np.zeros(4))
    dg = signature_diagram(m, STD, np.random.default_rng(2).standard_normal(100), 0, top_m=3)
    assert [e.channel for e in dg.entries] == ["code:sle", "measurement:ana", "medication:hcq"]


def test_svg_hides_small_entries(model):
    dg = signature_diagram(model, STD, np.random.default_rng(3).laplace(0, 1, 500), 1)
    svg = render_svg(dg, cutoff=0.5)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "code:ra" not in svg
    assert "medication:hcq" in svg
    assert len(dg.entries) == 4
