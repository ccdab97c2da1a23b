import numpy as np
import pytest

from mrxai.errors import NoExplanation
from mrxai.extraction import ExtractionParams, extract_minimal_mask
from mrxai.imaging import BinaryMask, Image, Occlusion, SaliencyMap, apply_occlusion
from mrxai.oracle import BlobOracle, BlobOracleParams, ConstantOracle, Oracle, Prediction

POS, NEG = "tumor", "no_tumor"


class RecordingOracle(Oracle):
    """Accepts once the keep-set covers enough bright mass; records keeps."""

    def __init__(self, inner):
        super().__init__()
        self.inner = inner
        self.keep_counts = []

    def _classify(self, image):
        self.keep_counts.append(int((image.data.sum(axis=2) > 0).sum()))
        return self.inner.classify(image)


def test_bright_blob_mask_within_top_fraction(blob_image):
    saliency = SaliencyMap(blob_image.data[:, :, 0])  # rank by intensity
    oracle = BlobOracle(BlobOracleParams(window=8, tau=0.8))
    mask = extract_minimal_mask(saliency, blob_image, oracle, POS,
                                ExtractionParams(step=0.01))
    total = 64 * 64
    blob = np.zeros((64, 64), bool)
    blob[20:32, 20:32] = True
    # blob covers 144/4096 = 3.5% of pixels; an 8x8 window needs 64 of them
    assert mask.area <= np.ceil(0.02 * total)
    assert np.all(blob[mask.bits])  # only blob pixels rank at the top
    repass = oracle.classify(apply_occlusion(blob_image, mask, Occlusion.zero()))
    assert repass.label == POS


def test_accept_everything_returns_first_round(blob_image):
    saliency = SaliencyMap(blob_image.data[:, :, 0])
    oracle = ConstantOracle(POS, 1.0)
    mask = extract_minimal_mask(saliency, blob_image, oracle, POS,
                                ExtractionParams(step=0.01))
    assert mask.area == int(np.ceil(0.01 * 64 * 64))
    assert oracle.query_count == 1


def test_uniform_saliency_row_major_tie_break():
    img = Image(np.full((10, 10, 1), 0.5))
    saliency = SaliencyMap(np.zeros((10, 10)))
    oracle = ConstantOracle(POS, 1.0)
    mask = extract_minimal_mask(saliency, img, oracle, POS, ExtractionParams(step=0.1))
    expect = np.zeros(100, bool)
    expect[:10] = True
    assert np.array_equal(mask.bits.reshape(-1), expect)


def test_monotone_supersets_and_query_bound(blob_image):
    saliency = SaliencyMap(blob_image.data[:, :, 0])
    oracle = RecordingOracle(BlobOracle(BlobOracleParams(window=8, tau=0.99)))
    with pytest.raises(NoExplanation):
        extract_minimal_mask(saliency, blob_image, oracle, POS, ExtractionParams(step=0.07))
    assert oracle.query_count <= int(np.ceil(1 / 0.07))
    assert oracle.keep_counts == sorted(oracle.keep_counts)  # supersets each round


def test_no_explanation_when_label_unreachable(blob_image):
    saliency = SaliencyMap(blob_image.data[:, :, 0])
    oracle = ConstantOracle(NEG, 1.0)
    with pytest.raises(NoExplanation):
        extract_minimal_mask(saliency, blob_image, oracle, POS)


def test_permuted_distinct_scores_row_major_independent():
    rng = np.random.default_rng(0)
    vals = rng.permutation(64).astype(float).reshape(8, 8)
    img = Image(np.full((8, 8, 1), 0.5))

    class TopHalf(Oracle):
        def _classify(self, image):
            visible = image.data[:, :, 0] > 0
            return Prediction(POS if visible.sum() >= 20 else NEG, 1.0)

    mask = extract_minimal_mask(SaliencyMap(vals), img, TopHalf(), POS,
                                ExtractionParams(step=0.1))
    order = np.argsort(-vals.reshape(-1), kind="stable")
    expect = np.zeros(64, bool)
    expect[order[:int(np.ceil(0.3 * 64))]] = True  # 20 of 64 pixels -> round 3 (ceil)
    assert mask.area == int(np.ceil(0.3 * 64))
    assert np.array_equal(mask.bits.reshape(-1), expect)
