"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The expensive synthetic
benchmark (50 images x 4 tools at budget 2000) runs once as a module
fixture and is shared by the end-to-end, determinism and budget checks
(determinism performs its own full second run).
"""

import math
import time

import numpy as np
import pytest

from conftest import POS, GameOracle, band_setup, brute_force_shapley
from mrxai import bench, rng
from mrxai.errors import BothEmpty
from mrxai.explainers import (ExplainerConfig, RiseParams, ShapParams,
                              explain_rise, explain_shap)
from mrxai.imaging import (BinaryMask, Image, Occlusion, apply_occlusion,
                           load_image)
from mrxai.metrics import PdcParams, dice, distance_component, pdc, size_ratio, summarize
from mrxai.mutants import RiseMaskParams, rise_masks, segment_image
from mrxai.oracle import BlobOracle, BlobOracleParams, ConstantOracle

BUDGET = 2000
EXTRACTION_ROUNDS = 100  # ceil(1 / default step)


def stamp(name: str, ok: bool, elapsed: float, bound: float) -> None:
    verdict = "PASS" if ok else "FAIL"
    print(f"[{verdict}] {name} ({elapsed:.2f}s, bound {bound:.0f}s)")


def block(r0, c0, r1, c1, shape) -> BinaryMask:
    bits = np.zeros(shape, bool)
    bits[r0:r1, c0:c1] = True
    return BinaryMask(bits)


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    started = time.perf_counter()
    manifest_path = bench.synth_dataset(50, (64, 64), (8, 16), seed=0, out_dir=out)
    manifest = bench.ingest(manifest_path)
    config = bench.RunConfig(tools=("rise", "rex", "lime", "shap"), budget=BUDGET,
                             seed=0, oracle_spec="blob:8:0.8")
    report = bench.run(manifest, config)
    elapsed = time.perf_counter() - started
    return manifest, config, report, elapsed


def test_criterion_metric_unit_suite():
    started = time.perf_counter()
    shape = (100, 100)
    checks = []

    same = block(2, 2, 6, 6, (8, 8))
    checks.append(abs(dice(same, same) - 1.0) < 1e-9)
    checks.append(abs(dice(block(0, 0, 2, 2, (8, 8)), block(4, 4, 6, 6, (8, 8)))) < 1e-9)
    x = block(0, 0, 1, 4, (8, 8))
    y = block(0, 2, 1, 6, (8, 8))
    checks.append(abs(dice(x, y) - 0.5) < 1e-9)
    try:
        dice(block(0, 0, 0, 0, (4, 4)), block(0, 0, 0, 0, (4, 4)))
        checks.append(False)
    except BothEmpty:
        checks.append(True)

    checks.append(abs(size_ratio(100, 100) - 1.0) < 1e-9)
    checks.append(abs(size_ratio(50, 100, PdcParams(small=1.0)) - 0.5) < 1e-9)
    checks.append(abs(size_ratio(200, 100, PdcParams(big=0.5)) - 0.25) < 1e-9)

    hpe_px = block(20, 20, 21, 21, shape)
    exp_px = block(20, 70, 21, 71, shape)
    d_pin = distance_component(exp_px, hpe_px)
    checks.append(abs(d_pin - (1.0 - 50.0 / math.hypot(79, 79))) < 1e-9)
    checks.append(abs(d_pin - 0.5525) < 1e-4)
    checks.append(abs(distance_component(hpe_px, hpe_px) - 1.0) < 1e-9)
    center_px = block(4, 4, 5, 5, (9, 9))
    corner_px = block(0, 0, 1, 1, (9, 9))
    checks.append(abs(distance_component(corner_px, center_px)) < 1e-9)

    out = pdc(block(30, 30, 40, 40, shape), block(20, 20, 30, 30, shape))
    checks.append(abs(out.pdc - 0.6219) < 1e-4)
    checks.append(abs(out.d - 0.8658) < 1e-4)
    checks.append(out.dc == 0.0 and out.r == 1.0 and out.count == 1)
    exact = pdc(same, same)
    checks.append((exact.dc, exact.d, exact.r, exact.pdc) == (1.0, 1.0, 1.0, 1.0))
    empty = pdc(BinaryMask(np.zeros((8, 8), bool)), same)
    checks.append(empty.pdc == 0.0 and empty.count == 0)

    checks.append(summarize([0.5]) == (0.5, 0.0))
    mean, std = summarize([0.0, 1.0])
    checks.append(mean == 0.5 and abs(std - math.sqrt(0.5)) < 1e-9)
    checks.append(summarize([0.42, 0.42, 0.42]) == (0.42, 0.0))

    elapsed = time.perf_counter() - started
    ok = all(checks) and elapsed < 1.0
    stamp("metric unit suite (Eq. 1-3 pins at 1e-9 / 1e-4)", ok, elapsed, 1.0)
    assert all(checks)
    assert elapsed < 1.0


def random_connected_mask(seed: int, shape=(32, 32)) -> BinaryMask:
    gen = rng.stream(seed, 99, 0)
    h, w = shape
    r, c = int(gen.integers(0, h)), int(gen.integers(0, w))
    cells = {(r, c)}
    frontier = [(r, c)]
    target = int(gen.integers(20, 200))
    while len(cells) < target and frontier:
        r, c = frontier[int(gen.integers(0, len(frontier)))]
        nbrs = [(r + dr, c + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= r + dr < h and 0 <= c + dc < w and (r + dr, c + dc) not in cells]
        if not nbrs:
            frontier.remove((r, c))
            continue
        nxt = nbrs[int(gen.integers(0, len(nbrs)))]
        cells.add(nxt)
        frontier.append(nxt)
    bits = np.zeros(shape, bool)
    for rr, cc in cells:
        bits[rr, cc] = True
    return BinaryMask(bits)


def test_criterion_perfect_alignment_anchor():
    started = time.perf_counter()
    ok = True
    empty = BinaryMask(np.zeros((32, 32), bool))
    for seed in range(100):
        mask = random_connected_mask(seed)
        ok &= pdc(mask, mask, PdcParams(small=1.0, big=1.0)).pdc == 1.0
        ok &= pdc(empty, mask).pdc == 0.0
    elapsed = time.perf_counter() - started
    ok &= elapsed < 5.0
    stamp("perfect-alignment anchor (100 random connected masks)", ok, elapsed, 5.0)
    assert ok


def test_criterion_shapley_oracle_equivalence():
    started = time.perf_counter()
    game_rng = np.random.default_rng(7)
    plan = [(3, 3), (4, 3), (5, 3), (6, 3), (7, 2), (8, 2), (9, 2), (10, 2)]
    assert sum(n for _, n in plan) == 20
    worst_exact, worst_sampled = 0.0, 0.0
    for k, n_games in plan:
        image, seg = band_setup(k)
        for g in range(n_games):
            if g == 0:  # one additive game per k, the rest arbitrary
                values = game_rng.random(k)
                values /= values.sum()
                game = lambda z, v=values: float(sum(x for x, on in zip(v, z) if on))
            else:
                table = game_rng.random(2 ** k)
                game = lambda z, t=table: float(t[sum(1 << i for i, on in enumerate(z) if on)])
            reference = brute_force_shapley(game, k)
            exact_att, _ = explain_shap(
                image, GameOracle(k, game), seg,
                ExplainerConfig(target=POS, budget=2 ** k, seed=0,
                                occlusion=Occlusion.zero()))
            worst_exact = max(worst_exact, float(np.abs(exact_att.weights - reference).max()))
            sampled_att, _ = explain_shap(
                image, GameOracle(k, game), seg,
                ExplainerConfig(target=POS, budget=50 * 2 ** k, seed=g,
                                occlusion=Occlusion.zero(),
                                params=ShapParams(mode="sampled")))
            worst_sampled = max(worst_sampled, float(np.abs(sampled_att.weights - reference).max()))
    elapsed = time.perf_counter() - started
    ok = worst_exact <= 1e-6 and worst_sampled <= 0.05 and elapsed < 30.0
    stamp(f"shapley equivalence (exact err {worst_exact:.1e}, sampled err {worst_sampled:.3f})",
          ok, elapsed, 30.0)
    assert worst_exact <= 1e-6
    assert worst_sampled <= 0.05
    assert elapsed < 30.0


def test_criterion_rise_statistics():
    started = time.perf_counter()
    params = RiseMaskParams(grid=8, keep_prob=0.1, count=BUDGET, seed=0)
    stack = np.stack([m.values for m in rise_masks(params, (64, 64))])
    grand_mean = float(stack.mean())

    image = Image(np.full((64, 64, 1), 0.5))
    cfg = ExplainerConfig(target=POS, budget=BUDGET, seed=0,
                          params=RiseParams(grid=8, keep_prob=0.1))
    saliency = explain_rise(image, ConstantOracle(POS, 0.6), cfg)
    spread = float(saliency.values.std() / saliency.values.mean())

    elapsed = time.perf_counter() - started
    ok = abs(grand_mean - 0.1) <= 0.01 and spread < 0.05 and elapsed < 10.0
    stamp(f"rise statistics (mask mean {grand_mean:.4f}, spread {spread:.3f})",
          ok, elapsed, 10.0)
    assert abs(grand_mean - 0.1) <= 0.01
    assert spread < 0.05
    assert elapsed < 10.0


def _repasses(row, manifest, config, oracle) -> bool:
    image = load_image(manifest.rows[row.row_index].image_path)
    if row.occlusion == "segment-mean":
        seg = segment_image(image, min(config.segments, 64 * 64), row.seed)
        occ = Occlusion.segment_mean(seg.labels)
    else:
        occ = Occlusion.zero()
    pred = oracle.classify(apply_occlusion(image, row.mask, occ))
    return pred.label == config.positive_label


def test_criterion_end_to_end_benchmark(benchmark):
    manifest, config, report, run_elapsed = benchmark
    started = time.perf_counter()
    oracle = BlobOracle(BlobOracleParams(window=8, tau=0.8))

    complete = len(report.rows) == 4 * len(manifest.rows)
    repass_ok = all(_repasses(row, manifest, config, oracle)
                    for row in report.rows if row.outcome == "ok")

    summary = report.summary()
    rex = summary["rex"]
    count_means = {tool: entry["count_mean"] for tool, entry in summary.items()
                   if entry["scored"]}
    rex_low = rex["count_mean"] <= min(count_means.values())
    print("  table-1 style summary:")
    for line in report.table_csv().splitlines():
        print("   ", line)

    elapsed = run_elapsed + (time.perf_counter() - started)
    ok = (complete and repass_ok and rex["count_mean"] <= 2.0
          and rex["dc_mean"] >= 0.3 and rex_low and elapsed < 300.0)
    stamp(f"end-to-end benchmark (rex count {rex['count_mean']:.2f}, "
          f"dc {rex['dc_mean']:.2f}, repass {repass_ok})", ok, elapsed, 300.0)
    assert complete
    assert repass_ok, "a returned/extracted mask failed its oracle re-query"
    assert rex["count_mean"] <= 2.0
    assert rex["dc_mean"] >= 0.3
    assert rex_low, f"rex count {rex['count_mean']} not lowest among {count_means}"
    assert elapsed < 300.0


def test_criterion_determinism(benchmark):
    manifest, config, report, _ = benchmark
    started = time.perf_counter()
    rerun = bench.run(manifest, config)
    identical = rerun.to_json_bytes() == report.to_json_bytes()
    elapsed = time.perf_counter() - started
    ok = identical and elapsed < 300.0
    stamp("determinism (rerun report byte-identical)", ok, elapsed, 300.0)
    assert identical
    assert elapsed < 300.0


def test_criterion_budget_compliance(benchmark):
    _, config, report, _ = benchmark
    started = time.perf_counter()
    limit = BUDGET + EXTRACTION_ROUNDS
    worst = max((row.queries for row in report.rows), default=0)
    elapsed = time.perf_counter() - started
    ok = worst <= limit
    stamp(f"budget compliance (max queries {worst} <= {limit})", ok, elapsed, 1.0)
    assert worst <= limit
