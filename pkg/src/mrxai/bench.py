"""Dataset ingestion and the tools-by-images benchmark loop.

Feed it a manifest of (image, ground-truth mask, label) rows plus a run
configuration; it produces a per-(tool, image) score table and Table-1
style aggregates.  Failures are first-class rows with reason codes, the
canonical JSON report is byte-reproducible for a fixed seed, and wall
times go to a separate sidecar precisely so they cannot break that.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .errors import (BadCsv, BadMask, InvalidParams, MissingFile,
                     NoExplanation, OracleUnavailable)
from .explainers import (ExplainerConfig, explain_lime, explain_rex,
                         explain_rise, explain_shap)
from .extraction import ExtractionParams, extract_minimal_mask
from .imaging import (BinaryMask, Image, load_image, load_mask,
                      save_image, save_mask)
from .metrics import PdcBreakdown, PdcParams, pdc, summarize
from .mutants import segment_image
from .oracle import DEFAULT_POSITIVE, CountingProxy, Oracle, make_oracle

ALL_TOOLS = ("rise", "rex", "lime", "shap")


@dataclass(frozen=True)
class ManifestRow:
    image_path: Path
    hpe_path: Path
    label: str


@dataclass(frozen=True)
class Manifest:
    rows: tuple[ManifestRow, ...]
    root: Path


def ingest(manifest_path, positive_label: str = DEFAULT_POSITIVE) -> Manifest:
    """Read and validate a manifest CSV (header: image,mask,label).

    Paths resolve relative to the manifest's directory.  Rows that point
    at missing files raise MissingFile; positively labelled rows with an
    all-false mask raise BadMask.  Row numbers count from 1 after the
    header.
    """
    path = Path(manifest_path)
    if not path.exists():
        raise MissingFile(f"manifest {path} does not exist")
    root = path.parent
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["image", "mask", "label"]:
            raise BadCsv(f"manifest header must be image,mask,label, got {header}")
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise BadCsv(f"row {lineno}: expected 3 fields, got {len(row)}")
            image_path = root / row[0].strip()
            hpe_path = root / row[1].strip()
            label = row[2].strip()
            if not image_path.exists():
                raise MissingFile(f"row {lineno}: image {image_path} not found")
            if not hpe_path.exists():
                raise MissingFile(f"row {lineno}: mask {hpe_path} not found")
            if label == positive_label and load_mask(hpe_path).is_empty():
                raise BadMask(f"row {lineno}: positive row with an empty mask")
            rows.append(ManifestRow(image_path, hpe_path, label))
    return Manifest(rows=tuple(rows), root=root)


@dataclass(frozen=True)
class RunConfig:
    tools: tuple[str, ...] = ALL_TOOLS
    budget: int = 2000
    seed: int = 0
    pdc_params: PdcParams = PdcParams()
    extraction: ExtractionParams = ExtractionParams()
    oracle_spec: str = "blob:8:0.8"
    positive_label: str = DEFAULT_POSITIVE
    connectivity: int = 8
    segments: int = 40
    workers: int = 1

    def __post_init__(self):
        tools = tuple(t for t in ALL_TOOLS if t in self.tools)  # canonical order
        if not tools or set(self.tools) - set(ALL_TOOLS):
            raise InvalidParams(f"tools must be a non-empty subset of {ALL_TOOLS}")
        object.__setattr__(self, "tools", tools)
        if self.budget < 1:
            raise InvalidParams("budget must be >= 1")
        if self.connectivity not in (4, 8):
            raise InvalidParams("connectivity must be 4 or 8")
        if self.segments < 1 or self.workers < 1:
            raise InvalidParams("segments and workers must be >= 1")


_CONFIG_KEYS = {
    "tools": lambda v: tuple(t.strip() for t in v.split(",") if t.strip()),
    "budget": int,
    "seed": int,
    "s": float,
    "b": float,
    "step": float,
    "max_rounds": int,
    "oracle": str,
    "positive_label": str,
    "connectivity": int,
    "segments": int,
    "workers": int,
}


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Key = value config file; '#' starts a comment; CLI flags override."""
    raw: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadCsv(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise InvalidParams(f"config line {lineno}: unknown key {key!r}")
        raw[key] = _CONFIG_KEYS[key](value)
    raw.update(overrides or {})
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> RunConfig:
    cfg = RunConfig(
        tools=raw.get("tools", ALL_TOOLS),
        budget=raw.get("budget", 2000),
        seed=raw.get("seed", 0),
        pdc_params=PdcParams(small=raw.get("s", 1.0), big=raw.get("b", 1.0)),
        extraction=ExtractionParams(step=raw.get("step", 0.01),
                                    max_rounds=raw.get("max_rounds", 100)),
        oracle_spec=raw.get("oracle", "blob:8:0.8"),
        positive_label=raw.get("positive_label", DEFAULT_POSITIVE),
        connectivity=raw.get("connectivity", 8),
        segments=raw.get("segments", 40),
        workers=raw.get("workers", 1),
    )
    return cfg


@dataclass
class RowResult:
    tool: str
    row_index: int
    image: str
    outcome: str               # "ok" or a failure code
    queries: int = 0
    breakdown: PdcBreakdown | None = None
    occlusion: str = ""        # occlusion kind under which the mask passes
    detail: str = ""
    seed: int = 0
    wall_seconds: float = 0.0
    mask: BinaryMask | None = None  # in-memory only, never serialized


@dataclass
class RunReport:
    config: RunConfig
    rows: list[RowResult]
    skipped_negative: int
    false_negatives: int

    def summary(self) -> dict:
        out = {}
        for tool in self.config.tools:
            scored = [r.breakdown for r in self.rows
                      if r.tool == tool and r.breakdown is not None]
            entry: dict = {
                "rows": sum(r.tool == tool for r in self.rows),
                "scored": len(scored),
                "failures": {},
            }
            for r in self.rows:
                if r.tool == tool and r.outcome != "ok":
                    entry["failures"][r.outcome] = entry["failures"].get(r.outcome, 0) + 1
            if scored:
                for name in ("count", "dc", "pdc"):
                    mean, std = summarize([getattr(b, name) for b in scored])
                    entry[f"{name}_mean"], entry[f"{name}_std"] = mean, std
            out[tool] = entry
        return out

    def to_json_bytes(self) -> bytes:
        doc = {
            "config": {
                "tools": list(self.config.tools),
                "budget": self.config.budget,
                "seed": self.config.seed,
                "s": self.config.pdc_params.small,
                "b": self.config.pdc_params.big,
                "step": self.config.extraction.step,
                "oracle": self.config.oracle_spec,
                "positive_label": self.config.positive_label,
                "connectivity": self.config.connectivity,
                "segments": self.config.segments,
            },
            "skipped": {"negative_rows": self.skipped_negative,
                        "false_negatives": self.false_negatives},
            "rows": [
                {
                    "tool": r.tool,
                    "row": r.row_index,
                    "image": r.image,
                    "outcome": r.outcome,
                    "queries": r.queries,
                    "detail": r.detail,
                    "occlusion": r.occlusion,
                    "seed": r.seed,
                    **(r.breakdown.as_dict() if r.breakdown else {}),
                }
                for r in self.rows
            ],
            "summary": self.summary(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n"

    def table_csv(self) -> str:
        lines = ["tool,count,dc,pdc"]
        summary = self.summary()
        for tool in self.config.tools:
            entry = summary[tool]
            if entry["scored"]:
                cells = [f"{entry[f'{n}_mean']:.2f} ± {entry[f'{n}_std']:.2f}"
                         for n in ("count", "dc", "pdc")]
            else:
                cells = ["-", "-", "-"]
            lines.append(",".join([tool] + cells))
        return "\n".join(lines) + "\n"

    def timings_csv(self) -> str:
        lines = ["tool,row,seconds"]
        for r in self.rows:
            lines.append(f"{r.tool},{r.row_index},{r.wall_seconds:.3f}")
        return "\n".join(lines) + "\n"

    @property
    def has_failures(self) -> bool:
        return any(r.outcome != "ok" for r in self.rows)


def _flat(values: np.ndarray) -> bool:
    return float(values.max() - values.min()) < 1e-12


def _run_tool(tool: str, image: Image, oracle: Oracle, seed: int,
              config: RunConfig) -> tuple[BinaryMask | None, str, str]:
    """Returns (mask, outcome, occlusion-kind-for-pass)."""
    cfg = ExplainerConfig(target=config.positive_label, budget=config.budget, seed=seed)
    if tool == "rise":
        saliency = explain_rise(image, oracle, cfg)
        if _flat(saliency.values):
            return None, "EmptyExplanation", "zero"
        mask = extract_minimal_mask(saliency, image, oracle, config.positive_label,
                                    config.extraction)
        return mask, "ok", "zero"
    if tool == "shap":
        seg = segment_image(image, min(config.segments, image.height * image.width), seed)
        _, saliency = explain_shap(image, oracle, seg, cfg)
        if _flat(saliency.values):
            return None, "EmptyExplanation", "zero"
        mask = extract_minimal_mask(saliency, image, oracle, config.positive_label,
                                    config.extraction)
        return mask, "ok", "zero"
    if tool == "lime":
        seg = segment_image(image, min(config.segments, image.height * image.width), seed)
        _, _, mask = explain_lime(image, oracle, seg, cfg)
        return mask, "ok", "segment-mean"
    if tool == "rex":
        _, mask = explain_rex(image, oracle, cfg)
        return mask, "ok", "zero"
    raise InvalidParams(f"unknown tool {tool!r}")


def run(manifest: Manifest, config: RunConfig, oracle: Oracle | None = None) -> RunReport:
    """Every tool against every positive row; failures never stop the run."""
    oracle = oracle or make_oracle(config.oracle_spec)
    positives = [(i, row) for i, row in enumerate(manifest.rows)
                 if row.label == config.positive_label]
    skipped_negative = len(manifest.rows) - len(positives)

    false_negative_rows = set()
    loaded: dict[int, tuple[Image, BinaryMask]] = {}
    for i, row in positives:
        image = load_image(row.image_path)
        hpe = load_mask(row.hpe_path)
        loaded[i] = (image, hpe)
        if oracle.classify(image).label != config.positive_label:
            false_negative_rows.add(i)

    tool_ordinal = {t: j for j, t in enumerate(ALL_TOOLS)}
    tasks = []
    for pos_idx, (i, row) in enumerate(positives):
        for tool in config.tools:
            tasks.append((tool, pos_idx, i, row))

    def execute(task) -> RowResult:
        tool, pos_idx, i, row = task
        image, hpe = loaded[i]
        result = RowResult(tool=tool, row_index=i, image=row.image_path.name,
                           outcome="ok")
        if i in false_negative_rows:
            result.outcome = "FalseNegative"
            return result
        proxy = CountingProxy(oracle)
        seed = rng.child_seed(config.seed, rng.BENCH,
                              pos_idx * len(ALL_TOOLS) + tool_ordinal[tool])
        result.seed = seed
        started = time.perf_counter()
        try:
            mask, outcome, occ_kind = _run_tool(tool, image, proxy, seed, config)
            result.outcome = outcome
            result.occlusion = occ_kind
            if outcome == "ok":
                result.mask = mask
                result.breakdown = pdc(mask, hpe, config.pdc_params, config.connectivity)
            elif outcome == "EmptyExplanation":
                result.breakdown = PdcBreakdown(dc=0.0, d=0.0, r=0.0, pdc=0.0, count=0)
        except NoExplanation as exc:
            result.outcome, result.detail = "NoExplanation", str(exc)
        except OracleUnavailable as exc:
            result.outcome, result.detail = "OracleUnavailable", str(exc)
        except Exception as exc:  # a crashing tool becomes a report row, not a dead run
            result.outcome, result.detail = "ToolError", f"{type(exc).__name__}: {exc}"
        result.queries = proxy.query_count
        result.wall_seconds = time.perf_counter() - started
        return result

    if config.workers == 1:
        rows = [execute(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(execute, tasks))

    # fixed report order: manifest row, then canonical tool order
    rows.sort(key=lambda r: (r.row_index, tool_ordinal[r.tool]))
    return RunReport(config=config, rows=rows,
                     skipped_negative=skipped_negative,
                     false_negatives=len(false_negative_rows))


def write_report(report: RunReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "csv": out / "report.csv",
        "timings": out / "timings.csv",
    }
    paths["json"].write_bytes(report.to_json_bytes())
    paths["csv"].write_text(report.table_csv())
    paths["timings"].write_text(report.timings_csv())
    return paths


# --- synthetic dataset ---------------------------------------------------------

def synth_dataset(n: int, shape: tuple[int, int], blob_range: tuple[int, int],
                  seed: int, out_dir, label: str = DEFAULT_POSITIVE) -> Path:
    """Noise background (uniform [0, 0.3)) plus one bright axis-aligned
    rectangle (intensities in [0.85, 1]); the rectangle is the ground truth."""
    h, w = shape
    lo, hi = blob_range
    if n < 1 or lo < 1 or hi < lo or hi > min(h, w):
        raise InvalidParams("blob range must fit the image shape")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "mask", "label"])
        for i in range(n):
            gen = rng.stream(seed, rng.SYNTH_DATA, i)
            data = gen.random((h, w)) * 0.3
            bh = int(gen.integers(lo, hi + 1))
            bw = int(gen.integers(lo, hi + 1))
            r0 = int(gen.integers(0, h - bh + 1))
            c0 = int(gen.integers(0, w - bw + 1))
            data[r0:r0 + bh, c0:c0 + bw] = 0.85 + gen.random((bh, bw)) * 0.15
            bits = np.zeros((h, w), dtype=bool)
            bits[r0:r0 + bh, c0:c0 + bw] = True
            image_name, mask_name = f"img_{i:04d}.png", f"hpe_{i:04d}.png"
            save_image(Image(data[:, :, None]), out / image_name)
            save_mask(BinaryMask(bits), out / mask_name)
            writer.writerow([image_name, mask_name, label])
    return manifest_path


# --- overlay rendering -----------------------------------------------------------

_HPE_TINT = np.array([235, 120, 170], dtype=np.float64)      # pink: ground truth
_EXP_TINT = np.array([80, 130, 235], dtype=np.float64)       # blue: explanation
_BOTH_TINT = np.array([150, 70, 220], dtype=np.float64)      # purple: agreement


def render_overlay(image: Image, hpe: BinaryMask, exp: BinaryMask, out_png) -> Path:
    """Grayscale base with ground truth, explanation and their agreement tinted."""
    if hpe.shape != image.shape or exp.shape != image.shape:
        raise InvalidParams("overlay inputs must share one shape")
    gray = image.data.mean(axis=2)
    rgb = np.repeat((gray * 255.0)[:, :, None], 3, axis=2)
    both = hpe.bits & exp.bits
    for mask, tint in ((hpe.bits & ~both, _HPE_TINT),
                       (exp.bits & ~both, _EXP_TINT),
                       (both, _BOTH_TINT)):
        rgb[mask] = 0.45 * rgb[mask] + 0.55 * tint
    from PIL import Image as PilImage
    PilImage.fromarray(np.round(rgb).astype(np.uint8), mode="RGB").save(out_png, format="PNG")
    return Path(out_png)
