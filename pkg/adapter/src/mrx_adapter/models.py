"""Model loading for the adapter.

A model is anything with a label list and predict(pixels) -> scores,
where pixels is an (H, W, C) float array in [0, 1] and scores is one
probability per label.  Three backends:

  *.json  stub models for tests and protocol work ("constant" scores or
          a "brightest-window" thresholdless toy classifier)
  *.pt / *.pth / *.torchscript  a TorchScript or pickled torch module;
          the forward pass gets an NCHW float tensor and its output is
          softmaxed into probabilities (torch required, labels mandatory)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class ModelError(Exception):
    pass


class ConstantModel:
    def __init__(self, scores: dict[str, float]):
        if len(scores) < 2:
            raise ModelError("need at least 2 labels")
        self.labels = list(scores)
        self._scores = {str(k): float(v) for k, v in scores.items()}

    def predict(self, pixels: np.ndarray) -> dict[str, float]:
        return dict(self._scores)


class BrightestWindowModel:
    """Toy two-class model: score of the positive label is the best
    window-mean intensity in the image (channel-averaged)."""

    def __init__(self, window: int, labels: list[str]):
        if window < 1:
            raise ModelError("window must be >= 1")
        if len(labels) != 2:
            raise ModelError("brightest-window model is two-class")
        self.window = window
        self.labels = [str(l) for l in labels]  # [negative, positive]

    def predict(self, pixels: np.ndarray) -> dict[str, float]:
        gray = pixels.mean(axis=2)
        w = min(self.window, *gray.shape)
        sat = np.zeros((gray.shape[0] + 1, gray.shape[1] + 1))
        sat[1:, 1:] = gray.cumsum(axis=0).cumsum(axis=1)
        sums = sat[w:, w:] - sat[:-w, w:] - sat[w:, :-w] + sat[:-w, :-w]
        m = float(np.clip(sums.max() / (w * w), 0.0, 1.0))
        return {self.labels[0]: 1.0 - m, self.labels[1]: m}


class TorchModel:
    def __init__(self, path: Path, labels: list[str], device: str):
        try:
            import torch
        except ImportError as exc:
            raise ModelError("torch is not installed; cannot load a torch checkpoint") from exc
        if len(labels) < 2:
            raise ModelError("torch models need --labels with at least 2 names")
        self._torch = torch
        self.labels = list(labels)
        self.device = device
        try:
            self._net = torch.jit.load(str(path), map_location=device)
        except Exception:
            self._net = torch.load(str(path), map_location=device, weights_only=False)
        self._net.eval()

    def predict(self, pixels: np.ndarray) -> dict[str, float]:
        torch = self._torch
        with torch.no_grad():
            batch = torch.from_numpy(
                np.ascontiguousarray(pixels.transpose(2, 0, 1))[None].astype(np.float32))
            logits = self._net(batch.to(self.device))
            probs = torch.softmax(logits.reshape(-1), dim=0).cpu().numpy()
        if len(probs) != len(self.labels):
            raise ModelError(f"model emits {len(probs)} scores for {len(self.labels)} labels")
        return {lbl: float(p) for lbl, p in zip(self.labels, probs)}


def load_model(path, labels: list[str] | None = None, device: str = "cpu"):
    path = Path(path)
    if not path.exists():
        raise ModelError(f"model file {path} does not exist")
    if path.suffix == ".json":
        spec = json.loads(path.read_text())
        kind = spec.get("kind")
        if kind == "constant":
            return ConstantModel(spec["scores"])
        if kind == "brightest-window":
            return BrightestWindowModel(int(spec.get("window", 8)),
                                        spec.get("labels", ["no_tumor", "tumor"]))
        raise ModelError(f"unknown stub model kind {kind!r}")
    return TorchModel(path, labels or [], device)
