"""The black-box classifier boundary.

An Oracle is anything that maps an Image to a (label, confidence)
Prediction deterministically.  The toolkit ships a synthetic
bright-window oracle for desk-scale work and a wire-protocol client
(mrxai.wire) for external models; explainers only ever see this
interface.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .imaging import Image

DEFAULT_POSITIVE = "tumor"
DEFAULT_NEGATIVE = "no_tumor"


@dataclass(frozen=True)
class Prediction:
    """Classifier verdict: top label, its confidence, optional full scores."""

    label: str
    confidence: float
    scores: dict[str, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidParams(f"confidence {self.confidence} outside [0, 1]")
        if self.scores is not None:
            best = max(self.scores.values())
            winner = min(lbl for lbl, v in self.scores.items() if v == best)
            if self.label != winner:
                raise InvalidParams(
                    f"label {self.label!r} is not the argmax of scores ({winner!r})")
            if self.scores[self.label] != self.confidence:
                raise InvalidParams("confidence must equal scores[label]")


def target_confidence(pred: Prediction, target: str) -> float:
    """Confidence the oracle assigns to `target`.

    Uses the full score map when present.  Without one, the predicted
    label's confidence is used directly, and any other target gets the
    binary complement 1 - confidence (exact for two-class oracles, an
    upper bound otherwise).
    """
    if pred.scores is not None:
        return float(pred.scores.get(target, 0.0))
    if pred.label == target:
        return float(pred.confidence)
    return float(1.0 - pred.confidence)


class Oracle:
    """Base class: subclasses implement _classify; query counting is built in.

    query_count updates atomically so concurrent workers can share one
    oracle; results never depend on call interleaving because _classify
    must be a pure function of the image.
    """

    def __init__(self):
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    def classify(self, image: Image) -> Prediction:
        with self._count_lock:
            self._count += 1
        return self._classify(image)

    def classify_batch(self, images) -> list[Prediction]:
        """Element-wise classify; a failure aborts with the failing index attached."""
        out = []
        for i, img in enumerate(images):
            try:
                out.append(self.classify(img))
            except Exception as exc:
                exc.batch_index = i
                raise
        return out

    def _classify(self, image: Image) -> Prediction:
        raise NotImplementedError


@dataclass(frozen=True)
class BlobOracleParams:
    window: int = 16
    tau: float = 0.8
    positive_label: str = DEFAULT_POSITIVE
    negative_label: str = DEFAULT_NEGATIVE

    def __post_init__(self):
        if self.window < 1:
            raise InvalidParams("window must be >= 1")
        if not np.isfinite(self.tau):
            raise InvalidParams("tau must be finite")
        if self.positive_label == self.negative_label:
            raise InvalidParams("labels must differ")


class BlobOracle(Oracle):
    """Synthetic classifier: positive iff some window x window mean is bright.

    The channel-averaged image is scanned with a sliding window; the
    prediction is positive when the brightest window mean reaches tau.
    Confidence is that mean (clamped to [0, 1]) rather than a 0/1 step,
    so perturbation explainers see a smooth signal.  No score map is
    attached: with tau != 0.5 the label is deliberately not the argmax
    of {m, 1-m}.
    """

    def __init__(self, params: BlobOracleParams = BlobOracleParams()):
        super().__init__()
        self.params = params

    def max_window_mean(self, image: Image) -> float:
        w = self.params.window
        if w > min(image.height, image.width):
            raise InvalidParams(
                f"window {w} exceeds image side {min(image.height, image.width)}")
        gray = image.data.mean(axis=2)
        sat = np.zeros((gray.shape[0] + 1, gray.shape[1] + 1))
        sat[1:, 1:] = gray.cumsum(axis=0).cumsum(axis=1)
        sums = sat[w:, w:] - sat[:-w, w:] - sat[w:, :-w] + sat[:-w, :-w]
        return float(sums.max() / (w * w))

    def _classify(self, image: Image) -> Prediction:
        m = min(max(self.max_window_mean(image), 0.0), 1.0)
        if m >= self.params.tau:
            return Prediction(self.params.positive_label, m)
        return Prediction(self.params.negative_label, 1.0 - m)


class ConstantOracle(Oracle):
    """Returns the same prediction for every image; for tests and calibration."""

    def __init__(self, label: str, confidence: float, scores: dict[str, float] | None = None):
        super().__init__()
        self._pred = Prediction(label, confidence, scores)

    def _classify(self, image: Image) -> Prediction:
        return self._pred


class CountingProxy(Oracle):
    """Forwards to another oracle while keeping its own query counter.

    Lets the harness meter one (tool, image) task even when many tasks
    share a single external connection.
    """

    def __init__(self, inner: Oracle):
        super().__init__()
        self.inner = inner

    def _classify(self, image: Image) -> Prediction:
        return self.inner.classify(image)


def make_oracle(spec: str) -> Oracle:
    """Build an oracle from a spec string.

    "blob:<window>:<tau>"  in-process synthetic oracle
    "tcp:<host>:<port>"    wire-protocol client over a TCP socket
    "cmd:<program ...>"    wire-protocol client over a child process's stdio
    """
    kind, _, rest = spec.partition(":")
    if kind == "blob":
        try:
            window_s, _, tau_s = rest.partition(":")
            return BlobOracle(BlobOracleParams(window=int(window_s), tau=float(tau_s)))
        except ValueError as exc:
            raise InvalidParams(f"bad blob oracle spec {spec!r}: {exc}") from exc
    if kind == "tcp":
        from .wire import WireOracle
        host, _, port_s = rest.partition(":")
        try:
            port = int(port_s)
        except ValueError as exc:
            raise InvalidParams(f"bad tcp oracle spec {spec!r}") from exc
        return WireOracle.connect_tcp(host, port)
    if kind == "cmd":
        from .wire import WireOracle
        if not rest.strip():
            raise InvalidParams("cmd oracle spec needs a program")
        return WireOracle.spawn(rest)
    raise InvalidParams(f"unknown oracle spec {spec!r} (want blob:/tcp:/cmd:)")
