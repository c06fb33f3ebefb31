"""Unsupervised drift detection and the feature-set recompute pipeline.

Detection follows the student-teacher scheme: the predictor (teacher) is
trained on labelled samples, a second forest (student) is trained on the
same inputs but on the teacher's predictions, and the absolute gap between
their predictions is fed to a one-sided Page-Hinkley test. Labels are only
used when a model is (re)trained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import FeatureCatalog, SelectedFeatureSet, TraceWindow
from .errors import ContractError, RangeError, StreamExhaustedError
from .predictor import N_TREES, ForestModel, nmae, offline_eval, train_forest
from .search import OsfsConfig, OsfsResult, osfs_run

log = logging.getLogger(__name__)

PH_DELTA = 0.05
PH_LAMBDA = 50.0
PH_MIN_INSTANCES = 30
N_INIT = 1000

OFFLINE_TRAIN = "offline_train"
ONLINE_TRAIN = "online_train"
RETRAIN = "retrain"
RETRAIN_RECOMPUTE = "retrain_recompute"
MODES = (OFFLINE_TRAIN, ONLINE_TRAIN, RETRAIN, RETRAIN_RECOMPUTE)


@dataclass
class PageHinkleyState:
    """Page-Hinkley test for an increase in the mean of a stream.

    ``m`` accumulates ``x - mean - delta``; ``M`` is its running minimum
    (starting at 0). An alarm fires when ``m - M`` exceeds ``lam`` after at
    least ``min_instances`` values, and the state then starts over.
    """

    delta: float = PH_DELTA
    lam: float = PH_LAMBDA
    min_instances: int = PH_MIN_INSTANCES
    count: int = 0
    total: float = 0.0
    mean: float = 0.0
    m: float = 0.0
    M: float = 0.0

    def reset(self) -> None:
        self.count = 0
        self.total = 0.0
        self.mean = 0.0
        self.m = 0.0
        self.M = 0.0

    def fresh(self) -> "PageHinkleyState":
        return PageHinkleyState(self.delta, self.lam, self.min_instances)

    def update(self, value: float) -> bool:
        self.count += 1
        self.total += value
        self.mean = self.total / self.count
        self.m += value - self.mean - self.delta
        if self.m < self.M:
            self.M = self.m
        if self.count >= self.min_instances and self.m - self.M > self.lam:
            self.reset()
            return True
        return False


def page_hinkley_update(state: PageHinkleyState, value: float):
    """Feed one value; returns ``(state, alarm)``. The state is updated in place."""
    alarm = state.update(float(value))
    return state, alarm


def page_hinkley_replay(values, delta: float = PH_DELTA, lam: float = PH_LAMBDA,
                        min_instances: int = PH_MIN_INSTANCES) -> np.ndarray:
    """Alarm flags for a whole sequence, evaluated with array operations.

    Independent of :class:`PageHinkleyState`; after each alarm the
    recursion restarts from the next value.
    """
    x = np.asarray(values, dtype=float).ravel()
    alarms = np.zeros(x.shape[0], dtype=bool)
    start = 0
    while start < x.shape[0]:
        seg = x[start:]
        count = np.arange(1, seg.shape[0] + 1)
        mean = np.cumsum(seg) / count
        m = np.cumsum(seg - mean - delta)
        M = np.minimum.accumulate(np.minimum(m, 0.0))
        hit = np.flatnonzero((count >= min_instances) & (m - M > lam))
        if hit.size == 0:
            break
        alarms[start + hit[0]] = True
        start += hit[0] + 1
    return alarms


@dataclass
class DriftDetector:
    teacher: ForestModel
    student: ForestModel
    ph: PageHinkleyState = field(default_factory=PageHinkleyState)
    n_init: int = N_INIT

    @property
    def features(self) -> tuple:
        return self.teacher.features

    def discrepancy(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.abs(self.teacher.predict(X) - self.student.predict(X))

    def observe(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ContractError("observe takes a single sample; use scan for batches")
        d = abs(self.teacher.predict(x) - self.student.predict(x))
        return self.ph.update(d)

    def scan(self, X) -> Optional[int]:
        """Observe rows of ``X`` in order; index of the first alarm or ``None``.

        Rows after the alarm are not consumed. Equivalent to calling
        :meth:`observe` row by row, but predicts in one batch.
        """
        for i, d in enumerate(self.discrepancy(X)):
            if self.ph.update(float(d)):
                return i
        return None


def train_teacher_student(window: TraceWindow, features, n_init: int = N_INIT, seed=0,
                          n_trees: int = N_TREES, ph: Optional[PageHinkleyState] = None
                          ) -> DriftDetector:
    """Teacher on ``(X, y)`` of the first ``n_init`` rows; student on ``(X, teacher(X))``."""
    if not 1 <= n_init <= window.t:
        raise RangeError(f"n_init={n_init} needs 1 <= n_init <= {window.t}")
    init = window.prefix(n_init)
    teacher = train_forest(init, features, seed=seed, n_trees=n_trees)
    return _detector_for(teacher, init, n_init, seed, n_trees, ph)


def _detector_for(teacher: ForestModel, init: TraceWindow, n_init: int, seed, n_trees,
                  ph: Optional[PageHinkleyState]) -> DriftDetector:
    X = init.columns(teacher.features)
    # The student never sees a true label: its targets are the teacher's outputs.
    pseudo = TraceWindow(FeatureCatalog(teacher.features), X, teacher.predict(X))
    student = train_forest(pseudo, teacher.features, seed=seed + 1, n_trees=n_trees)
    ph = ph.fresh() if ph is not None else PageHinkleyState()
    return DriftDetector(teacher, student, ph, n_init)


def observe(detector: DriftDetector, x):
    return detector, detector.observe(x)


@dataclass(frozen=True)
class DriftEvent:
    t_detect: int
    t_featureset_ready: int
    t_model_ready: int
    feature_set: SelectedFeatureSet
    model_id: int

    def to_dict(self) -> dict:
        return {
            "t_detect": self.t_detect,
            "t_featureset_ready": self.t_featureset_ready,
            "t_model_ready": self.t_model_ready,
            "k": self.feature_set.k,
            "features": sorted(self.feature_set.members),
            "model_id": self.model_id,
        }


@dataclass
class Segment:
    """Rows ``[start, stop)`` (0-based) predicted by one model."""

    start: int
    stop: int
    model_id: int
    features: tuple
    nmae: Optional[float] = None


@dataclass
class DriftTimeline:
    mode: str
    events: list = field(default_factory=list)
    segments: list = field(default_factory=list)
    predictions: Optional[np.ndarray] = None
    targets: Optional[np.ndarray] = None
    truncated: bool = False
    # Offline-train mode reports a single held-out error instead of predictions.
    offline_nmae: Optional[float] = None
    initial: Optional[OsfsResult] = None

    @property
    def changes(self) -> int:
        return len(self.events)

    def nmae(self, start: int = 0, stop: Optional[int] = None) -> float:
        """NMAE over predicted rows in ``[start, stop)`` (0-based row indices)."""
        if self.offline_nmae is not None:
            return self.offline_nmae
        stop = len(self.targets) if stop is None else stop
        yhat = self.predictions[start:stop]
        y = self.targets[start:stop]
        ok = ~np.isnan(yhat)
        if not ok.any():
            raise RangeError(f"no predictions in rows [{start}, {stop})")
        return nmae(y[ok], yhat[ok])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "nmae": self.nmae(),
            "changes": self.changes,
            "truncated": self.truncated,
            "events": [e.to_dict() for e in self.events],
            "segments": [
                {"start": s.start, "stop": s.stop, "model_id": s.model_id,
                 "k": len(s.features), "nmae": s.nmae}
                for s in self.segments
            ],
        }


def _select(window: TraceWindow, start: int, cfg: OsfsConfig):
    """Run the search on rows from ``start``; ``None`` if the stream runs out."""
    try:
        return osfs_run(window.slice(start), cfg)
    except StreamExhaustedError:
        return None


def drift_pipeline(window: TraceWindow, osfs_cfg: Optional[OsfsConfig] = None,
                   n_init: int = N_INIT, mode: str = RETRAIN_RECOMPUTE, seed=0,
                   n_trees: int = N_TREES, ph: Optional[PageHinkleyState] = None,
                   initial: Optional[OsfsResult] = None) -> DriftTimeline:
    """Replay ``window`` as a stream under one adaptation ``mode``.

    The search runs on the first rows to give ``F0``. A model (the teacher)
    and its student are trained on the first ``max(samples read, n_init)``
    rows with ``F0``; from then on every row is predicted and monitored. On
    an alarm, ``online_train`` changes nothing, ``retrain`` refits on the
    next ``n_init`` rows with the same features, and ``retrain_recompute``
    first reruns the search on rows after the alarm and refits on
    ``max(samples read, n_init)`` rows with the new set. Until the new model
    is ready the stale one keeps predicting.
    """
    if mode not in MODES:
        raise ContractError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not window.has_targets:
        raise ContractError("the drift pipeline needs a labelled stream")
    osfs_cfg = osfs_cfg or OsfsConfig()
    ph = ph or PageHinkleyState()
    T = window.t
    timeline = DriftTimeline(mode, targets=np.asarray(window.y, dtype=float).copy())
    first = initial or _select(window, 0, osfs_cfg)
    if first is None:
        raise StreamExhaustedError("stream too short for the initial feature set")
    timeline.initial = first
    fset = first.feature_set

    if mode == OFFLINE_TRAIN:
        report = offline_eval(window, fset, seed=seed, n_trees=n_trees)
        timeline.offline_nmae = report.nmae
        timeline.segments.append(Segment(0, T, 0, tuple(fset.ordered(window.catalog)), report.nmae))
        return timeline

    preds = np.full(T, np.nan)
    timeline.predictions = preds
    model_id = 0
    train_len = max(first.samples_read, n_init)
    if train_len >= T:
        timeline.truncated = True
        return timeline
    detector = _train(window, 0, train_len, fset, seed, n_trees, ph)
    pos = train_len
    seg_start = pos
    while pos < T:
        X = window.X[pos:][:, window.catalog.indices(detector.features)]
        yhat = detector.teacher.predict(X)
        hit = detector.scan(X)
        if hit is None:
            preds[pos:] = yhat
            break
        preds[pos:pos + hit + 1] = yhat[:hit + 1]
        t1 = pos + hit + 1  # first row after the alarm
        log.info("%s: drift detected at t=%d", mode, t1)
        if mode == ONLINE_TRAIN or t1 >= T:
            timeline.events.append(DriftEvent(t1, t1, t1, fset, model_id))
            pos = t1
            continue
        if mode == RETRAIN:
            new_set, read = fset, 0
        else:
            res = _select(window, t1, osfs_cfg)
            if res is None:
                new_set, read = None, T - t1
            else:
                new_set, read = res.feature_set, res.samples_read
        L = max(read, n_init)
        if new_set is None or t1 + L >= T:
            # Not enough stream left to recompute and retrain; keep the stale model.
            preds[t1:] = yhat[hit + 1:]
            timeline.truncated = True
            timeline.events.append(DriftEvent(t1, min(t1 + read, T), T, fset, model_id))
            break
        preds[t1:t1 + L] = yhat[hit + 1:hit + 1 + L]
        timeline.segments.append(_segment(seg_start, t1 + L, model_id, detector, timeline))
        model_id += 1
        fset = new_set
        detector = _train(window, t1, t1 + L, fset, seed + model_id, n_trees, ph)
        timeline.events.append(DriftEvent(t1, t1 + read, t1 + L, fset, model_id))
        pos = seg_start = t1 + L
    timeline.segments.append(_segment(seg_start, T, model_id, detector, timeline))
    return timeline


def _train(window: TraceWindow, start: int, stop: int, fset: SelectedFeatureSet, seed,
           n_trees: int, ph: PageHinkleyState) -> DriftDetector:
    init = window.slice(start, stop)
    teacher = train_forest(init, fset, seed=seed, n_trees=n_trees)
    return _detector_for(teacher, init, stop - start, seed, n_trees, ph)


def _segment(start, stop, model_id, detector, timeline) -> Segment:
    seg = Segment(start, stop, model_id, detector.features)
    yhat = timeline.predictions[start:stop]
    ok = ~np.isnan(yhat)
    if ok.any():
        seg.nmae = nmae(timeline.targets[start:stop][ok], yhat[ok])
    return seg


def compare_modes(window: TraceWindow, osfs_cfg: Optional[OsfsConfig] = None,
                  n_init: int = N_INIT, modes=MODES, seed=0, n_trees: int = N_TREES,
                  ph: Optional[PageHinkleyState] = None) -> dict:
    """Run several modes sharing one initial feature set; ``{mode: DriftTimeline}``."""
    osfs_cfg = osfs_cfg or OsfsConfig()
    initial = _select(window, 0, osfs_cfg)
    if initial is None:
        raise StreamExhaustedError("stream too short for the initial feature set")
    return {
        mode: drift_pipeline(window, osfs_cfg, n_init, mode, seed, n_trees, ph, initial)
        for mode in modes
    }
