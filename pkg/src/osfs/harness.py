"""Trace I/O, synthetic traces, multi-start scenarios and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core import FeatureCatalog, TraceWindow
from .errors import ContractError, StreamExhaustedError, TraceFormatError
from .predictor import N_TREES, offline_eval
from .preprocess import preprocess
from .ranking import RankerConfig, rank, top_k
from .search import OsfsConfig, osfs_run

log = logging.getLogger(__name__)

DEFAULT_TARGET = "target"
REPORT_COLUMNS = (
    "dataset", "method", "metric", "search",
    "k_mean", "k_std", "t_k_mean", "t_k_std",
    "online_error_mean", "online_error_std",
    "offline_error_mean", "offline_error_std",
    "runs",
)


# --------------------------------------------------------------------------
# trace files


def load_trace(path, target_name: Optional[str] = DEFAULT_TARGET, delimiter: str = ",") -> TraceWindow:
    """Read a delimited trace: header row of names, numeric cells, empty = missing.

    ``target_name`` is removed from the catalog and becomes the window's
    targets; pass ``None`` for an unlabelled trace.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise TraceFormatError(
                    f"{path}:{lineno}: {len(row)} cells, header has {len(header)}"
                )
            try:
                rows.append([float(c) if c.strip() else math.nan for c in row])
            except ValueError:
                bad = next(c for c in row if c.strip() and not _is_float(c))
                raise TraceFormatError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if target_name is None:
        return TraceWindow(FeatureCatalog(tuple(header)), data)
    if target_name not in header:
        raise TraceFormatError(f"{path}: no target column {target_name!r}")
    j = header.index(target_name)
    names = header[:j] + header[j + 1:]
    return TraceWindow(FeatureCatalog(tuple(names)), np.delete(data, j, axis=1), data[:, j])


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _cell(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_trace(window: TraceWindow, path, target_name: str = DEFAULT_TARGET,
                delimiter: str = ",") -> None:
    """Write ``window`` so that :func:`load_trace` reads it back bit-exactly."""
    y = window.y
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        header = list(window.catalog.names) + ([target_name] if y is not None else [])
        w.writerow(header)
        for i, row in enumerate(window.X):
            cells = [_cell(v) for v in row]
            if y is not None:
                cells.append(_cell(y[i]))
            w.writerow(cells)


# --------------------------------------------------------------------------
# synthetic traces


@dataclass(frozen=True)
class InformativeSpec:
    """How the target depends on a few features.

    Each informative feature is a noisy, rescaled copy of a shared load
    signal; the target is ``offset + scale * sum(w_j * x_j)`` (or the squares
    of the ``x_j`` for ``function='quadratic'``) plus Gaussian noise. ``scale``
    sets the target's units; drift detection thresholds are absolute, so
    it matters for how quickly a change in the target mapping is flagged.
    Feature noise
    grows with the feature's position, so the informative features are
    clearly ordered by how well they track the load.
    """

    n_informative: int = 8
    function: str = "linear"
    weights: Optional[tuple] = None
    feature_noise: float = 0.05
    target_noise: float = 0.0
    offset: float = 0.0
    scale: float = 10.0

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n_informative)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n_informative,):
            raise ContractError("one weight per informative feature is required")
        return w


@dataclass
class SyntheticTrace:
    window: TraceWindow
    informative: tuple
    informative_after: tuple = ()
    drift_at: Optional[int] = None


def _load_signal(rng: np.random.Generator, t_len: int) -> np.ndarray:
    t = np.arange(t_len)
    periods = rng.uniform(60, 400, size=2)
    phases = rng.uniform(0, 2 * np.pi, size=2)
    ar = np.empty(t_len)
    ar[0] = rng.normal()
    eps = rng.normal(size=t_len) * math.sqrt(1 - 0.95 ** 2)
    for i in range(1, t_len):
        ar[i] = 0.95 * ar[i - 1] + eps[i]
    return (0.5 + 0.25 * np.sin(2 * np.pi * t / periods[0] + phases[0])
            + 0.15 * np.sin(2 * np.pi * t / periods[1] + phases[1]) + 0.08 * ar)


def synth_trace(n_noise: int = 500, informative_spec: Optional[InformativeSpec] = None,
                t_len: int = 4000, drift_at: Optional[int] = None, seed=0) -> SyntheticTrace:
    """Telemetry-like trace with a known informative subset.

    With ``drift_at`` set, the informative features turn into unrelated
    noise from that row on, and an equally sized group of former noise
    features starts tracking the load and drives the target instead.
    """
    spec = informative_spec or InformativeSpec()
    m = spec.n_informative
    if drift_at is not None and not 0 < drift_at < t_len:
        raise ContractError("drift_at must fall inside the trace")
    if drift_at is not None and n_noise < m:
        raise ContractError("a drifting trace needs at least n_informative noise features")
    rng = np.random.default_rng(seed)
    n = m + n_noise
    z = _load_signal(rng, t_len)
    X = np.empty((t_len, n))
    gains = rng.uniform(0.5, 2.0, size=n)
    levels = rng.uniform(0.0, 5.0, size=n)
    sigma = spec.feature_noise * (1 + np.arange(m)) / m
    noise_sd = rng.uniform(0.2, 1.0, size=n)

    def tracking(cols, rows, sig):
        return (gains[cols] * z[rows, None] + levels[cols]
                + sig * gains[cols] * rng.normal(size=(len(rows), len(cols))))

    def unrelated(cols, rows):
        return levels[cols] + noise_sd[cols] * rng.normal(size=(len(rows), len(cols)))

    before = np.arange(m)
    after = np.arange(m, 2 * m) if drift_at is not None else before
    rows_all = np.arange(t_len)
    X[:, m:] = unrelated(np.arange(m, n), rows_all)
    cut = drift_at if drift_at is not None else t_len
    X[:cut, :m] = tracking(before, rows_all[:cut], sigma)
    if drift_at is not None:
        # Keep each feature's marginal level roughly unchanged across the switch.
        pre_mean, pre_sd = X[:cut, :m].mean(axis=0), X[:cut, :m].std(axis=0)
        X[cut:, :m] = pre_mean + pre_sd * rng.normal(size=(t_len - cut, m))
        X[cut:, after] = tracking(after, rows_all[cut:], sigma)

    w = spec.weight_vector()

    def response(block):
        if spec.function == "quadratic":
            return spec.scale * ((block ** 2) @ w)
        if spec.function != "linear":
            raise ContractError(f"unknown target function {spec.function!r}")
        return spec.scale * (block @ w)

    y = np.empty(t_len)
    y[:cut] = spec.offset + response(X[:cut, before])
    if drift_at is not None:
        y[cut:] = spec.offset + response(X[cut:, after])
    if spec.target_noise > 0:
        y += spec.target_noise * rng.normal(size=t_len)
    names = tuple(f"m{j:04d}" for j in range(n))
    window = TraceWindow(FeatureCatalog(names), X, y)
    return SyntheticTrace(
        window,
        tuple(names[j] for j in before),
        tuple(names[j] for j in after) if drift_at is not None else (),
        drift_at,
    )


# --------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    trace: Optional[str] = None
    target: str = DEFAULT_TARGET
    ranker: str = "ls"
    condition: str = "similarity"
    policy: str = "k_small"
    start_points: Optional[Sequence[int]] = None
    seed: int = 0
    dataset: str = ""
    n_trees: int = N_TREES
    max_start: int = 10000
    clean: bool = True

    def osfs_config(self) -> OsfsConfig:
        return OsfsConfig(RankerConfig(kind=self.ranker), self.condition, self.policy)

    def draw_start_points(self) -> list:
        if self.start_points:
            return [int(s) for s in self.start_points]
        rng = np.random.default_rng(self.seed)
        return [1] + [int(s) for s in rng.integers(2, self.max_start + 1, size=9)]


@dataclass
class RunResult:
    start: int
    k: Optional[int] = None
    t_k: Optional[int] = None
    online_fs_error: Optional[float] = None
    offline_fs_error: Optional[float] = None
    skipped: bool = False
    note: str = ""
    features: tuple = ()


def _mean_std(values) -> tuple:
    if not values:
        return (math.nan, math.nan)
    a = np.asarray(values, dtype=float)
    return (float(a.mean()), float(a.std()))


@dataclass
class ScenarioReport:
    dataset: str
    method: str
    metric: str
    search: str
    runs: List[RunResult] = field(default_factory=list)

    @property
    def completed(self) -> list:
        return [r for r in self.runs if not r.skipped]

    def aggregate(self, attr: str) -> tuple:
        """Mean and population standard deviation over completed runs."""
        return _mean_std([getattr(r, attr) for r in self.completed])

    def row(self) -> dict:
        k, tk = self.aggregate("k"), self.aggregate("t_k")
        on, off = self.aggregate("online_fs_error"), self.aggregate("offline_fs_error")
        return dict(zip(REPORT_COLUMNS, (
            self.dataset, self.method, self.metric, self.search,
            k[0], k[1], tk[0], tk[1], on[0], on[1], off[0], off[1], len(self.completed),
        )))


def run_scenario(s: Scenario, window: Optional[TraceWindow] = None) -> ScenarioReport:
    """Ten-start evaluation of one (ranker, condition, policy) triple.

    For each start point the search runs on the trace from that row; the
    resulting set is scored with a random 70/30 split of the whole trace
    (online FS error) and compared against the same-size top-k of a ranking
    over the whole trace, scored on the identical split (offline FS error).
    """
    if window is None:
        if s.trace is None:
            raise ContractError("scenario needs a trace path or a window")
        window = load_trace(s.trace, s.target)
    if s.clean:
        window, _ = preprocess(window)
    cfg = s.osfs_config()
    report = ScenarioReport(
        s.dataset or (Path(s.trace).stem if s.trace else "trace"),
        cfg.ranker.kind.upper(), cfg.condition, cfg.policy,
    )
    full_rank = None
    horizon = cfg.space.t_max
    for i, start in enumerate(s.draw_start_points()):
        run = RunResult(start)
        report.runs.append(run)
        if start < 1 or start - 1 + horizon > window.t:
            run.skipped, run.note = True, "search window exceeds trace"
            continue
        try:
            res = osfs_run(window.slice(start - 1), cfg)
        except StreamExhaustedError as exc:
            run.skipped, run.note = True, str(exc)
            continue
        run.k, run.t_k = res.k, res.t_k
        run.features = tuple(sorted(res.feature_set.members))
        split_seed = s.seed * 1000 + i
        run.online_fs_error = offline_eval(
            window, res.feature_set, seed=split_seed, n_trees=s.n_trees).nmae
        if full_rank is None:
            full_rank = rank(window, cfg.ranker)
        run.offline_fs_error = offline_eval(
            window, top_k(full_rank, res.k), seed=split_seed, n_trees=s.n_trees).nmae
        log.info("start %d: k=%d t_k=%d online=%.4f offline=%.4f", start, run.k, run.t_k,
                 run.online_fs_error, run.offline_fs_error)
    return report


# --------------------------------------------------------------------------
# reports


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def render_report(reports: Sequence[ScenarioReport], fmt: str = "csv") -> str:
    """Serialize one row per configuration; ``fmt`` is ``csv`` or ``json``."""
    rows = [r.row() for r in reports]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        records = []
        for rep, row in zip(reports, rows):
            rec = {c: (None if isinstance(row[c], float) and math.isnan(row[c]) else row[c])
                   for c in REPORT_COLUMNS}
            rec["per_run"] = [asdict(r) for r in rep.runs]
            records.append(rec)
        return json.dumps(records, indent=2, sort_keys=False) + "\n"
    raise ContractError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")


def emit_report(reports, path, fmt: str = "csv") -> Path:
    if isinstance(reports, ScenarioReport):
        reports = [reports]
    text = render_report(list(reports), fmt)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def read_report(path, fmt: str = "csv") -> list:
    """Parse a report written by :func:`emit_report` back into row dicts."""
    with open(path, newline="") as fh:
        if fmt == "json":
            return json.load(fh)
        rows = list(csv.DictReader(fh))
    numeric = set(REPORT_COLUMNS[4:])
    out = []
    for row in rows:
        rec = {}
        for c in REPORT_COLUMNS:
            v = row[c]
            if c in numeric:
                rec[c] = math.nan if v == "" else (int(v) if c == "runs" else float(v))
            else:
                rec[c] = v
        out.append(rec)
    return out
