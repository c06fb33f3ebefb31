"""Domain types shared by every module: catalog, samples, windows, feature sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import (
    CatalogError,
    ContractError,
    RangeError,
    SequencingError,
    ShapeError,
)


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered, fixed list of feature identifiers.

    The position of a name is its feature index ``j``; it never changes for
    the life of a run.
    """

    names: tuple

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ContractError("a feature catalog needs at least one feature")
        if len(set(names)) != len(names):
            raise ContractError("feature names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def n(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CatalogError(f"unknown feature {name!r}") from None

    def indices(self, names: Iterable[str]) -> np.ndarray:
        return np.array([self.index(n) for n in names], dtype=np.intp)

    def subset(self, names: Iterable[str]) -> "FeatureCatalog":
        """Catalog restricted to ``names``, kept in catalog order."""
        wanted = set(names)
        for name in wanted:
            self.index(name)
        return FeatureCatalog(tuple(n for n in self.names if n in wanted))


@dataclass(frozen=True)
class Sample:
    """One reading of all features at time ``t`` (1-based)."""

    t: int
    values: np.ndarray
    target: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())


@dataclass(frozen=True)
class SelectedFeatureSet:
    """A top-k feature set together with the number of samples it was computed from."""

    members: frozenset
    t: int

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))

    @property
    def k(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, name):
        return name in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def ordered(self, catalog: FeatureCatalog) -> list:
        """Members sorted by catalog index."""
        return sorted(self.members, key=catalog.index)


@dataclass(frozen=True, order=True)
class GridPoint:
    k: int
    t: int

    def __post_init__(self):
        if self.k < 1:
            raise ContractError(f"grid point needs k >= 1, got {self.k}")
        if self.t < 2:
            raise ContractError(f"grid point needs t >= 2, got {self.t}")


DEFAULT_K_VALUES = (4, 16, 64, 256)
DEFAULT_T_CHECKPOINTS = (8, 16, 32, 64, 128, 256, 512, 1024)
# Frequency-condition schedule: a feature set every 10 samples from 100 to 1000.
FREQUENCY_T_CHECKPOINTS = tuple(range(100, 1001, 10))


@dataclass(frozen=True)
class SearchSpace:
    """Grid of candidate subset sizes and sample-count checkpoints."""

    k_values: tuple = DEFAULT_K_VALUES
    t_checkpoints: tuple = DEFAULT_T_CHECKPOINTS

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        ts = tuple(int(t) for t in self.t_checkpoints)
        if not ks or not ts:
            raise ContractError("search space must be nonempty")
        if any(b <= a for a, b in zip(ks, ks[1:])) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ContractError("k_values and t_checkpoints must be strictly increasing")
        if ks[0] < 1 or ts[0] < 2:
            raise ContractError("k values must be >= 1 and checkpoints >= 2")
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "t_checkpoints", ts)

    def __contains__(self, point):
        return point.k in self.k_values and point.t in self.t_checkpoints

    def clipped(self, n: int) -> "SearchSpace":
        """Replace k values above ``n`` by ``n`` so small catalogs stay searchable."""
        ks = sorted({min(k, n) for k in self.k_values})
        return SearchSpace(tuple(ks), self.t_checkpoints)

    @property
    def t_max(self) -> int:
        return self.t_checkpoints[-1]


class TraceWindow:
    """Growing matrix of samples over a fixed catalog.

    Rows are stored in arrival order in an over-allocated buffer, so appending
    is amortized O(n). Missing readings are NaN. Targets are optional; a
    window either has a target for every row or carries none.
    """

    def __init__(self, catalog: FeatureCatalog, values=None, targets=None):
        self.catalog = catalog
        if values is None:
            values = np.empty((0, catalog.n))
        values = np.array(values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[1] != catalog.n:
            raise ShapeError(
                f"values must have shape (t, {catalog.n}), got {values.shape}"
            )
        self._buf = values
        self._t = values.shape[0]
        if targets is not None:
            targets = np.array(targets, dtype=float, copy=True).ravel()
            if targets.shape[0] != self._t:
                raise ShapeError("targets length does not match the number of rows")
        self._targets = targets
        # An empty window accepts targets on the first append.
        self._target_mode = None if self._t == 0 else (targets is not None)

    @classmethod
    def from_array(cls, X, names: Optional[Sequence[str]] = None, y=None) -> "TraceWindow":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError("expected a 2-D sample matrix")
        if names is None:
            names = [f"f{j}" for j in range(X.shape[1])]
        return cls(FeatureCatalog(tuple(names)), X, y)

    @property
    def t(self) -> int:
        return self._t

    @property
    def n(self) -> int:
        return self.catalog.n

    def __len__(self):
        return self._t

    @property
    def X(self) -> np.ndarray:
        """Read-only view of the ``t x n`` sample matrix."""
        view = self._buf[: self._t]
        view.flags.writeable = False
        return view

    @property
    def y(self) -> Optional[np.ndarray]:
        if not self._target_mode:
            return None
        view = self._targets[: self._t]
        view.flags.writeable = False
        return view

    @property
    def has_targets(self) -> bool:
        return bool(self._target_mode) and self._t > 0 and not np.isnan(self.y).any()

    def column(self, feature) -> np.ndarray:
        j = feature if isinstance(feature, (int, np.integer)) else self.catalog.index(feature)
        return self.X[:, j]

    def columns(self, names: Iterable[str]) -> np.ndarray:
        return self.X[:, self.catalog.indices(names)]

    def append(self, sample: Sample) -> "TraceWindow":
        values = sample.values
        if values.shape[0] != self.n:
            raise ShapeError(f"sample has {values.shape[0]} values, catalog has {self.n}")
        if sample.t != self._t + 1:
            raise SequencingError(f"expected sample t={self._t + 1}, got t={sample.t}")
        has_target = sample.target is not None
        if self._target_mode is None:
            self._target_mode = has_target
            if has_target:
                self._targets = np.empty(self._buf.shape[0])
        elif has_target != self._target_mode:
            raise ContractError("samples must either all carry a target or none")
        if self._t == self._buf.shape[0]:
            cap = max(16, 2 * self._buf.shape[0])
            grown = np.empty((cap, self.n))
            grown[: self._t] = self._buf[: self._t]
            self._buf = grown
            if self._target_mode:
                tg = np.empty(cap)
                tg[: self._t] = self._targets[: self._t]
                self._targets = tg
        self._buf[self._t] = values
        if self._target_mode:
            self._targets[self._t] = float(sample.target)
        self._t += 1
        return self

    def prefix(self, t: int) -> "TraceWindow":
        """New window holding the first ``t`` rows."""
        if not 1 <= t <= self._t:
            raise RangeError(f"prefix length {t} outside [1, {self._t}]")
        return self.slice(0, t)

    def slice(self, start: int, stop: Optional[int] = None) -> "TraceWindow":
        """Rows ``start:stop`` (0-based, half-open) re-indexed from t=1."""
        stop = self._t if stop is None else stop
        if not 0 <= start <= stop <= self._t:
            raise RangeError(f"slice [{start}, {stop}) outside [0, {self._t}]")
        y = self._targets[start:stop] if self._target_mode else None
        return TraceWindow(self.catalog, self._buf[start:stop], y)

    def restrict(self, names: Iterable[str]) -> "TraceWindow":
        """Window over a sub-catalog (catalog order preserved)."""
        cat = self.catalog.subset(names)
        return TraceWindow(cat, self.columns(cat.names), self.y)

    def samples(self) -> Iterator[Sample]:
        y = self.y
        for i in range(self._t):
            yield Sample(i + 1, self._buf[i].copy(), None if y is None else float(y[i]))

    def __iter__(self):
        return self.samples()

    def __repr__(self):
        return f"TraceWindow(n={self.n}, t={self._t}, targets={bool(self._target_mode)})"


def append_sample(window: TraceWindow, s: Sample) -> TraceWindow:
    return window.append(s)


def prefix(window: TraceWindow, t: int) -> TraceWindow:
    return window.prefix(t)


@dataclass
class SampleCache:
    """Reads a sample stream lazily and keeps every sample it has seen.

    The search over ``(k, t)`` revisits prefixes many times; the underlying
    iterator is consumed exactly once.
    """

    catalog: FeatureCatalog
    source: Iterator = field(repr=False)
    window: TraceWindow = field(init=False)
    exhausted: bool = field(init=False, default=False)

    def __post_init__(self):
        self.source = iter(self.source)
        self.window = TraceWindow(self.catalog)

    @classmethod
    def over(cls, stream, catalog: Optional[FeatureCatalog] = None) -> "SampleCache":
        if isinstance(stream, TraceWindow):
            return cls(stream.catalog, stream.samples())
        if catalog is None:
            raise ContractError("a catalog is required for a raw sample stream")
        return cls(catalog, stream)

    @property
    def t(self) -> int:
        return self.window.t

    def ensure(self, t: int) -> bool:
        """Read until ``t`` samples are cached; False if the stream ends first."""
        while self.window.t < t and not self.exhausted:
            try:
                s = next(self.source)
            except StopIteration:
                self.exhausted = True
                break
            if not isinstance(s, Sample):
                s = Sample(self.window.t + 1, s)
            self.window.append(s)
        return self.window.t >= t

    def prefix(self, t: int) -> TraceWindow:
        return self.window.prefix(t)
