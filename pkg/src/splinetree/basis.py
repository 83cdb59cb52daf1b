"""Shared main-effects design construction.

Continuous features expand into degree-1 (hat function) B-spline bases on
quantile knots; categorical features one-hot encode against their first
(reference) level.  Knot vectors and level lists are computed once on the
root training data and shared by every tree node, so effect functions of a
parent and its children live on a common basis and differ only in their
coefficients.

Column 0 of every design row is the intercept.  The spline basis sums to 1
at any in-range point (partition of unity), which makes each spline block
deliberately collinear with the intercept; the solver's null-space handling
is responsible for that.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ConstantFeatureError, DataError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


class UnseenCategoryWarning(UserWarning):
    """A category absent from the training levels was encoded as all-zero."""


@dataclass(frozen=True)
class KnotVector:
    """Strictly increasing knots spanning a feature's training range."""

    feature: str
    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=np.float64)
        if k.ndim != 1 or k.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)

    def __len__(self) -> int:
        return self.knots.size


@dataclass(frozen=True)
class BasisBlock:
    """One feature's contiguous slice [start, stop) of design columns."""

    feature: str
    kind: str  # "spline" | "onehot" | "linear"
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True)
class DesignSpec:
    """Mapping from raw features to design-matrix columns.

    ``blocks`` partition columns ``1 .. total_columns-1``; column 0 is the
    intercept.  ``excluded`` lists features dropped for being constant on
    the training data.
    """

    blocks: tuple[BasisBlock, ...]
    knots: Mapping[str, KnotVector]
    levels: Mapping[str, tuple]
    total_columns: int
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        expected = 1
        for block in self.blocks:
            if block.start != expected:
                raise ValueError("blocks must tile columns contiguously from 1")
            expected = block.stop
        if expected != self.total_columns:
            raise ValueError(
                f"blocks end at column {expected}, total_columns is {self.total_columns}"
            )

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(block.feature for block in self.blocks)

    def block_for(self, feature: str) -> BasisBlock:
        for block in self.blocks:
            if block.feature == feature:
                return block
        raise KeyError(f"feature {feature!r} is not in the design")


def quantile_knots(values, num_knots: int, feature: str = "") -> KnotVector:
    """Knots at equally spaced quantile levels of the training values.

    Uses midpoint-interpolated quantiles; exact duplicates collapse, so the
    result may be shorter than ``num_knots``.  The first and last knots are
    the observed minimum and maximum.

    Raises
    ------
    ConstantFeatureError
        If all values are identical (the feature cannot enter the model).
    """
    if num_knots < 2:
        raise ValueError("num_knots must be at least 2")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("values must be nonempty")
    levels = np.linspace(0.0, 1.0, num_knots)
    knots = np.unique(np.quantile(x, levels, method="midpoint"))
    if knots.size < 2:
        raise ConstantFeatureError(
            f"feature {feature!r} is constant (single value {knots[0]!r})"
        )
    return KnotVector(feature=feature, knots=knots)


def spline_row(x: float, knots: KnotVector) -> np.ndarray:
    """Degree-1 B-spline (hat) basis values at a single point."""
    return spline_rows(np.array([x], dtype=np.float64), knots)[0]


def spline_rows(x, knots: KnotVector) -> np.ndarray:
    """Hat-function basis values, one row per input point.

    Points outside the knot range clamp to the boundary knot (constant
    extrapolation).  Inside the range the values are a partition of unity.
    """
    t = knots.knots
    xc = np.clip(np.asarray(x, dtype=np.float64), t[0], t[-1])
    idx = np.clip(np.searchsorted(t, xc, side="right") - 1, 0, t.size - 2)
    w = (xc - t[idx]) / (t[idx + 1] - t[idx])
    out = np.zeros((xc.size, t.size))
    rows = np.arange(xc.size)
    out[rows, idx] = 1.0 - w
    out[rows, idx + 1] += w
    return out


def onehot_row(value, levels: Sequence) -> np.ndarray:
    """Indicator vector against ``levels`` with the first level dropped.

    Unseen values encode as all-zero and emit an ``UnseenCategoryWarning``.
    """
    out = np.zeros(len(levels) - 1)
    if value == levels[0]:
        return out
    for j, level in enumerate(levels[1:]):
        if value == level:
            out[j] = 1.0
            return out
    warnings.warn(
        f"category {value!r} was not seen in training; encoded as reference",
        UnseenCategoryWarning,
        stacklevel=2,
    )
    return out


def onehot_rows(values, levels: Sequence) -> np.ndarray:
    """Vectorized one-hot encoding; unseen values become all-zero rows."""
    values = np.asarray(values)
    out = np.zeros((values.size, len(levels) - 1))
    seen = np.zeros(values.size, dtype=bool)
    for j, level in enumerate(levels):
        match = values == level
        seen |= match
        if j > 0:
            out[match, j - 1] = 1.0
    if not np.all(seen):
        bad = np.unique(values[~seen])
        warnings.warn(
            f"categories {list(bad)!r} were not seen in training; encoded as reference",
            UnseenCategoryWarning,
            stacklevel=2,
        )
    return out


def build_spec(dataset, num_knots=15, linear: Sequence[str] = ()) -> DesignSpec:
    """Derive the shared design from a dataset's training columns.

    Parameters
    ----------
    dataset : SurrogateDataset
    num_knots : int or mapping feature -> int
        Knot budget for spline features (duplicates may reduce it).
    linear : feature names to include as single raw columns instead of splines.

    Constant features are excluded from the design (and recorded) rather
    than raising.
    """
    blocks: list[BasisBlock] = []
    knots: dict[str, KnotVector] = {}
    levels: dict[str, tuple] = {}
    excluded: list[str] = []
    col = 1
    for feat in dataset.features:
        values = dataset.columns[feat.name]
        if feat.kind == CONTINUOUS:
            if feat.name in linear:
                if np.min(values) == np.max(values):
                    excluded.append(feat.name)
                    continue
                blocks.append(BasisBlock(feat.name, "linear", col, col + 1))
                col += 1
                continue
            k = num_knots[feat.name] if isinstance(num_knots, Mapping) else num_knots
            try:
                kv = quantile_knots(values, k, feature=feat.name)
            except ConstantFeatureError:
                excluded.append(feat.name)
                continue
            knots[feat.name] = kv
            blocks.append(BasisBlock(feat.name, "spline", col, col + len(kv)))
            col += len(kv)
        elif feat.kind == CATEGORICAL:
            levs = tuple(sorted(np.unique(values).tolist()))
            if len(levs) < 2:
                excluded.append(feat.name)
                continue
            levels[feat.name] = levs
            blocks.append(BasisBlock(feat.name, "onehot", col, col + len(levs) - 1))
            col += len(levs) - 1
        else:
            raise DataError(f"unknown feature kind {feat.kind!r} for {feat.name!r}")
    return DesignSpec(
        blocks=tuple(blocks),
        knots=knots,
        levels=levels,
        total_columns=col,
        excluded=tuple(excluded),
    )


def block_rows(values, spec: DesignSpec, block: BasisBlock) -> np.ndarray:
    """Basis expansion of one feature's raw values, (n, block.width)."""
    if block.kind == "spline":
        return spline_rows(values, spec.knots[block.feature])
    if block.kind == "onehot":
        return onehot_rows(values, spec.levels[block.feature])
    if block.kind == "linear":
        return np.asarray(values, dtype=np.float64).reshape(-1, 1)
    raise ValueError(f"unknown block kind {block.kind!r}")


def design_matrix(dataset, spec: DesignSpec) -> np.ndarray:
    """Materialize the full (n, m) design, intercept in column 0."""
    for block in spec.blocks:
        if block.feature not in dataset.columns:
            raise DataError(f"dataset is missing feature {block.feature!r}")
    out = np.empty((dataset.n, spec.total_columns))
    out[:, 0] = 1.0
    for block in spec.blocks:
        out[:, block.columns] = block_rows(
            dataset.columns[block.feature], spec, block
        )
    return out


def design_rows(dataset, spec: DesignSpec) -> Iterator[np.ndarray]:
    """Stream design rows one record at a time, in dataset order."""
    for block in spec.blocks:
        if block.feature not in dataset.columns:
            raise DataError(f"dataset is missing feature {block.feature!r}")
    for i in range(dataset.n):
        row = np.empty(spec.total_columns)
        row[0] = 1.0
        for block in spec.blocks:
            row[block.columns] = block_rows(
                dataset.columns[block.feature][i : i + 1], spec, block
            )[0]
        yield row
