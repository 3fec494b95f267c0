"""Long-format panel containers: loading, validation, and design metadata.

A panel is a collection of (group, time) cells, each carrying a treatment
dose, an outcome, a positive population weight, and an optional proxy
variable.  Groups are opaque labels; time indices are integers supplied by
the caller (years, quarters) and are never re-spaced, so horizon arithmetic
is exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateCell,
    MissingColumn,
    NonFiniteValue,
    NonPositiveWeight,
    WrongShape,
)

#: Sentinel first-switch date for groups whose treatment never changes.
NEVER = math.inf

DEFAULT_SCHEMA = {
    "group": "group",
    "time": "time",
    "treatment": "treatment",
    "outcome": "outcome",
    "weight": "weight",
    "proxy": "proxy",
}

_REQUIRED = ("group", "time", "treatment", "outcome")


@dataclass(frozen=True)
class Cell:
    """One (group, period) observation."""

    group: Any
    time: int
    treatment: float
    outcome: float
    weight: float = 1.0
    proxy: float | None = None


def _sorted_labels(labels):
    try:
        return sorted(labels)
    except TypeError:
        return sorted(labels, key=repr)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Validated long-format panel, stored column-wise and sorted by (group, time).

    Instances are immutable after construction and safe to share across
    concurrent workers.  Use :meth:`from_cells`, :meth:`from_columns`, or
    :func:`load_csv` to build one; the raw constructor performs no checks.

    Attributes
    ----------
    groups : tuple
        Ordered group labels.
    periods : tuple of int
        Strictly increasing time indices present anywhere in the panel.
    group_code, time_code : ndarray of int
        Per-row indices into ``groups`` / ``periods``.
    treatment, outcome, weight : ndarray of float
        Per-row values.
    proxy : ndarray of float or None
        Optional per-row proxy variable.
    weight_mode : str
        ``"uniform"`` when no weight column was supplied (all weights 1),
        ``"supplied"`` otherwise.
    """

    groups: tuple
    periods: tuple
    group_code: np.ndarray
    time_code: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    weight: np.ndarray
    proxy: np.ndarray | None
    weight_mode: str

    # -- construction -----------------------------------------------------

    @classmethod
    def from_cells(cls, cells: Iterable[Cell], weight_mode: str | None = None) -> "PanelDataset":
        cells = list(cells)
        has_proxy = any(c.proxy is not None for c in cells)
        if weight_mode is None:
            weight_mode = "supplied" if any(c.weight != 1.0 for c in cells) else "uniform"
        return cls.from_arrays(
            group=[c.group for c in cells],
            time=[c.time for c in cells],
            treatment=[c.treatment for c in cells],
            outcome=[c.outcome for c in cells],
            weight=[c.weight for c in cells],
            proxy=[c.proxy for c in cells] if has_proxy else None,
            weight_mode=weight_mode,
        )

    @classmethod
    def from_columns(cls, data, schema: Mapping[str, str] | None = None) -> "PanelDataset":
        """Build from any mapping-like of columns (dict of sequences, DataFrame)."""
        schema = {**DEFAULT_SCHEMA, **(schema or {})}
        try:
            cols = set(data.keys()) if hasattr(data, "keys") else set(data.columns)
        except AttributeError:
            raise WrongShape("from_columns expects a mapping of column name -> values")
        for key in _REQUIRED:
            if schema[key] not in cols:
                raise MissingColumn(f"required column '{schema[key]}' not found")
        get = lambda name: np.asarray(data[name])
        weight = get(schema["weight"]) if schema["weight"] in cols else None
        proxy = get(schema["proxy"]) if schema["proxy"] in cols else None
        return cls.from_arrays(
            group=get(schema["group"]),
            time=get(schema["time"]),
            treatment=get(schema["treatment"]),
            outcome=get(schema["outcome"]),
            weight=weight,
            proxy=proxy,
        )

    @classmethod
    def from_arrays(
        cls,
        group,
        time,
        treatment,
        outcome,
        weight=None,
        proxy=None,
        weight_mode: str | None = None,
    ) -> "PanelDataset":
        group = list(group)
        n = len(group)
        time_arr = np.asarray(time)
        if time_arr.dtype.kind == "f":
            if not np.all(np.isfinite(time_arr)) or np.any(time_arr != np.floor(time_arr)):
                bad = int(np.argmax(~np.isfinite(time_arr) | (time_arr != np.floor(time_arr))))
                raise NonFiniteValue(f"row {bad}: time value {time_arr[bad]!r} is not an integer")
        time_arr = time_arr.astype(np.int64)
        treatment = np.asarray(treatment, dtype=float)
        outcome = np.asarray(outcome, dtype=float)
        if weight is None:
            weight = np.ones(n)
            if weight_mode is None:
                weight_mode = "uniform"
        else:
            weight = np.asarray(weight, dtype=float)
            if weight_mode is None:
                weight_mode = "supplied"
        if proxy is not None:
            # NaN marks a per-cell missing proxy; diagnostics demand it only where used
            proxy = np.array([np.nan if v is None else float(v) for v in proxy], dtype=float)
        for name, arr in (("treatment", treatment), ("outcome", outcome), ("weight", weight)):
            if arr.shape != (n,):
                raise WrongShape(f"column '{name}' has length {arr.shape}, expected {n}")
            if not np.all(np.isfinite(arr)):
                bad = int(np.argmax(~np.isfinite(arr)))
                raise NonFiniteValue(f"row {bad} (group={group[bad]!r}, time={time_arr[bad]}): non-finite {name}")
        if np.any(weight <= 0):
            bad = int(np.argmax(weight <= 0))
            raise NonPositiveWeight(
                f"row {bad} (group={group[bad]!r}, time={time_arr[bad]}): weight {weight[bad]} is not > 0"
            )

        labels = _sorted_labels(set(group))
        periods = sorted(set(int(t) for t in time_arr))
        if len(labels) < 2:
            raise WrongShape(f"panel needs at least 2 groups, found {len(labels)}")
        if len(periods) < 2:
            raise WrongShape(f"panel needs at least 2 periods, found {len(periods)}")
        gindex = {g: i for i, g in enumerate(labels)}
        tindex = {t: i for i, t in enumerate(periods)}
        gcode = np.fromiter((gindex[g] for g in group), dtype=np.int64, count=n)
        tcode = np.fromiter((tindex[int(t)] for t in time_arr), dtype=np.int64, count=n)

        seen = {}
        for i in range(n):
            key = (gcode[i], tcode[i])
            if key in seen:
                raise DuplicateCell(
                    f"rows {seen[key]} and {i}: duplicate cell (group={group[i]!r}, time={int(time_arr[i])})"
                )
            seen[key] = i

        order = np.lexsort((tcode, gcode))
        return cls(
            groups=tuple(labels),
            periods=tuple(periods),
            group_code=gcode[order],
            time_code=tcode[order],
            treatment=treatment[order],
            outcome=outcome[order],
            weight=weight[order],
            proxy=None if proxy is None else proxy[order],
            weight_mode=weight_mode,
        )

    @classmethod
    def _from_parts(cls, groups, periods, group_code, time_code, treatment, outcome,
                    weight, proxy, weight_mode) -> "PanelDataset":
        """Trusted constructor for internal resampling/subsetting; no validation."""
        order = np.lexsort((time_code, group_code))
        return cls(
            groups=tuple(groups),
            periods=tuple(periods),
            group_code=np.asarray(group_code)[order],
            time_code=np.asarray(time_code)[order],
            treatment=np.asarray(treatment, dtype=float)[order],
            outcome=np.asarray(outcome, dtype=float)[order],
            weight=np.asarray(weight, dtype=float)[order],
            proxy=None if proxy is None else np.asarray(proxy, dtype=float)[order],
            weight_mode=weight_mode,
        )

    # -- basic views -------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.group_code.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @cached_property
    def time_values(self) -> np.ndarray:
        """Actual integer period of each row."""
        return np.asarray(self.periods, dtype=np.int64)[self.time_code]

    @cached_property
    def rows(self) -> tuple:
        """Materialized (group, time) cells, sorted by (group, time)."""
        proxy = self.proxy
        return tuple(
            Cell(
                group=self.groups[self.group_code[i]],
                time=int(self.time_values[i]),
                treatment=float(self.treatment[i]),
                outcome=float(self.outcome[i]),
                weight=float(self.weight[i]),
                proxy=None if proxy is None else float(proxy[i]),
            )
            for i in range(self.n_rows)
        )

    @cached_property
    def is_balanced(self) -> bool:
        return self.n_rows == self.n_groups * self.n_periods

    @cached_property
    def grids(self) -> dict:
        """(G, T) matrices for outcome/treatment/weight plus an observed mask.

        Missing cells hold NaN (0 for weight); ``observed`` marks presence.
        """
        shape = (self.n_groups, self.n_periods)
        observed = np.zeros(shape, dtype=bool)
        observed[self.group_code, self.time_code] = True
        out = {}
        for name in ("outcome", "treatment"):
            m = np.full(shape, np.nan)
            m[self.group_code, self.time_code] = getattr(self, name)
            out[name] = m
        w = np.zeros(shape)
        w[self.group_code, self.time_code] = self.weight
        out["weight"] = w
        out["observed"] = observed
        if self.proxy is not None:
            p = np.full(shape, np.nan)
            p[self.group_code, self.time_code] = self.proxy
            out["proxy"] = p
        return out

    def row_keys(self) -> tuple:
        """(group label, period) per row, in row order."""
        tv = self.time_values
        return tuple((self.groups[g], int(tv[i])) for i, g in enumerate(self.group_code))

    # -- derived datasets ---------------------------------------------------

    def subset(self, groups: Sequence | None = None, periods: Sequence | None = None) -> "PanelDataset":
        """Restrict to the given group labels and/or period values (no revalidation)."""
        keep = np.ones(self.n_rows, dtype=bool)
        if groups is not None:
            want = set(groups)
            kept_labels = [g for g in self.groups if g in want]
            codes = {i for i, g in enumerate(self.groups) if g in want}
            keep &= np.isin(self.group_code, list(codes))
        else:
            kept_labels = list(self.groups)
        if periods is not None:
            pwant = set(int(p) for p in periods)
            kept_periods = [p for p in self.periods if p in pwant]
            pcodes = {i for i, p in enumerate(self.periods) if p in pwant}
            keep &= np.isin(self.time_code, list(pcodes))
        else:
            kept_periods = list(self.periods)
        gmap = {self.groups.index(g): i for i, g in enumerate(kept_labels)}
        tmap = {self.periods.index(p): i for i, p in enumerate(kept_periods)}
        gc = np.array([gmap[c] for c in self.group_code[keep]], dtype=np.int64)
        tc = np.array([tmap[c] for c in self.time_code[keep]], dtype=np.int64)
        return PanelDataset._from_parts(
            kept_labels, kept_periods, gc, tc,
            self.treatment[keep], self.outcome[keep], self.weight[keep],
            None if self.proxy is None else self.proxy[keep],
            self.weight_mode,
        )

    def resample_clusters(self, draws: np.ndarray, cluster_code: np.ndarray | None = None) -> "PanelDataset":
        """Pairs-bootstrap replicate: stack the drawn clusters, relabelling each copy.

        ``draws`` holds indices into the ordered cluster list; ``cluster_code``
        defaults to the group code (cluster = group).
        """
        if cluster_code is None:
            cluster_code = self.group_code
        order = np.argsort(cluster_code, kind="stable")
        sorted_codes = cluster_code[order]
        n_clusters = int(sorted_codes[-1]) + 1 if len(sorted_codes) else 0
        starts = np.searchsorted(sorted_codes, np.arange(n_clusters))
        ends = np.searchsorted(sorted_codes, np.arange(n_clusters), side="right")
        pieces = [order[starts[d]:ends[d]] for d in draws]
        idx = np.concatenate(pieces) if pieces else np.array([], dtype=np.int64)

        old_g = self.group_code[idx]
        copy_of = np.repeat(np.arange(len(draws)), [len(p) for p in pieces])
        pair_keys = old_g.astype(np.int64) * len(draws) + copy_of
        uniq, new_g = np.unique(pair_keys, return_inverse=True)
        labels = []
        for key in uniq:
            g, k = divmod(int(key), len(draws))
            labels.append((k, self.groups[g]))
        return PanelDataset._from_parts(
            labels, self.periods, new_g, self.time_code[idx],
            self.treatment[idx], self.outcome[idx], self.weight[idx],
            None if self.proxy is None else self.proxy[idx],
            self.weight_mode,
        )

    def with_outcome(self, outcome: np.ndarray) -> "PanelDataset":
        """Copy of the panel with a replaced outcome column (row order preserved)."""
        outcome = np.asarray(outcome, dtype=float)
        if outcome.shape != (self.n_rows,):
            raise WrongShape("outcome replacement has wrong length")
        return PanelDataset._from_parts(
            self.groups, self.periods, self.group_code, self.time_code,
            self.treatment, outcome, self.weight, self.proxy, self.weight_mode,
        )

    # -- serialization -------------------------------------------------------

    def write_csv(self, path) -> None:
        """Write the canonical CSV form (columns only for supplied data)."""
        fields = ["group", "time", "treatment", "outcome"]
        if self.weight_mode == "supplied":
            fields.append("weight")
        if self.proxy is not None:
            fields.append("proxy")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            tv = self.time_values
            for i in range(self.n_rows):
                row = [
                    self.groups[self.group_code[i]],
                    int(tv[i]),
                    repr(float(self.treatment[i])),
                    repr(float(self.outcome[i])),
                ]
                if self.weight_mode == "supplied":
                    row.append(repr(float(self.weight[i])))
                if self.proxy is not None:
                    p = float(self.proxy[i])
                    row.append("" if math.isnan(p) else repr(p))
                writer.writerow(row)


def load_csv(path, schema: Mapping[str, str] | None = None) -> PanelDataset:
    """Load and validate a long-format panel from a UTF-8 CSV file.

    Parameters
    ----------
    path : str or path-like
        File with a header row; comma separated.
    schema : mapping, optional
        Maps the logical names ``group``, ``time``, ``treatment``,
        ``outcome``, ``weight``, ``proxy`` to actual column names.  Omitted
        entries default to the logical name itself.  ``weight`` and ``proxy``
        columns are optional in the file; a missing weight column yields a
        uniform-weight panel.

    Raises
    ------
    MissingColumn, DuplicateCell, NonFiniteValue, NonPositiveWeight
        Each error message names the offending file row.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        pos = {}
        for key in ("group", "time", "treatment", "outcome", "weight", "proxy"):
            name = schema[key]
            if name in header:
                pos[key] = header.index(name)
            elif key in _REQUIRED:
                raise MissingColumn(f"{path}: required column '{name}' not in header {header}")

        groups, times, treatments, outcomes = [], [], [], []
        weights = [] if "weight" in pos else None
        proxies = [] if "proxy" in pos else None

        def parse(key, raw, lineno, numeric=True, optional=False):
            raw = raw.strip()
            if raw == "":
                if optional:
                    return None
                raise NonFiniteValue(f"{path}:{lineno}: missing {key} value")
            if not numeric:
                return raw
            try:
                return float(raw)
            except ValueError:
                raise NonFiniteValue(f"{path}:{lineno}: {key} value {raw!r} is not a number")

        for lineno, row in enumerate(reader, start=2):
            if not row or all(f.strip() == "" for f in row):
                continue
            if len(row) < len(header):
                raise NonFiniteValue(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            groups.append(parse("group", row[pos["group"]], lineno, numeric=False))
            traw = row[pos["time"]].strip()
            try:
                times.append(int(traw))
            except ValueError:
                raise NonFiniteValue(f"{path}:{lineno}: time value {traw!r} does not parse as an integer")
            treatments.append(parse("treatment", row[pos["treatment"]], lineno))
            outcomes.append(parse("outcome", row[pos["outcome"]], lineno))
            if weights is not None:
                weights.append(parse("weight", row[pos["weight"]], lineno))
            if proxies is not None:
                proxies.append(parse("proxy", row[pos["proxy"]], lineno, optional=True))

    try:
        return PanelDataset.from_arrays(
            group=groups, time=times, treatment=treatments, outcome=outcomes,
            weight=weights, proxy=proxies,
        )
    except DuplicateCell as err:
        raise DuplicateCell(f"{path}: {err}") from None


# --------------------------------------------------------------------------
# design metadata
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignInfo:
    """Treatment-path metadata derived from a panel.

    ``first_switch`` maps each group to the first period at which its
    treatment differs from its first observed value, or :data:`NEVER` when
    the path never changes.  ``cohorts`` partitions the switchers by their
    first-switch period.  ``last_untreated_period`` is the largest period at
    which at least one group has not yet switched.
    """

    first_switch: Mapping[Any, float]
    baseline_treatment: Mapping[Any, float]
    is_binary: bool
    is_staggered: bool
    cohorts: Mapping[int, tuple]
    last_untreated_period: int
    late_entrants: tuple
    first_switch_code: np.ndarray
    baseline_code: np.ndarray

    @property
    def switchers(self) -> tuple:
        out = []
        for c in sorted(self.cohorts):
            out.extend(self.cohorts[c])
        return tuple(out)

    @property
    def never_switchers(self) -> tuple:
        return tuple(g for g, f in self.first_switch.items() if f == NEVER)


def derive_design(data: PanelDataset) -> DesignInfo:
    """Classify the treatment design and locate each group's first switch.

    The baseline dose is the group's first *observed* value; groups entering
    the panel after the earliest period are reported in ``late_entrants``.
    Row order never affects the result.
    """
    G = data.n_groups
    first_switch = np.full(G, NEVER)
    baseline = np.zeros(G)
    is_staggered = True
    late = []

    gcode = data.group_code
    tvals = data.time_values
    d = data.treatment
    t0 = data.periods[0]

    # rows are sorted by (group, time): walk contiguous group slices
    boundaries = np.flatnonzero(np.diff(gcode)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [data.n_rows]))
    for s, e in zip(starts, ends):
        g = gcode[s]
        path = d[s:e]
        times = tvals[s:e]
        baseline[g] = path[0]
        if times[0] != t0:
            late.append(data.groups[g])
        changed = np.flatnonzero(path != path[0])
        if changed.size:
            first_switch[g] = times[changed[0]]
        n_changes = int(np.count_nonzero(path[1:] != path[:-1]))
        if n_changes > 1 or np.any(np.diff(path) < 0):
            is_staggered = False

    is_binary = bool(np.all((d == 0.0) | (d == 1.0)))

    cohorts: dict[int, list] = {}
    for g in range(G):
        if first_switch[g] != NEVER:
            cohorts.setdefault(int(first_switch[g]), []).append(data.groups[g])

    not_yet = np.asarray(data.periods)[None, :] < first_switch[:, None]
    alive = np.any(not_yet, axis=0)
    last_untreated = int(np.asarray(data.periods)[np.flatnonzero(alive)[-1]]) if alive.any() else int(t0)

    return DesignInfo(
        first_switch={data.groups[g]: (int(first_switch[g]) if first_switch[g] != NEVER else NEVER) for g in range(G)},
        baseline_treatment={data.groups[g]: float(baseline[g]) for g in range(G)},
        is_binary=is_binary,
        is_staggered=is_staggered,
        cohorts={c: tuple(gs) for c, gs in sorted(cohorts.items())},
        last_untreated_period=last_untreated,
        late_entrants=tuple(late),
        first_switch_code=first_switch,
        baseline_code=baseline,
    )


@dataclass(frozen=True)
class BalanceReport:
    balanced: bool
    missing: tuple
    n_groups: int
    n_periods: int


def balance_report(data: PanelDataset) -> BalanceReport:
    """Report whether every group is observed at every period, listing gaps."""
    observed = data.grids["observed"]
    missing = [
        (data.groups[g], data.periods[t])
        for g in range(data.n_groups)
        for t in range(data.n_periods)
        if not observed[g, t]
    ]
    return BalanceReport(
        balanced=not missing,
        missing=tuple(missing),
        n_groups=data.n_groups,
        n_periods=data.n_periods,
    )
