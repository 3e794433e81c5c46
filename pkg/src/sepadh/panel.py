"""Person-period panel data for two-arm adherence trials.

A panel is a rectangular table with one row per individual-interval:

    id,k,z,a,l_a,l_y,y[,c]

``id`` identifies the individual, ``k`` the interval (1-based), ``z`` the
baseline arm, ``a`` adherence during the interval, ``l_a``/``l_y`` the two
covariate blocks measured at the start of the interval (adherence-side and
outcome-side), ``y`` the failure indicator, and the optional ``c`` a crossover
indicator. Failure is absorbing: the row where y=1 is the individual's last.
Crossover censors: the row where c=1 is kept (its weight contribution is
zeroed downstream) and no later rows exist.

Rows are stored column-wise as read-only numpy arrays sorted by (id, k), which
is what the vectorized estimation code relies on.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PanelParseError, PanelValidationError

BASE_COLUMNS = ("id", "k", "z", "a", "l_a", "l_y", "y")
CROSSOVER_COLUMN = "c"
BINARY_COLUMNS = ("z", "a", "l_a", "l_y", "y", "c")


@dataclass(frozen=True)
class PersonPeriod:
    """A single individual-interval record."""

    id: int
    k: int
    z: int
    a: int
    l_a: int
    l_y: int
    y: int
    c: int = 0


def _as_column(values, dtype):
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise DomainError("panel columns must be one-dimensional")
    return arr


class Panel:
    """Immutable person-period panel.

    Parameters
    ----------
    id, k, z, a, l_a, l_y, y : array-like of int
        The record columns. Rows may arrive in any order; they are sorted
        by (id, k) at construction.
    c : array-like of int, optional
        Crossover indicators. When omitted the panel has no crossover
        column and ``has_crossover`` is False.
    horizon : int, optional
        Administrative end of follow-up K. Defaults to the largest observed
        k. Records beyond the horizon fail validation.
    covariate_layout : tuple of str
        Which covariate blocks are considered in play for estimation,
        subset of ("l_a", "l_y"). Both by default. The simplified weight
        forms require the corresponding block to be declared absent.
    intervention : tuple (z_a, z_y), optional
        Set on counterfactual panels produced by the simulator. The z
        column then records the z_a component value, so a (z, z)
        counterfactual panel is indistinguishable from trial arm z.
    """

    def __init__(self, id, k, z, a, l_a, l_y, y, c=None, *, horizon=None,
                 covariate_layout=("l_a", "l_y"), intervention=None,
                 validate=True, _sorted=False):
        cols = {
            "id": _as_column(id, np.int64),
            "k": _as_column(k, np.int32),
            "z": _as_column(z, np.int8),
            "a": _as_column(a, np.int8),
            "l_a": _as_column(l_a, np.int8),
            "l_y": _as_column(l_y, np.int8),
            "y": _as_column(y, np.int8),
        }
        n = cols["id"].shape[0]
        for name, col in cols.items():
            if col.shape[0] != n:
                raise DomainError(f"column {name} has length {col.shape[0]}, expected {n}")
        if c is not None:
            cols["c"] = _as_column(c, np.int8)
            if cols["c"].shape[0] != n:
                raise DomainError("column c has a mismatched length")
        if not _sorted and n:
            order = np.lexsort((cols["k"], cols["id"]))
            if not np.array_equal(order, np.arange(n)):
                cols = {name: col[order] for name, col in cols.items()}
        for col in cols.values():
            col.setflags(write=False)
        self._cols = cols
        if horizon is None:
            if n == 0:
                raise DomainError("an empty panel needs an explicit horizon")
            horizon = int(cols["k"].max())
        self.horizon = int(horizon)
        layout = tuple(name for name in ("l_a", "l_y") if name in covariate_layout)
        if set(covariate_layout) - {"l_a", "l_y"}:
            raise DomainError(f"unknown covariate layout entries: {covariate_layout}")
        self.covariate_layout = layout
        self.intervention = tuple(intervention) if intervention is not None else None
        self._lag_cache = {}
        self._starts = None
        if validate:
            problems = self.validate()
            if problems:
                raise PanelValidationError(problems)

    # -- basic container protocol -------------------------------------------

    def __len__(self):
        return self._cols["id"].shape[0]

    def __getitem__(self, i):
        return self.record(i)

    def record(self, i):
        """Row ``i`` as a PersonPeriod."""
        c = int(self._cols["c"][i]) if self.has_crossover else 0
        return PersonPeriod(
            id=int(self._cols["id"][i]), k=int(self._cols["k"][i]),
            z=int(self._cols["z"][i]), a=int(self._cols["a"][i]),
            l_a=int(self._cols["l_a"][i]), l_y=int(self._cols["l_y"][i]),
            y=int(self._cols["y"][i]), c=c,
        )

    def iter_records(self):
        for i in range(len(self)):
            yield self.record(i)

    @property
    def has_crossover(self):
        return "c" in self._cols

    def column(self, name):
        """Read-only column array; 'c' on a crossover-free panel is zeros."""
        if name == "c" and "c" not in self._cols:
            zeros = np.zeros(len(self), dtype=np.int8)
            zeros.setflags(write=False)
            return zeros
        return self._cols[name]

    @property
    def ids(self):
        return self._cols["id"]

    @property
    def n_individuals(self):
        return self.id_starts.shape[0]

    @property
    def id_starts(self):
        """Row index of each individual's first record (ids are contiguous)."""
        if self._starts is None:
            ids = self._cols["id"]
            if len(self) == 0:
                self._starts = np.empty(0, dtype=np.int64)
            else:
                first = np.flatnonzero(np.diff(ids)) + 1
                self._starts = np.concatenate(([0], first))
        return self._starts

    @property
    def id_counts(self):
        starts = self.id_starts
        if starts.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.diff(np.concatenate((starts, [len(self)])))

    # -- derived columns -----------------------------------------------------

    def lagged(self, name, depth=1):
        """Column ``name`` shifted back ``depth`` intervals within each id.

        Values for intervals k <= depth are 0 (the fixed pre-baseline
        convention; adherence before initiation is 0).
        """
        key = (name, depth)
        if key not in self._lag_cache:
            col = self.column(name)
            out = np.zeros(len(self), dtype=col.dtype)
            if len(self):
                k = self._cols["k"]
                shifted = np.roll(col, depth)
                ok = k > depth  # same id because ks are contiguous from 1
                out[ok] = shifted[ok]
            out.setflags(write=False)
            self._lag_cache[key] = out
        return self._lag_cache[key]

    # -- selection -----------------------------------------------------------

    def rows_at(self, k, arm=None):
        """Indices of records at interval k, optionally restricted to an arm."""
        if not 1 <= k <= self.horizon:
            raise DomainError(f"interval {k} outside 1..{self.horizon}")
        mask = self._cols["k"] == k
        if arm is not None:
            mask &= self._cols["z"] == arm
        return np.flatnonzero(mask)

    def subset_rows(self, rows):
        """New panel from the given (sorted) row indices; metadata preserved."""
        cols = {name: col[rows] for name, col in self._cols.items()}
        return Panel(**cols, horizon=self.horizon,
                     covariate_layout=self.covariate_layout,
                     intervention=self.intervention,
                     validate=False, _sorted=True)

    def arm(self, z):
        """Subpanel of one arm."""
        return self.subset_rows(np.flatnonzero(self._cols["z"] == z))

    def with_layout(self, covariate_layout):
        """Same data with a different covariate layout declaration.

        Declaring a block absent asserts it is not needed for adjustment;
        the simplified weight forms check this declaration.
        """
        return Panel(**self._cols, horizon=self.horizon,
                     covariate_layout=covariate_layout,
                     intervention=self.intervention,
                     validate=False, _sorted=True)

    # -- validation ----------------------------------------------------------

    def validate(self):
        """Check every panel invariant; returns a list of (rule, id, detail)."""
        problems = []
        n = len(self)
        if n == 0:
            return problems
        cols = self._cols
        ids, ks = cols["id"], cols["k"]

        for name in BINARY_COLUMNS:
            if name not in cols:
                continue
            bad = np.flatnonzero((cols[name] < 0) | (cols[name] > 1))
            for i in bad[:20]:
                problems.append((
                    "nonbinary-value", str(int(ids[i])),
                    f"{name}={int(cols[name][i])} at k={int(ks[i])}"))

        bad = np.flatnonzero((ks < 1) | (ks > self.horizon))
        for i in bad[:20]:
            problems.append((
                "k-out-of-range", str(int(ids[i])),
                f"k={int(ks[i])} outside 1..{self.horizon}"))

        starts = self.id_starts
        ends = np.concatenate((starts[1:], [n]))
        same_id = np.empty(n, dtype=bool)
        same_id[0] = False
        same_id[1:] = ids[1:] == ids[:-1]

        # contiguity: first k of each id is 1, then steps of exactly 1
        first_bad = np.flatnonzero(ks[starts] != 1)
        for j in first_bad[:20]:
            problems.append((
                "noncontiguous-intervals", str(int(ids[starts[j]])),
                f"first interval is k={int(ks[starts[j]])}, expected 1"))
        step = np.flatnonzero(same_id & np.concatenate(([False], np.diff(ks) != 1)))
        for i in step[:20]:
            if ks[i] == ks[i - 1]:
                rule, detail = "duplicate-interval", f"two records at k={int(ks[i])}"
            else:
                rule, detail = ("noncontiguous-intervals",
                                f"k jumps from {int(ks[i - 1])} to {int(ks[i])}")
            problems.append((rule, str(int(ids[i])), detail))

        zs = cols["z"]
        drift = np.flatnonzero(same_id & np.concatenate(([False], np.diff(zs) != 0)))
        for i in drift[:20]:
            problems.append((
                "z-not-constant", str(int(ids[i])),
                f"z changes from {int(zs[i - 1])} to {int(zs[i])} at k={int(ks[i])}"))

        # absorbing failure / censoring crossover: terminal rows only
        not_last = np.ones(n, dtype=bool)
        not_last[ends - 1] = False
        bad = np.flatnonzero((cols["y"] == 1) & not_last)
        for i in bad[:20]:
            problems.append((
                "record-after-failure", str(int(ids[i])),
                f"y=1 at k={int(ks[i])} but a later record exists"))
        if "c" in cols:
            bad = np.flatnonzero((cols["c"] == 1) & not_last)
            for i in bad[:20]:
                problems.append((
                    "record-after-crossover", str(int(ids[i])),
                    f"c=1 at k={int(ks[i])} but a later record exists"))
        return problems


def at_risk(panel, k, arm=None):
    """Row indices of the records contributing to the hazard at interval k.

    A record's existence at (id, k) already encodes survival through k-1 and
    no prior crossover, so this is plain row selection.
    """
    return panel.rows_at(k, arm=arm)


# -- CSV ----------------------------------------------------------------------


def _open_text(source, mode):
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    return open(source, mode, encoding="utf-8", newline=""), True


def ingest_csv(source, *, horizon=None):
    """Parse a panel from a CSV path or file-like object.

    The header must be exactly ``id,k,z,a,l_a,l_y,y`` optionally followed by
    ``,c``. Binary fields must be the literal characters 0 or 1. Parse
    problems raise PanelParseError with the line number; invariant problems
    raise PanelValidationError naming the id and rule.
    """
    fh, owned = _open_text(source, "r")
    try:
        text = fh.read()
    finally:
        if owned:
            fh.close()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise PanelParseError("empty file", line=1) from None
    if header == list(BASE_COLUMNS):
        with_c = False
    elif header == list(BASE_COLUMNS) + [CROSSOVER_COLUMN]:
        with_c = True
    else:
        raise PanelParseError(
            f"bad header {','.join(header)!r}; expected "
            f"{','.join(BASE_COLUMNS)}[,c]", line=1)

    width = 8 if with_c else 7
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise PanelParseError(
                f"expected {width} fields, found {len(row)}", line=lineno)
        parsed = []
        for pos, field in enumerate(row):
            name = (list(BASE_COLUMNS) + [CROSSOVER_COLUMN])[pos]
            if name in BINARY_COLUMNS:
                if field not in ("0", "1"):
                    raise PanelParseError(
                        f"field {name} must be 0 or 1, found {field!r}",
                        line=lineno)
                parsed.append(int(field))
            else:
                try:
                    parsed.append(int(field))
                except ValueError:
                    raise PanelParseError(
                        f"field {name} must be an integer, found {field!r}",
                        line=lineno) from None
        rows.append(parsed)

    names = list(BASE_COLUMNS) + ([CROSSOVER_COLUMN] if with_c else [])
    if rows:
        data = np.asarray(rows, dtype=np.int64)
        cols = {name: data[:, j] for j, name in enumerate(names)}
    else:
        cols = {name: np.empty(0, dtype=np.int64) for name in names}
        if horizon is None:
            horizon = 1
    return Panel(**cols, horizon=horizon)


def emit_csv(panel, dest=None):
    """Write a panel in the canonical CSV form; returns the text if dest is
    None. Round-trips ingest_csv bit-exactly on field values."""
    names = list(BASE_COLUMNS) + ([CROSSOVER_COLUMN] if panel.has_crossover else [])
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    columns = [panel.column(name) for name in names]
    for i in range(len(panel)):
        buf.write(",".join(str(int(col[i])) for col in columns) + "\n")
    text = buf.getvalue()
    if dest is None:
        return text
    fh, owned = _open_text(dest, "w")
    try:
        fh.write(text)
    finally:
        if owned:
            fh.close()
    return None


def resample_individuals(panel, rng):
    """Nonparametric bootstrap resample: individuals drawn with replacement,
    relabelled 0..n-1 so panel invariants keep holding."""
    starts = panel.id_starts
    counts = panel.id_counts
    n_ids = starts.shape[0]
    chosen = rng.integers(0, n_ids, size=n_ids)
    lens = counts[chosen]
    total = int(lens.sum())
    out_ends = np.cumsum(lens)
    out_starts = out_ends - lens
    rows = (np.arange(total, dtype=np.int64)
            - np.repeat(out_starts, lens)
            + np.repeat(starts[chosen], lens))
    cols = {name: panel.column(name)[rows]
            for name in list(BASE_COLUMNS) + (["c"] if panel.has_crossover else [])}
    cols["id"] = np.repeat(np.arange(n_ids, dtype=np.int64), lens)
    return Panel(**cols, horizon=panel.horizon,
                 covariate_layout=panel.covariate_layout,
                 intervention=panel.intervention,
                 validate=False, _sorted=True)
