"""Readers and writers for population, arm-estimate and policy files.

Population CSV: ``id, alpha_1..alpha_D, beta_1..beta_D, cost_scale_1..cost_scale_D``
plus optional ``x_*`` covariates. The treatment space is not part of the
rows; it is passed in, or read from a leading comment line of the form
``# upper_bounds=5,20 unit_labels=dollar,percent`` as written by
``save_population``.

Arm CSV: ``id``, ``cost_scale_d``, one ``cate_<d>_<level>`` column per arm,
optional ``arm_dim``/``arm_level`` (the arm the individual was randomized
into) and ``x_*`` covariates.

Policies are JSON. Line numbers in error messages count the header as 1.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .calibrate import ArmEstimates
from .errors import DataError
from .model import FeasibleTreatment, Population, SegmentedPolicy, TreatmentSpace

POLICY_FORMAT = "coarse-policy/1"
_SPACE_RE = re.compile(r"^#\s*upper_bounds=(\S+)(?:\s+unit_labels=(\S+))?")
_CATE_RE = re.compile(r"^cate_(\d+)_(.+)$")


def fmt(x: float) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def parse_space(upper_bounds: str, unit_labels: str | None = None) -> TreatmentSpace:
    try:
        bounds = tuple(float(v) for v in upper_bounds.split(","))
    except ValueError as exc:
        raise DataError(f"bad upper bounds {upper_bounds!r}") from exc
    labels = tuple(unit_labels.split(",")) if unit_labels else ()
    return TreatmentSpace(bounds, labels)


def _read_rows(path):
    """Return ``(space_or_None, header, rows, first_data_line)``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        space = None
        header_line = 1
        if first.startswith("#"):
            m = _SPACE_RE.match(first.strip())
            if m:
                space = parse_space(m.group(1), m.group(2))
            header_line = 2
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("file has no header row", line=header_line) from None
        rows = list(reader)
    return space, header, rows, header_line + 1


def _column(rows, j, name, first_line, allow_empty=False):
    out = np.empty(len(rows))
    for r, row in enumerate(rows):
        try:
            text = row[j]
        except IndexError:
            raise DataError(f"row has {len(row)} fields, missing {name}", line=first_line + r) from None
        if allow_empty and text.strip() == "":
            out[r] = np.nan
            continue
        try:
            out[r] = float(text)
        except ValueError:
            raise DataError(f"{name}: not a number {text!r}", line=first_line + r) from None
        if not np.isfinite(out[r]):
            raise DataError(f"{name}: non-finite value {text!r}", line=first_line + r)
    return out


def _read_header(path):
    """Return ``(space_or_None, header, header_line)`` without reading the rows."""
    with open(path, newline="") as fh:
        first = fh.readline()
        space = None
        header_line = 1
        if first.startswith("#"):
            m = _SPACE_RE.match(first.strip())
            if m:
                space = parse_space(m.group(1), m.group(2))
            header_line = 2
            first = fh.readline()
    if not first.strip():
        raise DataError("file has no header row", line=header_line)
    return space, next(csv.reader([first])), header_line


def _load_fast(path, header_line, numeric_cols):
    """C-speed parse of a clean file; None sends the caller to the row-by-row
    path, which reports line numbers."""
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=header_line, usecols=numeric_cols,
                            ndmin=2, quotechar='"')
        ids = np.loadtxt(path, delimiter=",", skiprows=header_line, usecols=0, dtype=str,
                         ndmin=1, quotechar='"')
    except ValueError:
        return None
    if len(ids) != len(values) or not np.all(np.isfinite(values)):
        return None
    ids = np.char.strip(ids)
    if np.any(ids == "") or len(np.unique(ids)) != len(ids):
        return None
    return ids, values


def _ids(rows, first_line):
    ids = [row[0].strip() if row else "" for row in rows]
    seen: dict[str, int] = {}
    for r, i in enumerate(ids):
        if not i:
            raise DataError("empty id", line=first_line + r)
        if i in seen:
            raise DataError(f"duplicate id {i!r} (first seen on line {seen[i]})", line=first_line + r)
        seen[i] = first_line + r
    return np.array(ids)


def _impute_cost(cost, first_line):
    """Median-impute missing cost scales per dimension; reject non-positive ones."""
    for d in range(cost.shape[1]):
        col = cost[:, d]
        bad = np.flatnonzero(col <= 0)
        if bad.size:
            raise DataError(f"cost_scale_{d + 1} must be positive, got {float(col[bad[0]])!r}",
                            line=first_line + int(bad[0]))
        missing = np.isnan(col)
        if missing.all():
            raise DataError(f"cost_scale_{d + 1} is empty for every row")
        if missing.any():
            col[missing] = np.median(col[~missing])
    return cost


def _covariates(header, rows, first_line):
    cols = [j for j, h in enumerate(header) if h.startswith("x_")]
    if not cols:
        return None, ()
    cov = np.column_stack([_column(rows, j, header[j], first_line) for j in cols])
    return cov, tuple(header[j] for j in cols)


def load_population(path, space: TreatmentSpace | None = None) -> Population:
    file_space, header, header_line = _read_header(path)
    first = header_line + 1
    header = [h.strip() for h in header]
    space = space or file_space
    if space is None:
        raise DataError("treatment space unknown: pass upper bounds or add a '# upper_bounds=' line")
    if not header or header[0] != "id":
        raise DataError("first column must be 'id'", line=header_line)
    d = space.dims
    index = {h: j for j, h in enumerate(header)}
    need = [f"{p}_{k}" for p in ("alpha", "beta", "cost_scale") for k in range(1, d + 1)]
    missing = [c for c in need if c not in index]
    if missing:
        raise DataError(f"missing columns {missing}", line=header_line)
    cov_cols = [j for j, h in enumerate(header) if h.startswith("x_")]
    names = tuple(header[j] for j in cov_cols)

    fast = _load_fast(path, header_line, [index[c] for c in need] + cov_cols)
    if fast is not None:
        ids, values = fast
        alpha, beta = values[:, :d], values[:, d:2 * d]
        cost = values[:, 2 * d:3 * d].copy()
        cov = values[:, 3 * d:] if cov_cols else None
    else:
        _, _, rows, first = _read_rows(path)
        rows = [r for r in rows if any(f.strip() for f in r)]
        for r, row in enumerate(rows):
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, found {len(row)}", line=first + r)
        ids = _ids(rows, first)
        alpha = np.column_stack([_column(rows, index[f"alpha_{k}"], f"alpha_{k}", first)
                                 for k in range(1, d + 1)])
        beta = np.column_stack([_column(rows, index[f"beta_{k}"], f"beta_{k}", first)
                                for k in range(1, d + 1)])
        cost = np.column_stack([_column(rows, index[f"cost_scale_{k}"], f"cost_scale_{k}", first, True)
                                for k in range(1, d + 1)])
        cov, names = _covariates(header, rows, first)
    cost = _impute_cost(cost, first)
    return Population(space, ids, alpha.reshape(-1, d), beta.reshape(-1, d), cost.reshape(-1, d),
                      cov, names)


def save_population(pop: Population, path) -> None:
    d = pop.dims
    header = ["id"] + [f"{p}_{k}" for p in ("alpha", "beta", "cost_scale") for k in range(1, d + 1)]
    names = list(pop.covariate_names) if pop.covariates is not None else []
    names = [n if n.startswith("x_") else f"x_{n}" for n in names]
    header += names
    with open(path, "w", newline="") as fh:
        fh.write("# upper_bounds=" + ",".join(fmt(b) for b in pop.space.upper_bounds)
                 + " unit_labels=" + ",".join(pop.space.unit_labels) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        blocks = [pop.alpha, pop.beta, pop.cost_scale]
        if names:
            blocks.append(pop.covariates)
        values = np.hstack(blocks)
        for i, row in zip(pop.ids, values):
            w.writerow([i] + [fmt(v) for v in row])


# ---- arm estimates ----------------------------------------------------------

def load_arms(path, space: TreatmentSpace | None = None):
    """Read per-arm CATE estimates.

    Returns a dict with ``ids``, ``space``, ``arms`` (one ArmEstimates per
    dimension), ``cost_scale`` (median-imputed), ``holdout`` (per-dimension
    arm index or -1, None when the file has no assignment columns) and
    covariates.
    """
    file_space, header, rows, first = _read_rows(path)
    space = space or file_space
    if space is None:
        raise DataError("treatment space unknown: pass upper bounds or add a '# upper_bounds=' line")
    if not header or header[0] != "id":
        raise DataError("first column must be 'id'", line=first - 1)
    rows = [r for r in rows if any(f.strip() for f in r)]
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", line=first + r)
    ids = _ids(rows, first)
    index = {h: j for j, h in enumerate(header)}
    d = space.dims
    by_dim: dict[int, list[tuple[float, int]]] = {k: [] for k in range(d)}
    for j, h in enumerate(header):
        m = _CATE_RE.match(h)
        if m:
            k = int(m.group(1)) - 1
            if k not in by_dim:
                raise DataError(f"column {h} refers to dimension {k + 1} outside 1..{d}", line=first - 1)
            try:
                by_dim[k].append((float(m.group(2)), j))
            except ValueError:
                raise DataError(f"bad arm level in column {h}", line=first - 1) from None
    arms = []
    for k in range(d):
        cols = sorted(by_dim[k])
        if not cols:
            raise DataError(f"no cate_{k + 1}_* columns", line=first - 1)
        levels = np.array([lv for lv, _ in cols])
        values = np.column_stack([_column(rows, j, header[j], first) for _, j in cols])
        arms.append(ArmEstimates(levels, values))
    cost_cols = [f"cost_scale_{k}" for k in range(1, d + 1)]
    if any(c not in index for c in cost_cols):
        raise DataError(f"missing columns {[c for c in cost_cols if c not in index]}", line=first - 1)
    cost = np.column_stack([_column(rows, index[c], c, first, True) for c in cost_cols])
    cost = _impute_cost(cost, first)

    holdout = None
    if "arm_dim" in index and "arm_level" in index:
        adim = _column(rows, index["arm_dim"], "arm_dim", first).astype(int) - 1
        alev = _column(rows, index["arm_level"], "arm_level", first)
        holdout = np.full((len(rows), d), -1, dtype=np.int64)
        for r in range(len(rows)):
            k = adim[r]
            if not 0 <= k < d:
                raise DataError(f"arm_dim {k + 1} outside 1..{d}", line=first + r)
            hit = np.flatnonzero(np.isclose(arms[k].levels, alev[r]))
            if not hit.size:
                raise DataError(f"arm_level {alev[r]!r} is not an arm of dimension {k + 1}", line=first + r)
            holdout[r, k] = hit[0]
    cov, names = _covariates(header, rows, first)
    return {"ids": ids, "space": space, "arms": arms, "cost_scale": cost, "holdout": holdout,
            "covariates": cov, "covariate_names": names}


def save_arms(path, ids, space: TreatmentSpace, arms, cost_scale, assigned=None) -> None:
    """Write arm estimates; ``assigned`` is an optional ``(dim, level)`` per row."""
    header = ["id"] + [f"cost_scale_{k + 1}" for k in range(space.dims)]
    for k, a in enumerate(arms):
        header += [f"cate_{k + 1}_{lv:g}" for lv in a.levels]
    if assigned is not None:
        header += ["arm_dim", "arm_level"]
    with open(path, "w", newline="") as fh:
        fh.write("# upper_bounds=" + ",".join(fmt(b) for b in space.upper_bounds)
                 + " unit_labels=" + ",".join(space.unit_labels) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r, i in enumerate(ids):
            row = [i] + [fmt(v) for v in cost_scale[r]]
            for a in arms:
                row += [fmt(v) for v in a.values[r]]
            if assigned is not None:
                row += [str(assigned[r][0] + 1), fmt(assigned[r][1])]
            w.writerow(row)


# ---- policies ---------------------------------------------------------------

def policy_to_dict(policy: SegmentedPolicy) -> dict:
    meta = policy.meta
    return {
        "format": POLICY_FORMAT,
        "treatments": [{"dim": t.dim, "value": t.value} for t in policy.treatments],
        "assignment": [int(a) for a in policy.assignment],
        "masses": [float(m) for m in policy.masses],
        "seed": meta.get("seed"),
        "config": meta.get("config"),
        "meta": meta,
    }


def policy_from_dict(data: dict) -> SegmentedPolicy:
    if data.get("format") != POLICY_FORMAT:
        raise DataError(f"not a policy file (format {data.get('format')!r})")
    try:
        treatments = tuple(FeasibleTreatment(int(t["dim"]), float(t["value"])) for t in data["treatments"])
        return SegmentedPolicy(treatments, np.array(data["assignment"], dtype=np.int64),
                               np.array(data["masses"], dtype=float), dict(data.get("meta") or {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed policy file: {exc}") from exc


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def save_policy(policy: SegmentedPolicy, path) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(policy), sort_keys=True, separators=(",", ":")) + "\n")


def load_policy(path) -> SegmentedPolicy:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"policy file is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    return policy_from_dict(data)


def write_table(path, header, rows) -> None:
    """Comma-separated table; floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)
