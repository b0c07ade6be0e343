"""Artifact formats: matrix dumps, history CSVs and flat key=value configs."""

import csv
import math
from pathlib import Path

import numpy as np

from .rfm import HISTORY_COLUMNS

BASE_COLUMNS = HISTORY_COLUMNS[:8]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def save_matrix(path, A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ValueError("only 2-d arrays can be dumped")
    lines = [f"# rows={A.shape[0]} cols={A.shape[1]}"]
    lines += [",".join(format(x, ".17g") for x in row) for row in A]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path):
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# rows="):
        raise ValueError(f"{path}: missing '# rows=R cols=C' header")
    try:
        parts = dict(tok.split("=") for tok in text[0][1:].split())
        rows, cols = int(parts["rows"]), int(parts["cols"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header {text[0]!r}") from exc
    body = [ln for ln in text[1:] if ln.strip()]
    if len(body) != rows:
        raise ValueError(f"{path}: header says {rows} rows, found {len(body)}")
    A = np.array([[float(x) for x in ln.split(",")] for ln in body]).reshape(rows, -1)
    if A.shape[1] != cols:
        raise ValueError(f"{path}: header says {cols} columns, found {A.shape[1]}")
    return A


def write_history(path, history, multitask=False):
    cols = HISTORY_COLUMNS if multitask else BASE_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in history:
            w.writerow([_fmt(getattr(rec, c)) for c in cols])


def read_history(path):
    """Column name -> list of floats. Raises ``ValueError`` when there are no data rows."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: history has no data rows")
    header = rows[0]
    out = {h: [] for h in header}
    for r in rows[1:]:
        if len(r) != len(header):
            raise ValueError(f"{path}: ragged row {r}")
        for h, v in zip(header, r):
            out[h].append(float(v) if v != "" else math.nan)
    return out


def write_config(path, cfg):
    lines = [f"{k}={_cfg_value(v)}" for k, v in cfg.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def _cfg_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_config(path):
    """Parse ``key=value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ValueError(f"{path}:{n}: empty key")
        out[k] = v
    return out
