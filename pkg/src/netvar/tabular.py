"""CSV reading and writing with reproducible formatting.

All files are UTF-8, comma-separated, `.` decimal, with a mandatory header
row. Floats are written with 17 significant digits so repeated runs with
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import InputError


def fmt(value) -> str:
    """Canonical cell text: floats at 17 significant digits."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(cell) for cell in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str):
    """Header and string rows; rectangularity checked with line numbers."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty file, expected a header row") from None
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for idx, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise InputError(
                f"{path}: row {idx} has {len(row)} cells, header has {len(header)}"
            )
    return header, rows


def _parse_float(path: str, row_idx: int, col_idx: int, header: list[str], text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(
            f"{path}: row {row_idx}, column {col_idx + 1} ({header[col_idx]!r}): "
            f"not numeric: {text!r}"
        ) from None


def write_panel(path: str, node_ids: list[str], data: np.ndarray, times=None) -> None:
    """Panel layout: first column the time index, one column per node."""
    n, t_len = data.shape
    times = list(range(1, t_len + 1)) if times is None else list(times)
    rows = ([times[s]] + [data[i, s] for i in range(n)] for s in range(t_len))
    write_csv(path, ["time"] + list(node_ids), rows)


def read_panel(path: str):
    """Read a panel file; returns (node_ids, times, data) with data N x T."""
    header, rows = read_csv(path)
    if len(header) < 2:
        raise InputError(f"{path}: need a time column plus at least one node column")
    if not rows:
        raise InputError(f"{path}: no observation rows")
    node_ids = header[1:]
    if len(set(node_ids)) != len(node_ids):
        raise InputError(f"{path}: duplicate node identifiers in header")
    t_len = len(rows)
    data = np.empty((len(node_ids), t_len))
    times = []
    for s, row in enumerate(rows):
        times.append(row[0])
        for i in range(len(node_ids)):
            data[i, s] = _parse_float(path, s + 2, i + 1, header, row[i + 1])
    return node_ids, times, data


def write_matrix(path: str, node_ids: list[str], matrix: np.ndarray, corner: str = "node") -> None:
    """Square matrix with row labels in the first column."""
    rows = ([node_ids[i]] + list(matrix[i]) for i in range(len(node_ids)))
    write_csv(path, [corner] + list(node_ids), rows)


def read_adjacency(path: str, node_ids: list[str] | None = None):
    """Read an adjacency file; optionally check ids against the panel's."""
    header, rows = read_csv(path)
    ids = header[1:]
    if node_ids is not None and ids != list(node_ids):
        raise InputError(
            f"{path}: node identifiers do not match the panel "
            f"({len(ids)} vs {len(node_ids)} columns)"
        )
    if len(rows) != len(ids):
        raise InputError(f"{path}: expected {len(ids)} rows, found {len(rows)}")
    w = np.empty((len(ids), len(ids)))
    for r, row in enumerate(rows):
        if row[0] != ids[r]:
            raise InputError(f"{path}: row {r + 2} is labelled {row[0]!r}, expected {ids[r]!r}")
        for c in range(len(ids)):
            w[r, c] = _parse_float(path, r + 2, c + 1, header, row[c + 1])
    return ids, w


def write_groups(path: str, node_ids: list[str], membership: np.ndarray) -> None:
    write_csv(path, ["node", "group"], zip(node_ids, membership.tolist()))


def read_groups(path: str, node_ids: list[str]):
    """Membership vector aligned with `node_ids`; labels must be 1..K."""
    header, rows = read_csv(path)
    if header[:2] != ["node", "group"]:
        raise InputError(f"{path}: expected header node,group")
    seen = {}
    for idx, row in enumerate(rows, start=2):
        try:
            seen[row[0]] = int(row[1])
        except ValueError:
            raise InputError(f"{path}: row {idx}: group label {row[1]!r} is not an integer") from None
    missing = [nid for nid in node_ids if nid not in seen]
    if missing:
        raise InputError(f"{path}: missing group labels for nodes {missing[:5]}")
    return np.array([seen[nid] for nid in node_ids], dtype=int)
