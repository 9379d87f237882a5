import csv
import pathlib
import re
import typing as t

import numpy as np

from itostein.common import GRID_ATOL

_MESH_POWER = re.compile(r"^\s*2\s*(\^|\*\*)\s*(-?\d+)\s*$")


def match_indices(haystack: np.ndarray, needles: np.ndarray, atol: float = GRID_ATOL) -> t.Tuple[np.ndarray, np.ndarray]:
    """Indices of the sorted ``haystack`` points nearest to each needle, and whether each lies within ``atol``."""
    haystack = np.asarray(haystack, dtype=float)
    needles = np.atleast_1d(np.asarray(needles, dtype=float))
    right = np.clip(np.searchsorted(haystack, needles), 0, len(haystack) - 1)
    left = np.clip(right - 1, 0, len(haystack) - 1)
    pick = np.where(np.abs(haystack[left] - needles) <= np.abs(haystack[right] - needles), left, right)
    found = np.abs(haystack[pick] - needles) <= atol
    return pick, found


def left_indices(haystack: np.ndarray, needles: np.ndarray, atol: float = GRID_ATOL) -> np.ndarray:
    """Index of the last haystack point at or before each needle."""
    positions = np.searchsorted(haystack, np.asarray(needles, dtype=float) + atol, side="right") - 1
    return np.clip(positions, 0, len(haystack) - 1)


def union_points(*collections: np.ndarray, atol: float = GRID_ATOL) -> np.ndarray:
    """Sorted union of point collections, merging points closer than ``atol``."""
    merged = np.sort(np.concatenate([np.atleast_1d(np.asarray(c, dtype=float)) for c in collections]))
    if len(merged) == 0:
        return merged
    keep = np.concatenate(([True], np.diff(merged) > atol))
    return merged[keep]


def clip_points(points: np.ndarray, stop: float, atol: float = GRID_ATOL) -> np.ndarray:
    """Points strictly before ``stop`` followed by ``stop`` itself."""
    points = np.asarray(points, dtype=float)
    return np.append(points[points < stop - atol], stop)


def parse_mesh(text: str) -> float:
    """Parse a mesh given as ``2^-k``, ``2**-k`` or a plain number."""
    match = _MESH_POWER.match(text)
    value = 2.0 ** int(match.group(2)) if match is not None else float(text)
    if not 0 < value <= 1:
        raise ValueError(f"Mesh must lie in (0, 1], got {text}.")
    return value


def write_rows(path: pathlib.Path, header: t.Sequence[t.Any], rows: t.Iterable[t.Sequence[t.Any]]):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def read_rows(path: pathlib.Path) -> t.Tuple[t.List[str], t.List[t.List[str]]]:
    with pathlib.Path(path).open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, [row for row in reader]
