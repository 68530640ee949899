"""Deterministic CSV output.

Moment snapshots go to one file with a single header line; every snapshot
adds one row per (cell, species) plus one ``MIX`` row per cell. Numbers use
``%.16e`` (17 significant digits) so files are byte-comparable across runs.
A background thread does the formatting and writing; snapshots reach it
through a bounded queue.
"""
from __future__ import annotations

import os
import queue
import tempfile
import threading
from pathlib import Path

import numpy as np

from .errors import OutputError

__all__ = [
    "FLOAT_FORMAT",
    "moment_header",
    "moment_rows",
    "distribution_rows",
    "check_writable",
    "SnapshotWriter",
    "write_table",
]

FLOAT_FORMAT = "%.16e"
_COLUMNS = {"n": ("n",), "u": ("ux", "uy", "uz"), "T": ("T",)}


def _fmt(x: float) -> str:
    return FLOAT_FORMAT % x


def moment_header(fields=("n", "u", "T")) -> str:
    cols = ["time", "cell_index", "x", "species"]
    for f in ("n", "u", "T"):
        if f in fields:
            cols.extend(_COLUMNS[f])
    return ",".join(cols)


def moment_rows(snap, species_names, fields=("n", "u", "T")) -> list[str]:
    """Rows for one snapshot: species in order, then ``MIX``, for each cell."""
    rows = []
    t = _fmt(snap.time)
    S = len(species_names)
    for c, x in enumerate(snap.centers):
        head = f"{t},{c},{_fmt(x)}"
        for s in range(S + 1):
            if s < S:
                name, n, u, T = species_names[s], snap.n[s, c], snap.u[s, c], snap.T[s, c]
            else:
                name, n, u, T = "MIX", snap.mix_n[c], snap.mix_u[c], snap.mix_T[c]
            vals = []
            if "n" in fields:
                vals.append(_fmt(n))
            if "u" in fields:
                vals.extend(_fmt(v) for v in u)
            if "T" in fields:
                vals.append(_fmt(T))
            rows.append(",".join([head, name] + vals))
    return rows


DISTRIBUTION_HEADER = "time,cell_index,species,vx,vy,vz,f"


def distribution_rows(snap, species_names, grids) -> list[str]:
    rows = []
    t = _fmt(snap.time)
    for s, (name, f, g) in enumerate(zip(species_names, snap.distributions, grids)):
        v = [[_fmt(a) for a in node] for node in g.nodes]
        for c in range(f.shape[0]):
            for k in range(g.size):
                rows.append(f"{t},{c},{name},{v[k][0]},{v[k][1]},{v[k][2]},{_fmt(f[c, k])}")
    return rows


def check_writable(directory: str | Path) -> Path:
    """Create ``directory`` if needed and verify that files can be created in it.

    Nothing is left behind when the check fails.
    """
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(prefix=".mixkin-probe-", dir=path)
        os.close(fd)
        os.unlink(probe)
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc.strerror or exc}") from None
    return path


class SnapshotWriter:
    """Writes moment (and optionally distribution) CSV files in the background.

    Files are written under temporary names and renamed on ``close()``, so an
    aborted run leaves no partial CSV behind.
    """

    def __init__(self, directory, species_names, fields=("n", "u", "T"), grids=None,
                 include_distributions: bool = False, maxsize: int = 4):
        self.directory = check_writable(directory)
        self.names = list(species_names)
        self.fields = tuple(fields)
        self.grids = grids
        self.include = include_distributions
        self.paths = {"moments": self.directory / "moments.csv"}
        if include_distributions:
            self.paths["distributions"] = self.directory / "distributions.csv"
        self._tmp = {}
        self._files = {}
        try:
            for key, p in self.paths.items():
                tmp = p.with_name("." + p.name + ".part")
                self._tmp[key] = tmp
                self._files[key] = open(tmp, "w", encoding="ascii", newline="\n")
        except OSError as exc:
            self.abort()
            raise OutputError(f"cannot create output files in {self.directory}: {exc.strerror or exc}") from None
        self._files["moments"].write(moment_header(self.fields) + "\n")
        if include_distributions:
            self._files["distributions"].write(DISTRIBUTION_HEADER + "\n")
        self._queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self._error: BaseException | None = None
        self._thread = threading.Thread(target=self._work, daemon=True)
        self._thread.start()

    def _work(self):
        while True:
            snap = self._queue.get()
            if snap is None:
                return
            if self._error is not None:
                continue
            try:
                self._files["moments"].write("\n".join(moment_rows(snap, self.names, self.fields)) + "\n")
                if self.include and snap.distributions is not None:
                    rows = distribution_rows(snap, self.names, self.grids)
                    self._files["distributions"].write("\n".join(rows) + "\n")
            except BaseException as exc:  # reported on close
                self._error = exc

    def __call__(self, snap) -> None:
        if self._error is not None:
            raise OutputError(f"writing snapshots failed: {self._error}")
        self._queue.put(snap)

    def close(self) -> dict:
        self._queue.put(None)
        self._thread.join()
        for f in self._files.values():
            f.close()
        if self._error is not None:
            self.abort()
            raise OutputError(f"writing snapshots failed: {self._error}")
        for key, p in self.paths.items():
            os.replace(self._tmp[key], p)
        return dict(self.paths)

    def abort(self) -> None:
        """Stop the writer and delete temporary files."""
        if hasattr(self, "_thread") and self._thread.is_alive():
            self._queue.put(None)
            self._thread.join()
        for f in self._files.values():
            if not f.closed:
                f.close()
        for tmp in self._tmp.values():
            try:
                tmp.unlink()
            except FileNotFoundError:
                pass


def write_table(path: str | Path, header: list[str], rows: list[list]) -> Path:
    """Small CSV table; floats use the shared format."""
    path = Path(path)
    tmp = path.with_name("." + path.name + ".part")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    try:
        tmp.write_text("\n".join(lines) + "\n", encoding="ascii")
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path
