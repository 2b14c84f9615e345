"""Event stream file I/O: text (.csv-ish) and binary formats, dataset manifests.

Text format:
    # evdn-text v1 width=<W> height=<H> duration_us=<D>
    t_us,x,y,p[,label]          one event per line, p in {0,1}, label in {0,1}

Binary format (little-endian throughout):
    magic "EVDN0001"
    header: width u16, height u16, duration u64, count u64
    records (16 bytes each): t u64, x u16, y u16, p u8, label u8, 2 pad bytes
    label byte: 0 noise, 1 signal, 255 unlabeled
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .core import (Geometry, EventStream, LabeledEventStream,
                   LABEL_NOISE, LABEL_SIGNAL, LABEL_UNLABELED)

TEXT_HEADER_PREFIX = "# evdn-text v1"
BINARY_MAGIC = b"EVDN0001"

_RECORD_DTYPE = np.dtype([
    ("t", "<u8"), ("x", "<u2"), ("y", "<u2"),
    ("p", "u1"), ("label", "u1"), ("pad", "<u2"),
])


class ParseError(ValueError):
    pass


def _guess_format(path):
    with open(path, "rb") as f:
        head = f.read(8)
    return "binary" if head == BINARY_MAGIC else "text"


def read_events(path, format=None, sort=False):
    """Read a labeled event stream; format auto-detected unless given."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such event file: {path}")
    if format is None:
        format = _guess_format(path)
    if format == "text":
        return _read_text(path, sort=sort)
    if format == "binary":
        return _read_binary(path, sort=sort)
    raise ValueError(f"unknown format {format!r}")


def write_events(labeled, path, format="binary"):
    path = Path(path)
    if format == "text":
        _write_text(labeled, path)
    elif format == "binary":
        _write_binary(labeled, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def _parse_text_header(line, path):
    if not line.startswith(TEXT_HEADER_PREFIX):
        raise ParseError(f"{path}: missing '{TEXT_HEADER_PREFIX}' header")
    fields = dict(tok.split("=", 1) for tok in line[len(TEXT_HEADER_PREFIX):].split())
    try:
        return (Geometry(int(fields["width"]), int(fields["height"])),
                int(fields["duration_us"]))
    except (KeyError, ValueError) as e:
        raise ParseError(f"{path}: bad header: {e}") from e


def _read_text(path, sort=False):
    with open(path, "r") as f:
        header = f.readline().rstrip("\n")
        geometry, duration = _parse_text_header(header, path)
        try:
            try:
                df = pd.read_csv(f, header=None, names=["t", "x", "y", "p", "label"])
            except pd.errors.EmptyDataError:
                df = pd.DataFrame()
            if len(df) == 0:
                return LabeledEventStream.unlabeled(EventStream.empty(geometry, duration))
            if df[["t", "x", "y", "p"]].isna().any().any():
                raise ValueError("short event line")
            if df[["t", "x", "y", "p"]].dtypes.apply(
                    lambda d: not np.issubdtype(d, np.integer)).any():
                raise ValueError("non-integer event field")
        except (ValueError, pd.errors.ParserError):
            # slow path only to locate the offending line for the error message
            f.seek(0)
            f.readline()
            for lineno, line in enumerate(f, start=2):
                parts = line.rstrip("\n").split(",")
                if len(parts) not in (4, 5) or not all(p.strip().lstrip("-").isdigit() for p in parts):
                    raise ParseError(f"{path}:{lineno}: malformed event line {line.rstrip()!r}")
            raise ParseError(f"{path}: malformed event data")
    labels = df["label"].fillna(LABEL_UNLABELED).to_numpy(dtype=np.int64)
    return _finish_read(path, geometry, duration, df["t"].to_numpy(),
                        df["x"].to_numpy(), df["y"].to_numpy(),
                        df["p"].to_numpy(), labels, sort)


def _write_text(labeled, path):
    s = labeled.stream
    g = s.geometry
    with open(path, "w") as f:
        f.write(f"{TEXT_HEADER_PREFIX} width={g.width} height={g.height} "
                f"duration_us={s.duration}\n")
        has_labels = np.any(labeled.labels != LABEL_UNLABELED)
        cols = [s.t, s.x, s.y, s.p] + ([labeled.labels] if has_labels else [])
        if len(s):
            arr = np.stack([np.asarray(c, np.int64) for c in cols], axis=1)
            pd.DataFrame(arr).to_csv(f, header=False, index=False)


def _read_binary(path, sort=False):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != BINARY_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        header = f.read(20)
        if len(header) != 20:
            raise ParseError(f"{path}: truncated header")
        width, height, duration, count = struct.unpack("<HHQQ", header)
        raw = f.read(count * _RECORD_DTYPE.itemsize)
    if len(raw) != count * _RECORD_DTYPE.itemsize:
        raise ParseError(f"{path}: truncated record section")
    rec = np.frombuffer(raw, dtype=_RECORD_DTYPE)
    return _finish_read(path, Geometry(width, height), duration,
                        rec["t"].astype(np.int64), rec["x"].astype(np.int32),
                        rec["y"].astype(np.int32), rec["p"].astype(np.int8),
                        rec["label"], sort)


def _write_binary(labeled, path):
    s = labeled.stream
    g = s.geometry
    rec = np.zeros(len(s), dtype=_RECORD_DTYPE)
    rec["t"] = s.t
    rec["x"] = s.x
    rec["y"] = s.y
    rec["p"] = s.p
    rec["label"] = labeled.labels
    with open(path, "wb") as f:
        f.write(BINARY_MAGIC)
        f.write(struct.pack("<HHQQ", g.width, g.height, s.duration, len(s)))
        f.write(rec.tobytes())


def _finish_read(path, geometry, duration, t, x, y, p, labels, sort):
    if np.any((p != 0) & (p != 1)):
        bad = int(np.flatnonzero((p != 0) & (p != 1))[0])
        raise ParseError(f"{path}: record {bad}: polarity must be 0 or 1 (got {p[bad]})")
    ok = np.isin(labels, (LABEL_NOISE, LABEL_SIGNAL, LABEL_UNLABELED))
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise ParseError(f"{path}: record {bad}: bad label {labels[bad]}")
    if len(t) and np.any(np.diff(t) < 0):
        if not sort:
            raise ParseError(
                f"{path}: timestamps not non-decreasing (pass sort=True to fix)")
        order = np.lexsort((p, x, y, t))
        t, x, y, p, labels = t[order], x[order], y[order], p[order], labels[order]
    try:
        stream = EventStream(geometry, t, x, y, p, duration)
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    return LabeledEventStream(stream, labels)


MANIFEST_VERSION = 1


@dataclass
class ManifestEntry:
    name: str
    raw: str                 # path to raw (noisy) stream
    raw2: str | None         # second sampling, if a dual capture
    gt: str | None           # path to labeled GT stream
    split: str               # "train" | "test"


@dataclass
class DatasetManifest:
    geometry: Geometry
    dt_us: int
    entries: list
    root: Path

    def resolve(self, rel):
        return self.root / rel


def load_manifest(path):
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != MANIFEST_VERSION:
        raise ParseError(f"{path}: unsupported manifest version {doc.get('version')!r}")
    try:
        geometry = Geometry(int(doc["width"]), int(doc["height"]))
        dt_us = int(doc["dt_us"])
        entries = [ManifestEntry(e["name"], e["raw"], e.get("raw2"),
                                 e.get("gt"), e.get("split", "train"))
                   for e in doc["entries"]]
    except (KeyError, TypeError) as e:
        raise ParseError(f"{path}: bad manifest: missing {e}") from e
    manifest = DatasetManifest(geometry, dt_us, entries, path.parent)
    for e in entries:
        for tag, rel in (("raw", e.raw), ("raw2", e.raw2), ("gt", e.gt)):
            if rel is not None and not manifest.resolve(rel).exists():
                raise ParseError(f"{path}: entry {e.name!r}: {tag} file {rel!r} not found")
    return manifest


def save_manifest(manifest, path):
    doc = {
        "version": MANIFEST_VERSION,
        "width": manifest.geometry.width,
        "height": manifest.geometry.height,
        "dt_us": manifest.dt_us,
        "entries": [{k: v for k, v in
                     dict(name=e.name, raw=e.raw, raw2=e.raw2, gt=e.gt, split=e.split).items()
                     if v is not None}
                    for e in manifest.entries],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def iterate_pairs(manifest, split=None):
    """Yield (entry, raw LabeledEventStream, gt LabeledEventStream or None)."""
    for e in manifest.entries:
        if split is not None and e.split != split:
            continue
        raw = read_events(manifest.resolve(e.raw))
        gt = read_events(manifest.resolve(e.gt)) if e.gt is not None else None
        yield e, raw, gt
