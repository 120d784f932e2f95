"""Deterministic output writers: CSV tables, binary graymaps (P5) and a
manifest with SHA-256 checksums of every file in a run directory."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def to_gray(values, lo=None, hi=None, missing=None) -> np.ndarray:
    """Linear map of ``values`` to 0..255; ``missing`` cells become 0."""
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) if missing is None else (~missing & np.isfinite(v))
    lo = float(v[ok].min()) if lo is None and ok.any() else (lo or 0.0)
    hi = float(v[ok].max()) if hi is None and ok.any() else (hi if hi is not None else 1.0)
    span = hi - lo if hi > lo else 1.0
    g = np.clip(np.round((v - lo) / span * 254.0) + 1.0, 1, 255)
    g[~ok] = 0
    return g.astype(np.uint8)


def write_pgm(path, gray: np.ndarray) -> Path:
    """Binary portable graymap, rows top to bottom, maxval 255."""
    g = np.ascontiguousarray(gray, dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode())
        fh.write(g.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary graymap")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


MANIFEST = "manifest.txt"


def write_manifest(root, header: dict) -> Path:
    """List every file under ``root`` (except the manifest) with its checksum."""
    root = Path(root)
    files = sorted(
        p.relative_to(root).as_posix()
        for p in root.rglob("*")
        if p.is_file() and p.name != MANIFEST
    )
    lines = [f"{k} = {v}" for k, v in header.items()]
    lines.append("[files]")
    lines += [f"{sha256_file(root / f)}  {f}" for f in files]
    path = root / MANIFEST
    path.write_text("\n".join(lines) + "\n")
    return path


def verify_manifest(root) -> list[str]:
    """Problems found: missing, altered or unlisted (orphan) files."""
    root = Path(root)
    text = (root / MANIFEST).read_text().splitlines()
    listed = {}
    if "[files]" in text:
        for line in text[text.index("[files]") + 1 :]:
            digest, name = line.split("  ", 1)
            listed[name] = digest
    problems = []
    for name, digest in listed.items():
        p = root / name
        if not p.exists():
            problems.append(f"missing {name}")
        elif sha256_file(p) != digest:
            problems.append(f"altered {name}")
    for p in root.rglob("*"):
        if p.is_file() and p.name != MANIFEST:
            rel = p.relative_to(root).as_posix()
            if rel not in listed:
                problems.append(f"orphan {rel}")
    return problems


def tree_digest(root) -> dict:
    """``{relative path: sha256}`` for every file under ``root``."""
    root = Path(root)
    return {
        p.relative_to(root).as_posix(): sha256_file(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }

