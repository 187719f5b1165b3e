"""CSV emission/ingestion with ``#`` provenance headers, and key = value fit reports."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .signal import LDTrace, SpectralPeak

TRACE_HEADER = ("t_ps", "ld")
SPECTRUM_HEADER = ("freq_thz", "amplitude", "label")


class CSVParseError(ValueError):
    """Malformed CSV; message names the file and 1-based line number."""


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def provenance(config_digest: str = "", seed: int | None = None, **extra) -> dict[str, str]:
    out = {"tool": f"he2coherence {__version__}"}
    if config_digest:
        out["config_sha256"] = config_digest
    if seed is not None:
        out["seed"] = str(seed)
    out.update({k: _fmt(v) for k, v in extra.items()})
    return out


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict[str, str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path, header: Sequence[str] | None = None, numeric: Sequence[str] | None = None):
    """Return (meta, header, columns dict).  ``numeric`` columns are parsed as floats."""
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError:
        raise CSVParseError(f"{path}: file not found") from None
    meta: dict[str, str] = {}
    found_header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if found_header is None and ":" in line:
                k, v = line[1:].split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        fields_ = next(csv.reader([line]))
        if found_header is None:
            found_header = tuple(f.strip() for f in fields_)
            if header is not None and found_header != tuple(header):
                raise CSVParseError(f"{path}:{lineno}: header {','.join(found_header)} != {','.join(header)}")
            continue
        if len(fields_) != len(found_header):
            raise CSVParseError(f"{path}:{lineno}: expected {len(found_header)} fields, got {len(fields_)}")
        rows.append((lineno, fields_))
    if found_header is None:
        raise CSVParseError(f"{path}: missing header line")
    numeric = found_header if numeric is None else numeric
    cols: dict[str, list] = {h: [] for h in found_header}
    for lineno, fields_ in rows:
        for h, v in zip(found_header, fields_):
            if h in numeric:
                try:
                    cols[h].append(float(v))
                except ValueError:
                    raise CSVParseError(f"{path}:{lineno}: column {h!r}: cannot parse {v!r} as a number") from None
            else:
                cols[h].append(v)
    out = {h: (np.array(v, dtype=float) if h in numeric else v) for h, v in cols.items()}
    return meta, found_header, out


def write_trace(path, trace: LDTrace, meta=None) -> Path:
    return write_csv(path, TRACE_HEADER, zip(trace.times, trace.values), meta)


def read_trace(path) -> LDTrace:
    meta, _, cols = read_csv(path, TRACE_HEADER)
    try:
        return LDTrace(cols["t_ps"], cols["ld"], dict(meta))
    except ValueError as exc:
        raise CSVParseError(f"{path}: {exc}") from None


def write_spectrum(path, freqs, amps, label: str = "spectrum", meta=None) -> Path:
    return write_csv(path, SPECTRUM_HEADER, ((f, a, label) for f, a in zip(freqs, amps)), meta)


def write_peaks(path, peaks: Sequence[SpectralPeak], meta=None) -> Path:
    return write_csv(path, SPECTRUM_HEADER, ((p.frequency_thz, p.amplitude, p.label) for p in peaks), meta)


def read_peaks(path) -> list[SpectralPeak]:
    _, _, cols = read_csv(path, SPECTRUM_HEADER, numeric=("freq_thz", "amplitude"))
    return [SpectralPeak(float(f), float(a), lab) for f, a, lab in zip(cols["freq_thz"], cols["amplitude"], cols["label"])]


def write_report(path, items: dict, meta=None) -> Path:
    """key = value lines; nested dicts are flattened with dots."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]

    def emit(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                emit(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(obj, (list, tuple, np.ndarray)):
            lines.append(f"{prefix} = " + ", ".join(_fmt(v) for v in obj))
        else:
            lines.append(f"{prefix} = {_fmt(obj)}")

    emit("", items)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        k, _, v = line.partition(" = ")
        out[k] = v
    return out
