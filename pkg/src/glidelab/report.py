"""Table rendering, output files and provenance stamps."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from typing import Mapping, Optional, Sequence

import numpy as np

from .simulation import OutcomeStats, PathDiagnostics


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def sha256_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def provenance(command: str, config: dict, inputs: Sequence[str]) -> dict:
    return {
        "command": command,
        "config_sha256": sha256_obj(config),
        "inputs": {p: sha256_file(p) for p in sorted(set(inputs))},
    }


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _csv_header(fh, prov: Optional[dict]) -> csv.writer:
    if prov is not None:
        fh.write("# provenance: " + json.dumps(prov, sort_keys=True) + "\n")
    return csv.writer(fh, lineterminator="\n")


def write_diagnostics(path: str, diags: Mapping[str, PathDiagnostics], prov: Optional[dict] = None) -> None:
    with open(path, "w", newline="") as fh:
        w = _csv_header(fh, prov)
        w.writerow(["strategy", "date", "mean_p", "std_p"])
        for name, d in diags.items():
            for t, (m, s) in enumerate(zip(d.mean_p, d.std_p)):
                w.writerow([name, t, repr(float(m)), repr(float(s))])


def write_replay(path: str, traj: Mapping[str, np.ndarray], start_year: int, prov: Optional[dict] = None) -> None:
    names = list(traj)
    with open(path, "w", newline="") as fh:
        w = _csv_header(fh, prov)
        w.writerow(["year"] + names)
        n = len(next(iter(traj.values())))
        for i in range(n):
            w.writerow([start_year + i] + [repr(float(traj[k][i])) for k in names])


def write_histogram(path: str, rows, prov: Optional[dict] = None) -> None:
    """rows: (series, bin_left, bin_right, density, normal_density, fitted_density)."""
    with open(path, "w", newline="") as fh:
        w = _csv_header(fh, prov)
        w.writerow(["series", "bin_left", "bin_right", "density", "normal_density", "fitted_density"])
        for r in rows:
            w.writerow([r[0]] + ["" if v is None else repr(float(v)) for v in r[1:]])


def _dollars(x: float) -> str:
    return f"${int(round(x / 1000.0)) * 1000:,}"


def _prob(p: float) -> str:
    s = f"{p:.2f}"
    return s[1:] if s.startswith("0") else s


def render_table(rows: Mapping[str, OutcomeStats], title: str = "") -> str:
    """Plain-text table: strategy, E[W_T], std[W_T], one column per shortfall threshold."""
    if not rows:
        return ""
    thresholds = sorted(next(iter(rows.values())).shortfall_probs)
    head = ["Strategy", "E[W_T]", "std[W_T]"] + [f"W_T < {_dollars(k)}" for k in thresholds]
    body = []
    for name, s in rows.items():
        body.append([name, _dollars(s.mean), _dollars(s.std)] + [_prob(s.shortfall_probs[k]) for k in thresholds])
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    out = io.StringIO()
    if title:
        out.write(title + "\n")
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    out.write(fmt(head) + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for r in body:
        out.write(fmt(r) + "\n")
    return out.getvalue()
