"""Convergence, pressure-robustness and locking experiments with CSV reports."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exact import get_solution
from .mesh import build_crisscross, build_diagonal
from .solver import compute_errors, solve_stokes, strong_load, weak_load

CASES = ("smooth", "jump", "locking")
SMOOTHERS = ("stnd", "qopt", "prob")
MESHES = ("diagonal", "crisscross")
BASE_COLUMNS = ["N", "ntri", "err_u_dg", "eoc_u", "err_p_l2", "eoc_p"]
LOCKING_COLUMNS = ["eta", "penalty", "err_u_dg1"]


@dataclass
class ExperimentConfig:
    """One experiment; ``None`` fields take the per-case defaults."""

    case: str = "smooth"
    smoother: str = "prob"
    mesh: str | None = None
    levels: tuple[int, int] = (0, 5)
    etas: tuple[float, ...] | None = None
    penalty: str = "full"
    ell: int = 1
    mu: float = 1.0
    out: str | None = None
    solver: str = "auto"

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"smoother must be one of {SMOOTHERS}")
        if self.mesh is None:
            self.mesh = "diagonal" if self.case == "locking" else "crisscross"
        if self.mesh not in MESHES:
            raise ValueError(f"mesh must be one of {MESHES}")
        if self.etas is None:
            self.etas = (10.0, 100.0, 1000.0) if self.case == "locking" else (6.0,)
        self.etas = tuple(float(e) for e in self.etas)
        if any(e <= 0 for e in self.etas):
            raise ValueError("penalty parameters must be positive")
        lo, hi = self.levels
        if lo < 0 or hi < lo:
            raise ValueError("levels must satisfy 0 <= A <= B")
        self.levels = (int(lo), int(hi))
        if self.penalty not in ("full", "weak"):
            raise ValueError("penalty must be 'full' or 'weak'")
        if self.ell < 1 or self.mu <= 0:
            raise ValueError("need ell >= 1 and mu > 0")


def compute_eoc(errors, counts) -> list[float | None]:
    """``EOC_N = log(e_N / e_{N-1}) / log(#M_{N-1} / #M_N)``; ``None`` where undefined."""
    if len(errors) != len(counts):
        raise ValueError("errors and counts must have equal length")
    out: list[float | None] = [None]
    for k in range(1, len(errors)):
        e0, e1 = errors[k - 1], errors[k]
        if not (e0 > 0 and e1 > 0) or counts[k] == counts[k - 1]:
            out.append(None)
            continue
        out.append(math.log(e1 / e0) / math.log(counts[k - 1] / counts[k]))
    return out


def _sig6(x):
    return None if x is None else float(f"{x:.5e}")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.5e}"


@dataclass
class ExperimentReport:
    columns: list[str]
    rows: list[dict]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.metadata, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("# "):
            meta = json.loads(lines[0][2:])
            lines = lines[1:]
        reader = csv.reader(lines)
        columns = next(reader)
        rows = []
        for rec in reader:
            row = {}
            for c, v in zip(columns, rec):
                if c in ("N", "ntri"):
                    row[c] = int(v)
                elif c == "penalty":
                    row[c] = v
                else:
                    row[c] = float(v) if v != "" else None
            rows.append(row)
        return cls(columns, rows, meta)

    @classmethod
    def read(cls, path) -> "ExperimentReport":
        return cls.from_csv(Path(path).read_text())

    def series(self, column: str, eta: float | None = None) -> list:
        return [r[column] for r in self.rows if eta is None or r.get("eta") == eta]

    def plot_data(self) -> str:
        """Long-format ``series,ntri,error`` pairs for external plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", "ntri", "error"])
        for r in self.rows:
            tag = "" if "eta" not in r else f"_eta{r['eta']:g}_{r['penalty']}"
            for col in ("err_u_dg", "err_p_l2", "err_u_dg1"):
                if col in r:
                    w.writerow([col + tag, r["ntri"], _fmt(r[col])])
        return buf.getvalue()


def build_mesh(family: str, N: int):
    return build_crisscross(N) if family == "crisscross" else build_diagonal(N)


def run_case(config: ExperimentConfig, verbose: bool = False) -> ExperimentReport:
    solution = get_solution(config.case)
    load = weak_load(solution) if solution.discontinuity is not None else strong_load(solution, config.mu)
    locking = config.case == "locking"
    columns = BASE_COLUMNS + (LOCKING_COLUMNS if locking else [])
    rows: list[dict] = []
    meta = {"config": asdict(config), "timings": {}, "notes": []}
    meta["config"]["levels"] = list(config.levels)
    meta["config"]["etas"] = list(config.etas)
    for eta in config.etas:
        raw = []
        for N in range(config.levels[0], config.levels[1] + 1):
            t0 = time.perf_counter()
            try:
                mesh = build_mesh(config.mesh, N)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    sol = solve_stokes(mesh, config.ell, eta, config.mu, config.smoother,
                                       config.penalty, load, method=config.solver)
                err = compute_errors(sol, solution, eta)
            except MemoryError:
                meta["notes"].append(f"level N={N} (eta={eta:g}) skipped: out of memory")
                break
            meta["timings"][f"eta={eta:g},N={N}"] = time.perf_counter() - t0
            raw.append((N, mesh.n_triangles, err))
            if verbose:
                print(f"  eta={eta:g} N={N} ntri={mesh.n_triangles} "
                      f"u_dg={err['velocity_dg']:.4e} p={err['pressure_l2']:.4e}", flush=True)
        counts = [r[1] for r in raw]
        eoc_u = compute_eoc([r[2]["velocity_dg"] for r in raw], counts)
        eoc_p = compute_eoc([r[2]["pressure_l2"] for r in raw], counts)
        for k, (N, ntri, err) in enumerate(raw):
            row = {"N": N, "ntri": ntri, "err_u_dg": _sig6(err["velocity_dg"]),
                   "eoc_u": _sig6(eoc_u[k]), "err_p_l2": _sig6(err["pressure_l2"]),
                   "eoc_p": _sig6(eoc_p[k])}
            if locking:
                row.update(eta=_sig6(eta), penalty=config.penalty, err_u_dg1=_sig6(err["velocity_dg1"]))
            rows.append(row)
    report = ExperimentReport(columns, rows, meta)
    if config.out:
        report.write(config.out)
    return report


def format_table(report: ExperimentReport) -> str:
    cols = report.columns
    lines = ["  ".join(f"{c:>11s}" for c in cols)]
    for r in report.rows:
        lines.append("  ".join(f"{_fmt(r[c]):>11s}" for c in cols))
    return "\n".join(lines)
