"""Rates of every scheme over a grid of average powers, written as CSV."""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .config import SolverConfig
from .fading import RayleighFadingPair
from .numerics import ConvergenceError
from .policies import PowerConstraint
from .rates import SCHEMES, evaluate_scheme, high_snr_limit, onoff_rate_closed_form

__all__ = ["SweepResult", "db_to_power", "power_to_db", "db_range", "run_sweep", "sweep_columns"]

# dual variable reported per scheme; on/off reports its threshold instead
_LAMBDA_SCHEMES = ("full_csi", "main_csi", "constant_rate")


def db_to_power(db: float) -> float:
    return 10.0 ** (db / 10.0)


def power_to_db(p: float) -> float:
    return 10.0 * math.log10(p)


def db_range(start: float, stop: float, step: float) -> List[float]:
    """Inclusive arithmetic grid start, start+step, ..., stop."""
    if step <= 0 or stop < start:
        raise ValueError("dB range needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def sweep_columns(schemes: Sequence[str]) -> List[str]:
    """CSV header: p_bar in dB, rates in scheme order, then per-scheme detail."""
    ordered = [s for s in SCHEMES if s in schemes]
    cols = ["pbar_db", "pbar", *ordered]
    if "onoff" in ordered:
        cols.append("onoff_tau0")
    cols.append("high_snr_limit")
    cols += [f"power_{s}" for s in ordered]
    cols += [f"lambda_{s}" for s in ordered if s in _LAMBDA_SCHEMES]
    if "onoff" in ordered:
        cols.append("tau_onoff")
    cols.append("converged")
    return cols


@dataclass
class SweepResult:
    gamma_m: float
    gamma_e: float
    unit: str
    columns: List[str]
    rows: List[dict]

    @property
    def converged(self) -> bool:
        return all(r["converged"] for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return "%.12g" % value


def _row(args):
    gamma_m, gamma_e, db, schemes, cfg, limit = args
    model = RayleighFadingPair(gamma_m, gamma_e)
    p_bar = db_to_power(db)
    constraint = PowerConstraint(p_bar)
    scale = 1.0 / math.log(2.0) if cfg.unit == "bits" else 1.0
    row = {"pbar_db": db, "pbar": p_bar, "high_snr_limit": limit * scale, "converged": True}
    for scheme in schemes:
        try:
            ev = evaluate_scheme(scheme, model, constraint, cfg)
        except ConvergenceError:
            row.update({scheme: math.nan, f"power_{scheme}": math.nan, "converged": False})
            if scheme in _LAMBDA_SCHEMES:
                row[f"lambda_{scheme}"] = math.nan
            if scheme == "onoff":
                row.update({"tau_onoff": math.nan, "onoff_tau0": math.nan})
            continue
        row[scheme] = ev.rate_nats * scale
        row[f"power_{scheme}"] = ev.realized_power
        if scheme in _LAMBDA_SCHEMES:
            row[f"lambda_{scheme}"] = ev.diagnostics["lam"]
        if scheme == "onoff":
            row["tau_onoff"] = ev.diagnostics["tau"]
            row["onoff_tau0"] = max(onoff_rate_closed_form(model, constraint, 0.0), 0.0) * scale
        if scheme == "constant_rate" and not ev.diagnostics["converged"]:
            row["converged"] = False
    return row


def run_sweep(
    model: RayleighFadingPair,
    pbar_db: Sequence[float],
    schemes: Sequence[str] = SCHEMES,
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 1,
) -> SweepResult:
    """Evaluate ``schemes`` at each grid point; rows come back sorted by p_bar.

    Rows are independent and run on up to ``jobs`` processes; the output
    does not depend on the number of workers.
    """
    if not len(pbar_db):
        raise ValueError("power grid is empty")
    unknown = set(schemes) - set(SCHEMES)
    if unknown:
        raise ValueError(f"unknown schemes {sorted(unknown)}; expected some of {SCHEMES}")
    ordered = [s for s in SCHEMES if s in schemes]
    grid = sorted(set(float(d) for d in pbar_db))
    limit = high_snr_limit(model, cfg)
    tasks = [(model.gamma_m, model.gamma_e, db, ordered, cfg, limit) for db in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_row, tasks))
    else:
        rows = [_row(t) for t in tasks]
    return SweepResult(model.gamma_m, model.gamma_e, cfg.unit, sweep_columns(ordered), rows)
