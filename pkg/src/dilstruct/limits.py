"""Numerical extraction of scale limits.

Every scale limit in the library is evaluated on a decreasing grid of
scales and summarized by a ConvergenceReport: an extrapolated limit, a
Cauchy flag, a fitted convergence rate, and the spread of the tail (the
oscillation diagnostic for non-convergent samplers).

Convergence accounting for point-valued samplers is done on chart
coordinates (Euclidean gaps): the chart topology agrees with the metric
topology for every builtin space, and coordinate gaps avoid the precision
collapse of gauge-type metrics near zero.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRID = 2.0 ** -np.arange(2, 17)
DEFAULT_TOL = 1e-6

# a Richardson step applies when the fitted rate is this close to an integer
RATE_SNAP = 0.2


def default_grid(k_min: int = 2, k_max: int = 16) -> np.ndarray:
    return 2.0 ** -np.arange(k_min, k_max + 1)


@dataclass
class ConvergenceReport:
    eps_grid: np.ndarray
    values: list
    limit: object  # float or ndarray, None when extraction failed
    cauchy_ok: bool
    rate: float | None  # None when undefined (constant tail)
    spread: float
    err_est: float
    tol: float
    partial: bool = False
    failures: list = field(default_factory=list)  # (eps, message)
    extra: dict = field(default_factory=dict)

    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "eps": [float(e) for e in self.eps_grid],
            "values": [conv(v) for v in self.values],
            "limit": conv(self.limit),
            "cauchy_ok": bool(self.cauchy_ok),
            "rate": None if self.rate is None else float(self.rate),
            "spread": float(self.spread),
            "err_est": float(self.err_est),
            "tol": float(self.tol),
            "partial": bool(self.partial),
            "failures": [[float(e), msg] for e, msg in self.failures],
            "extra": {k: conv(v) for k, v in self.extra.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self) -> list[list]:
        rows = []
        for e, v in zip(self.eps_grid, self.values):
            v = np.atleast_1d(np.asarray(v, dtype=float))
            rows.append([float(e)] + [float(x) for x in v])
        return rows


def _norm(v) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(v, dtype=float))))


def extract_limit(sampler, grid=None, tol: float = DEFAULT_TOL) -> ConvergenceReport:
    """Evaluate ``sampler(eps)`` over a decreasing grid and extract the limit.

    The anchor index is chosen where the successive gaps stop decreasing
    (after that point roundoff noise dominates).  When the log-log fitted
    gap rate snaps to a positive integer p, a two-stage Richardson tableau
    at orders p and p+1 supplies the limit; otherwise the anchor value is
    reported raw.  ``cauchy_ok`` holds iff the tail gaps are all below
    ``tol``, or the gaps decay at a positive rate and the extrapolation
    error estimate is below ``tol``.  Sampler failures produce a partial
    report instead of raising.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if len(grid) < 4:
        raise ValueError("need at least 4 grid points")
    if np.any(np.diff(grid) >= 0) or np.any(grid <= 0):
        raise ValueError("grid must be strictly decreasing and positive")

    eps_ok, values, failures = [], [], []
    for e in grid:
        try:
            values.append(sampler(float(e)))
            eps_ok.append(float(e))
        except Exception as exc:  # noqa: BLE001 - failures become report content
            failures.append((float(e), str(exc)))
    partial = bool(failures)
    if len(values) < 3:
        return ConvergenceReport(
            eps_grid=np.asarray(eps_ok),
            values=values,
            limit=values[-1] if values else None,
            cauchy_ok=False,
            rate=None,
            spread=math.inf,
            err_est=math.inf,
            tol=tol,
            partial=partial,
            failures=failures,
        )

    eps_arr = np.asarray(eps_ok)
    arr = [np.asarray(v, dtype=float) for v in values]
    gaps = np.array([_norm(arr[i + 1] - arr[i]) for i in range(len(arr) - 1)])
    scale = max(1.0, _norm(arr[-1]))
    noise = 1e-15 * scale

    # anchor: the value right after the smallest significant gap
    sig = np.nonzero(gaps > noise)[0]
    if len(sig) == 0:
        # constant (to roundoff) sampler
        tail = arr[-4:]
        spread = max(_norm(a - b) for a in tail for b in tail)
        return ConvergenceReport(
            eps_grid=eps_arr,
            values=values,
            limit=values[-1],
            cauchy_ok=True,
            rate=None,
            spread=spread,
            err_est=0.0,
            tol=tol,
            partial=partial,
            failures=failures,
        )
    j_star = int(sig[np.argmin(gaps[sig])])
    anchor = j_star + 1

    # rate: log-log slope over the decreasing window before the anchor
    window = [j for j in range(max(0, j_star - 5), j_star + 1) if gaps[j] > noise]
    rate = None
    if len(window) >= 2:
        slope, _ = np.polyfit(np.log(eps_arr[window]), np.log(gaps[window]), 1)
        rate = float(slope)

    # tableau at orders p, p+1 anchored on the last three pre-noise values
    limit_arr = arr[anchor]
    err_est = gaps[j_star]
    if rate is not None:
        p = round(rate)
        if p >= 1 and abs(rate - p) <= RATE_SNAP and anchor >= 2:
            r2 = eps_arr[anchor - 1] / eps_arr[anchor]
            r1 = eps_arr[anchor - 2] / eps_arr[anchor - 1]
            t1 = arr[anchor] + (arr[anchor] - arr[anchor - 1]) / (r2**p - 1.0)
            if abs(r1 - r2) < 1e-9:
                t1_prev = arr[anchor - 1] + (arr[anchor - 1] - arr[anchor - 2]) / (r1**p - 1.0)
                t2 = t1 + (t1 - t1_prev) / (r2 ** (p + 1) - 1.0)
                limit_arr = t2
                err_est = _norm(t2 - t1)
            else:
                limit_arr = t1
                err_est = _norm(t1 - arr[anchor])

    n_tail = max(3, len(gaps) // 3)
    tail_gaps = gaps[max(0, anchor - n_tail):anchor]
    decaying = (
        rate is not None
        and rate >= 0.2
        and len(window) >= 2
        and gaps[window[-1]] <= gaps[window[0]]
    )
    cauchy_ok = bool(np.all(tail_gaps < tol)) or (decaying and err_est < tol)

    tail_vals = arr[-(n_tail + 1):]
    spread = max(
        (_norm(tail_vals[i] - tail_vals[j]) for i in range(len(tail_vals)) for j in range(i)),
        default=0.0,
    )

    limit = limit_arr
    if np.ndim(values[0]) == 0:
        limit = float(limit_arr)
    return ConvergenceReport(
        eps_grid=eps_arr,
        values=values,
        limit=limit,
        cauchy_ok=cauchy_ok,
        rate=rate,
        spread=float(spread),
        err_est=float(err_est),
        tol=tol,
        partial=partial,
        failures=failures,
    )
