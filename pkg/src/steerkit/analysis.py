"""Violations, detection-efficiency and white-noise thresholds, and scans.

Closed forms assume lossy von Neumann measurements on the isotropic state
``w|phi+><phi+| + (1-w) 1/d^2`` paired with the transposed functional whose
no-click weight is ``cos_theta``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .assemblages import Assemblage
from .steering import SteeringFunctional

VIOLATION_MARGIN = 1e-12
IMAG_TOL = 1e-10
BISECT_TOL = 1e-6

CSV_COLUMNS = ("d", "n", "eta", "w", "beta", "bound", "violated", "V")


@dataclass(frozen=True)
class ViolationReport:
    beta: float
    lhs_analytic: float
    lhs_exact: float | None
    violated: bool
    normalized_violation: float

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "lhs_analytic": self.lhs_analytic,
            "lhs_exact": self.lhs_exact,
            "violated": self.violated,
            "V": self.normalized_violation,
        }


@dataclass(frozen=True)
class ThresholdReport:
    n: int
    d: int
    cos_theta: float
    eta_critical: float | None  # None: unattainable
    w_critical: float | None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "cos_theta": self.cos_theta,
            "eta_critical": self.eta_critical,
            "w_critical": self.w_critical,
        }


def beta_value(f: SteeringFunctional, a: Assemblage) -> float:
    """Real part of sum_{a,x} tr(F_{a|x} sigma_{a|x})."""
    if (f.n, f.dim) != (a.n, a.dim):
        raise ValueError(
            f"functional is (n={f.n}, d={f.dim}) but assemblage is (n={a.n}, d={a.dim})"
        )
    ops = f.operators() if a.has_no_click else f.click
    total = np.einsum("xaij,xaji->", ops, a.members)
    if abs(total.imag) > IMAG_TOL:
        raise ValueError(f"functional pairing has imaginary part {total.imag:.3g}")
    return float(total.real)


def violation(
    f: SteeringFunctional, a: Assemblage, bound: float, exact: float | None = None
) -> ViolationReport:
    beta = beta_value(f, a)
    return ViolationReport(
        beta=beta,
        lhs_analytic=bound,
        lhs_exact=exact,
        violated=beta > bound + VIOLATION_MARGIN,
        normalized_violation=normalized_violation(beta, bound),
    )


def quantum_beta(n: int, cos_theta: float, eta: float) -> float:
    """Value on the maximally entangled state with efficiency eta."""
    return n * (eta + (1 - eta) * cos_theta)


def noisy_beta(n: int, d: int, cos_theta: float, eta: float, w: float) -> float:
    """Value on the isotropic state with visibility w and efficiency eta."""
    return n * (eta * w + eta * (1 - w) / d + (1 - eta) * cos_theta)


def _check_unit(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def critical_eta(n: int, d: int, cos_theta: float, w: float) -> float | None:
    """Efficiency above which steering is shown; None when no eta <= 1 works."""
    _check_unit("w", w)
    _check_unit("cos_theta", cos_theta)
    if cos_theta >= 1.0:
        raise ValueError("cos_theta = 1 gives a trivial inequality")
    gap = 1.0 - cos_theta
    denom = gap - (1 - w) * (1 - 1 / d)
    if denom <= 0:
        return None
    eta = gap / (n * denom)
    return eta if eta <= 1.0 else None


def critical_w(n: int, d: int, cos_theta: float, eta: float) -> float | None:
    """Visibility above which steering is shown; None when no w <= 1 works."""
    _check_unit("eta", eta)
    _check_unit("cos_theta", cos_theta)
    if eta == 0:
        raise ValueError("eta must be positive")
    if cos_theta >= 1.0:
        raise ValueError("cos_theta = 1 gives a trivial inequality")
    w = 1.0 - (1.0 - 1.0 / (n * eta)) * (1.0 - cos_theta) / (1.0 - 1.0 / d)
    return w if 0.0 <= w <= 1.0 else None


def thresholds(n: int, d: int, cos_theta: float, eta: float = 1.0, w: float = 1.0) -> ThresholdReport:
    return ThresholdReport(
        n=n,
        d=d,
        cos_theta=cos_theta,
        eta_critical=critical_eta(n, d, cos_theta, w),
        w_critical=critical_w(n, d, cos_theta, eta) if eta > 0 else None,
    )


def normalized_violation(beta: float, lhs: float) -> float:
    if lhs <= 0:
        raise ValueError("LHS bound must be positive")
    return abs(beta) / abs(lhs)


def bisect_flip(predicate, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Locate where ``predicate`` turns from False (at lo) to True (at hi)."""
    if predicate(lo) or not predicate(hi):
        raise ValueError("predicate must be False at lo and True at hi")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def mub_cos_theta(d: int) -> float:
    return 1.0 / math.sqrt(d)


def asymptotic_table(primes, w: float = 0.9, eta: float = 1.0) -> list[dict]:
    """Exact thresholds next to their large-d predictors for d+1 MUBs."""
    rows = []
    for d in primes:
        n, c = d + 1, mub_cos_theta(d)
        eta_c = critical_eta(n, d, c, w)
        w_c = critical_w(n, d, c, eta)
        eta_pred = 1.0 / (w * d)
        w_pred = 1.0 / math.sqrt(d) + (1 - eta) / (eta * d)
        v = quantum_beta(n, c, eta) / (1 + (n - 1) * c)
        rows.append(
            {
                "d": d,
                "eta_c": eta_c,
                "eta_pred": eta_pred,
                "eta_ratio_dev": None if eta_c is None else abs(eta_c * w * d - 1),
                "eta_resid_scaled": None if eta_c is None else (eta_c - eta_pred) * d**1.5,
                "w_c": w_c,
                "w_pred": w_pred,
                "w_resid_scaled": None if w_c is None else (w_c - w_pred) * d**1.5,
                "V": v,
                "V_pred": eta * math.sqrt(d),
                "V_slack": v - eta * math.sqrt(d),
            }
        )
    return rows


def scan_region(d: int, n: int, eta_grid, w_grid, cos_theta: float | None = None) -> list[dict]:
    """Steering-demonstrable flag over an (eta, w) grid, eta-major order."""
    c = mub_cos_theta(d) if cos_theta is None else cos_theta
    bound = 1.0 + (n - 1) * c
    rows = []
    for eta in eta_grid:
        for w in w_grid:
            beta = noisy_beta(n, d, c, eta, w)
            rows.append(
                {
                    "d": d,
                    "n": n,
                    "eta": float(eta),
                    "w": float(w),
                    "beta": beta,
                    "bound": bound,
                    "violated": beta > bound + VIOLATION_MARGIN,
                    "V": normalized_violation(beta, bound),
                }
            )
    return rows


def demonstrable_fraction(rows) -> float:
    return sum(r["violated"] for r in rows) / len(rows)


def fig2_rows(primes, eta: float = 1.0) -> list[dict]:
    """Critical-visibility curves: d+1 MUBs and 2 MUBs, plus placeholders."""
    rows = []
    for curve, n_of in (("mub_all", lambda d: d + 1), ("mub_two", lambda d: 2)):
        for d in primes:
            n, c = n_of(d), mub_cos_theta(d)
            bound = 1.0 + (n - 1) * c
            w_c = critical_w(n, d, c, eta)
            beta = None if w_c is None else noisy_beta(n, d, c, eta, w_c)
            rows.append(
                {
                    "curve": curve,
                    "d": d,
                    "n": n,
                    "eta": eta,
                    "w": w_c,
                    "beta": beta,
                    "bound": bound,
                    "violated": False,
                    "V": None if beta is None else normalized_violation(beta, bound),
                    "note": "" if w_c is not None else "unattainable",
                }
            )
    for curve in ("lhs_model_projective", "entropic_steering", "cglmp_bell"):
        for d in primes:
            rows.append(
                {"curve": curve, "d": d, "n": None, "eta": eta, "w": None, "beta": None,
                 "bound": None, "violated": None, "V": None,
                 "note": "comparison curve from external work; not computed"}
            )
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".12g")


def to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def to_json(rows, columns=CSV_COLUMNS) -> str:
    def clean(v):
        if isinstance(v, (np.bool_,)):
            return bool(v)
        if isinstance(v, float):
            return float(format(v, ".12g"))
        return v

    return json.dumps([{c: clean(r.get(c)) for c in columns} for r in rows], indent=1) + "\n"
