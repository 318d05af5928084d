"""Quasi-concave parameter functions.

A parameter function is stored by its kind and evaluated through
``log_eval``, which maps ``log t`` to ``log phi(t)``.  Working in log-log
coordinates keeps evaluation finite at window edges such as 1e-24 or 1e24.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, InvalidParameterError

DEFAULT_WINDOW = (1e-12, 1e12)
DEFAULT_EPS_DEG = 1e-3
QC_RTOL = 1e-12

KINDS = ("power_log", "composite", "table")


@dataclass
class VerificationReport:
    """Outcome of a verification pass.

    ``violations`` holds one dict per failed check; ``values`` carries the
    probed quantities so callers can log or serialize them.
    """

    check: str
    violations: list[dict[str, Any]] = field(default_factory=list)
    values: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "passed": self.passed,
            "violations": self.violations,
            "values": self.values,
        }


@dataclass(frozen=True)
class QuasiConcaveFn:
    """A positive function on (0, inf), evaluated in log-log coordinates.

    Use :func:`power_log`, :func:`tabulated` or :func:`compose_parameter`
    rather than constructing instances directly.
    """

    kind: str
    theta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    parts: tuple[QuasiConcaveFn, QuasiConcaveFn, QuasiConcaveFn] | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown function kind {self.kind!r}")
        if self.kind == "table":
            pts = np.asarray(self.table, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise DomainError("table needs at least two (t, phi) points")
            if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
                raise DomainError("table points must be positive and finite")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise DomainError("table abscissae must be strictly increasing")
            lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
            object.__setattr__(self, "_lx", lx)
            object.__setattr__(self, "_ly", ly)
            object.__setattr__(self, "_slopes", np.diff(ly) / np.diff(lx))

    def log_eval(self, x):
        """Return ``log phi(exp(x))``; ``x`` may be a float or an array."""
        if self.kind == "power_log":
            out = self.theta * x
            if self.a:
                out = out + self.a * _log_log_e_plus(x)
            if self.b:
                out = out - self.b * _log_log_e_plus(-x)
            return out
        if self.kind == "composite":
            phi, phi0, phi1 = self.parts
            l0 = phi0.log_eval(x)
            return l0 + phi.log_eval(phi1.log_eval(x) - l0)
        lx, ly, s = self._lx, self._ly, self._slopes
        xa = np.asarray(x, dtype=float)
        out = np.interp(xa, lx, ly)
        out = np.where(xa < lx[0], ly[0] + s[0] * (xa - lx[0]), out)
        out = np.where(xa > lx[-1], ly[-1] + s[-1] * (xa - lx[-1]), out)
        return out if out.ndim else float(out)

    def __call__(self, t):
        return eval_fn(self, t)

    def to_spec(self) -> dict[str, Any]:
        if self.kind == "power_log":
            return {"kind": "power_log", "theta": self.theta, "a": self.a, "b": self.b}
        if self.kind == "composite":
            phi, phi0, phi1 = self.parts
            return {
                "kind": "composite",
                "phi": phi.to_spec(),
                "phi0": phi0.to_spec(),
                "phi1": phi1.to_spec(),
            }
        return {"kind": "table", "points": [list(p) for p in self.table]}

    def __repr__(self) -> str:
        if self.kind == "power_log":
            return f"power_log(theta={self.theta}, a={self.a}, b={self.b})"
        if self.kind == "composite":
            return "composite({!r}; {!r}, {!r})".format(*self.parts)
        return f"tabulated({len(self.table)} points)"


def _log_log_e_plus(x):
    """``log(log(e + exp(x)))``, accurate when exp(x) is tiny."""
    xa = np.asarray(x, dtype=float)
    small = np.log1p(np.log1p(np.exp(np.minimum(xa, 1.0) - 1.0)))
    out = np.where(xa < 1.0, small, np.log(np.logaddexp(1.0, xa)))
    return out if out.ndim else float(out)


def _check_t(t):
    ta = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(ta)) or np.any(ta <= 0):
        raise DomainError(f"evaluation point must be positive and finite, got {t!r}")
    return ta


def eval_fn(f: QuasiConcaveFn, t):
    """Evaluate ``f`` at ``t > 0`` (scalar or array)."""
    ta = _check_t(t)
    out = np.exp(f.log_eval(np.log(ta)))
    return float(out) if np.ndim(out) == 0 else out


def probe_grid(t_min: float = 1e-30, t_max: float = 1e30, per_octave: int = 4) -> np.ndarray:
    """Geometric grid with ``per_octave`` points per factor of two."""
    lo = math.floor(math.log2(t_min) * per_octave)
    hi = math.ceil(math.log2(t_max) * per_octave)
    return np.exp2(np.arange(lo, hi + 1) / per_octave)


def verify_quasi_concave(f: QuasiConcaveFn, grid=None, rtol: float = QC_RTOL) -> VerificationReport:
    """Check that phi is non-decreasing and phi(t)/t non-increasing on ``grid``.

    Every adjacent grid pair violating either monotonicity beyond ``rtol``
    is listed.  Tabulated functions additionally get a per-segment slope
    check in log-log coordinates (slope must lie in [0, 1]).
    """
    if grid is None:
        grid = probe_grid()
    g = np.asarray(grid, dtype=float)
    if g.size == 0:
        raise DomainError("empty probe grid")
    if g.size < 3 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise DomainError("probe grid needs >= 3 strictly increasing positive points")
    lt = np.log(g)
    lphi = np.asarray(f.log_eval(lt), dtype=float)
    report = VerificationReport("quasi_concave")
    if not np.all(np.isfinite(lphi)):
        report.violations.append({"kind": "non_finite"})
        return report
    tol = math.log1p(rtol)
    d_phi = np.diff(lphi)
    d_ratio = d_phi - np.diff(lt)
    for j in np.nonzero(d_phi < -tol)[0]:
        report.violations.append(
            {"kind": "phi_decreasing", "t": float(g[j]), "t_next": float(g[j + 1]),
             "log_slack": float(d_phi[j])})
    for j in np.nonzero(d_ratio > tol)[0]:
        report.violations.append(
            {"kind": "ratio_increasing", "t": float(g[j]), "t_next": float(g[j + 1]),
             "log_slack": float(d_ratio[j])})
    if f.kind == "table":
        for j, s in enumerate(f._slopes):
            if s < -tol or s > 1 + tol:
                report.violations.append({"kind": "segment_slope", "segment": j, "slope": float(s)})
    report.values = {"grid_points": int(g.size), "t_min": float(g[0]), "t_max": float(g[-1])}
    return report


def verify_nondegenerate(f: QuasiConcaveFn, window=DEFAULT_WINDOW,
                         eps_deg: float = DEFAULT_EPS_DEG) -> VerificationReport:
    """Finite-window surrogate for the four vanishing limits at 0 and infinity."""
    t_min, t_max = map(float, window)
    if not (0 < t_min < 1 < t_max) or not math.isfinite(t_max):
        raise DomainError(f"window must satisfy 0 < t_min < 1 < t_max, got {window!r}")
    lo, hi = f.log_eval(math.log(t_min)), f.log_eval(math.log(t_max))
    values = {
        "phi(t_min)": math.exp(lo),
        "t_min/phi(t_min)": math.exp(math.log(t_min) - lo),
        "phi(t_max)/t_max": math.exp(hi - math.log(t_max)),
        "1/phi(t_max)": math.exp(-hi),
    }
    report = VerificationReport("nondegenerate", values=values)
    for name, v in values.items():
        if not v < eps_deg:
            report.violations.append({"kind": name, "value": v, "threshold": eps_deg})
    return report


def power_log(theta: float, a: float = 0.0, b: float = 0.0, *, verify: bool = True) -> QuasiConcaveFn:
    """``t**theta * log(e+t)**a * log(e+1/t)**(-b)``.

    Raises InvalidParameterError if the result is not quasi-concave on the
    default probe grid; no closed-form constraint on (theta, a, b) is used.
    """
    if not 0 < theta < 1:
        raise InvalidParameterError(f"theta must lie in (0, 1), got {theta}")
    f = QuasiConcaveFn("power_log", theta=float(theta), a=float(a), b=float(b))
    if verify:
        rep = verify_quasi_concave(f)
        if not rep:
            raise InvalidParameterError(
                f"{f!r} is not quasi-concave: {rep.violations[0]}")
    return f


def tabulated(points) -> QuasiConcaveFn:
    """Piecewise-linear interpolation of ``points`` in (log t, log phi).

    Outside the table the end segments are extended.  No verification is
    done here: tabulated functions are how degenerate or non-concave test
    inputs get built.
    """
    return QuasiConcaveFn("table", table=tuple((float(t), float(v)) for t, v in points))


def compose_parameter(phi: QuasiConcaveFn, phi0: QuasiConcaveFn, phi1: QuasiConcaveFn, *,
                      window=DEFAULT_WINDOW, eps_deg: float = DEFAULT_EPS_DEG,
                      grid=None) -> QuasiConcaveFn:
    """Return ``t -> phi0(t) * phi(phi1(t) / phi0(t))``."""
    for name, g in (("phi", phi), ("phi0", phi0), ("phi1", phi1)):
        for rep in (verify_quasi_concave(g, grid), verify_nondegenerate(g, window, eps_deg)):
            if not rep:
                raise InvalidParameterError(f"{name} fails {rep.check}: {rep.violations[0]}")
    out = QuasiConcaveFn("composite", parts=(phi, phi0, phi1))
    rep = verify_quasi_concave(out, grid)
    if not rep:
        raise InvalidParameterError(f"composite fails quasi-concavity: {rep.violations[0]}")
    return out


def dilation_function(f: QuasiConcaveFn, t: float, grid=None) -> float:
    """Grid supremum of ``phi(u t) / phi(u)`` over ``u`` in ``grid``."""
    if grid is None:
        grid = probe_grid()
    lu = np.log(np.asarray(grid, dtype=float))
    lt = math.log(_check_t(t))
    return float(np.exp(np.max(f.log_eval(lu + lt) - f.log_eval(lu))))


def is_quasi_power(f: QuasiConcaveFn, window=DEFAULT_WINDOW, grid=None,
                   threshold: float = 1e-2) -> VerificationReport:
    """Probe whether the dilation function vanishes at 0 and blows up at infinity.

    Passes when ``s(t_min) <= threshold`` and ``s(t_max) >= 1/threshold``.
    """
    t_min, t_max = map(float, window)
    s_lo = dilation_function(f, t_min, grid)
    s_hi = dilation_function(f, t_max, grid)
    rep = VerificationReport("quasi_power", values={"s(t_min)": s_lo, "s(t_max)": s_hi})
    if s_lo > threshold:
        rep.violations.append({"kind": "s_not_vanishing", "value": s_lo, "threshold": threshold})
    if s_hi < 1 / threshold:
        rep.violations.append({"kind": "s_not_blowing_up", "value": s_hi, "threshold": 1 / threshold})
    return rep


def from_spec(spec: dict[str, Any]) -> QuasiConcaveFn:
    """Build a function from its JSON configuration object."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise DomainError(f"function spec must be an object with a 'kind' field, got {spec!r}")
    kind = spec["kind"]
    if kind == "power_log":
        if "theta" not in spec:
            raise DomainError("power_log spec needs 'theta'")
        return power_log(spec["theta"], spec.get("a", 0.0), spec.get("b", 0.0))
    if kind == "composite":
        missing = [k for k in ("phi", "phi0", "phi1") if k not in spec]
        if missing:
            raise DomainError(f"composite spec is missing {missing}")
        return compose_parameter(from_spec(spec["phi"]), from_spec(spec["phi0"]),
                                 from_spec(spec["phi1"]))
    if kind in ("table", "tabulated"):
        if "points" not in spec:
            raise DomainError("table spec needs 'points'")
        return tabulated(spec["points"])
    raise DomainError(f"unknown function kind {kind!r}")
