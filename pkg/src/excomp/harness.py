"""Comparison checks between a triangulated minimal surface and a model space.

Turns the discrete measurements (areas, fluxes, capacities, exit times,
eigenvalues, end counts) and the corresponding model quantities into
machine-checkable verdicts: ordering and monotonicity of the volume and flux
quotients, the capacity sandwich, exit-time domination, the ends bound with
its asymptotic variant, and the two-sided tone bounds.

Every check records both numeric sides, the tolerance it was judged at, and
a verdict in {pass, fail, inconclusive}; hypothesis gates (balance from
below, sign of w', ambient curvature bound) are evaluated first and a failed
gate yields inconclusive, never pass.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dgeom
from .errors import DomainError
from .modelspace import DEFAULT_QUAD, ModelSpace, QuadratureConfig, _top_slice
from .surfaces import TriMesh

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(eq=False)
class Check:
    check_id: str
    statement: str
    left: float
    right: float
    margin: float
    tolerance: float
    verdict: str
    notes: str = ""

    def to_dict(self):
        return {
            "id": self.check_id,
            "statement": self.statement,
            "left": self.left,
            "right": self.right,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def _leq_check(check_id, statement, left, right, tol, notes="") -> Check:
    """left <= right up to a relative slack of tol on the right-hand side."""
    scale = max(abs(left), abs(right), 1e-300)
    margin = (right - left) / scale
    verdict = PASS if left <= right + tol * scale + 1e-14 else FAIL
    return Check(check_id, statement, float(left), float(right), float(margin),
                 tol, verdict, notes)


def _gate_check(check_id, statement, ok: bool, notes="") -> Check:
    return Check(check_id, statement, float(ok), 1.0, 0.0, 0.0,
                 PASS if ok else INCONCLUSIVE, notes)


def gate_verdicts(gates: list, checks: list) -> list:
    """Prefix theorem checks with their hypothesis gates.

    When a gate is inconclusive the theorem simply does not apply, so every
    downstream verdict is downgraded to inconclusive (testing out of
    hypothesis must never report pass or fail)."""
    failed = [g.check_id for g in gates if g.verdict == INCONCLUSIVE]
    if not failed:
        return list(gates) + list(checks)
    note = "hypothesis gate failed: " + ", ".join(failed)
    downgraded = [
        Check(c.check_id, c.statement, c.left, c.right, c.margin, c.tolerance,
              INCONCLUSIVE, (c.notes + "; " if c.notes else "") + note)
        for c in checks
    ]
    return list(gates) + downgraded


@dataclass(eq=False)
class QuotientCurve:
    """Volume and flux comparison quotients sampled on a radius grid."""

    grid: np.ndarray
    vol_quot: np.ndarray
    flux_quot: np.ndarray
    end_mask: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def w_volume_estimate(self) -> float:
        return float(self.vol_quot.max())

    def w_flux_estimate(self) -> float:
        return float(self.flux_quot.max())

    def stable(self, tol: float = 0.01) -> bool:
        """Whether the volume quotient moved less than tol (relative) over
        the last tenth of the grid; grid maxima are supremum estimates only
        when this holds."""
        window = self.vol_quot[_top_slice(len(self.grid))]
        if len(window) < 2:
            return False
        return float(window.max() - window.min()) <= tol * float(abs(window.max()))

    def rows(self):
        for i in range(len(self.grid)):
            yield (float(self.grid[i]), float(self.vol_quot[i]), float(self.flux_quot[i]))


def quotient_curves(mesh: TriMesh, model: ModelSpace, grid, end_mask=None,
                    threads: int = 1, quad: QuadratureConfig = DEFAULT_QUAD) -> QuotientCurve:
    """Sample Vol(D_R)/Vol(B_R) and J(R)/volS(R) over the grid, optionally
    restricted to the faces of one end."""
    if model.m != 2:
        raise DomainError("discrete meshes are surfaces; the model must have m = 2")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise DomainError("grid must be positive and strictly increasing")

    def one(R: float):
        area = dgeom.region_area(dgeom.clip(mesh, 0.0, R, face_mask=end_mask))
        j = dgeom.flux(mesh, R, face_mask=end_mask)
        return area / model.vol_ball(R, quad), j / model.vol_sphere(R)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, [float(R) for R in grid]))
    else:
        results = [one(float(R)) for R in grid]
    vol = np.array([v for v, _ in results])
    flx = np.array([f for _, f in results])
    return QuotientCurve(grid, vol, flx, end_mask,
                         {"mesh": mesh.name, "model_dim": model.m,
                          "warp": model.warp.describe()})


# ---------------------------------------------------------------------------
# individual theorem checks


def verify_isoperimetric(curve: QuotientCurve, tol: float = 0.01,
                         mono_slack: float = 0.01) -> list[Check]:
    """Volume quotient below flux quotient at every radius, and both
    quotients nondecreasing (up to mesh-dependent relative slack)."""
    checks = []
    worst = int(np.argmin(curve.flux_quot - curve.vol_quot))
    checks.append(_leq_check(
        "isoperimetric.ordering",
        "Vol(D_R)/Vol(B_R) <= J(R)/J_w(R) at every grid radius",
        float(curve.vol_quot[worst]), float(curve.flux_quot[worst]), tol,
        notes=f"worst radius R={curve.grid[worst]:.6g}"))
    for name, series in (("volume", curve.vol_quot), ("flux", curve.flux_quot)):
        if len(series) < 2:
            continue
        ratios = series[1:] / np.maximum(series[:-1], 1e-300)
        worst_i = int(np.argmin(ratios))
        checks.append(_leq_check(
            f"isoperimetric.monotone.{name}",
            f"{name} quotient nondecreasing in R (slack {mono_slack:.2%})",
            float(series[worst_i]) * (1.0 - mono_slack), float(series[worst_i + 1]), 0.0,
            notes=f"worst step R={curve.grid[worst_i]:.6g} -> {curve.grid[worst_i + 1]:.6g}"))
    return checks


def _curvature_gate(model: ModelSpace, radii) -> Check:
    """Euclidean ambient: the radial curvature bound needs -w''/w >= 0."""
    vals = [-model.warp.d2w(float(r)) / model.warp.w(float(r)) for r in radii]
    ok = min(vals) >= -1e-9
    return _gate_check(
        "gate.curvature_bound",
        "ambient curvature 0 <= -w''/w (Euclidean immersion against this model)",
        ok, notes=f"min of -w''/w over samples: {min(vals):.6g}")


def _balance_gate(model: ModelSpace, R: float,
                  quad: QuadratureConfig = DEFAULT_QUAD) -> Check:
    top = min(R, model.warp.lam * 0.999)
    grid = np.linspace(top / 256.0, top, 256)
    res = model.balance_check(grid, quad)
    return _gate_check(
        "gate.balance_below",
        "model balanced from below: q_w * eta_w >= 1/m",
        res.below,
        notes=f"worst margin {res.worst_below_margin:.3e} at r={res.worst_below_r:.6g}")


def _monotone_w_gate(model: ModelSpace, R: float, strict: bool = False) -> Check:
    rs = np.linspace(R / 256.0, R, 256)
    dw = model.warp.dw_array(rs)
    ok = bool(np.all(dw > 0)) if strict else bool(np.all(dw >= -1e-12))
    relation = "w' > 0" if strict else "w' >= 0"
    return _gate_check("gate.w_monotone", f"warping function satisfies {relation}",
                       ok, notes=f"min w' over samples: {float(dw.min()):.6g}")


def comparison_gates(model: ModelSpace, R: float,
                     quad: QuadratureConfig = DEFAULT_QUAD,
                     monotone: bool = True) -> list[Check]:
    """Hypotheses shared by the comparison theorems for a Euclidean
    immersion: curvature bound, balance from below, optionally w' >= 0."""
    gates = [
        _curvature_gate(model, np.linspace(R / 64.0, R, 64)),
        _balance_gate(model, R, quad),
    ]
    if monotone:
        gates.append(_monotone_w_gate(model, R))
    return gates


def verify_capacity_sandwich(mesh: TriMesh, model: ModelSpace, rho: float, R: float,
                             tol: float = 0.03, truncation: str = "reflect",
                             quad: QuadratureConfig = DEFAULT_QUAD) -> list[Check]:
    """Flux quotient at rho <= capacity quotient <= flux quotient at R,
    gated on the model hypotheses for each side."""
    gates = comparison_gates(model, R, quad)
    if any(g.verdict == INCONCLUSIVE for g in gates):
        return gate_verdicts(gates, [Check(
            "capacity.sandwich", "capacity quotient sandwiched by flux quotients",
            math.nan, math.nan, math.nan, tol, INCONCLUSIVE)])
    checks = list(gates)
    cap = dgeom.capacity_discrete(dgeom.clip(mesh, rho, R), truncation=truncation)
    ratio = cap.capacity / model.capacity(rho, R, quad)
    lower = dgeom.flux(mesh, rho) / model.vol_sphere(rho)
    upper = dgeom.flux(mesh, R) / model.vol_sphere(R)
    checks.append(_leq_check(
        "capacity.lower", "J(rho)/J_w(rho) <= Cap/Cap_w", lower, ratio, tol,
        notes=f"rho={rho:.6g}, R={R:.6g}"))
    checks.append(_leq_check(
        "capacity.upper", "Cap/Cap_w <= J(R)/J_w(R)", ratio, upper, tol,
        notes=f"capacity ratio {ratio:.6g}"))
    return checks


def verify_euclidean_sandwich(mesh: TriMesh, rho: float, R: float, tol: float = 0.03,
                              truncation: str = "reflect",
                              quad: QuadratureConfig = DEFAULT_QUAD) -> list[Check]:
    """Volume-quotient sandwich for the capacity against the flat plane
    model (Euclidean ambient, m = 2)."""
    from .modelspace import WarpingSpec
    model = ModelSpace(2, WarpingSpec.space_form(0.0))
    cap = dgeom.capacity_discrete(dgeom.clip(mesh, rho, R), truncation=truncation)
    ratio = cap.capacity / model.capacity(rho, R, quad)
    lower = dgeom.region_area(dgeom.clip(mesh, 0.0, rho)) / model.vol_ball(rho)
    upper = dgeom.region_area(dgeom.clip(mesh, 0.0, R)) / model.vol_ball(R)
    return [
        _leq_check("euclidean.lower", "Vol(D_rho)/(pi rho^2) <= Cap/Cap_flat",
                   lower, ratio, tol, notes=f"rho={rho:.6g}"),
        _leq_check("euclidean.upper", "Cap/Cap_flat <= Vol(D_R)/(pi R^2)",
                   ratio, upper, tol, notes=f"R={R:.6g}"),
    ]


def exit_time_comparison(mesh: TriMesh, model: ModelSpace, R: float, tol: float = 0.02,
                         quad: QuadratureConfig = DEFAULT_QUAD) -> list[Check]:
    """Discrete mean exit time dominates the transplanted model exit time;
    near-equality is additionally required when the quotients are flat
    (stability proxy for the equality case)."""
    gates = comparison_gates(model, R, quad, monotone=False)
    if any(g.verdict == INCONCLUSIVE for g in gates):
        return gate_verdicts(gates, [Check(
            "exit_time.domination", "E_P >= E_w(r) pointwise",
            math.nan, math.nan, math.nan, tol, INCONCLUSIVE)])
    checks = list(gates)
    region = dgeom.clip(mesh, 0.0, R)
    field = dgeom.exit_time_discrete(region)
    ew = model.mean_exit_profile(R, region.r)
    scale = float(ew.max())
    slack = tol * scale
    gap = field - ew
    worst = int(np.argmin(gap))
    checks.append(_leq_check(
        "exit_time.domination",
        f"E_P >= E_w(r) - {tol:.0%} of the center value, pointwise",
        float(ew[worst]) - slack, float(field[worst]), 0.0,
        notes=f"worst vertex r={region.r[worst]:.6g}, slack {slack:.4g}"))

    def quots(radius):
        area = dgeom.region_area(dgeom.clip(mesh, 0.0, radius))
        return (area / model.vol_ball(radius, quad),
                dgeom.flux(mesh, radius) / model.vol_sphere(radius))

    vR, fR = quots(R)
    vH, fH = quots(R / 2.0)
    stable = (abs(vR - fR) <= tol * abs(fR)
              and abs(vR - vH) <= tol * abs(vR)
              and abs(fR - fH) <= tol * abs(fR))
    if stable:
        dev = float(np.abs(gap).max())
        checks.append(_leq_check(
            "exit_time.equality_case",
            "quotients stable: E_P matches E_w(r) pointwise",
            dev, slack, 0.0,
            notes=f"max |E_P - E_w| = {dev:.4g} against slack {slack:.4g}"))
    else:
        checks.append(Check(
            "exit_time.equality_case", "equality proxy not triggered",
            float(abs(vR - fR)), tol * abs(fR), 0.0, tol, INCONCLUSIVE,
            notes="volume/flux quotients not stable at R and R/2"))
    return checks


@dataclass(eq=False)
class EndsReport:
    R: float
    t: float
    bound: float
    count: int
    asymptotic_bound: float | None
    asymptotic_bound_unit_constant: float | None
    checks: list
    warning: str | None

    def to_dict(self):
        return {
            "R": self.R,
            "t": self.t,
            "bound": self.bound,
            "count": self.count,
            "asymptotic_bound": self.asymptotic_bound,
            "asymptotic_bound_unit_constant": self.asymptotic_bound_unit_constant,
            "warning": self.warning,
            "checks": [c.to_dict() for c in self.checks],
        }


def ends_bound(mesh: TriMesh, model: ModelSpace, R: float, t: float,
               curve: QuotientCurve | None = None,
               quad: QuadratureConfig = DEFAULT_QUAD) -> EndsReport:
    """Upper bound (2/(1-R/t))^m * (int_0^t w^(m-1) / (t^m/m)) * volume
    quotient at t, compared against the discrete end count at R; also the
    asymptotic form 2^m * C_w * Vol_w when the coefficient is finite."""
    if not t > R:
        raise DomainError(f"need t > R, got R={R!r}, t={t!r}")
    gates = [
        _curvature_gate(model, np.linspace(t / 64.0, t, 64)),
        _balance_gate(model, t, quad),
        _monotone_w_gate(model, t, strict=True),
        _gate_check(
            "gate.nonpositive_model_curvature",
            "-w''/w <= 0 beyond R (flat-or-negative model curvature)",
            max(-model.warp.d2w(float(s)) / model.warp.w(float(s))
                for s in np.linspace(R * 1.001, t, 64)) <= 1e-9),
    ]
    checks = list(gates)
    ends = dgeom.end_components(mesh, R)
    if any(g.verdict == INCONCLUSIVE for g in gates):
        checks = gate_verdicts(gates, [Check(
            "ends.bound", "end count within the volume bound",
            float(ends.count), math.nan, math.nan, 0.0, INCONCLUSIVE)])
        return EndsReport(R, t, math.nan, ends.count, None, None, checks, ends.warning)
    m = model.m
    coeff = m * model.vol_ball(t, quad) / (model.V0 * t ** m)
    vol_quot_t = dgeom.region_area(dgeom.clip(mesh, 0.0, t)) / model.vol_ball(t, quad)
    bound = (2.0 / (1.0 - R / t)) ** m * coeff * vol_quot_t
    checks.append(_leq_check(
        "ends.bound",
        "number of ends at R within (2/(1-R/t))^m * C(t) * VolQuot(t)",
        float(ends.count), bound, 0.0,
        notes=f"count={ends.count}, coefficient factor {coeff:.6g}"))
    asym = asym_unit = None
    ec = model.ends_coefficient(np.linspace(t / 16.0, t, 64), quad)
    if not ec.divergent:
        vol_w = curve.w_volume_estimate() if curve is not None else vol_quot_t
        asym = (2.0 ** m) * ec.reported_limsup * vol_w
        asym_unit = ec.reported_limsup * vol_w
        checks.append(_leq_check(
            "ends.asymptotic",
            "global end count within 2^m * C_w * Vol_w",
            float(ends.count), asym, 0.0,
            notes=f"C_w ~ {ec.reported_limsup:.6g}, Vol_w ~ {vol_w:.6g}; "
                  "the unit-constant variant is reported alongside"))
    return EndsReport(R, t, float(bound), ends.count, asym, asym_unit, checks, ends.warning)


@dataclass(eq=False)
class ToneReport:
    upper: float
    lower: float
    end_factor: float
    end_factors: list
    tone_limsup: float
    eigenvalues: list
    checks: list

    def to_dict(self):
        return {
            "upper": self.upper,
            "lower": self.lower,
            "end_factor": self.end_factor,
            "end_factors": self.end_factors,
            "tone_limsup": self.tone_limsup,
            "eigenvalues": self.eigenvalues,
            "checks": [c.to_dict() for c in self.checks],
        }


def tone_report(mesh: TriMesh | None, model: ModelSpace, R0: float, grid,
                eigen_grid=None, quad: QuadratureConfig = DEFAULT_QUAD) -> ToneReport:
    """Two-sided fundamental-tone report: the model upper limit scaled by the
    flux/volume factor of the best end, the Cheeger lower bound 1/(4 L^2),
    and (with a mesh) the trend of discrete first eigenvalues."""
    grid = np.asarray(grid, dtype=float)
    gates = [_balance_gate(model, float(grid[-1]), quad)]
    if mesh is not None:
        # the discrete trend compares a Euclidean immersion to the model
        gates.insert(0, _curvature_gate(model, np.linspace(grid[-1] / 64.0, grid[-1], 64)))
    checks = list(gates)
    gated = any(g.verdict == INCONCLUSIVE for g in gates)
    tone = model.tone_upper_limit(grid, quad)
    cheeger = model.cheeger_bound(grid, quad)
    factors = []
    if mesh is not None:
        ends = dgeom.end_components(mesh, R0)
        sub = grid[grid > R0 * 1.05]
        if len(sub) < 2:
            raise DomainError("grid must extend beyond R0 for end-restricted quotients")
        for mask in ends.face_masks:
            c = quotient_curves(mesh, model, sub, end_mask=mask, quad=quad)
            factors.append(c.w_flux_estimate() / c.w_volume_estimate())
    factor = min(factors) if factors else 1.0
    upper = factor * tone.reported_limsup
    lower = cheeger.lower_bound
    if gated:
        checks = gate_verdicts(gates, [Check(
            "tone.consistency", "Cheeger lower bound below the upper tone bound",
            lower, upper, math.nan, 0.0, INCONCLUSIVE)])
        return ToneReport(float(upper), float(lower), float(factor), factors,
                          float(tone.reported_limsup), [], checks)
    if math.isfinite(upper):
        checks.append(_leq_check(
            "tone.consistency", "Cheeger lower bound below the upper tone bound",
            lower, upper, 1e-9,
            notes=f"factor {factor:.6g} * limit {tone.reported_limsup:.6g}"))
    eigenvalues = []
    if mesh is not None:
        radii = eigen_grid if eigen_grid is not None else np.linspace(
            grid[0] + (grid[-1] - grid[0]) * 0.25, grid[-1], 4)
        for R in radii:
            eigenvalues.append((float(R), dgeom.first_eigenvalue_estimate(
                dgeom.clip(mesh, 0.0, float(R)))))
        lams = np.array([lam for _, lam in eigenvalues])
        if len(lams) >= 2:
            worst = int(np.argmax(lams[1:] / lams[:-1]))
            checks.append(_leq_check(
                "tone.trend", "discrete eigenvalues nonincreasing along the exhaustion",
                float(lams[worst + 1]), float(lams[worst]), 0.02,
                notes=f"step R={eigenvalues[worst][0]:.6g} -> {eigenvalues[worst + 1][0]:.6g}"))
        checks.append(_leq_check(
            "tone.lower_vs_discrete", "Cheeger bound below every discrete eigenvalue",
            lower, float(lams.min()), 0.02))
    return ToneReport(float(upper), float(lower), float(factor), factors,
                      float(tone.reported_limsup), eigenvalues, checks)


def volume_flux_tail(curve: QuotientCurve, tol: float = 0.02,
                     stability_tol: float = 0.01) -> Check:
    """When the volume quotient has stabilized over the last tenth of the
    grid (finite w-volume detected), the flux and volume quotients must
    agree at the largest radius."""
    window = curve.vol_quot[_top_slice(len(curve.grid))]
    spread = float(window.max() - window.min()) / max(float(window.max()), 1e-300)
    if len(window) < 2 or spread > stability_tol:
        return Check("volume_flux.tail", "w-flux equals w-volume for finite w-volume",
                     spread, stability_tol, 0.0, stability_tol, INCONCLUSIVE,
                     notes="volume quotient not stable over the last tenth of the grid")
    v, f = float(curve.vol_quot[-1]), float(curve.flux_quot[-1])
    gap = abs(f - v) / max(abs(v), 1e-300)
    return Check("volume_flux.tail", "w-flux equals w-volume for finite w-volume",
                 f, v, gap, tol, PASS if gap <= tol else FAIL,
                 notes=f"relative gap {gap:.4g} at R={curve.grid[-1]:.6g}")


# ---------------------------------------------------------------------------
# report container


@dataclass(eq=False)
class VerificationReport:
    checks: list
    scalars: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def extend(self, checks):
        self.checks.extend(checks)

    def counts(self):
        out = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0}
        for c in self.checks:
            out[c.verdict] += 1
        return out

    def failed(self) -> bool:
        return any(c.verdict == FAIL for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "scalars": self.scalars,
            "curves": self.curves,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.counts(),
        }
        return json.dumps(_json_safe(payload), sort_keys=True, indent=2, allow_nan=False)


def _json_safe(obj):
    """Strict-JSON encoding: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, np.floating):
        return _json_safe(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj
