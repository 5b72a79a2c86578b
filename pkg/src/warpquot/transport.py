"""Transport along curves: parallel, normal, adapted; holonomy; broken geodesics.

All ODEs run on an adaptive embedded Runge-Kutta 4(5) pair (scipy's RK45)
with rtol 1e-9 / atol 1e-11 so transport error sits well below the 1e-5 and
1e-6 assertion budgets used by callers.  The integral of the mean curvature
form rides along as an augmented state on the same adaptive grid as the
transport equation, never as a separate quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import chartkit as ck
from . import productgeo as pg
from .chartkit import CoordPoint, MetricField, TangentVector
from .errors import (
    BaseMismatch,
    IntegrationError,
    NotALoop,
    NotInLeaf,
    NumericsError,
)

RTOL = 1e-9
ATOL = 1e-11
LOOP_CLOSURE_TOL = 1e-7
LEAF_VELOCITY_TOL = 1e-8
_VELOCITY_CHECK_TOL = 1e-4
_CONTINUITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# curves

@dataclass
class CurveSegment:
    t0: float
    t1: float
    point: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]


class PiecewiseCurve:
    """Piecewise-smooth curve on [0, 1] with velocities attached per segment.

    Construction checks continuity at the breaks and (by finite differences)
    that each segment's velocity really is the derivative of its point map.
    """

    def __init__(self, segments: Sequence[CurveSegment], check: bool = True):
        if not segments:
            raise ValueError("curve needs at least one segment")
        self.segments = list(segments)
        if abs(self.segments[0].t0) > 1e-12 or abs(self.segments[-1].t1 - 1.0) > 1e-12:
            raise ValueError("curve segments must cover [0, 1]")
        for a, b in zip(self.segments, self.segments[1:]):
            if abs(a.t1 - b.t0) > 1e-12:
                raise ValueError("curve segments must be contiguous")
        if check:
            self._check()

    def _check(self):
        for a, b in zip(self.segments, self.segments[1:]):
            gap = np.max(np.abs(np.asarray(a.point(a.t1)) - np.asarray(b.point(b.t0))))
            if gap > _CONTINUITY_TOL:
                raise NumericsError(f"curve discontinuous at t = {a.t1}: gap {gap:.2e}")
        for seg in self.segments:
            tm = 0.5 * (seg.t0 + seg.t1)
            dt = min(1e-6, 0.25 * (seg.t1 - seg.t0))
            fd = (np.asarray(seg.point(tm + dt)) - np.asarray(seg.point(tm - dt))) / (2 * dt)
            v = np.asarray(seg.velocity(tm))
            if np.max(np.abs(fd - v)) > _VELOCITY_CHECK_TOL * (1.0 + np.max(np.abs(v))):
                raise NumericsError("segment velocity is not the derivative of its point map")

    @property
    def breaks(self) -> list[float]:
        return [seg.t1 for seg in self.segments[:-1]]

    def _segment_at(self, t: float) -> CurveSegment:
        for seg in self.segments:
            if t <= seg.t1 + 1e-12:
                return seg
        return self.segments[-1]

    def point(self, t: float) -> np.ndarray:
        return np.asarray(self._segment_at(t).point(t), dtype=float)

    def velocity(self, t: float) -> np.ndarray:
        return np.asarray(self._segment_at(t).velocity(t), dtype=float)

    def is_loop(self, tol: float = LOOP_CLOSURE_TOL) -> bool:
        return bool(np.max(np.abs(self.point(1.0) - self.point(0.0))) <= tol)

    # -- constructors -------------------------------------------------------
    @staticmethod
    def from_function(point_fn: Callable[[float], np.ndarray],
                      velocity_fn: Optional[Callable[[float], np.ndarray]] = None,
                      breaks: Sequence[float] = ()) -> "PiecewiseCurve":
        if velocity_fn is None:
            def velocity_fn(t, _p=point_fn):
                dt = 1e-6
                if t < dt:  # second-order one-sided stencils at the ends
                    return (-3 * np.asarray(_p(t)) + 4 * np.asarray(_p(t + dt))
                            - np.asarray(_p(t + 2 * dt))) / (2 * dt)
                if t > 1.0 - dt:
                    return (3 * np.asarray(_p(t)) - 4 * np.asarray(_p(t - dt))
                            + np.asarray(_p(t - 2 * dt))) / (2 * dt)
                return (np.asarray(_p(t + dt)) - np.asarray(_p(t - dt))) / (2 * dt)
        ts = [0.0, *sorted(breaks), 1.0]
        segs = [CurveSegment(a, b, point_fn, velocity_fn) for a, b in zip(ts, ts[1:])]
        return PiecewiseCurve(segs)

    @staticmethod
    def line(p0, p1) -> "PiecewiseCurve":
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        return PiecewiseCurve([CurveSegment(
            0.0, 1.0,
            lambda t, a=p0, b=p1: a + t * (b - a),
            lambda t, a=p0, b=p1: b - a,
        )], check=False)

    @staticmethod
    def concat(curves: Sequence["PiecewiseCurve"]) -> "PiecewiseCurve":
        """Concatenation, each input curve compressed onto an equal t-interval."""
        m = len(curves)
        segs = []
        for k, c in enumerate(curves):
            off = k / m
            for seg in c.segments:
                segs.append(CurveSegment(
                    off + seg.t0 / m, off + seg.t1 / m,
                    lambda t, s=seg, o=off: s.point((t - o) * m),
                    lambda t, s=seg, o=off: np.asarray(s.velocity((t - o) * m)) * m,
                ))
        return PiecewiseCurve(segs, check=False)

    @staticmethod
    def catmull_rom(points: Sequence[np.ndarray]) -> "PiecewiseCurve":
        """Uniform Catmull-Rom spline through the control points."""
        pts = [np.asarray(p, dtype=float) for p in points]
        if len(pts) < 2:
            raise ValueError("need at least two control points")
        ext = [2 * pts[0] - pts[1], *pts, 2 * pts[-1] - pts[-2]]
        m = len(pts) - 1

        def make(k):
            p0, p1, p2, p3 = ext[k], ext[k + 1], ext[k + 2], ext[k + 3]

            def local(s):
                s2, s3 = s * s, s * s * s
                return 0.5 * ((2 * p1) + (-p0 + p2) * s
                              + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s2
                              + (-p0 + 3 * p1 - 3 * p2 + p3) * s3)

            def dlocal(s):
                return 0.5 * ((-p0 + p2)
                              + 2 * (2 * p0 - 5 * p1 + 4 * p2 - p3) * s
                              + 3 * (-p0 + 3 * p1 - 3 * p2 + p3) * s * s)

            return (lambda t: local(t * m - k)), (lambda t: dlocal(t * m - k) * m)

        segs = []
        for k in range(m):
            pf, vf = make(k)
            segs.append(CurveSegment(k / m, (k + 1) / m, pf, vf))
        return PiecewiseCurve(segs)


# ---------------------------------------------------------------------------
# transport results

@dataclass
class TransportResult:
    samples: list  # (t, TangentVector) pairs along the curve
    integral_omega: float
    tol_achieved: float

    @property
    def end(self) -> TangentVector:
        return self.samples[-1][1]

    def at(self, t: float) -> TangentVector:
        best = min(self.samples, key=lambda s: abs(s[0] - t))
        return best[1]


@dataclass
class HolonomyMap:
    """Linear return map on a leaf's normal space, in a declared frame basis."""

    basepoint: CoordPoint
    matrix: np.ndarray
    frame: list

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise NumericsError("holonomy matrix is singular")

    def after(self, first: "HolonomyMap") -> "HolonomyMap":
        """Map for 'first loop, then this loop': self.matrix @ first.matrix."""
        return HolonomyMap(first.basepoint, self.matrix @ first.matrix, first.frame)

    def is_identity(self, tol: float = 1e-6) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(self.matrix.shape[0]))) <= tol)


@dataclass
class BrokenGeodesicSpec:
    basepoint: CoordPoint
    breaks: tuple
    velocities: list  # m+1 tangent vectors at the basepoint

    def __post_init__(self):
        if not isinstance(self.basepoint, CoordPoint):
            self.basepoint = CoordPoint(self.basepoint)
        self.breaks = tuple(float(t) for t in self.breaks)
        if any(not (0.0 < t < 1.0) for t in self.breaks) or list(self.breaks) != sorted(self.breaks):
            raise ValueError("breaks must satisfy 0 < t1 < ... < tm < 1")
        vs = []
        for v in self.velocities:
            if isinstance(v, TangentVector):
                vs.append(v)
            else:
                vs.append(TangentVector(self.basepoint, v))
        if len(vs) != len(self.breaks) + 1:
            raise ValueError("need exactly m+1 velocities for m breaks")
        self.velocities = vs


# ---------------------------------------------------------------------------
# core transport integration

def _integrate_transport(g: MetricField, curve: PiecewiseCurve, y0: np.ndarray,
                         omega: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         samples_per_segment: int = 17):
    """Integrate Ydot = -Gamma(gamma') Y (columnwise) along the curve.

    Y is (n, k); an optional one-form field omega augments the state with
    I(t) = integral of omega(gamma') dt.  ``project`` post-filters the
    component derivative (used for normal transport).  Returns
    (ts, Ys, Is) sampled along the whole curve.
    """
    n, k = y0.shape
    state0 = np.concatenate([y0.reshape(-1), [0.0]])

    def rhs(t, state):
        pos = curve.point(t)
        vel = curve.velocity(t)
        Y = state[:n * k].reshape(n, k)
        gamma = ck.christoffel_numeric(g, pos)
        dY = -np.einsum("kij,i,jc->kc", gamma, vel, Y)
        if project is not None:
            dY = project(dY)
        dI = float(omega(pos) @ vel) if omega is not None else 0.0
        return np.concatenate([dY.reshape(-1), [dI]])

    ts_all: list[float] = []
    ys_all: list[np.ndarray] = []
    Is_all: list[float] = []
    state = state0
    for seg in curve.segments:
        t_eval = np.linspace(seg.t0, seg.t1, samples_per_segment)
        sol = solve_ivp(rhs, (seg.t0, seg.t1), state, method="RK45",
                        rtol=RTOL, atol=ATOL, t_eval=t_eval, dense_output=False)
        if not sol.success:
            raise IntegrationError(f"transport integration failed: {sol.message}")
        start = 1 if ts_all else 0
        ts_all.extend(sol.t[start:])
        for col in range(start, sol.y.shape[1]):
            s = sol.y[:, col]
            ys_all.append(s[:n * k].reshape(n, k))
            Is_all.append(float(s[-1]))
        state = sol.y[:, -1]
    return ts_all, ys_all, Is_all


def parallel_transport(g: MetricField, curve: PiecewiseCurve, v0: TangentVector,
                       tol: float = 1e-7, samples_per_segment: int = 17) -> TransportResult:
    """Solve v'^k + Gamma^k_ij gamma'^i v^j = 0; g(v, v) is conserved.

    Raises IntegrationError when the conservation residual exceeds tol.
    """
    start = curve.point(0.0)
    if np.max(np.abs(v0.base.coords - start)) > 1e-9:
        raise BaseMismatch("v0 must be based at curve(0)")
    ts, ys, _ = _integrate_transport(g, curve, v0.components.reshape(-1, 1),
                                     samples_per_segment=samples_per_segment)
    q0 = ck.inner_product(g, v0, v0)
    samples = []
    worst = 0.0
    for t, y in zip(ts, ys):
        vec = TangentVector(CoordPoint(curve.point(t)), y[:, 0])
        samples.append((t, vec))
        worst = max(worst, abs(ck.inner_product(g, vec, vec) - q0))
    if worst > tol:
        raise IntegrationError(f"metric compatibility residual {worst:.3e} > tol {tol:.3e}")
    return TransportResult(samples, 0.0, worst)


def _check_curve_in_leaf(dtp: pg.DoublyTwistedProduct, curve: PiecewiseCurve, foliation: int):
    other = dtp.slot(3 - foliation)
    for t in np.linspace(0.0, 1.0, 33):
        v = curve.velocity(t)
        if np.max(np.abs(v[other])) > LEAF_VELOCITY_TOL:
            raise NotInLeaf(
                f"curve velocity has factor-{3 - foliation} components at t = {t}")


def normal_parallel_transport(dtp: pg.DoublyTwistedProduct, curve: PiecewiseCurve,
                              v0: TangentVector, tol: float = 1e-7,
                              foliation: int = 1,
                              samples_per_segment: int = 17) -> TransportResult:
    """Parallel translation in the normal bundle of a leaf of F_foliation.

    The curve must stay in the leaf (velocity tangent to the foliation's
    slots) and v0 must be normal; the normal projection of DW/dt is driven
    to zero, so W stays normal and |W| is conserved.
    """
    _check_curve_in_leaf(dtp, curve, foliation)
    normal_slot = dtp.slot(3 - foliation)
    tangent_slot = dtp.slot(foliation)
    if np.max(np.abs(v0.components[tangent_slot])) > 1e-12:
        raise ValueError("v0 must lie in the normal (other-factor) slots")
    start = curve.point(0.0)
    if np.max(np.abs(v0.base.coords - start)) > 1e-9:
        raise BaseMismatch("v0 must be based at curve(0)")

    def project(dY):
        out = np.zeros_like(dY)
        out[normal_slot] = dY[normal_slot]
        return out

    ts, ys, _ = _integrate_transport(dtp.assembled, curve, v0.components.reshape(-1, 1),
                                     project=project,
                                     samples_per_segment=samples_per_segment)
    g = dtp.assembled
    q0 = ck.inner_product(g, v0, v0)
    samples = []
    worst = 0.0
    for t, y in zip(ts, ys):
        vec = TangentVector(CoordPoint(curve.point(t)), y[:, 0])
        samples.append((t, vec))
        worst = max(worst, abs(ck.inner_product(g, vec, vec) - q0))
    if worst > tol:
        raise IntegrationError(f"normal transport norm residual {worst:.3e} > tol {tol:.3e}")
    return TransportResult(samples, 0.0, worst)


def adapted_translation(dtp: pg.DoublyTwistedProduct, curve: PiecewiseCurve,
                        v0: TangentVector, tol: float = 1e-6,
                        foliation: int = 1,
                        samples_per_segment: int = 17) -> TransportResult:
    """A(t) = exp(-int omega) W(t), W the normal parallel translation of v0.

    For a curve in a leaf of F_1 the form is omega_2 (mean curvature form of
    the second foliation), and symmetrically for F_2.  The norm law
    |A(t)| = |v0| exp(-int omega) is checked against tol.
    """
    _check_curve_in_leaf(dtp, curve, foliation)
    normal_slot = dtp.slot(3 - foliation)
    tangent_slot = dtp.slot(foliation)
    if np.max(np.abs(v0.components[tangent_slot])) > 1e-12:
        raise ValueError("v0 must lie in the normal (other-factor) slots")
    form_index = 3 - foliation

    def omega(c):
        return pg.mean_curvature_form(dtp, c, form_index).components

    def project(dY):
        out = np.zeros_like(dY)
        out[normal_slot] = dY[normal_slot]
        return out

    ts, ys, Is = _integrate_transport(dtp.assembled, curve, v0.components.reshape(-1, 1),
                                      omega=omega, project=project,
                                      samples_per_segment=samples_per_segment)
    g = dtp.assembled
    norm0 = ck.norm(g, v0)
    samples = []
    worst = 0.0
    for t, y, integ in zip(ts, ys, Is):
        vec = TangentVector(CoordPoint(curve.point(t)), np.exp(-integ) * y[:, 0])
        samples.append((t, vec))
        worst = max(worst, abs(ck.norm(g, vec) - norm0 * np.exp(-integ)))
    if worst > tol:
        raise IntegrationError(f"adapted-translation norm law residual {worst:.3e} > tol {tol:.3e}")
    return TransportResult(samples, Is[-1], worst)


# ---------------------------------------------------------------------------
# holonomy

def normal_frame(dtp: pg.DoublyTwistedProduct, x, foliation: int = 1) -> list[TangentVector]:
    """g-orthonormal frame of the normal space of the F_foliation leaf at x."""
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    pt = CoordPoint(coords)
    other = dtp.slot(3 - foliation)
    basis = []
    for j in range(other.start, other.stop):
        e = np.zeros(dtp.n)
        e[j] = 1.0
        basis.append(TangentVector(pt, e))
    return ck.gram_schmidt(dtp.assembled, coords, basis)


def holonomy_map(model, loop: PiecewiseCurve, frame: Sequence[TangentVector],
                 foliation: int = 1, closing_word=None,
                 tol: float = LOOP_CLOSURE_TOL) -> HolonomyMap:
    """Adapted translation of each frame vector around the loop, in that frame.

    ``model`` is a plain product (loop must close in chart coordinates) or a
    quotient model exposing ``dtp``, ``find_closing_word`` and
    ``word_jacobian``: the loop then closes after a deck word, whose inverse
    differential pushes the transported vectors back to the basepoint.
    """
    dtp = model.dtp if hasattr(model, "dtp") else model
    base = loop.point(0.0)
    end = loop.point(1.0)
    jac = np.eye(dtp.n)
    if np.max(np.abs(end - base)) > tol:
        if not hasattr(model, "find_closing_word"):
            raise NotALoop(f"loop endpoints differ by {np.max(np.abs(end - base)):.3e}")
        word = closing_word if closing_word is not None else model.find_closing_word(end, base)
        jac = model.word_jacobian(word, end)
    elif closing_word is not None:
        jac = model.word_jacobian(closing_word, end)

    normal_slot = dtp.slot(3 - foliation)
    frame = list(frame)
    fmat = np.stack([f.components[normal_slot] for f in frame], axis=1)
    cols = []
    for f in frame:
        res = adapted_translation(dtp, loop, f, foliation=foliation)
        pushed = jac @ res.end.components
        cols.append(np.linalg.solve(fmat, pushed[normal_slot]))
    return HolonomyMap(CoordPoint(base), np.stack(cols, axis=1), frame)


# ---------------------------------------------------------------------------
# broken geodesics (velocity resets by parallel transport) and profiles

def _geodesic_frame_rhs(g: MetricField):
    def rhs(t, state, n):
        x = state[:n]
        v = state[n:2 * n]
        E = state[2 * n:].reshape(n, n)
        gamma = ck.christoffel_numeric(g, x)
        acc = -np.einsum("kij,i,j->k", gamma, v, v)
        dE = -np.einsum("kij,i,jc->kc", gamma, v, E)
        return np.concatenate([v, acc, dE.reshape(-1)])
    return rhs


def _check_domain(g: MetricField, positions: np.ndarray):
    if g.domain_box is None:
        return
    box = g.domain_box
    pad = 0.1 * (box[:, 1] - box[:, 0])
    lo, hi = box[:, 0] - pad, box[:, 1] + pad
    if np.any(positions < lo) or np.any(positions > hi):
        raise IntegrationError("geodesic left the declared domain box")


def broken_geodesic(g: MetricField, spec: BrokenGeodesicSpec) -> PiecewiseCurve:
    """Geodesic segments whose break velocities are parallel transports of the
    spec velocities, so that the velocity profile is the given list."""
    n = spec.basepoint.n
    rhs = _geodesic_frame_rhs(g)
    ts = [0.0, *spec.breaks, 1.0]
    state = np.concatenate([spec.basepoint.coords,
                            spec.velocities[0].components,
                            np.eye(n).reshape(-1)])
    sols = []
    for j, (t0, t1) in enumerate(zip(ts, ts[1:])):
        if j > 0:
            E = state[2 * n:].reshape(n, n)
            state = state.copy()
            state[n:2 * n] = E @ spec.velocities[j].components
        sol = solve_ivp(rhs, (t0, t1), state, args=(n,), method="RK45",
                        rtol=RTOL, atol=ATOL, dense_output=True)
        if not sol.success:
            raise IntegrationError(f"geodesic integration failed: {sol.message}")
        _check_domain(g, sol.y[:n].T)
        sols.append((t0, t1, sol))
        state = sol.y[:, -1]

    segs = []
    for t0, t1, sol in sols:
        segs.append(CurveSegment(
            t0, t1,
            lambda t, s=sol: s.sol(t)[:n],
            lambda t, s=sol: s.sol(t)[n:2 * n],
        ))
    return PiecewiseCurve(segs)


def velocity_profile(g: MetricField, curve: PiecewiseCurve,
                     ts: Optional[Sequence[float]] = None) -> list[TangentVector]:
    """v(t) = P^{-1}_{0->t}(gamma'(t)), sampled at segment midpoints by default.

    The profile is piecewise constant exactly when the curve is a broken
    geodesic.
    """
    n = curve.point(0.0).shape[0]
    base = CoordPoint(curve.point(0.0))
    if ts is None:
        ts = [0.5 * (seg.t0 + seg.t1) for seg in curve.segments]

    # transport the full coordinate frame and invert at the requested times
    rhs_state0 = np.eye(n)

    def rhs(t, state):
        pos = curve.point(t)
        vel = curve.velocity(t)
        E = state.reshape(n, n)
        gamma = ck.christoffel_numeric(g, pos)
        return (-np.einsum("kij,i,jc->kc", gamma, vel, E)).reshape(-1)

    out: list[Optional[TangentVector]] = [None] * len(ts)
    order = np.argsort(ts)
    state = rhs_state0.reshape(-1)
    t_prev = 0.0
    for idx in order:
        t = ts[idx]
        if t > t_prev:
            sol = solve_ivp(rhs, (t_prev, t), state, method="RK45",
                            rtol=RTOL, atol=ATOL)
            if not sol.success:
                raise IntegrationError(f"frame transport failed: {sol.message}")
            state = sol.y[:, -1]
            t_prev = t
        E = state.reshape(n, n)
        out[idx] = TangentVector(base, np.linalg.solve(E, curve.velocity(t)))
    return [v for v in out if v is not None]


def broken_length(g: MetricField, basis: Optional[np.ndarray],
                  spec: BrokenGeodesicSpec) -> float:
    """Sum of auxiliary norms of the spec velocities.

    The auxiliary norm comes from a declared basis at the basepoint, taken
    orthonormal for a positive-definite reference metric (identity basis by
    default).
    """
    n = spec.basepoint.n
    B = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    total = 0.0
    for v in spec.velocities:
        total += float(np.linalg.norm(np.linalg.solve(B, v.components)))
    return total
