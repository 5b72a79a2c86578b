"""Doubly twisted products: assembly, closed-form connection and curvature.

A doubly twisted product carries the block metric

    g = lam1(x)^2 g1  (+)  lam2(x)^2 g2

on M1 x M2, with both warps positive functions of the full product point.
The closed forms implemented here (connection cases HH/VV/HV, sectional
curvature of factor and mixed planes, mean curvature vectors, the T tensor
of the factor-1 projection) are each backed by a finite-difference oracle
test; the curvature formulas take the warp gradients and hessians with
respect to the full product metric, which is the reading that survives the
oracle equivalence checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from . import chartkit as ck
from .chartkit import (
    CoordPoint,
    MetricField,
    OneForm,
    ScalarField,
    Signature,
    TangentVector,
)
from .errors import CaseMismatch, InvalidWarp, NormalizationError, InvalidFrame

UNIT_TOL = 1e-9       # |g(u,u)| must equal 1 this tightly for closed forms
SLOT_TOL = 1e-12      # components outside a vector's declared slot
VANISH_TOL = 1e-7     # classification: "N_i vanishes"
CLOSED_TOL = 1e-6     # classification: "d omega vanishes"


class Dependency(Enum):
    ON_PRODUCT = "on-product"
    ON_FACTOR1_ONLY = "on-factor1-only"
    ON_FACTOR2_ONLY = "on-factor2-only"
    CONSTANT = "constant"


class StructureTag(Enum):
    DOUBLY_TWISTED = "doubly-twisted"
    TWISTED = "twisted"
    DOUBLY_WARPED = "doubly-warped"
    WARPED = "warped"
    DIRECT_PRODUCT = "direct-product"


@dataclass
class FactorManifold:
    name: str
    dim: int
    metric: MetricField
    domain_box: np.ndarray  # (dim, 2)

    def __post_init__(self):
        if self.metric.dim != self.dim:
            raise ValueError(f"factor {self.name!r}: metric dim {self.metric.dim} != {self.dim}")
        self.domain_box = np.asarray(self.domain_box, dtype=float)
        if self.domain_box.shape != (self.dim, 2):
            raise ValueError(f"factor {self.name!r}: bad domain box shape {self.domain_box.shape}")


@dataclass
class WarpFn:
    """Positive scalar on product coordinates; dependency records which slots matter."""

    field: ScalarField
    dependency: Dependency = Dependency.ON_PRODUCT


@dataclass
class StructureClass:
    tag: StructureTag
    max_n1: float
    max_n2: float
    max_domega1: float
    max_domega2: float

    @property
    def evidence(self) -> dict:
        return {
            "max_N1": self.max_n1,
            "max_N2": self.max_n2,
            "max_domega1": self.max_domega1,
            "max_domega2": self.max_domega2,
        }


@dataclass(frozen=True)
class MixedPlane:
    """span(horiz, vert) with horiz tangent to factor 1 and vert to factor 2."""

    x: CoordPoint
    horiz: TangentVector
    vert: TangentVector


class DoublyTwistedProduct:
    """Two factor manifolds plus two positive warps; owns the assembled metric."""

    def __init__(self, f1: FactorManifold, f2: FactorManifold,
                 lam1: WarpFn, lam2: WarpFn, assembled: MetricField):
        self.f1 = f1
        self.f2 = f2
        self.lam1 = lam1
        self.lam2 = lam2
        self.assembled = assembled
        self.n1 = f1.dim
        self.n2 = f2.dim
        self.n = f1.dim + f2.dim
        self.slot1 = slice(0, self.n1)
        self.slot2 = slice(self.n1, self.n)
        self.domain_box = np.vstack([f1.domain_box, f2.domain_box])

    # -- slot helpers ------------------------------------------------------
    def factor(self, i: int) -> FactorManifold:
        return self.f1 if i == 1 else self.f2

    def warp(self, i: int) -> WarpFn:
        return self.lam1 if i == 1 else self.lam2

    def slot(self, i: int) -> slice:
        return self.slot1 if i == 1 else self.slot2

    def split(self, values) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(values, dtype=float)
        return arr[self.slot1], arr[self.slot2]

    def embed(self, i: int, factor_components) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.slot(i)] = np.asarray(factor_components, dtype=float)
        return out

    def project(self, i: int, values) -> np.ndarray:
        """P_i as a full-length vector: zero out the other factor's slots."""
        out = np.asarray(values, dtype=float).copy()
        out[self.slot(3 - i)] = 0.0
        return out

    def slot_of(self, v: TangentVector) -> Optional[int]:
        """1 or 2 for a pure slot vector, None for mixed."""
        a, b = self.split(v.components)
        scale = max(1.0, float(np.max(np.abs(v.components))))
        in1 = np.max(np.abs(b)) <= SLOT_TOL * scale
        in2 = np.max(np.abs(a)) <= SLOT_TOL * scale
        if in1 and not in2:
            return 1
        if in2 and not in1:
            return 2
        if in1 and in2:
            return 0  # zero vector
        return None

    # -- warp fields -------------------------------------------------------
    def warp_value(self, i: int, x) -> float:
        return self.warp(i).field.value(x)

    def log_warp(self, i: int) -> ScalarField:
        w = self.warp(i).field

        def ev(c, _w=w):
            return float(np.log(_w.value(c)))

        def grad(c, _w=w):
            return _w.grad_coords(c) / _w.value(c)

        def hess(c, _w=w):
            val = _w.value(c)
            gr = _w.grad_coords(c)
            return _w.hess_coords(c) / val - np.outer(gr, gr) / val**2

        return ScalarField(ev, analytic_grad=grad, analytic_hess=hess,
                           name=f"ln lam{i}")

    def grad_warp(self, i: int, x) -> TangentVector:
        """Product-metric gradient of lam_i."""
        return ck.gradient(self.warp(i).field, self.assembled, x)

    def grad_log_warp(self, i: int, x) -> TangentVector:
        return ck.gradient(self.log_warp(i), self.assembled, x)

    def sample_grid(self, per_axis: int = 4, inset: float = 0.05) -> list[np.ndarray]:
        return grid_points(self.domain_box, per_axis, inset)


def grid_points(box: np.ndarray, per_axis: int, inset: float = 0.05) -> list[np.ndarray]:
    box = np.asarray(box, dtype=float)
    axes = []
    for lo, hi in box:
        pad = inset * (hi - lo)
        axes.append(np.linspace(lo + pad, hi - pad, per_axis))
    return [np.array(p) for p in itertools.product(*axes)]


def offset_grid_points(box: np.ndarray, per_axis: int, inset: float = 0.05) -> list[np.ndarray]:
    """Shifted-lattice sample grid, never symmetric about the box center.

    Evidence sampling (classification) uses this to avoid the measure-zero
    traps where a symmetric grid lands exactly on zeros of the sampled field.
    """
    box = np.asarray(box, dtype=float)
    frac = (np.arange(per_axis) + 0.381966) / per_axis
    axes = []
    for lo, hi in box:
        pad = inset * (hi - lo)
        axes.append(lo + pad + frac * (hi - lo - 2 * pad))
    return [np.array(p) for p in itertools.product(*axes)]


def assemble(f1: FactorManifold, f2: FactorManifold, lam1: WarpFn, lam2: WarpFn,
             positivity_samples: int = 4) -> DoublyTwistedProduct:
    """Build the block product metric lam1^2 g1 (+) lam2^2 g2.

    Warp positivity is sampled on a grid over the joint domain box; analytic
    metric derivatives are assembled whenever both the factor metrics and the
    warps carry exact derivative callbacks.
    """
    n1, n2 = f1.dim, f2.dim
    n = n1 + n2
    box = np.vstack([f1.domain_box, f2.domain_box])
    for p in grid_points(box, positivity_samples, inset=0.0):
        for i, lam in ((1, lam1), (2, lam2)):
            v = lam.field.value(p)
            if not (v > 0.0):
                raise InvalidWarp(f"lam{i} = {v} <= 0 at {p}")

    s1, s2 = slice(0, n1), slice(n1, n)

    def ev(x):
        x1, x2 = x[s1], x[s2]
        out = np.zeros((n, n))
        out[s1, s1] = lam1.field.value(x) ** 2 * f1.metric.mat(x1)
        out[s2, s2] = lam2.field.value(x) ** 2 * f2.metric.mat(x2)
        return out

    have_d1 = (f1.metric.analytic_d1 is not None and f2.metric.analytic_d1 is not None
               and lam1.field.analytic_grad is not None and lam2.field.analytic_grad is not None)
    have_d2 = have_d1 and (f1.metric.analytic_d2 is not None and f2.metric.analytic_d2 is not None
                           and lam1.field.analytic_hess is not None
                           and lam2.field.analytic_hess is not None)

    def block_d1(x):
        out = np.zeros((n, n, n))
        for lam, fac, sl in ((lam1, f1, s1), (lam2, f2, s2)):
            xf = x[sl]
            gm = fac.metric.mat(xf)
            lv = lam.field.value(x)
            dl = lam.field.grad_coords(x)
            dgf = fac.metric.d1(xf)
            for k in range(n):
                out[k][sl, sl] += 2.0 * lv * dl[k] * gm
            off = sl.start
            for kf in range(fac.dim):
                out[off + kf][sl, sl] += lv**2 * dgf[kf]
        return out

    def block_d2(x):
        out = np.zeros((n, n, n, n))
        for lam, fac, sl in ((lam1, f1, s1), (lam2, f2, s2)):
            xf = x[sl]
            gm = fac.metric.mat(xf)
            lv = lam.field.value(x)
            dl = lam.field.grad_coords(x)
            hl = lam.field.hess_coords(x)
            dgf = fac.metric.d1(xf)
            ddgf = fac.metric.d2(xf)
            off = sl.start
            for k in range(n):
                for l in range(n):
                    blk = 2.0 * (dl[k] * dl[l] + lv * hl[k, l]) * gm
                    if sl.start <= l < sl.stop:
                        blk += 2.0 * lv * dl[k] * dgf[l - off]
                    if sl.start <= k < sl.stop:
                        blk += 2.0 * lv * dl[l] * dgf[k - off]
                    if sl.start <= k < sl.stop and sl.start <= l < sl.stop:
                        blk += lv**2 * ddgf[k - off, l - off]
                    out[k, l][sl, sl] += blk
        return out

    assembled = MetricField(
        dim=n,
        eval=ev,
        signature=Signature(np.concatenate([f1.metric.signature.signs,
                                            f2.metric.signature.signs])),
        analytic_d1=block_d1 if have_d1 else None,
        analytic_d2=block_d2 if have_d2 else None,
        domain_box=box,
        name=f"{f1.name} x {f2.name}",
    )
    return DoublyTwistedProduct(f1, f2, lam1, lam2, assembled)


# ---------------------------------------------------------------------------
# connection (closed form)

def _require_slot(dtp: DoublyTwistedProduct, v: TangentVector, slot: int, label: str):
    got = dtp.slot_of(v)
    if got not in (slot, 0):
        raise CaseMismatch(f"{label} must be a factor-{slot} vector, got slots {got}")


def connection_closed_form(dtp: DoublyTwistedProduct, x, a: TangentVector,
                           b: TangentVector, case: str) -> TangentVector:
    """Levi-Civita connection of the product metric, by slot case.

    HH: nabla_a b = nabla^1_a b - g(a,b) grad(ln lam1) + g(a, grad ln lam1) b
                    + g(b, grad ln lam1) a          (a, b factor-1)
    VV: same with factor 2 and lam2.
    HV: nabla_a b = g(grad ln lam1, b) a + g(grad ln lam2, a) b
                    (a factor-1, b factor-2)

    The factor term contracts the factor Christoffel symbols with constant
    component extensions, matching the product-level oracle convention.
    """
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    pt = CoordPoint(coords)
    g = dtp.assembled
    if case not in ("HH", "VV", "HV"):
        raise ValueError(f"case must be HH, VV or HV, got {case!r}")
    if case == "HH":
        _require_slot(dtp, a, 1, "a")
        _require_slot(dtp, b, 1, "b")
        i = 1
    elif case == "VV":
        _require_slot(dtp, a, 2, "a")
        _require_slot(dtp, b, 2, "b")
        i = 2
    else:
        _require_slot(dtp, a, 1, "a")
        _require_slot(dtp, b, 2, "b")
        grad1 = dtp.grad_log_warp(1, coords)
        grad2 = dtp.grad_log_warp(2, coords)
        out = (ck.inner_product(g, grad1, b) * a.components
               + ck.inner_product(g, grad2, a) * b.components)
        return TangentVector(pt, out)

    fac = dtp.factor(i)
    sl = dtp.slot(i)
    xf = coords[sl]
    gamma_f = ck.christoffel_numeric(fac.metric, xf)
    factor_term = dtp.embed(i, np.einsum("kij,i,j->k", gamma_f,
                                         a.components[sl], b.components[sl]))
    grad = dtp.grad_log_warp(i, coords)
    gab = ck.inner_product(g, a, b)
    out = (factor_term
           - gab * grad.components
           + ck.inner_product(g, a, grad) * b.components
           + ck.inner_product(g, b, grad) * a.components)
    return TangentVector(pt, out)


def connection_numeric(dtp: DoublyTwistedProduct, x, a: TangentVector,
                       b: TangentVector) -> TangentVector:
    """Oracle side: product-level Christoffel contraction Gamma^k_ij a^i b^j."""
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    gamma = ck.christoffel_numeric(dtp.assembled, coords)
    return TangentVector(CoordPoint(coords),
                         np.einsum("kij,i,j->k", gamma, a.components, b.components))


# ---------------------------------------------------------------------------
# mean curvature data and classification

def mean_curvature_vector(dtp: DoublyTwistedProduct, x, i: int) -> TangentVector:
    """N_1 = P_2(-grad ln lam1), N_2 = P_1(-grad ln lam2) (product gradient)."""
    if i not in (1, 2):
        raise ValueError("foliation index must be 1 or 2")
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    grad = dtp.grad_log_warp(i, coords)
    return TangentVector(CoordPoint(coords), dtp.project(3 - i, -grad.components))


def mean_curvature_form(dtp: DoublyTwistedProduct, x, i: int) -> OneForm:
    """omega_i: metric dual of N_i."""
    n = mean_curvature_vector(dtp, x, i)
    return OneForm(n.base, dtp.assembled.mat(n.base) @ n.components)


def classify(dtp: DoublyTwistedProduct, grid: Optional[Sequence] = None,
             per_axis: int = 4, vanish_tol: float = VANISH_TOL,
             closed_tol: float = CLOSED_TOL) -> StructureClass:
    """Structure tag from sampled mean-curvature evidence.

    DirectProduct: both N_i vanish.  Warped: exactly one vanishes and the
    other's dual form is closed; Twisted if it is not closed.  With both
    nonzero: DoublyWarped when both duals are closed, DoublyTwisted else.
    """
    if grid is not None:
        pts = list(grid)
    else:
        pts = offset_grid_points(dtp.domain_box, per_axis)
    max_n = [0.0, 0.0]
    max_dw = [0.0, 0.0]

    def omega_field(i):
        def f(c):
            return mean_curvature_form(dtp, c, i).components
        return f

    for i in (1, 2):
        for p in pts:
            ni = mean_curvature_vector(dtp, p, i)
            max_n[i - 1] = max(max_n[i - 1], float(np.max(np.abs(ni.components))))
    for i in (1, 2):
        # skip the d(omega) sweep when N_i already vanishes identically
        if max_n[i - 1] < vanish_tol:
            continue
        f = omega_field(i)
        for p in pts:
            dw = ck.exterior_derivative_numeric(f, p, step=ck.FD_STEP_2)
            max_dw[i - 1] = max(max_dw[i - 1], float(np.max(np.abs(dw))))

    v1, v2 = max_n[0] < vanish_tol, max_n[1] < vanish_tol
    c1, c2 = max_dw[0] < closed_tol, max_dw[1] < closed_tol
    if v1 and v2:
        tag = StructureTag.DIRECT_PRODUCT
    elif v1 or v2:
        other_closed = c2 if v1 else c1
        tag = StructureTag.WARPED if other_closed else StructureTag.TWISTED
    else:
        tag = StructureTag.DOUBLY_WARPED if (c1 and c2) else StructureTag.DOUBLY_TWISTED
    return StructureClass(tag, max_n[0], max_n[1], max_dw[0], max_dw[1])


# ---------------------------------------------------------------------------
# sectional curvature (closed form)

PlaneInput = Union[MixedPlane, tuple]


def _unit_sign(dtp: DoublyTwistedProduct, v: TangentVector, label: str) -> int:
    q = ck.inner_product(dtp.assembled, v, v)
    if abs(abs(q) - 1.0) > UNIT_TOL:
        raise NormalizationError(f"{label} is not unitary: g({label},{label}) = {q!r}")
    return 1 if q > 0 else -1


def sectional_curvature_closed_form(dtp: DoublyTwistedProduct, plane: PlaneInput) -> float:
    """Closed-form sectional curvature for factor-1, factor-2 or mixed planes.

    Inputs must be unitary and orthogonal (the operation refuses to normalize
    silently).  Factor planes:

        K = (K_i + g(grad lam_i, grad lam_i)) / lam_i^2
            - (eps_u g(h_i(u), u) + eps_v g(h_i(v), v)) / lam_i

    mixed planes (u factor-1, v factor-2):

        K = -(eps_v / lam1) g(h_1(v), v) - (eps_u / lam2) g(h_2(u), u)
            + g(grad lam1, grad lam2) / (lam1 lam2)

    with K_i the factor sectional curvature and h_i, grad the hessian
    endomorphism and gradient of lam_i in the full product metric.
    """
    if isinstance(plane, MixedPlane):
        u, v = plane.horiz, plane.vert
    else:
        u, v = plane
    if not np.array_equal(u.base.coords, v.base.coords):
        raise CaseMismatch("plane vectors must share a base point")
    coords = u.base.coords
    g = dtp.assembled
    su, sv = dtp.slot_of(u), dtp.slot_of(v)
    if su is None or sv is None or 0 in (su, sv):
        raise CaseMismatch("plane vectors must be pure factor-slot vectors")
    eps_u = _unit_sign(dtp, u, "u")
    eps_v = _unit_sign(dtp, v, "v")
    if abs(ck.inner_product(g, u, v)) > UNIT_TOL:
        raise NormalizationError("plane vectors are not orthogonal")

    if su == sv:
        i = su
        fac = dtp.factor(i)
        sl = dtp.slot(i)
        xf = coords[sl]
        uf = TangentVector(CoordPoint(xf), u.components[sl])
        vf = TangentVector(CoordPoint(xf), v.components[sl])
        k_factor = ck.sectional_curvature_numeric(fac.metric, xf, uf, vf)
        lam = dtp.warp_value(i, coords)
        warp = dtp.warp(i).field
        grad = dtp.grad_warp(i, coords)
        gg = ck.inner_product(g, grad, grad)
        hu = ck.hessian_endomorphism(warp, g, coords, u)
        hv = ck.hessian_endomorphism(warp, g, coords, v)
        return ((k_factor + gg) / lam**2
                - (eps_u * ck.inner_product(g, hu, u)
                   + eps_v * ck.inner_product(g, hv, v)) / lam)

    if su == 2:  # normalize order: u horizontal, v vertical
        u, v, eps_u, eps_v = v, u, eps_v, eps_u
    lam1 = dtp.warp_value(1, coords)
    lam2 = dtp.warp_value(2, coords)
    h1v = ck.hessian_endomorphism(dtp.lam1.field, g, coords, v)
    h2u = ck.hessian_endomorphism(dtp.lam2.field, g, coords, u)
    grad1 = dtp.grad_warp(1, coords)
    grad2 = dtp.grad_warp(2, coords)
    return (-(eps_v / lam1) * ck.inner_product(g, h1v, v)
            - (eps_u / lam2) * ck.inner_product(g, h2u, u)
            + ck.inner_product(g, grad1, grad2) / (lam1 * lam2))


# ---------------------------------------------------------------------------
# lightlike sectional curvature

def lightlike_sectional_curvature(g: MetricField, xi: TangentVector,
                                  u: TangentVector, v: TangentVector,
                                  tol: float = 1e-9) -> float:
    """K_xi(span(u, v)) = g(R(v, u) u, v) / g(v, v) for a degenerate plane.

    Requires g Lorentzian, g(xi,xi) = -1, g(u,u) = 0, g(u,xi) = 1 and
    g(v,v) != 0; the value is invariant under rescaling v.
    """
    if g.signature.index != 1:
        raise InvalidFrame(f"metric index {g.signature.index} is not Lorentzian")
    q_xi = ck.inner_product(g, xi, xi)
    q_u = ck.inner_product(g, u, u)
    q_uxi = ck.inner_product(g, u, xi)
    if abs(q_xi + 1.0) > tol:
        raise InvalidFrame(f"g(xi, xi) = {q_xi!r}, expected -1")
    if abs(q_u) > tol:
        raise InvalidFrame(f"g(u, u) = {q_u!r}, expected 0")
    if abs(q_uxi - 1.0) > tol:
        raise InvalidFrame(f"g(u, xi) = {q_uxi!r}, expected 1")
    q_v = ck.inner_product(g, v, v)
    if abs(q_v) <= tol:
        raise InvalidFrame("g(v, v) must be nonzero")
    coords = u.base.coords
    riem = ck.riemann_numeric(g, coords)
    rv = np.einsum("lijk,i,j,k->l", riem, v.components, u.components, u.components)
    gm = g.mat(coords)
    return float(v.components @ gm @ rv) / q_v


# ---------------------------------------------------------------------------
# O'Neill T tensor of the factor-1 projection (fibers = factor-2 slices)

def oneill_T(dtp: DoublyTwistedProduct, x, E: TangentVector, F: TangentVector) -> TangentVector:
    """T(E, F) = g(E^v, F^v) N - g(N, F) E^v with N the fiber mean curvature."""
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    pt = CoordPoint(coords)
    g = dtp.assembled
    N = mean_curvature_vector(dtp, coords, 2)
    Ev = TangentVector(pt, dtp.project(2, E.components))
    Fv = TangentVector(pt, dtp.project(2, F.components))
    out = (ck.inner_product(g, Ev, Fv) * N.components
           - ck.inner_product(g, N, F) * Ev.components)
    return TangentVector(pt, out)


def oneill_T_definitional(dtp: DoublyTwistedProduct, x, E: TangentVector,
                          F: TangentVector) -> TangentVector:
    """T(E, F) = h nabla_{E^v} F^v + v nabla_{E^v} F^h from the connection."""
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    gamma = ck.christoffel_numeric(dtp.assembled, coords)
    Ev = dtp.project(2, E.components)
    Fv = dtp.project(2, F.components)
    Fh = dtp.project(1, F.components)
    d_vv = np.einsum("kij,i,j->k", gamma, Ev, Fv)
    d_vh = np.einsum("kij,i,j->k", gamma, Ev, Fh)
    return TangentVector(CoordPoint(coords),
                         dtp.project(1, d_vv) + dtp.project(2, d_vh))


def oneill_nabla_T(dtp: DoublyTwistedProduct, x, X: TangentVector,
                   E: TangentVector, F: TangentVector) -> np.ndarray:
    """(nabla_X T)(E, F) by finite differences of the closed-form T field.

    Uses constant-component extensions of E and F; X should be horizontal.
    """
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
    g = dtp.assembled

    def t_field(c):
        p = CoordPoint(c)
        return oneill_T(dtp, c, TangentVector(p, E.components),
                        TangentVector(p, F.components)).components

    full = ck.covariant_derivative(g, coords, X, t_field)
    gamma = ck.christoffel_numeric(g, coords)
    dxE = np.einsum("kij,i,j->k", gamma, X.components, E.components)
    dxF = np.einsum("kij,i,j->k", gamma, X.components, F.components)
    pt = CoordPoint(coords)
    t1 = oneill_T(dtp, coords, TangentVector(pt, dxE), F).components
    t2 = oneill_T(dtp, coords, E, TangentVector(pt, dxF)).components
    return full - t1 - t2


def fiber_mean_curvature_derivative(dtp: DoublyTwistedProduct, x, X: TangentVector) -> np.ndarray:
    """nabla_X N for the fiber mean curvature field N = N_2."""
    coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)

    def n_field(c):
        return mean_curvature_vector(dtp, c, 2).components

    return ck.covariant_derivative(dtp.assembled, coords, X, n_field)


def hessian_form_predicate(dtp: DoublyTwistedProduct, i: int, x, v: TangentVector) -> float:
    """g(h_{lam_i}(v), v): samplable hypothesis of the constancy heuristic."""
    h = ck.hessian_endomorphism(dtp.warp(i).field, dtp.assembled, x, v)
    return ck.inner_product(dtp.assembled, h, v)
