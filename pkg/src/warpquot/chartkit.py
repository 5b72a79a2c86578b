"""Coordinate-chart tensor kernel.

Metric evaluation, finite-difference Christoffel/Riemann oracles, gradients,
hessian endomorphisms and exterior derivatives.  Everything here is a pure
function of its inputs; analytic derivative callbacks, when a field carries
them, always win over finite differences.

Index conventions
-----------------
* ``christoffel_numeric(g, x)[k, i, j]`` is ``Gamma^k_ij``.
* ``riemann_numeric(g, x)[l, i, j, k]`` is the ``l`` component of
  ``R(e_i, e_j) e_k`` with ``R(X, Y)Z = [nabla_X, nabla_Y] Z - nabla_[X,Y] Z``.
  The sign is pinned by the acceptance test "unit round sphere has K = +1".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BaseMismatch,
    DegenerateMetric,
    DegeneratePlane,
    NumericsError,
)

# Degeneracy thresholds and finite-difference steps (see module notes: steps
# balance truncation against cancellation at double precision).
DET_TOL = 1e-12
PLANE_TOL = 1e-12
FD_STEP_1 = 1e-5   # first derivatives, scaled per coordinate
FD_STEP_2 = 1e-4   # nested second derivatives
SYMMETRY_TOL = 1e-12


def _as_array(values, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a flat coordinate/component vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite entries in {arr}")
    return arr


@dataclass(frozen=True)
class CoordPoint:
    """Point in a coordinate chart."""

    coords: np.ndarray

    def __init__(self, coords):
        object.__setattr__(self, "coords", _as_array(coords))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def shifted(self, delta) -> "CoordPoint":
        return CoordPoint(self.coords + np.asarray(delta, dtype=float))

    def __repr__(self):
        return f"CoordPoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True)
class Signature:
    """Metric signature as a vector of +/-1; index = number of -1 entries."""

    signs: np.ndarray

    def __init__(self, signs):
        arr = np.asarray(signs, dtype=int)
        if not np.all(np.abs(arr) == 1):
            raise ValueError(f"signature entries must be +1 or -1, got {arr}")
        object.__setattr__(self, "signs", arr)

    @property
    def n(self) -> int:
        return self.signs.shape[0]

    @property
    def index(self) -> int:
        return int(np.sum(self.signs < 0))

    @staticmethod
    def riemannian(n: int) -> "Signature":
        return Signature(np.ones(n, dtype=int))

    @staticmethod
    def lorentzian(n: int) -> "Signature":
        signs = np.ones(n, dtype=int)
        signs[0] = -1
        return Signature(signs)


@dataclass(frozen=True)
class TangentVector:
    base: CoordPoint
    components: np.ndarray

    def __init__(self, base: CoordPoint, components):
        if not isinstance(base, CoordPoint):
            base = CoordPoint(base)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", _as_array(components, base.n))

    @property
    def n(self) -> int:
        return self.components.shape[0]

    def __repr__(self):
        return (f"TangentVector(at={np.array2string(self.base.coords, precision=4)}, "
                f"v={np.array2string(self.components, precision=6)})")


@dataclass(frozen=True)
class OneForm:
    base: CoordPoint
    components: np.ndarray

    def __init__(self, base: CoordPoint, components):
        if not isinstance(base, CoordPoint):
            base = CoordPoint(base)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", _as_array(components, base.n))


@dataclass
class MetricField:
    """Symmetric-matrix-valued field with signature metadata.

    ``eval`` maps a coordinate array (length ``dim``) to an (n, n) matrix.
    ``analytic_d1(x)[k] = d_k g`` and ``analytic_d2(x)[k, l] = d_k d_l g``
    are optional exact-derivative callbacks.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    signature: Signature
    analytic_d1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_d2: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain_box: Optional[np.ndarray] = None  # (dim, 2) coordinate bounds
    name: str = ""

    def __post_init__(self):
        if self.signature.n != self.dim:
            raise ValueError("signature length must equal metric dimension")
        if self.domain_box is not None:
            box = np.asarray(self.domain_box, dtype=float)
            if box.shape != (self.dim, 2):
                raise ValueError(f"domain_box must be ({self.dim}, 2), got {box.shape}")
            self.domain_box = box

    def mat(self, x) -> np.ndarray:
        coords = x.coords if isinstance(x, CoordPoint) else _as_array(x, self.dim)
        g = np.asarray(self.eval(coords), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise NumericsError(f"metric eval returned shape {g.shape}, expected ({self.dim}, {self.dim})")
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite metric entries at {coords}")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * scale:
            raise NumericsError(f"metric not symmetric at {coords}")
        return g

    def inv(self, x) -> np.ndarray:
        g = self.mat(x)
        det = np.linalg.det(g)
        if abs(det) < DET_TOL:
            raise DegenerateMetric(f"|det g| = {abs(det):.3e} at {x}")
        return np.linalg.inv(g)

    def d1(self, x) -> np.ndarray:
        """d1[k, i, j] = d_k g_ij, analytic when available else central FD."""
        coords = x.coords if isinstance(x, CoordPoint) else _as_array(x, self.dim)
        if self.analytic_d1 is not None:
            out = np.asarray(self.analytic_d1(coords), dtype=float)
            if out.shape != (self.dim,) * 3:
                raise NumericsError(f"analytic_d1 returned shape {out.shape}")
            return out
        out = np.empty((self.dim, self.dim, self.dim))
        for k in range(self.dim):
            h = fd_step(coords[k], FD_STEP_1)
            e = np.zeros(self.dim)
            e[k] = h
            out[k] = (self.mat(coords + e) - self.mat(coords - e)) / (2.0 * h)
        return out

    def d2(self, x) -> Optional[np.ndarray]:
        """d2[k, l, i, j] = d_k d_l g_ij when analytic_d2 is supplied, else None."""
        if self.analytic_d2 is None:
            return None
        coords = x.coords if isinstance(x, CoordPoint) else _as_array(x, self.dim)
        out = np.asarray(self.analytic_d2(coords), dtype=float)
        if out.shape != (self.dim,) * 4:
            raise NumericsError(f"analytic_d2 returned shape {out.shape}")
        return out

    def check_at(self, x) -> None:
        """Nondegeneracy check: eigenvalue sign pattern must match the signature."""
        g = self.mat(x)
        eigs = np.linalg.eigvalsh(g)
        neg = int(np.sum(eigs < -DET_TOL))
        zero = int(np.sum(np.abs(eigs) <= DET_TOL))
        if zero:
            raise DegenerateMetric(f"near-zero eigenvalue at {x}: {eigs}")
        if neg != self.signature.index:
            raise NumericsError(
                f"eigenvalue signs at {x} ({neg} negative) do not match signature index "
                f"{self.signature.index}")

    @staticmethod
    def constant(matrix, domain_box=None, name="") -> "MetricField":
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        eigs = np.linalg.eigvalsh(m)
        signs = np.where(np.sort(eigs) < 0, -1, 1)
        zero = np.zeros((n, n, n))
        zero2 = np.zeros((n, n, n, n))
        return MetricField(
            dim=n,
            eval=lambda x, _m=m: _m.copy(),
            signature=Signature(np.sort(signs)),
            analytic_d1=lambda x, _z=zero: _z,
            analytic_d2=lambda x, _z=zero2: _z,
            domain_box=domain_box,
            name=name,
        )

    @staticmethod
    def euclidean(n: int, domain_box=None, name="euclidean") -> "MetricField":
        return MetricField.constant(np.eye(n), domain_box=domain_box, name=name)


@dataclass
class ScalarField:
    """Scalar function of chart coordinates with optional exact derivatives."""

    eval: Callable[[np.ndarray], float]
    analytic_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def value(self, x) -> float:
        coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
        v = float(self.eval(coords))
        if not np.isfinite(v):
            raise NumericsError(f"scalar field {self.name!r} non-finite at {coords}")
        return v

    def grad_coords(self, x, n: Optional[int] = None) -> np.ndarray:
        """Coordinate partials (d_i f), analytic when available."""
        coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
        if self.analytic_grad is not None:
            return np.asarray(self.analytic_grad(coords), dtype=float)
        n = coords.shape[0] if n is None else n
        out = np.empty(n)
        for i in range(n):
            h = fd_step(coords[i], FD_STEP_1)
            e = np.zeros(n)
            e[i] = h
            out[i] = (self.value(coords + e) - self.value(coords - e)) / (2.0 * h)
        return out

    def hess_coords(self, x, n: Optional[int] = None) -> np.ndarray:
        """Coordinate second partials (d_i d_j f), analytic when available."""
        coords = x.coords if isinstance(x, CoordPoint) else np.asarray(x, dtype=float)
        if self.analytic_hess is not None:
            return np.asarray(self.analytic_hess(coords), dtype=float)
        n = coords.shape[0] if n is None else n
        out = np.empty((n, n))
        f0 = self.value(coords)
        steps = [fd_step(coords[i], FD_STEP_2) for i in range(n)]
        for i in range(n):
            hi = steps[i]
            ei = np.zeros(n)
            ei[i] = hi
            out[i, i] = (self.value(coords + ei) - 2.0 * f0 + self.value(coords - ei)) / hi**2
            for j in range(i + 1, n):
                hj = steps[j]
                ej = np.zeros(n)
                ej[j] = hj
                out[i, j] = (
                    self.value(coords + ei + ej) - self.value(coords + ei - ej)
                    - self.value(coords - ei + ej) + self.value(coords - ei - ej)
                ) / (4.0 * hi * hj)
                out[j, i] = out[i, j]
        return out

    @staticmethod
    def constant(c: float, name="") -> "ScalarField":
        return ScalarField(
            eval=lambda x, _c=float(c): _c,
            analytic_grad=lambda x: np.zeros(len(x)),
            analytic_hess=lambda x: np.zeros((len(x), len(x))),
            name=name or f"const({c})",
        )


def fd_step(xi: float, base: float = FD_STEP_1) -> float:
    """Central-difference step: max(base, base * |x_i|)."""
    return max(base, base * abs(xi))


def _coords(x, n: Optional[int] = None) -> np.ndarray:
    return x.coords if isinstance(x, CoordPoint) else _as_array(x, n)


def inner_product(g: MetricField, u: TangentVector, v: TangentVector) -> float:
    """g(u, v) at the common base point."""
    if not np.array_equal(u.base.coords, v.base.coords):
        raise BaseMismatch(f"bases differ: {u.base} vs {v.base}")
    gm = g.mat(u.base)
    return float(u.components @ gm @ v.components)


def norm(g: MetricField, v: TangentVector) -> float:
    """|v| = sqrt(|g(v, v)|)."""
    return float(np.sqrt(abs(inner_product(g, v, v))))


def causal_sign(g: MetricField, v: TangentVector, tol: float = 1e-9) -> int:
    """Sign of g(v, v): -1, 0 or +1 with a lightlike band of width tol."""
    q = inner_product(g, v, v)
    if abs(q) <= tol:
        return 0
    return 1 if q > 0 else -1


def christoffel_numeric(g: MetricField, x, step: Optional[float] = None) -> np.ndarray:
    """Gamma[k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).

    Uses analytic first derivatives when the field carries them; otherwise
    central differences (uniform ``step`` if given, the per-coordinate
    default rule if not).
    """
    if step is not None and step <= 0:
        raise ValueError("step must be positive")
    coords = _coords(x, g.dim)
    ginv = g.inv(coords)
    if step is None or g.analytic_d1 is not None:
        dg = g.d1(coords)
    else:
        n = g.dim
        dg = np.empty((n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            dg[k] = (g.mat(coords + e) - g.mat(coords - e)) / (2.0 * step)
    # bracket[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    bracket = (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return 0.5 * np.einsum("kl,lij->kij", ginv, bracket)


def christoffel_d1(g: MetricField, x) -> np.ndarray:
    """dGamma[m, k, i, j] = d_m Gamma^k_ij.

    Exact when the metric has analytic first and second derivatives, else
    nested central differences with the second-derivative step.
    """
    coords = _coords(x, g.dim)
    n = g.dim
    d2 = g.d2(coords)
    if d2 is not None and g.analytic_d1 is not None:
        dg = g.d1(coords)
        ginv = g.inv(coords)
        dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
        bracket = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
        dbracket = np.einsum("mijl->mlij", d2) + np.einsum("mjil->mlij", d2) - d2
        return 0.5 * (np.einsum("mkl,lij->mkij", dginv, bracket)
                      + np.einsum("kl,mlij->mkij", ginv, dbracket))
    out = np.empty((n, n, n, n))
    for m in range(n):
        h = fd_step(coords[m], FD_STEP_2)
        e = np.zeros(n)
        e[m] = h
        out[m] = (christoffel_numeric(g, coords + e) - christoffel_numeric(g, coords - e)) / (2.0 * h)
    return out


def riemann_numeric(g: MetricField, x) -> np.ndarray:
    """riem[l, i, j, k]: the l component of R(e_i, e_j) e_k.

    R^l_(k;ij) = d_i Gamma^l_jk - d_j Gamma^l_ik
                 + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik.
    """
    coords = _coords(x, g.dim)
    gamma = christoffel_numeric(g, coords)
    dgamma = christoffel_d1(g, coords)
    term = np.einsum("iljk->lijk", dgamma) + np.einsum("lim,mjk->lijk", gamma, gamma)
    return term - np.einsum("lijk->ljik", term)


def riemann_lowered(g: MetricField, x) -> np.ndarray:
    """low[l, i, j, k] = g(R(e_i, e_j) e_k, e_l)."""
    coords = _coords(x, g.dim)
    return np.einsum("lm,mijk->lijk", g.mat(coords), riemann_numeric(g, coords))


def plane_gram_det(g: MetricField, u: TangentVector, v: TangentVector) -> float:
    """g(u,u) g(v,v) - g(u,v)^2; degenerate plane when ~0."""
    return (inner_product(g, u, u) * inner_product(g, v, v)
            - inner_product(g, u, v) ** 2)


def sectional_curvature_numeric(g: MetricField, x, u: TangentVector, v: TangentVector) -> float:
    """K(span(u, v)) = g(R(u, v) v, u) / (g(u,u) g(v,v) - g(u,v)^2)."""
    coords = _coords(x, g.dim)
    q = plane_gram_det(g, u, v)
    if abs(q) < PLANE_TOL:
        raise DegeneratePlane(f"plane Gram determinant {q:.3e} at {coords}")
    riem = riemann_numeric(g, coords)
    ruvv = np.einsum("lijk,i,j,k->l", riem, u.components, v.components, v.components)
    gm = g.mat(coords)
    return float(u.components @ gm @ ruvv) / q


def gradient(f: ScalarField, g: MetricField, x) -> TangentVector:
    """Metric gradient: components g^{-1} df."""
    coords = _coords(x, g.dim)
    df = f.grad_coords(coords, g.dim)
    return TangentVector(CoordPoint(coords), g.inv(coords) @ df)


def hessian_matrix(f: ScalarField, g: MetricField, x) -> np.ndarray:
    """Covariant hessian Hess_ij = d_i d_j f - Gamma^k_ij d_k f."""
    coords = _coords(x, g.dim)
    ddf = f.hess_coords(coords, g.dim)
    df = f.grad_coords(coords, g.dim)
    gamma = christoffel_numeric(g, coords)
    return ddf - np.einsum("kij,k->ij", gamma, df)


def hessian_endomorphism(f: ScalarField, g: MetricField, x, v: TangentVector) -> TangentVector:
    """h_f(v) = nabla_v grad f; the bilinear form g(h_f(u), v) is symmetric."""
    coords = _coords(x, g.dim)
    hess = hessian_matrix(f, g, coords)
    endo = g.inv(coords) @ hess
    return TangentVector(CoordPoint(coords), endo @ v.components)


def exterior_derivative_numeric(omega_field: Callable[[np.ndarray], np.ndarray], x,
                                n: Optional[int] = None,
                                step: Optional[float] = None) -> np.ndarray:
    """(d omega)_ij = d_i omega_j - d_j omega_i by central differences.

    ``omega_field`` maps a coordinate array to one-form components (an
    ``OneForm`` return value is also accepted).  Pass a larger ``step`` when
    the one-form samples are themselves finite-difference results.
    """
    coords = _coords(x, n)
    n = coords.shape[0]

    def comps(c):
        w = omega_field(c)
        w = w.components if isinstance(w, OneForm) else np.asarray(w, dtype=float)
        if not np.all(np.isfinite(w)):
            raise NumericsError(f"non-finite one-form sample at {c}")
        return w

    domega = np.empty((n, n))
    for i in range(n):
        h = fd_step(coords[i], FD_STEP_1 if step is None else step)
        e = np.zeros(n)
        e[i] = h
        domega[i] = (comps(coords + e) - comps(coords - e)) / (2.0 * h)
    return domega - domega.T


def covariant_derivative(g: MetricField, x, direction: TangentVector,
                         vec_field: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """(nabla_X V)^k = X^i d_i V^k + Gamma^k_ij X^i V^j for a component field V."""
    coords = _coords(x, g.dim)
    n = g.dim
    dV = np.empty((n, n))
    for i in range(n):
        h = fd_step(coords[i], FD_STEP_1)
        e = np.zeros(n)
        e[i] = h
        dV[i] = (np.asarray(vec_field(coords + e), dtype=float)
                 - np.asarray(vec_field(coords - e), dtype=float)) / (2.0 * h)
    gamma = christoffel_numeric(g, coords)
    X = direction.components
    V = np.asarray(vec_field(coords), dtype=float)
    return np.einsum("i,ik->k", X, dV) + np.einsum("kij,i,j->k", gamma, X, V)


def gram_schmidt(g: MetricField, x, vectors: Sequence[TangentVector],
                 tol: float = 1e-10) -> list[TangentVector]:
    """Orthonormalize w.r.t. g (signs allowed): g(e_i, e_j) = +/- delta_ij.

    Raises DegeneratePlane when an intermediate vector is (numerically)
    lightlike, since the span then has no pseudo-orthonormal basis.
    """
    coords = _coords(x, g.dim)
    pt = CoordPoint(coords)
    gm = g.mat(coords)
    out: list[TangentVector] = []
    for v in vectors:
        w = v.components.astype(float).copy()
        for e in out:
            q = float(e.components @ gm @ e.components)  # +/-1 after normalization
            w -= (float(e.components @ gm @ w) / q) * e.components
        nrm2 = float(w @ gm @ w)
        if abs(nrm2) < tol:
            raise DegeneratePlane("lightlike direction encountered in Gram-Schmidt")
        out.append(TangentVector(pt, w / np.sqrt(abs(nrm2))))
    return out
