"""Shared fixture models: the built-in products and quotients.

Every analytic fixture carries exact metric/warp derivatives so the
closed-form-vs-oracle comparisons run at tight tolerances; FD-only variants
can be produced with ``strip_analytic`` to keep both computation routes
honestly independent.
"""

from __future__ import annotations

import numpy as np

from . import productgeo as pg
from . import quotient as qt
from .chartkit import MetricField, ScalarField, Signature


# ---------------------------------------------------------------------------
# scalar-field builders with exact derivatives

def coordinate_warp(index: int, n: int, name: str = "") -> ScalarField:
    """lam(x) = x[index] (positive on the relevant boxes)."""

    def grad(x):
        out = np.zeros(n)
        out[index] = 1.0
        return out

    return ScalarField(lambda x: float(x[index]), grad,
                       lambda x: np.zeros((n, n)), name=name or f"coord{index}")


def function_of_coordinate_warp(index: int, n: int, f, df, ddf, name: str = "") -> ScalarField:
    """lam(x) = f(x[index]) with exact first/second derivatives."""

    def grad(x):
        out = np.zeros(n)
        out[index] = df(float(x[index]))
        return out

    def hess(x):
        out = np.zeros((n, n))
        out[index, index] = ddf(float(x[index]))
        return out

    return ScalarField(lambda x: float(f(float(x[index]))), grad, hess, name=name)


def trig_warp(n: int, amps, freqs, phases, name: str = "trig-warp") -> ScalarField:
    """lam(x) = exp(sum_j a_j sin(b_j . x + c_j)): positive, fully analytic."""
    amps = np.asarray(amps, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    phases = np.asarray(phases, dtype=float)

    def s(x):
        return float(amps @ np.sin(freqs @ x + phases))

    def ds(x):
        return (amps * np.cos(freqs @ x + phases)) @ freqs

    def dds(x):
        return -np.einsum("j,j,ja,jb->ab", amps, np.sin(freqs @ x + phases), freqs, freqs)

    def grad(x):
        return np.exp(s(x)) * ds(x)

    def hess(x):
        d = ds(x)
        return np.exp(s(x)) * (np.outer(d, d) + dds(x))

    return ScalarField(lambda x: float(np.exp(s(x))), grad, hess, name=name)


def conformal_flat_metric(dim: int, amp: float, freq, phase: float, box,
                          signs=None, name: str = "conformal") -> MetricField:
    """g = exp(2 phi) * diag(signs), phi = amp sin(freq . x + phase)."""
    freq = np.asarray(freq, dtype=float)
    diag = np.diag(np.ones(dim) if signs is None else np.asarray(signs, dtype=float))

    def phi(x):
        return amp * np.sin(freq @ x + phase)

    def dphi(x):
        return amp * np.cos(freq @ x + phase) * freq

    def ddphi(x):
        return -amp * np.sin(freq @ x + phase) * np.outer(freq, freq)

    def ev(x):
        return np.exp(2 * phi(x)) * diag

    def d1(x):
        e = np.exp(2 * phi(x))
        dp = dphi(x)
        return np.array([2 * dp[k] * e * diag for k in range(dim)])

    def d2(x):
        e = np.exp(2 * phi(x))
        dp = dphi(x)
        ddp = ddphi(x)
        out = np.zeros((dim, dim, dim, dim))
        for k in range(dim):
            for l in range(dim):
                out[k, l] = (4 * dp[k] * dp[l] + 2 * ddp[k, l]) * e * diag
        return out

    sig = Signature(np.sort(np.sign(np.diag(diag)).astype(int)))
    return MetricField(dim, ev, sig, d1, d2, domain_box=np.asarray(box, dtype=float), name=name)


def strip_analytic(dtp: pg.DoublyTwistedProduct) -> pg.DoublyTwistedProduct:
    """Same product, all exact-derivative callbacks removed (pure FD route)."""

    def bare_metric(m: MetricField) -> MetricField:
        return MetricField(m.dim, m.eval, m.signature, domain_box=m.domain_box,
                           name=m.name + "-fd")

    def bare_scalar(s: ScalarField) -> ScalarField:
        return ScalarField(s.eval, name=s.name + "-fd")

    f1 = pg.FactorManifold(dtp.f1.name, dtp.f1.dim, bare_metric(dtp.f1.metric), dtp.f1.domain_box)
    f2 = pg.FactorManifold(dtp.f2.name, dtp.f2.dim, bare_metric(dtp.f2.metric), dtp.f2.domain_box)
    return pg.assemble(f1, f2,
                       pg.WarpFn(bare_scalar(dtp.lam1.field), dtp.lam1.dependency),
                       pg.WarpFn(bare_scalar(dtp.lam2.field), dtp.lam2.dependency))


# ---------------------------------------------------------------------------
# product fixtures

def flat_direct_product() -> pg.DoublyTwistedProduct:
    """Euclidean R x R as a direct product."""
    f1 = pg.FactorManifold("line-x", 1, MetricField.euclidean(1), [[-2.0, 2.0]])
    f2 = pg.FactorManifold("line-y", 1, MetricField.euclidean(1), [[-2.0, 2.0]])
    one = pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT)
    return pg.assemble(f1, f2, one, one)


def polar_plane() -> pg.DoublyTwistedProduct:
    """dr^2 + r^2 dtheta^2: warped product of the half-line and the circle."""
    f1 = pg.FactorManifold("halfline-r", 1, MetricField.euclidean(1), [[0.5, 3.0]])
    f2 = pg.FactorManifold("circle", 1, MetricField.euclidean(1), [[0.0, 6.2]])
    lam2 = coordinate_warp(0, 2, name="r")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def sphere_polar() -> pg.DoublyTwistedProduct:
    """dr^2 + sin(r)^2 dtheta^2: the unit round sphere, K = +1."""
    f1 = pg.FactorManifold("arc-r", 1, MetricField.euclidean(1), [[0.3, 2.8]])
    f2 = pg.FactorManifold("circle", 1, MetricField.euclidean(1), [[0.0, 6.2]])
    lam2 = function_of_coordinate_warp(0, 2, np.sin, np.cos, lambda r: -np.sin(r), name="sin r")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def hyperbolic_polar() -> pg.DoublyTwistedProduct:
    """dr^2 + sinh(r)^2 dtheta^2: hyperbolic plane, K = -1."""
    f1 = pg.FactorManifold("ray-r", 1, MetricField.euclidean(1), [[0.3, 2.5]])
    f2 = pg.FactorManifold("circle", 1, MetricField.euclidean(1), [[0.0, 6.2]])
    lam2 = function_of_coordinate_warp(0, 2, np.sinh, np.cosh, np.sinh, name="sinh r")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def lorentz_direct() -> pg.DoublyTwistedProduct:
    """Minkowski R^{1,1} x R: flat Lorentzian direct product."""
    mink = MetricField.constant(np.diag([-1.0, 1.0]), name="minkowski2")
    f1 = pg.FactorManifold("minkowski", 2, mink, [[-2.0, 2.0], [-2.0, 2.0]])
    f2 = pg.FactorManifold("line", 1, MetricField.euclidean(1), [[-2.0, 2.0]])
    one = pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT)
    return pg.assemble(f1, f2, one, one)


def lorentz_warped_fiber() -> pg.DoublyTwistedProduct:
    """Riemannian base R, Minkowski fiber R^{1,1}, lam2 = cosh x.

    A warped product whose factor-1 projection is a semi-Riemannian
    submersion with umbilic Lorentzian fibers; mixed degenerate planes have
    vanishing lightlike curvature here.
    """
    f1 = pg.FactorManifold("base-x", 1, MetricField.euclidean(1), [[-1.0, 1.0]])
    mink = MetricField.constant(np.diag([-1.0, 1.0]), name="minkowski2")
    f2 = pg.FactorManifold("fiber", 2, mink, [[-1.0, 1.0], [-1.0, 1.0]])
    lam2 = function_of_coordinate_warp(0, 3, np.cosh, np.sinh, np.cosh, name="cosh x")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def expanding_spacetime() -> pg.DoublyTwistedProduct:
    """-dt^2 + cosh(t)^2 (dx^2 + dy^2): timelike base, expanding spatial fiber.

    Mixed degenerate planes here are NOT vertical-null planes of the base
    projection, so the lightlike curvature is generically nonzero.
    """
    time = MetricField.constant(np.array([[-1.0]]), name="time")
    f1 = pg.FactorManifold("time", 1, time, [[-1.0, 1.0]])
    f2 = pg.FactorManifold("plane", 2, MetricField.euclidean(2), [[-1.0, 1.0], [-1.0, 1.0]])
    lam2 = function_of_coordinate_warp(0, 3, np.cosh, np.sinh, np.cosh, name="cosh t")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def bowl_warped() -> pg.DoublyTwistedProduct:
    """Warped product with lam2 = 1 + x^2: unique critical point at x = 0."""
    f1 = pg.FactorManifold("line-x", 1, MetricField.euclidean(1), [[-1.5, 1.5]])
    f2 = pg.FactorManifold("line-y", 1, MetricField.euclidean(1), [[-1.0, 1.0]])
    lam2 = function_of_coordinate_warp(0, 2, lambda x: 1 + x * x, lambda x: 2 * x,
                                       lambda x: 2.0, name="1+x^2")
    return pg.assemble(f1, f2,
                       pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


def random_doubly_twisted(seed: int, n1: int = 2, n2: int = 2,
                          curved_factors: bool = True) -> pg.DoublyTwistedProduct:
    """Randomized doubly twisted product (both warps depend on both slots)."""
    rng = np.random.default_rng(seed)
    n = n1 + n2
    box1 = [[-1.0, 1.0]] * n1
    box2 = [[-1.0, 1.0]] * n2
    if curved_factors and n1 > 1:
        g1 = conformal_flat_metric(n1, 0.2 + 0.1 * rng.random(), rng.uniform(0.3, 1.2, n1),
                                   rng.uniform(0, 2), box1, name="f1")
    else:
        g1 = MetricField.euclidean(n1, domain_box=np.asarray(box1, dtype=float))
    if curved_factors and n2 > 1:
        g2 = conformal_flat_metric(n2, 0.2 + 0.1 * rng.random(), rng.uniform(0.3, 1.2, n2),
                                   rng.uniform(0, 2), box2, name="f2")
    else:
        g2 = MetricField.euclidean(n2, domain_box=np.asarray(box2, dtype=float))
    f1 = pg.FactorManifold("f1", n1, g1, box1)
    f2 = pg.FactorManifold("f2", n2, g2, box2)

    def rand_warp(tag):
        m = 2
        return trig_warp(n, rng.uniform(0.1, 0.3, m), rng.uniform(0.2, 1.2, (m, n)),
                         rng.uniform(0, 2, m), name=f"warp-{tag}")

    return pg.assemble(f1, f2,
                       pg.WarpFn(rand_warp("1"), pg.Dependency.ON_PRODUCT),
                       pg.WarpFn(rand_warp("2"), pg.Dependency.ON_PRODUCT))


def random_doubly_warped(seed: int) -> pg.DoublyTwistedProduct:
    """Randomized doubly warped product (lam1 on factor 2, lam2 on factor 1)."""
    rng = np.random.default_rng(seed)
    f1 = pg.FactorManifold("f1", 1, MetricField.euclidean(1), [[-1.0, 1.0]])
    f2 = pg.FactorManifold("f2", 1, MetricField.euclidean(1), [[-1.0, 1.0]])
    a1, b1, c1 = rng.uniform(0.1, 0.3), rng.uniform(0.3, 1.2), rng.uniform(0, 2)
    a2, b2, c2 = rng.uniform(0.1, 0.3), rng.uniform(0.3, 1.2), rng.uniform(0, 2)
    lam1 = trig_warp(2, [a1], [[0.0, b1]], [c1], name="lam1(y)")
    lam2 = trig_warp(2, [a2], [[b2, 0.0]], [c2], name="lam2(x)")
    return pg.assemble(f1, f2,
                       pg.WarpFn(lam1, pg.Dependency.ON_FACTOR2_ONLY),
                       pg.WarpFn(lam2, pg.Dependency.ON_FACTOR1_ONLY))


# ---------------------------------------------------------------------------
# quotient fixtures

def mobius_model(word_bound: int = 8) -> qt.QuotientModel:
    """Flat Moebius band: R^2 / <(x, y) -> (x + 1, -y)>.

    The central leaf (y = 0) closes with holonomy -1 on its normal line, so
    the quotient is obstructed even though the leaves meet exactly once.
    """
    f1 = pg.FactorManifold("line-x", 1, MetricField.euclidean(1), [[0.0, 1.0]])
    f2 = pg.FactorManifold("line-y", 1, MetricField.euclidean(1), [[-1.0, 1.0]])
    one = pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT)
    dtp = pg.assemble(f1, f2, one, one)
    gen = qt.DeckGenerator("a", qt.FactorMap.translation([1.0]),
                           qt.FactorMap.affine([[-1.0]], [0.0]))
    big = 1e9  # only x is quotiented; the transversal is unbounded
    return qt.QuotientModel(dtp, [gen],
                            fundamental_box=[[0.0, 1.0], [-big, big]],
                            word_bound=word_bound)


def flat_torus_model(word_bound: int = 8) -> qt.QuotientModel:
    """Axis-aligned flat torus: R^2 / <(x+1, y), (x, y+1)>; splits globally."""
    f1 = pg.FactorManifold("line-x", 1, MetricField.euclidean(1), [[0.0, 1.0]])
    f2 = pg.FactorManifold("line-y", 1, MetricField.euclidean(1), [[0.0, 1.0]])
    one = pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT)
    dtp = pg.assemble(f1, f2, one, one)
    gens = [
        qt.DeckGenerator("a", qt.FactorMap.translation([1.0]), qt.FactorMap.translation([0.0])),
        qt.DeckGenerator("b", qt.FactorMap.translation([0.0]), qt.FactorMap.translation([1.0])),
    ]
    return qt.QuotientModel(dtp, gens,
                            fundamental_box=[[0.0, 1.0], [0.0, 1.0]],
                            word_bound=word_bound)


def skewed_torus_model(word_bound: int = 8) -> qt.QuotientModel:
    """Skewed flat torus: R^2 / <(x+1, y), (x+1/2, y+1)>.

    Both foliations have trivial holonomy but the leaves through the origin
    intersect twice, obstructing a global product decomposition.
    """
    f1 = pg.FactorManifold("line-x", 1, MetricField.euclidean(1), [[0.0, 1.0]])
    f2 = pg.FactorManifold("line-y", 1, MetricField.euclidean(1), [[0.0, 1.0]])
    one = pg.WarpFn(ScalarField.constant(1.0), pg.Dependency.CONSTANT)
    dtp = pg.assemble(f1, f2, one, one)
    gens = [
        qt.DeckGenerator("a", qt.FactorMap.translation([1.0]), qt.FactorMap.translation([0.0])),
        qt.DeckGenerator("b", qt.FactorMap.translation([0.5]), qt.FactorMap.translation([1.0])),
    ]
    return qt.QuotientModel(dtp, gens,
                            fundamental_box=[[0.0, 1.0], [0.0, 1.0]],
                            word_bound=word_bound)


def example1_model(word_bound: int = 8) -> qt.QuotientModel:
    return qt.build_example1(word_bound=word_bound)


# loops (as generator words) documented per quotient fixture
HOLONOMY_LOOPS = {
    "mobius": {1: [(("a", 1),)], 2: []},
    "flat-torus": {1: [(("a", 1),)], 2: [(("b", 1),)]},
    "skewed-torus": {1: [(("a", 1),)], 2: [(("a", -1), ("b", 1), ("b", 1))]},
}

PRODUCT_FIXTURES = {
    "flat-direct": flat_direct_product,
    "polar-plane": polar_plane,
    "sphere-polar": sphere_polar,
    "hyperbolic-polar": hyperbolic_polar,
    "lorentz-direct": lorentz_direct,
}

QUOTIENT_FIXTURES = {
    "mobius": mobius_model,
    "flat-torus": flat_torus_model,
    "skewed-torus": skewed_torus_model,
    "example1-twisted": example1_model,
}
