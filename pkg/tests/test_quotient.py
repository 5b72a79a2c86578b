"""Quotient-model tests: validation, leaf tracing, intersections, verdicts."""

import numpy as np
import pytest

from warpquot import fixtures as fx
from warpquot import productgeo as pg
from warpquot import quotient as qt
from warpquot import transport as tp
from warpquot.chartkit import CoordPoint, TangentVector
from warpquot.errors import InvalidAction, InvalidH, NotALoop, WordBoundExceeded


def tv(x, comps):
    return TangentVector(CoordPoint(x), comps)


# ---------------------------------------------------------------------------
# validation

@pytest.mark.parametrize("make", [fx.mobius_model, fx.flat_torus_model,
                                  fx.skewed_torus_model])
def test_validate_flat_quotients(make):
    report = qt.validate(make())
    assert report.ok
    assert report.worst() < 1e-10


def test_validate_twisted_construction():
    report = qt.validate(fx.example1_model())
    assert report.ok
    assert report.residuals["a:isometry"] < 1e-7


def test_validate_rejects_broken_warp_compat():
    dtp = fx.polar_plane()
    gen = qt.DeckGenerator("bad", qt.FactorMap.translation([1.0]),
                           qt.FactorMap.translation([0.0]))
    model = qt.QuotientModel(dtp, [gen], fundamental_box=[[0.5, 1.5], [0.0, 6.2]])
    with pytest.raises(InvalidAction):
        qt.validate(model)


# ---------------------------------------------------------------------------
# canonical representatives

def test_canonical_rep_lattice_reduction():
    model = fx.skewed_torus_model()
    rep, word = model.canonical_rep([1.7, 0.2])
    assert np.allclose(rep, [0.7, 0.2], atol=1e-12)
    assert word == (("a", -1),)


def test_canonical_rep_point_in_box_is_fixed():
    model = fx.skewed_torus_model()
    rep, word = model.canonical_rep([0.3, 0.4])
    assert word == ()
    assert np.allclose(rep, [0.3, 0.4])
    rep2, word2 = model.canonical_rep(rep)
    assert word2 == () and np.array_equal(rep2, rep)


def test_canonical_rep_mobius_double_flip():
    model = fx.mobius_model()
    rep, word = model.canonical_rep([2.3, 0.5])
    assert np.allclose(rep, [0.3, 0.5], atol=1e-12)
    assert word == (("a", -1), ("a", -1))


def test_canonical_rep_word_bound_exceeded():
    model = fx.flat_torus_model(word_bound=2)
    with pytest.raises(WordBoundExceeded):
        model.canonical_rep([7.5, 0.2])


# ---------------------------------------------------------------------------
# leaf tracing

def test_leaf_trace_torus_horizontal_closes():
    model = fx.skewed_torus_model()
    trace = qt.leaf_trace(model, [0.0, 0.0], 1)
    assert trace.closed
    assert trace.length == pytest.approx(1.0, abs=1e-7)


def test_leaf_trace_torus_vertical_through_origin():
    model = fx.skewed_torus_model()
    trace = qt.leaf_trace(model, [0.0, 0.0], 2)
    assert trace.closed
    assert trace.length == pytest.approx(2.0, abs=1e-7)


def test_leaf_trace_mobius_central_and_generic():
    model = fx.mobius_model()
    central = qt.leaf_trace(model, [0.0, 0.0], 1)
    assert central.closed and central.length == pytest.approx(1.0, abs=1e-7)
    generic = qt.leaf_trace(model, [0.0, 0.5], 1)
    assert generic.closed and generic.length == pytest.approx(2.0, abs=1e-7)


def test_leaf_trace_example1_closed_and_open():
    model = fx.example1_model()
    closed = qt.leaf_trace(model, [0.0, 0.0], 1)
    assert closed.closed
    assert closed.length == pytest.approx(1.0, abs=1e-7)
    drifting = qt.leaf_trace(model, [0.0, 1.0], 1, arc_budget=6.0)
    assert drifting.status == "open-within-budget"
    # the h-orbit of y = 1 drifts strictly monotonically
    glue = model.gluing
    ys = [1.0]
    for _ in range(5):
        ys.append(glue.h(ys[-1]))
    assert all(b > a for a, b in zip(ys, ys[1:]))


def test_leaf_trace_requires_basepoint_in_box():
    model = fx.flat_torus_model()
    with pytest.raises(ValueError):
        qt.leaf_trace(model, [1.7, 0.0], 1)


# ---------------------------------------------------------------------------
# intersection counting (orbit enumeration)

def test_intersections_skewed_torus_two_points():
    model = fx.skewed_torus_model(word_bound=4)
    report = qt.leaf_intersection_count(model, [0.0, 0.0], word_bound=4)
    assert report.count == 2
    assert not report.lower_bound_only
    reps = sorted(tuple(np.round(model.canonical_rep(w.coords)[0], 9)) for w, _ in report.witnesses)
    assert np.allclose(reps[0], [0.0, 0.0], atol=1e-9)
    assert np.allclose(reps[1], [0.5, 0.0], atol=1e-9)


def test_intersections_axis_torus_one_point():
    model = fx.flat_torus_model(word_bound=4)
    report = qt.leaf_intersection_count(model, [0.0, 0.0], word_bound=4)
    assert report.count == 1


def test_intersections_mobius_central_one_point():
    model = fx.mobius_model(word_bound=4)
    report = qt.leaf_intersection_count(model, [0.0, 0.0], word_bound=4)
    assert report.count == 1


def test_intersections_inequality_vs_no_holonomy_point():
    # card(F1(x) ^ F2(x)) <= card at a no-holonomy basepoint, same word bound
    model = fx.skewed_torus_model(word_bound=4)
    base = qt.leaf_intersection_count(model, [0.0, 0.0], word_bound=4).count
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.random(2) * 0.9
        count = qt.leaf_intersection_count(model, x, word_bound=4).count
        assert count <= base


def test_homothetic_leaves_equal_length():
    # all no-holonomy leaves of the skewed torus are homothetic (here: equal)
    model = fx.skewed_torus_model()
    l1 = qt.leaf_trace(model, [0.0, 0.1], 1).length
    l2 = qt.leaf_trace(model, [0.3, 0.7], 1).length
    assert l1 == pytest.approx(l2, abs=1e-6)


# ---------------------------------------------------------------------------
# holonomy through the quotient

def test_mobius_central_leaf_holonomy_is_minus_one():
    model = fx.mobius_model()
    rep0 = np.array([0.0, 0.0])
    curve = qt.leaf_loop_curve(model, rep0, 1, (("a", 1),))
    frame = tp.normal_frame(model.dtp, rep0, foliation=1)
    hol = tp.holonomy_map(model, curve, frame, foliation=1)
    assert np.allclose(hol.matrix, [[-1.0]], atol=1e-9)


def test_torus_loops_have_identity_holonomy():
    model = fx.skewed_torus_model()
    rep0 = np.array([0.0, 0.0])
    for foliation, word in ((1, (("a", 1),)), (2, (("a", -1), ("b", 1), ("b", 1)))):
        curve = qt.leaf_loop_curve(model, rep0, foliation, word)
        frame = tp.normal_frame(model.dtp, rep0, foliation=foliation)
        hol = tp.holonomy_map(model, curve, frame, foliation=foliation)
        assert hol.is_identity(1e-9)


def test_holonomy_composition_law():
    # hol(loop1 . loop2) == hol(loop2) o hol(loop1); Moebius generator squared
    model = fx.mobius_model()
    rep0 = np.array([0.0, 0.0])
    loop = qt.leaf_loop_curve(model, rep0, 1, (("a", 1),))
    frame = tp.normal_frame(model.dtp, rep0, foliation=1)
    h1 = tp.holonomy_map(model, loop, frame, foliation=1)
    double = tp.PiecewiseCurve.from_function(lambda t: np.array([2.0 * t, 0.0]))
    h2 = tp.holonomy_map(model, double, frame, foliation=1)
    assert np.allclose(h2.matrix, h1.after(h1).matrix, atol=1e-9)
    assert h2.is_identity(1e-9)


def test_leaf_loop_curve_rejects_non_loop_word():
    model = fx.skewed_torus_model()
    with pytest.raises(NotALoop):
        qt.leaf_loop_curve(model, np.array([0.0, 0.0]), 1, (("b", 1),))


def test_warp_compat_along_no_holonomy_leaf():
    # deck maps with trivial leaf-holonomy action preserve lam2 on that leaf
    model = fx.example1_model()
    lam = model.dtp.lam2.field
    for x in np.linspace(-1.0, 2.0, 13):
        assert abs(lam.value([x + 1.0, 0.0]) - lam.value([x, 0.0])) < 1e-7
    for make in (fx.mobius_model, fx.skewed_torus_model):
        m = make()
        lam2 = m.dtp.lam2.field
        for x in np.linspace(0.0, 1.0, 7):
            assert abs(lam2.value([x + 1.0, 0.0]) - lam2.value([x, 0.0])) < 1e-12


# ---------------------------------------------------------------------------
# decomposition verdicts

def test_decomposition_flat_torus_global_product():
    model = fx.flat_torus_model(word_bound=4)
    verdict = qt.decomposition_check(model, [0.0, 0.0], fx.HOLONOMY_LOOPS["flat-torus"])
    assert verdict.is_global_product
    assert verdict.reason.kind == "none"
    # product chart check: traced leaf closures tile the fundamental box
    for foliation in (1, 2):
        trace = qt.leaf_trace(model, np.zeros(2), foliation)
        extent = model.fundamental_box[foliation - 1]
        assert trace.length == pytest.approx(extent[1] - extent[0], abs=1e-7)


def test_decomposition_mobius_obstructed_by_holonomy():
    model = fx.mobius_model(word_bound=4)
    verdict = qt.decomposition_check(model, [0.0, 0.0], fx.HOLONOMY_LOOPS["mobius"])
    assert not verdict.is_global_product
    assert verdict.reason.kind == "nontrivial-holonomy"
    assert verdict.reason.foliation == 1
    # intersection count alone would not have obstructed (the paper's point)
    assert qt.leaf_intersection_count(model, [0.0, 0.0], word_bound=4).count == 1


def test_decomposition_skewed_torus_obstructed_by_intersections():
    model = fx.skewed_torus_model(word_bound=4)
    verdict = qt.decomposition_check(model, [0.0, 0.0], fx.HOLONOMY_LOOPS["skewed-torus"])
    assert not verdict.is_global_product
    assert verdict.reason.kind == "multiple-intersections"
    assert verdict.reason.count == 2


# ---------------------------------------------------------------------------
# local-isometry equivariance (transport downstairs vs upstairs + pushdown)

@pytest.mark.parametrize("name,start,length", [
    ("mobius", [0.0, 0.3], 1.6),
    ("flat-torus", [0.2, 0.4], 1.5),
    ("skewed-torus", [0.2, 0.4], 1.5),
    ("example1", [0.0, 0.5], 1.7),
])
def test_adapted_translation_equivariance(name, start, length):
    model = {"mobius": fx.mobius_model, "flat-torus": fx.flat_torus_model,
             "skewed-torus": fx.skewed_torus_model,
             "example1": fx.example1_model}[name]()
    dtp = model.dtp
    start = np.array(start, dtype=float)
    v0 = tv(start, dtp.embed(2, np.ones(dtp.n2)))
    down_end, down_vec = qt.adapted_translation_downstairs(model, start, 1, length, v0)

    upstairs = tp.PiecewiseCurve.line(start, start + length * dtp.embed(1, np.ones(1)))
    res = tp.adapted_translation(dtp, upstairs, v0)
    end_up = upstairs.point(1.0)
    rep, word = model.canonical_rep(end_up)
    pushed = model.word_jacobian(word, end_up) @ res.end.components
    assert np.allclose(down_end, rep, atol=1e-9)
    assert np.max(np.abs(down_vec - pushed)) < 1e-6


# ---------------------------------------------------------------------------
# the explicit twisted construction

def test_example1_seam_functional_equation():
    model = fx.example1_model()
    assert qt.example1_seam_residual(model) < 1e-8


def test_example1_warp_positive_and_smooth_sampled():
    model = fx.example1_model()
    lam = model.dtp.lam2.field
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.uniform(-2.0, 3.0)
        y = rng.uniform(-1.0, 3.0)
        assert lam.value([x, y]) > 0.0


def test_example1_assembled_metric_and_mean_curvature():
    model = fx.example1_model()
    dtp = model.dtp
    for x, y in ((0.3, 1.0), (0.8, 0.4), (1.4, 1.7)):
        g = dtp.assembled.mat([x, y])
        lam = dtp.lam2.field.value([x, y])
        assert np.allclose(g, np.diag([1.0, lam ** 2]), atol=1e-14)
        n1 = pg.mean_curvature_vector(dtp, [x, y], 1)
        assert np.allclose(n1.components, 0.0, atol=1e-12)


def test_example1_rejects_bad_parameters():
    with pytest.raises(InvalidH):
        qt.build_example1(epsilon=0.6)
    with pytest.raises(InvalidH):
        qt.build_example1(gluing=qt.TwistedGluing(amplitude=5.0))


def test_example1_classified_twisted():
    model = fx.example1_model()
    assert pg.classify(model.dtp, per_axis=5).tag is pg.StructureTag.TWISTED


# ---------------------------------------------------------------------------
# curvature-sign + critical-point diagnostic

def test_teodg_bowl_hypotheses_hold():
    report = qt.teodg_diagnostic(fx.bowl_warped(), n_samples=40)
    assert report.hypotheses_hold
    assert report.histogram["positive"] == 0 and report.histogram["zero"] == 0
    assert any(abs(a[0]) < 1e-6 for a in report.critical_points)


def test_teodg_polar_no_critical_point():
    report = qt.teodg_diagnostic(fx.polar_plane(), n_samples=30)
    assert not report.hypotheses_hold
    assert report.critical_points == []


def test_teodg_flat_direct_product_violated():
    report = qt.teodg_diagnostic(fx.flat_direct_product(), n_samples=30)
    assert not report.hypotheses_hold
    assert report.histogram["negative"] == 0
    assert report.histogram["zero"] > 0
    assert "violated" in report.verdict


def test_teodg_sphere_positive_curvature_witness():
    report = qt.teodg_diagnostic(fx.sphere_polar(), n_samples=30)
    assert not report.hypotheses_hold
    assert report.histogram["positive"] > 0
    assert report.witness is not None


def test_teodg_rejects_twisted_structures():
    with pytest.raises(InvalidAction):
        qt.teodg_diagnostic(fx.example1_model().dtp)


def test_decomposition_refuses_uncertified_global_claim():
    # no holonomy loops and an open leaf trace: "count 1" is a lower bound,
    # so a global-product certificate must be refused, not granted
    model = fx.example1_model()
    with pytest.raises(InvalidAction, match="lower bound"):
        qt.decomposition_check(model, [0.0, 0.0], {})
