import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesoperc.lattices import (
    MarkedRectangleDomain,
    build_mesoscopic,
    builtin_torus,
    equilateral_torus,
    rectangle_lattice_domain,
    rhombus_domain,
    triangle_domain,
    triangle_lattice_domain,
)
from mesoperc.percolation import (
    CrossingSpec,
    PercolationSample,
    color_switch_check,
    contour_integral,
    crosses,
    crossing_outcomes,
    crossing_probability,
    dual_cycle,
    estimate_H,
    estimate_P,
    face_centroids,
    rectangle_spec,
    rsw_harness,
    sample,
    separating_event,
    separation_indicators,
)

from oracles import bits, brute_crossing, brute_observables, brute_separation


def zc(e):
    return e.coords[:, 0] + 1j * e.coords[:, 1]


# ---------------------------------------------------------------- sampling


def test_sample_extremes():
    d = triangle_lattice_domain(4)
    assert sample(d.triangulation, 1.0, seed=5).colour.all()
    assert not sample(d.triangulation, 0.0, seed=5).colour.any()


@given(st.integers(0, 2**63 - 1), st.integers(0, 10**9))
@settings(max_examples=30, deadline=None)
def test_sample_deterministic(seed, trial):
    t = triangle_lattice_domain(5).triangulation
    a = sample(t, 0.5, seed, trial).colour
    b = sample(t, 0.5, seed, trial).colour
    assert np.array_equal(a, b)


def test_sample_frequency():
    t = triangle_lattice_domain(60).triangulation
    c = sample(t, 0.3, seed=1).colour
    assert abs(c.mean() - 0.3) < 4 * math.sqrt(0.21 / len(c))


def test_sample_rejects_bad_p():
    with pytest.raises(ValueError):
        sample(triangle_domain().triangulation, 1.5)


def test_sample_size_must_match():
    t = triangle_domain().triangulation
    with pytest.raises(ValueError):
        PercolationSample(np.zeros(4, np.uint8), 0, 0, 0.5, t)


def test_rle_round_trip():
    s = sample(triangle_lattice_domain(6).triangulation, 0.5, seed=9)
    text = s.to_rle()
    assert set(text) <= set("bw0123456789")
    assert np.array_equal(PercolationSample.from_rle(text), s.colour)


# ---------------------------------------------------------------- crossings


def coloured(t, colour):
    return PercolationSample(np.asarray(colour, np.uint8), 0, 0, 0.5, t)


def test_crosses_all_black_and_all_white():
    d = rectangle_lattice_domain(1.5, 4)
    t = d.triangulation
    spec = CrossingSpec.from_domain(d)
    assert crosses(coloured(t, np.ones(t.n_vertices)), spec)
    assert not crosses(coloured(t, np.zeros(t.n_vertices)), spec)


def test_arc_outside_domain_rejected():
    d = rectangle_lattice_domain(1.5, 4)
    t = d.triangulation
    bad = CrossingSpec([0], [t.n_vertices + 3])
    with pytest.raises(ValueError, match="outside domain"):
        crosses(coloured(t, np.ones(t.n_vertices)), bad)


def test_spec_arcs_must_be_disjoint_and_nonempty():
    with pytest.raises(ValueError):
        CrossingSpec([1, 2], [2, 3])
    with pytest.raises(ValueError):
        CrossingSpec([], [2, 3])


@pytest.mark.parametrize("shape", [(1.5, 3), (1.0, 3), (1.2, 4)])
def test_duality_exhaustive(shape):
    d = rectangle_lattice_domain(*shape)
    t = d.triangulation
    n = t.n_vertices
    assert n <= 23
    black = crossing_outcomes(t, CrossingSpec.from_domain(d), 0, exhaustive=True)
    dual = crossing_outcomes(t, CrossingSpec.from_domain(d, dual=True), 0, exhaustive=True)
    # trial m colours bit pattern m; the white crossing of m is the black crossing of its complement
    white = dual[::-1]
    assert np.all(black ^ white)


def test_duality_exhaustive_against_bfs_oracle():
    d = rectangle_lattice_domain(1.0, 3)
    t = d.triangulation
    ab, bc, cd, da = (d.closed_arc(k) for k in range(4))
    black = crossing_outcomes(t, CrossingSpec(ab, cd), 0, exhaustive=True)
    for m in range(2**t.n_vertices):
        col = bits(m, t.n_vertices)
        b = brute_crossing(t, col, ab, cd, 1)
        w = brute_crossing(t, col, bc, da, 0)
        assert b == bool(black[m])
        assert b != w
        assert crosses(coloured(t, col), CrossingSpec(bc, da), colour=0) == w


@pytest.mark.parametrize("name", ["rhombus", "fig1"])
def test_exploration_matches_flood(name, fig1_quad):
    d = rhombus_domain().refined(4) if name == "rhombus" else fig1_quad.refined(4)
    spec = CrossingSpec.from_domain(d)
    a = crossing_outcomes(d.triangulation, spec, 3000, seed=17, method="explore")
    b = crossing_outcomes(d.triangulation, spec, 3000, seed=17, method="flood")
    assert np.array_equal(a, b)
    assert 0 < a.sum() < len(a)


def test_exploration_matches_flood_exhaustively():
    d = rectangle_lattice_domain(1.5, 3)
    spec = CrossingSpec.from_domain(d)
    a = crossing_outcomes(d.triangulation, spec, 0, exhaustive=True, method="explore")
    b = crossing_outcomes(d.triangulation, spec, 0, exhaustive=True, method="flood")
    assert np.array_equal(a, b)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2**32))
def test_monotone_in_p(p1, p2, seed):
    lo, hi = sorted((p1, p2))
    d = rectangle_lattice_domain(1.5, 8)
    spec = CrossingSpec.from_domain(d)
    a = crossing_outcomes(d.triangulation, spec, 200, seed=seed, p=lo)
    b = crossing_outcomes(d.triangulation, spec, 200, seed=seed, p=hi)
    assert np.all(a <= b)


def test_crossing_probability_is_deterministic():
    d = rhombus_domain().refined(3)
    spec = CrossingSpec.from_domain(d)
    a = crossing_probability(d.triangulation, spec, 2000, seed=3)
    b = crossing_probability(d.triangulation, spec, 2000, seed=3)
    assert a == b
    assert a.half_width == pytest.approx(1.96 * math.sqrt(a.estimate * (1 - a.estimate) / 2000), rel=1e-14)


def test_self_dual_symmetric_domain_is_half():
    d = rhombus_domain().refined(5)
    est = crossing_probability(d.triangulation, CrossingSpec.from_domain(d), 10_000, seed=11)
    lo, hi = est.interval
    assert lo <= 0.5 <= hi


def test_self_dual_exhaustive_is_exactly_half():
    d = rhombus_domain().refined(2)  # 25 vertices
    est = crossing_probability(d.triangulation, CrossingSpec.from_domain(d), 0, exhaustive=True)
    assert est.hits * 2 == est.trials


@pytest.mark.parametrize("rows", [8, 16])
def test_supercritical_long_crossing(rows):
    d = rectangle_lattice_domain(4.0, rows)
    est = crossing_probability(d.triangulation, CrossingSpec.from_domain(d), 4000, seed=5, p=0.9)
    assert est.estimate > 0.99


def test_exhaustive_needs_half():
    d = rectangle_lattice_domain(1.0, 3)
    with pytest.raises(ValueError):
        crossing_probability(d.triangulation, CrossingSpec.from_domain(d), 0, p=0.3, exhaustive=True)


def equilateral_patch(N=4, size=1.2):
    t, e = equilateral_torus(3, 3)
    return build_mesoscopic(t, e, 1 / 8, N, (-size, -size, size, size))


def test_rotated_rectangle_agrees_with_axis_aligned():
    L = equilateral_patch()
    r = []
    for angle in (0.0, 30.0):
        spec = rectangle_spec(L.triangulation, L.embedding, 0j, 1.0, 0.5, angle)
        r.append(crossing_probability(L, spec, 4000, seed=21))
    joint = math.hypot(r[0].half_width, r[1].half_width)
    assert abs(r[0].estimate - r[1].estimate) < joint


def test_longer_rectangle_crossing_contains_shorter():
    L = equilateral_patch()
    s2 = rectangle_spec(L.triangulation, L.embedding, 0j, 1.0, 0.5)
    s4 = rectangle_spec(L.triangulation, L.embedding, 0j, 2.0, 0.5)
    a2 = crossing_outcomes(L, s2, 2000, seed=8)
    a4 = crossing_outcomes(L, s4, 2000, seed=8)
    assert np.all(a4 <= a2)
    assert a4.mean() < a2.mean()


def test_rsw_rows_and_bounds():
    t, e = builtin_torus("regular")
    rows = rsw_harness((t, e), [(0.25, 2), (0.125, 2)], 2.0, 0.5, [0.0, 90.0], 2000, seed=4)
    assert len(rows) == 4
    assert all(0.05 <= r.estimate <= 0.95 for r in rows)
    assert {(r.delta, r.angle) for r in rows} == {(0.25, 0.0), (0.25, 90.0), (0.125, 0.0), (0.125, 90.0)}


def test_rsw_rejects_square():
    with pytest.raises(ValueError, match="aspect"):
        rsw_harness(builtin_torus("regular"), [(0.25, 2)], 1.0, 0.5, [0.0], 10, seed=1)


# ---------------------------------------------------------------- separation


def test_separation_all_white():
    d = triangle_domain()
    s = coloured(d.triangulation, np.zeros(6))
    assert not any(separating_event(s, f, d, x) for f in range(4) for x in "abc")


def test_separation_all_black_centre():
    d = triangle_domain()
    s = coloured(d.triangulation, np.ones(6))
    assert separating_event(s, 3, d, "a")


def test_separation_face_outside():
    d = triangle_domain()
    with pytest.raises(ValueError, match="outside"):
        separating_event(coloured(d.triangulation, np.ones(6)), 4, d)


@pytest.mark.parametrize("side", [2, 3])
def test_separation_matches_chain_oracle(side):
    d = triangle_lattice_domain(side)
    n = d.triangulation.n_vertices
    for m in range(2**n):
        col = bits(m, n)
        ev = separation_indicators(col, d)
        for k in range(3):
            assert np.array_equal(ev[k], brute_separation(d, col, k)), (m, k)


@pytest.fixture(scope="module")
def six_oracle():
    return brute_observables(triangle_domain())


def test_estimate_H_exhaustive(six_oracle):
    d = triangle_domain()
    H = estimate_H(d, exhaustive=True)
    assert H.trials == 64
    assert np.array_equal(H.counts, six_oracle[0])
    assert np.all(H.half_width == 0)


def test_estimate_P_exhaustive(six_oracle):
    d = triangle_domain()
    P = estimate_P(d, exhaustive=True)
    assert np.array_equal(P.counts, six_oracle[1])


def test_ten_vertex_observables_exhaustive():
    d = triangle_lattice_domain(3)
    Hc, Pc = brute_observables(d)
    assert np.array_equal(estimate_H(d, exhaustive=True).counts, Hc)
    assert np.array_equal(estimate_P(d, exhaustive=True).counts, Pc)


def test_H_derivative_is_P_difference():
    d = triangle_lattice_domain(8)
    H = estimate_H(d, 3000, seed=12)
    P = estimate_P(d, 3000, seed=12)
    assert np.array_equal(H.counts, estimate_H(d, 3000, seed=12).counts)
    for x in range(3):
        assert np.array_equal(H.edge_difference(d.triangulation, x), P.derivative_counts(x))


def test_P_antisymmetry_and_telescoping():
    d = triangle_lattice_domain(8)
    t = d.triangulation
    P = estimate_P(d, 2000, seed=2)
    for x in range(3):
        der = P.derivative_counts(x)
        inner = t.twin >= 0
        assert np.all(der[inner] + der[t.twin[inner]] == 0)
        # around each vertex the dual edges crossing its star form a closed dual face
        for v in range(t.n_vertices):
            if v in set(t.boundary.tolist()):
                continue
            hs = np.flatnonzero(t.origin == v)
            assert der[hs].sum() == 0


def test_H_components_in_unit_interval():
    d = triangle_lattice_domain(8)
    H = estimate_H(d, 500, seed=1)
    comp = H.components
    assert comp.min() >= 0 and comp.max() <= 1
    assert np.allclose(H.half_width, 1.96 * np.sqrt(comp * (1 - comp) / 500))
    assert np.allclose(H.H, H.Ha + np.exp(2j * np.pi / 3) * H.Hb + np.exp(4j * np.pi / 3) * H.Hc)


def test_corner_face_near_one():
    d = triangle_lattice_domain(40)
    t, e = d.triangulation, d.embedding
    H = estimate_H(d, 2000, seed=3)
    a = d.marks[0]
    f = int(np.flatnonzero((t.faces == a).any(axis=1))[0])
    assert H.Ha[f] > 0.9
    assert H.Hb[f] < 0.1 and H.Hc[f] < 0.1


def test_centre_face_symmetric():
    d = triangle_lattice_domain(10)  # side 1 mod 3: the centre is an up-face centroid
    t, e = d.triangulation, d.embedding
    f = int(np.argmin(np.abs(face_centroids(t, e))))
    assert abs(face_centroids(t, e)[f]) < 1e-12
    H = estimate_H(d, 20_000, seed=6)
    hw = H.half_width[:, f]
    c = H.components[:, f]
    for i, j in ((0, 1), (1, 2), (0, 2)):
        assert abs(c[i] - c[j]) < math.hypot(hw[i], hw[j])


# ---------------------------------------------------------------- colour switching


@pytest.mark.parametrize("side", [2, 3, 4, 5])
def test_color_switch_exhaustive(side):
    rep = color_switch_check(triangle_lattice_domain(side), exhaustive=True)
    assert rep.max_discrepancy == 0
    assert rep.n_dual_vertices > 0 or side == 2


def test_color_switch_monte_carlo():
    rep = color_switch_check(triangle_lattice_domain(6), exhaustive=False, trials=100_000, seed=19)
    assert rep.max_discrepancy <= 3 * rep.joint_se


def test_color_switch_identity_permutation():
    d = triangle_lattice_domain(3)
    P = estimate_P(d, exhaustive=True)
    assert np.array_equal(P.counts[0], P.counts[0].copy())


# ---------------------------------------------------------------- contour integrals


@pytest.fixture(scope="module")
def chain():
    d = triangle_lattice_domain(12)
    t, e = d.triangulation, d.embedding
    inside = np.abs(zc(e)) < 0.3
    return t, face_centroids(t, e), dual_cycle(t, inside)


def test_constant_H_gives_zero(chain):
    t, pos, g = chain
    H = np.full(t.n_faces, 0.37 - 0.11j)
    assert contour_integral(H, lambda z: z, g, t, pos) == 0


def test_linear_H_gives_zero(chain):
    t, pos, g = chain
    assert contour_integral(lambda z: z, lambda z: z, g, t, pos) == 0


def test_conjugate_on_unit_square():
    g = np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex)
    assert contour_integral(np.conj, lambda z: z, g) == 2j


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-64, 64), st.integers(-64, 64)), min_size=3, max_size=12))
def test_conjugate_is_exact_shoelace(pts):
    # dyadic coordinates make every product exact, so the sum is exact too
    z = np.array([complex(x / 8, y / 8) for x, y in pts] + [complex(pts[0][0] / 8, pts[0][1] / 8)])
    area2 = sum(Fraction(a.real) * Fraction(b.imag) - Fraction(a.imag) * Fraction(b.real) for a, b in zip(z[:-1], z[1:]))
    assert contour_integral(np.conj, lambda w: w, z) == complex(0, float(area2))


def test_conjugate_on_dual_chain_is_area(chain):
    t, pos, g = chain
    z = pos[g]
    area = 0.5 * np.sum(z[:-1].real * z[1:].imag - z[:-1].imag * z[1:].real)
    val = contour_integral(np.conj, lambda w: w, g, t, pos)
    assert val.real == 0
    assert val.imag == pytest.approx(2 * area, rel=1e-14)
    assert area > 0


def test_chain_must_close(chain):
    t, pos, g = chain
    with pytest.raises(ValueError, match="open chain"):
        contour_integral(lambda z: z, lambda z: z, g[:-1], t, pos)


def test_chain_must_be_neighbours(chain):
    t, pos, g = chain
    bad = np.concatenate([g[:3], g[5:]])
    with pytest.raises(ValueError, match="not dual neighbours"):
        contour_integral(lambda z: z, lambda z: z, bad, t, pos)


def test_chain_vertices_distinct(chain):
    t, pos, g = chain
    bad = np.concatenate([g[:3], g[1:2], g[3:]])
    with pytest.raises(ValueError, match="distinct"):
        contour_integral(lambda z: z, lambda z: z, bad, t, pos)


def test_observable_field_in_contour(chain):
    t, pos, g = chain
    d = triangle_lattice_domain(12)
    H = estimate_H(d, 200, seed=1)
    val = contour_integral(H, lambda z: z, g, t, pos)
    want = contour_integral(H.H, pos, g, t)
    assert val == want
