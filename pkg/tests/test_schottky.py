import itertools
import math

import numpy as np
import pytest

from horolab import product, psl2, schottky
from horolab.errors import EnumerationLimitError, PreconditionError


@pytest.fixture(scope="module")
def pair():
    return schottky.fuchsian_pair()


@pytest.fixture(scope="module")
def joining():
    return schottky.self_joining(
        schottky.fuchsian_pair(), schottky.perturbed_pair()
    )


# ------------------------------------------------------------- validation


def test_reference_pair_is_valid(pair):
    report = schottky.validate_ping_pong(pair)
    assert report.valid
    assert report.margins[0] > pair.tolerance


def test_overlapping_arcs_rejected(pair):
    pp = pair.pingpong.copy()
    pp[1, 0, 0] = pp[0, 0, 0]  # second generator's attract arc onto first's
    bad = schottky.make_system(pair.generators, pp, pair.tolerance)
    report = schottky.validate_ping_pong(bad)
    assert not report.valid
    assert any("arcs of letters" in v for v in report.violations)


def test_single_generator_system():
    g = schottky.hyperbolic_with_axis(psl2.INF, 0.0, 4.0)
    hw = math.pi / 8
    pp = [[[[-hw, hw], [math.pi / 2 - hw, math.pi / 2 + hw]]]]
    system = schottky.make_system([g[None]], np.asarray(pp))
    assert schottky.validate_ping_pong(system).valid
    # Same arcs on both fixed points -> overlap -> invalid.
    pp_bad = [[[[-hw, hw], [-hw, hw]]]]
    bad = schottky.make_system([g[None]], np.asarray(pp_bad))
    assert not schottky.validate_ping_pong(bad).valid


def test_weak_generator_fails_absorption():
    g = schottky.hyperbolic_with_axis(psl2.INF, 0.0, 1.0)  # too short
    hw = math.pi / 16
    pp = [[[[-hw, hw], [math.pi / 2 - hw, math.pi / 2 + hw]]]]
    system = schottky.make_system([g[None]], np.asarray(pp))
    report = schottky.validate_ping_pong(system)
    assert not report.valid
    assert any("escapes" in v for v in report.violations)


def test_boundary_sample_oracle(pair):
    # Independent check of absorption on a dense sample of 1000 points.
    letters = pair.letter_matrices()
    for idx in range(4):
        attract, repel = pair.letter_arcs(idx, 0)
        lo, hi = schottky.arc_normalize(repel)
        width = (hi - lo) % math.pi
        thetas = (hi + np.linspace(0, math.pi - width, 1000)) % math.pi
        img = psl2.theta_of_point(
            psl2.mobius(letters[idx, 0], psl2.point_of_theta(thetas))
        )
        assert np.all(schottky.arc_contains(attract, img))


# ------------------------------------------------------------ enumeration


def test_enumerate_length_zero(pair):
    words = list(schottky.enumerate_words(pair, 0))
    assert len(words) == 1
    assert words[0][0].letters == ()
    assert np.allclose(words[0][1], product.identity(1))


def test_enumerate_count_17(pair):
    words = list(schottky.enumerate_words(pair, 2))
    assert len(words) == 17  # 1 + 4 + 12
    # Brute-force oracle: generate reduced words directly.
    alphabet = [1, -1, 2, -2]
    brute = {()}
    for n in (1, 2):
        for combo in itertools.product(alphabet, repeat=n):
            if all(a != -b for a, b in zip(combo, combo[1:])):
                brute.add(combo)
    assert {w.letters for w, _ in words} == brute


def test_enumerate_products_against_direct_multiplication(pair):
    for word, mat in schottky.enumerate_words(pair, 3):
        direct = schottky.word_matrix(pair, word.letters)
        assert np.abs(direct - mat).max() < 1e-12


def test_enumeration_guard(pair):
    with pytest.raises(EnumerationLimitError):
        schottky.word_ball(pair, 40)


def test_word_validation():
    with pytest.raises(PreconditionError):
        schottky.word_from_letters((1, -1))
    assert schottky.reduce_letters((1, 2, -2, -1, 1)) == (1,)


# ----------------------------------------------------------- self-joining


def test_diagonal_joining_equal_jordan(pair):
    diag = schottky.self_joining(pair, pair)
    for _, mat in itertools.islice(schottky.enumerate_words(diag, 3), 1, 30):
        lam = product.jordan_vector(mat)
        assert abs(lam[0] - lam[1]) < 1e-10


def test_conjugate_joining_equal_jordan(pair):
    h = psl2.normalize(np.array([[1.0, 0.3], [0.2, 1.1]]))
    gens = [
        np.stack([h @ g[0] @ psl2.inverse(h)]) for g in pair.generators
    ]
    pp = pair.pingpong.copy()
    # Conjugated arcs: transport endpoints through h.
    for j in range(pair.k):
        for which in (0, 1):
            lo, hi = pp[j, 0, which]
            img = psl2.theta_of_point(
                psl2.mobius(h, psl2.point_of_theta(np.array([lo, hi])))
            )
            pp[j, 0, which] = img
    conj = schottky.make_system(gens, pp, pair.tolerance)
    joined = schottky.self_joining(pair, conj)
    for _, mat in itertools.islice(schottky.enumerate_words(joined, 3), 1,
                                   30):
        lam = product.jordan_vector(mat)
        assert abs(lam[0] - lam[1]) < 1e-8  # Jordan is a class function


def test_perturbed_joining_distinct_jordan(joining):
    lam = product.jordan_vector(
        schottky.word_matrix(joining, (1,))
    )
    assert abs(lam[0] - lam[1]) > 0.1


def test_self_joining_rejects_invalid():
    pair = schottky.fuchsian_pair()
    pp = pair.pingpong.copy()
    pp[1, 0, 0] = pp[0, 0, 0]
    bad = schottky.make_system(pair.generators, pp, pair.tolerance)
    with pytest.raises(Exception):
        schottky.self_joining(pair, bad)


# ------------------------------------------------------------- limit cone


def test_limit_cone_diagonal(pair):
    diag = schottky.self_joining(pair, pair)
    cone = schottky.limit_cone(diag, 4)
    lo, hi = cone.angle_range
    assert hi - lo < 1e-9
    assert np.allclose(cone.directions, 1.0 / math.sqrt(2.0), atol=1e-9)


def test_limit_cone_single_generator():
    g = schottky.hyperbolic_with_axis(psl2.INF, 0.0, 4.0)
    hw = math.pi / 8
    pp = [[[[-hw, hw], [math.pi / 2 - hw, math.pi / 2 + hw]]]]
    system = schottky.make_system([g[None]], np.asarray(pp))
    cone = schottky.limit_cone(system, 5)
    assert np.allclose(cone.directions, 1.0)


def test_limit_cone_generic_interval(joining):
    cone = schottky.limit_cone(joining, 6)
    lo, hi = cone.angle_range
    assert hi - lo > 0.05


def test_limit_cone_monotone_and_stabilizing(joining):
    ranges = {
        L: schottky.limit_cone(joining, L).angle_range for L in (4, 6, 7, 8)
    }
    for small, large in ((4, 6), (6, 7), (7, 8)):
        assert ranges[large][0] <= ranges[small][0] + 1e-9
        assert ranges[large][1] >= ranges[small][1] - 1e-9
    width = ranges[8][1] - ranges[8][0]
    hausdorff = max(
        abs(ranges[7][0] - ranges[8][0]), abs(ranges[7][1] - ranges[8][1])
    )
    assert hausdorff < 0.02 * width


def test_limit_cone_midpoint_realized(joining):
    # Convexity cross-check: the angle of a long mixed word falls inside
    # the interval spanned by the extreme short words.
    cone8 = schottky.limit_cone(joining, 8)
    lo, hi = cone8.angle_range
    mixed = schottky.word_matrix(joining, (1, 2, 1, -2, 1, 2))
    lam = product.jordan_vector(mixed)
    ang = math.atan2(lam[1], lam[0])
    assert lo - 1e-9 <= ang <= hi + 1e-9


# ------------------------------------------------------------ limit point


def test_limit_point_constant_sequence(pair):
    data = psl2.loxodromic_data(pair.generators[0][0])
    seq = (1,) * 12
    pt = schottky.limit_point(pair, seq, 10)
    gap = (psl2.theta_of_point(pt[0])
           - psl2.theta_of_point(data.attract)) % math.pi
    assert min(gap, math.pi - gap) < 1e-8


def test_limit_point_depth_zero(pair):
    pt = schottky.limit_point(pair, (2, 1, 2), 0)
    mid = schottky.arc_midpoint(tuple(pair.pingpong[1, 0, 0]))
    assert pt[0] == pytest.approx(psl2.point_of_theta(mid))


def test_limit_point_requires_reduced(pair):
    with pytest.raises(PreconditionError):
        schottky.limit_point(pair, (1, -1, 2), 1)


def test_limit_point_geometric_convergence(pair):
    rng = np.random.default_rng(11)
    letters = [1]
    for _ in range(17):
        choices = [l for l in (1, -1, 2, -2) if l != -letters[-1]]
        letters.append(choices[int(rng.integers(3))])
    seq = tuple(letters)
    gaps = []
    for depth in (6, 10, 14):
        a = schottky.limit_point(pair, seq, depth)
        b = schottky.limit_point(pair, seq, depth + 4)
        gaps.append(abs(a[0] - b[0]))
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
    # Contraction factor oracle: product of boundary derivatives along the
    # prefix orbit bounds the nested-interval shrinkage.
    assert gaps[2] < 1e-3 * max(gaps[0], 1e-12) or gaps[2] < 1e-12


def test_limit_points_land_in_attract_arcs(pair):
    rng = np.random.default_rng(12)
    arcs = [pair.letter_arcs(i, 0)[0] for i in range(4)]
    for trial in range(20):
        letters = [int(rng.integers(1, 3)) * (1, -1)[rng.integers(2)]]
        for _ in range(9):
            choices = [l for l in (1, -1, 2, -2) if l != -letters[-1]]
            letters.append(choices[int(rng.integers(3))])
        pt = schottky.limit_point(pair, tuple(letters), 8)
        theta = psl2.theta_of_point(pt[0])
        assert any(schottky.arc_contains(arc, theta) for arc in arcs)


# -------------------------------------------------------------- word ball


def test_word_metric_linear_growth(pair):
    _, mats, lengths, _, _ = schottky.word_ball(pair, 8)
    mu = product.cartan_vector(mats)[:, 0]
    slopes_min, slopes_max = [], []
    for n in range(1, 9):
        sel = lengths == n
        slopes_min.append(mu[sel].min() / n)
        slopes_max.append(mu[sel].max() / n)
    assert min(slopes_min) > 0.5
    assert max(slopes_max) <= 4.0 + 1e-9


def test_jordan_additivity_cyclic_powers(pair):
    for letters in [(1,), (1, 2), (1, -2), (2, 1, 2)]:
        w = schottky.word_matrix(pair, letters)
        lam = product.jordan_vector(w)
        for p in (2, 3):
            wp = product.matrix_power(w, p)
            assert np.abs(product.jordan_vector(wp) - p * lam).max() < 1e-8


# ---------------------------------------------------------------- configs


def test_config_roundtrip(tmp_path, joining):
    path = tmp_path / "sys.json"
    schottky.save_system(joining, path)
    loaded = schottky.load_system(path)
    assert loaded.r == joining.r and loaded.k == joining.k
    for a, b in zip(loaded.generators, joining.generators):
        assert np.abs(a - b).max() < 1e-12
    assert np.allclose(loaded.pingpong, joining.pingpong)


def test_config_rejects_unknown_keys(joining):
    data = schottky.system_to_dict(joining)
    data["extra"] = 1
    with pytest.raises(PreconditionError):
        schottky.system_from_dict(data)


def test_zariski_flags(pair, joining):
    flags = schottky.zariski_density_flags(joining)
    assert all(flags.values())
    diag = schottky.self_joining(pair, pair)
    flags_diag = schottky.zariski_density_flags(diag)
    assert not flags_diag["nonparallel_jordan"]
