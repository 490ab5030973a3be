import numpy as np
import pytest

import oracles
from riskplan.environments import cluttered_env, walled_goal_env
from riskplan.poly_core import PlanePoly
from riskplan.risk_map import (
    DANGER_RGB,
    RISK_RGB,
    SAFE_RGB,
    Environment,
    MapImage,
    Zone,
    build_constraints,
    classify_codes,
    classify_point,
    mc_point_risk,
    pixel_centers,
    rasterize,
    risk_stderr,
)
from riskplan.uncertainty import Gaussian, UncertainObstacle

x, y = PlanePoly.var("x"), PlanePoly.var("y")
DELTAS = [round(0.1 * k, 1) for k in range(1, 11)]


def test_environment_validation(ellipse):
    with pytest.raises(ValueError):
        Environment((1.0, 1.0, 0.0, 1.0))
    obs = ellipse.obstacles[0]
    with pytest.raises(ValueError):
        Environment((0, 1, 0, 1), (obs, obs))


def test_constraints_of_ellipse_obstacle(ellipse):
    cs = build_constraints(ellipse, 0.1)
    mean = -0.5 * x**2 - y**2 + 1
    second = 0.25 * x**4 + y**4 + x**2 * y**2 - x**2 - 2 * y**2 + 3
    o = cs.obstacles[0]
    assert o.g2.almost_equal(0.5 * x**2 + y**2 - 1)
    assert o.g1.almost_equal(mean * mean - 0.9 * second)
    assert cs.labels == [("ellipse", 1), ("ellipse", 2)]


def test_delta_one_leaves_only_mean_constraint(ellipse):
    cs = build_constraints(ellipse, 1.0)
    o = cs.obstacles[0]
    assert o.g1.almost_equal(o.mean * o.mean)


def test_delta_zero_is_negative_variance(ellipse):
    o = build_constraints(ellipse, 0.0).obstacles[0]
    assert o.g1.almost_equal(o.mean * o.mean - o.second)
    X, Y = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21))
    assert np.all(o.g1.eval(X, Y) < 0)


def test_delta_out_of_range(ellipse):
    for d in (-0.1, 1.5):
        with pytest.raises(ValueError):
            build_constraints(ellipse, d)


def test_classify_examples(ellipse):
    cs = build_constraints(ellipse, 0.1)
    assert classify_point(cs, (0, 0)) is Zone.DANGEROUS
    assert classify_point(cs, (1, 1)) is Zone.RISK
    assert classify_point(cs, (2, 2)) is Zone.SAFE
    with pytest.raises(ValueError):
        classify_point(cs, (2.5, 0))


def test_classify_matches_ratio_form(ellipse, circle, heart):
    # g1 >= 0 and g2 >= 0  <=>  E[P] <= 0 and Var / E[P^2] <= delta, where E[P^2] > 0
    rng = np.random.default_rng(0)
    for env in (ellipse, circle, heart):
        for delta in (0.1, 0.5):
            cs = build_constraints(env, delta)
            o = cs.obstacles[0]
            for _ in range(300):
                pt = env.sample_uniform(rng)
                m, s = o.mean(*pt), o.second(*pt)
                ratio_safe = m <= 0 and (s - m * m) / s <= delta
                if abs((s - m * m) / s - delta) < 1e-9 or abs(m) < 1e-12:
                    continue
                assert (classify_point(cs, pt) is Zone.SAFE) == ratio_safe


def test_vector_and_point_classifiers_agree(circle):
    cs = build_constraints(circle, 0.3)
    X, Y = pixel_centers(circle.bounds, 32, 32)
    codes = classify_codes(cs, X, Y)
    names = {Zone.SAFE: 0, Zone.RISK: 1, Zone.DANGEROUS: 2}
    for r in range(0, 32, 3):
        for c in range(0, 32, 3):
            assert codes[r, c] == names[classify_point(cs, (X[r, c], Y[r, c]))]


def test_rasterize_empty_env():
    env = Environment((0, 1, 0, 1))
    img = rasterize(build_constraints(env, 0.5), env, 16, 8)
    assert (img.width, img.height) == (16, 8)
    assert img.count(SAFE_RGB) == 16 * 8


def test_rasterize_examples(ellipse):
    img = rasterize(build_constraints(ellipse, 0.1), ellipse, 256, 256)
    # pixel 128 of 256 has its centre just right of / below the origin
    assert tuple(img.pixels[128, 128]) == DANGER_RGB
    assert tuple(img.pixels[0, 255]) == SAFE_RGB  # top-right is the (2, 2) corner
    palette = {SAFE_RGB, RISK_RGB, DANGER_RGB}
    assert {tuple(p) for p in img.pixels.reshape(-1, 3)} <= palette


def test_rasterize_row_zero_is_top():
    # obstacle only in the upper half
    from riskplan.poly_core import TriPoly

    Y = TriPoly.var("y")
    env = Environment((-1, 1, -1, 1), (UncertainObstacle(Y - 0.5 + 0 * TriPoly.var("w"), Gaussian(0, 1), "top"),))
    img = rasterize(build_constraints(env, 0.5), env, 8, 8)
    assert tuple(img.pixels[0, 3]) == DANGER_RGB
    assert tuple(img.pixels[7, 3]) == SAFE_RGB


def test_rasterize_too_small(ellipse):
    with pytest.raises(ValueError):
        rasterize(build_constraints(ellipse, 0.1), ellipse, 4, 64)


def test_rasterize_deterministic(heart):
    cs = build_constraints(heart, 0.2)
    assert rasterize(cs, heart, 64, 64).to_ppm() == rasterize(cs, heart, 64, 64).to_ppm()


@pytest.mark.parametrize("make_env", [lambda: cluttered_env(0), walled_goal_env])
def test_nested_safe_sets_and_fixed_danger(make_env):
    env = make_env()
    imgs = [rasterize(build_constraints(env, d), env, 64, 64) for d in DELTAS]
    for a, b in zip(imgs, imgs[1:]):
        assert np.all(~a.mask(SAFE_RGB) | b.mask(SAFE_RGB))
        assert a.count(RISK_RGB) >= b.count(RISK_RGB)
        assert np.array_equal(a.mask(DANGER_RGB), b.mask(DANGER_RGB))


def test_ppm_round_trip(tmp_path, heart):
    img = rasterize(build_constraints(heart, 0.3), heart, 24, 16)
    f = tmp_path / "m.ppm"
    img.save(f)
    data = f.read_bytes()
    assert data.startswith(b"P6\n24 16\n255\n")
    assert len(data) == len(b"P6\n24 16\n255\n") + 24 * 16 * 3
    assert MapImage.load(f) == img


def test_ppm_with_comment():
    px = np.zeros((2, 2, 3), np.uint8)
    data = b"P6\n# made by hand\n2 2\n255\n" + px.tobytes()
    assert MapImage.from_ppm(data) == MapImage(px)


def test_ppm_errors():
    px = np.zeros((2, 2, 3), np.uint8).tobytes()
    with pytest.raises(ValueError, match="P6"):
        MapImage.from_ppm(b"P3\n2 2\n255\n" + px)
    with pytest.raises(ValueError, match="truncated"):
        MapImage.from_ppm(b"P6\n2 2\n255\n" + px[:-1])
    with pytest.raises(ValueError, match="maxval"):
        MapImage.from_ppm(b"P6\n2 2\n65535\n" + px)


def test_mc_point_risk_examples(ellipse, rng):
    assert mc_point_risk(ellipse, (0.0, 0.0), 10_000, rng) == 1.0
    assert mc_point_risk(Environment((0, 1, 0, 1)), (0.5, 0.5), 1000, rng) == 0.0
    with pytest.raises(ValueError):
        mc_point_risk(ellipse, (0, 0), 0, rng)


def test_mc_point_risk_agrees_with_brute_force(heart):
    pt = (0.3, 0.2)
    a = mc_point_risk(heart, pt, 200_000, np.random.default_rng(1))
    b = oracles.brute_point_risk(heart, pt, 200_000, np.random.default_rng(2))
    assert abs(a - b) <= 5 * np.sqrt(2 * max(a * (1 - a), 1e-6) / 200_000)


def test_safe_point_risk_bound(ellipse):
    cs = build_constraints(ellipse, 0.1)
    assert classify_point(cs, (2, 2)) is Zone.SAFE
    est = mc_point_risk(ellipse, (2.0, 2.0), 100_000, np.random.default_rng(4))
    assert est <= 0.1 + 4 * risk_stderr(0.1, 100_000)
