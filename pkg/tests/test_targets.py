import numpy as np
import pytest

from chiralfilm.targets import EllipsoidTarget, SphereTarget, TargetError, make_target


def ellipsoid_surface_cloud(axes, n_theta=400, n_phi=800):
    theta = np.linspace(1e-4, np.pi - 1e-4, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack(
        [
            axes[0] * np.sin(th) * np.cos(ph),
            axes[1] * np.sin(th) * np.sin(ph),
            axes[2] * np.cos(th),
        ],
        axis=-1,
    )
    return pts.reshape(-1, 3)


def brute_force_nearest(axes, y, levels=3):
    """Dense parametric sampling with local refinement around the argmin."""
    axes = np.asarray(axes, dtype=float)
    t_lo, t_hi, p_lo, p_hi = 1e-6, np.pi - 1e-6, 0.0, 2.0 * np.pi
    best = None
    for _ in range(levels):
        theta = np.linspace(t_lo, t_hi, 300)
        phi = np.linspace(p_lo, p_hi, 600)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        pts = np.stack(
            [
                axes[0] * np.sin(th) * np.cos(ph),
                axes[1] * np.sin(th) * np.sin(ph),
                axes[2] * np.cos(th),
            ],
            axis=-1,
        )
        dist = np.sum((pts - y) ** 2, axis=-1)
        k = np.unravel_index(np.argmin(dist), dist.shape)
        best = pts[k]
        dt, dp = theta[1] - theta[0], phi[1] - phi[0]
        t_lo, t_hi = max(1e-8, theta[k[0]] - 2 * dt), min(np.pi - 1e-8, theta[k[0]] + 2 * dt)
        p_lo, p_hi = phi[k[1]] - 2 * dp, phi[k[1]] + 2 * dp
    return best


def test_sphere_projection_examples():
    unit = SphereTarget(1.0)
    assert np.allclose(unit.project(np.array([0.0, 0.0, 2.0])), [0.0, 0.0, 1.0], atol=1e-15)
    two = SphereTarget(2.0)
    assert np.allclose(two.project(np.array([3.0, 0.0, 0.0])), [2.0, 0.0, 0.0], atol=1e-15)


def test_sphere_signed_distance_examples():
    unit = SphereTarget(1.0)
    assert unit.signed_distance(np.array([0.0, 0.0, 1.3])) == pytest.approx(0.3, abs=1e-15)
    assert unit.signed_distance(np.array([0.0, 0.0, 0.6])) == pytest.approx(-0.4, abs=1e-15)


def test_sphere_rejects_center():
    unit = SphereTarget(1.0)
    with pytest.raises(TargetError):
        unit.project(np.zeros(3))


def test_ellipsoid_axis_projection():
    ell = EllipsoidTarget([2.0, 1.0, 1.0])
    assert np.allclose(ell.project(np.array([3.0, 0.0, 0.0])), [2.0, 0.0, 0.0], atol=1e-12)


def test_ellipsoid_projection_against_brute_force(rng):
    axes = [2.0, 1.0, 1.0]
    ell = EllipsoidTarget(axes)
    for _ in range(12):
        sigma0 = ell.project(rng.standard_normal(3))
        y = sigma0 + rng.uniform(-0.35, 0.35) * ell.normal(sigma0)
        got = ell.project(y)
        ref = brute_force_nearest(axes, y)
        assert np.linalg.norm(got - ref) < 2e-3
        assert abs(np.linalg.norm(y - got) - np.linalg.norm(y - ref)) < 1e-6
        # stationarity pins the answer far more tightly than the grid search
        resid = np.cross(y - got, ell.normal(got))
        assert np.linalg.norm(resid) < 1e-9


def test_ellipsoid_signed_distance_against_brute_force(rng):
    axes = [2.0, 1.0, 1.0]
    ell = EllipsoidTarget(axes)
    for _ in range(8):
        sigma0 = ell.project(rng.standard_normal(3))
        t = rng.uniform(-0.3, 0.3)
        y = sigma0 + t * ell.normal(sigma0)
        ref = brute_force_nearest(axes, y)
        expected = np.linalg.norm(y - ref) * np.sign(t) if t != 0 else 0.0
        assert ell.signed_distance(y) == pytest.approx(expected, abs=1e-6)


def test_normals():
    unit = SphereTarget(1.0)
    assert np.allclose(unit.normal(np.array([0.0, 0.0, 1.0])), [0.0, 0.0, 1.0], atol=1e-15)
    ell = EllipsoidTarget([2.0, 1.0, 1.0])
    assert np.allclose(ell.normal(np.array([2.0, 0.0, 0.0])), [1.0, 0.0, 0.0], atol=1e-15)


def test_ellipsoid_normal_matches_distance_gradient(rng):
    ell = EllipsoidTarget([2.0, 1.0, 1.0])
    delta = 1e-6
    for _ in range(10):
        sigma = ell.project(rng.standard_normal(3))
        grad = np.empty(3)
        for j in range(3):
            e = np.zeros(3)
            e[j] = delta
            grad[j] = (ell.signed_distance(sigma + e) - ell.signed_distance(sigma - e)) / (2 * delta)
        grad /= np.linalg.norm(grad)
        assert np.linalg.norm(grad - ell.normal(sigma)) < 1e-6


@pytest.mark.parametrize("target", [SphereTarget(1.0), EllipsoidTarget([2.0, 1.0, 1.0])],
                         ids=["sphere", "ellipsoid"])
def test_projection_stationarity_and_idempotence(target, rng):
    sigma = target.project(rng.standard_normal((1000, 3)))
    offsets = rng.uniform(-0.3, 0.3, size=(1000, 1)) * target.normal(sigma)
    y = sigma + offsets
    proj = target.project(y)
    residual = np.cross(y - proj, target.normal(proj))
    assert np.max(np.sqrt(np.sum(residual**2, axis=-1))) < 1e-9
    again = target.project(proj)
    assert np.max(np.abs(again - proj)) < 1e-12


def test_sphere_closed_form_agrees_with_newton_path(rng):
    sphere = SphereTarget(1.3)
    generic = EllipsoidTarget([1.3, 1.3, 1.3])
    y = rng.standard_normal((1000, 3))
    keep = np.linalg.norm(y, axis=-1) > 1e-2
    y = y[keep]
    assert np.max(np.abs(sphere.project(y) - generic.project(y))) < 1e-12
    assert np.max(np.abs(sphere.signed_distance(y) - generic.signed_distance(y))) < 1e-12


@pytest.mark.parametrize("target", [SphereTarget(1.0), EllipsoidTarget([2.0, 1.0, 1.0])],
                         ids=["sphere", "ellipsoid"])
def test_distance_along_normal_is_linear(target, rng):
    sigma = target.project(rng.standard_normal((200, 3)))
    t = rng.uniform(-0.4, 0.4, size=(200,)) * target.admissible_radius
    y = sigma + t[:, None] * target.normal(sigma)
    assert np.max(np.abs(target.signed_distance(y) - t)) < 1e-9


@pytest.mark.parametrize("target", [SphereTarget(1.0), EllipsoidTarget([2.0, 1.0, 1.0])],
                         ids=["sphere", "ellipsoid"])
def test_tangent_project_properties(target, rng):
    sigma = target.project(rng.standard_normal((500, 3)))
    n = target.normal(sigma)
    assert np.max(np.abs(np.sum(target.tangent_project(sigma, n) * n, axis=-1))) < 1e-12

    g = rng.standard_normal((500, 3))
    out = target.tangent_project(sigma, g)
    assert np.max(np.abs(np.sum(out * n, axis=-1))) < 1e-12
    # Pythagoras: |out|^2 = |g|^2 - (g.n)^2
    lhs = np.sum(out * out, axis=-1)
    rhs = np.sum(g * g, axis=-1) - np.sum(g * n, axis=-1) ** 2
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    # idempotence
    assert np.max(np.abs(target.tangent_project(sigma, out) - out)) < 1e-15

    tangent = target.tangent_project(sigma, g)
    assert np.max(np.abs(target.tangent_project(sigma, tangent) - tangent)) < 1e-15


def test_ellipsoid_rejects_medial_axis():
    ell = EllipsoidTarget([2.0, 1.0, 1.0])
    with pytest.raises(TargetError):
        ell.project(np.zeros(3))


def test_make_target_and_validation():
    assert isinstance(make_target("sphere", radius=2.0), SphereTarget)
    assert isinstance(make_target("ellipsoid", semi_axes=[2.0, 1.0, 1.0]), EllipsoidTarget)
    with pytest.raises(TargetError):
        make_target("cube")
    with pytest.raises(TargetError):
        SphereTarget(0.0)
    with pytest.raises(TargetError):
        EllipsoidTarget([1.0, -1.0, 1.0])
