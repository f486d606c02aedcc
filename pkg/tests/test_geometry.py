import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dinobot import (
    Frame,
    InvalidRecordError,
    Pose,
    RigidTransform,
    Twist,
    rotation_about_z,
    rotation_angle,
    rotation_error_deg,
    rotation_exp,
    rotation_log,
    se3_exp,
)

HALF_PI = np.pi / 2


def test_rotation_exp_quarter_turn_exact_columns():
    r = rotation_exp(np.array([0.0, 0.0, HALF_PI]))
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(r, expected, atol=1e-12)


def test_rotation_exp_matches_scipy_on_random_axes():
    rng = np.random.default_rng(3)
    for _ in range(200):
        rotvec = rng.normal(0, 1.5, 3)
        ours = rotation_exp(rotvec)
        theirs = oracles.Rotation.from_rotvec(rotvec).as_matrix()
        assert np.allclose(ours, theirs, atol=1e-12)


def test_rotation_log_inverts_exp():
    rng = np.random.default_rng(4)
    for _ in range(200):
        rotvec = rng.normal(0, 1.0, 3)
        # keep away from the pi boundary where the sign flips
        norm = np.linalg.norm(rotvec)
        if norm > 3.0:
            rotvec *= 3.0 / norm
        back = rotation_log(rotation_exp(rotvec))
        assert np.allclose(back, rotvec, atol=1e-9)


def test_rotation_log_near_pi():
    rotvec = np.array([0.0, 0.0, np.pi - 1e-7])
    back = rotation_log(rotation_exp(rotvec))
    assert np.allclose(back, rotvec, atol=1e-6)


def test_rotation_angle_resolves_below_1e9():
    tiny = 3e-10
    r = rotation_exp(np.array([0.0, tiny, 0.0]))
    angle = rotation_angle(r)
    assert angle == pytest.approx(tiny, rel=1e-3)
    # the arccos-of-trace formula cannot see this angle at all
    naive = np.arccos(np.clip((np.trace(r) - 1) / 2, -1, 1))
    assert naive == 0.0 or abs(naive - tiny) > tiny


def test_rotation_angle_at_pi():
    r = rotation_exp(np.array([np.pi, 0.0, 0.0]))
    assert rotation_angle(r) == pytest.approx(np.pi, abs=1e-9)


def test_rotation_about_z_agrees_with_exp():
    for theta in np.linspace(-np.pi, np.pi, 17):
        assert np.allclose(
            rotation_about_z(theta), rotation_exp(np.array([0, 0, theta])), atol=1e-12
        )


def test_rotation_error_deg_symmetric():
    rng = np.random.default_rng(5)
    a = oracles.random_rotation(rng)
    b = oracles.random_rotation(rng)
    assert rotation_error_deg(a, b) == pytest.approx(rotation_error_deg(b, a))
    expected = np.degrees(oracles.rotation_geodesic(a, b))
    assert rotation_error_deg(a, b) == pytest.approx(expected, abs=1e-9)


class TestRigidTransform:
    def test_compose_inverse_roundtrip(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            t = RigidTransform(oracles.random_rotation(rng), rng.normal(0, 1, 3))
            back = t @ t.inverse()
            assert np.allclose(back.rotation, np.eye(3), atol=1e-12)
            assert np.allclose(back.translation, 0, atol=1e-12)

    def test_apply_matches_matrix_action(self):
        rng = np.random.default_rng(7)
        t = RigidTransform(oracles.random_rotation(rng), rng.normal(0, 1, 3))
        pts = rng.normal(0, 1, (10, 3))
        assert np.allclose(t.apply(pts), pts @ t.rotation.T + t.translation)

    def test_compose_associative(self):
        rng = np.random.default_rng(8)
        ts = [
            RigidTransform(oracles.random_rotation(rng), rng.normal(0, 1, 3))
            for _ in range(3)
        ]
        left = (ts[0] @ ts[1]) @ ts[2]
        right = ts[0] @ (ts[1] @ ts[2])
        assert np.allclose(left.rotation, right.rotation, atol=1e-12)
        assert np.allclose(left.translation, right.translation, atol=1e-12)

    def test_scaled_halves_rotation_angle(self):
        t = RigidTransform(rotation_exp(np.array([0, 0, 0.8])), np.array([1.0, 0, 0]))
        half = t.scaled(0.5)
        assert rotation_angle(half.rotation) == pytest.approx(0.4, abs=1e-12)
        assert np.allclose(half.translation, [0.5, 0, 0])
        assert np.allclose((half.rotation @ half.rotation), t.rotation, atol=1e-12)

    def test_scaled_zero_is_identity(self):
        rng = np.random.default_rng(9)
        t = RigidTransform(oracles.random_rotation(rng), rng.normal(0, 1, 3))
        z = t.scaled(0.0)
        assert np.allclose(z.rotation, np.eye(3))
        assert np.allclose(z.translation, 0)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(InvalidRecordError):
            RigidTransform(np.eye(3) * 1.001, np.zeros(3))

    def test_rejects_reflection(self):
        r = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvalidRecordError):
            RigidTransform(r, np.zeros(3))

    def test_rejects_nan_translation(self):
        with pytest.raises(InvalidRecordError):
            RigidTransform(np.eye(3), np.array([0.0, np.nan, 0.0]))


class TestPose:
    def test_compose_checks_frames(self):
        a = Pose(np.eye(3), np.zeros(3), Frame.EE, Frame.WORLD)
        mismatched = Pose(np.eye(3), np.ones(3), Frame.CAMERA, Frame.OBJECT)
        with pytest.raises(ValueError):
            a.compose(mismatched)

    def test_compose_and_inverse(self):
        rng = np.random.default_rng(10)
        world_obj = Pose(
            oracles.random_rotation(rng), rng.normal(0, 1, 3), Frame.OBJECT, Frame.WORLD
        )
        obj_cam = Pose(
            oracles.random_rotation(rng), rng.normal(0, 1, 3), Frame.CAMERA, Frame.OBJECT
        )
        cam = world_obj.compose(obj_cam)
        assert cam.frame == Frame.CAMERA and cam.reference == Frame.WORLD
        back = cam.compose(obj_cam.inverse())
        assert np.allclose(back.rotation, world_obj.rotation, atol=1e-12)
        assert np.allclose(back.translation, world_obj.translation, atol=1e-12)

    def test_transform_points_matches_transform(self):
        rng = np.random.default_rng(11)
        pose = Pose(
            oracles.random_rotation(rng), rng.normal(0, 1, 3), Frame.OBJECT, Frame.WORLD
        )
        pts = rng.normal(0, 1, (7, 3))
        assert np.allclose(pose.transform_points(pts), pose.as_transform().apply(pts))


class TestSe3Exp:
    def test_pure_translation(self):
        twist = Twist(np.array([1.0, -2.0, 0.5]), np.zeros(3))
        t = se3_exp(twist, 0.1)
        assert np.allclose(t.rotation, np.eye(3))
        assert np.allclose(t.translation, [0.1, -0.2, 0.05])

    def test_pure_rotation(self):
        twist = Twist(np.zeros(3), np.array([0.0, 0.0, HALF_PI]))
        t = se3_exp(twist, 1.0)
        assert np.allclose(t.rotation, rotation_about_z(HALF_PI), atol=1e-12)
        assert np.allclose(t.translation, 0)

    def test_matches_scipy_expm_on_random_twists(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            xi = rng.normal(0, 1, 6)
            dt = float(rng.random() * 2)
            ours = se3_exp(Twist(xi[:3], xi[3:]), dt)
            r_ref, p_ref = oracles.expm_step(xi, dt)
            assert np.allclose(ours.rotation, r_ref, atol=1e-10)
            assert np.allclose(ours.translation, p_ref, atol=1e-10)

    def test_small_angle_series_branch(self):
        xi = np.array([0.3, 0.1, -0.2, 1e-9, -2e-9, 1e-9])
        ours = se3_exp(Twist(xi[:3], xi[3:]), 1.0)
        r_ref, p_ref = oracles.expm_step(xi, 1.0)
        assert np.allclose(ours.rotation, r_ref, atol=1e-14)
        assert np.allclose(ours.translation, p_ref, atol=1e-14)


class TestTwist:
    def test_array_roundtrip(self):
        twist = Twist(np.array([1.0, 2, 3]), np.array([4.0, 5, 6]))
        back = Twist.from_array(twist.as_array())
        assert np.allclose(back.linear, twist.linear)
        assert np.allclose(back.angular, twist.angular)

    def test_from_array_rejects_wrong_length(self):
        with pytest.raises(InvalidRecordError):
            Twist.from_array(np.zeros(5))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.floats(1e-4, 2.0))
def test_exp_log_consistency_property(rotvec, dt):
    rotvec = np.asarray(rotvec)
    norm = np.linalg.norm(rotvec)
    if norm * dt >= np.pi - 1e-3:
        rotvec *= (np.pi - 1e-3) / (norm * dt)
    r = rotation_exp(rotvec * dt)
    assert np.allclose(rotation_log(r), rotvec * dt, atol=1e-8)
