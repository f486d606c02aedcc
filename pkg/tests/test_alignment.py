import numpy as np
import pytest

import oracles
from dinobot import (
    AlignmentSolution,
    CameraIntrinsics,
    DegenerateConfigurationError,
    DimensionMismatchError,
    ErrorStats,
    KeypointSet,
    MatchPair,
    NoValidPairsError,
    RansacConfig,
    RigidTransform,
    ScenePair,
    TooFewPointsError,
    alignment_benchmark,
    back_project,
    rotation_error_deg,
    solve_alignment,
    solve_planar_4dof,
    solve_rigid_6dof,
    solve_with_ransac,
)
from dinobot.alignment import weighted_rms


def cloud(rng, n, spread=0.5):
    return rng.uniform(-spread, spread, (n, 3))


def keyset(points, weights=None):
    pts = np.asarray(points, dtype=np.float64)
    if weights is None:
        weights = np.ones(len(pts))
    return KeypointSet(pts, np.asarray(weights, dtype=np.float64))


def random_transform(rng, t_scale=0.5):
    return RigidTransform(oracles.random_rotation(rng),
                          rng.uniform(-t_scale, t_scale, 3))


def pair_at(pixel_a, pixel_b, similarity=0.9):
    return MatchPair(patch_a=(0, 0), patch_b=(0, 0),
                     pixel_a=pixel_a, pixel_b=pixel_b,
                     similarity=similarity)


class TestKeypointSet:
    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatchError):
            KeypointSet(np.zeros((3, 2)), np.ones(3))
        with pytest.raises(DimensionMismatchError):
            KeypointSet(np.zeros((3, 3)), np.ones(2))

    def test_rejects_non_positive_weights(self):
        with pytest.raises(NoValidPairsError):
            KeypointSet(np.zeros((2, 3)), np.array([1.0, 0.0]))

    def test_rejects_non_finite(self):
        pts = np.zeros((2, 3))
        pts[0, 0] = np.inf
        with pytest.raises(DimensionMismatchError):
            KeypointSet(pts, np.ones(2))


class TestBackProject:
    K = CameraIntrinsics(100.0, 100.0, 4.0, 4.0)

    def test_principal_ray(self):
        depth = np.full((9, 9), 2.0)
        c1, c2 = back_project([pair_at((4.0, 4.0), (4.0, 4.0))],
                              depth, depth, self.K)
        np.testing.assert_allclose(c1.points[0], [0.0, 0.0, 2.0], atol=1e-12)

    def test_offset_pixel_analytic(self):
        # u = cx + fx at depth 1.5 lands a full focal length off axis
        k = CameraIntrinsics(100.0, 100.0, 50.0, 50.0)
        depth = np.full((200, 200), 1.5)
        c1, _ = back_project([pair_at((150.0, 50.0), (150.0, 50.0))],
                             depth, depth, k)
        np.testing.assert_allclose(c1.points[0], [1.5, 0.0, 1.5], atol=1e-12)

    def test_agrees_with_reference_formula(self, rng):
        k = CameraIntrinsics(240.0, 240.0, 112.0, 112.0)
        depth_a = rng.uniform(0.3, 1.5, (224, 224))
        depth_b = rng.uniform(0.3, 1.5, (224, 224))
        pairs = [
            pair_at((float(rng.integers(224)), float(rng.integers(224))),
                    (float(rng.integers(224)), float(rng.integers(224))))
            for _ in range(20)
        ]
        c1, c2 = back_project(pairs, depth_a, depth_b, k)
        for i, p in enumerate(pairs):
            za = depth_a[int(p.pixel_a[1]), int(p.pixel_a[0])]
            zb = depth_b[int(p.pixel_b[1]), int(p.pixel_b[0])]
            np.testing.assert_allclose(
                c1.points[i],
                oracles.back_project_px(*p.pixel_a, za, k.fx, k.fy, k.cx, k.cy),
                atol=1e-12,
            )
            np.testing.assert_allclose(
                c2.points[i],
                oracles.back_project_px(*p.pixel_b, zb, k.fx, k.fy, k.cx, k.cy),
                atol=1e-12,
            )

    def test_invalid_depth_drops_pair(self):
        depth_a = np.full((9, 9), 1.0)
        depth_b = depth_a.copy()
        depth_b[4, 4] = 0.0
        pairs = [pair_at((4.0, 4.0), (4.0, 4.0)),
                 pair_at((2.0, 2.0), (2.0, 2.0))]
        c1, _ = back_project(pairs, depth_a, depth_b, self.K)
        assert len(c1) == 1

    def test_all_invalid_raises(self):
        depth = np.zeros((9, 9))
        with pytest.raises(NoValidPairsError):
            back_project([pair_at((4.0, 4.0), (4.0, 4.0))],
                         depth, depth, self.K)

    def test_weights_are_similarities(self):
        depth = np.full((9, 9), 1.0)
        pairs = [pair_at((1.0, 1.0), (1.0, 1.0), similarity=0.75),
                 pair_at((2.0, 2.0), (2.0, 2.0), similarity=0.5)]
        c1, c2 = back_project(pairs, depth, depth, self.K)
        np.testing.assert_allclose(c1.weights, [0.75, 0.5])
        np.testing.assert_allclose(c2.weights, [0.75, 0.5])

    def test_non_positive_similarity_dropped(self):
        depth = np.full((9, 9), 1.0)
        pairs = [pair_at((1.0, 1.0), (1.0, 1.0), similarity=-0.2),
                 pair_at((2.0, 2.0), (2.0, 2.0), similarity=0.4)]
        c1, _ = back_project(pairs, depth, depth, self.K)
        assert len(c1) == 1
        with pytest.raises(NoValidPairsError):
            back_project(pairs[:1], depth, depth, self.K)

    def test_uniform_weighting_keeps_non_positive(self):
        depth = np.full((9, 9), 1.0)
        pairs = [pair_at((1.0, 1.0), (1.0, 1.0), similarity=-0.2)]
        c1, _ = back_project(pairs, depth, depth, self.K, weighting="uniform")
        np.testing.assert_allclose(c1.weights, [1.0])


class TestRigid6dof:
    def test_identity_on_equal_sets(self, rng):
        pts = cloud(rng, 6)
        sol = solve_rigid_6dof(keyset(pts), keyset(pts))
        np.testing.assert_allclose(sol.transform.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(sol.transform.translation, 0, atol=1e-12)
        assert sol.residual == pytest.approx(0.0, abs=1e-12)

    def test_recovers_random_transforms(self, rng):
        for _ in range(100):
            n = int(rng.integers(3, 30))
            pts = cloud(rng, n)
            truth = random_transform(rng)
            sol = solve_rigid_6dof(keyset(pts), keyset(truth.apply(pts)))
            assert rotation_error_deg(sol.transform.rotation,
                                      truth.rotation) < np.degrees(1e-9)
            assert np.linalg.norm(sol.transform.translation
                                  - truth.translation) < 1e-9

    def test_agrees_with_horn_quaternion_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(4, 20))
            pts = cloud(rng, n)
            truth = random_transform(rng)
            noisy = truth.apply(pts) + rng.normal(0, 0.01, (n, 3))
            weights = rng.uniform(0.1, 1.0, n)
            sol = solve_rigid_6dof(keyset(pts, weights), keyset(noisy, weights))
            r_ref, t_ref = oracles.horn_fit(pts, noisy, weights)
            assert rotation_error_deg(sol.transform.rotation, r_ref) < 1e-7
            np.testing.assert_allclose(sol.transform.translation, t_ref,
                                       atol=1e-9)

    def test_agrees_with_generic_minimizer(self, rng):
        for _ in range(8):
            pts = cloud(rng, 5)
            truth = random_transform(rng, t_scale=0.2)
            noisy = truth.apply(pts) + rng.normal(0, 0.02, (5, 3))
            weights = rng.uniform(0.2, 1.0, 5)
            sol = solve_rigid_6dof(keyset(pts, weights), keyset(noisy, weights))
            r_ref, t_ref, _ = oracles.minimize_fit(pts, noisy, weights)
            assert rotation_error_deg(sol.transform.rotation, r_ref) < 1e-2
            np.testing.assert_allclose(sol.transform.translation, t_ref,
                                       atol=1e-4)

    def test_noise_one_millimeter(self, rng):
        rot_errs, trans_errs = [], []
        for _ in range(100):
            pts = cloud(rng, 20)
            truth = random_transform(rng)
            noisy = truth.apply(pts) + rng.normal(0, 0.001, (20, 3))
            sol = solve_rigid_6dof(keyset(pts), keyset(noisy))
            rot_errs.append(rotation_error_deg(sol.transform.rotation,
                                               truth.rotation))
            trans_errs.append(np.linalg.norm(sol.transform.translation
                                             - truth.translation))
        assert np.median(rot_errs) < 1.0
        assert np.median(trans_errs) < 0.005

    def test_reflection_never_returned(self, rng):
        for _ in range(100):
            pts = cloud(rng, 12)
            pts[:, 2] *= 1e-4  # nearly planar invites a reflection fit
            truth = random_transform(rng)
            noisy = truth.apply(pts) + rng.normal(0, 0.002, (12, 3))
            sol = solve_rigid_6dof(keyset(pts), keyset(noisy))
            assert np.linalg.det(sol.transform.rotation) == pytest.approx(1.0,
                                                                          abs=1e-9)

    def test_left_invariance(self, rng):
        pts = cloud(rng, 10)
        truth = random_transform(rng)
        target = truth.apply(pts) + rng.normal(0, 0.005, (10, 3))
        base = solve_rigid_6dof(keyset(pts), keyset(target)).transform
        g = random_transform(rng)
        moved = solve_rigid_6dof(
            keyset(g.apply(pts)), keyset(g.apply(target))
        ).transform
        conjugate = g @ base @ g.inverse()
        assert rotation_error_deg(moved.rotation,
                                  conjugate.rotation) < np.degrees(1e-9)
        np.testing.assert_allclose(moved.translation, conjugate.translation,
                                   atol=1e-9)

    def test_optimality_spot_check(self, rng):
        pts = cloud(rng, 15)
        truth = random_transform(rng)
        noisy = truth.apply(pts) + rng.normal(0, 0.01, (15, 3))
        c1, c2 = keyset(pts), keyset(noisy)
        sol = solve_rigid_6dof(c1, c2)
        assert sol.residual <= weighted_rms(RigidTransform.identity(), c1, c2)
        for _ in range(100):
            assert sol.residual <= weighted_rms(random_transform(rng), c1, c2) + 1e-12

    def test_weight_scale_invariance(self, rng):
        pts = cloud(rng, 8)
        truth = random_transform(rng)
        noisy = truth.apply(pts) + rng.normal(0, 0.01, (8, 3))
        weights = rng.uniform(0.1, 1.0, 8)
        a = solve_rigid_6dof(keyset(pts, weights), keyset(noisy, weights))
        b = solve_rigid_6dof(keyset(pts, 37.5 * weights),
                             keyset(noisy, 37.5 * weights))
        np.testing.assert_allclose(a.transform.rotation, b.transform.rotation,
                                   atol=1e-12)
        np.testing.assert_allclose(a.transform.translation,
                                   b.transform.translation, atol=1e-12)
        assert a.residual == pytest.approx(b.residual, abs=1e-12)

    def test_collinear_raises(self, rng):
        pts = np.outer(np.linspace(0, 1, 6), np.array([1.0, 2.0, 0.5]))
        with pytest.raises(DegenerateConfigurationError):
            solve_rigid_6dof(keyset(pts), keyset(pts + 0.1))

    def test_too_few_points(self, rng):
        pts = cloud(rng, 2)
        with pytest.raises(TooFewPointsError):
            solve_rigid_6dof(keyset(pts), keyset(pts))

    def test_size_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            solve_rigid_6dof(keyset(cloud(rng, 4)), keyset(cloud(rng, 5)))


class TestPlanar4dof:
    def test_identity_on_equal_sets(self, rng):
        pts = cloud(rng, 5)
        sol = solve_planar_4dof(keyset(pts), keyset(pts))
        np.testing.assert_allclose(sol.transform.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(sol.transform.translation, 0, atol=1e-12)

    def test_square_quarter_turn(self):
        square = np.array([[1.0, 1.0, 0.5], [-1.0, 1.0, 0.5],
                           [-1.0, -1.0, 0.5], [1.0, -1.0, 0.5]])
        quarter = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0],
                            [0.0, 0.0, 1.0]])
        sol = solve_planar_4dof(keyset(square), keyset(square @ quarter.T))
        np.testing.assert_allclose(sol.transform.rotation, quarter, atol=1e-9)
        np.testing.assert_allclose(sol.transform.translation, 0, atol=1e-9)
        assert sol.residual == pytest.approx(0.0, abs=1e-9)

    def test_pure_depth_shift(self, rng):
        pts = cloud(rng, 6)
        shifted = pts + np.array([0.0, 0.0, 0.1])
        sol = solve_planar_4dof(keyset(pts), keyset(shifted))
        np.testing.assert_allclose(sol.transform.translation, [0, 0, 0.1],
                                   atol=1e-12)
        np.testing.assert_allclose(sol.transform.rotation, np.eye(3),
                                   atol=1e-12)

    def test_rotation_axis_is_exactly_optical(self, rng):
        for _ in range(20):
            pts = cloud(rng, 7)
            target = cloud(rng, 7)  # unrelated clouds, generic solution
            r = solve_planar_4dof(keyset(pts), keyset(target)).transform.rotation
            assert r[0, 2] == 0.0 and r[1, 2] == 0.0
            assert r[2, 0] == 0.0 and r[2, 1] == 0.0
            assert r[2, 2] == 1.0

    def test_agrees_with_sweep_oracle(self, rng):
        for _ in range(15):
            n = int(rng.integers(3, 12))
            pts = cloud(rng, n)
            yaw = rng.uniform(-np.pi, np.pi)
            c, s = np.cos(yaw), np.sin(yaw)
            rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
            target = pts @ rz.T + rng.uniform(-0.3, 0.3, 3)
            target += rng.normal(0, 0.01, (n, 3))
            weights = rng.uniform(0.1, 1.0, n)
            sol = solve_planar_4dof(keyset(pts, weights),
                                    keyset(target, weights))
            r_ref, t_ref, _ = oracles.planar_fit(pts, target, weights)
            assert rotation_error_deg(sol.transform.rotation, r_ref) < 1e-5
            np.testing.assert_allclose(sol.transform.translation, t_ref,
                                       atol=1e-6)

    def test_coincident_xy_raises(self):
        pts = np.array([[0.5, -0.2, z] for z in (0.3, 0.6, 0.9)])
        with pytest.raises(DegenerateConfigurationError):
            solve_planar_4dof(keyset(pts), keyset(pts + 0.01))

    def test_too_few_points(self, rng):
        with pytest.raises(TooFewPointsError):
            solve_planar_4dof(keyset(cloud(rng, 1)), keyset(cloud(rng, 1)))

    def test_two_points_suffice(self, rng):
        pts = np.array([[0.1, 0.0, 0.5], [-0.1, 0.0, 0.5]])
        sol = solve_planar_4dof(keyset(pts), keyset(pts))
        np.testing.assert_allclose(sol.transform.rotation, np.eye(3),
                                   atol=1e-12)

    def test_mode_dispatch(self, rng):
        pts = cloud(rng, 6)
        c = keyset(pts)
        assert solve_alignment(c, c, "4dof").transform.rotation[2, 2] == 1.0
        assert solve_alignment(c, c, "6dof").residual == pytest.approx(0.0,
                                                                       abs=1e-12)
        with pytest.raises(ValueError):
            solve_alignment(c, c, "5dof")


class TestRansac:
    def _outlier_instance(self, rng, n=20, frac=0.3):
        pts = cloud(rng, n)
        truth = random_transform(rng)
        target = truth.apply(pts)
        n_out = int(frac * n)
        target[:n_out] += rng.uniform(0.3, 0.8, (n_out, 3))
        return keyset(pts), keyset(target), truth, n - n_out

    def test_recovers_despite_outliers(self, rng):
        c1, c2, truth, n_in = self._outlier_instance(rng)
        sol = solve_with_ransac(c1, c2, "6dof")
        assert rotation_error_deg(sol.transform.rotation,
                                  truth.rotation) < np.degrees(1e-6)
        assert np.linalg.norm(sol.transform.translation
                              - truth.translation) < 1e-6
        assert sol.inlier_count == n_in

    def test_plain_fit_is_spoiled_by_the_same_outliers(self, rng):
        c1, c2, truth, _ = self._outlier_instance(rng)
        sol = solve_rigid_6dof(c1, c2)
        assert np.linalg.norm(sol.transform.translation
                              - truth.translation) > 1e-3

    def test_deterministic_for_fixed_seed(self, rng):
        c1, c2, _, _ = self._outlier_instance(rng)
        a = solve_with_ransac(c1, c2, "6dof", RansacConfig(seed=5))
        b = solve_with_ransac(c1, c2, "6dof", RansacConfig(seed=5))
        assert a.transform.rotation.tobytes() == b.transform.rotation.tobytes()
        assert a.transform.translation.tobytes() == \
            b.transform.translation.tobytes()
        assert a.residual == b.residual
        assert a.inlier_count == b.inlier_count

    def test_falls_back_without_consensus(self, rng):
        pts = cloud(rng, 8)
        target = cloud(rng, 8)  # unrelated: no rigid consensus exists
        config = RansacConfig(inlier_threshold=1e-12, iterations=50)
        sol = solve_with_ransac(keyset(pts), keyset(target), "6dof", config)
        ref = solve_rigid_6dof(keyset(pts), keyset(target))
        np.testing.assert_allclose(sol.transform.rotation,
                                   ref.transform.rotation, atol=1e-12)
        assert sol.residual == pytest.approx(ref.residual, abs=1e-12)


class TestBenchmark:
    def test_empty_stats(self):
        stats = alignment_benchmark([], "6dof")
        assert stats.count == 0
        assert np.isnan(stats.median_translation)
        assert np.isnan(stats.mean_rotation_deg)

    def test_identity_pair_scores_zero_error(self, rng):
        import factories

        bundle = factories.make_bundle(rng, grid=4, dim=8)
        depth = np.full((8, 8), 0.7)
        pair = ScenePair(
            features_a=bundle, depth_a=depth,
            features_b=bundle, depth_b=depth,
            intrinsics=CameraIntrinsics(100.0, 100.0, 4.0, 4.0),
            true_transform=RigidTransform.identity(),
        )
        stats = alignment_benchmark([pair, pair], "6dof")
        assert stats.count == 2
        assert stats.median_translation == pytest.approx(0.0, abs=1e-9)
        assert stats.median_rotation_deg == pytest.approx(0.0, abs=1e-7)
