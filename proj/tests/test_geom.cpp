#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <artgrasp/geom.hpp>
#include <artgrasp/rng.hpp>

using namespace artgrasp;

namespace {

Quat random_quat(Rng& rng) {
    double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
    return Quat(a, b, c, d);
}

Pose random_pose(Rng& rng) {
    return {random_quat(rng),
            {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}};
}

// independent 4x4 homogeneous-matrix oracle
struct Mat4 {
    double m[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    static Mat4 from_pose(const Pose& p) {
        // Rodrigues-style expansion, written out independently of Quat::to_matrix
        double w = p.rotation.w, x = p.rotation.x, y = p.rotation.y, z = p.rotation.z;
        Mat4 r;
        r.m[0] = w * w + x * x - y * y - z * z;
        r.m[1] = 2 * (x * y - w * z);
        r.m[2] = 2 * (x * z + w * y);
        r.m[4] = 2 * (x * y + w * z);
        r.m[5] = w * w - x * x + y * y - z * z;
        r.m[6] = 2 * (y * z - w * x);
        r.m[8] = 2 * (x * z - w * y);
        r.m[9] = 2 * (y * z + w * x);
        r.m[10] = w * w - x * x - y * y + z * z;
        r.m[3] = p.translation.x;
        r.m[7] = p.translation.y;
        r.m[11] = p.translation.z;
        return r;
    }

    Mat4 operator*(const Mat4& o) const {
        Mat4 r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double s = 0;
                for (int k = 0; k < 4; ++k) s += m[4 * i + k] * o.m[4 * k + j];
                r.m[4 * i + j] = s;
            }
        return r;
    }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z + m[3],
                m[4] * v.x + m[5] * v.y + m[6] * v.z + m[7],
                m[8] * v.x + m[9] * v.y + m[10] * v.z + m[11]};
    }
};

} // namespace

TEST_CASE("quaternion normalization holds after construction") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        Quat q = random_quat(rng);
        CHECK(std::fabs(q.norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("compose with inverse gives identity") {
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
        Pose p = random_pose(rng);
        Pose id = compose(p, inverse(p));
        CHECK(id.rotation.angle() < 1e-9);
        CHECK(id.translation.norm() < 1e-9);
    }
}

TEST_CASE("compose: identity and trivial cases") {
    Rng rng(13);
    Pose p = random_pose(rng);
    Pose ip = compose(Pose::identity(), p);
    CHECK(ip.rotation.angle_to(p.rotation) < 1e-12);
    CHECK((ip.translation - p.translation).norm() < 1e-12);
}

TEST_CASE("compose matches the 4x4 matrix-product oracle") {
    // fixed example: (90 deg about z) . (translate (1,0,0)) applied to origin
    Pose rot{Quat::from_axis_angle({0, 0, 1}, kPi / 2), {0, 0, 0}};
    Pose tr = Pose::from_translation({1, 0, 0});
    Vec3 r = compose(rot, tr).apply({0, 0, 0});
    CHECK(r.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(r.z) < 1e-12);

    Rng rng(14);
    for (int i = 0; i < 200; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng);
        Vec3 x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        Vec3 got = compose(a, b).apply(x);
        Vec3 want = (Mat4::from_pose(a) * Mat4::from_pose(b)).apply(x);
        CHECK((got - want).norm() < 1e-9);
    }
}

TEST_CASE("compose is associative") {
    Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        Pose lhs = compose(compose(a, b), c);
        Pose rhs = compose(a, compose(b, c));
        CHECK(lhs.rotation.angle_to(rhs.rotation) < 1e-9);
        CHECK((lhs.translation - rhs.translation).norm() < 1e-9);
    }
}

TEST_CASE("transform_point basics") {
    CHECK((transform_point(Pose::identity(), {1, 2, 3}) - Vec3{1, 2, 3}).norm() == 0.0);
    CHECK((transform_point(Pose::from_translation({0, 0, 5}), {0, 0, 0}) -
           Vec3{0, 0, 5}).norm() == 0.0);
    Pose flip{Quat::from_axis_angle({0, 0, 1}, kPi), {0, 0, 0}};
    Vec3 r = transform_point(flip, {1, 0, 0});
    CHECK((r - Vec3{-1, 0, 0}).norm() < 1e-12);
}

TEST_CASE("gripper control points: template layout") {
    GripperModel g;
    ControlPoints cp = g.control_points();
    CHECK(cp[0].norm() == 0.0);  // palm origin
    // mirror symmetry across the approach axis
    CHECK(cp[1].y == doctest::Approx(-cp[2].y));
    CHECK(cp[3].y == doctest::Approx(-cp[4].y));
    CHECK(cp[1].z == doctest::Approx(cp[2].z));
    CHECK(cp[3].z == doctest::Approx(g.palm_depth + g.finger_length));
    CHECK_THROWS_AS(GripperModel(0.0, 0.05, 0.06), std::invalid_argument);
}

TEST_CASE("grasp_control_points: identity, shift, finger swap") {
    GripperModel g;
    ControlPoints canonical = g.control_points();

    ControlPoints at_id = grasp_control_points(Pose::identity(), g);
    for (int i = 0; i < 5; ++i) CHECK((at_id[i] - canonical[i]).norm() == 0.0);

    ControlPoints shifted = grasp_control_points(Pose::from_translation({0.1, 0, 0}), g);
    for (int i = 0; i < 5; ++i)
        CHECK((shifted[i] - canonical[i] - Vec3{0.1, 0, 0}).norm() < 1e-12);

    // 180 deg about the approach axis exchanges left/right fingers
    Pose spin{Quat::from_axis_angle({0, 0, 1}, kPi), {0, 0, 0}};
    ControlPoints sp = grasp_control_points(spin, g);
    CHECK((sp[1] - canonical[2]).norm() < 1e-12);
    CHECK((sp[2] - canonical[1]).norm() < 1e-12);
    CHECK((sp[3] - canonical[4]).norm() < 1e-12);
    CHECK((sp[4] - canonical[3]).norm() < 1e-12);
}

TEST_CASE("grasp_control_points commutes with composition") {
    GripperModel g;
    Rng rng(16);
    for (int i = 0; i < 300; ++i) {
        Pose t = random_pose(rng), gr = random_pose(rng);
        ControlPoints lhs = grasp_control_points(compose(t, gr), g);
        ControlPoints rhs = grasp_control_points(gr, g);
        for (int k = 0; k < 5; ++k) {
            CHECK((lhs[k] - t.apply(rhs[k])).norm() < 1e-9);
        }
    }
}

TEST_CASE("control_point_distance: examples and brute-force oracle") {
    GripperModel g;
    ControlPoints a = g.control_points();
    CHECK(control_point_distance(a, a) == 0.0);

    ControlPoints b = a;
    for (auto& p : b) p += Vec3{0.1, 0, 0};
    CHECK(control_point_distance(a, b) == doctest::Approx(0.1).epsilon(1e-12));

    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        ControlPoints u, v;
        for (int k = 0; k < 5; ++k) {
            u[k] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            v[k] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        }
        // scalar loop over all 15 coordinates
        double want = 0;
        for (int k = 0; k < 5; ++k)
            for (int c = 0; c < 3; ++c) want += std::fabs(u[k][c] - v[k][c]);
        want /= 5.0;
        CHECK(control_point_distance(u, v) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("control_point_distance is a pseudometric") {
    Rng rng(18);
    auto rand_cp = [&] {
        ControlPoints c;
        for (auto& p : c) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        return c;
    };
    for (int i = 0; i < 1000; ++i) {
        ControlPoints a = rand_cp(), b = rand_cp(), c = rand_cp();
        double ab = control_point_distance(a, b);
        double ba = control_point_distance(b, a);
        double ac = control_point_distance(a, c);
        double cb = control_point_distance(c, b);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
        CHECK(ab <= ac + cb + 1e-12);
    }
    ControlPoints a = rand_cp();
    CHECK(control_point_distance(a, a) == 0.0);
}

TEST_CASE("rotation_from_two_columns round-trips rotations") {
    Rng rng(19);
    for (int i = 0; i < 200; ++i) {
        Quat q = random_quat(rng);
        Mat3 m = q.to_matrix();
        Quat back = rotation_from_two_columns(m.col(0), m.col(1));
        CHECK(back.angle_to(q) < 1e-9);
    }
}

TEST_CASE("rotation_from_approach_closing builds right-handed frames") {
    Rng rng(20);
    for (int i = 0; i < 200; ++i) {
        Vec3 a{rng.normal(), rng.normal(), rng.normal()};
        Vec3 c{rng.normal(), rng.normal(), rng.normal()};
        if (a.norm() < 1e-3 || a.cross(c).norm() < 1e-3) continue;
        Quat q = rotation_from_approach_closing(a, c);
        Mat3 m = q.to_matrix();
        CHECK(std::fabs(m.det() - 1.0) < 1e-9);
        CHECK((m.col(2) - a.normalized()).norm() < 1e-9);
        CHECK(std::fabs(m.col(1).dot(m.col(2))) < 1e-9);
    }
    CHECK_THROWS(rotation_from_approach_closing({0, 0, 1}, {0, 0, 2}));
}
