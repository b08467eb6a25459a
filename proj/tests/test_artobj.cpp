#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <artgrasp/artobj.hpp>

using namespace artgrasp;

namespace {

// independent box SDF: clamp-projection for the outside distance,
// per-axis slack for the inside distance
double oracle_box_sdf(const OrientedBox& b, const Vec3& p) {
    Vec3 local = b.rotation.conjugate().rotate(p - b.center);
    double ax = std::fabs(local.x), ay = std::fabs(local.y), az = std::fabs(local.z);
    const Vec3& h = b.half_extents;
    if (ax <= h.x && ay <= h.y && az <= h.z)
        return -std::fmin(h.x - ax, std::fmin(h.y - ay, h.z - az));
    double cx = std::clamp(local.x, -h.x, h.x);
    double cy = std::clamp(local.y, -h.y, h.y);
    double cz = std::clamp(local.z, -h.z, h.z);
    return (local - Vec3{cx, cy, cz}).norm();
}

double oracle_object_sdf(const ArticulatedObject& obj, double q, const Vec3& x) {
    double d = 1e30;
    for (const auto& b : obj.base_parts) d = std::fmin(d, oracle_box_sdf(b, x));
    Pose lp = obj.link_pose(q);
    Vec3 xl = inverse(lp).apply(x);
    d = std::fmin(d, oracle_box_sdf(obj.link_panel, xl));
    if (obj.handle) d = std::fmin(d, oracle_box_sdf(*obj.handle, xl));
    return d;
}

ArticulatedObject test_door() {
    return make_door_object("door0", "microwave", HingeEdge::left, true,
                            0.5, 0.34, 0.34, 0.02, deg2rad(80));
}

} // namespace

TEST_CASE("joint_state_set: even splits including both limits") {
    ArticulatedObject obj = test_door();
    obj.joint.q_min = 0;
    obj.joint.q_max = deg2rad(90);
    obj.joint.q_global_max = deg2rad(90);
    auto s = joint_state_set(obj, 10);
    REQUIRE(s.states.size() == 10);
    for (int i = 0; i < 10; ++i)
        CHECK(s.states[i] == doctest::Approx(deg2rad(10.0 * i)).epsilon(1e-12));

    obj.joint.q_max = 1.0;
    obj.joint.q_global_max = 1.0;
    auto s2 = joint_state_set(obj, 2);
    CHECK(s2.states == std::vector<double>{0.0, 1.0});

    obj.joint.q_min = 0.2;
    obj.joint.q_max = 0.8;
    auto s4 = joint_state_set(obj, 4);
    REQUIRE(s4.states.size() == 4);
    CHECK(s4.states[0] == doctest::Approx(0.2));
    CHECK(s4.states[1] == doctest::Approx(0.4));
    CHECK(s4.states[2] == doctest::Approx(0.6));
    CHECK(s4.states[3] == doctest::Approx(0.8));

    CHECK_THROWS_AS(joint_state_set(obj, 1), std::out_of_range);
    CHECK_THROWS_AS(joint_state_set(obj, 17), std::out_of_range);
}

TEST_CASE("link_pose: identity at q=0, revolute and prismatic motion") {
    ArticulatedObject obj = test_door();

    Pose p0 = obj.link_pose(0.0);
    CHECK(p0.rotation.angle() < 1e-12);
    CHECK(p0.translation.norm() < 1e-12);

    // revolute about z through the origin
    ArticulatedObject rev = obj;
    rev.joint.axis = {0, 0, 1};
    rev.joint.origin = {0, 0, 0};
    rev.joint.q_max = kPi / 2;
    Vec3 moved = rev.link_pose(kPi / 2).apply({1, 0, 0});
    CHECK((moved - Vec3{0, 1, 0}).norm() < 1e-12);

    ArticulatedObject pri = obj;
    pri.joint.kind = JointKind::prismatic;
    pri.joint.axis = {1, 0, 0};
    pri.joint.q_max = 0.5;
    pri.joint.q_global_max = 0.5;
    Pose lp = pri.link_pose(0.3);
    CHECK(lp.rotation.angle() < 1e-12);
    CHECK((lp.translation - Vec3{0.3, 0, 0}).norm() < 1e-12);

    CHECK_THROWS_AS(obj.link_pose(obj.joint.q_max + 0.1), std::out_of_range);
}

TEST_CASE("sdf: box center depth and on-surface zeros") {
    ArticulatedObject obj = test_door();
    const OrientedBox& bottom = obj.base_parts[0];
    double d = bottom.sdf(bottom.center);
    double want = -std::fmin(bottom.half_extents.x,
                             std::fmin(bottom.half_extents.y, bottom.half_extents.z));
    CHECK(d == doctest::Approx(want).epsilon(1e-12));

    // point on the panel's outer face at q=0
    Vec3 on_panel = obj.link_panel.center +
                    Vec3{obj.link_panel.half_extents.x, 0.01, 0.02};
    CHECK(std::fabs(obj.panel_sdf(0.0, on_panel)) < 1e-9);
}

TEST_CASE("sdf matches the per-part oracle on 10k random points") {
    ArticulatedObject obj = test_door();
    Rng rng(31);
    for (int i = 0; i < 10000; ++i) {
        double q = rng.uniform(0, obj.joint.q_max);
        Vec3 x{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        double got = obj.sdf(q, x);
        double want = oracle_object_sdf(obj, q, x);
        CHECK(std::fabs(got - want) < 1e-9);
    }
}

TEST_CASE("surface_points: on-surface, restricted region, deterministic") {
    ArticulatedObject obj = test_door();
    double q = deg2rad(40);

    auto pts = surface_points(obj, q, 500, SurfaceRegion::whole, 7);
    REQUIRE(pts.size() == 500);
    for (const auto& p : pts) CHECK(std::fabs(obj.sdf(q, p)) < 1e-3);

    auto link_pts = surface_points(obj, q, 500, SurfaceRegion::link_only, 8);
    for (const auto& p : link_pts) CHECK(std::fabs(obj.link_sdf(q, p)) < 1e-3);

    auto again = surface_points(obj, q, 500, SurfaceRegion::whole, 7);
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK((pts[i] - again[i]).norm() == 0.0);
}

TEST_CASE("normalize_joint: endpoints, midpoint, range errors") {
    JointSpec j;
    j.kind = JointKind::revolute;
    j.q_min = 0;
    j.q_max = kPi / 2;
    j.q_global_max = kPi / 2;
    CHECK(normalize_joint(0.0, j) == 0.0);
    CHECK(normalize_joint(j.q_global_max, j) == 1.0);
    CHECK(normalize_joint(kPi / 4, j) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(normalize_joint(-0.1, j), std::out_of_range);
    CHECK_THROWS_AS(normalize_joint(kPi, j), std::out_of_range);
}

TEST_CASE("sdf is 1-Lipschitz on random pairs") {
    ArticulatedObject obj = test_door();
    Rng rng(32);
    double q = deg2rad(35);
    for (int i = 0; i < 10000; ++i) {
        Vec3 a{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        Vec3 b{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        CHECK(std::fabs(obj.sdf(q, a) - obj.sdf(q, b)) <= (a - b).norm() + 1e-6);
    }
}

TEST_CASE("moving the joint leaves base-dominated points unchanged") {
    ArticulatedObject obj = test_door();
    double q1 = deg2rad(5), q2 = deg2rad(70);
    Rng rng(33);
    auto base_pts = sample_surface(obj, 0.0, 4000, SurfaceRegion::whole, 34);
    int checked = 0;
    for (const auto& sp : base_pts) {
        Vec3 x = sp.position + sp.normal * 0.02;
        // require clearance from the link at every swept state
        double min_link = 1e30;
        for (int k = 0; k <= 16; ++k) {
            double q = obj.joint.q_min + (obj.joint.q_max - obj.joint.q_min) * k / 16.0;
            min_link = std::fmin(min_link, obj.link_sdf(q, x));
        }
        if (min_link < 0.05) continue;
        ++checked;
        CHECK(std::fabs(obj.sdf(q1, x) - obj.sdf(q2, x)) < 1e-9);
    }
    CHECK(checked > 100);
}

TEST_CASE("corpus: canonical containment across all joint states") {
    auto corpus = generate_corpus(8, 2024);
    REQUIRE(corpus.size() == 8);
    for (const auto& obj : corpus) {
        auto states = joint_state_set(obj, 8);
        for (double q : states.states) {
            auto pts = surface_points(obj, q, 10000, SurfaceRegion::whole, 35);
            double worst = 0;
            for (const auto& p : pts)
                worst = std::fmax(worst, (p * obj.canonical_scale).norm_inf());
            CHECK(worst <= 1.0);
        }
    }
}

TEST_CASE("corpus: panel and handle touch but do not penetrate the base at q=0") {
    auto corpus = generate_corpus(8, 99);
    for (const auto& obj : corpus) {
        auto pts = sample_surface(obj, 0.0, 2000, SurfaceRegion::link_only, 36);
        for (const auto& sp : pts)
            CHECK(obj.base_sdf(sp.position) >= -1e-4);
    }
}

TEST_CASE("corpus JSON round trip preserves geometry and is stable") {
    auto corpus = generate_corpus(5, 7);
    nlohmann::json j = corpus_to_json(corpus);
    auto back = corpus_from_json(j);
    REQUIRE(back.size() == corpus.size());
    Rng rng(37);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].id == corpus[i].id);
        CHECK(back[i].canonical_scale == doctest::Approx(corpus[i].canonical_scale));
        for (int k = 0; k < 200; ++k) {
            double q = rng.uniform(corpus[i].joint.q_min, corpus[i].joint.q_max);
            Vec3 x{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)};
            CHECK(back[i].sdf(q, x) == doctest::Approx(corpus[i].sdf(q, x)).epsilon(1e-12));
        }
    }
    CHECK(corpus_to_json(back).dump() == j.dump());
}
