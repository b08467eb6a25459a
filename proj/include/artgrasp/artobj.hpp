#pragma once

// Procedural articulated objects: cabinet bodies with one door or drawer
// link, evaluable as analytic SDFs at any joint state. Five families mirror
// common kitchen appliances; all geometry is built from oriented boxes so
// ground-truth signed distances are exact (per box; lower-bound union).

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geom.hpp"
#include "rng.hpp"

namespace artgrasp {

struct OrientedBox {
    Vec3 center;
    Vec3 half_extents;
    Quat rotation;

    // exact signed distance, negative inside
    double sdf(const Vec3& p) const {
        Vec3 local = rotation.conjugate().rotate(p - center);
        Vec3 q = local.cwise_abs() - half_extents;
        Vec3 outside = q.cwise_max(Vec3{0, 0, 0});
        double inside = std::fmin(std::fmax(q.x, std::fmax(q.y, q.z)), 0.0);
        return outside.norm() + inside;
    }

    double face_area(int face) const {
        // faces 0..5: +x,-x,+y,-y,+z,-z
        int axis = face / 2;
        const double h[3] = {half_extents.x, half_extents.y, half_extents.z};
        return 4.0 * h[(axis + 1) % 3] * h[(axis + 2) % 3];
    }

    // uniform point on a face, with its outward normal (both in parent frame)
    void sample_face(int face, double u, double v, Vec3& point, Vec3& normal) const {
        int axis = face / 2;
        double sign = (face % 2 == 0) ? 1.0 : -1.0;
        const double h[3] = {half_extents.x, half_extents.y, half_extents.z};
        double c[3];
        c[axis] = sign * h[axis];
        c[(axis + 1) % 3] = (2.0 * u - 1.0) * h[(axis + 1) % 3];
        c[(axis + 2) % 3] = (2.0 * v - 1.0) * h[(axis + 2) % 3];
        double n[3] = {0, 0, 0};
        n[axis] = sign;
        point = rotation.rotate(Vec3{c[0], c[1], c[2]}) + center;
        normal = rotation.rotate(Vec3{n[0], n[1], n[2]});
    }

    std::array<Vec3, 8> corners() const {
        std::array<Vec3, 8> out;
        int k = 0;
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                for (int sz : {-1, 1})
                    out[k++] = rotation.rotate(Vec3{sx * half_extents.x,
                                                    sy * half_extents.y,
                                                    sz * half_extents.z}) + center;
        return out;
    }
};

enum class JointKind { revolute, prismatic };

inline std::string to_string(JointKind k) {
    return k == JointKind::revolute ? "revolute" : "prismatic";
}

struct JointSpec {
    JointKind kind = JointKind::revolute;
    Vec3 axis{0, 0, 1};      // unit, object frame
    Vec3 origin{0, 0, 0};    // point on the axis (unused for prismatic)
    double q_min = 0.0;
    double q_max = 1.0;
    double q_global_max = 1.0;  // shared per kind across the corpus

    void validate() const {
        if (std::fabs(axis.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("joint axis must be unit length");
        if (!(q_min < q_max))
            throw std::invalid_argument("joint limits must satisfy q_min < q_max");
        if (!(q_global_max >= q_max))
            throw std::invalid_argument("q_global_max must be >= q_max");
    }
};

// Where the door hinge sits relative to the panel (none for drawers).
enum class HingeEdge { none, left, right, bottom };

inline std::string to_string(HingeEdge e) {
    switch (e) {
        case HingeEdge::left: return "left";
        case HingeEdge::right: return "right";
        case HingeEdge::bottom: return "bottom";
        default: return "none";
    }
}

struct ArticulatedObject {
    std::string id;
    std::string family;
    std::vector<OrientedBox> base_parts;
    OrientedBox link_panel;
    std::optional<OrientedBox> handle;
    JointSpec joint;
    double canonical_scale = 1.0;  // canonical = scale * metric

    // panel frame at q = 0, object coordinates
    Vec3 panel_normal{1, 0, 0};      // outward
    Vec3 panel_width_dir{0, 1, 0};
    Vec3 panel_height_dir{0, 0, 1};
    HingeEdge hinge_edge = HingeEdge::none;
    Vec3 handle_axis{0, 0, 1};       // long direction of the bar, if any

    // ---- kinematics ----

    Pose link_pose(double q) const {
        if (q < joint.q_min - 1e-9 || q > joint.q_max + 1e-9)
            throw std::out_of_range("joint state outside limits");
        if (joint.kind == JointKind::prismatic)
            return Pose::from_translation(joint.axis * q);
        Quat r = Quat::from_axis_angle(joint.axis, q);
        return {r, joint.origin - r.rotate(joint.origin)};
    }

    // ---- signed distance ----

    double base_sdf(const Vec3& x) const {
        double d = 1e30;
        for (const auto& b : base_parts) d = std::fmin(d, b.sdf(x));
        return d;
    }

    double link_sdf(double q, const Vec3& x) const {
        Vec3 xl = inverse(link_pose(q)).apply(x);
        double d = link_panel.sdf(xl);
        if (handle) d = std::fmin(d, handle->sdf(xl));
        return d;
    }

    double panel_sdf(double q, const Vec3& x) const {
        return link_panel.sdf(inverse(link_pose(q)).apply(x));
    }

    double sdf(double q, const Vec3& x) const {
        return std::fmin(base_sdf(x), link_sdf(q, x));
    }

    Vec3 sdf_gradient(double q, const Vec3& x, double h = 1e-5) const {
        return Vec3{sdf(q, {x.x + h, x.y, x.z}) - sdf(q, {x.x - h, x.y, x.z}),
                    sdf(q, {x.x, x.y + h, x.z}) - sdf(q, {x.x, x.y - h, x.z}),
                    sdf(q, {x.x, x.y, x.z + h}) - sdf(q, {x.x, x.y, x.z - h})} /
               (2.0 * h);
    }

    // outward normal of the link surface near x (link geometry only)
    Vec3 link_normal(double q, const Vec3& x, double h = 1e-5) const {
        Vec3 g{link_sdf(q, {x.x + h, x.y, x.z}) - link_sdf(q, {x.x - h, x.y, x.z}),
               link_sdf(q, {x.x, x.y + h, x.z}) - link_sdf(q, {x.x, x.y - h, x.z}),
               link_sdf(q, {x.x, x.y, x.z + h}) - link_sdf(q, {x.x, x.y, x.z - h})};
        return g.normalized();
    }

    // axis-aligned bounds over a joint sweep, from box corners
    void bounds(Vec3& lo, Vec3& hi, int sweep = 33) const {
        lo = Vec3{1e30, 1e30, 1e30};
        hi = Vec3{-1e30, -1e30, -1e30};
        auto absorb = [&](const Vec3& p) {
            lo = Vec3{std::fmin(lo.x, p.x), std::fmin(lo.y, p.y), std::fmin(lo.z, p.z)};
            hi = Vec3{std::fmax(hi.x, p.x), std::fmax(hi.y, p.y), std::fmax(hi.z, p.z)};
        };
        for (const auto& b : base_parts)
            for (const auto& c : b.corners()) absorb(c);
        for (int k = 0; k < sweep; ++k) {
            double q = joint.q_min + (joint.q_max - joint.q_min) * k / (sweep - 1);
            Pose lp = link_pose(q);
            for (const auto& c : link_panel.corners()) absorb(lp.apply(c));
            if (handle)
                for (const auto& c : handle->corners()) absorb(lp.apply(c));
        }
    }
};

// ---- spec-level operations ----

struct JointStateSet {
    std::vector<double> states;
};

inline JointStateSet joint_state_set(const ArticulatedObject& obj, int n) {
    if (n < 2 || n > 16)
        throw std::out_of_range("joint state count must be in [2,16]");
    JointStateSet s;
    s.states.reserve(n);
    for (int i = 0; i < n; ++i)
        s.states.push_back(obj.joint.q_min +
                           (obj.joint.q_max - obj.joint.q_min) * i / (n - 1));
    s.states.front() = obj.joint.q_min;
    s.states.back() = obj.joint.q_max;
    return s;
}

inline double normalize_joint(double q, const JointSpec& joint) {
    if (q < -1e-9 || q > joint.q_global_max + 1e-9)
        throw std::out_of_range("joint state outside [0, q_global_max]");
    return std::clamp(q / joint.q_global_max, 0.0, 1.0);
}

enum class SurfaceRegion { whole, link_only };

struct SurfacePoint {
    Vec3 position;
    Vec3 normal;
    int part;   // 0..N-1 base parts, N = panel, N+1 = handle
    int face;   // 0..5 within the part's box
};

// Area-weighted face sampling; points whose union SDF is off-surface
// (inside another part) are rejected and redrawn.
inline std::vector<SurfacePoint> sample_surface(const ArticulatedObject& obj,
                                                double q, int n,
                                                SurfaceRegion region,
                                                std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("need n >= 1 surface points");
    Pose lp = obj.link_pose(q);

    struct FaceRef { const OrientedBox* box; bool moving; int part; int face; };
    std::vector<FaceRef> faces;
    std::vector<double> cumulative;
    double total = 0.0;
    auto add_box = [&](const OrientedBox& b, bool moving, int part) {
        for (int f = 0; f < 6; ++f) {
            faces.push_back({&b, moving, part, f});
            total += b.face_area(f);
            cumulative.push_back(total);
        }
    };
    int n_base = static_cast<int>(obj.base_parts.size());
    if (region == SurfaceRegion::whole)
        for (int i = 0; i < n_base; ++i) add_box(obj.base_parts[i], false, i);
    add_box(obj.link_panel, true, n_base);
    if (obj.handle) add_box(*obj.handle, true, n_base + 1);

    Rng rng(seed);
    std::vector<SurfacePoint> out;
    out.reserve(n);
    int guard = 0;
    while (static_cast<int>(out.size()) < n && guard < 1000 * n) {
        ++guard;
        double r = rng.uniform() * total;
        std::size_t idx = std::lower_bound(cumulative.begin(), cumulative.end(), r) -
                          cumulative.begin();
        if (idx >= faces.size()) idx = faces.size() - 1;
        const FaceRef& fr = faces[idx];
        Vec3 p, nrm;
        fr.box->sample_face(fr.face, rng.uniform(), rng.uniform(), p, nrm);
        if (fr.moving) {
            p = lp.apply(p);
            nrm = lp.apply_direction(nrm);
        }
        double d = region == SurfaceRegion::whole ? obj.sdf(q, p) : obj.link_sdf(q, p);
        if (std::fabs(d) > 1e-4) continue;  // occluded by another part
        out.push_back({p, nrm, fr.part, fr.face});
    }
    if (static_cast<int>(out.size()) < n)
        throw std::runtime_error("surface sampling failed to reach target count");
    return out;
}

inline std::vector<Vec3> surface_points(const ArticulatedObject& obj, double q,
                                        int n, SurfaceRegion region,
                                        std::uint64_t seed) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (const auto& sp : sample_surface(obj, q, n, region, seed))
        pts.push_back(sp.position);
    return pts;
}

// ---- procedural corpus ----

constexpr double kRevoluteGlobalMax = kPi / 2.0;   // radians
constexpr double kPrismaticGlobalMax = 0.18;       // meters

namespace detail {

inline void finalize_scale(ArticulatedObject& obj) {
    Vec3 lo, hi;
    obj.bounds(lo, hi);
    double m = std::fmax(lo.cwise_abs().norm_inf(), hi.cwise_abs().norm_inf());
    obj.canonical_scale = 1.0 / (1.02 * m);
}

// Open-front cabinet shell: bottom, top, left, right, back walls.
inline std::vector<OrientedBox> cabinet_shell(double W, double D, double H, double t) {
    std::vector<OrientedBox> parts;
    auto box = [](Vec3 c, Vec3 h) { return OrientedBox{c, h, Quat::identity()}; };
    parts.push_back(box({0, 0, -H / 2 + t / 2}, {D / 2, W / 2, t / 2}));           // bottom
    parts.push_back(box({0, 0, H / 2 - t / 2}, {D / 2, W / 2, t / 2}));            // top
    parts.push_back(box({0, -W / 2 + t / 2, 0}, {D / 2, t / 2, H / 2 - t}));       // left
    parts.push_back(box({0, W / 2 - t / 2, 0}, {D / 2, t / 2, H / 2 - t}));        // right
    parts.push_back(box({-D / 2 + t / 2, 0, 0}, {t / 2, W / 2 - t, H / 2 - t}));   // back
    return parts;
}

} // namespace detail

// Cabinet with a front door panel hinged left/right/bottom, optional handle bar.
// Panel local frame matches the object frame at q=0: normal +x, width y, height z.
inline ArticulatedObject make_door_object(const std::string& id,
                                          const std::string& family,
                                          HingeEdge hinge, bool with_handle,
                                          double W, double D, double H,
                                          double panel_t, double q_max) {
    ArticulatedObject obj;
    obj.id = id;
    obj.family = family;
    double wall_t = 0.024;
    obj.base_parts = detail::cabinet_shell(W, D, H, wall_t);

    double xf = D / 2;  // cabinet front plane
    obj.link_panel = OrientedBox{{xf + panel_t / 2, 0, 0},
                                 {panel_t / 2, W / 2, H / 2},
                                 Quat::identity()};
    obj.panel_normal = {1, 0, 0};
    obj.panel_width_dir = {0, 1, 0};
    obj.panel_height_dir = {0, 0, 1};
    obj.hinge_edge = hinge;

    obj.joint.kind = JointKind::revolute;
    obj.joint.q_min = 0.0;
    obj.joint.q_max = q_max;
    obj.joint.q_global_max = kRevoluteGlobalMax;
    switch (hinge) {
        case HingeEdge::left:
            obj.joint.axis = {0, 0, -1};
            obj.joint.origin = {xf, -W / 2, 0};
            break;
        case HingeEdge::right:
            obj.joint.axis = {0, 0, 1};
            obj.joint.origin = {xf, W / 2, 0};
            break;
        case HingeEdge::bottom:
            obj.joint.axis = {0, 1, 0};
            obj.joint.origin = {xf, 0, -H / 2};
            break;
        default:
            throw std::invalid_argument("door needs a hinge edge");
    }

    if (with_handle) {
        double bar_w = 0.035;   // across the bar
        double bar_d = 0.05;    // protrusion from the panel
        double x_bar = xf + panel_t + bar_d / 2;
        if (hinge == HingeEdge::bottom) {
            // horizontal bar near the top (free) edge
            double bar_len = std::fmin(0.55 * W, 0.3);
            double z_bar = H / 2 - 0.07;
            obj.handle = OrientedBox{{x_bar, 0, z_bar},
                                     {bar_d / 2, bar_len / 2, bar_w / 2},
                                     Quat::identity()};
            obj.handle_axis = {0, 1, 0};
        } else {
            // vertical bar near the free side edge
            double bar_len = std::fmin(0.55 * H, 0.3);
            double y_bar = (hinge == HingeEdge::left) ? W / 2 - 0.07 : -W / 2 + 0.07;
            obj.handle = OrientedBox{{x_bar, y_bar, 0},
                                     {bar_d / 2, bar_w / 2, bar_len / 2},
                                     Quat::identity()};
            obj.handle_axis = {0, 0, 1};
        }
    }

    obj.joint.validate();
    detail::finalize_scale(obj);
    return obj;
}

inline ArticulatedObject make_drawer_object(const std::string& id,
                                            double W, double D, double H,
                                            double panel_t) {
    ArticulatedObject obj;
    obj.id = id;
    obj.family = "drawer";
    double wall_t = 0.024;
    obj.base_parts = detail::cabinet_shell(W, D, H, wall_t);

    double xf = D / 2;
    obj.link_panel = OrientedBox{{xf + panel_t / 2, 0, 0},
                                 {panel_t / 2, W / 2, H / 2},
                                 Quat::identity()};
    obj.panel_normal = {1, 0, 0};
    obj.panel_width_dir = {0, 1, 0};
    obj.panel_height_dir = {0, 0, 1};
    obj.hinge_edge = HingeEdge::none;

    obj.joint.kind = JointKind::prismatic;
    obj.joint.axis = {1, 0, 0};
    obj.joint.origin = {0, 0, 0};
    obj.joint.q_min = 0.0;
    obj.joint.q_max = kPrismaticGlobalMax;
    obj.joint.q_global_max = kPrismaticGlobalMax;

    obj.joint.validate();
    detail::finalize_scale(obj);
    return obj;
}

// Randomized corpus cycling through the five families.
inline std::vector<ArticulatedObject> generate_corpus(int count, std::uint64_t seed) {
    std::vector<ArticulatedObject> corpus;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        int fam = i % 5;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "obj_%03d", i);
        std::string id(idbuf);
        double q_max = deg2rad(rng.uniform(60.0, 90.0));
        double panel_t = rng.uniform(0.018, 0.024);
        switch (fam) {
            case 0:  // microwave: wide, hinge left, vertical handle
                corpus.push_back(make_door_object(
                    id, "microwave", HingeEdge::left, true,
                    rng.uniform(0.45, 0.58), rng.uniform(0.3, 0.38),
                    rng.uniform(0.3, 0.38), panel_t, q_max));
                break;
            case 1:  // fridge: tall, hinge right, vertical handle
                corpus.push_back(make_door_object(
                    id, "fridge", HingeEdge::right, true,
                    rng.uniform(0.4, 0.5), rng.uniform(0.32, 0.42),
                    rng.uniform(0.52, 0.65), panel_t, q_max));
                break;
            case 2:  // oven: hinge bottom, horizontal handle
                corpus.push_back(make_door_object(
                    id, "oven", HingeEdge::bottom, true,
                    rng.uniform(0.45, 0.56), rng.uniform(0.34, 0.42),
                    rng.uniform(0.4, 0.5), panel_t, q_max));
                break;
            case 3:  // dishwasher: hinge bottom, no handle
                corpus.push_back(make_door_object(
                    id, "dishwasher", HingeEdge::bottom, false,
                    rng.uniform(0.45, 0.56), rng.uniform(0.34, 0.42),
                    rng.uniform(0.42, 0.52), panel_t, q_max));
                break;
            default:  // drawer: prismatic, no handle
                corpus.push_back(make_drawer_object(
                    id, rng.uniform(0.42, 0.55), rng.uniform(0.34, 0.44),
                    rng.uniform(0.24, 0.34), panel_t));
                break;
        }
    }
    return corpus;
}

// ---- JSON serialization ----

inline nlohmann::json to_json(const Vec3& v) { return {v.x, v.y, v.z}; }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json to_json(const Pose& p) {
    return {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z,
            p.translation.x, p.translation.y, p.translation.z};
}

inline Pose pose_from_json(const nlohmann::json& j) {
    return {Quat(j.at(0).get<double>(), j.at(1).get<double>(),
                 j.at(2).get<double>(), j.at(3).get<double>()),
            {j.at(4).get<double>(), j.at(5).get<double>(), j.at(6).get<double>()}};
}

inline nlohmann::json to_json(const OrientedBox& b) {
    return {{"center", to_json(b.center)},
            {"half_extents", to_json(b.half_extents)},
            {"rotation", {b.rotation.w, b.rotation.x, b.rotation.y, b.rotation.z}}};
}

inline OrientedBox box_from_json(const nlohmann::json& j) {
    const auto& q = j.at("rotation");
    return {vec3_from_json(j.at("center")), vec3_from_json(j.at("half_extents")),
            Quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                 q.at(3).get<double>())};
}

inline nlohmann::json to_json(const ArticulatedObject& o) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& b : o.base_parts) parts.push_back(to_json(b));
    nlohmann::json j{
        {"id", o.id},
        {"family", o.family},
        {"base_parts", parts},
        {"link_panel", to_json(o.link_panel)},
        {"joint",
         {{"kind", to_string(o.joint.kind)},
          {"axis", to_json(o.joint.axis)},
          {"origin", to_json(o.joint.origin)},
          {"limits", {o.joint.q_min, o.joint.q_max}},
          {"q_global_max", o.joint.q_global_max}}},
        {"canonical_scale", o.canonical_scale},
        {"panel_normal", to_json(o.panel_normal)},
        {"panel_width_dir", to_json(o.panel_width_dir)},
        {"panel_height_dir", to_json(o.panel_height_dir)},
        {"hinge_edge", to_string(o.hinge_edge)},
        {"handle_axis", to_json(o.handle_axis)}};
    if (o.handle) j["handle"] = to_json(*o.handle);
    return j;
}

inline ArticulatedObject object_from_json(const nlohmann::json& j) {
    ArticulatedObject o;
    o.id = j.at("id").get<std::string>();
    o.family = j.value("family", std::string("unknown"));
    for (const auto& b : j.at("base_parts")) o.base_parts.push_back(box_from_json(b));
    o.link_panel = box_from_json(j.at("link_panel"));
    if (j.contains("handle")) o.handle = box_from_json(j.at("handle"));
    const auto& jj = j.at("joint");
    o.joint.kind = jj.at("kind").get<std::string>() == "prismatic"
                       ? JointKind::prismatic
                       : JointKind::revolute;
    o.joint.axis = vec3_from_json(jj.at("axis"));
    o.joint.origin = vec3_from_json(jj.at("origin"));
    o.joint.q_min = jj.at("limits").at(0).get<double>();
    o.joint.q_max = jj.at("limits").at(1).get<double>();
    o.joint.q_global_max = jj.at("q_global_max").get<double>();
    o.canonical_scale = j.at("canonical_scale").get<double>();
    o.panel_normal = vec3_from_json(j.at("panel_normal"));
    o.panel_width_dir = vec3_from_json(j.at("panel_width_dir"));
    o.panel_height_dir = vec3_from_json(j.at("panel_height_dir"));
    std::string he = j.at("hinge_edge").get<std::string>();
    o.hinge_edge = he == "left" ? HingeEdge::left
                 : he == "right" ? HingeEdge::right
                 : he == "bottom" ? HingeEdge::bottom
                 : HingeEdge::none;
    o.handle_axis = vec3_from_json(j.at("handle_axis"));
    o.joint.validate();
    return o;
}

inline nlohmann::json corpus_to_json(const std::vector<ArticulatedObject>& corpus) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& o : corpus) arr.push_back(to_json(o));
    return arr;
}

inline std::vector<ArticulatedObject> corpus_from_json(const nlohmann::json& arr) {
    std::vector<ArticulatedObject> corpus;
    for (const auto& j : arr) corpus.push_back(object_from_json(j));
    return corpus;
}

} // namespace artgrasp
