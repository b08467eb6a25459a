#pragma once

// Object-centric generation and validation of 6-DoF grasp labels per
// (object, joint state) pair. Physics simulation is replaced by a 4-check
// kinematic validator: fingertip contact rays, antipodal surface normals,
// gripper-body clearance, and the same checks repeated along a trajectory
// where the grasp is rigidly carried by the moving link.
//
// Grasp frame placement: the gripper pose is offset along its approach
// axis so the sampled surface point sits inside the mouth at a fixed inset
// behind the fingertip plane. The point where the grasp "is" for metric
// purposes (the anchor) is that surface point; the pose translation itself
// is the palm origin, reach - inset behind it.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "artobj.hpp"
#include "geom.hpp"
#include "rng.hpp"

namespace artgrasp {

enum class GraspSource { edge_top, edge_bottom, edge_side, handle };

inline std::string to_string(GraspSource s) {
    switch (s) {
        case GraspSource::edge_top: return "edge_top";
        case GraspSource::edge_bottom: return "edge_bottom";
        case GraspSource::edge_side: return "edge_side";
        default: return "handle";
    }
}

inline GraspSource grasp_source_from_string(const std::string& s) {
    if (s == "edge_top") return GraspSource::edge_top;
    if (s == "edge_bottom") return GraspSource::edge_bottom;
    if (s == "edge_side") return GraspSource::edge_side;
    if (s == "handle") return GraspSource::handle;
    throw std::invalid_argument("unknown grasp source: " + s);
}

enum class GraspVerdict { valid, no_contact, bad_antipodal, collision, trajectory_blocked };

inline std::string to_string(GraspVerdict v) {
    switch (v) {
        case GraspVerdict::valid: return "valid";
        case GraspVerdict::no_contact: return "no_contact";
        case GraspVerdict::bad_antipodal: return "bad_antipodal";
        case GraspVerdict::collision: return "collision";
        default: return "trajectory_blocked";
    }
}

struct ValidationReport {
    GraspVerdict verdict = GraspVerdict::no_contact;
    Vec3 contact_left, contact_right;
    double clearance = 0.0;  // min body-sample SDF at the start state

    bool valid() const { return verdict == GraspVerdict::valid; }
};

struct GraspConfig {
    GripperModel gripper;
    double inset = 0.03;              // surface anchor depth behind the fingertip plane
    double antipodal_cone_deg = 30.0;
    double clearance = 0.002;         // meters
    int trajectory_waypoints = 5;
    double hit_tol = 1e-4;
    int target = 100;
    int min_count = 20;
    int max_count = 500;
    int budget_multiplier = 100;      // candidate samples per requested grasp
};

struct GraspLabel {
    Pose pose;  // object metric frame; translation is the palm origin
    std::string object_id;
    int joint_index = 0;
    double q = 0.0;
    GraspSource source = GraspSource::edge_top;
};

// distance from palm origin to the surface anchor, along approach
inline double anchor_offset(const GraspConfig& cfg) {
    return cfg.gripper.reach() - cfg.inset;
}

inline Vec3 grasp_anchor(const Pose& g, const GraspConfig& cfg) {
    return g.apply({0, 0, anchor_offset(cfg)});
}

struct InsufficientGrasps : std::runtime_error {
    int found;
    InsufficientGrasps(const std::string& what, int found_) :
        std::runtime_error(what), found(found_) {}
};

// ---- orientation families ----

struct OrientationCandidate {
    Quat rotation;  // object frame at joint state q
    GraspSource source;
};

namespace detail {

inline void emit(std::vector<OrientationCandidate>& out, const Quat& link_rot,
                 const Vec3& approach, const Vec3& closing, GraspSource src) {
    Quat r = rotation_from_approach_closing(approach, closing);
    out.push_back({link_rot * r, src});
}

} // namespace detail

// Orientations applicable to a specific link surface point: the gripper
// reaches over whichever free edge (or handle-bar end) the point lies on.
// Points on the broad panel faces admit no enclosure grasp and return {}.
inline std::vector<OrientationCandidate> candidate_orientations(
        const ArticulatedObject& obj, double q, const Vec3& point,
        double face_tol = 2e-3) {
    Pose lp = obj.link_pose(q);
    Vec3 xl = inverse(lp).apply(point);
    if (std::fabs(obj.link_sdf(q, point)) > 1e-2)
        throw std::invalid_argument("candidate point is not on the link surface");

    std::vector<OrientationCandidate> out;
    const Vec3& n = obj.panel_normal;
    const Vec3& w = obj.panel_width_dir;
    const Vec3& h = obj.panel_height_dir;

    // panel-face classification in the semantic frame (link coordinates)
    Vec3 rel = xl - obj.link_panel.center;
    double un = rel.dot(n), uw = rel.dot(w), uh = rel.dot(h);
    const Vec3& he = obj.link_panel.half_extents;
    double hn = std::fabs(he.x * n.x + he.y * n.y + he.z * n.z);
    double hw = std::fabs(he.x * w.x + he.y * w.y + he.z * w.z);
    double hh = std::fabs(he.x * h.x + he.y * h.y + he.z * h.z);

    bool on_panel = std::fabs(un) <= hn + face_tol && std::fabs(uw) <= hw + face_tol &&
                    std::fabs(uh) <= hh + face_tol;
    if (on_panel) {
        if (std::fabs(uh - hh) <= face_tol) {
            // top edge face: reach down over it, close across the slab
            detail::emit(out, lp.rotation, -h, n, GraspSource::edge_top);
            detail::emit(out, lp.rotation, -h, -n, GraspSource::edge_top);
        }
        if (std::fabs(uh + hh) <= face_tol && obj.hinge_edge != HingeEdge::bottom) {
            detail::emit(out, lp.rotation, h, n, GraspSource::edge_bottom);
            detail::emit(out, lp.rotation, h, -n, GraspSource::edge_bottom);
        }
        if (std::fabs(uw - hw) <= face_tol && obj.hinge_edge != HingeEdge::right) {
            detail::emit(out, lp.rotation, -w, n, GraspSource::edge_side);
            detail::emit(out, lp.rotation, -w, -n, GraspSource::edge_side);
        }
        if (std::fabs(uw + hw) <= face_tol && obj.hinge_edge != HingeEdge::left) {
            detail::emit(out, lp.rotation, w, n, GraspSource::edge_side);
            detail::emit(out, lp.rotation, w, -n, GraspSource::edge_side);
        }
    }

    if (obj.handle) {
        Vec3 relh = xl - obj.handle->center;
        const Vec3& a = obj.handle_axis;
        double ua = relh.dot(a);
        const Vec3& hh2 = obj.handle->half_extents;
        double ha = std::fabs(hh2.x * a.x + hh2.y * a.y + hh2.z * a.z);
        // cross directions of the bar
        Vec3 c1 = n, c2 = a.cross(n).normalized();
        double uc1 = relh.dot(c1), uc2 = relh.dot(c2);
        double hc1 = std::fabs(hh2.x * c1.x + hh2.y * c1.y + hh2.z * c1.z);
        double hc2 = std::fabs(hh2.x * c2.x + hh2.y * c2.y + hh2.z * c2.z);
        bool on_bar = std::fabs(uc1) <= hc1 + face_tol && std::fabs(uc2) <= hc2 + face_tol &&
                      std::fabs(ua) <= ha + face_tol;
        if (on_bar) {
            if (std::fabs(ua - ha) <= face_tol) {
                detail::emit(out, lp.rotation, -a, c2, GraspSource::handle);
                detail::emit(out, lp.rotation, -a, -c2, GraspSource::handle);
            }
            if (std::fabs(ua + ha) <= face_tol) {
                detail::emit(out, lp.rotation, a, c2, GraspSource::handle);
                detail::emit(out, lp.rotation, a, -c2, GraspSource::handle);
            }
        }
    }
    return out;
}

// distinct orientation families available anywhere on the object's link
inline int orientation_family_count(const ArticulatedObject& obj) {
    int families = 1;  // top edge is always free in this corpus
    if (obj.hinge_edge != HingeEdge::bottom) ++families;  // bottom edge
    ++families;  // at least one free side edge
    if (obj.handle) ++families;
    return families;
}

// ---- validator ----

using EnvSdf = std::function<double(const Vec3&)>;

namespace detail {

// sphere trace against the link geometry only; a ray origin already inside
// (or touching) the link is interpenetration, not contact
inline bool trace_link(const ArticulatedObject& obj, double q, const Vec3& origin,
                       const Vec3& dir, double max_range, double hit_tol, Vec3& hit) {
    double t = 0.0;
    for (int step = 0; step < 64 && t <= max_range; ++step) {
        Vec3 p = origin + dir * t;
        double d = obj.link_sdf(q, p);
        if (d < hit_tol) {
            if (step == 0) return false;
            hit = p;
            return true;
        }
        t += std::fmax(d, 1e-4);
    }
    return false;
}

// ~50 sample points over the gripper body, excluding the finger contact
// pads and the mouth interior
inline std::vector<Vec3> gripper_body_samples(const GripperModel& g) {
    std::vector<Vec3> pts;
    double hy = 0.5 * g.aperture;
    double pd = g.palm_depth;
    double reach = g.reach();
    double side = 0.012, fin_out = 0.008;

    // body block z in [0, pd]: side faces and back
    for (double z : {0.0, pd * 0.5, pd}) {
        pts.push_back({side, hy + fin_out, z});
        pts.push_back({side, -hy - fin_out, z});
        pts.push_back({-side, hy + fin_out, z});
        pts.push_back({-side, -hy - fin_out, z});
    }
    for (double y : {-hy, -hy * 0.5, 0.0, hy * 0.5, hy})
        pts.push_back({0, y, -0.008});
    pts.push_back({0, 0, -0.03});  // wrist stub

    // palm face between the fingers (mouth bottom)
    for (double y : {-hy * 0.6, 0.0, hy * 0.6}) pts.push_back({0, y, pd});

    // finger outer faces and flanks
    for (int i = 0; i < 5; ++i) {
        double z = pd + (reach - pd) * i / 4.0;
        pts.push_back({0, hy + fin_out, z});
        pts.push_back({0, -hy - fin_out, z});
        pts.push_back({side, hy, z});
        pts.push_back({side, -hy, z});
        pts.push_back({-side, hy, z});
        pts.push_back({-side, -hy, z});
    }
    // fingertip end faces
    pts.push_back({0, hy, reach + 0.002});
    pts.push_back({0, -hy, reach + 0.002});
    return pts;
}

} // namespace detail

// The 45-degree open/close goal rule (prismatic analog: half of the global
// range), with a feasibility fallback. Returns the signed goal delta.
inline double default_goal_delta(double q, const JointSpec& joint) {
    double magnitude, close_threshold;
    if (joint.kind == JointKind::revolute) {
        magnitude = deg2rad(10.0);
        close_threshold = deg2rad(45.0);
    } else {
        magnitude = 0.05 * joint.q_global_max;
        close_threshold = 0.5 * joint.q_global_max;
    }
    bool close = (joint.q_max - q) < close_threshold;
    double delta = close ? -magnitude : magnitude;
    if (q + delta > joint.q_max + 1e-12 || q + delta < joint.q_min - 1e-12)
        delta = -delta;
    return delta;
}

inline ValidationReport validate_grasp(const ArticulatedObject& obj, double q,
                                       const Pose& g, const GraspConfig& cfg,
                                       double goal_delta,
                                       const EnvSdf& env = nullptr) {
    if (q < obj.joint.q_min - 1e-9 || q > obj.joint.q_max + 1e-9 ||
        q + goal_delta < obj.joint.q_min - 1e-9 || q + goal_delta > obj.joint.q_max + 1e-9)
        throw std::out_of_range("joint state or goal outside limits");

    const GripperModel& grip = cfg.gripper;
    double cos_cone = std::cos(deg2rad(cfg.antipodal_cone_deg));
    static const std::vector<Vec3> body_template = detail::gripper_body_samples(GripperModel{});
    std::vector<Vec3> body =
        (grip.aperture == 0.08 && grip.finger_length == 0.05 && grip.palm_depth == 0.06)
            ? body_template
            : detail::gripper_body_samples(grip);

    ValidationReport report;
    report.clearance = 1e30;

    Pose start_link_inv = inverse(obj.link_pose(q));
    int waypoints = std::max(1, cfg.trajectory_waypoints);

    for (int k = 0; k <= waypoints; ++k) {
        double qk = q + goal_delta * k / waypoints;
        Pose gk = k == 0 ? g : compose(compose(obj.link_pose(qk), start_link_inv), g);
        ControlPoints cp = grasp_control_points(gk, grip);
        Vec3 closing = gk.rotation.rotate({0, 1, 0});

        // 1. contact: rays cast inward from both fingertips
        Vec3 hit_l, hit_r;
        bool hl = detail::trace_link(obj, qk, cp[3], -closing, grip.aperture, cfg.hit_tol, hit_l);
        bool hr = detail::trace_link(obj, qk, cp[4], closing, grip.aperture, cfg.hit_tol, hit_r);
        if (!hl || !hr) {
            report.verdict = k == 0 ? GraspVerdict::no_contact : GraspVerdict::trajectory_blocked;
            return report;
        }
        if (k == 0) {
            report.contact_left = hit_l;
            report.contact_right = hit_r;
        }

        // 2. antipodal: surface normals within the cone around the closing axis
        Vec3 nl = obj.link_normal(qk, hit_l);
        Vec3 nr = obj.link_normal(qk, hit_r);
        if (nl.dot(closing) < cos_cone || nr.dot(-closing) < cos_cone) {
            report.verdict = k == 0 ? GraspVerdict::bad_antipodal : GraspVerdict::trajectory_blocked;
            return report;
        }

        // 3. collision: gripper body stays clear of the whole scene
        double min_d = 1e30;
        for (const auto& bp : body) {
            Vec3 p = gk.apply(bp);
            double d = obj.sdf(qk, p);
            if (env) d = std::fmin(d, env(p));
            min_d = std::fmin(min_d, d);
            if (min_d <= cfg.clearance) break;
        }
        if (k == 0) report.clearance = min_d;
        if (min_d <= cfg.clearance) {
            report.verdict = k == 0 ? GraspVerdict::collision : GraspVerdict::trajectory_blocked;
            return report;
        }
    }

    report.verdict = GraspVerdict::valid;
    return report;
}

// ---- generation ----

struct GraspGroup {
    std::string object_id;
    int joint_index = 0;
    double q = 0.0;
    std::vector<GraspLabel> labels;
};

inline GraspGroup generate_grasps(const ArticulatedObject& obj, int joint_index,
                                  const JointStateSet& states, const GraspConfig& cfg,
                                  std::uint64_t seed) {
    if (cfg.target < cfg.min_count || cfg.target > cfg.max_count)
        throw std::invalid_argument("grasp target outside [min_count, max_count]");
    if (joint_index < 0 || joint_index >= static_cast<int>(states.states.size()))
        throw std::out_of_range("joint index outside the state set");

    double q = states.states[joint_index];
    double goal_delta = default_goal_delta(q, obj.joint);
    int budget = cfg.budget_multiplier * cfg.target;

    GraspGroup group;
    group.object_id = obj.id;
    group.joint_index = joint_index;
    group.q = q;

    auto points = sample_surface(obj, q, budget, SurfaceRegion::link_only, seed);
    Rng rng(hash_combine(seed, 0x67726173u));
    double offset = anchor_offset(cfg);

    for (const auto& sp : points) {
        if (static_cast<int>(group.labels.size()) >= cfg.target) break;
        auto candidates = candidate_orientations(obj, q, sp.position);
        if (candidates.empty()) continue;
        const auto& cand = candidates[rng.uniform_index(candidates.size())];
        Pose g{cand.rotation, sp.position - cand.rotation.rotate({0, 0, offset})};
        ValidationReport rep = validate_grasp(obj, q, g, cfg, goal_delta);
        if (!rep.valid()) continue;
        group.labels.push_back({g, obj.id, joint_index, q, cand.source});
    }

    if (static_cast<int>(group.labels.size()) < cfg.min_count)
        throw InsufficientGrasps(
            "only " + std::to_string(group.labels.size()) + " valid grasps for " +
                obj.id + " joint " + std::to_string(joint_index),
            static_cast<int>(group.labels.size()));
    return group;
}

// ---- coverage ----

struct CoverageReport {
    std::map<std::string, int> per_source;
    double coverage = 0.0;  // fraction of 8x8 panel-UV cells holding a grasp
};

inline CoverageReport coverage_report(const ArticulatedObject& obj,
                                      const GraspGroup& group,
                                      const GraspConfig& cfg) {
    if (group.labels.empty())
        throw std::invalid_argument("coverage_report needs a nonempty group");
    CoverageReport rep;
    bool cell[8][8] = {};
    Pose inv_link = inverse(obj.link_pose(group.q));
    const Vec3& w = obj.panel_width_dir;
    const Vec3& h = obj.panel_height_dir;
    const Vec3& he = obj.link_panel.half_extents;
    double hw = std::fabs(he.x * w.x + he.y * w.y + he.z * w.z);
    double hh = std::fabs(he.x * h.x + he.y * h.y + he.z * h.z);

    for (const auto& label : group.labels) {
        rep.per_source[to_string(label.source)] += 1;
        Vec3 anchor = inv_link.apply(grasp_anchor(label.pose, cfg));
        Vec3 rel = anchor - obj.link_panel.center;
        double u = (rel.dot(w) / hw + 1.0) * 0.5;
        double v = (rel.dot(h) / hh + 1.0) * 0.5;
        int cu = std::clamp(static_cast<int>(u * 8.0), 0, 7);
        int cv = std::clamp(static_cast<int>(v * 8.0), 0, 7);
        cell[cv][cu] = true;
    }
    int occupied = 0;
    for (auto& row : cell)
        for (bool c : row) occupied += c ? 1 : 0;
    rep.coverage = occupied / 64.0;
    return rep;
}

// ---- dataset I/O (JSON lines + grouped index) ----

inline nlohmann::json label_to_json(const GraspLabel& l) {
    return {{"object_id", l.object_id},
            {"joint_index", l.joint_index},
            {"q", l.q},
            {"pose", to_json(l.pose)},
            {"source", to_string(l.source)}};
}

inline GraspLabel label_from_json(const nlohmann::json& j) {
    GraspLabel l;
    l.object_id = j.at("object_id").get<std::string>();
    l.joint_index = j.at("joint_index").get<int>();
    l.q = j.at("q").get<double>();
    l.pose = pose_from_json(j.at("pose"));
    l.source = grasp_source_from_string(j.at("source").get<std::string>());
    return l;
}

struct GraspDataset {
    std::vector<GraspGroup> groups;

    const GraspGroup* find(const std::string& object_id, int joint_index) const {
        for (const auto& g : groups)
            if (g.object_id == object_id && g.joint_index == joint_index) return &g;
        return nullptr;
    }

    std::size_t total_labels() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.labels.size();
        return n;
    }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& g : groups)
            for (const auto& l : g.labels) {
                out += label_to_json(l).dump();
                out += '\n';
            }
        return out;
    }

    nlohmann::json index_json() const {
        nlohmann::json idx = nlohmann::json::array();
        for (const auto& g : groups)
            idx.push_back({{"object_id", g.object_id},
                           {"joint_index", g.joint_index},
                           {"q", g.q},
                           {"count", g.labels.size()}});
        return idx;
    }

    static GraspDataset from_jsonl(const std::string& text) {
        GraspDataset ds;
        std::size_t pos = 0;
        std::map<std::pair<std::string, int>, std::size_t> key_to_group;
        while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            if (end > pos) {
                GraspLabel l = label_from_json(nlohmann::json::parse(text.substr(pos, end - pos)));
                auto key = std::make_pair(l.object_id, l.joint_index);
                auto it = key_to_group.find(key);
                if (it == key_to_group.end()) {
                    key_to_group[key] = ds.groups.size();
                    ds.groups.push_back({l.object_id, l.joint_index, l.q, {}});
                    it = key_to_group.find(key);
                }
                ds.groups[it->second].labels.push_back(std::move(l));
            }
            pos = end + 1;
        }
        return ds;
    }
};

} // namespace artgrasp
