#pragma once

// Random multi-object scenes on a floor plane, sphere-traced depth and
// normal-shaded rendering with a parametric depth-noise model, and the
// per-pixel ground-truth maps (heatmap, pose, shape code, joint code) the
// encoder trains against.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "artobj.hpp"
#include "geom.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "sgdf.hpp"

namespace artgrasp {

struct PlacedObject {
    std::string object_id;
    Pose world_pose;       // object frame -> world
    int joint_index = 0;
    double q = 0.0;
};

struct SceneSpec {
    std::vector<PlacedObject> objects;
    double room_half_x = 1.2, room_half_y = 1.2;
    bool walls = true;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : objects)
            arr.push_back({{"object_id", p.object_id},
                           {"pose", artgrasp::to_json(p.world_pose)},
                           {"joint_index", p.joint_index},
                           {"q", p.q}});
        return {{"objects", arr},
                {"room_half_x", room_half_x},
                {"room_half_y", room_half_y},
                {"walls", walls}};
    }

    static SceneSpec from_json(const nlohmann::json& j) {
        SceneSpec s;
        s.room_half_x = j.at("room_half_x").get<double>();
        s.room_half_y = j.at("room_half_y").get<double>();
        s.walls = j.at("walls").get<bool>();
        for (const auto& pj : j.at("objects"))
            s.objects.push_back({pj.at("object_id").get<std::string>(),
                                 pose_from_json(pj.at("pose")),
                                 pj.at("joint_index").get<int>(),
                                 pj.at("q").get<double>()});
        return s;
    }
};

struct Camera {
    double fx = 120, fy = 120, cx = 48, cy = 48;
    int width = 96, height = 96;
    Pose pose;  // camera -> world; +z forward, +x right, +y down

    void validate() const {
        if (fx <= 0 || fy <= 0) throw std::invalid_argument("focal lengths must be positive");
        if (cx < 0 || cx > width || cy < 0 || cy > height)
            throw std::invalid_argument("principal point outside the image");
    }

    // unit ray direction through pixel center, camera frame
    Vec3 pixel_ray(int u, int v) const {
        return Vec3{(u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0}.normalized();
    }

    nlohmann::json to_json() const {
        return {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy},
                {"width", width}, {"height", height},
                {"pose", artgrasp::to_json(pose)}};
    }

    static Camera from_json(const nlohmann::json& j) {
        Camera c;
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.pose = pose_from_json(j.at("pose"));
        c.validate();
        return c;
    }
};

struct RenderedFrame {
    int width = 0, height = 0;
    std::vector<float> depth;      // z-depth meters, 0 = no hit
    std::vector<float> shaded;     // [0,1]
    std::vector<float> incidence;  // |normal . view| at hits, 0 elsewhere
    std::vector<int> instance;     // 0 background, i+1 for scene object i

    std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

// Resolved scene: objects bound to their corpus geometry.
class SceneContext {
public:
    SceneContext(const SceneSpec& spec, const std::vector<ArticulatedObject>& corpus)
        : spec_(spec) {
        for (const auto& p : spec.objects) {
            const ArticulatedObject* found = nullptr;
            for (const auto& o : corpus)
                if (o.id == p.object_id) {
                    found = &o;
                    break;
                }
            if (!found) throw std::invalid_argument("scene references unknown object " +
                                                    p.object_id);
            objects_.push_back(found);
            world_from_object_.push_back(p.world_pose);
            object_from_world_.push_back(inverse(p.world_pose));
        }
    }

    const SceneSpec& spec() const { return spec_; }
    int count() const { return static_cast<int>(objects_.size()); }
    const ArticulatedObject& object(int i) const { return *objects_[i]; }
    const Pose& world_pose(int i) const { return world_from_object_[i]; }

    // signed distance of scene object i at a world point
    double object_sdf(int i, const Vec3& w) const {
        return objects_[i]->sdf(spec_.objects[i].q, object_from_world_[i].apply(w));
    }

    double static_sdf(const Vec3& w) const {
        double d = w.z;  // floor half-space
        if (spec_.walls) {
            d = std::fmin(d, spec_.room_half_x - w.x);
            d = std::fmin(d, spec_.room_half_y - std::fabs(w.y));
        }
        return d;
    }

    // full scene SDF; instance (if given) receives 0 for background geometry
    // or i+1 for the closest object
    double sdf(const Vec3& w, int* instance = nullptr) const {
        double best = static_sdf(w);
        if (instance) *instance = 0;
        for (int i = 0; i < count(); ++i) {
            double d = object_sdf(i, w);
            if (d < best) {
                best = d;
                if (instance) *instance = i + 1;
            }
        }
        return best;
    }

    // scene minus one object, for collision environments
    double sdf_excluding(const Vec3& w, int skip) const {
        double best = static_sdf(w);
        for (int i = 0; i < count(); ++i)
            if (i != skip) best = std::fmin(best, object_sdf(i, w));
        return best;
    }

private:
    SceneSpec spec_;
    std::vector<const ArticulatedObject*> objects_;
    std::vector<Pose> world_from_object_;
    std::vector<Pose> object_from_world_;
};

// ---- scene generation ----

struct SceneGenConfig {
    int min_objects = 1, max_objects = 3;
    double clearance = 0.02;
    bool walls = true;
    double room_half_x = 1.2, room_half_y = 1.2;
    int placement_budget = 200;
    std::vector<int> allowed_joint_indices;  // empty = all
    int joint_states_per_object = 8;
};

inline SceneSpec generate_scene(const std::vector<ArticulatedObject>& corpus,
                                const SceneGenConfig& cfg, std::uint64_t seed) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    Rng rng(seed);
    SceneSpec scene;
    scene.walls = cfg.walls;
    scene.room_half_x = cfg.room_half_x;
    scene.room_half_y = cfg.room_half_y;

    int want = cfg.min_objects +
               static_cast<int>(rng.uniform_index(cfg.max_objects - cfg.min_objects + 1));

    // conservative world AABBs: a gap between boxes bounds the cross SDF
    struct WorldBox { Vec3 lo, hi; };
    auto world_box = [](const ArticulatedObject& obj, const Pose& pose) {
        Vec3 lo, hi;
        obj.bounds(lo, hi);
        Vec3 wlo{1e30, 1e30, 1e30}, whi{-1e30, -1e30, -1e30};
        for (int c = 0; c < 8; ++c) {
            Vec3 corner{(c & 1) ? hi.x : lo.x, (c & 2) ? hi.y : lo.y,
                        (c & 4) ? hi.z : lo.z};
            Vec3 w = pose.apply(corner);
            wlo = {std::fmin(wlo.x, w.x), std::fmin(wlo.y, w.y), std::fmin(wlo.z, w.z)};
            whi = {std::fmax(whi.x, w.x), std::fmax(whi.y, w.y), std::fmax(whi.z, w.z)};
        }
        return WorldBox{wlo, whi};
    };
    auto separated = [&](const WorldBox& a, const WorldBox& b, double gap) {
        return a.lo.x > b.hi.x + gap || b.lo.x > a.hi.x + gap ||
               a.lo.y > b.hi.y + gap || b.lo.y > a.hi.y + gap;
    };
    std::vector<WorldBox> placed_boxes;

    for (int tries = 0; tries < cfg.placement_budget &&
                        static_cast<int>(scene.objects.size()) < want; ++tries) {
        const ArticulatedObject& obj = corpus[rng.uniform_index(corpus.size())];
        auto states = joint_state_set(obj, cfg.joint_states_per_object);
        int ji;
        if (cfg.allowed_joint_indices.empty())
            ji = static_cast<int>(rng.uniform_index(states.states.size()));
        else
            ji = cfg.allowed_joint_indices[rng.uniform_index(cfg.allowed_joint_indices.size())];
        double q = states.states[ji];

        Vec3 lo, hi;
        obj.bounds(lo, hi);
        double yaw = rng.uniform(-kPi, kPi);
        Pose pose{Quat::from_axis_angle({0, 0, 1}, yaw),
                  {rng.uniform(-cfg.room_half_x * 0.55, cfg.room_half_x * 0.55),
                   rng.uniform(-cfg.room_half_y * 0.55, cfg.room_half_y * 0.55),
                   -lo.z}};  // base rests on the floor

        WorldBox box = world_box(obj, pose);
        bool clear = true;
        for (const auto& other : placed_boxes)
            if (!separated(box, other, cfg.clearance)) {
                clear = false;
                break;
            }
        if (!clear) continue;

        scene.objects.push_back({obj.id, pose, ji, q});
        placed_boxes.push_back(box);
    }

    if (scene.objects.empty())
        throw std::runtime_error("scene placement failed within budget");
    return scene;
}

// camera on the front hemisphere, looking at the scene centroid
inline Camera sample_camera(const SceneSpec& scene, int width, int height,
                            Rng& rng) {
    Vec3 target{0, 0, 0.25};
    if (!scene.objects.empty()) {
        target = {0, 0, 0};
        for (const auto& o : scene.objects) target += o.world_pose.translation;
        target = target / static_cast<double>(scene.objects.size());
        target.z = std::fmax(0.2, target.z);
    }
    double azimuth = rng.uniform(kPi * 0.6, kPi * 1.4);  // toward -x (cabinet fronts)
    double elevation = rng.uniform(deg2rad(15), deg2rad(45));
    double dist = rng.uniform(1.3, 2.1);
    Vec3 offset{std::cos(azimuth) * std::cos(elevation) * dist,
                std::sin(azimuth) * std::cos(elevation) * dist,
                std::sin(elevation) * dist};
    Vec3 eye = target + offset;

    Vec3 fwd = (target - eye).normalized();
    Vec3 up{0, 0, 1};
    Vec3 right = fwd.cross(up).normalized();
    Vec3 down = fwd.cross(right).normalized();
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.fx = cam.fy = width * 1.25;
    cam.pose = {Quat::from_matrix(Mat3::from_columns(right, down, fwd)), eye};
    cam.validate();
    return cam;
}

// ---- rendering ----

struct RenderConfig {
    int max_steps = 128;
    double hit_tol = 1e-4;
    double max_range = 10.0;
    Vec3 light_dir{-0.4, 0.25, 0.88};  // normalized below
};

inline RenderedFrame render(const SceneContext& scene, const Camera& camera,
                            const RenderConfig& cfg = {}) {
    camera.validate();
    RenderedFrame frame;
    frame.width = camera.width;
    frame.height = camera.height;
    std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
    frame.depth.assign(n, 0.0f);
    frame.shaded.assign(n, 0.0f);
    frame.incidence.assign(n, 0.0f);
    frame.instance.assign(n, 0);
    Vec3 light = cfg.light_dir.normalized();

    for (int v = 0; v < camera.height; ++v) {
        for (int u = 0; u < camera.width; ++u) {
            Vec3 dir_cam = camera.pixel_ray(u, v);
            Vec3 dir = camera.pose.apply_direction(dir_cam);
            Vec3 origin = camera.pose.translation;
            double t = 0.0;
            int inst = 0;
            bool hit = false;
            for (int step = 0; step < cfg.max_steps; ++step) {
                Vec3 p = origin + dir * t;
                double d = scene.sdf(p, &inst);
                if (d < cfg.hit_tol) {
                    hit = true;
                    break;
                }
                t += d;
                if (t > cfg.max_range) break;
            }
            if (!hit) continue;
            Vec3 p = origin + dir * t;
            const double h = 1e-4;
            Vec3 grad{scene.sdf({p.x + h, p.y, p.z}) - scene.sdf({p.x - h, p.y, p.z}),
                      scene.sdf({p.x, p.y + h, p.z}) - scene.sdf({p.x, p.y - h, p.z}),
                      scene.sdf({p.x, p.y, p.z + h}) - scene.sdf({p.x, p.y, p.z - h})};
            Vec3 normal = grad.norm() > 1e-12 ? grad.normalized() : -dir;
            std::size_t i = frame.idx(u, v);
            frame.depth[i] = static_cast<float>(t * dir_cam.z);  // z-depth
            frame.shaded[i] = static_cast<float>(
                std::clamp(0.5 + 0.5 * normal.dot(light), 0.0, 1.0));
            frame.incidence[i] = static_cast<float>(std::fabs(normal.dot(-dir)));
            frame.instance[i] = inst;
        }
    }
    return frame;
}

inline Vec3 backproject(const Camera& camera, int u, int v, double z_depth) {
    Vec3 p_cam{(u + 0.5 - camera.cx) / camera.fx * z_depth,
               (v + 0.5 - camera.cy) / camera.fy * z_depth, z_depth};
    return camera.pose.apply(p_cam);
}

// ---- depth noise ----

struct DepthNoiseConfig {
    double sigma0 = 0.003;
    double sigma1 = 0.002;          // sigma = sigma0 + sigma1 * depth^2
    double grazing_threshold = 0.2; // |normal . view| below this may drop out
    double grazing_drop_prob = 0.5;
    bool enabled = true;
};

inline std::vector<float> add_depth_noise(const std::vector<float>& depth,
                                          const std::vector<float>& incidence,
                                          const DepthNoiseConfig& cfg,
                                          std::uint64_t seed) {
    if (depth.size() != incidence.size())
        throw std::invalid_argument("depth/incidence size mismatch");
    std::vector<float> out(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        float d = depth[i];
        if (d <= 0.0f || !cfg.enabled) {
            out[i] = cfg.enabled ? 0.0f : d;
            continue;
        }
        if (incidence[i] < cfg.grazing_threshold &&
            hashed_uniform(seed ^ 0xdeadULL, i) < cfg.grazing_drop_prob) {
            out[i] = 0.0f;
            continue;
        }
        double sigma = cfg.sigma0 + cfg.sigma1 * static_cast<double>(d) * d;
        out[i] = static_cast<float>(d + sigma * hashed_normal(seed, i));
    }
    return out;
}

// ---- ground-truth target maps ----

struct TargetMaps {
    int width = 0, height = 0;
    std::vector<float> heat;    // H*W
    std::vector<float> pose;    // H*W*10: translation 3, rot columns 6, scale 1
    std::vector<float> shape;   // H*W*32
    std::vector<float> joint;   // H*W
    std::vector<int> mask;      // instance ids, 0 background
    std::vector<std::pair<int, int>> centers;  // (row, col) per instance, -1 if empty

    std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

inline TargetMaps make_target_maps(const SceneContext& scene, const Camera& camera,
                                   const RenderedFrame& frame,
                                   const ShapeCodeTable& codes) {
    TargetMaps maps;
    maps.width = frame.width;
    maps.height = frame.height;
    std::size_t n = frame.depth.size();
    maps.heat.assign(n, 0.0f);
    maps.pose.assign(n * 10, 0.0f);
    maps.shape.assign(n * 32, 0.0f);
    maps.joint.assign(n, 0.0f);
    maps.mask.assign(frame.instance.begin(), frame.instance.end());
    maps.centers.assign(scene.count(), {-1, -1});

    Pose cam_from_world = inverse(camera.pose);

    for (int oi = 0; oi < scene.count(); ++oi) {
        // mask centroid and second moments
        double su = 0, sv = 0;
        long count = 0;
        for (int v = 0; v < frame.height; ++v)
            for (int u = 0; u < frame.width; ++u)
                if (frame.instance[frame.idx(u, v)] == oi + 1) {
                    su += u;
                    sv += v;
                    ++count;
                }
        if (count == 0) continue;  // fully occluded: skipped
        double mu_u = su / count, mu_v = sv / count;
        double cuu = 0, cvv = 0, cuv = 0;
        for (int v = 0; v < frame.height; ++v)
            for (int u = 0; u < frame.width; ++u)
                if (frame.instance[frame.idx(u, v)] == oi + 1) {
                    cuu += (u - mu_u) * (u - mu_u);
                    cvv += (v - mu_v) * (v - mu_v);
                    cuv += (u - mu_u) * (v - mu_v);
                }
        cuu = cuu / count * 0.25 + 0.5;  // scaled moments, regularized
        cvv = cvv / count * 0.25 + 0.5;
        cuv = cuv / count * 0.25;

        int cu = std::clamp(static_cast<int>(std::lround(mu_u)), 0, frame.width - 1);
        int cv = std::clamp(static_cast<int>(std::lround(mu_v)), 0, frame.height - 1);
        maps.centers[oi] = {cv, cu};

        // gaussian with peak exactly 1 at the designated center pixel
        double det = cuu * cvv - cuv * cuv;
        double iuu = cvv / det, ivv = cuu / det, iuv = -cuv / det;
        for (int v = 0; v < frame.height; ++v)
            for (int u = 0; u < frame.width; ++u) {
                double du = u - cu, dv = v - cv;
                double e = 0.5 * (iuu * du * du + 2 * iuv * du * dv + ivv * dv * dv);
                float g = static_cast<float>(std::exp(-e));
                std::size_t i = maps.idx(u, v);
                if (g > maps.heat[i]) maps.heat[i] = g;  // max composite
            }

        // per-pixel pose/shape/joint supervision on object pixels
        const PlacedObject& placed = scene.spec().objects[oi];
        Pose cam_from_obj = compose(cam_from_world, placed.world_pose);
        Mat3 rm = cam_from_obj.rotation.to_matrix();
        const ArticulatedObject& obj = scene.object(oi);
        float zj = static_cast<float>(normalize_joint(placed.q, obj.joint));
        const ShapeCode& code = codes.at(placed.object_id);
        float pose_vec[10] = {
            static_cast<float>(cam_from_obj.translation.x),
            static_cast<float>(cam_from_obj.translation.y),
            static_cast<float>(cam_from_obj.translation.z),
            static_cast<float>(rm(0, 0)), static_cast<float>(rm(1, 0)),
            static_cast<float>(rm(2, 0)), static_cast<float>(rm(0, 1)),
            static_cast<float>(rm(1, 1)), static_cast<float>(rm(2, 1)),
            static_cast<float>(obj.canonical_scale)};
        for (std::size_t i = 0; i < n; ++i) {
            if (maps.mask[i] != oi + 1) continue;
            for (int k = 0; k < 10; ++k) maps.pose[i * 10 + k] = pose_vec[k];
            for (int k = 0; k < 32; ++k)
                maps.shape[i * 32 + k] = static_cast<float>(code[k]);
            maps.joint[i] = zj;
        }
    }
    return maps;
}

} // namespace artgrasp
