#pragma once

// SR/RSR metrics and the evaluation harness. SR runs the kinematic grasp
// validator along a carried trajectory and asks whether the joint moved by
// at least the threshold toward the goal picked by the 45-degree rule; RSR
// asks whether the predicted grasp position lands within 10% of the initial
// distance of any ground-truth label.

#include <map>
#include <string>
#include <vector>

#include "grasp.hpp"
#include "pipeline.hpp"
#include "scene.hpp"

namespace artgrasp {

enum class GoalDirection { open, close };

struct GoalSpec {
    GoalDirection direction = GoalDirection::open;
    double target_delta = 0.0;  // signed joint delta
};

// close when the gap to the max state is under 45 degrees (prismatic
// analog: half the global range)
inline GoalSpec goal_for(double q, const JointSpec& joint) {
    if (q < joint.q_min - 1e-9 || q > joint.q_max + 1e-9)
        throw std::out_of_range("joint state outside limits");
    GoalSpec goal;
    double magnitude, close_threshold;
    if (joint.kind == JointKind::revolute) {
        magnitude = deg2rad(10.0);
        close_threshold = deg2rad(45.0);
    } else {
        magnitude = 0.05 * joint.q_global_max;
        close_threshold = 0.5 * joint.q_global_max;
    }
    bool close = (joint.q_max - q) < close_threshold;
    goal.direction = close ? GoalDirection::close : GoalDirection::open;
    goal.target_delta = close ? -magnitude : magnitude;
    return goal;
}

inline double success_threshold(const JointSpec& joint) {
    return joint.kind == JointKind::revolute ? deg2rad(10.0)
                                             : 0.05 * joint.q_global_max;
}

inline bool success(double moved, const JointSpec& joint) {
    if (moved < 0) throw std::invalid_argument("moved amount must be >= 0");
    return moved >= success_threshold(joint) - 1e-9;
}

// largest |dq| <= |target| for which the carried validator passes, by
// bisection to 0.5 deg / 1 mm; 0 when the initial attachment fails
inline double execute_grasp(const ArticulatedObject& obj, double q, const Pose& g_object,
                            const GoalSpec& goal, const GraspConfig& cfg,
                            const EnvSdf& env = nullptr) {
    double sign = goal.target_delta < 0 ? -1.0 : 1.0;
    double want = std::fabs(goal.target_delta);
    double headroom = sign > 0 ? obj.joint.q_max - q : q - obj.joint.q_min;
    double feasible = std::fmin(want, std::fmax(0.0, headroom));
    double resolution = obj.joint.kind == JointKind::revolute ? deg2rad(0.5) : 1e-3;

    auto passes = [&](double dq) {
        return validate_grasp(obj, q, g_object, cfg, sign * dq, env).valid();
    };
    if (!passes(0.0)) return 0.0;  // initial attachment failed
    if (feasible <= 0.0) return 0.0;
    if (passes(feasible)) return feasible;

    double lo = 0.0, hi = feasible;
    while (hi - lo > resolution) {
        double mid = 0.5 * (lo + hi);
        if (passes(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

inline bool relaxed_success(const Vec3& predicted_position,
                            const std::vector<Vec3>& label_positions,
                            double initial_distance) {
    if (label_positions.empty())
        throw std::invalid_argument("relaxed_success needs labels");
    if (initial_distance <= 0)
        throw std::invalid_argument("initial distance must be positive");
    double best = 1e300;
    for (const auto& lp : label_positions)
        best = std::fmin(best, (predicted_position - lp).norm());
    return best < 0.10 * initial_distance;
}

// ---- harness ----

struct EvalRecord {
    int scene_id = 0;
    std::string object_id;
    int joint_index = 0;
    bool detected = false;
    Pose predicted_grasp;   // world frame
    double matched_label_distance = 1e30;
    double moved = 0.0;
    bool sr_success = false;
    bool rsr_success = false;

    nlohmann::json to_json() const {
        return {{"scene_id", scene_id},
                {"object_id", object_id},
                {"joint_index", joint_index},
                {"detected", detected},
                {"grasp", artgrasp::to_json(predicted_grasp)},
                {"matched_label_distance", matched_label_distance},
                {"moved", moved},
                {"sr", sr_success},
                {"rsr", rsr_success}};
    }
};

struct ConditionMetrics {
    double sr = 0, rsr = 0;
    int n = 0;
};

struct EvalConfig {
    GraspConfig grasp;
    PipelineConfig pipeline;
    PerceptConfig percept;
    DepthNoiseConfig noise;
    int match_radius_px = 8;
    int min_visible_px = 50;
    double fixed_initial_distance = 0.0;  // > 0 overrides the camera-origin rule
};

struct EvalScene {
    int id = 0;
    SceneSpec spec;
    Camera camera;
};

struct ModelBundle {
    MlpSpec decoder_spec;
    MlpParams decoder_params;
    ShapeCodeTable codes;
    double delta = 0.1;
    const MlpSpec* encoder_spec = nullptr;      // required unless oracle mode
    const MlpParams* encoder_params = nullptr;
    int encoder_dilation = 4;
};

struct EvalRun {
    ConditionMetrics metrics;
    std::vector<EvalRecord> records;
    std::vector<int> skipped_scenes;  // missing labels
};

inline EvalRun evaluate(const std::vector<EvalScene>& scenes,
                        const std::vector<ArticulatedObject>& corpus,
                        const GraspDataset& labels, const ModelBundle& models,
                        bool oracle, bool icp, bool noisy_depth,
                        const EvalConfig& cfg, GridCache* cache = nullptr) {
    if (!oracle && (!models.encoder_spec || !models.encoder_params))
        throw std::invalid_argument("encoder checkpoint required outside oracle mode");

    EvalRun run;
    PipelineConfig pcfg = cfg.pipeline;
    pcfg.use_icp = icp;
    pcfg.delta = models.delta;
    double anchor_off = anchor_offset(cfg.grasp);

    for (const auto& es : scenes) {
        SceneContext ctx(es.spec, corpus);

        // every placed object needs labels, else the scene is skipped
        bool have_labels = true;
        for (const auto& po : es.spec.objects)
            if (!labels.find(po.object_id, po.joint_index)) have_labels = false;
        if (!have_labels) {
            run.skipped_scenes.push_back(es.id);
            continue;
        }

        RenderedFrame frame = render(ctx, es.camera);
        if (noisy_depth)
            frame.depth = add_depth_noise(frame.depth, frame.incidence, cfg.noise,
                                          fnv1a("noise") ^ static_cast<std::uint64_t>(es.id));

        TargetMaps targets = make_target_maps(ctx, es.camera, frame, models.codes);
        PredictedMaps maps;
        if (oracle) {
            maps = maps_from_targets(targets);
        } else {
            maps = encode(*models.encoder_spec, *models.encoder_params, frame, es.camera,
                          models.encoder_dilation);
        }

        auto recs = reconstruct_scene(frame, es.camera, maps, models.decoder_spec,
                                      models.decoder_params, pcfg, cache);

        for (int oi = 0; oi < ctx.count(); ++oi) {
            const PlacedObject& po = es.spec.objects[oi];
            long visible = std::count(targets.mask.begin(), targets.mask.end(), oi + 1);
            if (visible < cfg.min_visible_px) continue;

            EvalRecord record;
            record.scene_id = es.id;
            record.object_id = po.object_id;
            record.joint_index = po.joint_index;

            // nearest detection to the ground-truth center pixel
            auto [cv, cu] = targets.centers[oi];
            const ObjectReconstruction* match = nullptr;
            double best_px = 1e30;
            for (const auto& rec : recs) {
                double d = std::hypot(double(rec.detection.row - cv),
                                      double(rec.detection.col - cu));
                if (d < best_px) {
                    best_px = d;
                    match = &rec;
                }
            }
            if (match && best_px <= cfg.match_radius_px && !match->grasps_camera.empty()) {
                record.detected = true;
                const auto& best_grasp = match->grasps_camera.front();  // best score
                Pose grasp_world = compose(es.camera.pose, best_grasp.first);
                record.predicted_grasp = grasp_world;

                // SR: execute with the goal rule in the full-scene environment
                GoalSpec goal = goal_for(po.q, ctx.object(oi).joint);
                Pose g_obj = compose(inverse(po.world_pose), grasp_world);
                EnvSdf env = [&ctx, &po, oi](const Vec3& p_obj) {
                    return ctx.sdf_excluding(po.world_pose.apply(p_obj), oi);
                };
                record.moved = execute_grasp(ctx.object(oi), po.q, g_obj, goal,
                                             cfg.grasp, env);
                record.sr_success = success(record.moved, ctx.object(oi).joint);

                // RSR against the pair's labels in the world frame
                const GraspGroup* group = labels.find(po.object_id, po.joint_index);
                std::vector<Vec3> label_world;
                label_world.reserve(group->labels.size());
                for (const auto& l : group->labels)
                    label_world.push_back(
                        po.world_pose.apply(grasp_anchor(l.pose, cfg.grasp)));
                Vec3 pred_anchor = grasp_world.apply({0, 0, anchor_off});
                double best_d = 1e300;
                std::size_t best_i = 0;
                for (std::size_t li = 0; li < label_world.size(); ++li) {
                    double d = (label_world[li] - pred_anchor).norm();
                    if (d < best_d) {
                        best_d = d;
                        best_i = li;
                    }
                }
                record.matched_label_distance = best_d;
                double initial = cfg.fixed_initial_distance > 0
                                     ? cfg.fixed_initial_distance
                                     : (es.camera.pose.translation - label_world[best_i]).norm();
                record.rsr_success = relaxed_success(pred_anchor, label_world, initial);
            }
            run.records.push_back(record);
        }
    }

    for (const auto& r : run.records) {
        run.metrics.sr += r.sr_success ? 1 : 0;
        run.metrics.rsr += r.rsr_success ? 1 : 0;
        run.metrics.n += 1;
    }
    if (run.metrics.n > 0) {
        run.metrics.sr /= run.metrics.n;
        run.metrics.rsr /= run.metrics.n;
    }
    return run;
}

// object-centric consistency check: every stored label executed as its own
// prediction (the dataset-quality gate)
struct LabelEvalResult {
    double sr = 0, rsr = 0;
    int n = 0;
};

inline LabelEvalResult evaluate_labels(const std::vector<ArticulatedObject>& corpus,
                                       const GraspDataset& dataset,
                                       const GraspConfig& cfg) {
    LabelEvalResult result;
    for (const auto& group : dataset.groups) {
        const ArticulatedObject* obj = nullptr;
        for (const auto& o : corpus)
            if (o.id == group.object_id) obj = &o;
        if (!obj) throw std::invalid_argument("dataset references unknown object " +
                                              group.object_id);
        GoalSpec goal = goal_for(group.q, obj->joint);
        std::vector<Vec3> anchors;
        anchors.reserve(group.labels.size());
        for (const auto& l : group.labels) anchors.push_back(grasp_anchor(l.pose, cfg));
        for (std::size_t li = 0; li < group.labels.size(); ++li) {
            double moved = execute_grasp(*obj, group.q, group.labels[li].pose, goal, cfg);
            result.sr += success(moved, obj->joint) ? 1 : 0;
            result.rsr += relaxed_success(anchors[li], anchors, 1.0) ? 1 : 0;
            result.n += 1;
        }
    }
    if (result.n > 0) {
        result.sr /= result.n;
        result.rsr /= result.n;
    }
    return result;
}

// ---- table output ----

struct EvalGrid {
    // condition key: "<method>/<depth>", e.g. "oracle+icp/noisy"
    std::map<std::string, ConditionMetrics> conditions;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [key, m] : conditions)
            j[key] = {{"SR", m.sr}, {"RSR", m.rsr}, {"n", m.n}};
        return j;
    }

    // fixed-width table mirroring the SR/RSR-under-depth-condition layout
    std::string to_table() const {
        auto cell = [&](const std::string& method, const std::string& depth,
                        bool rsr) -> std::string {
            auto it = conditions.find(method + "/" + depth);
            if (it == conditions.end()) return "   -  ";
            char buf[16];
            std::snprintf(buf, sizeof(buf), " %5.2f", rsr ? it->second.rsr : it->second.sr);
            return buf;
        };
        std::vector<std::string> methods;
        for (const auto& [key, m] : conditions) {
            std::string method = key.substr(0, key.find('/'));
            if (std::find(methods.begin(), methods.end(), method) == methods.end())
                methods.push_back(method);
        }
        std::string out;
        out += "Method          |  GT-depth   SR   RSR | Noisy-depth  SR   RSR\n";
        out += "----------------+----------------------+----------------------\n";
        for (const auto& m : methods) {
            char line[128];
            std::snprintf(line, sizeof(line), "%-16s|          %s%s |           %s%s\n",
                          m.c_str(), cell(m, "gt", false).c_str(), cell(m, "gt", true).c_str(),
                          cell(m, "noisy", false).c_str(), cell(m, "noisy", true).c_str());
            out += line;
        }
        return out;
    }
};

} // namespace artgrasp
