#pragma once

// Application-level configuration: one JSON document covering every CLI
// stage. Fields absent from a user config keep their defaults, so configs
// only state what they change.

#include <json.hpp>

#include "eval.hpp"
#include "grasp.hpp"
#include "percept.hpp"
#include "pipeline.hpp"
#include "scene.hpp"
#include "sgdf.hpp"

namespace artgrasp {

struct AppConfig {
    int corpus_objects = 8;
    int joint_states = 8;

    GraspConfig grasp;
    SgdfConfig sgdf;

    SceneGenConfig scene;
    int scene_count = 20;
    int cameras_per_scene = 1;
    int image_size = 96;
    DepthNoiseConfig noise;

    PerceptConfig percept;
    PipelineConfig pipeline;

    int eval_match_radius_px = 8;
    int eval_min_visible_px = 50;
    double eval_fixed_initial_distance = 0.0;

    EvalConfig eval_config() const {
        EvalConfig e;
        e.grasp = grasp;
        e.pipeline = pipeline;
        e.percept = percept;
        e.noise = noise;
        e.match_radius_px = eval_match_radius_px;
        e.min_visible_px = eval_min_visible_px;
        e.fixed_initial_distance = eval_fixed_initial_distance;
        return e;
    }
};

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

} // namespace detail

inline nlohmann::json to_json(const AppConfig& c) {
    return {
        {"corpus",
         {{"objects", c.corpus_objects}, {"joint_states", c.joint_states}}},
        {"grasp",
         {{"target", c.grasp.target},
          {"min_count", c.grasp.min_count},
          {"max_count", c.grasp.max_count},
          {"budget_multiplier", c.grasp.budget_multiplier},
          {"inset", c.grasp.inset},
          {"antipodal_cone_deg", c.grasp.antipodal_cone_deg},
          {"clearance", c.grasp.clearance},
          {"trajectory_waypoints", c.grasp.trajectory_waypoints},
          {"gripper",
           {{"aperture", c.grasp.gripper.aperture},
            {"finger_length", c.grasp.gripper.finger_length},
            {"palm_depth", c.grasp.gripper.palm_depth}}}}},
        {"sgdf",
         {{"width", c.sgdf.width},
          {"dropout", c.sgdf.dropout},
          {"delta", c.sgdf.delta},
          {"w_sdf", c.sgdf.w_sdf},
          {"w_grasp", c.sgdf.w_grasp},
          {"w_code", c.sgdf.w_code},
          {"samples_per_pair", c.sgdf.samples_per_pair},
          {"epochs", c.sgdf.epochs},
          {"batch", c.sgdf.batch},
          {"steps_per_epoch", c.sgdf.steps_per_epoch}}},
        {"scene",
         {{"count", c.scene_count},
          {"cameras_per_scene", c.cameras_per_scene},
          {"image_size", c.image_size},
          {"min_objects", c.scene.min_objects},
          {"max_objects", c.scene.max_objects},
          {"walls", c.scene.walls},
          {"allowed_joint_indices", c.scene.allowed_joint_indices}}},
        {"noise",
         {{"sigma0", c.noise.sigma0},
          {"sigma1", c.noise.sigma1},
          {"grazing_threshold", c.noise.grazing_threshold},
          {"grazing_drop_prob", c.noise.grazing_drop_prob}}},
        {"percept",
         {{"hidden", c.percept.hidden},
          {"patch_dilation", c.percept.patch_dilation},
          {"epochs", c.percept.epochs},
          {"batch", c.percept.batch},
          {"pixels_per_frame", c.percept.pixels_per_frame},
          {"detection_threshold", c.percept.detection_threshold},
          {"nms_radius", c.percept.nms_radius},
          {"augment", c.percept.augment},
          {"lr", c.percept.lr}}},
        {"pipeline",
         {{"grid_resolution", c.pipeline.grid_resolution},
          {"epsilon", c.pipeline.epsilon},
          {"dedup_pos", c.pipeline.dedup_pos},
          {"dedup_angle_deg", c.pipeline.dedup_angle_deg},
          {"threads", c.pipeline.threads}}},
        {"eval",
         {{"match_radius_px", c.eval_match_radius_px},
          {"min_visible_px", c.eval_min_visible_px},
          {"fixed_initial_distance", c.eval_fixed_initial_distance}}}};
}

inline AppConfig config_from_json(const nlohmann::json& j) {
    using detail::maybe;
    AppConfig c;
    if (j.contains("corpus")) {
        const auto& s = j.at("corpus");
        maybe(s, "objects", c.corpus_objects);
        maybe(s, "joint_states", c.joint_states);
    }
    if (j.contains("grasp")) {
        const auto& s = j.at("grasp");
        maybe(s, "target", c.grasp.target);
        maybe(s, "min_count", c.grasp.min_count);
        maybe(s, "max_count", c.grasp.max_count);
        maybe(s, "budget_multiplier", c.grasp.budget_multiplier);
        maybe(s, "inset", c.grasp.inset);
        maybe(s, "antipodal_cone_deg", c.grasp.antipodal_cone_deg);
        maybe(s, "clearance", c.grasp.clearance);
        maybe(s, "trajectory_waypoints", c.grasp.trajectory_waypoints);
        if (s.contains("gripper")) {
            const auto& g = s.at("gripper");
            double ap = c.grasp.gripper.aperture, fl = c.grasp.gripper.finger_length,
                   pd = c.grasp.gripper.palm_depth;
            maybe(g, "aperture", ap);
            maybe(g, "finger_length", fl);
            maybe(g, "palm_depth", pd);
            c.grasp.gripper = GripperModel(ap, fl, pd);
        }
    }
    if (j.contains("sgdf")) {
        const auto& s = j.at("sgdf");
        maybe(s, "width", c.sgdf.width);
        maybe(s, "dropout", c.sgdf.dropout);
        maybe(s, "delta", c.sgdf.delta);
        maybe(s, "w_sdf", c.sgdf.w_sdf);
        maybe(s, "w_grasp", c.sgdf.w_grasp);
        maybe(s, "w_code", c.sgdf.w_code);
        maybe(s, "samples_per_pair", c.sgdf.samples_per_pair);
        maybe(s, "epochs", c.sgdf.epochs);
        maybe(s, "batch", c.sgdf.batch);
        maybe(s, "steps_per_epoch", c.sgdf.steps_per_epoch);
    }
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        maybe(s, "count", c.scene_count);
        maybe(s, "cameras_per_scene", c.cameras_per_scene);
        maybe(s, "image_size", c.image_size);
        maybe(s, "min_objects", c.scene.min_objects);
        maybe(s, "max_objects", c.scene.max_objects);
        maybe(s, "walls", c.scene.walls);
        maybe(s, "allowed_joint_indices", c.scene.allowed_joint_indices);
    }
    if (j.contains("noise")) {
        const auto& s = j.at("noise");
        maybe(s, "sigma0", c.noise.sigma0);
        maybe(s, "sigma1", c.noise.sigma1);
        maybe(s, "grazing_threshold", c.noise.grazing_threshold);
        maybe(s, "grazing_drop_prob", c.noise.grazing_drop_prob);
    }
    if (j.contains("percept")) {
        const auto& s = j.at("percept");
        maybe(s, "hidden", c.percept.hidden);
        maybe(s, "patch_dilation", c.percept.patch_dilation);
        maybe(s, "epochs", c.percept.epochs);
        maybe(s, "batch", c.percept.batch);
        maybe(s, "pixels_per_frame", c.percept.pixels_per_frame);
        maybe(s, "detection_threshold", c.percept.detection_threshold);
        maybe(s, "nms_radius", c.percept.nms_radius);
        maybe(s, "augment", c.percept.augment);
        maybe(s, "lr", c.percept.lr);
    }
    if (j.contains("pipeline")) {
        const auto& s = j.at("pipeline");
        maybe(s, "grid_resolution", c.pipeline.grid_resolution);
        maybe(s, "epsilon", c.pipeline.epsilon);
        maybe(s, "dedup_pos", c.pipeline.dedup_pos);
        maybe(s, "dedup_angle_deg", c.pipeline.dedup_angle_deg);
        maybe(s, "threads", c.pipeline.threads);
    }
    if (j.contains("eval")) {
        const auto& s = j.at("eval");
        maybe(s, "match_radius_px", c.eval_match_radius_px);
        maybe(s, "min_visible_px", c.eval_min_visible_px);
        maybe(s, "fixed_initial_distance", c.eval_fixed_initial_distance);
    }
    c.sgdf.gripper = c.grasp.gripper;
    c.scene.joint_states_per_object = c.joint_states;
    c.pipeline.detection_threshold = c.percept.detection_threshold;
    c.pipeline.nms_radius = c.percept.nms_radius;
    c.pipeline.delta = c.sgdf.delta;
    return c;
}

inline std::uint64_t config_hash(const AppConfig& c) {
    return fnv1a(to_json(c).dump());
}

} // namespace artgrasp
