#pragma once

// Desk-scale per-pixel encoder. Each pixel is encoded independently from a
// 9x9 depth patch, a 9x9 shaded patch, its normalized image coordinates,
// and its camera-ray direction (167 features total) into 44 channels:
// heat 1, pose 10 (translation, two rotation columns, scale), shape 32,
// joint 1. Peaks of the heat map become object detections.

#include <string>
#include <vector>

#include "net.hpp"
#include "scene.hpp"
#include "sgdf.hpp"

namespace artgrasp {

constexpr int kPatch = 9;
constexpr int kEncoderInput = kPatch * kPatch * 2 + 2 + 3;  // 167
constexpr int kEncoderOutput = 1 + 10 + kShapeCodeDim + 1;  // 44

struct PerceptConfig {
    std::vector<int> hidden{96, 96};
    int patch_dilation = 4;  // 9x9 samples at this stride: 33x33 px receptive field
    double w_heat = 1.0, w_pose = 1.0, w_shape = 1.0, w_joint = 1.0;
    double detection_threshold = 0.3;
    int nms_radius = 5;
    int epochs = 50;
    int batch = 128;
    int pixels_per_frame = 256;  // object pixels per frame per epoch (bg matched 1:1)
    bool augment = true;
    double lr = 1e-3;  // constant, encoder profile
};

inline MlpSpec make_encoder_spec(const std::vector<int>& hidden) {
    MlpSpec spec;
    spec.external_input = kEncoderInput;
    bool first = true;
    for (int w : hidden) {
        std::vector<InputSlice> ap;
        if (first) ap.push_back({0, kEncoderInput});
        spec.layers.push_back({w, Activation::relu, std::move(ap), 0.0});
        first = false;
    }
    spec.layers.push_back({kEncoderOutput, Activation::linear, {}, 0.0});
    spec.validate();
    return spec;
}

// 9x9 patch samples taken at `dilation`-pixel stride so the receptive
// field spans object scale; border pixels clamp into the image
inline void extract_pixel_features(const RenderedFrame& frame, const Camera& camera,
                                   int u, int v, double* out, int dilation = 4,
                                   double shade_gain = 1.0, double shade_bias = 0.0) {
    int half = kPatch / 2;
    int k = 0;
    for (int dv = -half; dv <= half; ++dv) {
        int vv = std::clamp(v + dv * dilation, 0, frame.height - 1);
        for (int du = -half; du <= half; ++du) {
            int uu = std::clamp(u + du * dilation, 0, frame.width - 1);
            out[k++] = frame.depth[frame.idx(uu, vv)];
        }
    }
    for (int dv = -half; dv <= half; ++dv) {
        int vv = std::clamp(v + dv * dilation, 0, frame.height - 1);
        for (int du = -half; du <= half; ++du) {
            int uu = std::clamp(u + du * dilation, 0, frame.width - 1);
            double s = frame.shaded[frame.idx(uu, vv)];
            out[k++] = std::clamp(shade_gain * (s - 0.5) + 0.5 + shade_bias, 0.0, 1.0);
        }
    }
    out[k++] = (u + 0.5) / frame.width;
    out[k++] = (v + 0.5) / frame.height;
    Vec3 ray = camera.pixel_ray(u, v);
    out[k++] = ray.x;
    out[k++] = ray.y;
    out[k++] = ray.z;
}

struct PredictedMaps {
    int width = 0, height = 0;
    std::vector<float> heat;   // H*W
    std::vector<float> pose;   // H*W*10
    std::vector<float> shape;  // H*W*32
    std::vector<float> joint;  // H*W

    std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

inline PredictedMaps encode(const MlpSpec& spec, const MlpParams& params,
                            const RenderedFrame& frame, const Camera& camera,
                            int dilation = 4) {
    if (frame.width != camera.width || frame.height != camera.height)
        throw std::invalid_argument("frame resolution does not match the camera");
    PredictedMaps maps;
    maps.width = frame.width;
    maps.height = frame.height;
    std::size_t n = frame.depth.size();
    maps.heat.resize(n);
    maps.pose.resize(n * 10);
    maps.shape.resize(n * kShapeCodeDim);
    maps.joint.resize(n);

    std::vector<double> feat(kEncoderInput);
    Rng rng(0);
    for (int v = 0; v < frame.height; ++v)
        for (int u = 0; u < frame.width; ++u) {
            extract_pixel_features(frame, camera, u, v, feat.data(), dilation);
            auto out = forward(spec, params, feat, NetMode::eval, rng);
            std::size_t i = maps.idx(u, v);
            maps.heat[i] = static_cast<float>(out[0]);
            for (int k = 0; k < 10; ++k)
                maps.pose[i * 10 + k] = static_cast<float>(out[1 + k]);
            for (int k = 0; k < kShapeCodeDim; ++k)
                maps.shape[i * kShapeCodeDim + k] = static_cast<float>(out[11 + k]);
            maps.joint[i] = static_cast<float>(out[11 + kShapeCodeDim]);
        }
    return maps;
}

// ---- loss ----

struct EncoderLoss {
    double total = 0, heat = 0, pose = 0, shape = 0, joint = 0;
};

// heat MSE over every pixel; pose/shape/joint MSE over supervised pixels
inline EncoderLoss encoder_loss(const PredictedMaps& pred, const TargetMaps& target,
                                const PerceptConfig& cfg) {
    if (pred.width != target.width || pred.height != target.height)
        throw std::invalid_argument("loss shape mismatch");
    EncoderLoss L;
    std::size_t n = pred.heat.size();
    std::size_t obj_px = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dh = pred.heat[i] - target.heat[i];
        L.heat += dh * dh;
        if (target.mask[i] == 0) continue;
        ++obj_px;
        for (int k = 0; k < 10; ++k) {
            double d = pred.pose[i * 10 + k] - target.pose[i * 10 + k];
            L.pose += d * d;
        }
        for (int k = 0; k < kShapeCodeDim; ++k) {
            double d = pred.shape[i * kShapeCodeDim + k] - target.shape[i * kShapeCodeDim + k];
            L.shape += d * d;
        }
        double dj = pred.joint[i] - target.joint[i];
        L.joint += dj * dj;
    }
    L.heat /= static_cast<double>(n);
    if (obj_px > 0) {
        L.pose /= static_cast<double>(obj_px * 10);
        L.shape /= static_cast<double>(obj_px * kShapeCodeDim);
        L.joint /= static_cast<double>(obj_px);
    }
    L.total = cfg.w_heat * L.heat + cfg.w_pose * L.pose + cfg.w_shape * L.shape +
              cfg.w_joint * L.joint;
    return L;
}

// ---- peak detection ----

// strict local maxima in a (2r+1)^2 window above threshold, kept greedily in
// descending value with suppression; plateau ties break row-major
inline std::vector<std::pair<int, int>> detect_peaks(const std::vector<float>& heat,
                                                     int width, int height,
                                                     double threshold, int nms_radius) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("detection threshold must be in (0,1)");
    if (nms_radius < 1) throw std::invalid_argument("nms radius must be >= 1");

    struct Cand { int v, u; float val; };
    std::vector<Cand> cands;
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            float x = heat[static_cast<std::size_t>(v) * width + u];
            if (x < threshold) continue;
            bool is_max = true;
            for (int dv = -nms_radius; dv <= nms_radius && is_max; ++dv)
                for (int du = -nms_radius; du <= nms_radius && is_max; ++du) {
                    if (du == 0 && dv == 0) continue;
                    int vv = v + dv, uu = u + du;
                    if (vv < 0 || vv >= height || uu < 0 || uu >= width) continue;
                    float o = heat[static_cast<std::size_t>(vv) * width + uu];
                    if (o > x) is_max = false;
                    // plateau: only the row-major-first pixel survives
                    if (o == x && (vv < v || (vv == v && uu < u))) is_max = false;
                }
            if (is_max) cands.push_back({v, u, x});
        }

    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.val != b.val) return a.val > b.val;
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });

    std::vector<std::pair<int, int>> peaks;
    for (const auto& c : cands) {
        bool suppressed = false;
        for (const auto& p : peaks)
            if (std::abs(p.first - c.v) <= nms_radius &&
                std::abs(p.second - c.u) <= nms_radius) {
                suppressed = true;
                break;
            }
        if (!suppressed) peaks.emplace_back(c.v, c.u);
    }
    return peaks;
}

// ---- detections ----

struct Detection {
    int row = 0, col = 0;
    double score = 0;
    Pose cam_from_object;
    double scale = 1.0;   // canonical = scale * metric
    ShapeCode z_s{};
    double z_j = 0.0;
};

inline std::vector<Detection> extract_detections(const PredictedMaps& maps,
                                                 const std::vector<std::pair<int, int>>& peaks) {
    std::vector<Detection> out;
    for (auto [v, u] : peaks) {
        if (v < 0 || v >= maps.height || u < 0 || u >= maps.width)
            throw std::out_of_range("peak outside the map");
        std::size_t i = maps.idx(u, v);
        Detection d;
        d.row = v;
        d.col = u;
        d.score = maps.heat[i];
        const float* p = &maps.pose[i * 10];
        Vec3 c0{p[3], p[4], p[5]}, c1{p[6], p[7], p[8]};
        d.cam_from_object = {rotation_from_two_columns(c0, c1), {p[0], p[1], p[2]}};
        d.scale = p[9];
        for (int k = 0; k < kShapeCodeDim; ++k) d.z_s[k] = maps.shape[i * kShapeCodeDim + k];
        d.z_j = std::clamp(static_cast<double>(maps.joint[i]), 0.0, 1.0);
        out.push_back(d);
    }
    return out;
}

// target maps reinterpreted as predictions, for oracle-mode inference
inline PredictedMaps maps_from_targets(const TargetMaps& t) {
    PredictedMaps m;
    m.width = t.width;
    m.height = t.height;
    m.heat = t.heat;
    m.pose = t.pose;
    m.shape = t.shape;
    m.joint = t.joint;
    return m;
}

// ---- training ----

struct TrainingFrame {
    RenderedFrame frame;
    Camera camera;
    TargetMaps targets;
};

struct EncoderEpochStats {
    int epoch = 0;
    double sampled_loss = 0;  // mean per-pixel training loss over the epoch
};

struct TrainedEncoder {
    MlpSpec spec;
    MlpParams params;
    PerceptConfig config;
    std::vector<EncoderEpochStats> log;
};

inline TrainedEncoder train_encoder(const std::vector<TrainingFrame>& frames,
                                    const PerceptConfig& cfg, std::uint64_t seed) {
    if (frames.empty()) throw std::invalid_argument("no training frames");
    Rng rng(seed);
    TrainedEncoder enc;
    enc.config = cfg;
    enc.spec = make_encoder_spec(cfg.hidden);
    enc.params = MlpParams::init(enc.spec, rng);

    // per-frame object pixel index lists; frames with no visible object
    // contribute nothing and are skipped
    std::vector<std::vector<std::size_t>> object_px(frames.size());
    std::vector<std::vector<std::size_t>> background_px(frames.size());
    std::size_t usable = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const TargetMaps& t = frames[f].targets;
        for (std::size_t i = 0; i < t.mask.size(); ++i)
            (t.mask[i] > 0 ? object_px[f] : background_px[f]).push_back(i);
        if (!object_px[f].empty()) ++usable;
    }
    if (usable == 0) throw std::invalid_argument("no frame has object pixels");

    MlpOptimizer opt = MlpOptimizer::init(enc.params);
    MlpGrads grads = MlpGrads::zeros(enc.params);
    ForwardCache cache;
    std::vector<double> feat(kEncoderInput);
    LrProfile profile = LrProfile::encoder_profile();
    profile.base = cfg.lr;

    struct Drawn { std::size_t frame, pixel; double gain, bias; };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_schedule(epoch, profile);
        double ep_loss = 0;
        std::size_t ep_px = 0;

        // build this epoch's pixel set: per frame, sampled object pixels
        // plus the same count of random background pixels
        std::vector<Drawn> drawn;
        for (std::size_t f = 0; f < frames.size(); ++f) {
            if (object_px[f].empty()) continue;
            double gain = cfg.augment ? rng.uniform(0.8, 1.2) : 1.0;
            double bias = cfg.augment ? rng.uniform(-0.1, 0.1) : 0.0;
            std::size_t n_obj = std::min<std::size_t>(cfg.pixels_per_frame,
                                                      object_px[f].size());
            for (std::size_t k = 0; k < n_obj; ++k)
                drawn.push_back({f, object_px[f][rng.uniform_index(object_px[f].size())],
                                 gain, bias});
            for (std::size_t k = 0; k < n_obj; ++k)
                drawn.push_back({f,
                                 background_px[f][rng.uniform_index(background_px[f].size())],
                                 gain, bias});
        }
        // deterministic shuffle
        for (std::size_t i = drawn.size(); i > 1; --i)
            std::swap(drawn[i - 1], drawn[rng.uniform_index(i)]);

        for (std::size_t start = 0; start < drawn.size(); start += cfg.batch) {
            std::size_t stop = std::min(drawn.size(), start + cfg.batch);
            grads.clear();
            double inv_b = 1.0 / static_cast<double>(stop - start);
            for (std::size_t di = start; di < stop; ++di) {
                const Drawn& d = drawn[di];
                const TrainingFrame& tf = frames[d.frame];
                const TargetMaps& t = tf.targets;
                int u = static_cast<int>(d.pixel % t.width);
                int v = static_cast<int>(d.pixel / t.width);
                extract_pixel_features(tf.frame, tf.camera, u, v, feat.data(),
                                       cfg.patch_dilation, d.gain, d.bias);
                auto out = forward(enc.spec, enc.params, feat, NetMode::train, rng, &cache);

                std::vector<double> gout(kEncoderOutput, 0.0);
                double px_loss = 0;
                double dh = out[0] - t.heat[d.pixel];
                px_loss += cfg.w_heat * dh * dh;
                gout[0] = cfg.w_heat * 2.0 * dh * inv_b;
                if (t.mask[d.pixel] > 0) {
                    for (int k = 0; k < 10; ++k) {
                        double dd = out[1 + k] - t.pose[d.pixel * 10 + k];
                        px_loss += cfg.w_pose * dd * dd / 10.0;
                        gout[1 + k] = cfg.w_pose * 2.0 * dd / 10.0 * inv_b;
                    }
                    for (int k = 0; k < kShapeCodeDim; ++k) {
                        double dd = out[11 + k] - t.shape[d.pixel * kShapeCodeDim + k];
                        px_loss += cfg.w_shape * dd * dd / kShapeCodeDim;
                        gout[11 + k] = cfg.w_shape * 2.0 * dd / kShapeCodeDim * inv_b;
                    }
                    double dj = out[11 + kShapeCodeDim] - t.joint[d.pixel];
                    px_loss += cfg.w_joint * dj * dj;
                    gout[11 + kShapeCodeDim] = cfg.w_joint * 2.0 * dj * inv_b;
                }
                ep_loss += px_loss;
                ++ep_px;
                backward(enc.spec, enc.params, cache, gout, grads);
            }
            opt.step(enc.params, grads, lr);
        }

        EncoderEpochStats st;
        st.epoch = epoch;
        st.sampled_loss = ep_loss / static_cast<double>(ep_px);
        if (!std::isfinite(st.sampled_loss))
            throw std::runtime_error("non-finite encoder loss at epoch " +
                                     std::to_string(epoch));
        enc.log.push_back(st);
    }
    return enc;
}

inline void save_encoder(const std::string& path, const TrainedEncoder& enc) {
    save_checkpoint(path, enc.spec, enc.params, "percept-v1",
                    {{"patch_dilation", enc.config.patch_dilation}});
}

struct LoadedEncoder {
    MlpSpec spec;
    MlpParams params;
    int dilation = 4;
};

inline LoadedEncoder load_encoder(const std::string& path) {
    std::string tag;
    nlohmann::json meta;
    auto [spec, params] = load_checkpoint(path, &tag, &meta);
    if (tag != "percept-v1")
        throw std::runtime_error("checkpoint at " + path + " is not a percept-v1 encoder");
    return {std::move(spec), std::move(params), meta.value("patch_dilation", 4)};
}

} // namespace artgrasp
