#pragma once

// The shape-and-grasp field: sample generation in the canonical frame, the
// skip-connected decoder, its three-term loss, and auto-decoder training
// with one learned 32-vector shape code per object.
//
// Canonical convention: x_canonical = canonical_scale * x_metric, so SDF
// values and control points scale by the same factor. The decoder emits
// 16 tanh-bounded channels: [0] the SDF (multiplied by the clamp bound
// delta to recover canonical units), [1..16) the 5x3 control points.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "artobj.hpp"
#include "geom.hpp"
#include "grasp.hpp"
#include "io.hpp"
#include "net.hpp"

namespace artgrasp {

constexpr int kShapeCodeDim = 32;
// external input layout: [z_s (32), z_j (1), x (3)]
constexpr int kDecoderInput = kShapeCodeDim + 1 + 3;

struct SgdfSample {
    Vec3 x;                  // canonical [-1.1, 1.1]^3
    double sdf = 0.0;        // canonical units, unclamped
    ControlPoints cp_target; // canonical frame
};

struct DecoderOutput {
    double sdf_pred = 0.0;   // tanh units, in (-1,1); multiply by delta
    ControlPoints cp_pred;
};

using ShapeCode = std::array<double, kShapeCodeDim>;

struct ShapeCodeTable {
    std::map<std::string, ShapeCode> codes;

    const ShapeCode& at(const std::string& id) const {
        auto it = codes.find(id);
        if (it == codes.end()) throw std::out_of_range("no shape code for " + id);
        return it->second;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [id, code] : codes) {
            nlohmann::json arr = nlohmann::json::array();
            for (double v : code) arr.push_back(v);
            j[id] = arr;
        }
        return j;
    }

    static ShapeCodeTable from_json(const nlohmann::json& j) {
        ShapeCodeTable t;
        for (auto it = j.begin(); it != j.end(); ++it) {
            ShapeCode c{};
            for (int i = 0; i < kShapeCodeDim; ++i) c[i] = it.value().at(i).get<double>();
            t.codes[it.key()] = c;
        }
        return t;
    }
};

struct SgdfConfig {
    int width = 128;                // 512 reproduces the full-size profile
    double dropout = 0.2;
    double delta = 0.1;             // clamp bound, canonical units
    // w_grasp keeps the two data terms at comparable magnitude at init
    // (L_SDF starts near 0.03, raw L_grasp near 0.9)
    double w_sdf = 1.0, w_grasp = 0.05, w_code = 1e-4;
    int samples_per_pair = 20000;
    double near_fraction = 0.8;
    double sigma_small = 0.01, sigma_big = 0.05;
    int epochs = 600;
    int batch = 64;
    int steps_per_epoch = 64;
    double code_init_std = 0.01;
    double code_lr_scale = 1.0;
    GripperModel gripper;
};

inline double clamp_sdf(double s, double delta) {
    if (delta <= 0) throw std::invalid_argument("clamp bound must be positive");
    return std::fmin(delta, std::fmax(-delta, s));
}

// 8-layer perceptron; shape code and point feed layer 1, the joint code
// appends to layer 2, and code+joint+point append again at layer 5
inline MlpSpec make_decoder_spec(int width, double dropout) {
    MlpSpec spec;
    spec.external_input = kDecoderInput;
    auto hidden = [&](std::vector<InputSlice> appends) {
        spec.layers.push_back({width, Activation::relu, std::move(appends), dropout});
    };
    hidden({{0, kShapeCodeDim}, {kShapeCodeDim + 1, 3}});   // layer 1: [z_s, x]
    hidden({{kShapeCodeDim, 1}});                           // layer 2: [h1, z_j]
    hidden({});                                             // layer 3
    hidden({});                                             // layer 4
    hidden({{0, kShapeCodeDim}, {kShapeCodeDim, 1}, {kShapeCodeDim + 1, 3}});  // layer 5
    hidden({});                                             // layer 6
    hidden({});                                             // layer 7
    spec.layers.push_back({16, Activation::tanh_fn, {}, 0.0});  // sdf + 5x3 points
    spec.validate();
    return spec;
}

inline std::vector<double> pack_decoder_input(const ShapeCode& z_s, double z_j,
                                              const Vec3& x) {
    std::vector<double> in(kDecoderInput);
    for (int i = 0; i < kShapeCodeDim; ++i) in[i] = z_s[i];
    in[kShapeCodeDim] = z_j;
    in[kShapeCodeDim + 1] = x.x;
    in[kShapeCodeDim + 2] = x.y;
    in[kShapeCodeDim + 3] = x.z;
    return in;
}

inline DecoderOutput unpack_decoder_output(const std::vector<double>& out) {
    DecoderOutput o;
    o.sdf_pred = out[0];
    for (int p = 0; p < 5; ++p)
        o.cp_pred[p] = {out[1 + 3 * p], out[2 + 3 * p], out[3 + 3 * p]};
    return o;
}

inline DecoderOutput decode(const MlpSpec& spec, const MlpParams& params,
                            const ShapeCode& z_s, double z_j, const Vec3& x) {
    Rng rng(0);  // eval mode draws nothing
    auto out = forward(spec, params, pack_decoder_input(z_s, z_j, x), NetMode::eval, rng);
    return unpack_decoder_output(out);
}

// ---- sample generation ----

// ties break toward the lowest label index (strict less keeps the first)
inline std::size_t closest_grasp_index(const Vec3& x, const std::vector<Vec3>& positions) {
    if (positions.empty()) throw std::invalid_argument("closest_grasp on empty group");
    std::size_t best = 0;
    double best_d = (positions[0] - x).norm2();
    for (std::size_t i = 1; i < positions.size(); ++i) {
        double d = (positions[i] - x).norm2();
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

inline const GraspLabel& closest_grasp(const Vec3& x_canonical, const GraspGroup& group,
                                       const GraspConfig& gcfg, double scale) {
    std::vector<Vec3> positions;
    positions.reserve(group.labels.size());
    for (const auto& l : group.labels)
        positions.push_back(grasp_anchor(l.pose, gcfg) * scale);
    return group.labels[closest_grasp_index(x_canonical, positions)];
}

// canonical-frame anchor positions for a grasp group
inline std::vector<Vec3> label_anchors_canonical(const GraspGroup& group,
                                                 const GraspConfig& gcfg, double scale) {
    std::vector<Vec3> out;
    out.reserve(group.labels.size());
    for (const auto& l : group.labels) out.push_back(grasp_anchor(l.pose, gcfg) * scale);
    return out;
}

inline std::vector<SgdfSample> sample_sgdf(const ArticulatedObject& obj, int joint_index,
                                           const JointStateSet& states,
                                           const GraspGroup& group, int n,
                                           const SgdfConfig& cfg, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("need n >= 1 sgdf samples");
    if (group.labels.empty()) throw std::invalid_argument("sgdf sampling needs grasp labels");
    double q = states.states.at(joint_index);
    double s = obj.canonical_scale;
    GraspConfig gcfg;
    gcfg.gripper = cfg.gripper;
    std::vector<Vec3> anchors = label_anchors_canonical(group, gcfg, s);
    std::vector<ControlPoints> cps;
    cps.reserve(group.labels.size());
    for (const auto& l : group.labels)
        cps.push_back(scale_control_points(grasp_control_points(l.pose, cfg.gripper), s));

    int n_near = static_cast<int>(std::lround(n * cfg.near_fraction));
    auto surf = sample_surface(obj, q, std::max(1, n_near), SurfaceRegion::whole,
                               hash_combine(seed, 0x5f5fULL));
    Rng rng(seed);
    std::vector<SgdfSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec3 x;
        if (i < n_near) {
            double sigma = (i % 2 == 0) ? cfg.sigma_small : cfg.sigma_big;
            Vec3 base = surf[i].position * s;
            x = base + Vec3{rng.normal(), rng.normal(), rng.normal()} * sigma;
            x = {std::clamp(x.x, -1.1, 1.1), std::clamp(x.y, -1.1, 1.1),
                 std::clamp(x.z, -1.1, 1.1)};
        } else {
            x = {rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1)};
        }
        SgdfSample sample;
        sample.x = x;
        sample.sdf = obj.sdf(q, x / s) * s;
        sample.cp_target = cps[closest_grasp_index(x, anchors)];
        out.push_back(sample);
    }
    return out;
}

// ---- loss ----

struct DecoderLoss {
    double total = 0, sdf = 0, grasp = 0, code = 0;
};

inline DecoderLoss decoder_loss(const std::vector<DecoderOutput>& outputs,
                                const std::vector<SgdfSample>& samples,
                                const std::vector<const ShapeCode*>& codes,
                                const SgdfConfig& cfg) {
    if (outputs.size() != samples.size() || outputs.size() != codes.size())
        throw std::invalid_argument("decoder_loss batch mismatch");
    DecoderLoss L;
    double n = static_cast<double>(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        double pred = outputs[i].sdf_pred * cfg.delta;
        L.sdf += std::fabs(clamp_sdf(pred, cfg.delta) - clamp_sdf(samples[i].sdf, cfg.delta));
        L.grasp += control_point_distance(outputs[i].cp_pred, samples[i].cp_target);
        double c2 = 0;
        for (double v : *codes[i]) c2 += v * v;
        L.code += c2 / kShapeCodeDim;
    }
    L.sdf /= n;
    L.grasp /= n;
    L.code /= n;
    L.total = cfg.w_sdf * L.sdf + cfg.w_grasp * L.grasp + cfg.w_code * L.code;
    return L;
}

// ---- training ----

struct PairSamples {
    std::string object_id;
    int joint_index = 0;
    double z_j = 0.0;
    std::vector<SgdfSample> samples;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0;
    double train_sdf = 0, train_grasp = 0, train_code = 0;  // eval-mode, fixed subset
    double val_sdf = 0, val_grasp = 0;                      // eval-mode, held-out pairs
    double running_sdf = 0, running_grasp = 0;              // train-mode batch means
};

struct TrainedDecoder {
    MlpSpec spec;
    MlpParams params;
    ShapeCodeTable codes;
    SgdfConfig config;
    EpochStats initial;  // eval-mode losses before any update
    std::vector<EpochStats> log;
    std::map<std::string, int> validation_joint;  // held-out joint index per object
};

// one held-out (object, joint state) pair per object, as the training
// protocol requires
inline std::map<std::string, int> choose_validation_pairs(
        const std::vector<PairSamples>& pairs, Rng& rng) {
    std::map<std::string, std::vector<int>> by_object;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        by_object[pairs[i].object_id].push_back(static_cast<int>(i));
    std::map<std::string, int> held;
    for (auto& [id, idxs] : by_object) {
        if (idxs.size() < 2)
            throw std::invalid_argument("object " + id + " needs >= 2 joint-state pairs");
        int pick = idxs[rng.uniform_index(idxs.size())];
        held[id] = pairs[pick].joint_index;
    }
    return held;
}

inline TrainedDecoder train_decoder(const std::vector<PairSamples>& pairs,
                                    const SgdfConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    TrainedDecoder result;
    result.config = cfg;
    result.spec = make_decoder_spec(cfg.width, cfg.dropout);
    result.params = MlpParams::init(result.spec, rng);
    result.validation_joint = choose_validation_pairs(pairs, rng);

    // codes as one flat parameter block with a single optimizer state
    std::vector<std::string> object_ids;
    std::map<std::string, int> code_index;
    for (const auto& p : pairs)
        if (!code_index.count(p.object_id)) {
            code_index[p.object_id] = static_cast<int>(object_ids.size());
            object_ids.push_back(p.object_id);
        }
    std::vector<double> code_block(object_ids.size() * kShapeCodeDim);
    for (auto& v : code_block) v = rng.normal() * cfg.code_init_std;

    std::vector<int> train_pairs, val_pairs;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (result.validation_joint.at(pairs[i].object_id) == pairs[i].joint_index)
            val_pairs.push_back(static_cast<int>(i));
        else
            train_pairs.push_back(static_cast<int>(i));
    }
    if (train_pairs.empty()) throw std::invalid_argument("no training pairs left");

    // uniform over the pooled training samples
    std::vector<std::uint64_t> pool_cum;
    std::uint64_t pool_total = 0;
    for (int pi : train_pairs) {
        pool_total += pairs[pi].samples.size();
        pool_cum.push_back(pool_total);
    }

    MlpOptimizer net_opt = MlpOptimizer::init(result.params);
    AdamState code_opt = AdamState::zeros(code_block.size());
    LrProfile profile = LrProfile::decoder_profile(cfg.epochs);

    MlpGrads grads = MlpGrads::zeros(result.params);
    std::vector<double> code_grads(code_block.size());
    ForwardCache cache;

    // fixed evaluation subsets for the per-epoch metrics
    auto eval_pairs = [&](const std::vector<int>& idxs, std::size_t per_pair) {
        double sdf_sum = 0, grasp_sum = 0;
        std::size_t count = 0;
        for (int pi : idxs) {
            const PairSamples& ps = pairs[pi];
            const double* code = &code_block[code_index.at(ps.object_id) * kShapeCodeDim];
            ShapeCode zc{};
            std::copy(code, code + kShapeCodeDim, zc.begin());
            std::size_t step = std::max<std::size_t>(1, ps.samples.size() / per_pair);
            for (std::size_t si = 0; si < ps.samples.size(); si += step) {
                const SgdfSample& smp = ps.samples[si];
                DecoderOutput out = decode(result.spec, result.params, zc, ps.z_j, smp.x);
                sdf_sum += std::fabs(clamp_sdf(out.sdf_pred * cfg.delta, cfg.delta) -
                                     clamp_sdf(smp.sdf, cfg.delta));
                grasp_sum += control_point_distance(out.cp_pred, smp.cp_target);
                ++count;
            }
        }
        return std::make_pair(count ? sdf_sum / count : 0.0,
                              count ? grasp_sum / count : 0.0);
    };

    {
        result.initial.epoch = -1;
        auto [ts, tg] = eval_pairs(train_pairs, 128);
        result.initial.train_sdf = ts;
        result.initial.train_grasp = tg;
        auto [vs, vg] = eval_pairs(val_pairs, 512);
        result.initial.val_sdf = vs;
        result.initial.val_grasp = vg;
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_schedule(epoch, profile);
        double ep_sdf = 0, ep_grasp = 0, ep_code = 0;
        std::size_t ep_count = 0;

        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            grads.clear();
            std::fill(code_grads.begin(), code_grads.end(), 0.0);
            double inv_b = 1.0 / cfg.batch;

            for (int b = 0; b < cfg.batch; ++b) {
                std::uint64_t pick = rng.uniform_index(pool_total);
                std::size_t slot = std::lower_bound(pool_cum.begin(), pool_cum.end(),
                                                    pick + 1) - pool_cum.begin();
                const PairSamples& ps = pairs[train_pairs[slot]];
                std::uint64_t base = slot == 0 ? 0 : pool_cum[slot - 1];
                const SgdfSample& smp = ps.samples[pick - base];
                int ci = code_index.at(ps.object_id);
                const double* code = &code_block[ci * kShapeCodeDim];

                std::vector<double> input(kDecoderInput);
                std::copy(code, code + kShapeCodeDim, input.begin());
                input[kShapeCodeDim] = ps.z_j;
                input[kShapeCodeDim + 1] = smp.x.x;
                input[kShapeCodeDim + 2] = smp.x.y;
                input[kShapeCodeDim + 3] = smp.x.z;

                auto out = forward(result.spec, result.params, input, NetMode::train,
                                   rng, &cache);

                // loss gradients on the 16 tanh outputs
                std::vector<double> gout(16, 0.0);
                double pred = out[0] * cfg.delta;
                double target = clamp_sdf(smp.sdf, cfg.delta);
                double diff = clamp_sdf(pred, cfg.delta) - target;
                ep_sdf += std::fabs(diff);
                double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                if (std::fabs(pred) < cfg.delta)  // inside the clamp band
                    gout[0] = cfg.w_sdf * sgn * cfg.delta * inv_b;

                double gl = 0;
                for (int p = 0; p < 5; ++p) {
                    Vec3 pr{out[1 + 3 * p], out[2 + 3 * p], out[3 + 3 * p]};
                    Vec3 d = pr - smp.cp_target[p];
                    gl += std::fabs(d.x) + std::fabs(d.y) + std::fabs(d.z);
                    for (int c = 0; c < 3; ++c) {
                        double dc = d[c];
                        double g = dc > 0 ? 1.0 : (dc < 0 ? -1.0 : 0.0);
                        gout[1 + 3 * p + c] = cfg.w_grasp * g / 5.0 * inv_b;
                    }
                }
                ep_grasp += gl / 5.0;

                auto ext = backward(result.spec, result.params, cache, gout, grads);
                double c2 = 0;
                for (int i = 0; i < kShapeCodeDim; ++i) {
                    double cv = code[i];
                    c2 += cv * cv;
                    code_grads[ci * kShapeCodeDim + i] +=
                        ext[i] + cfg.w_code * 2.0 * cv / kShapeCodeDim * inv_b;
                }
                ep_code += c2 / kShapeCodeDim;
                ++ep_count;
            }

            net_opt.step(result.params, grads, lr);
            adam_step(code_block, code_grads, code_opt, lr * cfg.code_lr_scale, "shape_codes");
        }

        EpochStats st;
        st.epoch = epoch;
        st.lr = lr;
        st.running_sdf = ep_sdf / ep_count;
        st.running_grasp = ep_grasp / ep_count;
        st.train_code = ep_code / ep_count;
        if (!std::isfinite(st.running_sdf + st.running_grasp))
            throw std::runtime_error("non-finite training loss at epoch " +
                                     std::to_string(epoch));
        auto [ts, tg] = eval_pairs(train_pairs, 128);
        st.train_sdf = ts;
        st.train_grasp = tg;
        auto [vs, vg] = eval_pairs(val_pairs, 512);
        st.val_sdf = vs;
        st.val_grasp = vg;
        result.log.push_back(st);
    }

    for (std::size_t oi = 0; oi < object_ids.size(); ++oi) {
        ShapeCode c{};
        std::copy(&code_block[oi * kShapeCodeDim],
                  &code_block[(oi + 1) * kShapeCodeDim], c.begin());
        result.codes.codes[object_ids[oi]] = c;
    }
    return result;
}

// ---- sample-file I/O: JSON sidecar + float32 blob of shape [count, 19] ----

inline void save_sgdf_samples(const std::string& base_path, const PairSamples& ps) {
    nlohmann::json side{{"object_id", ps.object_id},
                        {"joint_index", ps.joint_index},
                        {"z_j", ps.z_j},
                        {"count", ps.samples.size()},
                        {"layout", "x:3,sdf:1,cp:15"}};
    write_text_file(base_path + ".json", side.dump(2) + "\n");
    std::vector<float> blob;
    blob.reserve(ps.samples.size() * 19);
    for (const auto& s : ps.samples) {
        blob.push_back(static_cast<float>(s.x.x));
        blob.push_back(static_cast<float>(s.x.y));
        blob.push_back(static_cast<float>(s.x.z));
        blob.push_back(static_cast<float>(s.sdf));
        for (const auto& p : s.cp_target) {
            blob.push_back(static_cast<float>(p.x));
            blob.push_back(static_cast<float>(p.y));
            blob.push_back(static_cast<float>(p.z));
        }
    }
    write_f32_blob(base_path + ".f32", blob);
}

inline PairSamples load_sgdf_samples(const std::string& base_path) {
    nlohmann::json side = nlohmann::json::parse(read_text_file(base_path + ".json"));
    PairSamples ps;
    ps.object_id = side.at("object_id").get<std::string>();
    ps.joint_index = side.at("joint_index").get<int>();
    ps.z_j = side.at("z_j").get<double>();
    std::size_t count = side.at("count").get<std::size_t>();
    std::vector<float> blob = read_f32_blob(base_path + ".f32");
    if (blob.size() != count * 19)
        throw std::runtime_error("sgdf blob size mismatch for " + base_path);
    ps.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const float* r = &blob[i * 19];
        SgdfSample& s = ps.samples[i];
        s.x = {r[0], r[1], r[2]};
        s.sdf = r[3];
        for (int p = 0; p < 5; ++p)
            s.cp_target[p] = {r[4 + 3 * p], r[5 + 3 * p], r[6 + 3 * p]};
    }
    return ps;
}

} // namespace artgrasp
