#pragma once

// Minimal dense-layer network kernel shared by the field decoder and the
// per-pixel encoder: weight-normalized affine layers, skip-append wiring
// (slices of the external input concatenated into chosen layers), inverted
// dropout, exact backprop, ADAM, and the step-decay learning-rate profiles.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rng.hpp"

namespace artgrasp {

enum class Activation { relu, tanh_fn, linear };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh_fn: return "tanh";
        default: return "linear";
    }
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh_fn;
    if (s == "linear") return Activation::linear;
    throw std::invalid_argument("unknown activation: " + s);
}

struct InputSlice {
    int offset = 0;
    int length = 0;
};

struct LayerSpec {
    int width = 0;
    Activation activation = Activation::relu;
    std::vector<InputSlice> appends;  // slices of the external input
    double dropout = 0.0;             // on this layer's output, train mode only
};

struct MlpSpec {
    int external_input = 0;
    std::vector<LayerSpec> layers;

    int layer_input_size(int i) const {
        int n = i == 0 ? 0 : layers[i - 1].width;
        for (const auto& s : layers[i].appends) n += s.length;
        return n;
    }

    int output_size() const { return layers.back().width; }
    int depth() const { return static_cast<int>(layers.size()); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("empty network spec");
        for (int i = 0; i < depth(); ++i) {
            const auto& l = layers[i];
            if (l.width <= 0) throw std::invalid_argument("layer width must be positive");
            if (l.dropout < 0.0 || l.dropout >= 1.0)
                throw std::invalid_argument("dropout must be in [0,1)");
            for (const auto& s : l.appends)
                if (s.offset < 0 || s.length <= 0 || s.offset + s.length > external_input)
                    throw std::invalid_argument("append slice outside external input");
            if (layer_input_size(i) == 0)
                throw std::invalid_argument("layer has no input");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& l : layers) {
            nlohmann::json slices = nlohmann::json::array();
            for (const auto& s : l.appends) slices.push_back({s.offset, s.length});
            jl.push_back({{"width", l.width},
                          {"activation", to_string(l.activation)},
                          {"appends", slices},
                          {"dropout", l.dropout}});
        }
        return {{"external_input", external_input}, {"layers", jl}};
    }

    static MlpSpec from_json(const nlohmann::json& j) {
        MlpSpec spec;
        spec.external_input = j.at("external_input").get<int>();
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.width = lj.at("width").get<int>();
            l.activation = activation_from_string(lj.at("activation").get<std::string>());
            for (const auto& sj : lj.at("appends"))
                l.appends.push_back({sj.at(0).get<int>(), sj.at(1).get<int>()});
            l.dropout = lj.at("dropout").get<double>();
            spec.layers.push_back(std::move(l));
        }
        spec.validate();
        return spec;
    }
};

// Weight-normalized parameterization: W row o = g[o] * v[o] / ||v[o]||.
struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> v;      // out*in, direction vectors
    std::vector<double> g;      // out, gains
    std::vector<double> b;      // out, biases
    std::vector<double> w_eff;  // out*in, cached effective weights
    std::vector<double> v_norm; // out, cached ||v_o||

    void refresh() {
        for (int o = 0; o < out; ++o) {
            const double* vr = &v[static_cast<std::size_t>(o) * in];
            double n2 = 0;
            for (int i = 0; i < in; ++i) n2 += vr[i] * vr[i];
            double n = std::sqrt(n2);
            if (n < 1e-300) throw std::runtime_error("zero direction vector in dense layer");
            v_norm[o] = n;
            double s = g[o] / n;
            double* wr = &w_eff[static_cast<std::size_t>(o) * in];
            for (int i = 0; i < in; ++i) wr[i] = s * vr[i];
        }
    }
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    // He-style init on the direction vectors, unit gains, zero biases
    static MlpParams init(const MlpSpec& spec, Rng& rng) {
        spec.validate();
        MlpParams p;
        p.layers.resize(spec.depth());
        for (int li = 0; li < spec.depth(); ++li) {
            DenseLayer& l = p.layers[li];
            l.in = spec.layer_input_size(li);
            l.out = spec.layers[li].width;
            l.v.resize(static_cast<std::size_t>(l.in) * l.out);
            l.g.assign(l.out, 1.0);
            l.b.assign(l.out, 0.0);
            l.w_eff.resize(l.v.size());
            l.v_norm.resize(l.out);
            double std = std::sqrt(2.0 / l.in);
            for (auto& x : l.v) x = rng.normal() * std;
            l.refresh();
        }
        return p;
    }

    void refresh() {
        for (auto& l : layers) l.refresh();
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.v.size() + l.g.size() + l.b.size();
        return n;
    }
};

// Everything backward needs from one forward pass.
struct ForwardCache {
    bool train_mode = false;
    std::vector<double> external;                 // copy of the raw input
    std::vector<std::vector<double>> inputs;      // assembled input per layer
    std::vector<std::vector<double>> preact;      // pre-activation per layer
    std::vector<std::vector<double>> mask;        // inverted-dropout scale per unit
};

namespace detail {

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0 ? x : 0.0;
        case Activation::tanh_fn: return std::tanh(x);
        default: return x;
    }
}

inline double activate_grad(Activation a, double preact) {
    switch (a) {
        case Activation::relu: return preact > 0 ? 1.0 : 0.0;
        case Activation::tanh_fn: {
            double t = std::tanh(preact);
            return 1.0 - t * t;
        }
        default: return 1.0;
    }
}

} // namespace detail

enum class NetMode { train, eval };

inline std::vector<double> forward(const MlpSpec& spec, const MlpParams& params,
                                   std::span<const double> input, NetMode mode,
                                   Rng& rng, ForwardCache* cache = nullptr) {
    if (static_cast<int>(input.size()) != spec.external_input)
        throw std::invalid_argument("input length does not match network spec");
    bool train = mode == NetMode::train;
    if (cache) {
        cache->train_mode = train;
        cache->external.assign(input.begin(), input.end());
        cache->inputs.assign(spec.depth(), {});
        cache->preact.assign(spec.depth(), {});
        cache->mask.assign(spec.depth(), {});
    }

    std::vector<double> h;
    for (int li = 0; li < spec.depth(); ++li) {
        const LayerSpec& ls = spec.layers[li];
        const DenseLayer& l = params.layers[li];

        std::vector<double> x;
        x.reserve(l.in);
        if (li > 0) x.insert(x.end(), h.begin(), h.end());
        for (const auto& s : ls.appends)
            x.insert(x.end(), input.begin() + s.offset, input.begin() + s.offset + s.length);
        if (static_cast<int>(x.size()) != l.in)
            throw std::runtime_error("assembled layer input size mismatch");

        std::vector<double> z(l.out);
        for (int o = 0; o < l.out; ++o) {
            const double* wr = &l.w_eff[static_cast<std::size_t>(o) * l.in];
            double s = l.b[o];
            for (int i = 0; i < l.in; ++i) s += wr[i] * x[i];
            z[o] = s;
        }

        std::vector<double> y(l.out);
        for (int o = 0; o < l.out; ++o) y[o] = detail::activate(ls.activation, z[o]);

        std::vector<double> m;
        bool last = li == spec.depth() - 1;
        if (train && ls.dropout > 0.0 && !last) {
            m.resize(l.out);
            double keep = 1.0 - ls.dropout;
            for (int o = 0; o < l.out; ++o)
                m[o] = rng.uniform() < ls.dropout ? 0.0 : 1.0 / keep;
            for (int o = 0; o < l.out; ++o) y[o] *= m[o];
        }

        if (cache) {
            cache->inputs[li] = std::move(x);
            cache->preact[li] = z;
            cache->mask[li] = std::move(m);
        }
        h = std::move(y);
    }
    return h;
}

// Gradient accumulators; dW is on the effective weights and converted to
// the weight-norm parameters (v, g) when finalized.
struct MlpGrads {
    std::vector<std::vector<double>> dw;  // per layer, out*in
    std::vector<std::vector<double>> db;  // per layer, out

    static MlpGrads zeros(const MlpParams& p) {
        MlpGrads g;
        g.dw.resize(p.layers.size());
        g.db.resize(p.layers.size());
        for (std::size_t i = 0; i < p.layers.size(); ++i) {
            g.dw[i].assign(p.layers[i].w_eff.size(), 0.0);
            g.db[i].assign(p.layers[i].b.size(), 0.0);
        }
        return g;
    }

    void clear() {
        for (auto& x : dw) std::fill(x.begin(), x.end(), 0.0);
        for (auto& x : db) std::fill(x.begin(), x.end(), 0.0);
    }

    void scale(double s) {
        for (auto& x : dw) for (auto& e : x) e *= s;
        for (auto& x : db) for (auto& e : x) e *= s;
    }
};

// dL/dv_o = (g_o/||v_o||) (dW_o - (dW_o . v̂_o) v̂_o);  dL/dg_o = dW_o . v̂_o
struct ParamGrads {
    std::vector<std::vector<double>> dv, dg, db;
};

inline ParamGrads weight_norm_grads(const MlpParams& params, const MlpGrads& grads) {
    ParamGrads out;
    out.dv.resize(params.layers.size());
    out.dg.resize(params.layers.size());
    out.db = grads.db;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const DenseLayer& l = params.layers[li];
        out.dv[li].assign(l.v.size(), 0.0);
        out.dg[li].assign(l.out, 0.0);
        for (int o = 0; o < l.out; ++o) {
            const double* vr = &l.v[static_cast<std::size_t>(o) * l.in];
            const double* dwr = &grads.dw[li][static_cast<std::size_t>(o) * l.in];
            double n = l.v_norm[o];
            double dot = 0;
            for (int i = 0; i < l.in; ++i) dot += dwr[i] * vr[i];
            dot /= n;  // dW_o . v̂_o
            out.dg[li][o] = dot;
            double s = l.g[o] / n;
            double* dvr = &out.dv[li][static_cast<std::size_t>(o) * l.in];
            for (int i = 0; i < l.in; ++i)
                dvr[i] = s * (dwr[i] - dot * vr[i] / n);
        }
    }
    return out;
}

// Returns the gradient w.r.t. the external input; accumulates into `grads`.
inline std::vector<double> backward(const MlpSpec& spec, const MlpParams& params,
                                    const ForwardCache& cache,
                                    std::span<const double> grad_output,
                                    MlpGrads& grads) {
    if (cache.inputs.size() != static_cast<std::size_t>(spec.depth()))
        throw std::invalid_argument("stale or mismatched forward cache");
    if (static_cast<int>(grad_output.size()) != spec.output_size())
        throw std::invalid_argument("grad_output length mismatch");

    std::vector<double> ext_grad(spec.external_input, 0.0);
    std::vector<double> gy(grad_output.begin(), grad_output.end());

    for (int li = spec.depth() - 1; li >= 0; --li) {
        const LayerSpec& ls = spec.layers[li];
        const DenseLayer& l = params.layers[li];
        const auto& x = cache.inputs[li];
        const auto& z = cache.preact[li];
        const auto& m = cache.mask[li];

        std::vector<double> delta(l.out);
        for (int o = 0; o < l.out; ++o) {
            double gmask = m.empty() ? 1.0 : m[o];
            delta[o] = gy[o] * gmask * detail::activate_grad(ls.activation, z[o]);
        }

        auto& dwl = grads.dw[li];
        auto& dbl = grads.db[li];
        for (int o = 0; o < l.out; ++o) {
            dbl[o] += delta[o];
            double d = delta[o];
            if (d == 0.0) continue;
            double* dwr = &dwl[static_cast<std::size_t>(o) * l.in];
            for (int i = 0; i < l.in; ++i) dwr[i] += d * x[i];
        }

        std::vector<double> dx(l.in, 0.0);
        for (int o = 0; o < l.out; ++o) {
            double d = delta[o];
            if (d == 0.0) continue;
            const double* wr = &l.w_eff[static_cast<std::size_t>(o) * l.in];
            for (int i = 0; i < l.in; ++i) dx[i] += d * wr[i];
        }

        // split dx back into previous-layer grad and external-slice grads
        int pos = li > 0 ? params.layers[li - 1].out : 0;
        if (li > 0) gy.assign(dx.begin(), dx.begin() + pos);
        for (const auto& s : ls.appends) {
            for (int k = 0; k < s.length; ++k) ext_grad[s.offset + k] += dx[pos + k];
            pos += s.length;
        }
    }
    return ext_grad;
}

// ---- ADAM ----

struct AdamState {
    std::vector<double> m, v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState zeros(std::size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state, double lr, const std::string& block_name) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam shape mismatch for block " + block_name);
    for (double gv : grads)
        if (!std::isfinite(gv))
            throw std::runtime_error("non-finite gradient in block " + block_name);
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

// ADAM over a full parameter set, one state per (layer, block)
struct MlpOptimizer {
    std::vector<AdamState> v_state, g_state, b_state;

    static MlpOptimizer init(const MlpParams& p) {
        MlpOptimizer o;
        for (const auto& l : p.layers) {
            o.v_state.push_back(AdamState::zeros(l.v.size()));
            o.g_state.push_back(AdamState::zeros(l.g.size()));
            o.b_state.push_back(AdamState::zeros(l.b.size()));
        }
        return o;
    }

    void step(MlpParams& params, const MlpGrads& grads, double lr) {
        ParamGrads pg = weight_norm_grads(params, grads);
        for (std::size_t li = 0; li < params.layers.size(); ++li) {
            DenseLayer& l = params.layers[li];
            std::string tag = "layer" + std::to_string(li);
            adam_step(l.v, pg.dv[li], v_state[li], lr, tag + ".v");
            adam_step(l.g, pg.dg[li], g_state[li], lr, tag + ".g");
            adam_step(l.b, pg.db[li], b_state[li], lr, tag + ".b");
        }
        params.refresh();
    }
};

// ---- learning-rate schedule ----

struct LrProfile {
    enum class Kind { decoder, encoder } kind = Kind::decoder;
    double base = 1e-3;
    double floor = 2.5e-4;
    double factor = 0.5;
    std::vector<int> decay_epochs{150, 300, 450};

    static LrProfile decoder_profile(int total_epochs = 600) {
        LrProfile p;
        p.kind = Kind::decoder;
        p.decay_epochs = {total_epochs / 4, total_epochs / 2, 3 * total_epochs / 4};
        return p;
    }

    static LrProfile encoder_profile() {
        LrProfile p;
        p.kind = Kind::encoder;
        return p;
    }
};

inline double lr_schedule(int epoch, const LrProfile& profile) {
    if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
    if (profile.kind == LrProfile::Kind::encoder) return profile.base;
    double lr = profile.base;
    for (int e : profile.decay_epochs)
        if (epoch >= e) lr *= profile.factor;
    return std::fmax(lr, profile.floor);
}

// ---- checkpoint I/O ----
// layout: magic "AGCK", u32 header length, header JSON, float32 LE blob
// of all parameters in header block order (v, g, b per layer).

inline void save_checkpoint(const std::string& path, const MlpSpec& spec,
                            const MlpParams& params, const std::string& tag,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const auto& l = params.layers[li];
        std::string base = "layer" + std::to_string(li);
        blocks.push_back({{"name", base + ".v"}, {"shape", {l.out, l.in}}});
        blocks.push_back({{"name", base + ".g"}, {"shape", {l.out}}});
        blocks.push_back({{"name", base + ".b"}, {"shape", {l.out}}});
    }
    nlohmann::json header{{"tag", tag}, {"arch", spec.to_json()}, {"blocks", blocks},
                          {"meta", meta}};
    std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write("AGCK", 4);
    std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(hs.data(), hs.size());
    auto write_block = [&](const std::vector<double>& x) {
        std::vector<float> buf(x.begin(), x.end());
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    };
    for (const auto& l : params.layers) {
        write_block(l.v);
        write_block(l.g);
        write_block(l.b);
    }
}

inline std::pair<MlpSpec, MlpParams> load_checkpoint(const std::string& path,
                                                     std::string* tag_out = nullptr,
                                                     nlohmann::json* meta_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "AGCK", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    std::uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    nlohmann::json header = nlohmann::json::parse(hs);
    if (tag_out) *tag_out = header.value("tag", std::string());
    if (meta_out) *meta_out = header.value("meta", nlohmann::json::object());

    MlpSpec spec = MlpSpec::from_json(header.at("arch"));
    MlpParams params;
    params.layers.resize(spec.depth());
    auto read_block = [&](std::vector<double>& x, std::size_t n) {
        std::vector<float> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(n * sizeof(float)));
        if (!f) throw std::runtime_error("truncated checkpoint: " + path);
        x.assign(buf.begin(), buf.end());
    };
    for (int li = 0; li < spec.depth(); ++li) {
        DenseLayer& l = params.layers[li];
        l.in = spec.layer_input_size(li);
        l.out = spec.layers[li].width;
        read_block(l.v, static_cast<std::size_t>(l.in) * l.out);
        read_block(l.g, l.out);
        read_block(l.b, l.out);
        l.w_eff.resize(l.v.size());
        l.v_norm.resize(l.out);
        l.refresh();
    }
    return {spec, params};
}

} // namespace artgrasp
