#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <artgrasp/net.hpp>

#include <cstdio>
#include <filesystem>

using namespace artgrasp;

namespace {

// central finite differences against backward(), through a fixed linear
// functional L = c . f(x). Dropout nets re-seed the rng per evaluation so
// every call sees the same masks.
void check_gradients(const MlpSpec& spec, MlpParams& params,
                     const std::vector<double>& x, NetMode mode,
                     std::uint64_t mask_seed, double tol = 1e-4) {
    Rng crng(99);
    std::vector<double> c(spec.output_size());
    for (auto& v : c) v = crng.uniform(-1, 1);

    auto eval = [&](MlpParams& p) {
        p.refresh();
        Rng r(mask_seed);
        auto y = forward(spec, p, x, mode, r);
        double L = 0;
        for (int i = 0; i < spec.output_size(); ++i) L += c[i] * y[i];
        return L;
    };

    ForwardCache cache;
    {
        Rng r(mask_seed);
        forward(spec, params, x, mode, r, &cache);
    }
    MlpGrads grads = MlpGrads::zeros(params);
    std::vector<double> dx = backward(spec, params, cache, c, grads);
    ParamGrads pg = weight_norm_grads(params, grads);

    const double h = 1e-5;
    auto check_block = [&](std::vector<double>& block, const std::vector<double>& analytic,
                           const char* name) {
        REQUIRE(block.size() == analytic.size());
        for (std::size_t i = 0; i < block.size(); ++i) {
            double keep = block[i];
            block[i] = keep + h;
            double lp = eval(params);
            block[i] = keep - h;
            double lm = eval(params);
            block[i] = keep;
            double fd = (lp - lm) / (2 * h);
            double denom = std::fmax(1e-6, std::fmax(std::fabs(fd), std::fabs(analytic[i])));
            double rel = std::fabs(fd - analytic[i]) / denom;
            if (rel >= tol) {
                CAPTURE(name);
                CAPTURE(i);
                CAPTURE(fd);
                CAPTURE(analytic[i]);
            }
            CHECK(rel < tol);
        }
        params.refresh();
    };

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        check_block(params.layers[li].v, pg.dv[li], "v");
        check_block(params.layers[li].g, pg.dg[li], "g");
        check_block(params.layers[li].b, pg.db[li], "b");
    }

    // input gradient
    std::vector<double> xv = x;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        auto eval_x = [&](double val) {
            double keep = xv[i];
            xv[i] = val;
            Rng r(mask_seed);
            auto y = forward(spec, params, xv, mode, r);
            xv[i] = keep;
            double L = 0;
            for (int k = 0; k < spec.output_size(); ++k) L += c[k] * y[k];
            return L;
        };
        double fd = (eval_x(xv[i] + h) - eval_x(xv[i] - h)) / (2 * h);
        double denom = std::fmax(1e-6, std::fmax(std::fabs(fd), std::fabs(dx[i])));
        CHECK(std::fabs(fd - dx[i]) / denom < tol);
    }
}

MlpSpec toy_spec() {
    MlpSpec spec;
    spec.external_input = 6;
    spec.layers.push_back({8, Activation::relu, {{0, 6}}, 0.0});
    spec.layers.push_back({7, Activation::tanh_fn, {{2, 3}}, 0.0});
    spec.layers.push_back({4, Activation::linear, {{0, 2}, {4, 2}}, 0.0});
    return spec;
}

} // namespace

TEST_CASE("forward: zero input, zero biases, relu net gives zero output") {
    MlpSpec spec;
    spec.external_input = 4;
    spec.layers.push_back({5, Activation::relu, {{0, 4}}, 0.0});
    spec.layers.push_back({3, Activation::relu, {}, 0.0});
    Rng rng(1);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x(4, 0.0);
    Rng fr(2);
    auto y = forward(spec, p, x, NetMode::eval, fr);
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("forward: tanh output stays inside (-1,1)") {
    MlpSpec spec;
    spec.external_input = 3;
    spec.layers.push_back({16, Activation::relu, {{0, 3}}, 0.0});
    spec.layers.push_back({5, Activation::tanh_fn, {}, 0.0});
    Rng rng(3);
    MlpParams p = MlpParams::init(spec, rng);
    Rng xr(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x{xr.uniform(-10, 10), xr.uniform(-10, 10), xr.uniform(-10, 10)};
        Rng fr(5);
        auto y = forward(spec, p, x, NetMode::eval, fr);
        for (double v : y) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("forward: 2-layer net with hand-set weights matches hand computation") {
    MlpSpec spec;
    spec.external_input = 2;
    spec.layers.push_back({2, Activation::relu, {{0, 2}}, 0.0});
    spec.layers.push_back({1, Activation::tanh_fn, {}, 0.0});
    Rng rng(6);
    MlpParams p = MlpParams::init(spec, rng);
    // W1 = [[6,8],[0,4]], b1 = [1,-1] via weight norm (||v0||=5, ||v1||=2)
    p.layers[0].v = {3, 4, 0, 2};
    p.layers[0].g = {10, 4};
    p.layers[0].b = {1, -1};
    // W2 = [[1,1]], b2 = [0.1]
    p.layers[1].v = {1, 1};
    p.layers[1].g = {std::sqrt(2.0)};
    p.layers[1].b = {0.1};
    p.refresh();

    std::vector<double> x{0.5, -0.25};
    Rng fr(7);
    auto y = forward(spec, p, x, NetMode::eval, fr);
    // h = relu([3-2+1, -1-1]) = [2, 0]; out = tanh(2 + 0 + 0.1)
    CHECK(y[0] == doctest::Approx(std::tanh(2.1)).epsilon(1e-12));
}

TEST_CASE("forward: shape mismatch raises") {
    MlpSpec spec = toy_spec();
    Rng rng(8);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> bad(5, 0.0);
    Rng fr(9);
    CHECK_THROWS_AS(forward(spec, p, bad, NetMode::eval, fr), std::invalid_argument);
}

TEST_CASE("backward: gradients match finite differences on a skip-append net") {
    MlpSpec spec = toy_spec();
    Rng rng(10);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x;
    Rng xr(11);
    for (int i = 0; i < spec.external_input; ++i) x.push_back(xr.uniform(-1, 1));
    check_gradients(spec, p, x, NetMode::eval, 123);
}

TEST_CASE("backward: gradients correct through train-mode dropout") {
    MlpSpec spec;
    spec.external_input = 5;
    spec.layers.push_back({10, Activation::relu, {{0, 5}}, 0.3});
    spec.layers.push_back({6, Activation::relu, {{1, 2}}, 0.2});
    spec.layers.push_back({3, Activation::tanh_fn, {}, 0.0});
    Rng rng(12);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x;
    Rng xr(13);
    for (int i = 0; i < spec.external_input; ++i) x.push_back(xr.uniform(-1, 1));
    check_gradients(spec, p, x, NetMode::train, 77);
}

TEST_CASE("backward: zero grad_output gives zero gradients") {
    MlpSpec spec = toy_spec();
    Rng rng(14);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x(spec.external_input, 0.4);
    ForwardCache cache;
    Rng fr(15);
    forward(spec, p, x, NetMode::eval, fr, &cache);
    MlpGrads grads = MlpGrads::zeros(p);
    std::vector<double> gz(spec.output_size(), 0.0);
    auto dx = backward(spec, p, cache, gz, grads);
    for (double v : dx) CHECK(v == 0.0);
    for (const auto& blk : grads.dw)
        for (double v : blk) CHECK(v == 0.0);
}

TEST_CASE("backward: linear single layer input gradient is W^T grad") {
    MlpSpec spec;
    spec.external_input = 3;
    spec.layers.push_back({2, Activation::linear, {{0, 3}}, 0.0});
    Rng rng(16);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x{0.3, -0.8, 1.2};
    ForwardCache cache;
    Rng fr(17);
    forward(spec, p, x, NetMode::eval, fr, &cache);
    MlpGrads grads = MlpGrads::zeros(p);
    std::vector<double> go{2.0, -1.0};
    auto dx = backward(spec, p, cache, go, grads);
    const auto& l = p.layers[0];
    for (int i = 0; i < 3; ++i) {
        double want = l.w_eff[i] * go[0] + l.w_eff[3 + i] * go[1];
        CHECK(dx[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("dropout: scaled train-mode forward is unbiased vs eval mode") {
    MlpSpec spec;
    spec.external_input = 4;
    spec.layers.push_back({32, Activation::relu, {{0, 4}}, 0.25});
    spec.layers.push_back({1, Activation::linear, {}, 0.0});
    Rng rng(18);
    MlpParams p = MlpParams::init(spec, rng);
    std::vector<double> x{0.7, -0.2, 0.5, 1.1};
    Rng er(19);
    double ref = forward(spec, p, x, NetMode::eval, er)[0];

    Rng mr(20);
    double acc = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) acc += forward(spec, p, x, NetMode::train, mr)[0];
    acc /= draws;
    CHECK(std::fabs(acc - ref) / std::fmax(1e-9, std::fabs(ref)) < 0.02);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    std::vector<double> params{1.0, -2.0, 3.0};
    std::vector<double> grads{0.0, 0.0, 0.0};
    AdamState st = AdamState::zeros(3);
    adam_step(params, grads, st, 1e-3, "blk");
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);
    CHECK(params[2] == 3.0);
}

TEST_CASE("adam: first step with constant gradient moves by about lr") {
    std::vector<double> params{0.0, 0.0};
    std::vector<double> grads{0.5, -3.0};
    AdamState st = AdamState::zeros(2);
    adam_step(params, grads, st, 1e-3, "blk");
    // closed form: delta = lr * g / (|g| + eps) ~= lr * sign(g)
    CHECK(params[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(params[1] == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam: two steps match a scalar reference implementation") {
    std::vector<double> params{0.2};
    AdamState st = AdamState::zeros(1);
    double g1 = 0.7, g2 = -0.3, lr = 1e-2;
    std::vector<double> gv{g1};
    adam_step(params, gv, st, lr, "blk");
    gv[0] = g2;
    adam_step(params, gv, st, lr, "blk");

    // scalar reference
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0, pref = 0.2;
    for (int t = 1; t <= 2; ++t) {
        double g = t == 1 ? g1 : g2;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double mh = m / (1 - std::pow(b1, t));
        double vh = v / (1 - std::pow(b2, t));
        pref -= lr * mh / (std::sqrt(vh) + eps);
    }
    CHECK(params[0] == doctest::Approx(pref).epsilon(1e-14));
}

TEST_CASE("adam: non-finite gradient names the offending block") {
    std::vector<double> params{1.0};
    std::vector<double> grads{std::nan("")};
    AdamState st = AdamState::zeros(1);
    CHECK_THROWS_WITH_AS(adam_step(params, grads, st, 1e-3, "layer3.v"),
                         doctest::Contains("layer3.v"), std::runtime_error);
}

TEST_CASE("lr schedule: decoder profile endpoints and monotonicity") {
    LrProfile dec = LrProfile::decoder_profile(600);
    CHECK(lr_schedule(0, dec) == doctest::Approx(1e-3));
    CHECK(lr_schedule(599, dec) == doctest::Approx(2.5e-4));
    double prev = lr_schedule(0, dec);
    for (int e = 1; e < 600; ++e) {
        double lr = lr_schedule(e, dec);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
    LrProfile enc = LrProfile::encoder_profile();
    CHECK(lr_schedule(0, enc) == doctest::Approx(1e-3));
    CHECK(lr_schedule(10000, enc) == doctest::Approx(1e-3));
}

TEST_CASE("checkpoint: save/load round trip preserves behavior") {
    MlpSpec spec = toy_spec();
    Rng rng(21);
    MlpParams p = MlpParams::init(spec, rng);
    std::string path = (std::filesystem::temp_directory_path() / "ag_ckpt_test.bin").string();
    save_checkpoint(path, spec, p, "test-v1");

    std::string tag;
    auto [spec2, p2] = load_checkpoint(path, &tag);
    CHECK(tag == "test-v1");
    CHECK(spec2.external_input == spec.external_input);
    CHECK(spec2.depth() == spec.depth());

    std::vector<double> x(spec.external_input);
    Rng xr(22);
    for (auto& v : x) v = xr.uniform(-1, 1);
    Rng f1(23), f2(23);
    auto y1 = forward(spec, p, x, NetMode::eval, f1);
    auto y2 = forward(spec2, p2, x, NetMode::eval, f2);
    for (int i = 0; i < spec.output_size(); ++i)
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-5));
    std::filesystem::remove(path);
}

TEST_CASE("batch gradient accumulation is independent of sample order") {
    MlpSpec spec = toy_spec();
    Rng rng(24);
    MlpParams p = MlpParams::init(spec, rng);
    Rng xr(25);
    std::vector<std::vector<double>> xs;
    for (int s = 0; s < 8; ++s) {
        std::vector<double> x;
        for (int i = 0; i < spec.external_input; ++i) x.push_back(xr.uniform(-1, 1));
        xs.push_back(std::move(x));
    }
    std::vector<double> c(spec.output_size(), 0.5);

    auto accumulate = [&](const std::vector<int>& order) {
        MlpGrads g = MlpGrads::zeros(p);
        for (int idx : order) {
            ForwardCache cache;
            Rng fr(30);
            forward(spec, p, xs[idx], NetMode::eval, fr, &cache);
            backward(spec, p, cache, c, g);
        }
        return g;
    };
    MlpGrads a = accumulate({0, 1, 2, 3, 4, 5, 6, 7});
    MlpGrads b = accumulate({7, 3, 5, 1, 6, 0, 2, 4});
    for (std::size_t li = 0; li < a.dw.size(); ++li)
        for (std::size_t i = 0; i < a.dw[li].size(); ++i)
            CHECK(a.dw[li][i] == doctest::Approx(b.dw[li][i]).epsilon(1e-9));
}
