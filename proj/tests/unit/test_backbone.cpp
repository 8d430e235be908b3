#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssfnet/backbone.hpp"
#include "ssfnet/ops.hpp"

using namespace ssfnet;

namespace {

double max_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape == b.shape);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Spatial (depthwise 3x3 then 1x1) plus spectral (3-D conv along bands then 1x1), by plain loops.
Tensor s2c_reference(const ParamStore& s, const std::string& p, const Tensor& x) {
    const int H = x.shape.h, W = x.shape.w, D = x.shape.c;
    const Tensor& dw = s.get(p + ".spatial.dw.weight").value;
    const Tensor& pw = s.get(p + ".spatial.pw.weight").value;
    const Tensor& pb = s.get(p + ".spatial.pw.bias").value;
    const Tensor& w3 = s.get(p + ".spectral.conv3d.weight").value;
    const Tensor& b3 = s.get(p + ".spectral.conv3d.bias").value;
    const Tensor& sw = s.get(p + ".spectral.pw.weight").value;
    const Tensor& sb = s.get(p + ".spectral.pw.bias").value;
    const int m = w3.shape.n;
    Tensor spatial(Shape{1, H, W, D}), spectral(Shape{1, H, W, m * D});
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int y = i + ky - 1, xx = j + kx - 1;
                    if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                    for (int d = 0; d < D; ++d) {
                        spatial.at(0, i, j, d) += dw.at(ky, kx, 0, d) * x.at(0, y, xx, d);
                        for (int f = 0; f < m; ++f)
                            for (int kd = 0; kd < 3; ++kd) {
                                const int dd = d + kd - 1;
                                if (dd < 0 || dd >= D) continue;
                                spectral.at(0, i, j, f * D + d) += w3.at(f, kd, ky, kx) * x.at(0, y, xx, dd);
                            }
                    }
                }
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int f = 0; f < m; ++f)
                for (int d = 0; d < D; ++d) spectral.at(0, i, j, f * D + d) += b3.data[f];
    Tensor a = oracle::conv2d(spatial, pw, pb, 1, 0);
    const Tensor b = oracle::conv2d(spectral, sw, sb, 1, 0);
    for (std::size_t k = 0; k < a.size(); ++k) a.data[k] += b.data[k];
    return a;
}

}  // namespace

TEST_CASE("conv2d matches the direct-loop oracle") {
    std::mt19937_64 rng(11);
    for (int stride : {1, 2})
        for (int k : {1, 3}) {
            const Tensor x = Tensor::randn(Shape{2, 7, 6, 3}, rng);
            const Tensor w = Tensor::randn(Shape{k, k, 3, 4}, rng);
            const Tensor b = Tensor::randn(Shape{1, 1, 1, 4}, rng);
            const Tensor got = ops::conv2d(Var(x), Var(w), Var(b), stride, k / 2).value();
            CHECK(max_diff(got, oracle::conv2d(x, w, b, stride, k / 2)) < 1e-12);
        }
}

TEST_CASE("depthwise cross-correlation identities") {
    std::mt19937_64 rng(12);
    const Tensor x = Tensor::randn(Shape{1, 5, 6, 3}, rng);
    SUBCASE("1x1 all-ones template leaves the search features unchanged") {
        const Tensor out = ops::dw_xcorr(Var(Tensor::ones(Shape{1, 1, 1, 3})), Var(x)).value();
        CHECK(out.data == x.data);
    }
    SUBCASE("self-correlation peaks at the single valid position") {
        const Tensor out = ops::dw_xcorr(Var(x), Var(x)).value();
        CHECK(out.shape == Shape{1, 1, 1, 3});
        for (int c = 0; c < 3; ++c) {
            double sq = 0.0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 6; ++j) sq += x.at(0, i, j, c) * x.at(0, i, j, c);
            CHECK(out.at(0, 0, 0, c) == doctest::Approx(sq).epsilon(1e-12));
        }
    }
    SUBCASE("3x3 template over 7x7 search matches the oracle") {
        const Tensor z = Tensor::randn(Shape{1, 3, 3, 4}, rng);
        const Tensor s = Tensor::randn(Shape{1, 7, 7, 4}, rng);
        CHECK(max_diff(ops::dw_xcorr(Var(z), Var(s)).value(), oracle::dw_xcorr(z, s)) < 1e-12);
    }
}

TEST_CASE("S2C is linear in its input when biases are zero") {
    std::mt19937_64 rng(13);
    ParamStore s;
    init_s2c(s, "b", 4, 6, 2, rng);
    const Tensor out = s2c_forward(s, "b", Var(Tensor::zeros(Shape{1, 5, 5, 4})), 1).value();
    CHECK(out.max_abs() == 0.0);
}

TEST_CASE("S2C matches the brute-force reference") {
    std::mt19937_64 rng(14);
    ParamStore s;
    init_s2c(s, "b", 16, 8, 2, rng);
    for (auto& [name, p] : s.items())
        if (name.ends_with("bias")) p.value = Tensor::randn(p.value.shape, rng, 0.1);
    SUBCASE("8x8x16 input") {
        const Tensor x = Tensor::randn(Shape{1, 8, 8, 16}, rng);
        const Tensor ref = s2c_reference(s, "b", x);
        CHECK(max_diff(s2c_forward(s, "b", Var(x), 1).value(), ref) <= 1e-5 * ref.max_abs());
    }
    SUBCASE("1x1 spatial extent") {
        const Tensor x = Tensor::randn(Shape{1, 1, 1, 16}, rng);
        CHECK(max_diff(s2c_forward(s, "b", Var(x), 1).value(), s2c_reference(s, "b", x)) < 1e-12);
    }
}

TEST_CASE("S2CB with zero conv weights reduces to the activated shortcut") {
    std::mt19937_64 rng(15);
    ParamStore s;
    init_s2cb(s, "blk", 4, 6, false, 1, rng);
    for (auto& [name, p] : s.items())
        if (name.find(".s2c") != std::string::npos) p.value = Tensor::zeros(p.value.shape);
    const Tensor x = Tensor::randn(Shape{1, 5, 5, 4}, rng);
    const Tensor out = s2cb_forward(s, "blk", Var(x), false, inference_mode()).value();
    Tensor expect =
        oracle::conv2d(x, s.get("blk.shortcut.weight").value, s.get("blk.shortcut.bias").value, 1, 0);
    for (auto& v : expect.data) v = std::max(v, 0.0);
    CHECK(max_diff(out, expect) < 1e-12);
}

TEST_CASE("S2CB input gradient of the output sum matches central differences") {
    std::mt19937_64 rng(16);
    ParamStore s;
    init_s2cb(s, "blk", 3, 3, false, 1, rng);
    const Tensor x = Tensor::randn(Shape{1, 5, 5, 3}, rng);
    const RunMode mode{ops::NormMode::Running, 0.1, true};
    const auto r = check::gradcheck_inputs(
        [&](const std::vector<Var>& v) { return ops::sum(s2cb_forward(s, "blk", v[0], false, mode)); }, {x}, rng,
        75, 1e-3);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("stacked blocks without downsampling keep spatial dims") {
    std::mt19937_64 rng(17);
    ParamStore s;
    init_s2cb(s, "a", 4, 4, false, 1, rng);
    init_s2cb(s, "b", 4, 4, false, 1, rng);
    const Var x(Tensor::randn(Shape{2, 9, 7, 4}, rng));
    const Var y = s2cb_forward(s, "b", s2cb_forward(s, "a", x, false, training_mode()), false, training_mode());
    CHECK(y.shape() == x.shape());
}

TEST_CASE("HS pyramid stage shapes at desk scale") {
    ModelConfig cfg;
    std::mt19937_64 rng(18);
    ParamStore s;
    init_s2fb(s, cfg, rng);
    NoGradGuard ng;
    for (int side : {64, 128}) {
        const Var x(Tensor::uniform(Shape{1, side, side, 16}, rng, 0, 1));
        const FeaturePyramid f = s2fb_forward(s, cfg, x, inference_mode());
        CHECK(f.stage(1).shape() == Shape{1, side / 2, side / 2, 8});
        CHECK(f.stage(2).shape() == Shape{1, side / 4, side / 4, 16});
        CHECK(f.stage(3).shape() == Shape{1, side / 4, side / 4, 32});
        CHECK(f.stage(4).shape() == Shape{1, side / 4, side / 4, 64});
    }
}

TEST_CASE("RGB pyramid is shape-compatible and finite on a black image") {
    ModelConfig cfg;
    std::mt19937_64 rng(19);
    ParamStore s;
    init_s2fb(s, cfg, rng);
    init_rgb_backbone(s, cfg, rng);
    NoGradGuard ng;
    const FeaturePyramid hs =
        s2fb_forward(s, cfg, Var(Tensor::uniform(Shape{1, 32, 32, 16}, rng, 0, 1)), inference_mode());
    const FeaturePyramid rgb = rgb_forward(s, cfg, Var(Tensor::zeros(Shape{1, 32, 32, 3})), inference_mode());
    for (int k = 1; k <= 4; ++k) {
        CHECK(rgb.stage(k).shape() == hs.stage(k).shape());
        CHECK(rgb.stage(k).value().all_finite());
    }
}
