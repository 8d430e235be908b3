#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssfnet/fusion.hpp"
#include "ssfnet/head.hpp"

using namespace ssfnet;

namespace {

std::vector<double> as_vector(const Tensor& t) { return t.data; }

}  // namespace

TEST_CASE("SAFM modality weights form a softmax") {
    std::mt19937_64 rng(21);
    ParamStore s;
    init_safm(s, "f", 5, rng);
    s.get("f.inter.bias").value = Tensor::scalar(0.3);
    const Var R(Tensor::randn(Shape{2, 4, 4, 8}, rng));
    const Var H(Tensor::randn(Shape{2, 4, 4, 8}, rng));
    const AttentionState st = safm_fuse(s, "f", R, H).state;
    for (std::size_t i = 0; i < st.W_inter0.size(); ++i)
        CHECK(st.W_inter0.data[i] + st.W_inter1.data[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("equal inter-modality embeddings give weights of one half") {
    std::mt19937_64 rng(22);
    ParamStore s;
    init_safm(s, "f", 5, rng);
    const Var R(Tensor::randn(Shape{1, 3, 3, 6}, rng));
    const AttentionState st = safm_fuse(s, "f", R, R).state;
    for (std::size_t i = 0; i < st.W_inter0.size(); ++i) {
        CHECK(st.W_inter0.data[i] == 0.5);
        CHECK(st.W_inter1.data[i] == 0.5);
    }
}

TEST_CASE("SAFM matches the scalar oracle and its gradients") {
    std::mt19937_64 rng(23);
    ParamStore s;
    init_safm(s, "f", 5, rng);
    s.get("f.intra.bias").value = Tensor::scalar(-0.2);
    s.get("f.inter.bias").value = Tensor::scalar(0.1);
    const Tensor R = Tensor::randn(Shape{1, 4, 4, 8}, rng);
    const Tensor H = Tensor::randn(Shape{1, 4, 4, 8}, rng);
    const SafmResult got = safm_fuse(s, "f", Var(R), Var(H));
    const oracle::SafmOut ref = oracle::safm(R, H, as_vector(s.get("f.intra.weight").value), -0.2,
                                             as_vector(s.get("f.inter.weight").value), 0.1);
    for (std::size_t i = 0; i < R.size(); ++i) CHECK(std::abs(got.fused.value().data[i] - ref.fused.data[i]) < 1e-6);

    const auto r = check::gradcheck_inputs(
        [&](const std::vector<Var>& v) { return ops::sum(safm_fuse(s, "f", v[0], v[1]).fused); }, {R, H}, rng);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("pyramid fusion replaces stages 2 to 4 only") {
    ModelConfig cfg;
    std::mt19937_64 rng(24);
    ParamStore s;
    init_fusion(s, cfg, rng);
    CHECK(s.contains("safm.stage2.intra.weight"));
    CHECK(s.contains("safm.stage3.intra.weight"));
    CHECK(s.contains("safm.stage4.intra.weight"));
    CHECK_FALSE(s.contains("safm.stage1.intra.weight"));

    FeaturePyramid rgb{Stream::RGB, {}}, hs{Stream::HS, {}};
    for (int k = 1; k <= 4; ++k) {
        const Shape sh{1, 4, 4, 8 << (k - 1)};
        rgb.stage(k) = Var(Tensor::randn(sh, rng));
        hs.stage(k) = Var(Tensor::randn(sh, rng));
    }
    const FeaturePyramid out = fuse_pyramids(s, rgb, hs);
    CHECK(out.stage(1).node() == hs.stage(1).node());
    for (int k = 2; k <= 4; ++k) {
        CHECK(out.stage(k).shape() == hs.stage(k).shape());
        CHECK_FALSE(out.stage(k).value().data == hs.stage(k).value().data);
    }
}

TEST_CASE("SAA branch") {
    ModelConfig cfg;
    std::mt19937_64 rng(25);
    ParamStore s;
    init_head(s, cfg, HeadKind::HS, rng);
    const Tensor z = Tensor::randn(Shape{1, 3, 3, 16}, rng);
    const Tensor x = Tensor::randn(Shape{1, 5, 5, 16}, rng);

    SUBCASE("zero projection weights leave the bias") {
        s.get("head.saa.proj.weight").value = Tensor::zeros(s.get("head.saa.proj.weight").value.shape);
        s.get("head.saa.proj.bias").value = Tensor::scalar(0.7);
        const Tensor saa = saa_forward(s, 2, Var(z), Var(x)).saa.value();
        for (double v : saa.data) CHECK(v == 0.7);
    }
    SUBCASE("matches the composition of reference pieces") {
        auto embed = [&](const Tensor& f, const std::string& which) {
            Tensor e = oracle::conv2d(f, s.get("head.saa.embed_" + which + ".stage2.weight").value,
                                      s.get("head.saa.embed_" + which + ".stage2.bias").value, 1, 0);
            for (int i = 0; i < e.shape.h; ++i)
                for (int j = 0; j < e.shape.w; ++j) {
                    double n = 0.0;
                    for (int c = 0; c < e.shape.c; ++c) n += e.at(0, i, j, c) * e.at(0, i, j, c);
                    for (int c = 0; c < e.shape.c; ++c) e.at(0, i, j, c) /= std::sqrt(n);
                }
            return e;
        };
        const Tensor corr = oracle::dw_xcorr(embed(z, "z"), embed(x, "x"));
        const Tensor ref =
            oracle::conv2d(corr, s.get("head.saa.proj.weight").value, s.get("head.saa.proj.bias").value, 1, 0);
        const PredictionMaps got = saa_forward(s, 2, Var(z), Var(x));
        REQUIRE(got.saa.shape() == ref.shape);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got.saa.value().data[i] - ref.data[i]) < 1e-10);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (int c = 0; c < corr.shape.c; ++c) acc += corr.at(0, i, j, c);
                CHECK(got.sim.value().at(0, i, j, 0) == doctest::Approx(acc / 9.0).epsilon(1e-10));
            }
    }
    SUBCASE("gradients") {
        const auto r = check::gradcheck_inputs(
            [&](const std::vector<Var>& v) { return saa_forward(s, 2, v[0], v[1]).saa; }, {z, x}, rng);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("CLS/LOC maps follow the correlation shape and LOC is positive") {
    ModelConfig cfg;
    std::mt19937_64 rng(26);
    ParamStore s;
    init_head(s, cfg, HeadKind::RGB, rng);
    for (auto& [name, p] : s.items())
        if (name.find(".loc.out.weight") != std::string::npos) p.value = Tensor::randn(p.value.shape, rng, 5.0);
    const Var z(Tensor::randn(Shape{2, 4, 4, 32}, rng));
    const Var x(Tensor::randn(Shape{2, 12, 12, 32}, rng));
    const PredictionMaps m = cls_loc_forward(s, cfg, HeadKind::RGB, 3, z, x);
    CHECK(m.cls.shape() == Shape{2, 9, 9, 2});
    CHECK(m.loc.shape() == Shape{2, 9, 9, 4});
    for (double v : m.loc.value().data) CHECK(v > 0.0);
    CHECK_FALSE(m.saa.defined());
}

TEST_CASE("offset decoding") {
    const Corners c = decode_offsets(10, 10, 5, 5, 5, 5);
    CHECK(c.x1 == 5);
    CHECK(c.y1 == 5);
    CHECK(c.x2 == 15);
    CHECK(c.y2 == 15);
}

TEST_CASE("centred map geometry") {
    const MapGeometry g = MapGeometry::centered(17, 17, 4.0, 96);
    CHECK(g.point_x(8) == doctest::Approx(48.0));
    CHECK(g.point_y(8) == doctest::Approx(48.0));
}
