#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssfnet/losses.hpp"
#include "ssfnet/ops.hpp"

using namespace ssfnet;

namespace {

RegionLabels labels_for(int h, int w, std::vector<int> pos, std::vector<int> neg) {
    RegionLabels l;
    l.height = h;
    l.width = w;
    l.label.assign(static_cast<std::size_t>(h) * w, Region::Ignore);
    for (int p : pos) l.label[p] = Region::Pos;
    for (int n : neg) l.label[n] = Region::Neg;
    l.pos = std::move(pos);
    l.neg = std::move(neg);
    return l;
}

}  // namespace

TEST_CASE("region assignment") {
    SUBCASE("large centred box marks the centre positive and corners negative") {
        const RegionLabels l = assign_regions(BoundingBox{2, 2, 12, 12}, 17, 17);
        CHECK(l.at(8, 8) == Region::Pos);
        CHECK(l.at(2, 2) == Region::Neg);
        CHECK_FALSE(l.center_outside);
    }
    SUBCASE("centre outside the map") {
        const RegionLabels l = assign_regions(BoundingBox{30, 30, 4, 4}, 17, 17);
        CHECK(l.center_outside);
        CHECK(l.pos.empty());
        CHECK(l.neg.size() == 17u * 17u);
    }
    SUBCASE("counts agree with the per-pixel ellipse test") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> u(0, 1);
        for (int trial = 0; trial < 20; ++trial) {
            const MapGeometry g = MapGeometry::centered(17, 17, 4.0, 96);
            const BoundingBox crop_box = BoundingBox::from_center(30 + 36 * u(rng), 30 + 36 * u(rng), 8 + 30 * u(rng),
                                                                  8 + 30 * u(rng));
            const RegionLabels l = assign_regions(crop_box_to_map(crop_box, g), 17, 17);
            CHECK(l.label == oracle::regions(crop_box, g));
        }
    }
}

TEST_CASE("metric loss values") {
    const std::vector<double> ones(5, 1.0), minus(7, -1.0), c(4, 0.3);
    CHECK(saal_value(ones, minus) == -2.0);
    CHECK(saal_value(c, c) == 0.0);

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> p(6), n(9);
    for (auto& v : p) v = u(rng);
    for (auto& v : n) v = u(rng);
    double pair = 0.0;
    for (double a : p)
        for (double b : n) pair += b - a;
    CHECK(saal_value(p, n) == doctest::Approx(pair / (p.size() * n.size())).epsilon(1e-12));
}

TEST_CASE("metric loss on similarity maps and its gradient") {
    std::mt19937_64 rng(43);
    const Tensor sim = Tensor::uniform(Shape{2, 3, 3, 1}, rng, -1, 1);
    const std::vector<RegionLabels> labels{labels_for(3, 3, {4}, {0, 2, 6, 8}), labels_for(3, 3, {3, 4}, {0, 8})};
    const double got = saal_loss(Var(sim), labels).value().data[0];
    auto at = [&](int n, int k) { return sim.data[static_cast<std::size_t>(n) * 9 + k]; };
    const double l0 = (at(0, 0) + at(0, 2) + at(0, 6) + at(0, 8)) / 4 - at(0, 4);
    const double l1 = (at(1, 0) + at(1, 8)) / 2 - (at(1, 3) + at(1, 4)) / 2;
    CHECK(got == doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-12));

    const auto r =
        check::gradcheck_inputs([&](const std::vector<Var>& v) { return saal_loss(v[0], labels); }, {sim}, rng);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("balanced cross-entropy") {
    const std::vector<RegionLabels> labels{labels_for(2, 2, {0}, {2, 3})};
    SUBCASE("uniform logits give ln 2") {
        CHECK(cls_loss(Var(Tensor::zeros(Shape{1, 2, 2, 2})), labels).value().data[0] ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("confident correct logits approach zero") {
        Tensor cls(Shape{1, 2, 2, 2});
        for (int k = 0; k < 4; ++k) {
            const bool pos = k == 0;
            cls.data[2 * k + 0] = pos ? -30 : 30;
            cls.data[2 * k + 1] = pos ? 30 : -30;
        }
        CHECK(cls_loss(Var(cls), labels).value().data[0] < 1e-12);
    }
    SUBCASE("random logits match the oracle") {
        std::mt19937_64 rng(44);
        const Tensor cls = Tensor::randn(Shape{1, 2, 2, 2}, rng, 2.0);
        CHECK(cls_loss(Var(cls), labels).value().data[0] ==
              doctest::Approx(oracle::cls_loss(cls, labels)).epsilon(1e-12));
    }
}

TEST_CASE("IoU localisation loss") {
    const MapGeometry g = MapGeometry::centered(3, 3, 4.0, 24);  // points at 8, 12, 16
    const BoundingBox gt{6, 7, 10, 9};                            // corners (6,7)-(16,16)
    const std::vector<RegionLabels> labels{labels_for(3, 3, {4}, {0})};
    const std::vector<BoundingBox> gts{gt};
    Tensor loc(Shape{1, 3, 3, 4}, 1.0);
    // centre point (12,12): l,t,r,b reproducing the box exactly
    loc.at(0, 1, 1, 0) = 6;
    loc.at(0, 1, 1, 1) = 5;
    loc.at(0, 1, 1, 2) = 4;
    loc.at(0, 1, 1, 3) = 4;
    CHECK(loc_loss(Var(loc), gts, labels, g).value().data[0] == doctest::Approx(0.0).epsilon(1e-12));

    // shrink the prediction to area 90 / e inside the box: IoU = 1/e
    const double s = std::sqrt(std::exp(-1.0));
    const double w = 10 * s, h = 9 * s;
    loc.at(0, 1, 1, 0) = 12 - (11 - w / 2);
    loc.at(0, 1, 1, 2) = (11 + w / 2) - 12;
    loc.at(0, 1, 1, 1) = 12 - (11.5 - h / 2);
    loc.at(0, 1, 1, 3) = (11.5 + h / 2) - 12;
    CHECK(loc_loss(Var(loc), gts, labels, g).value().data[0] == doctest::Approx(1.0).epsilon(1e-10));

    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u(1, 12);
    for (int trial = 0; trial < 20; ++trial) {
        const double l = u(rng), t = u(rng), r = u(rng), b = u(rng);
        loc.at(0, 1, 1, 0) = l;
        loc.at(0, 1, 1, 1) = t;
        loc.at(0, 1, 1, 2) = r;
        loc.at(0, 1, 1, 3) = b;
        const double ref = oracle::box_iou(12 - l, 12 - t, 12 + r, 12 + b, 6, 7, 16, 16);
        CHECK(loc_loss(Var(loc), gts, labels, g).value().data[0] ==
              doctest::Approx(-std::log(std::max(ref, 1e-6))).epsilon(1e-10));
    }
}

TEST_CASE("weighted total") {
    LossParts parts{Var(Tensor::scalar(0.5)), Var(Tensor::scalar(0.25)), Var(Tensor::scalar(0.1)), Var()};
    CHECK(total_loss(parts, LossWeights{}).value().data[0] == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(total_loss(parts, LossWeights{1, 2, 0}).value().data[0] == doctest::Approx(1.0).epsilon(1e-15));
    parts.saal = Var();
    CHECK(total_loss(parts, LossWeights{}).value().data[0] == doctest::Approx(1.0).epsilon(1e-15));
}
