#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ssfnet/error.hpp"
#include "ssfnet/metrics.hpp"
#include "ssfnet/sam.hpp"
#include "ssfnet/synth.hpp"

using namespace ssfnet;
namespace fs = std::filesystem;

TEST_CASE("identity second moment gives identity whitening") {
    // 4x1 cube whose rows are scaled unit vectors: M = (1/4) * 4 I = I
    Tensor cube(Shape{1, 4, 1, 4});
    for (int i = 0; i < 4; ++i) cube.at(0, i, 0, i) = 2.0;
    const SAMModel m = sam_fit(cube);
    CHECK((m.M_inv_sqrt - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("whitening is a projector onto the range of M") {
    std::mt19937_64 rng(31);
    const Tensor cube = Tensor::randn(Shape{1, 4, 4, 8}, rng);
    const SAMModel m = sam_fit(cube);
    const Eigen::MatrixXd P = m.M_inv_sqrt * m.M * m.M_inv_sqrt;
    CHECK((P - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank-deficient cubes stay finite") {
    std::mt19937_64 rng(32);
    Tensor cube = Tensor::randn(Shape{1, 4, 4, 5}, rng);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cube.at(0, i, j, 4) = cube.at(0, i, j, 0);
    SAMModel m = sam_fit(cube);
    CHECK(m.rank == 4);
    CHECK(m.M_inv_sqrt.allFinite());
    sam_set_target(m, {1, 2, 3, 4, 1});
    for (double v : sam_map(m).data) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) <= 1.0 + 1e-12);
    }
}

TEST_CASE("parallel and antiparallel spectra score plus and minus one") {
    std::mt19937_64 rng(33);
    Tensor cube = Tensor::randn(Shape{1, 5, 5, 6}, rng);
    const std::vector<double> t{0.3, -0.2, 0.9, 0.1, 0.5, -0.4};
    for (int b = 0; b < 6; ++b) {
        cube.at(0, 1, 1, b) = 2.0 * t[b];
        cube.at(0, 3, 2, b) = -t[b];
    }
    SAMModel m = sam_fit(cube);
    sam_set_target(m, t);
    CHECK(sam_score(m, 1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sam_score(m, 3, 2) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sam_score(m, 0, 4) == doctest::Approx(oracle::sam_score(cube, t, 0, 4)).epsilon(1e-8));
}

TEST_CASE("object pixels outscore the background on a synthetic scene") {
    SynthConfig sc;
    sc.height = 48;
    sc.width = 48;
    sc.frames = 1;
    sc.distractor = false;
    const Sequence seq = synth_sequence(sc);
    SAMModel m = sam_fit(seq.frames[0].hs.tensor());
    sam_set_target(m, default_object_signature(sc.bands));
    const BoundingBox& o = seq.annotations[0];
    double in = 0.0, out = 0.0;
    int n_in = 0, n_out = 0;
    for (int i = 0; i < 48; ++i)
        for (int j = 0; j < 48; ++j) {
            const bool inside = j >= o.x && j < o.right() && i >= o.y && i < o.bottom();
            (inside ? in : out) += sam_score(m, i, j);
            (inside ? n_in : n_out) += 1;
        }
    CHECK(in / n_in > out / n_out);
}

TEST_CASE("IoU and centre error") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
    CHECK(iou({0, 0, 2, 2}, {5, 5, 2, 2}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    CHECK(iou({0, 0, 0, 2}, {0, 0, 2, 2}) == 0.0);
    CHECK(center_error({0, 0, 2, 2}, {3, 4, 2, 2}) == doctest::Approx(5.0));
}

TEST_CASE("success and precision conventions") {
    CHECK(success_auc(std::vector<double>(10, 1.0)).auc == doctest::Approx(20.0 / 21.0).epsilon(1e-12));
    CHECK(success_auc(std::vector<double>(10, 0.0)).auc == 0.0);
    CHECK(precision_dp20(std::vector<double>(10, 0.0)).dp20 == 1.0);
    CHECK(precision_dp20(std::vector<double>(10, 25.0)).dp20 == 0.0);
    CHECK(precision_dp20({20.0}).dp20 == 1.0);

    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> ious(37), errs(37);
    for (auto& v : ious) v = std::round(u(rng) * 40) / 40;  // lands on thresholds too
    for (auto& v : errs) v = std::round(u(rng) * 60);
    CHECK(success_auc(ious).curve == oracle::success_curve(ious));
    CHECK(precision_dp20(errs).curve == oracle::precision_curve(errs));
}

TEST_CASE("evaluation over result folders") {
    const fs::path root = fs::temp_directory_path() / "ssfnet_unit_eval";
    fs::remove_all(root);
    const fs::path data = root / "data", results = root / "results";
    fs::create_directories(results);
    for (int k = 0; k < 4; ++k) {
        SynthConfig sc;
        sc.frames = 3;
        sc.height = 32;
        sc.width = 32;
        sc.object_w = 8;
        sc.object_h = 8;
        sc.seed = 100 + k;
        sc.name = "seq" + std::to_string(k);
        sc.attributes = {k % 2 ? "OCC" : "FM"};
        Sequence seq = synth_sequence(sc);
        save_sequence(seq, data / sc.name);
        write_boxes(results / (sc.name + ".txt"), seq.annotations);
    }
    const EvalReport all = evaluate(results, data);
    CHECK(all.sequences.size() == 4);
    CHECK(all.overall.auc == doctest::Approx(20.0 / 21.0).epsilon(1e-12));
    CHECK(all.overall.dp20 == 1.0);
    REQUIRE(all.per_attribute.count("OCC") == 1);

    const EvalReport occ = evaluate(results, data, std::string("OCC"));
    const EvalReport fm = evaluate(results, data, std::string("FM"));
    CHECK(occ.sequences.size() == 2);
    CHECK(fm.sequences.size() == 2);
    for (const auto& r : occ.sequences) CHECK((r.name == "seq1" || r.name == "seq3"));

    write_report(all, root / "report");
    CHECK(fs::exists(root / "report" / "summary.json"));
    CHECK(fs::exists(root / "report" / "success_curve.csv"));

    fs::remove(results / "seq2.txt");
    try {
        evaluate(results, data);
        FAIL("missing results accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("seq2") != std::string::npos);
    }
}
