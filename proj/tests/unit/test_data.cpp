#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ssfnet/crop.hpp"
#include "ssfnet/data.hpp"
#include "ssfnet/error.hpp"
#include "ssfnet/synth.hpp"

using namespace ssfnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ssfnet_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Sequence small_sequence(int frames) {
    SynthConfig sc;
    sc.frames = frames;
    sc.height = 32;
    sc.width = 32;
    sc.object_w = 8;
    sc.object_h = 8;
    sc.distractor = false;
    return synth_sequence(sc);
}

}  // namespace

TEST_CASE("box lines accept commas, tabs and spaces") {
    const BoundingBox a = parse_box_line("1,2,3,4");
    CHECK(a == BoundingBox{1, 2, 3, 4});
    const BoundingBox b = parse_box_line("1.5\t2.25\t3\t4");
    CHECK(b == BoundingBox{1.5, 2.25, 3, 4});
    const BoundingBox c = parse_box_line(" 10 20 30 40 ");
    CHECK(c == BoundingBox{10, 20, 30, 40});
    CHECK_THROWS_AS(parse_box_line("1,2,3"), DataError);
    CHECK_THROWS_AS(parse_box_line("1,2,x,4"), DataError);
}

TEST_CASE("degenerate boxes are not valid") {
    CHECK(BoundingBox{0, 0, 1, 1}.valid());
    CHECK_FALSE(BoundingBox{0, 0, 0, 1}.valid());
    CHECK_FALSE(BoundingBox{0, 0, -1, 1}.valid());
}

TEST_CASE("cube files round-trip bit-exactly") {
    const fs::path dir = scratch("cube");
    std::mt19937_64 rng(3);
    const Tensor t = Tensor::randn(Shape{1, 5, 7, 3}, rng);
    write_cube(dir / "a.hsc", t);
    const Tensor back = read_cube(dir / "a.hsc");
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);

    std::ofstream(dir / "bad.hsc") << "not a cube";
    CHECK_THROWS_AS(read_cube(dir / "bad.hsc"), DataError);
}

TEST_CASE("sequence folders load with frame and annotation counts") {
    const fs::path dir = scratch("seq");
    Sequence seq = small_sequence(3);
    seq.attributes = {"OCC", "SV"};
    save_sequence(seq, dir / "s");
    const Sequence back = load_sequence(dir / "s");
    CHECK(back.size() == 3);
    CHECK(back.frames[0].hs.bands() == 16);
    CHECK(back.attributes == seq.attributes);
    CHECK(back.annotations == seq.annotations);
    CHECK(back.frames == seq.frames);

    // drop one annotation line
    const auto boxes = read_boxes(dir / "s" / "groundtruth_rect.txt");
    write_boxes(dir / "s" / "groundtruth_rect.txt", {boxes[0], boxes[1]});
    CHECK_THROWS_AS(load_sequence(dir / "s"), DataError);
}

TEST_CASE("synthetic sequences are deterministic") {
    SynthConfig sc;
    sc.height = 64;
    sc.width = 64;
    CHECK(synth_sequence(sc) == synth_sequence(sc));
    SynthConfig other = sc;
    other.seed = 8;
    CHECK_FALSE(synth_sequence(sc) == synth_sequence(other));
}

TEST_CASE("distractor matches the object in RGB but not in HS") {
    SynthConfig sc;
    sc.noise = 0.0;
    sc.texture = 0.0;
    const Sequence seq = synth_sequence(sc);
    const SynthTrajectory tr = synth_trajectory(sc);
    const Frame& f = seq.frames[0];
    const BoundingBox& o = tr.object[0];
    const BoundingBox& d = tr.distractor[0];
    // interior pixels, away from anti-aliased borders
    const int oy = static_cast<int>(o.cy()), ox = static_cast<int>(o.cx());
    const int dy = static_cast<int>(d.cy()), dx = static_cast<int>(d.cx());
    for (int c = 0; c < 3; ++c) CHECK(f.rgb.at(oy, ox, c) == doctest::Approx(f.rgb.at(dy, dx, c)).epsilon(1e-12));
    double hs_diff = 0.0;
    for (int b = 0; b < f.hs.bands(); ++b) hs_diff += std::abs(f.hs.at(oy, ox, b) - f.hs.at(dy, dx, b));
    CHECK(hs_diff > 0.1);
}

TEST_CASE("metameric signature agrees on the false-colour bands only") {
    const auto ref = default_object_signature(16);
    const auto meta = metameric_signature(ref);
    const auto triplet = rgb_band_triplet(16);
    for (int b : triplet) CHECK(meta[b] == doctest::Approx(ref[b]));
    double diff = 0.0;
    for (std::size_t b = 0; b < ref.size(); ++b) diff += std::abs(meta[b] - ref[b]);
    CHECK(diff > 0.1);
}

TEST_CASE("noise-free object pixels equal the signature") {
    SynthConfig sc;
    sc.noise = 0.0;
    sc.texture = 0.0;
    sc.distractor = false;
    const Sequence seq = synth_sequence(sc);
    const auto sig = default_object_signature(sc.bands);
    const BoundingBox& o = seq.annotations[0];
    const int y = static_cast<int>(o.cy()), x = static_cast<int>(o.cx());
    for (int b = 0; b < sc.bands; ++b) CHECK(seq.frames[0].hs.at(y, x, b) == doctest::Approx(sig[b]).epsilon(1e-12));
}

TEST_CASE("crop inside the frame at unit scale is the raw subarray") {
    std::mt19937_64 rng(4);
    const Tensor img = Tensor::uniform(Shape{1, 20, 20, 2}, rng, 0, 1);
    // centre (10,10), 8 px output, scale 1: covers pixels 6..13
    const Tensor c = crop_region(img, 10.0, 10.0, 1.0, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 2; ++k) CHECK(c.at(0, i, j, k) == doctest::Approx(img.at(0, 6 + i, 6 + j, k)));
}

TEST_CASE("crop samples outside the image use the channel mean") {
    std::mt19937_64 rng(5);
    const Tensor img = Tensor::uniform(Shape{1, 10, 10, 2}, rng, 0, 1);
    double mean[2] = {0, 0};
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            for (int k = 0; k < 2; ++k) mean[k] += img.at(0, i, j, k) / 100.0;
    const Tensor c = crop_region(img, 0.0, 0.0, 1.0, 8);
    // top-left quadrant lies entirely outside
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 2; ++k) CHECK(c.at(0, i, j, k) == doctest::Approx(mean[k]).epsilon(1e-12));
}

TEST_CASE("crop meta maps boxes to the crop and back") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(10, 100);
    for (int trial = 0; trial < 50; ++trial) {
        const CropMeta m{u(rng), u(rng), u(rng) / 50.0, 96};
        const BoundingBox gt{u(rng), u(rng), u(rng) / 4, u(rng) / 4};
        const BoundingBox back = m.box_to_frame(m.box_to_crop(gt));
        CHECK(std::abs(back.x - gt.x) < 0.5);
        CHECK(std::abs(back.y - gt.y) < 0.5);
        CHECK(std::abs(back.w - gt.w) < 0.5);
        CHECK(std::abs(back.h - gt.h) < 0.5);
    }
}

TEST_CASE("template crop centres the object") {
    const Sequence seq = small_sequence(1);
    const CropConfig cfg{32, 96, 0.5};
    const FrameCrop z = crop_template(seq.frames[0], seq.annotations[0], cfg);
    CHECK(z.hs.height() == 32);
    CHECK(z.rgb.width() == 32);
    CHECK(z.meta.center_x == doctest::Approx(seq.annotations[0].cx()));
    CHECK(z.meta.scale * 32 == doctest::Approx(template_extent(8, 8, 0.5)));
}
