#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ssfnet/config.hpp"
#include "ssfnet/error.hpp"

using namespace ssfnet;
namespace fs = std::filesystem;

TEST_CASE("configuration survives a JSON round trip") {
    AppConfig cfg;
    cfg.seed = 42;
    cfg.model.channels = 12;
    cfg.synth.motion = MotionModel::Circular;
    cfg.train.weights.gamma = 0.5;
    cfg.track.cosine_window = true;
    cfg.track.norm = ops::NormMode::BatchNoUpdate;
    cfg.synth.seed = 11;
    cfg.paths.results = "elsewhere";
    CHECK(config_from_json(to_json(cfg)) == cfg);
}

TEST_CASE("unknown keys and wrong types are rejected") {
    CHECK_THROWS_AS(config_from_json(R"({"train": {"lr": 0.1, "lrr": 0.2}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"train": {"steps": "many"}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
}

TEST_CASE("partial files fall back to defaults") {
    const AppConfig cfg = config_from_json(R"({"train": {"steps": 7}})");
    CHECK(cfg.train.steps == 7);
    CHECK(cfg.train.lr == AppConfig{}.train.lr);
}

TEST_CASE("dotted overrides") {
    AppConfig cfg;
    apply_override(cfg, "train.gamma=1.5");
    apply_override(cfg, "model.channels=16");
    apply_override(cfg, "paths.results=out/x");
    CHECK(cfg.train.weights.gamma == 1.5);
    CHECK(cfg.model.channels == 16);
    CHECK(cfg.paths.results == "out/x");
    CHECK_THROWS_AS(apply_override(cfg, "train.nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), ConfigError);
}

TEST_CASE("validation catches out-of-range values") {
    AppConfig cfg;
    cfg.train.steps = -1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = AppConfig{};
    cfg.synth.bands = 8;  // model still expects 16
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    CHECK_NOTHROW(validate(AppConfig{}));
}

TEST_CASE("model checkpoints round-trip") {
    const fs::path dir = fs::temp_directory_path() / "ssfnet_unit_ckpt";
    fs::remove_all(dir);
    AppConfig cfg;
    cfg.seed = 3;
    Model model(cfg.model, cfg.seed);
    model.params().get("ensemble.lambda1").value = Tensor::scalar(0.123);
    save_model(model, cfg, dir / "m.ckpt");
    AppConfig back_cfg;
    const Model back = load_model(dir / "m.ckpt", &back_cfg);
    CHECK(back_cfg == cfg);
    CHECK(back.params().values() == model.params().values());

    std::ofstream(dir / "junk.ckpt") << "junk";
    CHECK_THROWS_AS(load_model(dir / "junk.ckpt"), DataError);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"desk.json", "paper_scale.json"}) {
        const fs::path p = fs::path(SSFNET_SOURCE_DIR) / "configs" / name;
        INFO(p.string());
        CHECK_NOTHROW(load_config(p));
    }
    const AppConfig paper = load_config(fs::path(SSFNET_SOURCE_DIR) / "configs" / "paper_scale.json");
    CHECK(paper.model.channels == 256);
    CHECK(paper.train.batch == 30);
    CHECK(paper.track.crop.template_size == 127);
    CHECK(paper.track.crop.search_size == 255);
}
