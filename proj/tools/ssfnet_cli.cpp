// ssfnet command-line entry point: synth, train, track, eval, sam-detect, selftest.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "criteria.hpp"
#include "ssfnet/config.hpp"
#include "ssfnet/error.hpp"
#include "ssfnet/metrics.hpp"
#include "ssfnet/sam.hpp"
#include "ssfnet/synth.hpp"

namespace fs = std::filesystem;
using namespace ssfnet;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string data_root;
};

AppConfig resolve(const Globals& g) {
    AppConfig cfg = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
    if (const char* env = std::getenv("SSFNET_DATA_ROOT"); env && *env) cfg.paths.data_root = env;
    for (const auto& o : g.overrides) apply_override(cfg, o);
    if (g.seed) cfg.seed = *g.seed;
    if (!g.data_root.empty()) cfg.paths.data_root = g.data_root;
    validate(cfg);
    return cfg;
}

std::vector<Sequence> load_all(const fs::path& root) {
    std::vector<Sequence> out;
    for (const auto& name : list_sequences(root)) out.push_back(load_sequence(root / name));
    if (out.empty()) throw DataError("no sequences under " + root.string());
    return out;
}

int cmd_synth(const AppConfig& cfg) {
    const fs::path root = cfg.paths.data_root;
    for (int k = 0; k < cfg.synth_sequences; ++k) {
        SynthConfig sc = cfg.synth;
        sc.seed = cfg.synth.seed + 7919ULL * cfg.seed + static_cast<std::uint64_t>(k);
        if (cfg.synth_sequences > 1) {
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "_%03d", k);
            sc.name += suffix;
        }
        save_sequence(synth_sequence(sc), root / sc.name);
        std::printf("wrote %s\n", (root / sc.name).string().c_str());
    }
    return 0;
}

int cmd_train(const AppConfig& cfg) {
    const std::vector<Sequence> data = load_all(cfg.paths.data_root);
    Model model(cfg.model, cfg.seed);
    std::printf("training on %zu sequence(s), %zu trainable arrays, %d steps\n", data.size(),
                model.params().trainable_count(), cfg.train.steps);
    train(model, data, cfg.train, cfg.track.crop, cfg.seed, cfg.paths.train_log, [&](const StepReport& r) {
        if (r.step % 50 == 0 || r.step + 1 == cfg.train.steps) {
            std::printf("step %5d  lr %.5f  cls %.4f  loc %.4f  saal %.4f  total %.4f\n", r.step, r.lr, r.cls, r.loc,
                        r.saal, r.total);
            std::fflush(stdout);
        }
    });
    save_model(model, cfg, cfg.paths.checkpoint);
    std::printf("checkpoint: %s\nlog: %s\n", cfg.paths.checkpoint.c_str(), cfg.paths.train_log.c_str());
    return 0;
}

int cmd_track(const AppConfig& cfg) {
    AppConfig trained;
    Model model = load_model(cfg.paths.checkpoint, &trained);
    TrackerConfig tc = cfg.track;
    tc.crop = trained.track.crop;  // crops must match what the model was trained on
    const fs::path root = cfg.paths.data_root;
    const fs::path out = cfg.paths.results;
    fs::create_directories(out);
    for (const auto& name : list_sequences(root)) {
        const Sequence seq = load_sequence(root / name);
        std::vector<FrameResult> details;
        const auto boxes = track_sequence(model, seq, tc, &details);
        int lost = 0;
        for (const auto& d : details) lost += d.lost;
        write_boxes(out / (name + ".txt"), boxes);
        std::printf("%s: %zu frames, %d lost\n", name.c_str(), boxes.size(), lost);
    }
    return 0;
}

int cmd_eval(const AppConfig& cfg, const std::string& attribute) {
    std::optional<std::string> filter;
    if (!attribute.empty()) filter = attribute;
    const EvalReport report = evaluate(cfg.paths.results, cfg.paths.data_root, filter);
    write_report(report, cfg.paths.report);
    for (const auto& r : report.sequences) std::printf("%-24s auc %.3f dp20 %.3f\n", r.name.c_str(), r.auc, r.dp20);
    std::printf("auc %.3f dp20 %.3f (%zu sequences)\n", report.overall.auc, report.overall.dp20,
                report.sequences.size());
    return 0;
}

std::vector<double> read_spectrum(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read target spectrum " + path.string());
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        std::stringstream ss(tok);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (part.empty()) continue;
            try {
                std::size_t used = 0;
                out.push_back(std::stod(part, &used));
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw DataError("target spectrum: not a number: '" + part + "'");
            }
        }
    }
    if (out.empty()) throw DataError("target spectrum file is empty: " + path.string());
    return out;
}

int cmd_sam(const std::string& cube_path, const std::string& target_path, const std::string& out_path) {
    const Tensor cube = read_cube(cube_path);
    SAMModel m = sam_fit(cube);
    sam_set_target(m, read_spectrum(target_path));
    const Tensor map = sam_map(m);
    if (fs::path(out_path).extension() == ".csv") {
        std::ofstream os(out_path);
        if (!os) throw DataError("cannot write " + out_path);
        os.precision(17);
        for (int i = 0; i < map.shape.h; ++i) {
            for (int j = 0; j < map.shape.w; ++j) os << (j ? "," : "") << map.at(0, i, j, 0);
            os << '\n';
        }
    } else {
        write_cube(out_path, map);
    }
    std::printf("cosine map %dx%d (whitening rank %d) -> %s\n", map.shape.h, map.shape.w, m.rank, out_path.c_str());
    return 0;
}

int cmd_selftest() {
    using namespace ssfnet::criteria;
    const std::vector<std::pair<std::string, std::function<Result()>>> checks = {
        {"shape contract", [] { return shape_contract(); }},
        {"gradient suite", [] { return gradient_suite(); }},
        {"oracle equivalence", [] { return oracle_equivalence(); }},
        {"normalization invariants", [] { return normalization_invariants(); }},
        {"SAAL behavior", [] { return saal_behavior(); }},
        {"ensemble identities", [] { return ensemble_identities(); }},
        {"metric fixed points", [] { return metric_fixed_points(); }},
        {"loss-weight configuration", [] { return loss_weight_sweep(); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < checks.size(); ++k) {
        const Result r = run(static_cast<int>(k) + 1, checks[k].first, checks[k].second);
        std::printf("%s\n", format(r).c_str());
        std::fflush(stdout);
        failures += !r.pass;
    }
    std::printf("%s\n", failures ? "selftest FAILED" : "selftest passed");
    return failures ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SSF-Net hyperspectral/RGB fusion tracker"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("-c,--config", g.config_path, "JSON config file");
    app.add_option("--set", g.overrides, "override, e.g. --set train.steps=200 (repeatable)");
    auto* seed_opt = app.add_option("--seed", seed, "seed for every random choice");
    app.add_option("--data", g.data_root, "dataset root (default: $SSFNET_DATA_ROOT or paths.data_root)");

    auto* synth = app.add_subcommand("synth", "write synthetic sequences");
    auto* trn = app.add_subcommand("train", "train and save a checkpoint");
    auto* trk = app.add_subcommand("track", "track every sequence and write OTB-style result files");
    auto* ev = app.add_subcommand("eval", "success/precision report over a result folder");
    std::string attribute;
    ev->add_option("--attribute", attribute, "only sequences carrying this tag");
    auto* sam = app.add_subcommand("sam-detect", "whitened spectral angle map for one cube");
    std::string cube_path, target_path, out_path = "sam_map.csv";
    sam->add_option("--cube", cube_path, "cube file (.hsc)")->required();
    sam->add_option("--target", target_path, "target spectrum, one value per band")->required();
    sam->add_option("-o,--out", out_path, "output (.csv or cube file)");
    auto* self = app.add_subcommand("selftest", "oracle, gradient and invariant checks");
    auto* show = app.add_subcommand("config", "print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*sam) return cmd_sam(cube_path, target_path, out_path);
        if (*self) return cmd_selftest();
        const AppConfig cfg = resolve(g);
        if (*show) {
            std::printf("%s\n", to_json(cfg).c_str());
            return 0;
        }
        if (*synth) return cmd_synth(cfg);
        if (*trn) return cmd_train(cfg);
        if (*trk) return cmd_track(cfg);
        if (*ev) return cmd_eval(cfg, attribute);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
