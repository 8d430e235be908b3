// Runs the nine acceptance checks and prints one PASS/FAIL line per check.
// Exit status is non-zero when any check fails.

#include <CLI11.hpp>
#include <cstdio>

#include "criteria.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ssfnet acceptance checks"};
    int steps = 600;
    bool verbose = false;
    std::vector<int> only;
    app.add_option("--steps", steps, "training steps for the end-to-end overfit check")->check(CLI::Range(1, 2000));
    app.add_flag("-v,--verbose", verbose, "print training progress");
    app.add_option("--only", only, "run just these check ids");
    CLI11_PARSE(app, argc, argv);

    using namespace ssfnet::criteria;
    const std::vector<std::pair<std::string, std::function<Result()>>> checks = {
        {"shape contract", [] { return shape_contract(); }},
        {"gradient suite", [] { return gradient_suite(); }},
        {"oracle equivalence", [] { return oracle_equivalence(); }},
        {"normalization invariants", [] { return normalization_invariants(); }},
        {"SAAL behavior", [] { return saal_behavior(); }},
        {"end-to-end overfit", [&] { return end_to_end_overfit({steps, verbose}); }},
        {"ensemble identities", [] { return ensemble_identities(); }},
        {"metric fixed points", [] { return metric_fixed_points(); }},
        {"loss-weight configuration", [] { return loss_weight_sweep(); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < checks.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const Result r = run(id, checks[k].first, checks[k].second);
        std::printf("%s\n", format(r).c_str());
        std::fflush(stdout);
        failures += !r.pass;
    }
    return failures == 0 ? 0 : 1;
}
