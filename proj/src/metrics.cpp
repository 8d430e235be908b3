#include "ssfnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include <json.hpp>

#include "ssfnet/error.hpp"

namespace ssfnet {

namespace fs = std::filesystem;

double iou(const BoundingBox& a, const BoundingBox& b) {
    if (!a.valid() || !b.valid()) return 0.0;
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return std::clamp(inter / (a.area() + b.area() - inter), 0.0, 1.0);
}

double center_error(const BoundingBox& a, const BoundingBox& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

SuccessResult success_auc(const std::vector<double>& ious) {
    SuccessResult r;
    r.curve.assign(kSuccessThresholds, 0.0);
    if (ious.empty()) return r;
    std::vector<double> sorted = ious;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < kSuccessThresholds; ++k) {
        const double t = k / 20.0;
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
        r.curve[k] = static_cast<double>(above) / sorted.size();
    }
    for (double v : r.curve) r.auc += v;
    r.auc /= kSuccessThresholds;
    return r;
}

PrecisionResult precision_dp20(const std::vector<double>& center_errs) {
    PrecisionResult r;
    r.curve.assign(kPrecisionThresholds, 0.0);
    if (center_errs.empty()) return r;
    std::vector<double> sorted = center_errs;
    std::sort(sorted.begin(), sorted.end());
    for (int tau = 0; tau < kPrecisionThresholds; ++tau) {
        const auto within = std::upper_bound(sorted.begin(), sorted.end(), static_cast<double>(tau)) - sorted.begin();
        r.curve[tau] = static_cast<double>(within) / sorted.size();
    }
    r.dp20 = r.curve[20];
    return r;
}

EvalResult evaluate_boxes(const std::string& name, const std::vector<BoundingBox>& predicted,
                          const std::vector<BoundingBox>& ground_truth) {
    if (predicted.size() != ground_truth.size()) {
        throw DataError("sequence '" + name + "': " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(ground_truth.size()) + " annotated frames");
    }
    EvalResult r;
    r.name = name;
    for (std::size_t t = 0; t < ground_truth.size(); ++t) {
        if (!ground_truth[t].valid()) continue;
        r.per_frame_iou.push_back(iou(predicted[t], ground_truth[t]));
        r.per_frame_center_err.push_back(center_error(predicted[t], ground_truth[t]));
    }
    const SuccessResult s = success_auc(r.per_frame_iou);
    const PrecisionResult p = precision_dp20(r.per_frame_center_err);
    r.success_curve = s.curve;
    r.precision_curve = p.curve;
    r.auc = s.auc;
    r.dp20 = p.dp20;
    return r;
}

EvalResult mean_result(const std::vector<EvalResult>& results, const std::string& name) {
    EvalResult m;
    m.name = name;
    m.success_curve.assign(kSuccessThresholds, 0.0);
    m.precision_curve.assign(kPrecisionThresholds, 0.0);
    if (results.empty()) return m;
    for (const auto& r : results) {
        for (int k = 0; k < kSuccessThresholds; ++k) m.success_curve[k] += r.success_curve[k];
        for (int k = 0; k < kPrecisionThresholds; ++k) m.precision_curve[k] += r.precision_curve[k];
        m.auc += r.auc;
        m.dp20 += r.dp20;
    }
    const double n = static_cast<double>(results.size());
    for (auto& v : m.success_curve) v /= n;
    for (auto& v : m.precision_curve) v /= n;
    m.auc /= n;
    m.dp20 /= n;
    return m;
}

EvalReport evaluate(const fs::path& results_dir, const fs::path& dataset_dir, const std::optional<std::string>& attribute) {
    if (!fs::is_directory(results_dir)) throw DataError("results directory not found: " + results_dir.string());
    std::vector<std::string> names = list_sequences(dataset_dir);
    std::map<std::string, std::set<std::string>> tags;
    std::vector<std::string> selected;
    for (const auto& n : names) {
        tags[n] = read_attributes(dataset_dir / n / "attributes.txt");
        if (!attribute || tags[n].count(*attribute)) selected.push_back(n);
    }
    std::vector<std::string> missing;
    for (const auto& n : selected)
        if (!fs::exists(results_dir / (n + ".txt"))) missing.push_back(n);
    if (!missing.empty()) {
        std::string msg = "missing results for sequence(s):";
        for (const auto& n : missing) msg += " " + n;
        throw DataError(msg);
    }
    EvalReport report;
    std::map<std::string, std::vector<EvalResult>> by_attr;
    for (const auto& n : selected) {
        const auto gt = read_boxes(dataset_dir / n / "groundtruth_rect.txt");
        const auto pred = read_boxes(results_dir / (n + ".txt"));
        report.sequences.push_back(evaluate_boxes(n, pred, gt));
        for (const auto& a : tags[n]) by_attr[a].push_back(report.sequences.back());
    }
    report.overall = mean_result(report.sequences);
    for (const auto& [a, rs] : by_attr) report.per_attribute[a] = mean_result(rs, a);
    return report;
}

void write_report(const EvalReport& report, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream os(out_dir / "success_curve.csv");
        if (!os) throw DataError("cannot write " + (out_dir / "success_curve.csv").string());
        os << "threshold,success\n" << std::setprecision(17);
        for (int k = 0; k < kSuccessThresholds; ++k) os << k / 20.0 << ',' << report.overall.success_curve[k] << '\n';
    }
    {
        std::ofstream os(out_dir / "precision_curve.csv");
        if (!os) throw DataError("cannot write " + (out_dir / "precision_curve.csv").string());
        os << "threshold_px,precision\n" << std::setprecision(17);
        for (int k = 0; k < kPrecisionThresholds; ++k) os << k << ',' << report.overall.precision_curve[k] << '\n';
    }
    nlohmann::ordered_json j;
    j["auc"] = report.overall.auc;
    j["dp20"] = report.overall.dp20;
    j["sequences"] = nlohmann::ordered_json::object();
    for (const auto& r : report.sequences) {
        j["sequences"][r.name] = {{"auc", r.auc}, {"dp20", r.dp20}, {"frames", r.per_frame_iou.size()}};
    }
    j["attributes"] = nlohmann::ordered_json::object();
    for (const auto& [a, r] : report.per_attribute) j["attributes"][a] = {{"auc", r.auc}, {"dp20", r.dp20}};
    std::ofstream os(out_dir / "summary.json");
    if (!os) throw DataError("cannot write " + (out_dir / "summary.json").string());
    os << j.dump(2) << '\n';
}

}  // namespace ssfnet
