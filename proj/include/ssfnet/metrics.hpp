#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssfnet/data.hpp"

namespace ssfnet {

inline constexpr int kSuccessThresholds = 21;   // 0.00, 0.05, ..., 1.00
inline constexpr int kPrecisionThresholds = 51;  // 0..50 px

/// Overlap of two continuous boxes; 0 when either is degenerate.
double iou(const BoundingBox& a, const BoundingBox& b);
double center_error(const BoundingBox& a, const BoundingBox& b);

struct SuccessResult {
    std::vector<double> curve;  // fraction with IoU > t
    double auc = 0.0;
};
struct PrecisionResult {
    std::vector<double> curve;  // fraction with error <= tau
    double dp20 = 0.0;
};

SuccessResult success_auc(const std::vector<double>& ious);
PrecisionResult precision_dp20(const std::vector<double>& center_errs);

struct EvalResult {
    std::string name;
    std::vector<double> per_frame_iou;
    std::vector<double> per_frame_center_err;
    std::vector<double> success_curve;
    std::vector<double> precision_curve;
    double auc = 0.0;
    double dp20 = 0.0;
};

/// Scores one sequence; frames whose ground truth is degenerate are skipped.
EvalResult evaluate_boxes(const std::string& name, const std::vector<BoundingBox>& predicted,
                          const std::vector<BoundingBox>& ground_truth);

/// Curves averaged over sequences.
EvalResult mean_result(const std::vector<EvalResult>& results, const std::string& name = "mean");

struct EvalReport {
    std::vector<EvalResult> sequences;
    EvalResult overall;
    std::map<std::string, EvalResult> per_attribute;
};

/// Per-sequence ground truth is `<dataset_dir>/<seq>/groundtruth_rect.txt`, tags in
/// `attributes.txt`; predictions are `<results_dir>/<seq>.txt`. When attribute is set
/// only sequences carrying it are scored.
EvalReport evaluate(const std::filesystem::path& results_dir, const std::filesystem::path& dataset_dir,
                    const std::optional<std::string>& attribute = std::nullopt);

/// Writes success_curve.csv, precision_curve.csv and summary.json into out_dir.
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace ssfnet
