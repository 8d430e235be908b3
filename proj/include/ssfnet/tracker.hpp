#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ssfnet/crop.hpp"
#include "ssfnet/fusion.hpp"
#include "ssfnet/head.hpp"

namespace ssfnet {

/// Bi-stream network: S2FB + RGB stand-in, SAFM at stages 2-4, SAAM head on the
/// fused HS features, CLS/LOC head on raw RGB features, ensemble weights.
class Model {
public:
    explicit Model(ModelConfig cfg, std::uint64_t seed = 0);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    /// Sets the frozen RGB stream's BN running statistics from one batch of
    /// images (stand-in for pre-trained statistics). No-op when not frozen.
    void calibrate_rgb_statistics(const Tensor& rgb_batch);
    /// Loads `rgb.*` arrays from an externally converted checkpoint; every
    /// RGB-stream array must be present.
    void load_rgb_weights(const std::filesystem::path& path);

private:
    ModelConfig cfg_;
    ParamStore params_;
};

/// Trainable ensemble scalars, read from `ensemble.lambda1` / `ensemble.lambda2`.
struct EnsembleWeights {
    Var lambda1;
    Var lambda2;
    static EnsembleWeights from(ParamStore& store);
    static EnsembleWeights constant(double l1, double l2);
};

struct TemplateFeatures {
    FeaturePyramid hs;   // SAFM-fused HS pyramid
    FeaturePyramid rgb;  // raw RGB pyramid
};

struct PairOutput {
    std::array<PredictionMaps, 3> hs;   // stages 2, 3, 4
    std::array<PredictionMaps, 3> rgb;
    PredictionMaps hs_aggregated;
    PredictionMaps rgb_aggregated;
    PredictionMaps combined;  // ensemble of the aggregated streams
    MapGeometry geometry;
};

/// Pads a batch on the bottom/right with per-channel means up to the next multiple of 4.
Tensor pad_to_multiple_of_4(const Tensor& batch);

TemplateFeatures encode_template(Model& model, const Tensor& hs, const Tensor& rgb, const RunMode& mode);
PairOutput forward_search(Model& model, const TemplateFeatures& tmpl, const Tensor& hs, const Tensor& rgb,
                          const RunMode& mode);
/// Template and search batches [N,*,*,B] / [N,*,*,3] through both streams and heads.
PairOutput forward_pair(Model& model, const Tensor& z_hs, const Tensor& z_rgb, const Tensor& x_hs,
                        const Tensor& x_rgb, const RunMode& mode);

/// cls/loc = lambda1 * hs + lambda2 * rgb; saa/sim come from the HS maps.
PredictionMaps ensemble(const PredictionMaps& hs, const PredictionMaps& rgb, const EnsembleWeights& w);

/// Unweighted mean over stages; maps whose spatial size differs from the first
/// are bilinearly resized to it.
PredictionMaps aggregate_stages(std::span<const PredictionMaps> maps);

struct TrackerConfig {
    CropConfig crop{32, 96, 0.5};
    bool cosine_window = false;
    double window_influence = 0.3;
    double size_ema = 0.3;
    /// Normalisation of the trainable streams at inference; the frozen RGB stream always uses running statistics.
    ops::NormMode norm = ops::NormMode::Running;
    bool operator==(const TrackerConfig&) const = default;
};

struct TrackState {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    TemplateFeatures template_feats;
    CropMeta crop_meta;
    bool lost = false;
};

struct FrameResult {
    BoundingBox box;
    double score = 0.0;
    bool lost = false;
    int peak_i = 0;
    int peak_j = 0;
    Tensor response;     // [1,h,w,1]
    Tensor hs_response;  // HS stream only: p_fg(HS CLS) * normalize01(SAA)
    CropMeta meta;
    MapGeometry geometry;
};

/// Min-max normalisation to [0, 1]; a constant map becomes all ones.
Tensor normalize01(const Tensor& map);
/// Foreground probability of a [1,h,w,2] logit map, as [1,h,w,1].
Tensor foreground_probability(const Tensor& cls);
/// R = p_fg * normalize01(saa).
Tensor combine_response(const Tensor& cls, const Tensor& saa);
/// Arg-max of a [1,h,w,1] map; ties go to the cell nearest the map centre.
std::pair<int, int> response_peak(const Tensor& response);

TrackState init_track(Model& model, const Frame& frame, const BoundingBox& box, const TrackerConfig& cfg);
FrameResult infer_frame(Model& model, TrackState& state, const Frame& frame, const TrackerConfig& cfg);
/// Initialises on frame 0 with the annotation, then tracks frames 1..n-1.
std::vector<BoundingBox> track_sequence(Model& model, const Sequence& seq, const TrackerConfig& cfg,
                                        std::vector<FrameResult>* details = nullptr);

}  // namespace ssfnet
