#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "ssfnet/losses.hpp"
#include "ssfnet/tracker.hpp"

namespace ssfnet {

struct TrainConfig {
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch = 4;  // 30 at full scale
    int steps = 1000;
    int warmup_steps = 50;
    bool cosine_schedule = false;
    double grad_clip = 0.0;  // global L2 norm; 0 disables
    int max_frame_gap = 100;
    double shift_jitter = 12.0;  // search-centre shift, template-crop pixels
    double scale_jitter = 0.1;   // log-uniform size jitter amplitude
    LossWeights weights;
    int log_every = 1;

    bool operator==(const TrainConfig&) const = default;
};

/// Floor applied to the ensemble weights after every update.
inline constexpr double kMinEnsembleWeight = 1e-3;

/// Learning rate at a 0-based step: linear warm-up to lr, then constant or cosine decay to 1% of lr.
double learning_rate(const TrainConfig& cfg, int step);

/// SGD with heavy-ball momentum and L2 weight decay on trainable parameters.
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
    /// Returns the pre-clip global gradient norm.
    double step(ParamStore& store, double lr, double grad_clip = 0.0);

private:
    double momentum_;
    double weight_decay_;
};

/// One training example: template and search crops plus the search-frame box in crop pixels.
struct TrainSample {
    Tensor z_hs, z_rgb, x_hs, x_rgb;
    BoundingBox gt_crop;
};

struct TrainBatch {
    Tensor z_hs, z_rgb, x_hs, x_rgb;
    std::vector<BoundingBox> gt_crop;
};

TrainSample sample_pair(const Sequence& seq, const CropConfig& crop, const TrainConfig& cfg, std::mt19937_64& rng);
TrainSample make_pair(const Sequence& seq, std::size_t template_frame, std::size_t search_frame,
                      const CropConfig& crop, double shift_x = 0.0, double shift_y = 0.0, double log_scale = 0.0);
TrainBatch collate(std::span<const TrainSample> samples);

/// Region labels of every sample for the given map geometry.
std::vector<RegionLabels> batch_labels(const TrainBatch& batch, const MapGeometry& geom);

/// CLS and LOC on the ensembled aggregated maps, SAAL on the HS similarity map.
LossParts compute_losses(Model& model, const TrainBatch& batch, const LossWeights& weights, const RunMode& mode,
                         LossFlags* flags = nullptr);

struct StepReport {
    int step = 0;
    double lr = 0.0;
    double cls = 0.0;
    double loc = 0.0;
    double saal = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;
    bool updated = false;
};

/// Forward, backward and SGD update. With all loss weights zero nothing is updated.
StepReport train_step(Model& model, Sgd& opt, const TrainBatch& batch, const TrainConfig& cfg, int step);

using StepCallback = std::function<void(const StepReport&)>;

/// Full loop over randomly sampled pairs. Writes a CSV log
/// (step,lr,cls,loc,saal,total) when log_path is non-empty.
std::vector<StepReport> train(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                              const CropConfig& crop, std::uint64_t seed, const std::filesystem::path& log_path = {},
                              const StepCallback& on_step = {});

/// Fits the frozen RGB stream's BN statistics on search crops drawn from the data.
void calibrate_from_data(Model& model, const std::vector<Sequence>& data, const CropConfig& crop,
                         std::mt19937_64& rng, int count = 8);

}  // namespace ssfnet
