#include "ssfnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "ssfnet/error.hpp"

namespace ssfnet {

double learning_rate(const TrainConfig& cfg, int step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
        return cfg.lr * static_cast<double>(step + 1) / cfg.warmup_steps;
    }
    if (!cfg.cosine_schedule) return cfg.lr;
    const int span = std::max(1, cfg.steps - cfg.warmup_steps);
    const double t = std::clamp(static_cast<double>(step - cfg.warmup_steps) / span, 0.0, 1.0);
    const double floor = 0.01 * cfg.lr;
    return floor + 0.5 * (cfg.lr - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

double Sgd::step(ParamStore& store, double lr, double grad_clip) {
    double sq = 0.0;
    for (auto& [name, p] : store.items()) {
        if (!p.trainable() || p.grad.empty()) continue;
        for (double g : p.grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
    const double clip = (grad_clip > 0.0 && norm > grad_clip) ? grad_clip / norm : 1.0;
    for (auto& [name, p] : store.items()) {
        if (!p.trainable()) continue;
        if (p.momentum.size() != p.value.size()) p.momentum = Tensor::zeros(p.value.shape);
        const bool has_grad = p.grad.size() == p.value.size();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = (has_grad ? clip * p.grad.data[i] : 0.0) + weight_decay_ * p.value.data[i];
            p.momentum.data[i] = momentum_ * p.momentum.data[i] + g;
            p.value.data[i] -= lr * p.momentum.data[i];
        }
    }
    return norm;
}

TrainSample make_pair(const Sequence& seq, std::size_t template_frame, std::size_t search_frame,
                      const CropConfig& crop, double shift_x, double shift_y, double log_scale) {
    if (template_frame >= seq.size() || search_frame >= seq.size()) throw DataError("make_pair: frame out of range");
    const BoundingBox& zb = seq.annotations[template_frame];
    const BoundingBox& xb = seq.annotations[search_frame];
    if (!zb.valid() || !xb.valid()) throw DataError("make_pair: frame without ground truth");
    const FrameCrop z = crop_template(seq.frames[template_frame], zb, crop);
    const double px = template_extent(xb.w, xb.h, crop.context) / crop.template_size;
    const double k = std::exp(log_scale);
    const FrameCrop x =
        crop_search(seq.frames[search_frame], xb.cx() + shift_x * px, xb.cy() + shift_y * px, xb.w * k, xb.h * k, crop);
    return TrainSample{z.hs.tensor(), z.rgb.tensor(), x.hs.tensor(), x.rgb.tensor(), x.meta.box_to_crop(xb)};
}

TrainSample sample_pair(const Sequence& seq, const CropConfig& crop, const TrainConfig& cfg, std::mt19937_64& rng) {
    std::vector<std::size_t> valid;
    for (std::size_t t = 0; t < seq.size(); ++t)
        if (seq.annotations[t].valid()) valid.push_back(t);
    if (valid.empty()) throw DataError("sequence '" + seq.name + "' has no annotated frame");
    const std::size_t a = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
    std::vector<std::size_t> near;
    for (std::size_t t : valid) {
        const long gap = static_cast<long>(t) - static_cast<long>(a);
        if (std::abs(gap) <= cfg.max_frame_gap) near.push_back(t);
    }
    const std::size_t b = near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
    std::uniform_real_distribution<double> shift(-cfg.shift_jitter, cfg.shift_jitter);
    std::uniform_real_distribution<double> scale(-cfg.scale_jitter, cfg.scale_jitter);
    const double sx = shift(rng);
    const double sy = shift(rng);
    return make_pair(seq, a, b, crop, sx, sy, scale(rng));
}

TrainBatch collate(std::span<const TrainSample> samples) {
    if (samples.empty()) throw ShapeError("collate: empty batch");
    std::vector<Tensor> zh, zr, xh, xr;
    TrainBatch b;
    for (const auto& s : samples) {
        zh.push_back(s.z_hs);
        zr.push_back(s.z_rgb);
        xh.push_back(s.x_hs);
        xr.push_back(s.x_rgb);
        b.gt_crop.push_back(s.gt_crop);
    }
    b.z_hs = stack_batch(zh);
    b.z_rgb = stack_batch(zr);
    b.x_hs = stack_batch(xh);
    b.x_rgb = stack_batch(xr);
    return b;
}

std::vector<RegionLabels> batch_labels(const TrainBatch& batch, const MapGeometry& geom) {
    std::vector<RegionLabels> out;
    for (const auto& box : batch.gt_crop) out.push_back(assign_regions(crop_box_to_map(box, geom), geom.height, geom.width));
    return out;
}

LossParts compute_losses(Model& model, const TrainBatch& batch, const LossWeights& weights, const RunMode& mode,
                         LossFlags* flags) {
    const PairOutput out = forward_pair(model, batch.z_hs, batch.z_rgb, batch.x_hs, batch.x_rgb, mode);
    const std::vector<RegionLabels> labels = batch_labels(batch, out.geometry);
    LossParts parts;
    parts.cls = cls_loss(out.combined.cls, labels);
    parts.loc = loc_loss(out.combined.loc, batch.gt_crop, labels, out.geometry);
    parts.saal = saal_loss(out.hs_aggregated.sim, labels, flags);
    parts.total = total_loss(parts, weights);
    return parts;
}

StepReport train_step(Model& model, Sgd& opt, const TrainBatch& batch, const TrainConfig& cfg, int step) {
    StepReport r;
    r.step = step;
    r.lr = learning_rate(cfg, step);
    const LossWeights& w = cfg.weights;
    const bool active = w.alpha != 0.0 || w.beta != 0.0 || w.gamma != 0.0;
    auto fill = [&](const LossParts& p) {
        r.cls = p.cls_value();
        r.loc = p.loc_value();
        r.saal = p.saal_value();
        r.total = p.total_value();
    };
    if (!active) {
        NoGradGuard no_grad;
        fill(compute_losses(model, batch, w, RunMode{ops::NormMode::BatchNoUpdate, 0.1, false}));
        return r;
    }
    model.params().zero_grad();
    const LossParts parts = compute_losses(model, batch, w, training_mode());
    fill(parts);
    if (!std::isfinite(r.total)) throw NumericalError("non-finite loss at step " + std::to_string(step));
    backward(parts.total);
    r.grad_norm = opt.step(model.params(), r.lr, cfg.grad_clip);
    // Both streams predict positive offsets; keeping the ensemble weights positive keeps the
    // combined boxes well formed, where the IoU loss has a gradient.
    for (const char* name : {"ensemble.lambda1", "ensemble.lambda2"}) {
        double& lambda = model.params().get(name).value.data[0];
        lambda = std::max(lambda, kMinEnsembleWeight);
    }
    r.updated = true;
    return r;
}

void calibrate_from_data(Model& model, const std::vector<Sequence>& data, const CropConfig& crop,
                         std::mt19937_64& rng, int count) {
    if (data.empty()) return;
    TrainConfig still;
    still.shift_jitter = 0.0;
    still.scale_jitter = 0.0;
    std::vector<Tensor> imgs;
    for (int i = 0; i < count; ++i) {
        const auto& seq = data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
        imgs.push_back(sample_pair(seq, crop, still, rng).x_rgb);
    }
    model.calibrate_rgb_statistics(stack_batch(imgs));
}

std::vector<StepReport> train(Model& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                              const CropConfig& crop, std::uint64_t seed, const std::filesystem::path& log_path,
                              const StepCallback& on_step) {
    if (data.empty()) throw DataError("train: no training sequences");
    if (cfg.batch < 1 || cfg.steps < 0) throw ConfigError("train: batch must be >= 1 and steps >= 0");
    std::mt19937_64 rng(seed);
    calibrate_from_data(model, data, crop, rng);
    std::ofstream log;
    if (!log_path.empty()) {
        if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
        log.open(log_path);
        if (!log) throw DataError("cannot write training log " + log_path.string());
        log << "step,lr,cls,loc,saal,total\n" << std::setprecision(10);
    }
    Sgd opt(cfg.momentum, cfg.weight_decay);
    std::vector<StepReport> reports;
    std::vector<TrainSample> samples(cfg.batch);
    for (int step = 0; step < cfg.steps; ++step) {
        for (auto& s : samples) {
            const auto& seq = data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
            s = sample_pair(seq, crop, cfg, rng);
        }
        const StepReport r = train_step(model, opt, collate(samples), cfg, step);
        reports.push_back(r);
        if (log && (step % std::max(1, cfg.log_every) == 0 || step + 1 == cfg.steps)) {
            log << r.step << ',' << r.lr << ',' << r.cls << ',' << r.loc << ',' << r.saal << ',' << r.total << '\n';
        }
        if (on_step) on_step(r);
    }
    return reports;
}

}  // namespace ssfnet
