#include "ssfnet/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ssfnet/backbone.hpp"
#include "ssfnet/error.hpp"

namespace ssfnet {

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.bands < 1 || cfg_.channels < 1 || cfg_.blocks_per_stage < 1 || cfg_.head_width < 1 || cfg_.embed_dim < 1) {
        throw ConfigError("model: bands, channels, blocks_per_stage, head_width and embed_dim must be positive");
    }
    std::mt19937_64 rng(seed);
    init_s2fb(params_, cfg_, rng);
    init_rgb_backbone(params_, cfg_, rng);
    init_fusion(params_, cfg_, rng);
    init_head(params_, cfg_, HeadKind::HS, rng);
    init_head(params_, cfg_, HeadKind::RGB, rng);
    params_.add("ensemble.lambda1", Tensor::scalar(0.5));
    params_.add("ensemble.lambda2", Tensor::scalar(0.5));
    if (!cfg_.rgb_checkpoint.empty()) load_rgb_weights(cfg_.rgb_checkpoint);
    if (cfg_.rgb_frozen) params_.set_frozen("rgb.", true);
}

void Model::calibrate_rgb_statistics(const Tensor& rgb_batch) {
    if (!cfg_.rgb_frozen || !cfg_.rgb_checkpoint.empty()) return;
    NoGradGuard no_grad;
    ModelConfig unfrozen = cfg_;
    unfrozen.rgb_frozen = false;
    RunMode mode{ops::NormMode::Batch, 1.0, false};
    rgb_forward(params_, unfrozen, Var(pad_to_multiple_of_4(rgb_batch)), mode);
}

void Model::load_rgb_weights(const std::filesystem::path& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    for (auto& [name, p] : params_.items()) {
        if (name.rfind("rgb.", 0) != 0) continue;
        auto it = ckpt.arrays.find(name);
        if (it == ckpt.arrays.end()) throw DataError("RGB checkpoint is missing " + name);
        if (!(it->second.shape == p.value.shape)) throw DataError("RGB checkpoint array " + name + " has wrong shape");
        p.value = it->second;
    }
}

EnsembleWeights EnsembleWeights::from(ParamStore& store) {
    return EnsembleWeights{store.use("ensemble.lambda1"), store.use("ensemble.lambda2")};
}

EnsembleWeights EnsembleWeights::constant(double l1, double l2) {
    return EnsembleWeights{Var(Tensor::scalar(l1)), Var(Tensor::scalar(l2))};
}

Tensor pad_to_multiple_of_4(const Tensor& batch) {
    const Shape s = batch.shape;
    const int h = (s.h + 3) / 4 * 4;
    const int w = (s.w + 3) / 4 * 4;
    if (h == s.h && w == s.w) return batch;
    Tensor out(Shape{s.n, h, w, s.c});
    for (int n = 0; n < s.n; ++n) {
        std::vector<double> mean(s.c, 0.0);
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                for (int c = 0; c < s.c; ++c) mean[c] += batch.at(n, y, x, c);
        for (auto& m : mean) m /= static_cast<double>(s.h) * s.w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < s.c; ++c)
                    out.at(n, y, x, c) = (y < s.h && x < s.w) ? batch.at(n, y, x, c) : mean[c];
    }
    return out;
}

TemplateFeatures encode_template(Model& model, const Tensor& hs, const Tensor& rgb, const RunMode& mode) {
    TemplateFeatures t;
    t.rgb = rgb_forward(model.params(), model.config(), Var(pad_to_multiple_of_4(rgb)), mode);
    const FeaturePyramid raw = s2fb_forward(model.params(), model.config(), Var(pad_to_multiple_of_4(hs)), mode);
    t.hs = fuse_pyramids(model.params(), t.rgb, raw);
    return t;
}

PairOutput forward_search(Model& model, const TemplateFeatures& tmpl, const Tensor& hs, const Tensor& rgb,
                          const RunMode& mode) {
    const Tensor hs_in = pad_to_multiple_of_4(hs);
    const FeaturePyramid x_rgb = rgb_forward(model.params(), model.config(), Var(pad_to_multiple_of_4(rgb)), mode);
    const FeaturePyramid x_raw = s2fb_forward(model.params(), model.config(), Var(hs_in), mode);
    const FeaturePyramid x_hs = fuse_pyramids(model.params(), x_rgb, x_raw);

    PairOutput out;
    for (int k = 0; k < 3; ++k) {
        const int stage = k + 2;
        out.hs[k] = head_forward(model.params(), model.config(), HeadKind::HS, stage, tmpl.hs.stage(stage),
                                 x_hs.stage(stage));
        out.rgb[k] = head_forward(model.params(), model.config(), HeadKind::RGB, stage, tmpl.rgb.stage(stage),
                                  x_rgb.stage(stage));
    }
    out.hs_aggregated = aggregate_stages(out.hs);
    out.rgb_aggregated = aggregate_stages(out.rgb);
    out.combined = ensemble(out.hs_aggregated, out.rgb_aggregated, EnsembleWeights::from(model.params()));
    const Shape ms = out.combined.cls.shape();
    out.geometry = MapGeometry::centered(ms.h, ms.w, kFeatureStride, hs_in.shape.w);
    // non-square search crops are not produced by the cropper
    out.geometry.origin_y = 0.5 * hs_in.shape.h - 0.5 * (ms.h - 1) * kFeatureStride;
    return out;
}

PairOutput forward_pair(Model& model, const Tensor& z_hs, const Tensor& z_rgb, const Tensor& x_hs,
                        const Tensor& x_rgb, const RunMode& mode) {
    const TemplateFeatures tmpl = encode_template(model, z_hs, z_rgb, mode);
    return forward_search(model, tmpl, x_hs, x_rgb, mode);
}

PredictionMaps ensemble(const PredictionMaps& hs, const PredictionMaps& rgb, const EnsembleWeights& w) {
    PredictionMaps out;
    out.cls = ops::add(ops::mul_scalar(hs.cls, w.lambda1), ops::mul_scalar(rgb.cls, w.lambda2));
    out.loc = ops::add(ops::mul_scalar(hs.loc, w.lambda1), ops::mul_scalar(rgb.loc, w.lambda2));
    out.saa = hs.saa;
    out.sim = hs.sim;
    return out;
}

PredictionMaps aggregate_stages(std::span<const PredictionMaps> maps) {
    if (maps.empty()) throw ShapeError("aggregate_stages: no maps");
    const double inv = 1.0 / static_cast<double>(maps.size());
    auto mean_of = [&](Var PredictionMaps::*field) -> Var {
        const Var& first = maps.front().*field;
        if (!first.defined()) return Var();
        const int h = first.shape().h;
        const int w = first.shape().w;
        Var acc;
        for (const auto& m : maps) {
            const Var v = ops::resize_bilinear(m.*field, h, w);
            acc = acc.defined() ? ops::add(acc, v) : v;
        }
        return maps.size() == 1 ? acc : ops::scale(acc, inv);
    };
    PredictionMaps out;
    out.cls = mean_of(&PredictionMaps::cls);
    out.loc = mean_of(&PredictionMaps::loc);
    out.saa = mean_of(&PredictionMaps::saa);
    out.sim = mean_of(&PredictionMaps::sim);
    return out;
}

Tensor normalize01(const Tensor& map) {
    if (map.empty()) return map;
    const auto [lo, hi] = std::minmax_element(map.data.begin(), map.data.end());
    const double range = *hi - *lo;
    Tensor out(map.shape, 1.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < map.size(); ++i) out.data[i] = (map.data[i] - *lo) / range;
    }
    return out;
}

Tensor foreground_probability(const Tensor& cls) {
    const Shape s = cls.shape;
    if (s.c != 2) throw ShapeError("foreground_probability: expected 2 channels");
    Tensor out(Shape{s.n, s.h, s.w, 1});
    for (std::size_t k = 0; k < out.size(); ++k) {
        out.data[k] = 1.0 / (1.0 + std::exp(cls.data[2 * k] - cls.data[2 * k + 1]));
    }
    return out;
}

Tensor combine_response(const Tensor& cls, const Tensor& saa) {
    Tensor p = foreground_probability(cls);
    const Tensor s = normalize01(saa);
    if (!(s.shape == p.shape)) throw ShapeError("combine_response: SAA/CLS map shapes differ");
    for (std::size_t k = 0; k < p.size(); ++k) p.data[k] *= s.data[k];
    return p;
}

std::pair<int, int> response_peak(const Tensor& response) {
    const Shape s = response.shape;
    const double ci = 0.5 * (s.h - 1);
    const double cj = 0.5 * (s.w - 1);
    double best = -std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    std::pair<int, int> peak{0, 0};
    for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) {
            const double v = response.at(0, i, j, 0);
            const double d = (i - ci) * (i - ci) + (j - cj) * (j - cj);
            if (v > best || (v == best && d < best_dist)) {
                best = v;
                best_dist = d;
                peak = {i, j};
            }
        }
    return peak;
}

TrackState init_track(Model& model, const Frame& frame, const BoundingBox& box, const TrackerConfig& cfg) {
    if (!box.valid()) throw DataError("init_track: degenerate initial box");
    NoGradGuard no_grad;
    const FrameCrop crop = crop_template(frame, box, cfg.crop);
    TrackState state;
    state.cx = box.cx();
    state.cy = box.cy();
    state.w = box.w;
    state.h = box.h;
    state.template_feats = encode_template(model, crop.hs.tensor(), crop.rgb.tensor(), RunMode{cfg.norm, 0.1, false});
    state.crop_meta = crop.meta;
    return state;
}

FrameResult infer_frame(Model& model, TrackState& state, const Frame& frame, const TrackerConfig& cfg) {
    NoGradGuard no_grad;
    const FrameCrop crop = crop_search(frame, state.cx, state.cy, state.w, state.h, cfg.crop);
    const PairOutput out =
        forward_search(model, state.template_feats, crop.hs.tensor(), crop.rgb.tensor(), RunMode{cfg.norm, 0.1, false});

    FrameResult res;
    res.meta = crop.meta;
    res.geometry = out.geometry;
    res.response = combine_response(out.combined.cls.value(), out.combined.saa.value());
    res.hs_response = combine_response(out.hs_aggregated.cls.value(), out.hs_aggregated.saa.value());
    Tensor scored = res.response;
    if (cfg.cosine_window) {
        const Shape s = scored.shape;
        for (int i = 0; i < s.h; ++i)
            for (int j = 0; j < s.w; ++j) {
                const double wy = s.h > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (s.h - 1)) : 1.0;
                const double wx = s.w > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / (s.w - 1)) : 1.0;
                double& v = scored.at(0, i, j, 0);
                v = (1.0 - cfg.window_influence) * v + cfg.window_influence * wy * wx;
            }
    }
    const auto [pi, pj] = response_peak(scored);
    res.peak_i = pi;
    res.peak_j = pj;
    res.score = scored.at(0, pi, pj, 0);
    const bool dead = !std::isfinite(res.score) || res.response.max_abs() <= 0.0 || !res.response.all_finite();
    if (dead) {
        state.lost = true;
        res.lost = true;
        res.box = BoundingBox::from_center(state.cx, state.cy, state.w, state.h);
        return res;
    }
    const Tensor& loc = out.combined.loc.value();
    const Corners c = decode_offsets(out.geometry.point_x(pj), out.geometry.point_y(pi), loc.at(0, pi, pj, 0),
                                     loc.at(0, pi, pj, 1), loc.at(0, pi, pj, 2), loc.at(0, pi, pj, 3));
    const double cx = crop.meta.to_frame_x(0.5 * (c.x1 + c.x2));
    const double cy = crop.meta.to_frame_y(0.5 * (c.y1 + c.y2));
    const double pw = (c.x2 - c.x1) * crop.meta.scale;
    const double ph = (c.y2 - c.y1) * crop.meta.scale;
    state.cx = cx;
    state.cy = cy;
    if (pw > 0.0 && ph > 0.0 && std::isfinite(pw) && std::isfinite(ph)) {
        state.w = (1.0 - cfg.size_ema) * state.w + cfg.size_ema * pw;
        state.h = (1.0 - cfg.size_ema) * state.h + cfg.size_ema * ph;
    }
    state.crop_meta = crop.meta;
    state.lost = false;
    res.box = BoundingBox::from_center(state.cx, state.cy, state.w, state.h);
    return res;
}

std::vector<BoundingBox> track_sequence(Model& model, const Sequence& seq, const TrackerConfig& cfg,
                                        std::vector<FrameResult>* details) {
    seq.validate();
    std::vector<BoundingBox> boxes;
    if (seq.frames.empty()) return boxes;
    TrackState state = init_track(model, seq.frames[0], seq.annotations[0], cfg);
    boxes.push_back(seq.annotations[0]);
    if (details) {
        FrameResult first;
        first.box = seq.annotations[0];
        details->push_back(first);
    }
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        FrameResult r = infer_frame(model, state, seq.frames[t], cfg);
        boxes.push_back(r.box);
        if (details) details->push_back(std::move(r));
    }
    return boxes;
}

}  // namespace ssfnet
