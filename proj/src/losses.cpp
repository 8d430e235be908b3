#include "ssfnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ssfnet/error.hpp"
#include "ssfnet/ops.hpp"

namespace ssfnet {

RegionLabels assign_regions(const BoundingBox& gt_map, int height, int width) {
    if (height < 1 || width < 1) throw ShapeError("assign_regions: empty map");
    if (!gt_map.valid()) throw DataError("assign_regions: degenerate ground-truth box");
    RegionLabels out;
    out.height = height;
    out.width = width;
    out.label.assign(static_cast<std::size_t>(height) * width, Region::Neg);
    const double cx = gt_map.cx();
    const double cy = gt_map.cy();
    if (cx < -0.5 || cx > width - 0.5 || cy < -0.5 || cy > height - 0.5) {
        out.center_outside = true;
        for (int k = 0; k < height * width; ++k) out.neg.push_back(k);
        return out;
    }
    const double a1 = gt_map.w / 4.0, b1 = gt_map.h / 4.0;
    const double a2 = gt_map.w / 2.0, b2 = gt_map.h / 2.0;
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const double dx = j - cx;
            const double dy = i - cy;
            const int k = i * width + j;
            if ((dx / a1) * (dx / a1) + (dy / b1) * (dy / b1) <= 1.0) {
                out.label[k] = Region::Pos;
                out.pos.push_back(k);
            } else if ((dx / a2) * (dx / a2) + (dy / b2) * (dy / b2) <= 1.0) {
                out.label[k] = Region::Ignore;
            } else {
                out.neg.push_back(k);
            }
        }
    }
    return out;
}

BoundingBox crop_box_to_map(const BoundingBox& crop_box, const MapGeometry& geom) {
    return BoundingBox{(crop_box.x - geom.origin_x) / geom.stride, (crop_box.y - geom.origin_y) / geom.stride,
                       crop_box.w / geom.stride, crop_box.h / geom.stride};
}

double saal_value(std::span<const double> sim_pos, std::span<const double> sim_neg) {
    if (sim_pos.empty() || sim_neg.empty()) return 0.0;
    double mp = 0.0, mn = 0.0;
    for (double v : sim_pos) mp += v;
    for (double v : sim_neg) mn += v;
    return mn / static_cast<double>(sim_neg.size()) - mp / static_cast<double>(sim_pos.size());
}

namespace {

void check_labels(const Shape& s, std::span<const RegionLabels> labels, const char* what) {
    if (static_cast<int>(labels.size()) != s.n) throw ShapeError(std::string(what) + ": label count != batch size");
    for (const auto& l : labels) {
        if (l.height != s.h || l.width != s.w) throw ShapeError(std::string(what) + ": label map shape mismatch");
    }
}

}  // namespace

Var saal_loss(const Var& sim, std::span<const RegionLabels> labels, LossFlags* flags) {
    const Shape s = sim.shape();
    if (s.c != 1) throw ShapeError("saal_loss: expected a single-channel similarity map");
    check_labels(s, labels, "saal_loss");
    const std::size_t per = static_cast<std::size_t>(s.h) * s.w;
    std::vector<std::pair<double, double>> coef(s.n, {0.0, 0.0});  // weight per pos / neg cell
    int valid = 0;
    for (int n = 0; n < s.n; ++n) {
        const auto& l = labels[n];
        if (flags) {
            flags->empty_pos += l.pos.empty() ? 1 : 0;
            flags->empty_neg += l.neg.empty() ? 1 : 0;
            flags->center_outside += l.center_outside ? 1 : 0;
        }
        if (!l.pos.empty() && !l.neg.empty()) ++valid;
    }
    double value = 0.0;
    for (int n = 0; n < s.n && valid > 0; ++n) {
        const auto& l = labels[n];
        if (l.pos.empty() || l.neg.empty()) continue;
        coef[n] = {1.0 / (valid * static_cast<double>(l.pos.size())), 1.0 / (valid * static_cast<double>(l.neg.size()))};
        const double* v = sim.value().data.data() + n * per;
        for (int k : l.pos) value -= coef[n].first * v[k];
        for (int k : l.neg) value += coef[n].second * v[k];
    }
    std::vector<RegionLabels> kept(labels.begin(), labels.end());
    return make_op(Tensor::scalar(value), {sim}, [coef, kept, per](Node& self) {
        Tensor* g = self.parents[0]->requires_grad ? &self.parents[0]->grad_buffer() : nullptr;
        if (!g) return;
        const double go = self.grad.data[0];
        for (std::size_t n = 0; n < kept.size(); ++n) {
            for (int k : kept[n].pos) g->data[n * per + k] -= go * coef[n].first;
            for (int k : kept[n].neg) g->data[n * per + k] += go * coef[n].second;
        }
    });
}

Var cls_loss(const Var& cls, std::span<const RegionLabels> labels) {
    const Shape s = cls.shape();
    if (s.c != 2) throw ShapeError("cls_loss: expected 2 channels, got " + s.str());
    check_labels(s, labels, "cls_loss");
    const std::size_t per = static_cast<std::size_t>(s.h) * s.w;
    // weight[n*per + k] applies to the CE at cell k with target class target[...]
    std::vector<double> weight(s.n * per, 0.0);
    std::vector<int> target(s.n * per, 0);
    for (int n = 0; n < s.n; ++n) {
        const auto& l = labels[n];
        const int groups = (l.pos.empty() ? 0 : 1) + (l.neg.empty() ? 0 : 1);
        if (groups == 0) continue;
        for (int k : l.pos) {
            weight[n * per + k] = 1.0 / (groups * static_cast<double>(l.pos.size()) * s.n);
            target[n * per + k] = 1;
        }
        for (int k : l.neg) weight[n * per + k] = 1.0 / (groups * static_cast<double>(l.neg.size()) * s.n);
    }
    const Tensor& v = cls.value();
    double value = 0.0;
    std::vector<double> p_fg(s.n * per, 0.0);
    for (std::size_t idx = 0; idx < weight.size(); ++idx) {
        const double l0 = v.data[idx * 2];
        const double l1 = v.data[idx * 2 + 1];
        const double m = std::max(l0, l1);
        const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
        p_fg[idx] = std::exp(l1 - lse);
        if (weight[idx] > 0.0) value += weight[idx] * (lse - (target[idx] == 1 ? l1 : l0));
    }
    return make_op(Tensor::scalar(value), {cls}, [weight, target, p_fg](Node& self) {
        Tensor* g = self.parents[0]->requires_grad ? &self.parents[0]->grad_buffer() : nullptr;
        if (!g) return;
        const double go = self.grad.data[0];
        for (std::size_t idx = 0; idx < weight.size(); ++idx) {
            if (weight[idx] == 0.0) continue;
            const double pf = p_fg[idx];
            const double pb = 1.0 - pf;
            g->data[idx * 2] += go * weight[idx] * (pb - (target[idx] == 0 ? 1.0 : 0.0));
            g->data[idx * 2 + 1] += go * weight[idx] * (pf - (target[idx] == 1 ? 1.0 : 0.0));
        }
    });
}

double corner_iou(const Corners& a, const Corners& b) {
    const double aw = a.x2 - a.x1, ah = a.y2 - a.y1;
    const double bw = b.x2 - b.x1, bh = b.y2 - b.y1;
    if (aw <= 0.0 || ah <= 0.0 || bw <= 0.0 || bh <= 0.0) return 0.0;
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (aw * ah + bw * bh - inter);
}

Var loc_loss(const Var& loc, std::span<const BoundingBox> gt_crop, std::span<const RegionLabels> labels,
             const MapGeometry& geom) {
    const Shape s = loc.shape();
    if (s.c != 4) throw ShapeError("loc_loss: expected 4 channels, got " + s.str());
    check_labels(s, labels, "loc_loss");
    if (static_cast<int>(gt_crop.size()) != s.n) throw ShapeError("loc_loss: box count != batch size");
    if (geom.height != s.h || geom.width != s.w) throw ShapeError("loc_loss: geometry does not match map");
    constexpr double kMinIoU = 1e-6;
    const std::size_t per = static_cast<std::size_t>(s.h) * s.w;
    int valid = 0;
    for (const auto& l : labels) valid += l.pos.empty() ? 0 : 1;

    const Tensor& v = loc.value();
    double value = 0.0;
    // gradient of the loss wrt the four offsets, per cell
    std::vector<double> dloc(v.size(), 0.0);
    for (int n = 0; n < s.n && valid > 0; ++n) {
        const auto& l = labels[n];
        if (l.pos.empty()) continue;
        const double w = 1.0 / (valid * static_cast<double>(l.pos.size()));
        const BoundingBox& gt = gt_crop[n];
        const Corners g{gt.x, gt.y, gt.right(), gt.bottom()};
        for (int k : l.pos) {
            const int i = k / s.w;
            const int j = k % s.w;
            const std::size_t base = (n * per + k) * 4;
            const double lo = v.data[base], to = v.data[base + 1], ro = v.data[base + 2], bo = v.data[base + 3];
            const Corners p = decode_offsets(geom.point_x(j), geom.point_y(i), lo, to, ro, bo);
            const double iou = corner_iou(p, g);
            value += w * -std::log(std::clamp(iou, kMinIoU, 1.0));
            // Below the clamp the gradient of -ln(IoU) is still used: a POS point lies inside the
            // ground truth, so a collapsed box keeps a finite pull back towards it.
            if (iou <= 0.0) continue;
            const double iw = std::min(p.x2, g.x2) - std::max(p.x1, g.x1);
            const double ih = std::min(p.y2, g.y2) - std::max(p.y1, g.y1);
            const double inter = iw * ih;
            const double union_area = (lo + ro) * (to + bo) + gt.area() - inter;
            const double d_inter[4] = {p.x1 > g.x1 ? ih : 0.0, p.y1 > g.y1 ? iw : 0.0, p.x2 < g.x2 ? ih : 0.0,
                                       p.y2 < g.y2 ? iw : 0.0};
            const double d_area[4] = {to + bo, lo + ro, to + bo, lo + ro};
            for (int q = 0; q < 4; ++q) {
                const double d_iou = (d_inter[q] * (union_area + inter) - inter * d_area[q]) / (union_area * union_area);
                dloc[base + q] += w * -d_iou / iou;
            }
        }
    }
    return make_op(Tensor::scalar(value), {loc}, [dloc](Node& self) {
        Tensor* g = self.parents[0]->requires_grad ? &self.parents[0]->grad_buffer() : nullptr;
        if (!g) return;
        const double go = self.grad.data[0];
        for (std::size_t i = 0; i < dloc.size(); ++i) g->data[i] += go * dloc[i];
    });
}

Var total_loss(const LossParts& parts, const LossWeights& weights) {
    Var total(Tensor::scalar(0.0));
    if (parts.cls.defined()) total = ops::add(total, ops::scale(parts.cls, weights.alpha));
    if (parts.loc.defined()) total = ops::add(total, ops::scale(parts.loc, weights.beta));
    if (parts.saal.defined()) total = ops::add(total, ops::scale(parts.saal, weights.gamma));
    return total;
}

}  // namespace ssfnet
