#include "ssfnet/crop.hpp"

#include <cmath>

#include "ssfnet/error.hpp"

namespace ssfnet {

BoundingBox CropMeta::box_to_frame(const BoundingBox& b) const {
    return BoundingBox{to_frame_x(b.x), to_frame_y(b.y), b.w * scale, b.h * scale};
}

BoundingBox CropMeta::box_to_crop(const BoundingBox& b) const {
    return BoundingBox{to_crop_x(b.x), to_crop_y(b.y), b.w / scale, b.h / scale};
}

double template_extent(double w, double h, double context) {
    if (!(w > 0.0) || !(h > 0.0)) throw DataError("degenerate target size");
    const double p = context * (w + h);
    return std::sqrt((w + p) * (h + p));
}

Tensor crop_region(const Tensor& image, double cx, double cy, double scale, int out_size) {
    const Shape s = image.shape;
    if (out_size <= 0 || !(scale > 0.0)) throw DataError("crop_region: invalid output geometry");
    std::vector<double> mean(s.c, 0.0);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < s.c; ++c) mean[c] += image.at(0, y, x, c);
    for (auto& m : mean) m /= static_cast<double>(s.h) * s.w;

    Tensor out(Shape{1, out_size, out_size, s.c});
    const double half = 0.5 * out_size;
    for (int v = 0; v < out_size; ++v) {
        // pixel-centre sample position in index space (pixel i has centre i + 0.5)
        const double py = cy + (v + 0.5 - half) * scale - 0.5;
        const int y0 = static_cast<int>(std::floor(py));
        const double fy = py - y0;
        for (int u = 0; u < out_size; ++u) {
            const double px = cx + (u + 0.5 - half) * scale - 0.5;
            const int x0 = static_cast<int>(std::floor(px));
            const double fx = px - x0;
            const int ys[2] = {y0, y0 + 1};
            const int xs[2] = {x0, x0 + 1};
            const double wy[2] = {1.0 - fy, fy};
            const double wx[2] = {1.0 - fx, fx};
            for (int c = 0; c < s.c; ++c) {
                double acc = 0.0;
                for (int a = 0; a < 2; ++a) {
                    if (wy[a] == 0.0) continue;
                    for (int b = 0; b < 2; ++b) {
                        if (wx[b] == 0.0) continue;
                        const bool inside = ys[a] >= 0 && ys[a] < s.h && xs[b] >= 0 && xs[b] < s.w;
                        const double val = inside ? image.at(0, ys[a], xs[b], c) : mean[c];
                        acc += wy[a] * wx[b] * val;
                    }
                }
                out.at(0, v, u, c) = acc;
            }
        }
    }
    return out;
}

namespace {

FrameCrop crop_centered(const Frame& frame, double cx, double cy, double extent, int out_size) {
    CropMeta meta{cx, cy, extent / out_size, out_size};
    return FrameCrop{HSCube(crop_region(frame.hs.tensor(), cx, cy, meta.scale, out_size)),
                     RGBImage(crop_region(frame.rgb.tensor(), cx, cy, meta.scale, out_size)), meta};
}

}  // namespace

FrameCrop crop_template(const Frame& frame, const BoundingBox& box, const CropConfig& cfg) {
    if (!box.valid()) throw DataError("crop_template: degenerate box");
    return crop_centered(frame, box.cx(), box.cy(), template_extent(box.w, box.h, cfg.context), cfg.template_size);
}

FrameCrop crop_search(const Frame& frame, double prev_cx, double prev_cy, double prev_w, double prev_h,
                      const CropConfig& cfg) {
    if (!(prev_w > 0.0) || !(prev_h > 0.0)) throw DataError("crop_search: degenerate previous size");
    const double extent = template_extent(prev_w, prev_h, cfg.context) * cfg.search_size / cfg.template_size;
    return crop_centered(frame, prev_cx, prev_cy, extent, cfg.search_size);
}

}  // namespace ssfnet
