#pragma once

#include "ssfnet/data.hpp"

namespace ssfnet {

struct CropConfig {
    int template_size = 127;
    int search_size = 255;
    /// Context margin p = context * (w + h); region side sqrt((w + p)(h + p)).
    double context = 0.5;
    bool operator==(const CropConfig&) const = default;
};

/// Maps crop coordinates back to frame coordinates. A crop pixel u spans
/// [u, u+1); continuous crop coordinate U corresponds to frame coordinate
/// center + (U - out_size / 2) * scale.
struct CropMeta {
    double center_x = 0.0;
    double center_y = 0.0;
    double scale = 1.0;  // frame pixels per crop pixel
    int out_size = 0;

    double to_frame_x(double u) const { return center_x + (u - 0.5 * out_size) * scale; }
    double to_frame_y(double v) const { return center_y + (v - 0.5 * out_size) * scale; }
    double to_crop_x(double x) const { return (x - center_x) / scale + 0.5 * out_size; }
    double to_crop_y(double y) const { return (y - center_y) / scale + 0.5 * out_size; }
    BoundingBox box_to_frame(const BoundingBox& b) const;
    BoundingBox box_to_crop(const BoundingBox& b) const;
};

struct FrameCrop {
    HSCube hs;
    RGBImage rgb;
    CropMeta meta;
};

/// Side length (frame pixels) of the template region for an object of size (w, h).
double template_extent(double w, double h, double context);

/// Bilinear resampling of a square region centred at (cx, cy) with side
/// out_size * scale. Samples outside the image use the per-channel image mean.
Tensor crop_region(const Tensor& image, double cx, double cy, double scale, int out_size);

FrameCrop crop_template(const Frame& frame, const BoundingBox& box, const CropConfig& cfg);
FrameCrop crop_search(const Frame& frame, double prev_cx, double prev_cy, double prev_w, double prev_h,
                      const CropConfig& cfg);

}  // namespace ssfnet
