#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ssfnet/tensor.hpp"

namespace ssfnet {

/// H x W x B spectral cube, stored as a batch-of-one tensor [1,H,W,B].
class HSCube {
public:
    HSCube() = default;
    explicit HSCube(Tensor data);

    const Tensor& tensor() const { return data_; }
    int height() const { return data_.shape.h; }
    int width() const { return data_.shape.w; }
    int bands() const { return data_.shape.c; }
    double at(int y, int x, int b) const { return data_.at(0, y, x, b); }
    bool operator==(const HSCube& o) const { return data_.shape == o.data_.shape && data_.data == o.data_.data; }

private:
    Tensor data_;
};

/// H x W x 3 visual image with values in [0, 1].
class RGBImage {
public:
    RGBImage() = default;
    explicit RGBImage(Tensor data);

    const Tensor& tensor() const { return data_; }
    int height() const { return data_.shape.h; }
    int width() const { return data_.shape.w; }
    double at(int y, int x, int c) const { return data_.at(0, y, x, c); }
    bool operator==(const RGBImage& o) const { return data_.shape == o.data_.shape && data_.data == o.data_.data; }

private:
    Tensor data_;
};

/// Axis-aligned box, top-left corner plus extent, in pixels. Pixel i spans [i, i+1).
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }
    /// Positive finite extent; degenerate annotations mark absent ground truth.
    bool valid() const;
    static BoundingBox from_center(double cx, double cy, double w, double h) {
        return BoundingBox{cx - 0.5 * w, cy - 0.5 * h, w, h};
    }
    bool operator==(const BoundingBox&) const = default;
};

struct Frame {
    HSCube hs;
    RGBImage rgb;
    bool operator==(const Frame&) const = default;
};

struct Sequence {
    std::string name;
    std::vector<Frame> frames;
    std::vector<BoundingBox> annotations;
    std::set<std::string> attributes;

    std::size_t size() const { return frames.size(); }
    /// Throws DataError when frames/annotations disagree or frames differ in shape.
    void validate() const;
    bool operator==(const Sequence&) const = default;
};

/// Evenly spaced band triplet used for false-colour synthesis.
std::array<int, 3> rgb_band_triplet(int bands);
/// False-colour image from the band triplet, each channel min-max normalised.
RGBImage synthesize_rgb(const HSCube& hs);

// Cube container for frame files (`NNNN.hsc` spectral, `NNNN.rgb` visual):
//   8 bytes magic "SSFCUBE1", u32 H, u32 W, u32 B, f64[H*W*B] in row-major H,W,B order.
void write_cube(const std::filesystem::path& path, const Tensor& data);
Tensor read_cube(const std::filesystem::path& path);

/// Parses one "x,y,w,h" line; integer or float fields separated by commas, tabs or spaces.
BoundingBox parse_box_line(const std::string& line);
std::vector<BoundingBox> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes);

/// Whitespace- or comma-separated attribute tags; a missing file yields none.
std::set<std::string> read_attributes(const std::filesystem::path& path);

/// Reads a sequence folder: `NNNN.hsc` frames (sorted lexicographically), optional
/// `NNNN.rgb` partners, `groundtruth_rect.txt`, optional `attributes.txt`.
Sequence load_sequence(const std::filesystem::path& dir);
void save_sequence(const Sequence& seq, const std::filesystem::path& dir);

/// Sequence folder names under a dataset root, sorted.
std::vector<std::string> list_sequences(const std::filesystem::path& root);

}  // namespace ssfnet
