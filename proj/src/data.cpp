#include "ssfnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssfnet/error.hpp"

namespace ssfnet {

namespace fs = std::filesystem;

HSCube::HSCube(Tensor data) : data_(std::move(data)) {
    const Shape s = data_.shape;
    if (s.n != 1 || s.h < 1 || s.w < 1 || s.c < 1) throw DataError("HSCube: invalid shape " + s.str());
    if (!data_.all_finite()) throw DataError("HSCube: non-finite values");
}

RGBImage::RGBImage(Tensor data) : data_(std::move(data)) {
    const Shape s = data_.shape;
    if (s.n != 1 || s.h < 1 || s.w < 1 || s.c != 3) throw DataError("RGBImage: invalid shape " + s.str());
    if (!data_.all_finite()) throw DataError("RGBImage: non-finite values");
}

bool BoundingBox::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 && h > 0.0;
}

void Sequence::validate() const {
    if (frames.size() != annotations.size()) {
        throw DataError("sequence '" + name + "': " + std::to_string(frames.size()) + " frames but " +
                        std::to_string(annotations.size()) + " annotations");
    }
    if (frames.empty()) return;
    const Shape ref = frames.front().hs.tensor().shape;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Shape s = frames[i].hs.tensor().shape;
        if (s.c != ref.c) {
            throw DataError("sequence '" + name + "': frame " + std::to_string(i) + " has " +
                            std::to_string(s.c) + " bands, expected " + std::to_string(ref.c));
        }
        if (s.h != ref.h || s.w != ref.w) {
            throw DataError("sequence '" + name + "': frame " + std::to_string(i) + " spatial size differs");
        }
        const Shape r = frames[i].rgb.tensor().shape;
        if (r.h != s.h || r.w != s.w) {
            throw DataError("sequence '" + name + "': RGB leg of frame " + std::to_string(i) +
                            " not registered with the spectral cube");
        }
    }
}

std::array<int, 3> rgb_band_triplet(int bands) {
    return {0, (bands - 1) / 2, bands - 1};
}

RGBImage synthesize_rgb(const HSCube& hs) {
    const auto triplet = rgb_band_triplet(hs.bands());
    const int H = hs.height();
    const int W = hs.width();
    Tensor out(Shape{1, H, W, 3});
    for (int k = 0; k < 3; ++k) {
        double lo = hs.at(0, 0, triplet[k]);
        double hi = lo;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                lo = std::min(lo, hs.at(y, x, triplet[k]));
                hi = std::max(hi, hs.at(y, x, triplet[k]));
            }
        const double range = hi - lo;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.at(0, y, x, k) = range > 0.0 ? (hs.at(y, x, triplet[k]) - lo) / range : 0.0;
    }
    return RGBImage(std::move(out));
}

namespace {

constexpr char kCubeMagic[8] = {'S', 'S', 'F', 'C', 'U', 'B', 'E', '1'};

}  // namespace

void write_cube(const fs::path& path, const Tensor& data) {
    if (data.shape.n != 1) throw DataError("write_cube: expected a single image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(kCubeMagic, sizeof(kCubeMagic));
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(data.shape.h), static_cast<std::uint32_t>(data.shape.w),
                                   static_cast<std::uint32_t>(data.shape.c)};
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    os.write(reinterpret_cast<const char*>(data.data.data()),
             static_cast<std::streamsize>(data.data.size() * sizeof(double)));
    if (!os) throw DataError("failed writing " + path.string());
}

Tensor read_cube(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCubeMagic, sizeof(kCubeMagic)) != 0) {
        throw DataError("not a cube file: " + path.string());
    }
    std::uint32_t dims[3];
    is.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!is || dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw DataError("bad cube header: " + path.string());
    Tensor t(Shape{1, static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])});
    is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw DataError("truncated cube file: " + path.string());
    return t;
}

BoundingBox parse_box_line(const std::string& line) {
    std::string normalized = line;
    std::replace_if(normalized.begin(), normalized.end(), [](char c) { return c == ',' || c == '\t' || c == ';'; }, ' ');
    std::istringstream ss(normalized);
    double v[4];
    for (double& x : v) {
        std::string tok;
        if (!(ss >> tok)) throw DataError("annotation line needs 4 fields: '" + line + "'");
        try {
            std::size_t used = 0;
            x = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw DataError("bad annotation field '" + tok + "' in line '" + line + "'");
        }
    }
    std::string extra;
    if (ss >> extra) throw DataError("annotation line has more than 4 fields: '" + line + "'");
    return BoundingBox{v[0], v[1], v[2], v[3]};
}

std::vector<BoundingBox> read_boxes(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("missing annotation file: " + path.string());
    std::vector<BoundingBox> boxes;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        boxes.push_back(parse_box_line(line));
    }
    return boxes;
}

void write_boxes(const fs::path& path, const std::vector<BoundingBox>& boxes) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os.precision(17);
    for (const auto& b : boxes) os << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
}

std::set<std::string> read_attributes(const fs::path& path) {
    std::set<std::string> out;
    if (!fs::exists(path)) return out;
    std::ifstream is(path);
    std::string tok;
    while (is >> tok) {
        tok.erase(std::remove(tok.begin(), tok.end(), ','), tok.end());
        if (!tok.empty()) out.insert(tok);
    }
    return out;
}

Sequence load_sequence(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a sequence directory: " + dir.string());
    std::vector<fs::path> hs_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".hsc") hs_files.push_back(entry.path());
    }
    std::sort(hs_files.begin(), hs_files.end());

    Sequence seq;
    seq.name = dir.filename().string();
    if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
    seq.annotations = read_boxes(dir / "groundtruth_rect.txt");
    if (seq.annotations.size() != hs_files.size()) {
        throw DataError("sequence '" + seq.name + "': " + std::to_string(hs_files.size()) + " frames but " +
                        std::to_string(seq.annotations.size()) + " annotation lines");
    }
    for (const auto& f : hs_files) {
        HSCube hs(read_cube(f));
        fs::path rgb_path = f;
        rgb_path.replace_extension(".rgb");
        RGBImage rgb = fs::exists(rgb_path) ? RGBImage(read_cube(rgb_path)) : synthesize_rgb(hs);
        seq.frames.push_back(Frame{std::move(hs), std::move(rgb)});
    }
    seq.attributes = read_attributes(dir / "attributes.txt");
    seq.validate();
    return seq;
}

void save_sequence(const Sequence& seq, const fs::path& dir) {
    seq.validate();
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%04zu", i + 1);
        write_cube(dir / (std::string(stem) + ".hsc"), seq.frames[i].hs.tensor());
        write_cube(dir / (std::string(stem) + ".rgb"), seq.frames[i].rgb.tensor());
    }
    write_boxes(dir / "groundtruth_rect.txt", seq.annotations);
    if (!seq.attributes.empty()) {
        std::ofstream os(dir / "attributes.txt");
        for (const auto& a : seq.attributes) os << a << '\n';
    }
}

std::vector<std::string> list_sequences(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "groundtruth_rect.txt")) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace ssfnet
