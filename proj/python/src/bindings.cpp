// Python bindings. Arrays cross the boundary as float64 numpy arrays:
// cubes are (H, W, B), sequences (T, H, W, B), boxes (T, 4) as x, y, w, h.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ssfnet/config.hpp"
#include "ssfnet/error.hpp"
#include "ssfnet/metrics.hpp"
#include "ssfnet/sam.hpp"
#include "ssfnet/synth.hpp"

namespace py = pybind11;
using namespace ssfnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t, std::vector<py::ssize_t> shape) {
    Array out(shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

Tensor cube_from(const Array& a, const char* what) {
    if (a.ndim() != 3) throw ShapeError(std::string(what) + ": expected an (H, W, C) array");
    const Shape s{1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
    return Tensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Tensor batch_from(const Array& a, const char* what) {
    if (a.ndim() == 3) return cube_from(a, what);
    if (a.ndim() != 4) throw ShapeError(std::string(what) + ": expected an (N, H, W, C) array");
    const Shape s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                  static_cast<int>(a.shape(3))};
    return Tensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array boxes_to_numpy(const std::vector<BoundingBox>& boxes) {
    Array out({static_cast<py::ssize_t>(boxes.size()), py::ssize_t{4}});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t t = 0; t < boxes.size(); ++t) {
        m(t, 0) = boxes[t].x;
        m(t, 1) = boxes[t].y;
        m(t, 2) = boxes[t].w;
        m(t, 3) = boxes[t].h;
    }
    return out;
}

std::vector<BoundingBox> boxes_from(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != 4) throw ShapeError("boxes: expected a (T, 4) array");
    auto m = a.unchecked<2>();
    std::vector<BoundingBox> out;
    for (py::ssize_t t = 0; t < a.shape(0); ++t) out.push_back(BoundingBox{m(t, 0), m(t, 1), m(t, 2), m(t, 3)});
    return out;
}

BoundingBox box_from(const std::array<double, 4>& b) { return BoundingBox{b[0], b[1], b[2], b[3]}; }

py::dict sequence_to_dict(const Sequence& seq) {
    const int T = static_cast<int>(seq.size());
    const int H = seq.frames[0].hs.height(), W = seq.frames[0].hs.width(), B = seq.frames[0].hs.bands();
    Array hs({T, H, W, B}), rgb({T, H, W, 3});
    for (int t = 0; t < T; ++t) {
        std::copy(seq.frames[t].hs.tensor().data.begin(), seq.frames[t].hs.tensor().data.end(),
                  hs.mutable_data() + static_cast<std::size_t>(t) * H * W * B);
        std::copy(seq.frames[t].rgb.tensor().data.begin(), seq.frames[t].rgb.tensor().data.end(),
                  rgb.mutable_data() + static_cast<std::size_t>(t) * H * W * 3);
    }
    py::dict d;
    d["name"] = seq.name;
    d["hs"] = hs;
    d["rgb"] = rgb;
    d["boxes"] = boxes_to_numpy(seq.annotations);
    d["attributes"] = std::vector<std::string>(seq.attributes.begin(), seq.attributes.end());
    return d;
}

Sequence sequence_from(const Array& hs, const Array& rgb, const Array& boxes) {
    if (hs.ndim() != 4 || rgb.ndim() != 4 || hs.shape(0) != rgb.shape(0))
        throw ShapeError("sequence: hs and rgb must be (T, H, W, C) arrays with equal T");
    Sequence seq;
    seq.name = "python";
    const py::ssize_t T = hs.shape(0);
    const std::size_t hs_frame = hs.size() / T, rgb_frame = rgb.size() / T;
    for (py::ssize_t t = 0; t < T; ++t) {
        Tensor h(Shape{1, static_cast<int>(hs.shape(1)), static_cast<int>(hs.shape(2)), static_cast<int>(hs.shape(3))});
        Tensor r(Shape{1, static_cast<int>(rgb.shape(1)), static_cast<int>(rgb.shape(2)), static_cast<int>(rgb.shape(3))});
        std::copy_n(hs.data() + t * hs_frame, hs_frame, h.data.begin());
        std::copy_n(rgb.data() + t * rgb_frame, rgb_frame, r.data.begin());
        seq.frames.push_back(Frame{HSCube(std::move(h)), RGBImage(std::move(r))});
    }
    seq.annotations = boxes_from(boxes);
    seq.validate();
    return seq;
}

py::dict maps_to_dict(const PredictionMaps& m) {
    py::dict d;
    auto put = [&](const char* key, const Var& v) {
        if (!v.defined()) return;
        const Shape s = v.shape();
        d[key] = to_numpy(v.value(), {s.n, s.h, s.w, s.c});
    };
    put("cls", m.cls);
    put("loc", m.loc);
    put("saa", m.saa);
    put("sim", m.sim);
    return d;
}

// Owns a model together with the configuration it was built from.
struct PyModel {
    AppConfig cfg;
    std::unique_ptr<Model> model;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hyperspectral/RGB fusion tracker";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("default_config", [] { return to_json(AppConfig{}); }, "Default configuration as a JSON string.");
    m.def(
        "resolve_config",
        [](const std::string& json, const std::vector<std::string>& overrides) {
            AppConfig cfg = json.empty() ? AppConfig{} : config_from_json(json);
            for (const auto& o : overrides) apply_override(cfg, o);
            validate(cfg);
            return to_json(cfg);
        },
        py::arg("json") = "", py::arg("overrides") = std::vector<std::string>{},
        "Validate a JSON configuration, apply dotted overrides and return the result.");

    m.def(
        "synth_sequence",
        [](const std::string& json) {
            const AppConfig cfg = json.empty() ? AppConfig{} : config_from_json(json);
            return sequence_to_dict(synth_sequence(cfg.synth));
        },
        py::arg("config") = "", "Synthetic sequence from the data.synth section of a configuration.");

    m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) { return iou(box_from(a), box_from(b)); });
    m.def("center_error", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
        return center_error(box_from(a), box_from(b));
    });
    m.def("success_auc", [](const std::vector<double>& ious) {
        const SuccessResult r = success_auc(ious);
        return py::make_tuple(r.curve, r.auc);
    });
    m.def("precision_dp20", [](const std::vector<double>& errs) {
        const PrecisionResult r = precision_dp20(errs);
        return py::make_tuple(r.curve, r.dp20);
    });
    m.def(
        "evaluate_boxes",
        [](const Array& predicted, const Array& ground_truth) {
            const EvalResult r = evaluate_boxes("python", boxes_from(predicted), boxes_from(ground_truth));
            py::dict d;
            d["auc"] = r.auc;
            d["dp20"] = r.dp20;
            d["iou"] = r.per_frame_iou;
            d["center_error"] = r.per_frame_center_err;
            return d;
        },
        py::arg("predicted"), py::arg("ground_truth"));

    m.def(
        "sam_map",
        [](const Array& cube, const std::vector<double>& target) {
            SAMModel s = sam_fit(cube_from(cube, "sam_map"));
            sam_set_target(s, target);
            const Tensor map = sam_map(s);
            return to_numpy(map, {map.shape.h, map.shape.w});
        },
        py::arg("cube"), py::arg("target"), "Whitened spectral-angle cosine map of an (H, W, B) cube.");

    py::class_<PyModel>(m, "Model")
        .def(py::init([](const std::string& json, std::uint64_t seed) {
                 auto p = std::make_unique<PyModel>();
                 p->cfg = json.empty() ? AppConfig{} : config_from_json(json);
                 p->cfg.seed = seed;
                 validate(p->cfg);
                 p->model = std::make_unique<Model>(p->cfg.model, seed);
                 return p;
             }),
             py::arg("config") = "", py::arg("seed") = 0)
        .def_static(
            "load",
            [](const std::filesystem::path& path) {
                auto p = std::make_unique<PyModel>();
                p->model = std::make_unique<Model>(load_model(path, &p->cfg));
                return p;
            },
            py::arg("path"))
        .def("save", [](const PyModel& p, const std::filesystem::path& path) { save_model(*p.model, p.cfg, path); })
        .def_property_readonly("config", [](const PyModel& p) { return to_json(p.cfg); })
        .def_property_readonly("lambdas",
                               [](const PyModel& p) {
                                   return py::make_tuple(p.model->params().get("ensemble.lambda1").value.data[0],
                                                         p.model->params().get("ensemble.lambda2").value.data[0]);
                               })
        .def(
            "forward",
            [](PyModel& p, const Array& z_hs, const Array& z_rgb, const Array& x_hs, const Array& x_rgb) {
                NoGradGuard no_grad;
                const PairOutput out = forward_pair(*p.model, batch_from(z_hs, "z_hs"), batch_from(z_rgb, "z_rgb"),
                                                    batch_from(x_hs, "x_hs"), batch_from(x_rgb, "x_rgb"),
                                                    inference_mode());
                py::dict d;
                d["combined"] = maps_to_dict(out.combined);
                d["hs"] = maps_to_dict(out.hs_aggregated);
                d["rgb"] = maps_to_dict(out.rgb_aggregated);
                return d;
            },
            py::arg("z_hs"), py::arg("z_rgb"), py::arg("x_hs"), py::arg("x_rgb"),
            "Prediction maps for template/search crops, (H, W, C) or (N, H, W, C).")
        .def(
            "train",
            [](PyModel& p, const Array& hs, const Array& rgb, const Array& boxes, int steps) {
                const std::vector<Sequence> data{sequence_from(hs, rgb, boxes)};
                TrainConfig tc = p.cfg.train;
                if (steps >= 0) tc.steps = steps;
                std::vector<StepReport> reports;
                {
                    py::gil_scoped_release release;
                    reports = train(*p.model, data, tc, p.cfg.track.crop, p.cfg.seed);
                }
                std::vector<double> totals;
                for (const auto& r : reports) totals.push_back(r.total);
                return totals;
            },
            py::arg("hs"), py::arg("rgb"), py::arg("boxes"), py::arg("steps") = -1,
            "Train on one sequence; returns the total loss of every step.")
        .def(
            "track",
            [](PyModel& p, const Array& hs, const Array& rgb, const Array& boxes) {
                const Sequence seq = sequence_from(hs, rgb, boxes);
                std::vector<BoundingBox> out;
                {
                    py::gil_scoped_release release;
                    out = track_sequence(*p.model, seq, p.cfg.track);
                }
                return boxes_to_numpy(out);
            },
            py::arg("hs"), py::arg("rgb"), py::arg("boxes"),
            "Track from the first box; only boxes[0] is used, later rows may be zeros.");
}
