// numpy-facing bindings for the main operations: the attention map, the
// boundary/interior ground-truth split, fixation densities and object scores,
// the four evaluation metrics, directory evaluation, and trained-model
// inference. Training and dataset construction run through the CLI.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>
#include <vector>

#include "dsal/checkpoint.hpp"
#include "dsal/common.hpp"
#include "dsal/dataset.hpp"
#include "dsal/knowledge_transfer.hpp"
#include "dsal/metrics.hpp"
#include "dsal/model.hpp"
#include "dsal/supervision.hpp"

namespace py = pybind11;
using namespace dsal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H,W) -> (1,1,H,W)
Tensor grid_in(const Array& a, const char* what) {
    if (a.ndim() != 2) throw py::value_error(std::string(what) + ": expected a 2-D array");
    Tensor t(1, 1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + t.size(), t.data());
    return t;
}

// (1,1,H,W) or a single-channel batch entry -> (H,W)
py::array grid_out(const Tensor& t) {
    py::array_t<double> out({t.h(), t.w()});
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

// (C,H,W) -> (1,C,H,W)
Tensor chw_in(const Array& a, const char* what) {
    if (a.ndim() != 3) throw py::value_error(std::string(what) + ": expected a (C,H,W) array");
    Tensor t(1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2)));
    std::copy(a.data(), a.data() + t.size(), t.data());
    return t;
}

py::array chw_out(const Tensor& t) {
    py::array_t<double> out({t.c(), t.h(), t.w()});
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

// (H,W,3) or (H,W) -> (1,3,H,W); grayscale replicates
Tensor image_in(const Array& a) {
    if (a.ndim() == 2) {
        Tensor t(1, 3, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
        const auto hw = static_cast<size_t>(t.h()) * t.w();
        for (int c = 0; c < 3; ++c) std::copy(a.data(), a.data() + hw, t.data() + c * hw);
        return t;
    }
    if (a.ndim() == 3 && a.shape(2) == 3) {
        Tensor t(1, 3, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
        const auto r = a.unchecked<3>();
        for (int y = 0; y < t.h(); ++y)
            for (int x = 0; x < t.w(); ++x)
                for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = r(y, x, c);
        return t;
    }
    throw py::value_error("image: expected (H,W) or (H,W,3)");
}

ModelConfig config_from_kwargs(bool use_akt, bool use_bfd, bool use_pretrained_general,
                               const std::string& encoder_scale, int input_height,
                               int input_width, int decoder_channels) {
    ModelConfig cfg;
    cfg.use_akt = use_akt;
    cfg.use_bfd = use_bfd;
    cfg.use_pretrained_general = use_pretrained_general;
    if (encoder_scale == "tiny")
        cfg.encoder_scale = EncoderScale::Tiny;
    else if (encoder_scale == "paper")
        cfg.encoder_scale = EncoderScale::Paper;
    else
        throw py::value_error("encoder_scale must be 'tiny' or 'paper'");
    cfg.input_height = input_height;
    cfg.input_width = input_width;
    cfg.decoder_channels = decoder_channels;
    return cfg;
}

py::dict config_to_dict(const ModelConfig& cfg) {
    py::dict d;
    d["use_akt"] = cfg.use_akt;
    d["use_bfd"] = cfg.use_bfd;
    d["use_pretrained_general"] = cfg.use_pretrained_general;
    d["encoder_scale"] = cfg.encoder_scale == EncoderScale::Tiny ? "tiny" : "paper";
    d["input_height"] = cfg.input_height;
    d["input_width"] = cfg.input_width;
    d["decoder_channels"] = cfg.decoder_channels;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "driving-scene salient object detection core";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<DivergenceError>(m, "DivergenceError");

    // ---- attention -----------------------------------------------------------

    m.def(
        "attention_map",
        [](const Array& f) { return chw_out(attention_map_value(chw_in(f, "attention_map"))); },
        py::arg("features"),
        "per-channel spatial distribution times the channel distribution of the spatial "
        "means; nonnegative, sums to 1 over the whole (C,H,W) volume");
    m.def(
        "spatial_softmax",
        [](const Array& f) { return chw_out(spatial_softmax_value(chw_in(f, "spatial_softmax"))); },
        py::arg("features"), "softmax over each channel's HxW plane");
    m.def(
        "channel_softmax_gap",
        [](const Array& f) {
            const Tensor t = channel_softmax_gap_value(chw_in(f, "channel_softmax_gap"));
            // a bare int would hit the object-conversion ctor; pass a real shape
            py::array_t<double> out(std::vector<py::ssize_t>{t.c()});
            std::copy(t.data(), t.data() + t.size(), out.mutable_data());
            return out;
        },
        py::arg("features"), "softmax of the per-channel spatial means, one weight per channel");

    // ---- ground-truth derivation ----------------------------------------------

    m.def("boundary_band_width", &boundary_band_width, py::arg("height"),
          "half-width of the boundary band at a given image height (2 px at 256 rows)");
    m.def(
        "derive_boundary_interior",
        [](const Array& mask, int width) {
            const GroundTruthTriple t = derive_boundary_interior(grid_in(mask, "mask"), width);
            return py::make_tuple(grid_out(t.gb), grid_out(t.gi));
        },
        py::arg("mask"), py::arg("width"),
        "split a binary mask into its boundary band (dilate - erode) and interior (erode)");

    // ---- dataset construction primitives ----------------------------------------

    m.def(
        "fixation_density",
        [](const std::vector<std::tuple<double, double, double>>& points, int height, int width,
           double sigma) {
            FixationSet fs;
            for (const auto& [x, y, d] : points) fs.points.push_back({x, y, d});
            return grid_out(fixation_density(fs, height, width, sigma));
        },
        py::arg("points"), py::arg("height"), py::arg("width"), py::arg("sigma"),
        "duration-weighted impulses at (x, y, duration_ms) points, Gaussian-smoothed and "
        "normalized to unit mass");
    m.def("default_density_sigma", &default_density_sigma, py::arg("width"));
    m.def(
        "object_saliency",
        [](const std::vector<std::pair<int, int>>& pixels, const std::vector<Array>& densities) {
            ObjectInstance obj;
            obj.instance_id = 1;
            obj.pixels = pixels;
            std::vector<Tensor> maps;
            for (const auto& d : densities) maps.push_back(grid_in(d, "density"));
            return object_saliency(obj, maps);
        },
        py::arg("pixels"), py::arg("densities"),
        "mean over density maps of (total mass on the object + its per-pixel average)");

    // ---- metrics ---------------------------------------------------------------

    m.def(
        "mae", [](const Array& p, const Array& g) {
            return metric_mae(grid_in(p, "pred"), grid_in(g, "gt"));
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "f_beta",
        [](const Array& p, const Array& g) {
            bool defined = false;
            const double v = metric_f_beta(grid_in(p, "pred"), grid_in(g, "gt"), &defined);
            return py::make_tuple(v, defined);
        },
        py::arg("pred"), py::arg("gt"),
        "(value, defined): max F over 8-bit thresholds, beta^2 = 0.3; undefined on empty "
        "ground truth");
    m.def(
        "weighted_f_beta",
        [](const Array& p, const Array& g) {
            bool defined = false;
            const double v =
                metric_weighted_f_beta(grid_in(p, "pred"), grid_in(g, "gt"), &defined);
            return py::make_tuple(v, defined);
        },
        py::arg("pred"), py::arg("gt"), "(value, defined): dependency-weighted F-measure");
    m.def(
        "s_measure", [](const Array& p, const Array& g) {
            return metric_s_measure(grid_in(p, "pred"), grid_in(g, "gt"));
        },
        py::arg("pred"), py::arg("gt"));
    m.def("bce_loss", [](const Array& p, const Array& g) {
        return bce_loss(grid_in(p, "pred"), grid_in(g, "gt"));
    });
    m.def(
        "evaluate_dirs",
        [](const std::string& pred_dir, const std::string& gt_dir) {
            const MetricReport r = evaluate_dirs(pred_dir, gt_dir);
            py::dict d;
            d["mae"] = r.mae;
            d["f_beta"] = r.f_beta;
            d["weighted_f_beta"] = r.weighted_f_beta;
            d["s_measure"] = r.s_measure;
            d["n_images"] = r.n_images;
            d["skipped_f"] = r.skipped_f;
            return d;
        },
        py::arg("pred_dir"), py::arg("gt_dir"),
        "pair *.png files by name across the two directories and average the four metrics");

    // ---- model -----------------------------------------------------------------

    py::class_<Model>(m, "Model")
        .def(py::init([](std::uint64_t seed, bool use_akt, bool use_bfd,
                         bool use_pretrained_general, const std::string& encoder_scale,
                         int input_height, int input_width, int decoder_channels) {
                 return Model(config_from_kwargs(use_akt, use_bfd, use_pretrained_general,
                                                 encoder_scale, input_height, input_width,
                                                 decoder_channels),
                              seed);
             }),
             py::arg("seed") = 1, py::arg("use_akt") = true, py::arg("use_bfd") = true,
             py::arg("use_pretrained_general") = false, py::arg("encoder_scale") = "tiny",
             py::arg("input_height") = 256, py::arg("input_width") = 512,
             py::arg("decoder_channels") = 0)
        .def_static(
            "from_checkpoint",
            [](const std::string& path) {
                const Checkpoint ck = load_checkpoint(path);
                if (ck.kind != CheckpointKind::Full)
                    throw DataError("from_checkpoint: needs a full checkpoint");
                Model model(ck.config, ck.seed);
                load_into_model(path, model);
                return model;
            },
            py::arg("path"), "rebuild a model exactly as stored in a full checkpoint")
        .def(
            "infer",
            [](const Model& model, const Array& image) {
                return grid_out(model.infer(image_in(image)));
            },
            py::arg("image"),
            "saliency map for one (H,W,3) or grayscale (H,W) image in [0,1]; output matches "
            "the input grid")
        .def(
            "save",
            [](const Model& model, const std::string& path, const std::string& kind) {
                if (kind != "full" && kind != "general")
                    throw py::value_error("kind must be 'full' or 'general'");
                save_model(path, model,
                           kind == "full" ? CheckpointKind::Full : CheckpointKind::General);
            },
            py::arg("path"), py::arg("kind") = "full")
        .def(
            "load", [](Model& model, const std::string& path) { load_into_model(path, model); },
            py::arg("path"), "copy stored parameter values into this model")
        .def("group_names", &Model::group_names)
        .def_property_readonly("param_count", &Model::param_count)
        .def_property_readonly("seed", &Model::seed)
        .def_property_readonly("config", [](const Model& model) {
            return config_to_dict(model.config());
        });
}
