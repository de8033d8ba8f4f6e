// Python bindings for the core operations: geometry, the network, dataset
// synthesis/sampling, training, tracking and evaluation.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sietrack/checkpoint.hpp"
#include "sietrack/data.hpp"
#include "sietrack/evaluation.hpp"
#include "sietrack/image_io.hpp"
#include "sietrack/model.hpp"
#include "sietrack/tracking.hpp"
#include "sietrack/training.hpp"

namespace py = pybind11;
using namespace sietrack;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const Array& a) {
    const auto info = a.request();
    if (info.ndim != 3) {
        throw std::invalid_argument("expected an (h, w, c) array, got ndim=" +
                                    std::to_string(info.ndim));
    }
    Tensor t(1, static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1]),
             static_cast<int>(info.shape[2]));
    std::copy(static_cast<const double*>(info.ptr),
              static_cast<const double*>(info.ptr) + t.size(), t.data());
    return t;
}

Array tensor_to_array(const Tensor& t) {
    if (t.n() != 1) throw std::invalid_argument("expected a single-sample tensor");
    Array a({t.h(), t.w(), t.c()});
    std::copy(t.data(), t.data() + t.size(), static_cast<double*>(a.request().ptr));
    return a;
}

RelativeOffsets offsets_from_seq(const std::vector<double>& v) {
    if (v.size() != 4) throw std::invalid_argument("offsets need exactly 4 values");
    return RelativeOffsets{{v[0], v[1], v[2], v[3]}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "lightweight siamese single-object tracker";

    py::class_<BoundingBox>(m, "BoundingBox")
        .def(py::init<>())
        .def(py::init<double, double, double, double>(), py::arg("x1"), py::arg("y1"),
             py::arg("x2"), py::arg("y2"))
        .def_readwrite("x1", &BoundingBox::x1)
        .def_readwrite("y1", &BoundingBox::y1)
        .def_readwrite("x2", &BoundingBox::x2)
        .def_readwrite("y2", &BoundingBox::y2)
        .def_property_readonly("width", &BoundingBox::width)
        .def_property_readonly("height", &BoundingBox::height)
        .def_property_readonly("area", &BoundingBox::area)
        .def("__eq__", [](const BoundingBox& a, const BoundingBox& b) { return a == b; })
        .def("__repr__", [](const BoundingBox& b) {
            return "BoundingBox(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                   std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")";
        });

    py::class_<PatchSize>(m, "PatchSize")
        .def(py::init<double, double>(), py::arg("w"), py::arg("h"))
        .def_readwrite("w", &PatchSize::w)
        .def_readwrite("h", &PatchSize::h);

    py::class_<Ltwh>(m, "Ltwh")
        .def(py::init<double, double, double, double>(), py::arg("left"), py::arg("top"),
             py::arg("width"), py::arg("height"))
        .def_readwrite("left", &Ltwh::left)
        .def_readwrite("top", &Ltwh::top)
        .def_readwrite("width", &Ltwh::width)
        .def_readwrite("height", &Ltwh::height);

    py::class_<RelativeOffsets>(m, "RelativeOffsets")
        .def(py::init<>())
        .def(py::init(&offsets_from_seq))
        .def("__getitem__", [](const RelativeOffsets& o, int i) {
            if (i < 0 || i > 3) throw py::index_error();
            return o[i];
        })
        .def("__len__", [](const RelativeOffsets&) { return 4; })
        .def("values",
             [](const RelativeOffsets& o) {
                 return std::vector<double>{o[0], o[1], o[2], o[3]};
             })
        .def("__repr__", [](const RelativeOffsets& o) {
            return "RelativeOffsets([" + std::to_string(o[0]) + ", " + std::to_string(o[1]) +
                   ", " + std::to_string(o[2]) + ", " + std::to_string(o[3]) + "])";
        });
    py::implicitly_convertible<py::list, RelativeOffsets>();

    m.def("encode_offsets", &encode_offsets, py::arg("box"), py::arg("size"));
    m.def("decode_offsets", &decode_offsets, py::arg("offsets"), py::arg("size"));
    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("clamp_box", &clamp_box, py::arg("box"), py::arg("frame"));
    m.def("corners_to_ltwh", &corners_to_ltwh, py::arg("box"));
    m.def("ltwh_to_corners", &ltwh_to_corners, py::arg("ltwh"));

    py::enum_<Backbone>(m, "Backbone")
        .value("compact5", Backbone::compact5)
        .value("compact5w", Backbone::compact5w);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("template_input", &ModelConfig::template_input)
        .def_readwrite("detection_input", &ModelConfig::detection_input)
        .def_readwrite("wz", &ModelConfig::wz)
        .def_readwrite("wx", &ModelConfig::wx)
        .def_readwrite("channels", &ModelConfig::channels)
        .def_readwrite("se_reduction", &ModelConfig::se_reduction)
        .def_readwrite("backbone", &ModelConfig::backbone)
        .def("validate", &ModelConfig::validate)
        .def("corr_size", &ModelConfig::corr_size)
        .def_static("desk_scale", &ModelConfig::desk_scale);

    py::class_<ModelWeights>(m, "ModelWeights")
        .def("parameter_count", &ModelWeights::parameter_count)
        .def("parameter_names", [](const ModelWeights& w) {
            std::vector<std::string> names;
            for (const auto& p : w.params) names.push_back(p.name);
            return names;
        });

    m.def("parameter_count", &parameter_count, py::arg("config"));
    m.def("init_weights", &init_weights, py::arg("config"), py::arg("seed"));
    m.def(
        "extract_features",
        [](const Array& image, const ModelWeights& w, const ModelConfig& cfg) {
            return tensor_to_array(extract_features(tensor_from_array(image), w, cfg));
        },
        py::arg("image"), py::arg("weights"), py::arg("config"));
    m.def(
        "se_recalibrate",
        [](const Array& f, const ModelWeights& w, const ModelConfig& cfg) {
            return tensor_to_array(se_recalibrate(tensor_from_array(f), w, cfg));
        },
        py::arg("features"), py::arg("weights"), py::arg("config"));
    m.def(
        "se_gate",
        [](const Array& f, const ModelWeights& w, const ModelConfig& cfg) {
            return se_gate(tensor_from_array(f), w, cfg);
        },
        py::arg("features"), py::arg("weights"), py::arg("config"));
    m.def(
        "channelwise_correlate",
        [](const Array& fx, const Array& fz) {
            return tensor_to_array(
                channelwise_correlate(tensor_from_array(fx), tensor_from_array(fz)));
        },
        py::arg("fx"), py::arg("fz"));
    m.def(
        "regress",
        [](const Array& corr, const ModelWeights& w, const ModelConfig& cfg) {
            return regress(tensor_from_array(corr), w, cfg);
        },
        py::arg("correlation"), py::arg("weights"), py::arg("config"));
    m.def(
        "forward",
        [](const Array& tmpl, const Array& det, const ModelWeights& w, const ModelConfig& cfg) {
            return forward(tensor_from_array(tmpl), tensor_from_array(det), w, cfg);
        },
        py::arg("template_patch"), py::arg("detection_patch"), py::arg("weights"),
        py::arg("config"));

    m.def("serialize_weights", &serialize_weights, py::arg("path"), py::arg("weights"),
          py::arg("config"));
    m.def("deserialize_weights", &deserialize_weights, py::arg("path"));
    m.def("config_hash", &config_hash, py::arg("config"));

    m.def("smooth_l1", &smooth_l1, py::arg("x"), py::arg("sigma") = 1.0);
    m.def("offsets_loss", &offsets_loss, py::arg("pred"), py::arg("target"),
          py::arg("sigma") = 1.0);

    py::class_<Rng>(m, "Rng").def(py::init<uint64_t>(), py::arg("seed"));

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("frame_w", &SynthConfig::frame_w)
        .def_readwrite("frame_h", &SynthConfig::frame_h)
        .def_readwrite("min_object", &SynthConfig::min_object)
        .def_readwrite("max_object", &SynthConfig::max_object)
        .def_readwrite("min_speed", &SynthConfig::min_speed)
        .def_readwrite("max_speed", &SynthConfig::max_speed)
        .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
        .def_readwrite("background_level", &SynthConfig::background_level)
        .def_readwrite("background_sigma", &SynthConfig::background_sigma)
        .def_readwrite("length", &SynthConfig::length)
        .def_readwrite("seed", &SynthConfig::seed)
        .def_property(
            "color",
            [](const SynthConfig& c) {
                return std::vector<double>{c.color[0], c.color[1], c.color[2]};
            },
            [](SynthConfig& c, const std::vector<double>& v) {
                if (v.size() != 3) throw std::invalid_argument("color needs 3 values");
                for (int i = 0; i < 3; ++i) c.color[i] = v[static_cast<size_t>(i)];
            });

    py::class_<SequenceRecord>(m, "SequenceRecord")
        .def_readonly("name", &SequenceRecord::name)
        .def("__len__", &SequenceRecord::size)
        .def("frame", [](const SequenceRecord& s, int i) { return tensor_to_array(s.frame(i)); },
             py::arg("index"))
        .def_property_readonly("annotations",
                               [](const SequenceRecord& s) { return s.annotations; })
        .def_property_readonly("visibility", [](const SequenceRecord& s) {
            return std::vector<bool>(s.visibility.begin(), s.visibility.end());
        });

    m.def("synth_sequence", &synth_sequence, py::arg("config"));
    m.def("export_got_style", &export_got_style, py::arg("sequence"), py::arg("dir"));
    m.def("load_got_style", &load_got_style, py::arg("root"));
    m.def("load_sequence_dir", &load_sequence_dir, py::arg("dir"));

    py::class_<PatchPair>(m, "PatchPair")
        .def_property_readonly(
            "template_patch",
            [](const PatchPair& p) { return tensor_to_array(p.template_patch); })
        .def_property_readonly(
            "detection_patch",
            [](const PatchPair& p) { return tensor_to_array(p.detection_patch); })
        .def_readonly("label", &PatchPair::label)
        .def_readonly("sequence", &PatchPair::sequence)
        .def_readonly("template_frame", &PatchPair::template_frame)
        .def_readonly("detection_frame", &PatchPair::detection_frame)
        .def_readonly("crop_region", &PatchPair::crop_region);

    m.def("sample_pair", &sample_pair, py::arg("sequence"), py::arg("rng"),
          py::arg("template_size") = 125, py::arg("detection_size") = 239);
    m.def(
        "crop_and_resize",
        [](const Array& frame, const BoundingBox& region, int out_w, int out_h) {
            return tensor_to_array(crop_and_resize(tensor_from_array(frame), region, out_w, out_h));
        },
        py::arg("frame"), py::arg("region"), py::arg("out_w"), py::arg("out_h"));

    py::enum_<Optimizer>(m, "Optimizer")
        .value("sgd", Optimizer::sgd)
        .value("momentum", Optimizer::momentum)
        .value("adam", Optimizer::adam);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("sigma", &TrainConfig::sigma)
        .def_readwrite("samples_per_epoch", &TrainConfig::samples_per_epoch)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("optimizer", &TrainConfig::optimizer)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_property(
            "checkpoint_dir",
            [](const TrainConfig& c) { return c.checkpoint_dir.string(); },
            [](TrainConfig& c, const std::string& s) { c.checkpoint_dir = s; });

    py::class_<TrainHistory>(m, "TrainHistory")
        .def_readonly("step_loss", &TrainHistory::step_loss)
        .def_readonly("epoch_mean_loss", &TrainHistory::epoch_mean_loss)
        .def_readonly("epoch_seconds", &TrainHistory::epoch_seconds);

    m.def(
        "train",
        [](const ModelConfig& mc, const TrainConfig& tc,
           const std::vector<SequenceRecord>& dataset) {
            TrainResult r = train(mc, tc, dataset);
            return py::make_tuple(std::move(r.weights), std::move(r.history));
        },
        py::arg("model_config"), py::arg("train_config"), py::arg("dataset"));
    m.def(
        "train_on_pairs",
        [](const ModelConfig& mc, const TrainConfig& tc, const std::vector<PatchPair>& pairs,
           int steps) {
            TrainResult r = train_on_pairs(mc, tc, pairs, steps);
            return py::make_tuple(std::move(r.weights), std::move(r.history));
        },
        py::arg("model_config"), py::arg("train_config"), py::arg("pairs"), py::arg("steps"));
    m.def("mean_pair_loss", &mean_pair_loss, py::arg("model_config"), py::arg("weights"),
          py::arg("pairs"), py::arg("sigma") = 1.0);

    py::class_<GradientCheckGroup>(m, "GradientCheckGroup")
        .def_readonly("name", &GradientCheckGroup::name)
        .def_readonly("max_abs_err", &GradientCheckGroup::max_abs_err)
        .def_readonly("rel_err", &GradientCheckGroup::rel_err)
        .def_readonly("max_elem_rel_err", &GradientCheckGroup::max_elem_rel_err)
        .def_readonly("grad_norm", &GradientCheckGroup::grad_norm)
        .def_readonly("kink_skipped", &GradientCheckGroup::kink_skipped);
    py::class_<GradientCheckReport>(m, "GradientCheckReport")
        .def_readonly("groups", &GradientCheckReport::groups)
        .def_readonly("max_rel_err", &GradientCheckReport::max_rel_err)
        .def_readonly("kink_skipped", &GradientCheckReport::kink_skipped)
        .def_readonly("checked", &GradientCheckReport::checked);
    m.def("gradient_check", &gradient_check, py::arg("model_config"), py::arg("sample"),
          py::arg("fd_step") = 1e-4, py::arg("sigma") = 1.0, py::arg("weight_seed") = 17);

    py::class_<Tracker>(m, "Tracker")
        .def(py::init([](const ModelWeights& w, const ModelConfig& cfg, double delta) {
                 return Tracker(std::make_shared<const ModelWeights>(w), cfg, delta);
             }),
             py::arg("weights"), py::arg("config"), py::arg("delta") = 0.5)
        .def(
            "init",
            [](Tracker& t, const Array& frame, const BoundingBox& box) {
                t.init(tensor_from_array(frame), box);
            },
            py::arg("frame"), py::arg("box"))
        .def(
            "update",
            [](Tracker& t, const Array& frame) { return t.update(tensor_from_array(frame)); },
            py::arg("frame"));

    py::class_<TrackedFrame>(m, "TrackedFrame")
        .def_readonly("frame_index", &TrackedFrame::frame_index)
        .def_readonly("box", &TrackedFrame::box)
        .def_readonly("ok", &TrackedFrame::ok);

    m.def("track_sequence", &track_sequence, py::arg("sequence"), py::arg("weights"),
          py::arg("config"), py::arg("delta") = 0.5);
    m.def("write_track_csv", &write_track_csv, py::arg("path"), py::arg("track"));

    py::class_<Curve>(m, "Curve")
        .def_readonly("thresholds", &Curve::thresholds)
        .def_readonly("values", &Curve::values);
    py::class_<OnePassResult>(m, "OnePassResult")
        .def_readonly("success", &OnePassResult::success)
        .def_readonly("auc", &OnePassResult::auc)
        .def_readonly("precision", &OnePassResult::precision)
        .def_readonly("precision_at_20", &OnePassResult::precision_at_20);
    m.def("evaluate_one_pass", &evaluate_one_pass, py::arg("outputs"), py::arg("groundtruth"));

    py::class_<ResetResult>(m, "ResetResult")
        .def_readonly("mean_iou", &ResetResult::mean_iou)
        .def_readonly("failures", &ResetResult::failures)
        .def_readonly("evaluated_frames", &ResetResult::evaluated_frames);
    m.def(
        "evaluate_with_reset",
        [](const ModelWeights& w, const ModelConfig& cfg, const SequenceRecord& seq,
           int reset_skip, double delta) {
            auto shared = std::make_shared<const ModelWeights>(w);
            return evaluate_with_reset(model_tracker_factory(shared, cfg, delta), seq, reset_skip);
        },
        py::arg("weights"), py::arg("config"), py::arg("sequence"), py::arg("reset_skip") = 5,
        py::arg("delta") = 0.5);

    py::class_<FpsReport>(m, "FpsReport")
        .def_readonly("fps", &FpsReport::fps)
        .def_readonly("per_rep", &FpsReport::per_rep)
        .def_readonly("timed_frames", &FpsReport::timed_frames)
        .def_readonly("hardware", &FpsReport::hardware);
    m.def(
        "benchmark_fps",
        [](const ModelWeights& w, const ModelConfig& cfg, const SequenceRecord& seq, int warmup,
           int reps, double delta) { return benchmark_fps(w, cfg, seq, warmup, reps, delta); },
        py::arg("weights"), py::arg("config"), py::arg("sequence"), py::arg("warmup") = 5,
        py::arg("reps") = 3, py::arg("delta") = 0.5);

    py::class_<ModelSizeReport>(m, "ModelSizeReport")
        .def_readonly("parameters", &ModelSizeReport::parameters)
        .def_readonly("checkpoint_bytes", &ModelSizeReport::checkpoint_bytes);
    m.def("report_model_size", &report_model_size, py::arg("weights"), py::arg("config"));

    m.def("load_image", [](const std::filesystem::path& p) { return tensor_to_array(load_image(p)); },
          py::arg("path"));
    m.def(
        "save_image",
        [](const std::filesystem::path& p, const Array& img) {
            save_image(p, tensor_from_array(img));
        },
        py::arg("path"), py::arg("image"));
}
