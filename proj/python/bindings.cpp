#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "edr/clinical.hpp"
#include "edr/curation.hpp"
#include "edr/evalstats.hpp"
#include "edr/nn/checkpoint.hpp"
#include "edr/nn/gradcheck.hpp"
#include "edr/nn/model.hpp"
#include "edr/nn/train.hpp"
#include "edr/synthgen.hpp"
#include "edr/waveform_io.hpp"

namespace py = pybind11;
using namespace edr;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::dict record_dict(const WaveformRecord& r) {
    py::dict leads;
    for (const auto& l : r.leads) leads[py::str(l.name)] = to_array(l.physical());
    py::dict d;
    d["name"] = r.name;
    d["patient_id"] = r.patient_id;
    d["sample_rate"] = r.sample_rate;
    d["start_time"] = format_iso(r.start_time);
    d["leads"] = leads;
    return d;
}

py::object ttest_obj(const std::optional<clinical::TTest>& t) {
    if (!t) return py::none();
    py::dict d;
    d["t"] = t->t;
    d["df"] = t->df;
    d["p"] = t->p;
    d["stars"] = t->stars;
    return d;
}

std::vector<MinuteExample> examples_from(py::array_t<float, py::array::c_style | py::array::forcecast> ecg,
                                         const std::vector<double>& labels) {
    if (ecg.ndim() != 2) throw std::invalid_argument("ecg must be a 2-D array (examples x samples)");
    const auto n = static_cast<std::size_t>(ecg.shape(0)), len = static_cast<std::size_t>(ecg.shape(1));
    std::vector<MinuteExample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].ecg.assign(ecg.data() + i * len, ecg.data() + (i + 1) * len);
        out[i].label = labels.empty() ? 0.0 : labels.at(i);
        out[i].patient_id = "py";
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_edrkit, m) {
    m.doc() = "ECG-derived respiratory rate toolkit";
    m.attr("__version__") = EDR_VERSION;

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<PrerequisiteError>(m, "PrerequisiteError", PyExc_FileNotFoundError);

    m.def(
        "synth_ecg",
        [](double duration_s, double resp_rate, double heart_rate, double am_depth, double rsa_depth, double noise_mv,
           std::uint64_t seed) {
            SynthParams p;
            p.resp_rate = resp_rate;
            p.heart_rate = heart_rate;
            p.am_depth = am_depth;
            p.rsa_depth = rsa_depth;
            p.noise_std_mv = noise_mv;
            p.seed = seed;
            const auto s = synth_ecg(p, duration_s);
            py::dict d = record_dict(s.record);
            std::vector<double> rr;
            for (const auto& x : s.rr_truth) rr.push_back(x.bpm);
            d["rr_truth"] = to_array(rr);
            return d;
        },
        py::arg("duration_s") = 60.0, py::arg("resp_rate") = 15.0, py::arg("heart_rate") = 75.0,
        py::arg("am_depth") = 0.2, py::arg("rsa_depth") = 0.05, py::arg("noise_mv") = 0.05, py::arg("seed") = 0,
        "Synthetic 4-lead ECG at 120 Hz with its RR truth stream (one value per 2 s).");

    m.def("read_wfdb", [](const std::filesystem::path& p) { return record_dict(read_wfdb(p)); }, py::arg("header"));
    m.def("read_native", [](const std::filesystem::path& p) { return record_dict(read_native(p)); }, py::arg("path"));

    m.def(
        "accept_label",
        [](double min_rr, double mean_rr, double max_rr, double std_rr) {
            MinuteLabel l;
            l.min_rr = min_rr;
            l.mean_rr = mean_rr;
            l.max_rr = max_rr;
            l.std_rr = std_rr;
            const auto d = accept_label(l);
            return py::make_tuple(d.accepted, to_string(d.reason));
        },
        py::arg("min_rr"), py::arg("mean_rr"), py::arg("max_rr"), py::arg("std_rr"),
        "(accepted, reason) under the default curation rules.");
    m.def("znormalize", [](const std::vector<double>& x) { return to_array(znormalize(x)); });
    m.def("resample_to_120hz", [](const std::vector<double>& x, double rate) { return to_array(resample_to_120hz(x, rate)); });

    m.def("mae", [](const std::vector<double>& p, const std::vector<double>& l) { return mae(p, l); });
    m.def("r2", [](const std::vector<double>& p, const std::vector<double>& l) { return r2(p, l); });

    m.def("student_t_sf", &clinical::student_t_sf, py::arg("t"), py::arg("df"));
    m.def("one_sample_ttest", [](const std::vector<double>& x, double mu) { return ttest_obj(clinical::one_sample_ttest(x, mu)); },
          py::arg("x"), py::arg("mu") = 1.0);
    m.def("welch_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
        return ttest_obj(clinical::welch_ttest(a, b));
    });
    m.def("resp_failure", [](std::optional<double> ph, std::optional<double> po2, std::optional<double> pco2) {
        return clinical::resp_failure({ph, po2, pco2, {}});
    }, py::arg("ph"), py::arg("po2"), py::arg("pco2"));

    m.def("count_params", [](const std::string& name) { return nn::count_params(nn::ModelSpec::named(name)); });
    m.def("count_layers", [](const std::string& name) { return nn::count_layers(nn::ModelSpec::named(name)); });
    m.def(
        "grad_check",
        [](const std::string& name, std::size_t per_tensor, std::uint64_t seed) {
            nn::GradCheckOptions o;
            o.per_tensor = per_tensor;
            o.seed = seed;
            const auto r = nn::grad_check(nn::ModelSpec::named(name), o);
            return py::make_tuple(r.max_rel_error, r.worst, r.checked);
        },
        py::arg("spec") = "tiny", py::arg("per_tensor") = 4, py::arg("seed") = 0);

    py::class_<nn::ModelState>(m, "Model")
        .def(py::init([](const std::string& spec, std::uint64_t seed) {
                 return nn::build_model(nn::ModelSpec::named(spec), seed);
             }),
             py::arg("spec") = "desk", py::arg("seed") = 0)
        .def_static("load", &nn::load_checkpoint, py::arg("dir"))
        .def("save", [](const nn::ModelState& s, const std::filesystem::path& dir) { nn::save_checkpoint(s, dir); })
        .def_property_readonly("n_params", [](const nn::ModelState& s) { return s.params.size(); })
        .def_property_readonly("input_length", [](const nn::ModelState& s) { return s.spec.input_length; })
        .def_readonly("epoch", &nn::ModelState::epoch)
        .def(
            "predict",
            [](const nn::ModelState& s, py::array_t<float, py::array::c_style | py::array::forcecast> ecg) {
                const auto ex = examples_from(ecg, {});
                py::gil_scoped_release release;
                return nn::predict(s, ex);
            },
            py::arg("ecg"), "Predicted bpm per row of raw single-lead minutes.");

    m.def(
        "train",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> ecg, const std::vector<double>& labels,
           py::array_t<float, py::array::c_style | py::array::forcecast> tune_ecg, const std::vector<double>& tune_labels,
           const std::string& spec, std::size_t epochs, std::size_t batch_size, double learning_rate, std::uint64_t seed) {
            const auto tr = examples_from(ecg, labels), tu = examples_from(tune_ecg, tune_labels);
            nn::TrainConfig c;
            c.epochs = epochs;
            c.batch_size = batch_size;
            c.learning_rate = learning_rate;
            c.seed = seed;
            py::gil_scoped_release release;
            auto r = nn::train(tr, tu, nn::ModelSpec::named(spec), c);
            return r.best_state;
        },
        py::arg("ecg"), py::arg("labels"), py::arg("tune_ecg"), py::arg("tune_labels"), py::arg("spec") = "desk",
        py::arg("epochs") = 5, py::arg("batch_size") = 128, py::arg("learning_rate") = 1e-3, py::arg("seed") = 0,
        "Trains on rows of raw minutes and returns the best-on-tune model.");
}
