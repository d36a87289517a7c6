#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "fone/codec.hpp"
#include "fone/datagen.hpp"
#include "fone/error.hpp"
#include "fone/fone_core.hpp"
#include "fone/tokenize.hpp"
#include "fone/trainer.hpp"

namespace py = pybind11;
using namespace fone;

namespace {

PeriodSet periods_of(const std::optional<std::vector<double>>& bases) {
    return bases ? PeriodSet(*bases) : PeriodSet();
}

TaskSpec task_of(const std::string& name) { return TaskSpec::parse(name); }

// Keyword options become key=value entries, so the Python side accepts the
// same keys (and validation) as a run config file.
RunConfig run_of(const py::kwargs& options) {
    KeyValueConfig cfg;
    for (const auto& [key, value] : options) {
        const auto k = py::str(key).cast<std::string>();
        std::string v;
        if (py::isinstance<py::bool_>(value)) {
            v = value.cast<bool>() ? "true" : "false";
        } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
            for (const auto& item : value) v += (v.empty() ? "" : ",") + py::str(item).cast<std::string>();
        } else {
            v = py::str(value).cast<std::string>();
        }
        cfg.set(k, v);
    }
    return RunConfig::from_config(cfg);
}

}  // namespace

PYBIND11_MODULE(_fone, m) {
    m.doc() = "Fourier number embedding workbench (native core)";

    static py::exception<fone::Error> fone_error(m, "FoneError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const fone::Error& e) {
            py::object err = py::reinterpret_borrow<py::object>(fone_error.ptr())(e.what());
            err.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(fone_error.ptr(), err.ptr());
        }
    });

    m.def("circular_embed", [](double x, double period) {
        const auto p = circular_embed(x, period);
        return py::make_tuple(p.cos_part, p.sin_part);
    }, py::arg("x"), py::arg("period"));

    m.def("fone_encode", [](const std::string& number, int m_, int n, std::optional<std::vector<double>> bases,
                            std::optional<std::size_t> dim) {
        const auto adapter = dim ? EmbeddingAdapter::zero_pad(*dim) : EmbeddingAdapter();
        return fone_encode(number, NumberFormat(m_, n), periods_of(bases), adapter).values;
    }, py::arg("number"), py::arg("m"), py::arg("n") = 0, py::arg("bases") = py::none(), py::arg("dim") = py::none());

    m.def("recover_digits", [](const std::vector<double>& values, int m_, int n,
                               std::optional<std::vector<double>> bases) {
        const NumberFormat fmt(m_, n);
        const FoneVector v{values, fmt, values.size(), 0};
        return recover_digits(v, fmt, periods_of(bases));
    }, py::arg("values"), py::arg("m"), py::arg("n") = 0, py::arg("bases") = py::none());

    m.def("anchor_encode", [](const std::vector<int>& digits, int m_, int n, std::optional<std::vector<double>> bases) {
        return anchor_encode(digits, NumberFormat(m_, n), periods_of(bases)).values;
    }, py::arg("digits"), py::arg("m"), py::arg("n") = 0, py::arg("bases") = py::none());

    m.def("chunk_encode", [](const std::string& digits, std::size_t chunk) { return chunk_encode(digits, chunk).values; },
          py::arg("digits"), py::arg("chunk_size") = 5);
    m.def("chunk_decode", [](const std::vector<double>& values, std::size_t chunk) {
        const FoneVector v{values, NumberFormat(static_cast<int>(chunk), 0), values.size(), chunk};
        return chunk_decode(v);
    }, py::arg("values"), py::arg("chunk_size") = 5);

    m.def("final_predict", [](const std::vector<double>& h, int m_, int n, std::optional<std::vector<double>> bases) {
        return FourierHead(NumberFormat(m_, n), periods_of(bases)).final_predict(h);
    }, py::arg("h"), py::arg("m"), py::arg("n") = 0, py::arg("bases") = py::none());
    m.def("final_loss", [](const std::vector<double>& h, const std::string& label, int m_, int n,
                           std::optional<std::vector<double>> bases) {
        const NumberFormat fmt(m_, n);
        return FourierHead(fmt, periods_of(bases)).final_loss(h, DigitLabel::from_string(label, fmt));
    }, py::arg("h"), py::arg("label"), py::arg("m"), py::arg("n") = 0, py::arg("bases") = py::none());

    m.def("generate", [](const std::string& task, std::size_t count, std::uint64_t seed) {
        std::vector<std::string> lines;
        for (const auto& r : generate(task_of(task), count, seed)) lines.push_back(r.to_text());
        return lines;
    }, py::arg("task"), py::arg("count"), py::arg("seed") = 0);
    m.def("exact_answer", [](const std::string& task, const std::vector<std::string>& operands) {
        return exact_answer(task_of(task), operands);
    }, py::arg("task"), py::arg("operands"));

    m.def("numeric_token_count", [](const std::string& scheme, const std::string& number) {
        return numeric_token_count(parse_scheme(scheme), number);
    }, py::arg("scheme"), py::arg("number"));

    m.def("r_squared", [](const std::vector<double>& truth, const std::vector<double>& predicted) {
        return r_squared(truth, predicted);
    }, py::arg("truth"), py::arg("predicted"));
    m.def("exact_match", [](const std::vector<std::string>& truth, const std::vector<std::string>& predicted) {
        return exact_match(truth, predicted);
    }, py::arg("truth"), py::arg("predicted"));

    // Returns the summary as JSON text; the package wrapper decodes it.
    m.def("train_json", [](const py::kwargs& options) {
        const RunConfig run = run_of(options);
        TrainResult r;
        {
            py::gil_scoped_release release;
            r = train(run);
        }
        nlohmann::json j;
        j["run"] = nlohmann::json::parse(run_metadata(run));
        j["epochs_run"] = r.epochs_run;
        j["best_epoch"] = r.best_epoch;
        j["early_stopped"] = r.early_stopped;
        j["failure"] = r.failure;
        j["history"] = nlohmann::json::array();
        for (const auto& e : r.history) {
            j["history"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                                    {"val_exact_match", e.val_exact_match}, {"seconds", e.seconds}});
        }
        j["test"] = nlohmann::json::parse(report_json(r.test));
        return j.dump();
    });
}
