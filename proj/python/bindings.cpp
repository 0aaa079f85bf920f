#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "crisisfilter/classifier.hpp"
#include "crisisfilter/cli.hpp"
#include "crisisfilter/corpus.hpp"
#include "crisisfilter/features.hpp"
#include "crisisfilter/hash_window.hpp"
#include "crisisfilter/metrics.hpp"
#include "crisisfilter/netpbm.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/pipeline.hpp"
#include "crisisfilter/threshold.hpp"

namespace py = pybind11;
using namespace crisisfilter;

namespace {

using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// HxW (luma) or HxWxC (C = 1 or 3) uint8 array to a raster.
Raster raster_from_array(const ByteArray& a)
{
    if (a.ndim() != 2 && !(a.ndim() == 3 && (a.shape(2) == 1 || a.shape(2) == 3))) {
        throw py::value_error("image must have shape (H, W), (H, W, 1) or (H, W, 3)");
    }
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 2 ? 1 : static_cast<int>(a.shape(2));
    if (h < 1 || w < 1) {
        throw py::value_error("image must not be empty");
    }
    return Raster(w, h, c, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> raster_to_array(const Raster& r)
{
    std::vector<py::ssize_t> shape{r.height(), r.width()};
    if (r.channels() == 3) {
        shape.push_back(3);
    }
    py::array_t<std::uint8_t> out(shape);
    std::copy(r.data().begin(), r.data().end(), out.mutable_data());
    return out;
}

py::object to_py(const nlohmann::json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle& o)
{
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<double> to_array(const std::vector<double>& v)
{
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> row(const RealArray& a)
{
    if (a.ndim() != 1) {
        throw py::value_error("feature vector must be one-dimensional");
    }
    return {a.data(), a.data() + a.size()};
}

PredictionSet prediction_set(const std::vector<int>& truth, const std::vector<int>& predicted,
                             const std::vector<std::string>& classes, const std::optional<RealArray>& scores)
{
    if (truth.size() != predicted.size()) {
        throw py::value_error("truth and predicted differ in length");
    }
    PredictionSet p;
    p.classes = classes;
    const auto k = static_cast<py::ssize_t>(classes.size());
    if (scores && (scores->ndim() != 2 || scores->shape(0) != static_cast<py::ssize_t>(truth.size()) ||
                   scores->shape(1) != k)) {
        throw py::value_error("scores must have shape (n, n_classes)");
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        Prediction pr{truth[i], predicted[i], {}};
        if (scores) {
            pr.scores.assign(scores->data() + i * k, scores->data() + (i + 1) * k);
        }
        p.items.push_back(std::move(pr));
    }
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Perceptual-hash deduplication, relevancy filtering and evaluation for crisis image streams.";

    // Errors surface as ValueError with the library's message.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const std::invalid_argument& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DecodeError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const SnapshotError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    // Images
    m.def("read_image", [](const std::filesystem::path& p) { return raster_to_array(read_netpbm(p)); },
          py::arg("path"), "Read a binary PGM/PPM file into a uint8 array.");
    m.def(
        "decode_image",
        [](const py::bytes& b) {
            const std::string s = b;
            return raster_to_array(decode_netpbm(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
        },
        py::arg("data"), "Decode PGM/PPM bytes into a uint8 array.");
    m.def(
        "encode_image",
        [](const ByteArray& a) {
            const auto bytes = encode_netpbm(raster_from_array(a));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("image"), "Encode a uint8 array as PGM (2-D) or PPM (3 channels).");

    // Hashing
    m.def("phash", [](const ByteArray& a) { return phash(raster_from_array(a)).bits; }, py::arg("image"),
          "64-bit perceptual hash of a uint8 image array.");
    m.def("phash_file", [](const std::filesystem::path& p) { return phash(read_netpbm(p)).bits; }, py::arg("path"));
    m.def("hamming", [](std::uint64_t a, std::uint64_t b) { return hamming(PerceptualHash{a}, PerceptualHash{b}); },
          py::arg("a"), py::arg("b"));
    m.def("to_hex", [](std::uint64_t h) { return to_hex(PerceptualHash{h}); }, py::arg("hash"));
    m.def("extract_features", [](const ByteArray& a) { return to_array(extract_features(raster_from_array(a))); },
          py::arg("image"), "112-dim feature vector: 64 DCT coefficients then a 48-bin RGB histogram.");

    // Dedup window
    py::class_<HashWindow>(m, "HashWindow")
        .def(py::init([](int threshold, std::uint32_t capacity, const std::string& engine) {
                 const auto eng = parse_engine(engine);
                 if (!eng) {
                     throw py::value_error("engine must be 'linear' or 'bktree'");
                 }
                 return HashWindow(DedupConfig{threshold, capacity, *eng});
             }),
             py::arg("threshold") = 10, py::arg("capacity") = 100000, py::arg("engine") = "linear")
        .def(
            "check_and_insert",
            [](HashWindow& w, std::uint64_t h, std::string id) {
                const auto d = w.check_and_insert(PerceptualHash{h}, std::move(id));
                py::dict r;
                r["duplicate"] = d.duplicate();
                r["matched_id"] = d.duplicate() ? py::object(py::str(d.matched_id)) : py::object(py::none());
                r["distance"] = d.duplicate() ? py::object(py::int_(d.distance)) : py::object(py::none());
                return r;
            },
            py::arg("hash"), py::arg("id"),
            "Duplicate verdict against the window; distinct hashes are appended.")
        .def(
            "query",
            [](const HashWindow& w, std::uint64_t h, int radius) {
                std::vector<std::pair<std::string, int>> out;
                for (const auto& mt : w.query(PerceptualHash{h}, radius)) {
                    out.emplace_back(mt.id, mt.distance);
                }
                return out;
            },
            py::arg("hash"), py::arg("radius"))
        .def("__len__", &HashWindow::size)
        .def("entries",
             [](const HashWindow& w) {
                 std::vector<std::pair<std::uint64_t, std::string>> out;
                 for (const auto& e : w.entries()) {
                     out.emplace_back(e.hash.bits, e.id);
                 }
                 return out;
             })
        .def_property_readonly("threshold", [](const HashWindow& w) { return w.config().threshold_d; })
        .def_property_readonly("capacity", [](const HashWindow& w) { return w.config().capacity; })
        .def("save", [](const HashWindow& w, const std::filesystem::path& p) { save_snapshot(w, p); }, py::arg("path"))
        .def_static(
            "load",
            [](const std::filesystem::path& p, const std::string& engine) {
                const auto eng = parse_engine(engine);
                if (!eng) {
                    throw py::value_error("engine must be 'linear' or 'bktree'");
                }
                return load_snapshot(p, *eng);
            },
            py::arg("path"), py::arg("engine") = "linear");

    m.def(
        "tune_threshold",
        [](const std::vector<int>& distances, const std::vector<bool>& same, int d_min, int d_max) {
            if (distances.size() != same.size()) {
                throw py::value_error("distances and same differ in length");
            }
            std::vector<AnnotatedPair> pairs;
            for (std::size_t i = 0; i < distances.size(); ++i) {
                pairs.push_back({distances[i], same[i]});
            }
            const auto t = tune_threshold(pairs, d_min, d_max);
            py::dict r;
            r["best_d"] = t.best_d;
            py::list curve;
            for (const auto& pt : t.curve) {
                curve.append(py::make_tuple(pt.d, pt.accuracy));
            }
            r["curve"] = curve;
            return r;
        },
        py::arg("distances"), py::arg("same"), py::arg("d_min") = 0, py::arg("d_max") = 20);

    // Classifier
    py::class_<ClassifierModel>(m, "Model")
        .def_readonly("classes", &ClassifierModel::classes)
        .def_readonly("dim", &ClassifierModel::dim)
        .def("score", [](const ClassifierModel& mdl, const RealArray& x) { return to_array(score(mdl, row(x))); },
             py::arg("features"))
        .def("predict", [](const ClassifierModel& mdl, const RealArray& x) { return predict(mdl, row(x)); },
             py::arg("features"))
        .def("save", [](const ClassifierModel& mdl, const std::filesystem::path& p) { save_model(mdl, p); },
             py::arg("path"))
        .def_static("load", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"))
        .def("__eq__", [](const ClassifierModel& a, const ClassifierModel& b) { return a == b; });

    m.def(
        "train",
        [](const RealArray& x, const std::vector<int>& y, const std::vector<std::string>& classes, int epochs,
           double lam, double lr, std::uint64_t seed) {
            if (x.ndim() != 2 || x.shape(0) != static_cast<py::ssize_t>(y.size())) {
                throw py::value_error("X must have shape (n, dim) matching len(y)");
            }
            const auto dim = x.shape(1);
            std::vector<Sample> data;
            for (std::size_t i = 0; i < y.size(); ++i) {
                data.push_back({FeatureVector(x.data() + i * dim, x.data() + (i + 1) * dim), y[i]});
            }
            TrainParams p;
            p.epochs = epochs;
            p.lambda = lam;
            p.learning_rate = lr;
            p.seed = seed;
            py::gil_scoped_release release;
            return train(data, classes, p);
        },
        py::arg("X"), py::arg("y"), py::arg("classes"), py::arg("epochs") = 500, py::arg("lam") = 1e-4,
        py::arg("lr") = 0.1, py::arg("seed") = 42,
        "Multinomial logistic regression by full-batch gradient descent.");

    // Metrics
    m.def(
        "evaluate",
        [](const std::vector<int>& truth, const std::vector<int>& predicted, const std::vector<std::string>& classes,
           const std::optional<RealArray>& scores) {
            return to_py(to_json(evaluate(prediction_set(truth, predicted, classes, scores))));
        },
        py::arg("truth"), py::arg("predicted"), py::arg("classes"), py::arg("scores") = py::none(),
        "Per-class and macro precision/recall/F1 (and AP when scores are given).");
    m.def(
        "auc_pr",
        [](const std::vector<int>& truth, const std::vector<double>& scores) {
            std::vector<std::uint8_t> t(truth.begin(), truth.end());
            return auc_pr(t, scores);
        },
        py::arg("truth"), py::arg("scores"));
    m.def(
        "permutation_test",
        [](const std::vector<int>& a_truth, const std::vector<int>& a_pred, const std::vector<int>& b_truth,
           const std::vector<int>& b_pred, const std::vector<std::string>& classes, int n_shuffles,
           std::uint64_t seed) {
            const auto res = permutation_test(prediction_set(a_truth, a_pred, classes, std::nullopt),
                                              prediction_set(b_truth, b_pred, classes, std::nullopt), n_shuffles,
                                              seed);
            py::dict r;
            r["observed_diff"] = res.observed_diff;
            r["p_value"] = res.p_value;
            return r;
        },
        py::arg("a_truth"), py::arg("a_pred"), py::arg("b_truth"), py::arg("b_pred"), py::arg("classes"),
        py::arg("n_shuffles") = 1000, py::arg("seed") = 42, "Two-sided test on the macro-F1 difference.");

    // Corpus and pipeline
    m.def(
        "generate_corpus",
        [](const py::dict& spec, const std::filesystem::path& out_dir) {
            const auto s = corpus_spec_from_json(from_py(spec));
            Corpus c;
            {
                py::gil_scoped_release release;
                c = generate_corpus(s);
                write_corpus(c, out_dir);
            }
            py::dict r;
            r["records"] = c.records.size();
            r["violations"] = c.violations;
            r["manifest"] = out_dir / "manifest.jsonl";
            return r;
        },
        py::arg("spec"), py::arg("out_dir"), "Generate a synthetic corpus and write it to out_dir.");
    m.def(
        "run_pipeline",
        [](const std::filesystem::path& input, const std::optional<std::filesystem::path>& model_path, int threshold,
           std::uint32_t capacity, const std::string& engine, bool dedup_first, std::size_t workers,
           double relevancy_threshold) {
            auto ingested = ingest_file(input);
            std::optional<ClassifierModel> model;
            if (model_path) {
                model = load_model(*model_path);
            }
            const auto eng = parse_engine(engine);
            if (!eng) {
                throw py::value_error("engine must be 'linear' or 'bktree'");
            }
            HashWindow window(DedupConfig{threshold, capacity, *eng});
            PipelineConfig cfg;
            cfg.fetch_workers = workers;
            cfg.dedup_first = dedup_first;
            cfg.relevancy_threshold = relevancy_threshold;
            const DefaultFetcher fetcher(input.parent_path());
            PipelineResult res;
            {
                py::gil_scoped_release release;
                res = run_pipeline(ingested.records, model ? &*model : nullptr, window, fetcher, cfg);
            }
            nlohmann::json outcomes = nlohmann::json::array();
            for (const auto& o : res.outcomes) {
                outcomes.push_back(to_json(o));
            }
            py::dict r;
            r["report"] = to_py(to_json(res.report));
            r["outcomes"] = to_py(outcomes);
            r["kept"] = [&] {
                std::vector<std::string> ids;
                for (const auto& k : res.kept) {
                    ids.push_back(k.record.id);
                }
                return ids;
            }();
            return r;
        },
        py::arg("input"), py::arg("model") = py::none(), py::arg("threshold") = 10, py::arg("capacity") = 100000,
        py::arg("engine") = "linear", py::arg("dedup_first") = false, py::arg("workers") = 8,
        py::arg("relevancy_threshold") = 0.5, "Run fetch, relevancy and dedup over a records JSONL file.");

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int status;
            {
                py::gil_scoped_release release;
                status = run_cli(args, out, err);
            }
            return py::make_tuple(status, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (status, stdout, stderr).");
}
