#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "infogap/config.hpp"
#include "infogap/corpus.hpp"
#include "infogap/diagdist.hpp"
#include "infogap/embed.hpp"
#include "infogap/error.hpp"
#include "infogap/gam.hpp"
#include "infogap/homology.hpp"
#include "infogap/pipeline.hpp"
#include "infogap/stats.hpp"
#include "infogap/topics.hpp"

namespace py = pybind11;
using namespace infogap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<homology::PersistencePair> to_pairs(const Array& a) {
    if (a.size() == 0) return {};
    if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("diagram must be an (n, 2) array");
    auto r = a.unchecked<2>();
    std::vector<homology::PersistencePair> out;
    for (py::ssize_t i = 0; i < r.shape(0); ++i) out.push_back({r(i, 0), r(i, 1)});
    return out;
}

Array from_pairs(const std::vector<homology::PersistencePair>& pts) {
    Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        w(static_cast<py::ssize_t>(i), 0) = pts[i].birth;
        w(static_cast<py::ssize_t>(i), 1) = pts[i].death;
    }
    return out;
}

homology::DistanceMatrix to_matrix(const Array& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw py::value_error("distance matrix must be square");
    const auto n = static_cast<std::size_t>(a.shape(0));
    homology::DistanceMatrix dm(n, std::vector<double>(a.data(), a.data() + n * n));
    dm.validate();
    return dm;
}

py::dict model_dict(const gam::GamModel& m) {
    py::dict d;
    d["terms"] = m.terms;
    d["edf"] = m.edf;
    d["edf_total"] = m.edf_total;
    d["lambda"] = m.lambda;
    d["deviance"] = m.deviance;
    d["null_deviance"] = m.null_deviance;
    d["deviance_explained"] = m.deviance_explained;
    d["r2_adj"] = m.r2_adj;
    d["scale"] = m.scale;
    d["fitted"] = std::vector<double>(m.fitted.data(), m.fitted.data() + m.fitted.size());
    return d;
}

std::vector<gam::SmoothTermSpec> specs_for(const gam::Columns& data, std::size_t k) {
    std::vector<gam::SmoothTermSpec> specs;
    for (const auto& [name, values] : data) specs.push_back({name, k});
    return specs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Topological features of dynamic topic networks";

    auto base = py::register_exception<Error>(m, "InfogapError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());

    m.def("split_sentences", [](const std::string& body) { return corpus::split_sentences(body); });

    m.def(
        "window_spans",
        [](std::size_t n, std::size_t window_size, std::size_t overlap) {
            corpus::SegmenterConfig cfg;
            cfg.window_size = window_size;
            cfg.overlap = overlap;
            return corpus::window_spans(n, cfg);
        },
        py::arg("n"), py::arg("window_size") = 5, py::arg("overlap") = 2);

    m.def(
        "segment_novel",
        [](const std::string& raw, std::size_t window_size, std::size_t overlap) {
            corpus::SegmenterConfig cfg;
            cfg.window_size = window_size;
            cfg.overlap = overlap;
            py::list out;
            for (const auto& s : corpus::segment_novel(raw, {}, cfg)) {
                py::dict d;
                d["segment_id"] = s.segment_id;
                d["chapter_index"] = s.chapter_index;
                d["sentence_begin"] = s.sentence_begin;
                d["sentence_end"] = s.sentence_end;
                d["word_count"] = s.word_count;
                d["text"] = s.text;
                out.append(d);
            }
            return out;
        },
        py::arg("raw"), py::arg("window_size") = 5, py::arg("overlap") = 2);

    m.def(
        "hash_embed",
        [](const std::string& text, std::uint64_t seed, std::size_t dim) {
            const auto v = embed::hash_embed(text, seed, dim);
            return py::array_t<float>(static_cast<py::ssize_t>(v.size()), v.data());
        },
        py::arg("text"), py::arg("seed") = 17, py::arg("dim") = 1024);

    m.def(
        "hdbscan",
        [](const Array& points, std::size_t min_cluster_size, std::optional<std::size_t> min_samples) {
            if (points.ndim() != 2) throw py::value_error("points must be a 2-d array");
            embed::EmbeddingMatrix mat;
            mat.values.resize(points.shape(0), points.shape(1));
            auto r = points.unchecked<2>();
            for (py::ssize_t i = 0; i < r.shape(0); ++i) {
                mat.row_ids.push_back(static_cast<std::uint64_t>(i));
                for (py::ssize_t j = 0; j < r.shape(1); ++j) mat.values(i, j) = static_cast<float>(r(i, j));
            }
            const auto model = topics::hdbscan(mat, {min_cluster_size, min_samples});
            return py::make_tuple(model.assignment, model.probability);
        },
        py::arg("points"), py::arg("min_cluster_size") = 3, py::arg("min_samples") = py::none());

    m.def(
        "geodesic_distances",
        [](std::size_t n, const std::vector<std::tuple<std::int64_t, std::int64_t, double>>& edges) {
            network::TopicGraph g;
            for (std::size_t v = 0; v < n; ++v) g.add_vertex(static_cast<network::TopicId>(v));
            for (const auto& [a, b, w] : edges) g.add_edge(a, b, w);
            const auto dm = homology::geodesic_distances(g);
            Array out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(n)});
            std::copy(dm.values().begin(), dm.values().end(), out.mutable_data());
            return out;
        },
        py::arg("n"), py::arg("edges"), "edges are (u, v, cosine weight); distance is 1 - weight");

    m.def(
        "rips_persistence",
        [](const Array& distances, int max_dim) {
            py::list out;
            for (const auto& d : homology::rips_persistence(to_matrix(distances), max_dim)) out.append(from_pairs(d.points));
            return out;
        },
        py::arg("distances"), py::arg("max_dim") = 2);

    m.def(
        "bottleneck", [](const Array& a, const Array& b) { return diagdist::bottleneck(to_pairs(a), to_pairs(b)); },
        py::arg("a"), py::arg("b"));
    m.def(
        "wasserstein",
        [](const Array& a, const Array& b, double p) { return diagdist::wasserstein(to_pairs(a), to_pairs(b), p); },
        py::arg("a"), py::arg("b"), py::arg("p") = 1.0);

    m.def("icc_from_components", &stats::icc_from_components, py::arg("sigma2_chapter"), py::arg("sigma2_residual"),
          py::arg("k_raters"));
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::spearman(x, y); });

    m.def(
        "fit_gam",
        [](const std::vector<double>& y, const gam::Columns& data, std::size_t k) {
            return model_dict(gam::fit_gam(y, data, specs_for(data, k)));
        },
        py::arg("y"), py::arg("data"), py::arg("k") = 4);

    m.def(
        "permutation_test",
        [](const std::vector<double>& y, const gam::Columns& data, std::size_t k, std::size_t n_perm,
           std::uint64_t seed) {
            const auto r = gam::permutation_test(y, data, specs_for(data, k), {}, n_perm, seed);
            return py::make_tuple(r.p_deviance_explained, r.p_r2_adj);
        },
        py::arg("y"), py::arg("data"), py::arg("k") = 4, py::arg("n_perm") = 1000, py::arg("seed") = 42);

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& config_path, std::optional<std::filesystem::path> output_dir,
           std::optional<std::string> until, bool force) {
            auto cfg = config::load_config(config_path);
            if (output_dir) cfg.output_dir = *output_dir;
            pipeline::RunOptions options;
            options.force = force;
            if (until) {
                options.until = pipeline::parse_stage(*until);
                if (!options.until) throw ConfigError("unknown stage '" + *until + "'");
            }
            pipeline::RunResult result;
            {
                py::gil_scoped_release release;
                result = pipeline::run(cfg, options);
            }
            py::dict d;
            d["out_dir"] = result.out_dir;
            d["ran"] = result.ran;
            d["reused"] = result.reused;
            return d;
        },
        py::arg("config"), py::arg("output_dir") = py::none(), py::arg("until") = py::none(), py::arg("force") = false);

    m.attr("__version__") = pipeline::kToolVersion;
}
