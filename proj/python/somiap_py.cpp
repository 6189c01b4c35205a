#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "somiap/error.hpp"
#include "somiap/facedetect.hpp"
#include "somiap/features.hpp"
#include "somiap/hashing.hpp"
#include "somiap/imagecore.hpp"
#include "somiap/manifest.hpp"
#include "somiap/numerics.hpp"
#include "somiap/pipeline.hpp"

namespace py = pybind11;
using namespace somiap;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// HxW arrays are treated as gray and promoted, HxWx3 as RGB.
ColorImage to_color(const U8Array& a) {
    const auto info = a.request();
    if (info.ndim == 2) {
        const int h = static_cast<int>(info.shape[0]), w = static_cast<int>(info.shape[1]);
        const auto* p = static_cast<const std::uint8_t*>(info.ptr);
        return gray_to_color(GrayImage(w, h, std::vector<std::uint8_t>(p, p + info.size)));
    }
    if (info.ndim == 3 && info.shape[2] == 3) {
        const int h = static_cast<int>(info.shape[0]), w = static_cast<int>(info.shape[1]);
        const auto* p = static_cast<const std::uint8_t*>(info.ptr);
        return ColorImage(w, h, std::vector<std::uint8_t>(p, p + info.size));
    }
    throw ShapeError("expected an HxW or HxWx3 uint8 array");
}

GrayImage to_gray_image(const U8Array& a) {
    const auto info = a.request();
    if (info.ndim == 2) {
        const auto* p = static_cast<const std::uint8_t*>(info.ptr);
        return GrayImage(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]),
                         std::vector<std::uint8_t>(p, p + info.size));
    }
    return to_gray(to_color(a));
}

U8Array from_color(const ColorImage& img) {
    U8Array out({img.height(), img.width(), 3});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const F64Array& a) {
    const auto info = a.request();
    if (info.ndim != 2) throw ShapeError("expected a 2-D array");
    const auto* p = static_cast<const double*>(info.ptr);
    return Matrix(static_cast<std::size_t>(info.shape[0]), static_cast<std::size_t>(info.shape[1]),
                  std::vector<double>(p, p + info.size));
}

F64Array from_matrix(const Matrix& m) {
    F64Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

HashAlgo algo_of(const std::string& name) {
    const auto a = parse_hash_algo(name);
    if (!a) throw ContractError("unknown hash algorithm '" + name + "'");
    return *a;
}

DescriptorSet orb_of(const U8Array& img, int max_features) {
    OrbParams p;
    p.max_features = max_features;
    return orb_detect_describe(to_gray_image(img), p);
}

}  // namespace

PYBIND11_MODULE(_somiap, m) {
    m.doc() = "Place and face recognition core";

    static py::exception<Error> base(m, "SomiapError");
    static py::exception<IoError> io(m, "IoError", base.ptr());
    static py::exception<DecodeError> decode(m, "DecodeError", base.ptr());
    static py::exception<ParseError> parse(m, "ParseError", base.ptr());
    static py::exception<ContractError> contract(m, "ContractError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            py::set_error(io, e.what());
        } catch (const DecodeError& e) {
            py::set_error(decode, e.what());
        } catch (const ParseError& e) {
            py::set_error(parse, e.what());
        } catch (const ContractError& e) {
            py::set_error(contract, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    m.def("load_image", [](const std::filesystem::path& p) { return from_color(load_image(p)); }, py::arg("path"),
          "Decode an image file to an HxWx3 uint8 array.");
    m.def("to_gray", [](const U8Array& img) {
        const GrayImage g = to_gray(to_color(img));
        U8Array out({g.height(), g.width()});
        std::copy(g.data().begin(), g.data().end(), out.mutable_data());
        return out;
    });

    m.def("hash_algorithms", [] {
        std::vector<std::string> out;
        for (const auto a : kAllHashAlgos) out.emplace_back(to_string(a));
        return out;
    });
    m.def("compute_hash", [](const U8Array& img, const std::string& algo) {
        return compute_hash(to_color(img), algo_of(algo)).to_string();
    }, py::arg("image"), py::arg("algo") = "phash_color", "Digest in '<algo>:<hex>' form.");
    m.def("hamming", [](const std::string& a, const std::string& b) {
        return hamming(HashDigest::parse(a), HashDigest::parse(b));
    });
    m.def("default_threshold", [](const std::string& algo) { return default_threshold(algo_of(algo)); });

    m.def("dct2", [](const F64Array& a) { return from_matrix(dct2(to_matrix(a))); });
    m.def("jacobi_eigh", [](const F64Array& a) {
        const auto d = jacobi_eigh(to_matrix(a));
        return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(d.values.size()), d.values.data()),
                              from_matrix(d.vectors));
    }, "Eigenvalues (descending) and column eigenvectors of a symmetric matrix.");

    m.def("orb_match_count", [](const U8Array& query, const U8Array& train, double ratio, int max_features) {
        return match_descriptors(orb_of(query, max_features), orb_of(train, max_features), ratio).good_count;
    }, py::arg("query"), py::arg("train"), py::arg("ratio") = 0.75, py::arg("max_features") = 500);
    m.def("orb_keypoints", [](const U8Array& img, int max_features) {
        const auto s = orb_of(img, max_features);
        py::array_t<double> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{5}});
        auto r = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto& k = s.keypoints[i];
            const auto row = static_cast<py::ssize_t>(i);
            r(row, 0) = k.x;
            r(row, 1) = k.y;
            r(row, 2) = k.level;
            r(row, 3) = k.angle;
            r(row, 4) = k.response;
        }
        return out;
    }, py::arg("image"), py::arg("max_features") = 500, "Rows of (x, y, level, angle, response).");

    py::class_<CascadeModel>(m, "Cascade")
        .def(py::init([](const std::filesystem::path& p) { return load_cascade(p); }), py::arg("path"))
        .def_property_readonly("window", [](const CascadeModel& c) { return py::make_tuple(c.window_w, c.window_h); })
        .def_property_readonly("stage_count", [](const CascadeModel& c) { return c.stages.size(); })
        .def_property_readonly("feature_count", [](const CascadeModel& c) { return c.features.size(); })
        .def("detect", [](const CascadeModel& c, const U8Array& img, double scale_step, int min_neighbors, int min_size) {
            DetectParams p{scale_step, min_neighbors, min_size};
            py::list out;
            for (const auto& d : detect_multiscale(c, to_gray_image(img), p))
                out.append(py::make_tuple(d.rect.x, d.rect.y, d.rect.w, d.rect.h, d.neighbors));
            return out;
        }, py::arg("image"), py::arg("scale_step") = 1.1, py::arg("min_neighbors") = 3, py::arg("min_size") = 24,
           "Grouped detections as (x, y, w, h, neighbors).");

    m.def("analyze_json", [](const std::filesystem::path& index, const U8Array& img,
                             const std::optional<std::filesystem::path>& cascade, const std::string& query_id) {
        const Manifest man = load_manifest(index);
        std::optional<CascadeModel> c;
        if (cascade) c = load_cascade(*cascade);
        const PlaceIndex idx = man.index();
        const AnalysisReport r = analyze(idx, c ? &*c : nullptr, man.face_model ? &*man.face_model : nullptr,
                                         to_color(img), query_id);
        return to_json(r).dump();
    }, py::arg("index"), py::arg("image"), py::arg("cascade") = py::none(), py::arg("query_id") = "query");
}
