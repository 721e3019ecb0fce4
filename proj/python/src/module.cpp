#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "bahop/errors.hpp"
#include "bahop/optimize.hpp"
#include "bahop/oracle.hpp"
#include "bahop/paramspace.hpp"
#include "bahop/runstore.hpp"
#include "bahop/segmentation.hpp"
#include "bahop/similarity.hpp"

namespace py = pybind11;
using namespace bahop;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RasterImage to_raster(const U8Array& a) {
  if (a.ndim() == 2) {
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return RasterImage(w, h, 1, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() == 3 && a.shape(2) == 3) {
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return RasterImage(w, h, 3, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
  }
  throw InvalidInput("expected an (H, W) or (H, W, 3) uint8 array");
}

py::array to_array(const RasterImage& img) {
  std::vector<py::ssize_t> shape = {img.height(), img.width()};
  if (img.channels() > 1) shape.push_back(img.channels());
  py::array_t<std::uint8_t> out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return std::move(out);
}

py::array to_array(const BitMask& m) {
  py::array_t<bool> out({static_cast<py::ssize_t>(m.height()), static_cast<py::ssize_t>(m.width())});
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = m.bits()[i] != 0;
  return std::move(out);
}

py::object psnr_value(const Psnr& p) { return py::float_(p.is_infinite() ? INFINITY : p.db()); }

py::dict cost_dict(const CostReport& c) {
  py::dict d;
  d["expensive_evals"] = c.expensive_evals;
  d["gate_skips"] = c.gate_skips;
  d["duplicate_skips"] = c.duplicate_skips;
  d["sim_latency_minutes"] = c.sim_latency_minutes;
  d["sim_feature_bytes"] = c.sim_feature_bytes;
  return d;
}

py::list failures_list(const std::vector<VerifyFailure>& fs) {
  py::list out;
  for (const auto& f : fs) {
    py::dict d;
    d["invariant"] = f.invariant;
    d["iteration"] = f.iteration ? py::object(py::int_(*f.iteration)) : py::object(py::none());
    d["detail"] = f.detail;
    out.append(d);
  }
  return out;
}

RunConfig parse_config(const std::string& text) { return RunConfig::from_json(nlohmann::json::parse(text)); }

ParamSpace space_named(const std::string& name) {
  if (name == "small") return ParamSpace::small();
  if (name == "desk") return ParamSpace::desk();
  throw ConfigError("space", "unknown space '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_bahop, m) {
  m.doc() = "PSNR-gated basin hopping over preprocessing hyperparameters";
  m.attr("__version__") = kToolVersion;

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<PreprocParams>(m, "PreprocParams")
      .def(py::init<>())
      .def(py::init([](int s, int b, int c, int at, int ah, int mh) { return PreprocParams{s, b, c, at, ah, mh}; }),
           py::arg("seg_thresh"), py::arg("blur_k"), py::arg("close_k"), py::arg("area_tissue_min"),
           py::arg("area_hole_min"), py::arg("max_holes"))
      .def_readwrite("seg_thresh", &PreprocParams::seg_thresh)
      .def_readwrite("blur_k", &PreprocParams::blur_k)
      .def_readwrite("close_k", &PreprocParams::close_k)
      .def_readwrite("area_tissue_min", &PreprocParams::area_tissue_min)
      .def_readwrite("area_hole_min", &PreprocParams::area_hole_min)
      .def_readwrite("max_holes", &PreprocParams::max_holes)
      .def_property_readonly("key", [](const PreprocParams& p) { return canonical_key(p); })
      .def_static("parse", &parse_key)
      .def("__eq__", [](const PreprocParams& a, const PreprocParams& b) { return a == b; })
      .def("__hash__", [](const PreprocParams& p) { return py::hash(py::str(canonical_key(p))); })
      .def("__repr__", [](const PreprocParams& p) { return "PreprocParams(" + canonical_key(p) + ")"; });

  m.def("default_start", &ParamSpace::default_start);

  py::class_<ParamSpace>(m, "ParamSpace")
      .def(py::init(&space_named), py::arg("name") = "small")
      .def("__len__", &ParamSpace::size)
      .def("__contains__", &ParamSpace::contains)
      .def("at", &ParamSpace::at)
      .def("index_of", &ParamSpace::index_of)
      .def("neighbors", &ParamSpace::neighbors)
      .def("axes", [](const ParamSpace& s) {
        py::list out;
        for (const auto& a : s.axes()) out.append(py::cast(a));
        return out;
      });

  m.def("psnr", [](const U8Array& a, const U8Array& b) { return psnr_value(psnr(to_raster(a), to_raster(b))); },
        "PSNR in dB between two uint8 images; inf when identical.");
  m.def("segment", [](const U8Array& rgb, const PreprocParams& p) { return to_array(segment(to_raster(rgb), p)); },
        py::arg("slide"), py::arg("params"));
  m.def("segment_thumbnail",
        [](const U8Array& rgb, const PreprocParams& p) { return to_array(segment_downsampled(to_raster(rgb), p)); },
        py::arg("thumbnail"), py::arg("params"));
  m.def("patches", [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask, int patch_size) {
    if (mask.ndim() != 2) throw InvalidInput("mask must be 2-d");
    std::vector<std::uint8_t> bits(mask.data(), mask.data() + mask.size());
    const BitMask bm(static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0)), std::move(bits));
    std::vector<std::pair<int, int>> out;
    for (const auto& pc : extract_patches(bm, patch_size).kept) out.emplace_back(pc.row, pc.col);
    return out;
  }, py::arg("mask"), py::arg("patch_size") = 128);

  py::class_<SyntheticCohort, std::shared_ptr<SyntheticCohort>>(m, "Cohort")
      .def(py::init([](std::uint64_t seed, int slides, int width, int height, int patch_size, const std::string& v) {
             CohortSettings cs;
             cs.seed = seed;
             cs.slides = slides;
             cs.width = width;
             cs.height = height;
             cs.patch_size = patch_size;
             cs.variant = parse_variant(v);
             return std::make_shared<SyntheticCohort>(generate_cohort(cs));
           }),
           py::arg("seed") = 1, py::arg("slides") = 32, py::arg("width") = 2048, py::arg("height") = 2048,
           py::arg("patch_size") = 128, py::arg("variant") = "A")
      .def("__len__", [](const SyntheticCohort& c) { return c.slides.size(); })
      .def_property_readonly("slide_ids", &SyntheticCohort::slide_ids)
      .def_property_readonly("labels", [](const SyntheticCohort& c) {
        std::vector<std::string> out;
        for (const auto& s : c.slides) out.emplace_back(to_string(s.label));
        return out;
      })
      .def("slide", [](const SyntheticCohort& c, std::size_t i) { return to_array(c.slides.at(i).raster); });

  py::class_<Evaluator, std::shared_ptr<Evaluator>>(m, "Evaluator")
      .def(py::init([](std::shared_ptr<SyntheticCohort> c, const std::string& v) {
             return std::make_shared<Evaluator>(std::move(c), parse_variant(v));
           }),
           py::arg("cohort"), py::arg("variant") = "A")
      .def("evaluate", [](const Evaluator& ev, const PreprocParams& p) {
        const Evaluation e = ev.evaluate(p);
        py::dict d;
        d["objective"] = e.objective;
        d["patches"] = e.cost.patches;
        d["latency_minutes"] = e.cost.latency_minutes;
        d["feature_bytes"] = e.cost.feature_bytes;
        return d;
      })
      .def("thumbnails", [](const Evaluator& ev, const PreprocParams& p) {
        py::list out;
        for (const auto& img : ev.thumbnails(p).images) out.append(to_array(img));
        return out;
      })
      .def("set_psnr", [](const Evaluator& ev, const PreprocParams& a, const PreprocParams& b) {
        return psnr_value(set_psnr(ev.thumbnails(a), ev.thumbnails(b)));
      })
      .def("tau", [](const Evaluator& ev, const PreprocParams& p0) { return calibrate_tau(ev.renderer(), p0).tau; },
           py::arg("start") = ParamSpace::default_start());

  m.def("optimize", [](const Evaluator& ev, const std::string& strategy, std::uint64_t budget, std::uint64_t seed,
                       const std::string& space, bool gate, bool greedy) {
    OptimizerConfig c;
    c.strategy = parse_strategy(strategy);
    c.budget = budget;
    c.seed = seed;
    c.gate_enabled = gate;
    c.greedy_accept = greedy;
    const ParamSpace s = space_named(space);
    OptimResult r;
    {
      py::gil_scoped_release release;
      r = run(s, ev, c);
    }
    py::dict d;
    d["best"] = r.best;
    d["best_objective"] = r.best_objective;
    d["cost"] = cost_dict(r.cost);
    d["tau"] = r.tau ? py::object(py::float_(*r.tau)) : py::object(py::none());
    d["ledger"] = r.ledger.to_jsonl();
    return d;
  }, py::arg("evaluator"), py::arg("strategy") = "bahop", py::arg("budget") = 100, py::arg("seed") = 1,
        py::arg("space") = "small", py::arg("gate") = true, py::arg("greedy") = true);

  m.def("verify_ledger", [](const std::string& jsonl, const Evaluator& ev, const std::string& space) {
    return failures_list(verify_ledger(RunLedger::from_jsonl_unchecked(jsonl), ev, space_named(space)));
  }, py::arg("ledger"), py::arg("evaluator"), py::arg("space") = "small");

  // Run store, mirroring the command-line subcommands. Configs are JSON text.
  m.def("output_root", [](std::optional<std::filesystem::path> p) { return output_root(p); },
        py::arg("explicit_root") = py::none());
  m.def("generate", [](const std::filesystem::path& dir, std::uint64_t seed, int slides, bool force) {
    GenerateOptions o;
    o.dir = dir;
    o.settings.seed = seed;
    o.settings.slides = slides;
    o.force = force;
    cmd_generate(o);
  }, py::arg("dir"), py::arg("seed") = 1, py::arg("slides") = 32, py::arg("force") = false);
  m.def("run_optimize", [](const std::string& config, const std::filesystem::path& root) {
    const RunConfig cfg = parse_config(config);
    OptimizeOutcome o;
    {
      py::gil_scoped_release release;
      o = cmd_optimize(cfg, root);
    }
    py::dict d;
    d["run_id"] = o.run_id;
    d["dir"] = o.dir;
    d["best"] = o.result.best;
    d["best_objective"] = o.result.best_objective;
    d["patches"] = o.best_patches;
    d["cost"] = cost_dict(o.result.cost);
    return d;
  }, py::arg("config"), py::arg("root"));
  m.def("compare", [](const std::filesystem::path& root, const std::vector<std::string>& ids) {
    return format_compare(cmd_compare(root, ids));
  });
  m.def("landscape", [](const std::filesystem::path& root, const std::string& id, std::optional<std::string> ref) {
    const LandscapeReport r = cmd_landscape(root, id, ref);
    py::dict d;
    d["reference"] = r.reference;
    d["reference_objective"] = r.reference_objective;
    d["rows"] = r.rows.size();
    d["spearman"] = r.spearman;
    d["csv"] = r.csv;
    return d;
  }, py::arg("root"), py::arg("run_id"), py::arg("reference") = py::none());
  m.def("verify", [](const std::filesystem::path& root, const std::string& id) {
    return failures_list(cmd_verify(root, id));
  });
}
