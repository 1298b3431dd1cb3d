#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ovcal/dataset.hpp"
#include "ovcal/diversify.hpp"
#include "ovcal/distill.hpp"
#include "ovcal/evalmetrics.hpp"
#include "ovcal/losses.hpp"
#include "ovcal/matching.hpp"
#include "ovcal/teacher.hpp"

namespace py = pybind11;
using namespace ovcal;

namespace {

Vec to_vec(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  return Vec(a.data(), a.data() + a.shape(0));
}

py::array_t<double> from_vec(const Vec& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.a.begin());
  return m;
}

Grid to_grid(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  Grid g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.v.begin());
  return g;
}

TokenGrid to_tokens(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw ShapeError("expected an (h, w, dim) array");
  TokenGrid t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
              static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.v.begin());
  return t;
}

std::vector<Vec> to_rows(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  const Matrix m = to_matrix(a);
  std::vector<Vec> rows;
  for (int r = 0; r < m.rows; ++r) rows.push_back(m.row(r));
  return rows;
}

DistillBatch to_distill_batch(const py::array_t<double>& student, const py::array_t<double>& regions,
                              const py::array_t<double>& texts) {
  DistillBatch b;
  b.student = to_rows(student);
  b.teacher_regions = to_rows(regions);
  b.text_embeds = to_rows(texts);
  return b;
}

LabelMap to_label_map(const py::array_t<uint16_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d uint16 array");
  LabelMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.labels.begin());
  return m;
}

GroupMode parse_mode(const std::string& mode) {
  if (mode == "canonical") return GroupMode::Canonical;
  if (mode == "groupavg") return GroupMode::GroupAvg;
  if (mode == "groupmax") return GroupMode::GroupMax;
  throw ConfigError("mode must be canonical|groupavg|groupmax");
}

py::dict split_dict(const SplitResult& s) {
  py::dict d;
  d["seen"] = s.seen_defined ? py::object(py::float_(s.seen_miou)) : py::none();
  d["unseen"] = s.unseen_defined ? py::object(py::float_(s.unseen_miou)) : py::none();
  d["harmonic"] = s.harmonic;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "kernels for synthetic open-vocabulary segmentation calibration";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "WordLookupError", PyExc_KeyError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);

  py::class_<CategoryTable>(m, "CategoryTable")
      .def(py::init([](const std::vector<std::pair<std::string, std::vector<std::string>>>& cats) {
        CategoryTable t;
        int id = 0;
        for (const auto& [canonical, synonyms] : cats) {
          Category c;
          c.id = id++;
          c.canonical = canonical;
          c.synonyms = synonyms;
          t.entries.push_back(std::move(c));
        }
        t.validate();
        return t;
      }))
      .def("__len__", [](const CategoryTable& t) { return t.size(); })
      .def("canonical", [](const CategoryTable& t, int id) { return t.by_id(id).canonical; })
      .def("synonyms", [](const CategoryTable& t, int id) { return t.by_id(id).synonyms; });

  py::class_<TeacherSpace>(m, "TeacherSpace")
      .def_property_readonly("dim", &TeacherSpace::dim)
      .def("words", &TeacherSpace::words)
      .def("text", [](const TeacherSpace& s, const std::string& word) { return from_vec(s.text(word)); })
      .def("region_embedding", [](const TeacherSpace& s, int category_id, uint64_t instance_id) {
        return from_vec(s.region_embedding(category_id, instance_id));
      });

  m.def(
      "build_teacher",
      [](const CategoryTable& table, int dim, double cone_angle, double alignment,
         double token_noise, uint64_t seed) {
        return build_teacher(table, TeacherParams{dim, cone_angle, alignment, token_noise}, seed);
      },
      py::arg("table"), py::arg("dim") = 16, py::arg("cone_angle") = 0.35,
      py::arg("alignment") = 0.95, py::arg("token_noise") = 0.25, py::arg("seed") = 42);

  m.def("cosine_sim",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return cosine_sim(to_vec(a), to_vec(b));
        });
  m.def("l2_distance",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return l2_distance(to_vec(a), to_vec(b));
        });
  m.def("mask_pool", [](const py::array_t<double>& tokens, const py::array_t<double>& mask) {
    return from_vec(mask_pool(to_tokens(tokens), to_grid(mask)));
  });

  m.def(
      "synonym_scores",
      [](const py::array_t<double>& instance_embed, const CategoryTable& table, int category_id,
         const TeacherSpace& space, double tau) {
        return synonym_scores(to_vec(instance_embed), table.by_id(category_id), space, tau).scores;
      },
      py::arg("instance_embed"), py::arg("table"), py::arg("category_id"), py::arg("space"),
      py::arg("tau") = 1.0);
  m.def("sample_index", [](const std::vector<double>& scores, uint64_t seed) {
    return sample_index(scores, seed);
  });
  m.def("group_score", [](const py::array_t<double>& query, const CategoryTable& table,
                          int category_id, const TeacherSpace& space, const std::string& mode) {
    return group_score(to_vec(query), table.by_id(category_id), space, parse_mode(mode));
  });

  m.def("vanilla_kd", [](const py::array_t<double>& v, const py::array_t<double>& r,
                         const py::array_t<double>& t) { return vanilla_kd(to_distill_batch(v, r, t)); });
  m.def("tgkd", [](const py::array_t<double>& v, const py::array_t<double>& r,
                   const py::array_t<double>& t) { return tgkd(to_distill_batch(v, r, t)); });
  m.def("vision_guided_kd",
        [](const py::array_t<double>& v, const py::array_t<double>& r,
           const py::array_t<double>& t) { return vision_guided_kd(to_distill_batch(v, r, t)); });
  m.def("tgkd_grad", [](const py::array_t<double>& v, const py::array_t<double>& r,
                        const py::array_t<double>& t) {
    const auto grads = tgkd_grad(to_distill_batch(v, r, t));
    const py::ssize_t n = static_cast<py::ssize_t>(grads.size());
    const py::ssize_t d = static_cast<py::ssize_t>(grads.front().size());
    py::array_t<double> out({n, d});
    for (py::ssize_t i = 0; i < n; ++i)
      std::copy(grads[static_cast<std::size_t>(i)].begin(), grads[static_cast<std::size_t>(i)].end(),
                out.mutable_data(i, 0));
    return out;
  });

  m.def("bce_mask_loss", [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
    return bce_mask_loss(to_grid(pred), to_grid(gt));
  });
  m.def("dice_loss", [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
    return dice_loss(to_grid(pred), to_grid(gt));
  });
  m.def("alignment_ce", [](const py::array_t<double>& logits, const std::vector<int>& labels) {
    return alignment_ce(to_matrix(logits), labels);
  });
  m.def(
      "grounding_loss",
      [](const std::vector<py::array_t<double>>& regions,
         const std::vector<py::array_t<double>>& captions, double logit_scale) {
        std::vector<std::vector<Vec>> r, c;
        for (const auto& img : regions) r.push_back(to_rows(img));
        for (const auto& img : captions) c.push_back(to_rows(img));
        return grounding_loss(r, c, logit_scale);
      },
      py::arg("regions"), py::arg("captions"), py::arg("logit_scale") = 100.0);

  m.def("hungarian_match", [](const py::array_t<double>& cost) {
    const MatchResult r = hungarian_match(to_matrix(cost));
    return py::make_tuple(r.assignment, r.total_cost);
  });

  m.def(
      "total_loss",
      [](double mask, double ce, double grounding, double kd, double lambda_mask, double lambda_ce,
         double lambda_grounding, double lambda_kd) {
        const LossBreakdown b = total_loss(LossTerms{mask, ce, grounding, kd},
                                           LossWeights{lambda_mask, lambda_ce, lambda_grounding,
                                                       lambda_kd});
        py::dict d;
        d["total"] = b.total;
        d["mask"] = b.mask;
        d["ce"] = b.ce;
        d["grounding"] = b.grounding;
        d["kd"] = b.kd;
        return d;
      },
      py::arg("mask"), py::arg("ce"), py::arg("grounding"), py::arg("kd"),
      py::arg("lambda_mask") = 5.0, py::arg("lambda_ce") = 2.0, py::arg("lambda_grounding") = 2.0,
      py::arg("lambda_kd") = 2.0);

  m.def("miou_from_maps",
        [](const std::vector<py::array_t<uint16_t>>& preds,
           const std::vector<py::array_t<uint16_t>>& gts, int num_classes) {
          ConfusionAccumulator acc(num_classes);
          for (std::size_t i = 0; i < preds.size(); ++i)
            acc.accumulate(to_label_map(preds[i]), to_label_map(gts[i]));
          const MiouResult r = miou(acc);
          py::dict d;
          d["iou"] = r.iou;
          d["evaluated"] = r.evaluated;
          d["miou"] = r.mean_percent;
          return d;
        });
  m.def("split_metrics",
        [](const std::vector<double>& iou, const std::vector<bool>& evaluated,
           const std::vector<bool>& is_seen) {
          MiouResult r;
          r.iou = iou;
          r.evaluated = evaluated;
          return split_dict(split_metrics(r, is_seen));
        });
  m.def("video_eval", [](const std::vector<py::array_t<uint16_t>>& preds,
                         const std::vector<py::array_t<uint16_t>>& gts, int num_classes,
                         const std::vector<bool>& is_seen) {
    std::vector<LabelMap> p, g;
    for (const auto& f : preds) p.push_back(to_label_map(f));
    for (const auto& f : gts) g.push_back(to_label_map(f));
    const VideoEvalResult r = video_eval(p, g, num_classes, is_seen);
    py::dict d = split_dict(r.split);
    d["miou"] = r.per_class.mean_percent;
    return d;
  });

  m.attr("IGNORE_LABEL") = static_cast<int>(kIgnoreLabel);
}
