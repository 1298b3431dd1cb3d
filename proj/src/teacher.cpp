#include "ovcal/teacher.hpp"

#include <cmath>
#include <cstdio>

#include "ovcal/rng.hpp"

namespace ovcal {

const Vec& TeacherSpace::text(const std::string& word) const {
  auto it = word_index_.find(word);
  if (it == word_index_.end()) throw LookupError("unknown word '" + word + "'");
  return text_embeds_[static_cast<std::size_t>(it->second.first)]
                     [static_cast<std::size_t>(it->second.second)];
}

const Vec& TeacherSpace::text(int category_id, int syn) const {
  const Category& c = table_.by_id(category_id);
  if (syn < 0 || syn >= static_cast<int>(c.synonyms.size()))
    throw LookupError("category " + std::to_string(category_id) + " has no synonym index " +
                      std::to_string(syn));
  return text_embeds_[static_cast<std::size_t>(category_id)][static_cast<std::size_t>(syn)];
}

Vec TeacherSpace::region_embedding(int category_id, uint64_t instance_id) const {
  const Vec& anchor = text(category_id, 0);
  if (params_.alignment == 1.0) return anchor;  // fidelity limit, bit-exact
  Rng rng(mix_seed(seed_, streams::kRegion, instance_id));
  Vec noise = normalized(rng.normal_vec(anchor.size()));
  Vec out(anchor.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = params_.alignment * anchor[i] + (1.0 - params_.alignment) * noise[i];
  normalize(out);
  return out;
}

TokenGrid TeacherSpace::token_grid(uint64_t image_id, int h, int w,
                                   const std::vector<const Grid*>& masks,
                                   const std::vector<int>& category_ids,
                                   const std::vector<uint64_t>& instance_ids) const {
  if (masks.size() != category_ids.size() || masks.size() != instance_ids.size())
    throw ShapeError("token_grid: instance list sizes differ");
  for (const Grid* m : masks)
    if (m->h != h || m->w != w) throw ShapeError("token_grid: mask shape differs from grid");

  std::vector<Vec> region(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i)
    region[i] = region_embedding(category_ids[i], instance_ids[i]);

  TokenGrid grid(h, w, params_.dim);
  for (std::size_t p = 0; p < grid.pixels(); ++p) {
    int owner = -1;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (masks[i]->v[p] > 0.0) {
        owner = static_cast<int>(i);
        break;  // masks are pairwise disjoint
      }
    }
    Vec tok;
    if (owner >= 0 && params_.token_noise == 0.0) {
      tok = region[static_cast<std::size_t>(owner)];
    } else {
      Rng rng(mix_seed(seed_, streams::kToken, image_id, p));
      Vec noise = normalized(rng.normal_vec(static_cast<std::size_t>(params_.dim)));
      if (owner >= 0) {
        tok.resize(static_cast<std::size_t>(params_.dim));
        const Vec& r = region[static_cast<std::size_t>(owner)];
        for (int d = 0; d < params_.dim; ++d)
          tok[static_cast<std::size_t>(d)] =
              r[static_cast<std::size_t>(d)] + params_.token_noise * noise[static_cast<std::size_t>(d)];
        normalize(tok);
      } else {
        tok = std::move(noise);
      }
    }
    double* dst = grid.token(p);
    for (int d = 0; d < params_.dim; ++d) dst[d] = tok[static_cast<std::size_t>(d)];
  }
  return grid;
}

std::vector<std::string> TeacherSpace::words() const {
  std::vector<std::string> out;
  for (const auto& c : table_.entries)
    for (const auto& w : c.synonyms) out.push_back(w);
  return out;
}

TeacherSpace build_teacher(const CategoryTable& table, const TeacherParams& params, uint64_t seed) {
  table.validate();
  if (table.size() < 2) throw ConfigError("teacher needs at least 2 categories");
  if (params.dim < 2) throw ConfigError("embedding dimension must be >= 2");
  if (params.alignment < 0.0 || params.alignment > 1.0)
    throw ConfigError("alignment must be in [0, 1]");
  if (params.cone_angle < 0.0) throw ConfigError("cone_angle must be >= 0");

  TeacherSpace space;
  space.table_ = table;
  space.params_ = params;
  space.seed_ = seed;
  space.text_embeds_.resize(static_cast<std::size_t>(table.size()));

  for (int c = 0; c < table.size(); ++c) {
    const Category& cat = table.by_id(c);
    Rng rng(mix_seed(seed, streams::kText, static_cast<uint64_t>(c)));
    Vec canonical = normalized(rng.normal_vec(static_cast<std::size_t>(params.dim)));

    auto& row = space.text_embeds_[static_cast<std::size_t>(c)];
    row.resize(cat.synonyms.size());
    row[0] = canonical;
    for (std::size_t s = 1; s < cat.synonyms.size(); ++s) {
      if (params.cone_angle == 0.0) {
        row[s] = canonical;  // zero cone: synonyms coincide with the canonical, exactly
        continue;
      }
      Rng srng(mix_seed(seed, streams::kSynonym, static_cast<uint64_t>(c), s));
      // Tangent direction orthogonal to the canonical, rotated by a seeded
      // angle within the cone.
      Vec g = srng.normal_vec(static_cast<std::size_t>(params.dim));
      const double proj = dot(g, canonical);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= proj * canonical[i];
      normalize(g);
      const double phi = params.cone_angle * srng.uniform01();
      Vec e(g.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        e[i] = std::cos(phi) * canonical[i] + std::sin(phi) * g[i];
      normalize(e);
      row[s] = std::move(e);
    }
    for (std::size_t s = 0; s < cat.synonyms.size(); ++s)
      space.word_index_.emplace(cat.synonyms[s], std::make_pair(c, static_cast<int>(s)));
  }
  return space;
}

CategoryTable make_synthetic_table(int categories, int synonyms_min, int synonyms_max,
                                   uint64_t seed) {
  if (categories < 2) throw ConfigError("need at least 2 categories");
  if (synonyms_min < 1 || synonyms_max < synonyms_min)
    throw ConfigError("invalid synonym count range");
  CategoryTable table;
  for (int c = 0; c < categories; ++c) {
    Rng rng(mix_seed(seed, 0x5157, static_cast<uint64_t>(c)));
    char name[16];
    std::snprintf(name, sizeof(name), "cat%02d", c);
    Category cat;
    cat.id = c;
    cat.canonical = name;
    cat.synonyms.push_back(cat.canonical);
    const int extra =
        synonyms_min - 1 +
        static_cast<int>(rng.next_u64() % static_cast<uint64_t>(synonyms_max - synonyms_min + 1));
    for (int s = 0; s < extra; ++s)
      cat.synonyms.push_back(cat.canonical + "_s" + std::to_string(s + 1));
    table.entries.push_back(std::move(cat));
  }
  table.validate();
  return table;
}

}  // namespace ovcal
