#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ovcal/batch.hpp"
#include "ovcal/category.hpp"
#include "ovcal/evalmetrics.hpp"
#include "ovcal/model.hpp"

namespace ovcal {

// All binary formats are little-endian with float32 payloads.
//
//   embedding store  "EMB1"  u32 count, u32 dim, count*dim f32
//                            + UTF-8 sidecar (ordinal \t word per line)
//   label map        "LBL1"  u32 h, u32 w, h*w u16 (0xFFFF = ignore)
//   label video      "LBV1"  u32 t, then t concatenated LBL1 records
//   checkpoint       "GKC1"  u32 m, u32 d_q, u32 d, u32 d_f, then queries,
//                            projection, mask_head row-major f32, then the
//                            no-object logit as one trailing f32
//   dataset          "DSB1"  see read_dataset/write_dataset

void write_embedding_store(const std::string& path, const std::vector<Vec>& embeds,
                           const std::vector<std::string>& words);

struct EmbeddingStore {
  std::vector<Vec> embeds;
  std::vector<std::string> words;
};
EmbeddingStore read_embedding_store(const std::string& path);

void write_label_map(const std::string& path, const LabelMap& map);
LabelMap read_label_map(const std::string& path);

void write_label_video(const std::string& path, const std::vector<LabelMap>& frames);
std::vector<LabelMap> read_label_video(const std::string& path);

void write_checkpoint(const std::string& path, const StudentModel& model);
StudentModel read_checkpoint(const std::string& path);

/// One record per line: id<TAB>canonical<TAB>syn1,syn2,...
/// The synonym column lists the full set with the canonical name first.
/// Lines starting with '#' are comments.
void write_synonym_table(const std::string& path, const CategoryTable& table);
CategoryTable read_synonym_table(const std::string& path);

void write_dataset(const std::string& path, const std::vector<RegionBatch>& images);
std::vector<RegionBatch> read_dataset(const std::string& path);

/// Shortest round-trippable decimal form; shared by every text artifact so
/// repeated runs stay byte-identical.
std::string fmt_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace ovcal
