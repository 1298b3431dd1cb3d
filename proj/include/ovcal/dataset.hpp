#pragma once

#include <vector>

#include "ovcal/batch.hpp"
#include "ovcal/config.hpp"
#include "ovcal/teacher.hpp"

namespace ovcal {

struct DatasetBundle {
  CategoryTable table;
  TeacherSpace space;
  std::vector<RegionBatch> train;  // seen categories only
  std::vector<RegionBatch> val;    // seen and unseen categories
};

/// Seeded synthetic dataset: rectangular, pairwise-disjoint regions whose
/// feature grids are painted by the teacher's token oracle. Training images
/// draw labels from the seen split only; validation images from the full
/// vocabulary. A round-robin pass guarantees every eligible class occurs.
DatasetBundle generate_dataset(const ExperimentConfig& cfg);

}  // namespace ovcal
