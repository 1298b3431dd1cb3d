#pragma once

#include <string>
#include <vector>

#include "ovcal/errors.hpp"

namespace ovcal {

// One vocabulary entry. The synonym list always contains the canonical
// name at index 0; additional entries are alternative words for the same
// concept.
struct Category {
  int id = 0;
  std::string canonical;
  std::vector<std::string> synonyms;
};

struct CategoryTable {
  std::vector<Category> entries;

  int size() const { return static_cast<int>(entries.size()); }

  const Category& by_id(int id) const {
    if (id < 0 || id >= size()) throw LookupError("unknown category id " + std::to_string(id));
    return entries[static_cast<std::size_t>(id)];
  }

  // ids contiguous from 0, canonical at synonym index 0, no duplicate words
  // within a list or across the table.
  void validate() const;
};

}  // namespace ovcal
