#include "ovcal/category.hpp"

#include <unordered_set>

namespace ovcal {

void CategoryTable::validate() const {
  if (entries.empty()) throw ConfigError("category table is empty");
  std::unordered_set<std::string> all_words;
  for (int i = 0; i < size(); ++i) {
    const Category& c = entries[static_cast<std::size_t>(i)];
    if (c.id != i) throw ConfigError("category ids must be contiguous from 0, got " + std::to_string(c.id) + " at position " + std::to_string(i));
    if (c.synonyms.empty()) throw ConfigError("category '" + c.canonical + "' has an empty synonym list");
    if (c.synonyms.front() != c.canonical)
      throw ConfigError("category '" + c.canonical + "': canonical name must be synonym 0");
    std::unordered_set<std::string> local;
    for (const auto& w : c.synonyms) {
      if (!local.insert(w).second)
        throw ConfigError("category '" + c.canonical + "': duplicate synonym '" + w + "'");
      if (!all_words.insert(w).second)
        throw ConfigError("word '" + w + "' appears in more than one category");
    }
  }
}

}  // namespace ovcal
