#include "ovcal/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ovcal {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(out, bits);
}

struct Reader {
  std::string data;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw IoError("truncated file: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  uint16_t u16() {
    need(2);
    const uint16_t v = static_cast<uint16_t>(static_cast<unsigned char>(data[pos]) |
                                             (static_cast<unsigned char>(data[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  double f32() {
    const uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return static_cast<double>(f);
  }
  void magic(const char* m) {
    need(4);
    if (std::memcmp(data.data() + pos, m, 4) != 0)
      throw IoError("bad magic in " + path + " (expected " + m + ")");
    pos += 4;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
};

Reader open_reader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r;
  r.data = ss.str();
  r.path = path;
  return r;
}

void write_binary(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

void append_label_map(std::string& bytes, const LabelMap& map) {
  bytes += "LBL1";
  put_u32(bytes, static_cast<uint32_t>(map.h));
  put_u32(bytes, static_cast<uint32_t>(map.w));
  for (uint16_t v : map.labels) put_u16(bytes, v);
}

LabelMap parse_label_map(Reader& r) {
  r.magic("LBL1");
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  LabelMap map(h, w);
  for (auto& v : map.labels) v = r.u16();
  return map;
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  write_binary(path, content);
}

std::string read_text_file(const std::string& path) { return open_reader(path).data; }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_embedding_store(const std::string& path, const std::vector<Vec>& embeds,
                           const std::vector<std::string>& words) {
  if (embeds.size() != words.size()) throw ShapeError("embedding store: word count differs");
  if (embeds.empty()) throw DomainError("embedding store: empty");
  const std::size_t dim = embeds.front().size();
  std::string bytes = "EMB1";
  put_u32(bytes, static_cast<uint32_t>(embeds.size()));
  put_u32(bytes, static_cast<uint32_t>(dim));
  for (const Vec& e : embeds) {
    if (e.size() != dim) throw ShapeError("embedding store: mixed dimensions");
    for (double x : e) put_f32(bytes, x);
  }
  write_binary(path, bytes);

  std::string index;
  for (std::size_t i = 0; i < words.size(); ++i)
    index += std::to_string(i) + "\t" + words[i] + "\n";
  write_binary(path + ".idx", index);
}

EmbeddingStore read_embedding_store(const std::string& path) {
  Reader r = open_reader(path);
  r.magic("EMB1");
  const uint32_t count = r.u32();
  const uint32_t dim = r.u32();
  EmbeddingStore store;
  store.embeds.resize(count, Vec(dim));
  for (auto& e : store.embeds)
    for (auto& x : e) x = r.f32();

  std::istringstream idx(read_text_file(path + ".idx"));
  std::string line;
  store.words.resize(count);
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed sidecar line in " + path + ".idx");
    const std::size_t ordinal = std::stoull(line.substr(0, tab));
    if (ordinal >= count) throw IoError("sidecar ordinal out of range in " + path + ".idx");
    store.words[ordinal] = line.substr(tab + 1);
  }
  return store;
}

void write_label_map(const std::string& path, const LabelMap& map) {
  std::string bytes;
  append_label_map(bytes, map);
  write_binary(path, bytes);
}

LabelMap read_label_map(const std::string& path) {
  Reader r = open_reader(path);
  return parse_label_map(r);
}

void write_label_video(const std::string& path, const std::vector<LabelMap>& frames) {
  std::string bytes = "LBV1";
  put_u32(bytes, static_cast<uint32_t>(frames.size()));
  for (const LabelMap& f : frames) append_label_map(bytes, f);
  write_binary(path, bytes);
}

std::vector<LabelMap> read_label_video(const std::string& path) {
  Reader r = open_reader(path);
  r.magic("LBV1");
  const uint32_t t = r.u32();
  std::vector<LabelMap> frames;
  frames.reserve(t);
  for (uint32_t i = 0; i < t; ++i) frames.push_back(parse_label_map(r));
  return frames;
}

void write_checkpoint(const std::string& path, const StudentModel& model) {
  std::string bytes = "GKC1";
  put_u32(bytes, static_cast<uint32_t>(model.num_queries));
  put_u32(bytes, static_cast<uint32_t>(model.query_dim));
  put_u32(bytes, static_cast<uint32_t>(model.embed_dim));
  put_u32(bytes, static_cast<uint32_t>(model.feature_dim));
  for (const Matrix* m : {&model.queries, &model.projection, &model.mask_head})
    for (double x : m->a) put_f32(bytes, x);
  put_f32(bytes, model.no_object_logit);
  write_binary(path, bytes);
}

StudentModel read_checkpoint(const std::string& path) {
  Reader r = open_reader(path);
  r.magic("GKC1");
  StudentModel model;
  model.num_queries = static_cast<int>(r.u32());
  model.query_dim = static_cast<int>(r.u32());
  model.embed_dim = static_cast<int>(r.u32());
  model.feature_dim = static_cast<int>(r.u32());
  model.queries = Matrix(model.num_queries, model.query_dim);
  model.projection = Matrix(model.query_dim, model.embed_dim);
  model.mask_head = Matrix(model.query_dim, model.feature_dim);
  for (Matrix* m : {&model.queries, &model.projection, &model.mask_head})
    for (auto& x : m->a) x = r.f32();
  model.no_object_logit = r.f32();
  model.validate();
  return model;
}

void write_synonym_table(const std::string& path, const CategoryTable& table) {
  table.validate();
  std::string out = "# id\tcanonical\tsynonyms\n";
  for (const Category& c : table.entries) {
    out += std::to_string(c.id) + "\t" + c.canonical + "\t";
    for (std::size_t s = 0; s < c.synonyms.size(); ++s) {
      if (s) out += ",";
      out += c.synonyms[s];
    }
    out += "\n";
  }
  write_binary(path, out);
}

CategoryTable read_synonym_table(const std::string& path) {
  std::istringstream in(read_text_file(path));
  CategoryTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string id_str, canonical, syns;
    if (!std::getline(row, id_str, '\t') || !std::getline(row, canonical, '\t') ||
        !std::getline(row, syns))
      throw IoError(path + ":" + std::to_string(lineno) + ": expected id<TAB>canonical<TAB>synonyms");
    Category cat;
    try {
      cat.id = std::stoi(id_str);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad category id '" + id_str + "'");
    }
    cat.canonical = canonical;
    std::istringstream slist(syns);
    std::string word;
    while (std::getline(slist, word, ',')) cat.synonyms.push_back(word);
    table.entries.push_back(std::move(cat));
  }
  table.validate();
  return table;
}

void write_dataset(const std::string& path, const std::vector<RegionBatch>& images) {
  std::string bytes = "DSB1";
  put_u32(bytes, static_cast<uint32_t>(images.size()));
  for (const RegionBatch& img : images) {
    put_u64(bytes, img.image_id);
    put_u32(bytes, static_cast<uint32_t>(img.features.h));
    put_u32(bytes, static_cast<uint32_t>(img.features.w));
    put_u32(bytes, static_cast<uint32_t>(img.features.dim));
    put_u32(bytes, static_cast<uint32_t>(img.num_instances()));
    for (double x : img.features.v) put_f32(bytes, x);
    for (int i = 0; i < img.num_instances(); ++i) {
      put_u32(bytes, static_cast<uint32_t>(img.gt_labels[static_cast<std::size_t>(i)]));
      put_u64(bytes, img.instance_ids[static_cast<std::size_t>(i)]);
      for (double m : img.gt_masks[static_cast<std::size_t>(i)].v)
        bytes.push_back(m > 0.0 ? '\1' : '\0');
    }
    put_u32(bytes, static_cast<uint32_t>(img.caption_words.size()));
    for (const std::string& w : img.caption_words) {
      put_u32(bytes, static_cast<uint32_t>(w.size()));
      bytes += w;
    }
  }
  write_binary(path, bytes);
}

std::vector<RegionBatch> read_dataset(const std::string& path) {
  Reader r = open_reader(path);
  r.magic("DSB1");
  const uint32_t count = r.u32();
  std::vector<RegionBatch> images;
  images.reserve(count);
  for (uint32_t n = 0; n < count; ++n) {
    RegionBatch img;
    img.image_id = r.u64();
    const int h = static_cast<int>(r.u32());
    const int w = static_cast<int>(r.u32());
    const int dim = static_cast<int>(r.u32());
    const uint32_t ninst = r.u32();
    img.features = TokenGrid(h, w, dim);
    for (auto& x : img.features.v) x = r.f32();
    for (uint32_t i = 0; i < ninst; ++i) {
      img.gt_labels.push_back(static_cast<int>(r.u32()));
      img.instance_ids.push_back(r.u64());
      Grid mask(h, w);
      const std::string raw = r.bytes(static_cast<std::size_t>(h) * w);
      for (std::size_t p = 0; p < mask.pixels(); ++p) mask.v[p] = raw[p] ? 1.0 : 0.0;
      img.gt_masks.push_back(std::move(mask));
    }
    const uint32_t nwords = r.u32();
    for (uint32_t i = 0; i < nwords; ++i) {
      const uint32_t len = r.u32();
      img.caption_words.push_back(r.bytes(len));
    }
    img.training_words.assign(img.gt_labels.size(), "");
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace ovcal
