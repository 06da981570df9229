#include "kmq/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace kmq {

using nlohmann::json;

CorpusFormat format_from_name(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "binary" || name == "bin") return CorpusFormat::kBinary;
  throw ConfigError("unknown corpus format: " + name);
}

namespace {

constexpr char kMagic[4] = {'K', 'M', 'Q', '1'};

struct RawRecord {
  std::string id;
  std::vector<double> embedding;
  double quality;  // NaN = absent
  std::optional<std::string> text;
};

Corpus assemble(std::vector<RawRecord> records, const std::filesystem::path& path) {
  if (records.empty()) throw DataError("empty corpus: " + path.string());
  const int dim = static_cast<int>(records.front().embedding.size());
  const auto n = static_cast<Eigen::Index>(records.size());
  std::vector<std::string> ids;
  ids.reserve(records.size());
  Eigen::MatrixXd points(dim, n);
  Eigen::VectorXd quality(n);
  std::vector<std::optional<std::string>> text;
  text.reserve(records.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    if (static_cast<int>(r.embedding.size()) != dim)
      throw DataError("dimension mismatch for id '" + r.id + "': expected " +
                      std::to_string(dim) + ", got " + std::to_string(r.embedding.size()));
    for (int d = 0; d < dim; ++d) points(d, i) = r.embedding[static_cast<std::size_t>(d)];
    quality[i] = r.quality;
    ids.push_back(std::move(r.id));
    text.push_back(std::move(r.text));
  }
  return Corpus(dim, std::move(ids), std::move(points), std::move(quality), std::move(text));
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed record: " + e.what());
    }
    RawRecord r;
    try {
      r.id = obj.at("id").get<std::string>();
      r.embedding = obj.at("embedding").get<std::vector<double>>();
      r.quality = std::numeric_limits<double>::quiet_NaN();
      if (obj.contains("quality") && !obj["quality"].is_null())
        r.quality = obj["quality"].get<double>();
      if (obj.contains("text") && !obj["text"].is_null())
        r.text = obj["text"].get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed record: " + e.what());
    }
    records.push_back(std::move(r));
  }
  return assemble(std::move(records), path);
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < corpus.size(); ++i) {
    json obj;
    obj["id"] = corpus.id_of(i);
    std::vector<double> emb(corpus.points().col(i).data(),
                            corpus.points().col(i).data() + corpus.dimension());
    obj["embedding"] = emb;
    if (corpus.has_quality(i))
      obj["quality"] = corpus.quality()[i];
    else
      obj["quality"] = nullptr;
    const auto& text = corpus.text()[static_cast<std::size_t>(i)];
    if (text)
      obj["text"] = *text;
    else
      obj["text"] = nullptr;
    out << obj.dump() << '\n';
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  // assumes little-endian host (x86/ARM); static_assert keeps it honest
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("truncated binary corpus: " + path.string());
  return value;
}

Corpus load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad magic in " + path.string());
  const auto dim = read_le<std::uint32_t>(in, path);
  const auto count = read_le<std::uint64_t>(in, path);
  if (dim == 0 || count == 0) throw DataError("empty binary corpus: " + path.string());

  std::vector<std::string> ids;
  ids.reserve(count);
  Eigen::MatrixXd points(dim, static_cast<Eigen::Index>(count));
  Eigen::VectorXd quality(static_cast<Eigen::Index>(count));
  std::vector<float> buf(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = read_le<std::uint16_t>(in, path);
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    if (!in) throw DataError("truncated binary corpus at record " + std::to_string(i));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(float) * dim));
    if (!in) throw DataError("truncated binary corpus at record " + std::to_string(i));
    for (std::uint32_t d = 0; d < dim; ++d)
      points(d, static_cast<Eigen::Index>(i)) = static_cast<double>(buf[d]);
    quality[static_cast<Eigen::Index>(i)] = static_cast<double>(read_le<float>(in, path));
    ids.push_back(std::move(id));
  }
  std::vector<std::optional<std::string>> text(count);
  return Corpus(static_cast<int>(dim), std::move(ids), std::move(points),
                std::move(quality), std::move(text));
}

void save_binary(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_le(out, static_cast<std::uint32_t>(corpus.dimension()));
  write_le(out, static_cast<std::uint64_t>(corpus.size()));
  for (Eigen::Index i = 0; i < corpus.size(); ++i) {
    const std::string& id = corpus.id_of(i);
    if (id.size() > std::numeric_limits<std::uint16_t>::max())
      throw DataError("id too long for binary format: '" + id + "'");
    write_le(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (int d = 0; d < corpus.dimension(); ++d)
      write_le(out, static_cast<float>(corpus.points()(d, i)));
    write_le(out, static_cast<float>(corpus.quality()[i]));
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  return format == CorpusFormat::kJsonl ? load_jsonl(path) : load_binary(path);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 CorpusFormat format) {
  if (format == CorpusFormat::kJsonl)
    save_jsonl(corpus, path);
  else
    save_binary(corpus, path);
}

void save_selection(const Selection& selection, const std::filesystem::path& path) {
  if (selection.budget <= 0) throw DataError("selection budget must be positive");
  if (selection.ids.empty()) throw DataError("refusing to write an empty selection");
  json obj;
  obj["method"] = selection.method;
  obj["budget"] = selection.budget;
  obj["params"] = json::object();
  for (const auto& [key, value] : selection.params) obj["params"][key] = value;
  obj["ids"] = selection.ids;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << obj.dump(2) << '\n';
}

Selection load_selection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed selection manifest: " + e.what());
  }
  Selection s;
  s.method = obj.at("method").get<std::string>();
  s.budget = obj.at("budget").get<int>();
  s.ids = obj.at("ids").get<std::vector<std::string>>();
  for (const auto& [key, value] : obj.at("params").items())
    s.params[key] = value.get<std::string>();
  return s;
}

std::string content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

}  // namespace kmq
