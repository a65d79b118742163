#include "qcopilot/agents/knowledge.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "qcopilot/error.hpp"
#include "qcopilot/spaces.hpp"

namespace qcp::agents {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kEntriesFile = "entries.jsonl";
constexpr const char* kEmbeddingsFile = "embeddings.bin";

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return to_le(v);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

std::string entry_line(const KnowledgeEntry& e) {
  ojson j;
  j["id"] = e.id;
  j["text"] = e.text;
  j["tags"] = e.tags;
  j["source"] = to_string(e.source);
  return j.dump() + "\n";
}

KnowledgeEntry parse_entry(const std::string& line) {
  try {
    const auto j = ojson::parse(line);
    KnowledgeEntry e;
    e.id = j.at("id").get<std::uint64_t>();
    e.text = j.at("text").get<std::string>();
    e.tags = j.at("tags").get<std::vector<std::string>>();
    e.source = source_from_string(j.at("source").get<std::string>());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("bad knowledge entry: ") + ex.what());
  }
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<SearchHit> rank(const std::vector<KnowledgeEntry>& entries, const std::vector<float>& q, std::size_t k,
                            const std::string* tag) {
  std::vector<SearchHit> hits;
  for (const auto& e : entries)
    if (!tag || e.has_tag(*tag)) hits.push_back({&e, cosine(q, e.embedding)});
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry->id > b.entry->id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

HashedEmbedder::HashedEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw SpecError("embedding dimension must be positive");
}

std::vector<float> HashedEmbedder::embed(const std::string& text) const {
  std::vector<double> acc(dimension_, 0.0);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a(tok);
    acc[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(dimension_, 0.0f);
  if (norm > 0.0)
    for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

std::string to_string(Source s) {
  switch (s) {
    case Source::experiment: return "experiment";
    case Source::manual: return "manual";
    case Source::web: return "web";
  }
  return "manual";
}

Source source_from_string(const std::string& s) {
  if (s == "experiment") return Source::experiment;
  if (s == "manual") return Source::manual;
  if (s == "web") return Source::web;
  throw SchemaError("unknown knowledge source '" + s + "'");
}

bool KnowledgeEntry::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ArityError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

KnowledgeBase::KnowledgeBase(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {
  if (!embedder_) throw SpecError("knowledge base needs an embedder");
}

KnowledgeBase::KnowledgeBase(KnowledgeBase&& o) noexcept
    : embedder_(std::move(o.embedder_)),
      directory_(std::move(o.directory_)),
      entries_(std::move(o.entries_)),
      next_id_(o.next_id_) {}

KnowledgeBase KnowledgeBase::open(const fs::path& directory, std::shared_ptr<const Embedder> embedder) {
  KnowledgeBase kb(std::move(embedder));
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create knowledge base directory " + directory.string());
  kb.directory_ = directory;
  const fs::path entries_path = directory / kEntriesFile;
  if (fs::exists(entries_path)) {
    std::ifstream in(entries_path, std::ios::binary);
    if (!in) throw IoError("cannot read " + entries_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    std::size_t pos = 0, complete = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;  // torn tail from an interrupted append
      const std::string line = content.substr(pos, nl - pos);
      if (!trim(line).empty()) {
        auto e = parse_entry(line);
        if (e.id < kb.next_id_) throw SchemaError("knowledge entry ids are not increasing");
        kb.next_id_ = e.id + 1;
        kb.entries_.push_back(std::move(e));
      }
      pos = complete = nl + 1;
    }
    if (complete != content.size()) {
      std::ofstream out(entries_path, std::ios::binary | std::ios::trunc);
      out.write(content.data(), static_cast<std::streamsize>(complete));
      if (!out) throw IoError("cannot repair " + entries_path.string());
    }
  }

  const std::size_t dim = kb.dimension();
  bool rebuild = true;
  const fs::path emb_path = directory / kEmbeddingsFile;
  if (fs::exists(emb_path)) {
    std::ifstream in(emb_path, std::ios::binary);
    const std::uint32_t file_dim = get_u32(in), rows = get_u32(in);
    if (in && file_dim != dim) throw SchemaError("knowledge base embedding dimension differs from the embedder");
    if (in && rows == kb.entries_.size()) {
      for (auto& e : kb.entries_) {
        e.embedding.resize(dim);
        for (auto& f : e.embedding) f = get_f32(in);
      }
      rebuild = !in;
    }
  }
  if (rebuild) {
    for (auto& e : kb.entries_) e.embedding = kb.embedder_->embed(e.text);
    kb.persist_embeddings();
  }
  return kb;
}

void KnowledgeBase::persist_embeddings() const {
  if (!directory_) return;
  const fs::path path = *directory_ / kEmbeddingsFile;
  const fs::path tmp = *directory_ / (std::string(kEmbeddingsFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    put_u32(out, static_cast<std::uint32_t>(dimension()));
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_)
      for (float f : e.embedding) put_f32(out, f);
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string());
}

std::size_t KnowledgeBase::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::uint64_t KnowledgeBase::append(const std::string& text, std::vector<std::string> tags, Source source) {
  std::unique_lock lock(mutex_);
  KnowledgeEntry e;
  e.id = next_id_;
  e.text = text;
  e.tags = std::move(tags);
  e.source = source;
  e.embedding = embedder_->embed(text);
  if (e.embedding.size() != dimension()) throw SchemaError("embedder returned the wrong dimension");
  if (directory_) {
    const std::string line = entry_line(e);
    std::ofstream out(*directory_ / kEntriesFile, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw IoError("cannot append to knowledge base");
  }
  entries_.push_back(std::move(e));
  ++next_id_;
  try {
    persist_embeddings();
  } catch (const IoError&) {
    // entries.jsonl is authoritative; the index is rebuilt on the next open.
  }
  return entries_.back().id;
}

std::vector<SearchHit> KnowledgeBase::search(const std::string& query, std::size_t k) const {
  std::shared_lock lock(mutex_);
  return rank(entries_, embedder_->embed(query), k, nullptr);
}

std::vector<SearchHit> KnowledgeBase::search_tagged(const std::string& query, const std::string& tag,
                                                    std::size_t k) const {
  std::shared_lock lock(mutex_);
  return rank(entries_, embedder_->embed(query), k, &tag);
}

std::string format_hardware_report(const ParameterSpace& space) {
  std::ostringstream out;
  out << "hardware report: " << space.name() << "\n";
  out.precision(17);
  for (const auto& s : space.specs()) {
    out << s.symbol << " | " << s.name << " | " << s.unit << " | " << s.lower << " | " << s.upper;
    if (s.integer) out << " | integer";
    out << "\n";
  }
  return out.str();
}

ParameterSpace lookup_hardware_bounds(const KnowledgeBase& kb, const std::string& space_name) {
  const std::string header = "hardware report: " + lower(space_name);
  const auto hits = kb.search_tagged("hardware report " + space_name, "hardware_report", kb.size());
  for (const auto& hit : hits) {
    std::istringstream in(hit.entry->text);
    std::string line;
    std::getline(in, line);
    if (lower(trim(line)) != header) continue;
    std::vector<ParameterSpec> specs;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      std::vector<std::string> f;
      std::size_t pos = 0;
      while (true) {
        const auto bar = line.find('|', pos);
        f.push_back(trim(line.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos)));
        if (bar == std::string::npos) break;
        pos = bar + 1;
      }
      if (f.size() != 5 && !(f.size() == 6 && f[5] == "integer"))
        throw SchemaError("malformed hardware report row: " + line);
      ParameterSpec s;
      s.symbol = f[0];
      s.name = f[1];
      s.unit = f[2];
      try {
        std::size_t used = 0;
        s.lower = std::stod(f[3], &used);
        if (used != f[3].size()) throw SchemaError("bad bound");
        s.upper = std::stod(f[4], &used);
        if (used != f[4].size()) throw SchemaError("bad bound");
      } catch (const std::logic_error&) {
        throw SchemaError("non-numeric bound in hardware report row: " + line);
      }
      s.integer = f.size() == 6;
      specs.push_back(std::move(s));
    }
    return ParameterSpace(space_name, std::move(specs));
  }
  throw NotFoundError("no hardware report for space '" + space_name + "'");
}

void seed_knowledge_base(KnowledgeBase& kb) {
  kb.append(format_hardware_report(mot_space()), {"hardware_report", "MOT"}, Source::manual);
  kb.append(format_hardware_report(pgc_space()), {"hardware_report", "PGC"}, Source::manual);
  const std::pair<const char*, const char*> notes[] = {
      {"X1", "OPLL reference frequency offset shifts the cooling detuning: verify the OPLL lock and its reference "
             "synthesizer"},
      {"X2", "VCO frequency difference drift moves the repump and cooling detuning apart: check the VCO lock"},
      {"X3", "cooling light intensity drift: check AOM driver"},
      {"X3", "cooling light intensity low after realignment: check fiber coupling efficiency of the cooling beam"},
      {"X4", "repump light intensity loss: check the repump AOM and its shutter"},
      {"X5", "gradient magnetic field voltage sag: check the coil driver supply and coil current monitor"},
      {"P1", "high-detuned PGC frequency jump missing: check the OPLL ramp trigger timing"},
      {"P4", "reactivated cooling intensity wrong during PGC: check the AOM amplitude ramp table"},
  };
  for (const auto& [sym, text] : notes) kb.append(text, {"fault_note", sym}, Source::manual);
}

}  // namespace qcp::agents
