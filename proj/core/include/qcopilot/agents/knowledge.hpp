#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "qcopilot/param_space.hpp"

namespace qcp::agents {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  // Unit-norm vector, or all zeros for text without tokens.
  virtual std::vector<float> embed(const std::string& text) const = 0;
};

// Bag of lowercase alphanumeric tokens, each FNV-1a hashed to a signed coordinate.
class HashedEmbedder final : public Embedder {
 public:
  explicit HashedEmbedder(std::size_t dimension = 256);
  std::size_t dimension() const override { return dimension_; }
  std::vector<float> embed(const std::string& text) const override;

 private:
  std::size_t dimension_;
};

std::vector<std::string> tokenize(const std::string& text);
std::uint64_t fnv1a(const std::string& text);

enum class Source { experiment, manual, web };
std::string to_string(Source s);
Source source_from_string(const std::string& s);  // SchemaError

struct KnowledgeEntry {
  std::uint64_t id = 0;
  std::string text;
  std::vector<std::string> tags;
  Source source = Source::manual;
  std::vector<float> embedding;

  bool has_tag(const std::string& tag) const;
};

struct SearchHit {
  const KnowledgeEntry* entry = nullptr;
  double similarity = 0.0;
};

// Append-only store. On disk: entries.jsonl (one entry per line, no embedding) and embeddings.bin
// (u32 dimension, u32 row count, then row-major little-endian f32). The embedding file is rebuilt
// from the entries when it is missing or out of step with them.
class KnowledgeBase {
 public:
  // In-memory store.
  explicit KnowledgeBase(std::shared_ptr<const Embedder> embedder = std::make_shared<HashedEmbedder>());
  // Opens or creates a store in `directory`. Throws IoError, or SchemaError on a corrupt file or a
  // dimension that disagrees with the embedder.
  static KnowledgeBase open(const std::filesystem::path& directory,
                            std::shared_ptr<const Embedder> embedder = std::make_shared<HashedEmbedder>());

  KnowledgeBase(KnowledgeBase&& other) noexcept;
  KnowledgeBase& operator=(KnowledgeBase&&) = delete;

  std::size_t size() const;
  std::size_t dimension() const { return embedder_->dimension(); }
  const std::vector<KnowledgeEntry>& entries() const { return entries_; }
  const Embedder& embedder() const { return *embedder_; }
  const std::optional<std::filesystem::path>& directory() const { return directory_; }

  // Returns the new id (ids start at 1 and are never reused). Throws IoError with nothing
  // appended when the write fails.
  std::uint64_t append(const std::string& text, std::vector<std::string> tags, Source source);

  // Top-k by cosine similarity; ties go to the newer id.
  std::vector<SearchHit> search(const std::string& query, std::size_t k) const;
  // Same, restricted to entries carrying `tag`.
  std::vector<SearchHit> search_tagged(const std::string& query, const std::string& tag, std::size_t k) const;

 private:
  std::shared_ptr<const Embedder> embedder_;
  std::optional<std::filesystem::path> directory_;
  std::vector<KnowledgeEntry> entries_;
  std::uint64_t next_id_ = 1;
  mutable std::shared_mutex mutex_;

  void persist_embeddings() const;
};

double cosine(const std::vector<float>& a, const std::vector<float>& b);

// Hardware reports are entries tagged "hardware_report" whose first line is
// "hardware report: <space name>" followed by "symbol | name | unit | lower | upper [| integer]"
// rows. Throws NotFoundError when no report names the space.
ParameterSpace lookup_hardware_bounds(const KnowledgeBase& kb, const std::string& space_name);
std::string format_hardware_report(const ParameterSpace& space);

// Hardware reports for the simulated MOT and PGC spaces and a handful of manual fault notes.
void seed_knowledge_base(KnowledgeBase& kb);

}  // namespace qcp::agents
