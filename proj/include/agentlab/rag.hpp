// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "agentlab/model.hpp"

namespace agentlab::rag {

inline constexpr std::size_t kDefaultChunkSize = 512;
inline constexpr std::size_t kDefaultChunkOverlap = 64;
inline constexpr std::size_t kDefaultDim = 256;

struct Document {
    std::string id;
    std::string source;
    std::string content;
    std::map<std::string, std::string> metadata;
};

struct LoadResult {
    std::vector<Document> documents;
    // One entry per skipped file, e.g. "skipped x.pdf: unsupported extension".
    std::vector<std::string> warnings;
};

/// Loads .txt/.md/.html as one document each, .csv as one document per row.
/// Directories are walked recursively in path order.
LoadResult load_path(const std::filesystem::path& path);

/// Renders a CSV row as "col1: v1; col2: v2".
std::vector<Document> parse_csv_documents(std::string_view csv, const std::string& source);

using FixtureMap = std::map<std::string, std::string>;

/// Reads a JSON object mapping URL to response body.
FixtureMap load_fixture_map(const std::filesystem::path& path);

/// Fetches a URL. With fixtures set, the body comes from the map and the
/// network is never touched.
Document load_url(const std::string& url, const FixtureMap* fixtures = nullptr);

/// Drops tags (and script/style contents), decodes the five XML entities,
/// and collapses whitespace.
std::string strip_html(std::string_view html);

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const Span&) const = default;
};

struct Chunk {
    std::string doc_id;
    std::size_t seq = 0;
    std::string text;
    Span span;

    bool operator==(const Chunk&) const = default;
};

std::vector<Chunk> chunk_fixed(std::string_view text, std::size_t size, std::size_t overlap,
                               const std::string& doc_id = {});

std::vector<Chunk> chunk_paragraphs(std::string_view text, std::size_t max_size,
                                    const std::string& doc_id = {});

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    double norm() const noexcept;
    bool is_zero() const noexcept;
    bool operator==(const EmbeddingVector&) const = default;
};

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of the token bag, L2-normalized. dim >= 8.
EmbeddingVector embed_hash(std::string_view text, std::size_t dim = kDefaultDim);

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct StoreRecord {
    std::uint64_t record_id = 0;
    Chunk chunk;
    EmbeddingVector vector;

    bool operator==(const StoreRecord&) const = default;
};

struct RetrievalResult {
    StoreRecord record;
    double score = 0.0;
};

/// Exhaustive cosine-similarity store. Single writer, many readers.
class VectorStore {
public:
    explicit VectorStore(std::size_t dim = kDefaultDim);

    VectorStore(const VectorStore& other);
    VectorStore& operator=(const VectorStore& other);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    std::vector<std::uint64_t> add(const std::vector<Chunk>& chunks);
    std::vector<RetrievalResult> query(std::string_view query_text, std::size_t k) const;
    std::optional<StoreRecord> get(std::uint64_t record_id) const;
    std::vector<StoreRecord> records() const;

    /// One JSON object per line, ordered by record_id.
    std::string serialize() const;
    std::size_t save(const std::filesystem::path& path) const;

    static VectorStore parse(std::string_view data, std::size_t default_dim = kDefaultDim);
    static VectorStore load(const std::filesystem::path& path);

    bool operator==(const VectorStore& other) const;

private:
    std::size_t dim_;
    std::uint64_t next_id_ = 0;
    std::vector<StoreRecord> records_;
    mutable std::shared_mutex mutex_;
};

inline constexpr std::string_view kAnswerInstruction =
    "Answer the question using only the provided context. If the context does not contain "
    "the answer, say that you don't know.";

struct RagAnswer {
    std::string answer;
    std::vector<std::uint64_t> citations;
    model::Usage usage;
};

RagAnswer rag_answer(const std::string& question, const VectorStore& store,
                     const model::ModelSpec& model, std::size_t k,
                     const model::GenerationParams& params);

}  // namespace agentlab::rag
