// SPDX-License-Identifier: Apache-2.0
#include "agentlab/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "agentlab/error.hpp"
#include "agentlab/http.hpp"
#include "agentlab/text.hpp"

namespace agentlab::rag {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// --- loaders ---------------------------------------------------------------

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return buf.str();
}

std::vector<std::vector<std::string>> parse_csv(std::string_view csv) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool row_has_content = false;
    for (std::size_t i = 0; i < csv.size(); ++i) {
        char c = csv[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < csv.size() && csv[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                row_has_content = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_has_content || !field.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                row.clear();
                field.clear();
                row_has_content = false;
                break;
            default:
                field += c;
                row_has_content = true;
        }
    }
    if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

void load_file(const fs::path& path, LoadResult& out) {
    auto ext = text::to_lower(path.extension().string());
    if (ext == ".txt" || ext == ".md" || ext == ".html" || ext == ".htm") {
        Document doc;
        doc.id = path.generic_string();
        doc.source = doc.id;
        doc.content = read_file(path);
        doc.metadata["format"] = ext.substr(1);
        out.documents.push_back(std::move(doc));
    } else if (ext == ".csv") {
        auto docs = parse_csv_documents(read_file(path), path.generic_string());
        for (auto& d : docs) out.documents.push_back(std::move(d));
    } else {
        out.warnings.push_back("skipped " + path.generic_string() + ": unsupported extension");
    }
}

}  // namespace

std::vector<Document> parse_csv_documents(std::string_view csv, const std::string& source) {
    auto rows = parse_csv(csv);
    std::vector<Document> docs;
    if (rows.empty()) return docs;
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.emplace_back(text::trim(h));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::vector<std::string> parts;
        for (std::size_t c = 0; c < header.size(); ++c) {
            auto value = c < rows[r].size() ? rows[r][c] : std::string{};
            parts.push_back(header[c] + ": " + value);
        }
        Document doc;
        doc.id = source + "#" + std::to_string(r);
        doc.source = source;
        doc.content = text::join(parts, "; ");
        doc.metadata["format"] = "csv";
        doc.metadata["row"] = std::to_string(r);
        docs.push_back(std::move(doc));
    }
    return docs;
}

LoadResult load_path(const fs::path& path) {
    std::error_code ec;
    auto status = fs::status(path, ec);
    if (ec || !fs::exists(status)) throw IoError("no such path: " + path.string());

    LoadResult out;
    if (fs::is_directory(status)) {
        std::vector<fs::path> files;
        for (auto it = fs::recursive_directory_iterator(path, ec);
             !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
            if (it->is_regular_file()) files.push_back(it->path());
        }
        if (ec) throw IoError("cannot walk " + path.string() + ": " + ec.message());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) load_file(f, out);
    } else {
        load_file(path, out);
    }
    return out;
}

FixtureMap load_fixture_map(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw IoError("fixture file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw IoError("fixture file must be a JSON object: " + path.string());
    FixtureMap out;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        out[it.key()] = it->is_string() ? it->get<std::string>() : it->dump();
    }
    return out;
}

Document load_url(const std::string& url, const FixtureMap* fixtures) {
    Document doc;
    doc.id = url;
    doc.source = url;
    doc.metadata["format"] = "url";
    if (fixtures) {
        auto it = fixtures->find(url);
        if (it == fixtures->end()) throw IoError("no fixture for url: " + url);
        doc.content = it->second;
        return doc;
    }
    auto resp = http::get(url);
    if (resp.status < 200 || resp.status >= 300) {
        throw IoError("GET " + url + " returned HTTP " + std::to_string(resp.status));
    }
    doc.content = std::move(resp.body);
    return doc;
}

// --- HTML ------------------------------------------------------------------

namespace {

bool is_inline_tag(std::string_view name) {
    static const std::set<std::string, std::less<>> kInline = {
        "a",    "abbr", "b",   "code", "em",   "font", "i",      "kbd", "mark",
        "q",    "s",    "samp", "small", "span", "strong", "sub", "sup", "u", "var"};
    return kInline.count(name) > 0;
}

std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (text::istarts_with(hay.substr(i), needle)) return i;
    }
    return std::string_view::npos;
}

std::string decode_entities(std::string_view s) {
    static const std::pair<std::string_view, char> kEntities[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        bool matched = false;
        if (s[i] == '&') {
            for (const auto& [name, ch] : kEntities) {
                if (s.substr(i, name.size()) == name) {
                    out += ch;
                    i += name.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) out += s[i++];
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

}  // namespace

std::string strip_html(std::string_view html) {
    std::string body;
    body.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        char c = html[i];
        if (c != '<' || i + 1 >= html.size()) {
            body += c;
            ++i;
            continue;
        }
        char next = html[i + 1];
        if (html.substr(i, 4) == "<!--") {
            auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            body += ' ';
            continue;
        }
        bool closing = next == '/';
        bool tag_like = std::isalpha(static_cast<unsigned char>(next)) || closing || next == '!' ||
                        next == '?';
        if (!tag_like) {
            body += c;
            ++i;
            continue;
        }
        auto gt = html.find('>', i + 1);
        if (gt == std::string_view::npos) break;  // unterminated tag: drop the rest

        std::size_t name_start = i + (closing ? 2 : 1);
        std::size_t name_end = name_start;
        while (name_end < gt && std::isalnum(static_cast<unsigned char>(html[name_end]))) {
            ++name_end;
        }
        auto name = text::to_lower(html.substr(name_start, name_end - name_start));
        i = gt + 1;

        if (!closing && (name == "script" || name == "style")) {
            auto close = ifind(html, "</" + name, i);
            if (close == std::string_view::npos) {
                i = html.size();
            } else {
                auto close_gt = html.find('>', close);
                i = close_gt == std::string_view::npos ? html.size() : close_gt + 1;
            }
            body += ' ';
            continue;
        }
        if (!is_inline_tag(name)) body += ' ';
    }
    return collapse_whitespace(decode_entities(body));
}

// --- chunking --------------------------------------------------------------

std::vector<Chunk> chunk_fixed(std::string_view text, std::size_t size, std::size_t overlap,
                               const std::string& doc_id) {
    if (size == 0) throw ValidationError("chunk size must be positive");
    if (overlap >= size) throw ValidationError("chunk overlap must be smaller than chunk size");
    std::vector<Chunk> chunks;
    const std::size_t step = size - overlap;
    for (std::size_t start = 0; start < text.size(); start += step) {
        auto end = std::min(start + size, text.size());
        chunks.push_back(Chunk{doc_id, chunks.size(), std::string(text.substr(start, end - start)),
                               Span{start, end}});
        if (end == text.size()) break;
    }
    return chunks;
}

std::vector<Chunk> chunk_paragraphs(std::string_view text, std::size_t max_size,
                                    const std::string& doc_id) {
    if (max_size == 0) throw ValidationError("max_size must be positive");

    struct Paragraph {
        std::size_t start, end;
    };
    std::vector<Paragraph> paragraphs;
    {
        std::optional<std::size_t> para_start;
        std::size_t para_end = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            auto line_end = nl == std::string_view::npos ? text.size() : nl;
            auto line = text.substr(pos, line_end - pos);
            if (text::trim(line).empty()) {
                if (para_start) paragraphs.push_back({*para_start, para_end});
                para_start.reset();
            } else {
                if (!para_start) para_start = pos;
                para_end = line_end;
            }
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        if (para_start) paragraphs.push_back({*para_start, para_end});
    }
    // Trim each paragraph's span to its non-whitespace content.
    for (auto& p : paragraphs) {
        while (p.start < p.end && std::isspace(static_cast<unsigned char>(text[p.start]))) ++p.start;
        while (p.end > p.start && std::isspace(static_cast<unsigned char>(text[p.end - 1]))) --p.end;
    }

    std::vector<Chunk> chunks;
    std::optional<Chunk> current;
    auto flush = [&] {
        if (current) {
            current->seq = chunks.size();
            chunks.push_back(std::move(*current));
            current.reset();
        }
    };
    for (const auto& p : paragraphs) {
        auto body = text.substr(p.start, p.end - p.start);
        if (body.size() > max_size) {
            flush();
            for (auto& piece : chunk_fixed(body, max_size, 0, doc_id)) {
                piece.seq = chunks.size();
                piece.span = Span{p.start + piece.span.start, p.start + piece.span.end};
                chunks.push_back(std::move(piece));
            }
            continue;
        }
        if (current && current->text.size() + 1 + body.size() <= max_size) {
            current->text += '\n';
            current->text += body;
            current->span.end = p.end;
            continue;
        }
        flush();
        current = Chunk{doc_id, 0, std::string(body), Span{p.start, p.end}};
    }
    flush();
    return chunks;
}

// --- embeddings ------------------------------------------------------------

double EmbeddingVector::norm() const noexcept {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

bool EmbeddingVector::is_zero() const noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (uc < 0x80 && std::isalnum(uc)) {
            current += static_cast<char>(std::tolower(uc));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

EmbeddingVector embed_hash(std::string_view text, std::size_t dim) {
    if (dim < 8) throw ValidationError("embedding dimension must be at least 8");
    EmbeddingVector out;
    out.values.assign(dim, 0.0);
    for (const auto& token : tokenize(text)) {
        auto h = fnv1a64(token);
        out.values[h % dim] += (h >> 63) == 0 ? 1.0 : -1.0;
    }
    auto n = out.norm();
    if (n > 0.0) {
        for (double& v : out.values) v /= n;
    }
    return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw ValidationError("cosine of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// --- vector store ----------------------------------------------------------

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {
    if (dim < 8) throw ValidationError("embedding dimension must be at least 8");
}

VectorStore::VectorStore(const VectorStore& other) {
    std::shared_lock lock(other.mutex_);
    dim_ = other.dim_;
    next_id_ = other.next_id_;
    records_ = other.records_;
}

VectorStore& VectorStore::operator=(const VectorStore& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_);
    std::shared_lock other_lock(other.mutex_);
    dim_ = other.dim_;
    next_id_ = other.next_id_;
    records_ = other.records_;
    return *this;
}

std::size_t VectorStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::vector<std::uint64_t> VectorStore::add(const std::vector<Chunk>& chunks) {
    std::vector<StoreRecord> fresh;
    fresh.reserve(chunks.size());
    for (const auto& c : chunks) fresh.push_back(StoreRecord{0, c, embed_hash(c.text, dim_)});

    std::scoped_lock lock(mutex_);
    std::vector<std::uint64_t> ids;
    for (auto& r : fresh) {
        r.record_id = next_id_++;
        ids.push_back(r.record_id);
        records_.push_back(std::move(r));
    }
    return ids;
}

std::vector<RetrievalResult> VectorStore::query(std::string_view query_text, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    auto q = embed_hash(query_text, dim_);

    std::shared_lock lock(mutex_);
    std::vector<std::pair<double, const StoreRecord*>> scored;
    scored.reserve(records_.size());
    for (const auto& r : records_) scored.emplace_back(cosine(q, r.vector), &r);
    auto take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second->record_id < b.second->record_id;
                      });
    std::vector<RetrievalResult> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({*scored[i].second, scored[i].first});
    return out;
}

std::optional<StoreRecord> VectorStore::get(std::uint64_t record_id) const {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_) {
        if (r.record_id == record_id) return r;
    }
    return std::nullopt;
}

std::vector<StoreRecord> VectorStore::records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

bool VectorStore::operator==(const VectorStore& other) const {
    if (this == &other) return true;
    std::shared_lock a(mutex_);
    std::shared_lock b(other.mutex_);
    return dim_ == other.dim_ && next_id_ == other.next_id_ && records_ == other.records_;
}

std::string VectorStore::serialize() const {
    std::shared_lock lock(mutex_);
    std::string out;
    for (const auto& r : records_) {
        ordered_json line;
        line["record_id"] = r.record_id;
        line["doc_id"] = r.chunk.doc_id;
        line["seq"] = r.chunk.seq;
        line["text"] = r.chunk.text;
        line["span"] = {r.chunk.span.start, r.chunk.span.end};
        line["vector"] = r.vector.values;
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::size_t VectorStore::save(const fs::path& path) const {
    auto data = serialize();
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw IoError("error writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
    return data.size();
}

VectorStore VectorStore::parse(std::string_view data, std::size_t default_dim) {
    std::optional<VectorStore> store;
    std::size_t line_no = 0;
    for (auto line : text::split_lines(data)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        StoreRecord rec;
        try {
            auto doc = json::parse(line);
            rec.record_id = doc.at("record_id").get<std::uint64_t>();
            rec.chunk.doc_id = doc.at("doc_id").get<std::string>();
            rec.chunk.seq = doc.at("seq").get<std::size_t>();
            rec.chunk.text = doc.at("text").get<std::string>();
            const auto& span = doc.at("span");
            if (!span.is_array() || span.size() != 2) throw ParseError(line_no, "span must be [s,e]");
            rec.chunk.span = Span{span[0].get<std::size_t>(), span[1].get<std::size_t>()};
            rec.vector.values = doc.at("vector").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (!store) {
            if (rec.vector.dim() < 8) throw ParseError(line_no, "vector dimension below 8");
            store.emplace(rec.vector.dim());
        }
        if (rec.vector.dim() != store->dim_) throw ParseError(line_no, "vector dimension mismatch");
        if (!store->records_.empty() && rec.record_id <= store->records_.back().record_id) {
            throw ParseError(line_no, "record_id not strictly increasing");
        }
        store->next_id_ = rec.record_id + 1;
        store->records_.push_back(std::move(rec));
    }
    if (!store) return VectorStore(default_dim);
    return std::move(*store);
}

VectorStore VectorStore::load(const fs::path& path) { return parse(read_file(path)); }

// --- chain -----------------------------------------------------------------

RagAnswer rag_answer(const std::string& question, const VectorStore& store,
                     const model::ModelSpec& model, std::size_t k,
                     const model::GenerationParams& params) {
    if (store.empty()) throw ValidationError("rag_answer needs a non-empty store");
    auto hits = store.query(question, k);

    std::vector<std::string> texts;
    RagAnswer out;
    for (const auto& h : hits) {
        texts.push_back(h.record.chunk.text);
        out.citations.push_back(h.record.record_id);
    }
    model::PromptSpec spec;
    spec.instruction = std::string(kAnswerInstruction);
    spec.input_data = question;
    spec.context = text::join(texts, "\n---\n");

    auto completion = model::complete(model, model::build_prompt(spec), params);
    out.answer = std::move(completion.text);
    out.usage = completion.usage;
    return out;
}

}  // namespace agentlab::rag
