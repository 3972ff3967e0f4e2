#pragma once

// Knowledge base: chunking, embedding, an exact cosine index and its file format.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radmat/binio.hpp"
#include "radmat/error.hpp"
#include "radmat/kv.hpp"

namespace radmat {

struct Chunk {
    std::string doc_id;
    std::uint32_t seq = 0;
    std::string text;
    std::size_t begin = 0; // byte span in the source document
    std::size_t end = 0;

    bool operator==(const Chunk&) const = default;
};

struct ChunkOptions {
    std::size_t chunk_size = 512; // bytes
    std::size_t overlap = 64;
};

/// Greedy fixed-size chunks; consecutive chunks share exactly `overlap`
/// bytes. A boundary moves back to just after the nearest whitespace when one
/// lies within the last 10% of the chunk, and never splits a UTF-8 sequence.
inline std::vector<Chunk> chunk_document(const std::string& doc_id, std::string_view text, const ChunkOptions& opt = {}) {
    if (opt.chunk_size == 0 || opt.overlap >= opt.chunk_size)
        throw Error(ErrorKind::InvalidConfig, "chunk overlap must be smaller than chunk size");
    if (text.empty()) throw Error(ErrorKind::InvalidInput, "cannot chunk an empty document");

    std::vector<Chunk> chunks;
    const std::size_t n = text.size();
    const std::size_t snap_window = opt.chunk_size / 10;
    std::size_t start = 0;
    for (;;) {
        std::size_t end = std::min(start + opt.chunk_size, n);
        if (end < n) {
            // Boundaries must leave the next chunk starting after this one.
            const std::size_t floor = start + opt.overlap + 1;
            const std::size_t lo = std::max(end > snap_window ? end - snap_window : 0, floor);
            for (std::size_t i = end; i > lo; --i) {
                if (std::isspace(static_cast<unsigned char>(text[i - 1]))) {
                    end = i;
                    break;
                }
            }
            while (end > floor && (static_cast<unsigned char>(text[end]) & 0xC0u) == 0x80u) --end;
        }
        chunks.push_back({doc_id, static_cast<std::uint32_t>(chunks.size()), std::string(text.substr(start, end - start)),
                          start, end});
        if (end == n) break;
        start = end - opt.overlap;
    }
    return chunks;
}

using EmbeddingVector = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    /// Unit-norm embedding; throws Unembeddable when there is nothing to embed.
    virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Feature-hashed bag of words: lower-cased alphanumeric tokens, FNV-1a 64
/// hash picks the bucket (mod dim) and the sign (top bit).
class HashedBowEmbedder final : public Embedder {
public:
    explicit HashedBowEmbedder(std::size_t dim = 256) : dim_(dim) {
        if (dim == 0) throw Error(ErrorKind::InvalidConfig, "embedding dimension must be positive");
    }

    std::string id() const override { return "hashed-bow-fnv1a-" + std::to_string(dim_); }
    std::size_t dim() const override { return dim_; }

    static std::vector<std::string> tokenize(std::string_view text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (unsigned char c : text) {
            if (std::isalnum(c) || c >= 0x80) {
                cur.push_back(static_cast<char>(std::tolower(c)));
            } else if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
        return tokens;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    EmbeddingVector embed(std::string_view text) const override {
        EmbeddingVector v(dim_, 0.0);
        for (const auto& tok : tokenize(text)) {
            const auto h = fnv1a(tok);
            v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        }
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        if (!(norm2 > 0.0)) throw Error(ErrorKind::Unembeddable, "text has no embeddable tokens");
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
        return v;
    }

private:
    std::size_t dim_;
};

struct IndexEntry {
    Chunk chunk;
    EmbeddingVector vector;
};

struct SearchHit {
    const Chunk* chunk = nullptr;
    double score = 0.0;
};

/// Exact linear-scan cosine index. Const member functions may be called
/// concurrently; mutation needs exclusive access.
class KnowledgeIndex {
public:
    KnowledgeIndex(std::string embedder_id, std::size_t dim) : embedder_id_(std::move(embedder_id)), dim_(dim) {}
    explicit KnowledgeIndex(const Embedder& e) : KnowledgeIndex(e.id(), e.dim()) {}

    const std::string& embedder_id() const { return embedder_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }

    void add(Chunk chunk, EmbeddingVector vec) {
        if (vec.size() != dim_) throw Error(ErrorKind::InvalidInput, "embedding dimension mismatch");
        double norm2 = 0.0;
        for (double x : vec) norm2 += x * x;
        if (!(norm2 > 0.0)) throw Error(ErrorKind::InvalidInput, "zero vectors cannot be indexed");
        if (std::abs(norm2 - 1.0) > 1e-9) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (double& x : vec) x *= inv;
        }
        if (!keys_.emplace(chunk.doc_id, chunk.seq).second)
            throw Error(ErrorKind::InvalidInput, "duplicate chunk " + chunk.doc_id + "#" + std::to_string(chunk.seq));
        entries_.push_back({std::move(chunk), std::move(vec)});
    }

    /// Chunks and embeds one document; returns the number of chunks added.
    std::size_t add_document(const std::string& doc_id, std::string_view text, const Embedder& e,
                             const ChunkOptions& opt = {}) {
        check_embedder(e);
        std::size_t added = 0;
        for (auto& c : chunk_document(doc_id, text, opt)) {
            EmbeddingVector v;
            try {
                v = e.embed(c.text);
            } catch (const Error& err) {
                if (err.kind() == ErrorKind::Unembeddable) continue; // e.g. a chunk of pure punctuation
                throw;
            }
            add(std::move(c), std::move(v));
            ++added;
        }
        return added;
    }

    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const {
        if (entries_.empty()) throw Error(ErrorKind::EmptyIndex, "knowledge index is empty");
        if (k == 0) throw Error(ErrorKind::InvalidInput, "k must be at least 1");
        if (query.size() != dim_) throw Error(ErrorKind::InvalidInput, "query dimension mismatch");
        std::vector<SearchHit> hits;
        hits.reserve(entries_.size());
        for (const auto& e : entries_) {
            double dot = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) dot += e.vector[i] * query[i];
            // rounded to 1e-12 so scores equal up to summation order tie exactly
            hits.push_back({&e.chunk, std::round(dot * 1e12) * 1e-12});
        }
        k = std::min(k, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                          [](const SearchHit& a, const SearchHit& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.chunk->doc_id != b.chunk->doc_id) return a.chunk->doc_id < b.chunk->doc_id;
                              return a.chunk->seq < b.chunk->seq;
                          });
        hits.resize(k);
        return hits;
    }

    std::vector<SearchHit> search_topk(std::string_view query, std::size_t k, const Embedder& e) const {
        check_embedder(e);
        if (entries_.empty()) throw Error(ErrorKind::EmptyIndex, "knowledge index is empty");
        return search(e.embed(query), k);
    }

    void save(std::ostream& out) const {
        out << "RMKIDX\nversion = 1\nembedder_id = " << embedder_id_ << "\ndim = " << dim_
            << "\ncount = " << entries_.size() << "\n\n";
        for (const auto& e : entries_) {
            binio::write_bytes(out, e.chunk.doc_id);
            binio::write_le<std::uint32_t>(out, e.chunk.seq);
            binio::write_le<std::uint64_t>(out, e.chunk.begin);
            binio::write_le<std::uint64_t>(out, e.chunk.end);
            binio::write_bytes(out, e.chunk.text);
            for (double x : e.vector) binio::write_le<double>(out, x);
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
        save(out);
        if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
    }

    static KnowledgeIndex load(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line != "RMKIDX") throw Error(ErrorKind::Format, "not a knowledge index file");
        std::string header;
        while (std::getline(in, line) && !line.empty()) header += line + "\n";
        const auto blocks = parse_kv_blocks(header);
        if (blocks.size() != 1) throw Error(ErrorKind::Format, "malformed index header");
        const auto& h = blocks.front();
        if (h.get_int("version") != 1) throw Error(ErrorKind::Format, "unsupported index version");
        const auto dim = h.get_int("dim");
        const auto count = h.get_int("count");
        if (dim <= 0 || count < 0) throw Error(ErrorKind::Format, "malformed index header");
        KnowledgeIndex idx(h.get("embedder_id"), static_cast<std::size_t>(dim));
        for (long long i = 0; i < count; ++i) {
            Chunk c;
            c.doc_id = binio::read_bytes(in);
            c.seq = binio::read_le<std::uint32_t>(in);
            c.begin = binio::read_le<std::uint64_t>(in);
            c.end = binio::read_le<std::uint64_t>(in);
            c.text = binio::read_bytes(in);
            EmbeddingVector v(idx.dim_);
            for (double& x : v) x = binio::read_le<double>(in);
            idx.add(std::move(c), std::move(v));
        }
        return idx;
    }

    static KnowledgeIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::Io, "cannot open knowledge index '" + path + "'");
        return load(in);
    }

private:
    void check_embedder(const Embedder& e) const {
        if (e.id() != embedder_id_ || e.dim() != dim_)
            throw Error(ErrorKind::EmbedderMismatch,
                        "index built with '" + embedder_id_ + "', query embedder is '" + e.id() + "'");
    }

    std::string embedder_id_;
    std::size_t dim_;
    std::vector<IndexEntry> entries_;
    std::set<std::pair<std::string, std::uint32_t>> keys_;
};

struct IngestReport {
    std::vector<std::pair<std::string, std::size_t>> chunks_per_document;
};

/// Adds every .txt / .md / .markdown file of `dir` (sorted by name); doc_id is the file name.
inline IngestReport ingest_directory(KnowledgeIndex& index, const std::filesystem::path& dir, const Embedder& e,
                                     const ChunkOptions& opt = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& ent : fs::directory_iterator(dir)) {
        if (!ent.is_regular_file()) continue;
        auto ext = ent.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".txt" || ext == ".md" || ext == ".markdown") files.push_back(ent.path());
    }
    std::sort(files.begin(), files.end());
    IngestReport rep;
    for (const auto& f : files) {
        const auto text = read_text_file(f.string());
        if (text.empty()) continue;
        const auto name = f.filename().string();
        rep.chunks_per_document.emplace_back(name, index.add_document(name, text, e, opt));
    }
    return rep;
}

} // namespace radmat
