#ifndef MOLBO_LIBRARY_HPP
#define MOLBO_LIBRARY_HPP

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "molbo/error.hpp"
#include "molbo/fingerprint.hpp"
#include "molbo/hash.hpp"
#include "molbo/parallel.hpp"
#include "molbo/smiles.hpp"

namespace molbo {

enum class Direction : std::uint8_t { Minimize, Maximize };

inline double to_utility(double score, Direction direction) noexcept {
    return direction == Direction::Minimize ? -score : score;
}

struct IngestOptions {
    std::string smiles_column = "smiles";
    std::string score_column = "score";
    char delimiter = ',';
    Direction direction = Direction::Minimize;
    /// Fail on the first bad row instead of skipping it.
    bool strict = false;
};

/// What happened to the rows of the source file; written into run metadata.
struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t invalid_smiles = 0;
    std::size_t invalid_score = 0;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;

    std::size_t skipped() const noexcept { return invalid_smiles + invalid_score + malformed; }
};

struct CompoundRecord {
    std::uint32_t index;
    std::string_view smiles;
    double score;
    double utility;
};

namespace detail {

/// Splits one delimited line. Fields may be double-quoted with "" escapes.
inline std::vector<std::string> split_fields(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline bool parse_index(std::string_view text, std::uint64_t& out) {
    text = trim(text);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

struct FingerprintCache {
    FingerprintSpec spec;
    std::unique_ptr<std::once_flag[]> filled;
    std::vector<Fingerprint> values;
};

struct LibraryData {
    std::vector<std::string> smiles;
    std::vector<double> scores;
    std::vector<double> utilities;
    Direction direction = Direction::Minimize;
    IngestReport report;
    std::uint64_t checksum = 0;
};

struct EmbeddingData {
    std::uint32_t dim = 0;
    std::vector<float> values;  // row-major, library index order
    std::size_t filled_with_zero = 0;
};

struct FingerprintStore {
    std::mutex mutex;
    std::vector<std::unique_ptr<FingerprintCache>> caches;
};

} // namespace detail

/// Immutable scored compound pool. Copies share storage; fingerprints are
/// computed on first request and cached (thread-safe, fill-once per record).
class Library {
public:
    Library() = default;

    /// Builds a library from (smiles, score) rows with the same validation,
    /// skip and duplicate policies as `load_library`.
    static Library from_rows(std::span<const std::pair<std::string, double>> rows, Direction direction,
                             bool strict = false) {
        IngestReport report;
        Builder builder(direction, strict, report);
        for (const auto& [smiles, score] : rows) {
            ++report.rows_read;
            builder.add(smiles, score, report.rows_read);
        }
        return builder.finish();
    }

    std::size_t size() const noexcept { return data_ ? data_->smiles.size() : 0; }
    Direction direction() const noexcept { return data_->direction; }
    const IngestReport& report() const noexcept { return data_->report; }
    std::uint64_t checksum() const noexcept { return data_->checksum; }

    CompoundRecord record(std::size_t idx) const {
        check(idx);
        return {static_cast<std::uint32_t>(idx), data_->smiles[idx], data_->scores[idx], data_->utilities[idx]};
    }
    std::string_view smiles(std::size_t idx) const { check(idx); return data_->smiles[idx]; }
    double score(std::size_t idx) const { check(idx); return data_->scores[idx]; }

    /// Precomputed utility lookup; never triggers any computation.
    double oracle(std::size_t idx) const {
        check(idx);
        return data_->utilities[idx];
    }
    std::span<const double> utilities() const noexcept { return data_->utilities; }

    /// Indices of the k best utilities, best first; boundary ties go to the
    /// lower index.
    std::vector<std::uint32_t> topk_ranked(std::size_t k) const {
        if (k > size()) {
            throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds library size " + std::to_string(size()));
        }
        std::vector<std::uint32_t> idx(size());
        std::iota(idx.begin(), idx.end(), 0u);
        const auto& u = data_->utilities;
        auto better = [&u](std::uint32_t a, std::uint32_t b) { return u[a] > u[b] || (u[a] == u[b] && a < b); };
        if (k < idx.size()) {
            std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
            idx.resize(k);
        }
        std::sort(idx.begin(), idx.end(), better);
        return idx;
    }

    /// The ground-truth top-k set, ascending index order.
    std::vector<std::uint32_t> topk_truth(std::size_t k) const {
        auto idx = topk_ranked(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    const Fingerprint& fingerprint(std::size_t idx, const FingerprintSpec& spec) const {
        check(idx);
        auto& cache = cache_for(spec);
        std::call_once(cache.filled[idx], [&] {
            cache.values[idx] = compute_fingerprint(parse_smiles(data_->smiles[idx]), spec);
        });
        return cache.values[idx];
    }

    void precompute_fingerprints(const FingerprintSpec& spec, unsigned jobs = 1) const {
        parallel_for(size(), jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) fingerprint(i, spec);
        });
    }

    bool has_embeddings() const noexcept { return embeddings_ != nullptr; }
    std::uint32_t embedding_dim() const noexcept { return embeddings_ ? embeddings_->dim : 0; }
    std::size_t embeddings_zero_filled() const noexcept { return embeddings_ ? embeddings_->filled_with_zero : 0; }
    std::span<const float> embedding(std::size_t idx) const {
        check(idx);
        if (!embeddings_) throw Error(Errc::MissingEmbedding, "library has no embeddings attached");
        return {embeddings_->values.data() + idx * embeddings_->dim, embeddings_->dim};
    }

    /// Copy of this library carrying the given embedding matrix.
    Library with_embeddings(std::uint32_t dim, std::vector<float> values, std::size_t zero_filled = 0) const {
        if (values.size() != static_cast<std::size_t>(dim) * size()) {
            throw Error(Errc::DimensionMismatch, "embedding matrix does not match library size");
        }
        Library copy = *this;
        auto emb = std::make_shared<detail::EmbeddingData>();
        emb->dim = dim;
        emb->values = std::move(values);
        emb->filled_with_zero = zero_filled;
        copy.embeddings_ = std::move(emb);
        return copy;
    }

    /// Row index of an exact SMILES string, or -1.
    std::int64_t find(std::string_view smiles) const {
        const auto& lookup = index_lookup();
        auto it = lookup.find(std::string(smiles));
        return it == lookup.end() ? -1 : static_cast<std::int64_t>(it->second);
    }

    class Builder {
    public:
        Builder(Direction direction, bool strict, IngestReport& report)
            : strict_(strict), report_(report) {
            data_ = std::make_shared<detail::LibraryData>();
            data_->direction = direction;
        }

        void add(std::string_view smiles, double score, std::size_t line) {
            smiles = detail::trim(smiles);
            if (!std::isfinite(score)) {
                reject(report_.invalid_score, line, "non-finite score");
                return;
            }
            try {
                parse_smiles(smiles);
            } catch (const Error& e) {
                reject(report_.invalid_smiles, line, e.what());
                return;
            }
            const double utility = to_utility(score, data_->direction);
            auto [it, inserted] = seen_.try_emplace(std::string(smiles), data_->smiles.size());
            if (!inserted) {
                ++report_.duplicates;
                if (utility > data_->utilities[it->second]) {
                    data_->scores[it->second] = score;
                    data_->utilities[it->second] = utility;
                }
                return;
            }
            data_->smiles.emplace_back(smiles);
            data_->scores.push_back(score);
            data_->utilities.push_back(utility);
        }

        void malformed(std::size_t line, const std::string& why) { reject(report_.malformed, line, why); }

        Library finish() {
            if (data_->smiles.empty()) throw Error(Errc::EmptyLibrary, "no valid rows");
            data_->report = report_;
            Hasher h;
            h.u64(static_cast<std::uint64_t>(data_->direction));
            for (std::size_t i = 0; i < data_->smiles.size(); ++i) {
                h.bytes(data_->smiles[i]).u64(std::bit_cast<std::uint64_t>(data_->scores[i]));
            }
            data_->checksum = h.digest();
            Library lib;
            lib.data_ = std::move(data_);
            lib.fingerprints_ = std::make_shared<detail::FingerprintStore>();
            return lib;
        }

    private:
        void reject(std::size_t& counter, std::size_t line, const std::string& why) {
            if (strict_) throw Error(Errc::MalformedRow, "row " + std::to_string(line) + ": " + why);
            ++counter;
        }

        bool strict_;
        IngestReport& report_;
        std::shared_ptr<detail::LibraryData> data_;
        std::unordered_map<std::string, std::size_t> seen_;
    };

private:
    void check(std::size_t idx) const {
        if (idx >= size()) {
            throw Error(Errc::IndexOutOfRange, "index " + std::to_string(idx) + " outside library of size " +
                                                   std::to_string(size()));
        }
    }

    detail::FingerprintCache& cache_for(const FingerprintSpec& spec) const {
        std::lock_guard lock(fingerprints_->mutex);
        for (auto& c : fingerprints_->caches) {
            if (c->spec == spec) return *c;
        }
        auto cache = std::make_unique<detail::FingerprintCache>();
        cache->spec = spec;
        cache->filled = std::make_unique<std::once_flag[]>(size());
        cache->values.resize(size());
        fingerprints_->caches.push_back(std::move(cache));
        return *fingerprints_->caches.back();
    }

    const std::unordered_map<std::string, std::size_t>& index_lookup() const {
        std::lock_guard lock(fingerprints_->mutex);
        if (!lookup_) {
            auto map = std::make_shared<std::unordered_map<std::string, std::size_t>>();
            for (std::size_t i = 0; i < size(); ++i) map->emplace(data_->smiles[i], i);
            lookup_ = std::move(map);
        }
        return *lookup_;
    }

    std::shared_ptr<const detail::LibraryData> data_;
    std::shared_ptr<const detail::EmbeddingData> embeddings_;
    std::shared_ptr<detail::FingerprintStore> fingerprints_;
    mutable std::shared_ptr<const std::unordered_map<std::string, std::size_t>> lookup_;
};

inline Library load_library(std::istream& in, const IngestOptions& options) {
    std::string line;
    if (!detail::read_line(in, line)) throw Error(Errc::EmptyLibrary, "library file is empty");
    const auto header = detail::split_fields(line, options.delimiter);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (detail::trim(header[i]) == name) return i;
        }
        throw Error(Errc::MissingColumn, "column '" + name + "' not found in header");
    };
    const std::size_t smiles_col = column(options.smiles_column);
    const std::size_t score_col = column(options.score_column);
    const std::size_t needed = std::max(smiles_col, score_col) + 1;

    IngestReport report;
    Library::Builder builder(options.direction, options.strict, report);
    std::size_t line_no = 1;
    while (detail::read_line(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        ++report.rows_read;
        const auto fields = detail::split_fields(line, options.delimiter);
        if (fields.size() < needed) {
            builder.malformed(line_no, "expected at least " + std::to_string(needed) + " fields");
            continue;
        }
        double score = 0.0;
        if (!detail::parse_double(fields[score_col], score)) {
            score = std::numeric_limits<double>::quiet_NaN();
        }
        builder.add(fields[smiles_col], score, line_no);
    }
    return builder.finish();
}

inline Library load_library(const std::string& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open library file '" + path + "'");
    return load_library(in, options);
}

/// Attaches per-compound embedding vectors. Accepts either the binary "SFEM"
/// layout or delimited text keyed by SMILES or by library index.
/// In strict mode a missing row is an error; otherwise it is zero-filled and counted.
inline Library load_embeddings(const Library& lib, std::istream& in, bool strict, char delimiter = ',') {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, "SFEM", 4) == 0) {
        auto read_le = [&](int bytes) {
            unsigned char buf[8] = {};
            in.read(reinterpret_cast<char*>(buf), bytes);
            if (in.gcount() != bytes) throw Error(Errc::DimensionMismatch, "truncated embedding header");
            std::uint64_t v = 0;
            for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[i];
            return v;
        };
        const auto version = read_le(4);
        if (version != 1) throw Error(Errc::DimensionMismatch, "unsupported embedding version " + std::to_string(version));
        const auto n = read_le(8);
        const auto dim = read_le(4);
        if (n != lib.size()) {
            if (strict || n > lib.size()) {
                throw Error(n < lib.size() ? Errc::MissingEmbedding : Errc::DimensionMismatch,
                            "embedding file has " + std::to_string(n) + " rows, library has " + std::to_string(lib.size()));
            }
        }
        std::vector<float> values(lib.size() * dim, 0.0f);
        std::vector<unsigned char> buf(4);
        for (std::size_t i = 0; i < n * dim; ++i) {
            in.read(reinterpret_cast<char*>(buf.data()), 4);
            if (in.gcount() != 4) throw Error(Errc::DimensionMismatch, "truncated embedding payload");
            const std::uint32_t bits = std::uint32_t{buf[0]} | (std::uint32_t{buf[1]} << 8) |
                                       (std::uint32_t{buf[2]} << 16) | (std::uint32_t{buf[3]} << 24);
            values[i] = std::bit_cast<float>(bits);
        }
        return lib.with_embeddings(static_cast<std::uint32_t>(dim), std::move(values), lib.size() - n);
    }

    in.clear();
    in.seekg(0);
    std::string line;
    std::vector<std::vector<float>> rows(lib.size());
    std::int64_t dim = -1;
    std::size_t line_no = 0;
    while (detail::read_line(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const char delim = line.find('\t') != std::string::npos ? '\t' : delimiter;
        const auto fields = detail::split_fields(line, delim);
        if (fields.size() < 2) throw Error(Errc::DimensionMismatch, "embedding row " + std::to_string(line_no) + " has no values");
        std::vector<float> vec;
        bool numeric = true;
        for (std::size_t c = 1; c < fields.size() && numeric; ++c) {
            double v = 0.0;
            numeric = detail::parse_double(fields[c], v);
            vec.push_back(static_cast<float>(v));
        }
        if (!numeric) {
            if (line_no == 1) continue;  // header
            throw Error(Errc::DimensionMismatch, "non-numeric embedding value on row " + std::to_string(line_no));
        }
        if (dim < 0) dim = static_cast<std::int64_t>(vec.size());
        if (static_cast<std::int64_t>(vec.size()) != dim) {
            throw Error(Errc::DimensionMismatch, "embedding row " + std::to_string(line_no) + " has " +
                                                     std::to_string(vec.size()) + " values, expected " + std::to_string(dim));
        }
        std::int64_t target = -1;
        std::uint64_t as_index = 0;
        if (detail::parse_index(fields[0], as_index)) {
            if (as_index < lib.size()) target = static_cast<std::int64_t>(as_index);
        } else {
            target = lib.find(detail::trim(fields[0]));
        }
        if (target >= 0) rows[static_cast<std::size_t>(target)] = std::move(vec);
    }
    if (dim <= 0) throw Error(Errc::MissingEmbedding, "embedding file has no rows");
    std::vector<float> values(lib.size() * static_cast<std::size_t>(dim), 0.0f);
    std::size_t zero_filled = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].empty()) {
            if (strict) throw Error(Errc::MissingEmbedding, "no embedding for library row " + std::to_string(i));
            ++zero_filled;
            continue;
        }
        std::copy(rows[i].begin(), rows[i].end(), values.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return lib.with_embeddings(static_cast<std::uint32_t>(dim), std::move(values), zero_filled);
}

inline Library load_embeddings(const Library& lib, const std::string& path, bool strict, char delimiter = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open embedding file '" + path + "'");
    return load_embeddings(lib, in, strict, delimiter);
}

/// Writes embeddings in the binary SFEM layout (little-endian).
inline void write_embeddings_binary(std::ostream& out, std::uint32_t dim, std::span<const float> values) {
    auto put = [&](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    const std::uint64_t n = dim ? values.size() / dim : 0;
    out.write("SFEM", 4);
    put(1, 4);
    put(n, 8);
    put(dim, 4);
    for (float f : values) put(std::bit_cast<std::uint32_t>(f), 4);
}

/// Content hash of a file, for run manifests.
inline std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
    Hasher h;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) h.byte(static_cast<std::uint8_t>(buf[i]));
    }
    return h.digest();
}

} // namespace molbo

#endif
