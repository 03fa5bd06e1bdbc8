#ifndef MOLBO_FEATURES_HPP
#define MOLBO_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "molbo/error.hpp"
#include "molbo/library.hpp"
#include "molbo/parallel.hpp"

namespace molbo {

enum class FeatureSource : std::uint8_t {
    AtomPairBits,
    MorganBits,
    ExternalEmbedding,
    /// One column holding the oracle utility itself. Diagnostic only: pairs
    /// with the oracle surrogate to simulate a perfect model.
    OracleUtility,
};

inline std::string_view feature_source_name(FeatureSource s) {
    switch (s) {
    case FeatureSource::AtomPairBits: return "atom-pair";
    case FeatureSource::MorganBits: return "morgan";
    case FeatureSource::ExternalEmbedding: return "embedding";
    case FeatureSource::OracleUtility: return "oracle";
    }
    return "unknown";
}

/// Row-major feature matrix. Bit-sourced matrices are stored sparsely (CSR of
/// set-bit indices); embedding matrices are dense.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    static FeatureMatrix from_bits(std::vector<std::vector<std::uint32_t>> rows, std::uint32_t cols,
                                   FeatureSource source) {
        FeatureMatrix m;
        m.rows_ = rows.size();
        m.cols_ = cols;
        m.source_ = source;
        m.binary_ = true;
        m.offsets_.reserve(rows.size() + 1);
        m.offsets_.push_back(0);
        for (auto& r : rows) {
            std::sort(r.begin(), r.end());
            r.erase(std::unique(r.begin(), r.end()), r.end());
            for (auto bit : r) {
                if (bit >= cols) throw Error(Errc::DimensionMismatch, "bit index outside feature width");
                m.bits_.push_back(bit);
            }
            m.offsets_.push_back(m.bits_.size());
        }
        return m;
    }

    static FeatureMatrix from_dense(std::size_t rows, std::uint32_t cols, std::vector<double> values,
                                    FeatureSource source) {
        if (values.size() != rows * cols) throw Error(Errc::DimensionMismatch, "dense feature buffer size");
        for (double v : values) {
            if (!std::isfinite(v)) throw Error(Errc::NonFiniteTarget, "non-finite feature value");
        }
        FeatureMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.source_ = source;
        m.binary_ = false;
        m.dense_ = std::move(values);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::uint32_t cols() const noexcept { return cols_; }
    FeatureSource source() const noexcept { return source_; }
    bool is_binary() const noexcept { return binary_; }

    std::span<const std::uint32_t> active(std::size_t row) const {
        return {bits_.data() + offsets_[row], bits_.data() + offsets_[row + 1]};
    }
    std::span<const double> dense_row(std::size_t row) const {
        return {dense_.data() + row * cols_, cols_};
    }

    double value(std::size_t row, std::uint32_t col) const {
        if (binary_) {
            const auto a = active(row);
            return std::binary_search(a.begin(), a.end(), col) ? 1.0 : 0.0;
        }
        return dense_[row * cols_ + col];
    }

    FeatureMatrix subset(std::span<const std::uint32_t> row_ids) const {
        FeatureMatrix m;
        m.rows_ = row_ids.size();
        m.cols_ = cols_;
        m.source_ = source_;
        m.binary_ = binary_;
        if (binary_) {
            m.offsets_.reserve(row_ids.size() + 1);
            m.offsets_.push_back(0);
            for (auto r : row_ids) {
                const auto a = active(r);
                m.bits_.insert(m.bits_.end(), a.begin(), a.end());
                m.offsets_.push_back(m.bits_.size());
            }
        } else {
            m.dense_.reserve(row_ids.size() * cols_);
            for (auto r : row_ids) {
                const auto d = dense_row(r);
                m.dense_.insert(m.dense_.end(), d.begin(), d.end());
            }
        }
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::uint32_t cols_ = 0;
    FeatureSource source_ = FeatureSource::AtomPairBits;
    bool binary_ = true;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> bits_;
    std::vector<double> dense_;
};

/// Feature matrix for every library row, in library index order.
inline FeatureMatrix build_features(const Library& lib, FeatureSource source, const FingerprintSpec& spec,
                                    unsigned jobs = 1) {
    switch (source) {
    case FeatureSource::AtomPairBits:
    case FeatureSource::MorganBits: {
        FingerprintSpec fs = spec;
        fs.kind = source == FeatureSource::MorganBits ? FingerprintKind::Morgan : FingerprintKind::AtomPair;
        if (fs.kind == FingerprintKind::Morgan) fs.min_radius = 0;
        std::vector<std::vector<std::uint32_t>> rows(lib.size());
        parallel_for(lib.size(), jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) rows[i] = lib.fingerprint(i, fs).on_bits();
        });
        return FeatureMatrix::from_bits(std::move(rows), fs.width, source);
    }
    case FeatureSource::ExternalEmbedding: {
        if (!lib.has_embeddings()) throw Error(Errc::MissingEmbedding, "embedding features requested but none loaded");
        const auto d = lib.embedding_dim();
        std::vector<double> values(lib.size() * d);
        for (std::size_t i = 0; i < lib.size(); ++i) {
            const auto e = lib.embedding(i);
            std::copy(e.begin(), e.end(), values.begin() + static_cast<std::ptrdiff_t>(i * d));
        }
        return FeatureMatrix::from_dense(lib.size(), d, std::move(values), source);
    }
    case FeatureSource::OracleUtility: {
        const auto u = lib.utilities();
        return FeatureMatrix::from_dense(lib.size(), 1, std::vector<double>(u.begin(), u.end()), source);
    }
    }
    throw Error(Errc::ConfigInvalid, "unknown feature source");
}

} // namespace molbo

#endif
