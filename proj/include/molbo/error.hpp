#ifndef MOLBO_ERROR_HPP
#define MOLBO_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace molbo {

enum class Errc {
    // chem-parse
    UnmatchedRingClosure,
    UnbalancedParenthesis,
    UnknownSymbol,
    InvalidCharge,
    // fingerprints
    WidthMismatch,
    TooFewItems,
    // library-store
    MissingColumn,
    EmptyLibrary,
    MalformedRow,
    IndexOutOfRange,
    DimensionMismatch,
    MissingEmbedding,
    KTooLarge,
    // surrogate
    TooFewSamples,
    NonFiniteTarget,
    Untrained,
    TooFewMembers,
    // acquisition / campaign
    PoolExhausted,
    DivisionByZero,
    ConfigInvalid,
    Io,
};

enum class ErrorCategory { Config, Data, Runtime };

inline std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::UnmatchedRingClosure: return "UnmatchedRingClosure";
    case Errc::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::InvalidCharge: return "InvalidCharge";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::TooFewItems: return "TooFewItems";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyLibrary: return "EmptyLibrary";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::NonFiniteTarget: return "NonFiniteTarget";
    case Errc::Untrained: return "Untrained";
    case Errc::TooFewMembers: return "TooFewMembers";
    case Errc::PoolExhausted: return "PoolExhausted";
    case Errc::DivisionByZero: return "DivisionByZero";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Maps an error code onto the CLI exit-code classes (2 config, 3 data, 4 runtime).
inline ErrorCategory errc_category(Errc code) noexcept {
    switch (code) {
    case Errc::ConfigInvalid:
    case Errc::KTooLarge:
        return ErrorCategory::Config;
    case Errc::UnmatchedRingClosure:
    case Errc::UnbalancedParenthesis:
    case Errc::UnknownSymbol:
    case Errc::InvalidCharge:
    case Errc::MissingColumn:
    case Errc::EmptyLibrary:
    case Errc::MalformedRow:
    case Errc::DimensionMismatch:
    case Errc::MissingEmbedding:
    case Errc::NonFiniteTarget:
    case Errc::Io:
        return ErrorCategory::Data;
    default:
        return ErrorCategory::Runtime;
    }
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }
    std::string_view name() const noexcept { return errc_name(code_); }
    ErrorCategory category() const noexcept { return errc_category(code_); }

private:
    Errc code_;
};

} // namespace molbo

#endif
