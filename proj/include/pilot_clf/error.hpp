#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pilot_clf {

enum class ErrorKind {
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficient,
    OutOfRange,
    UnsupportedOrder,
    TooManyAntennas,
    EnumerationTooLarge,
    DelayOutOfRange,
    DelayOffGrid,
    EmptyGrid,
    ZeroSignal,
    NegativeVariance,
    SingularWeightedGram,
    InsufficientTrials,
    ConstellationTooLarge,
    InvalidArgument,
    ParseError,
    ValidationError,
    IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::UnsupportedOrder: return "UnsupportedOrder";
        case ErrorKind::TooManyAntennas: return "TooManyAntennas";
        case ErrorKind::EnumerationTooLarge: return "EnumerationTooLarge";
        case ErrorKind::DelayOutOfRange: return "DelayOutOfRange";
        case ErrorKind::DelayOffGrid: return "DelayOffGrid";
        case ErrorKind::EmptyGrid: return "EmptyGrid";
        case ErrorKind::ZeroSignal: return "ZeroSignal";
        case ErrorKind::NegativeVariance: return "NegativeVariance";
        case ErrorKind::SingularWeightedGram: return "SingularWeightedGram";
        case ErrorKind::InsufficientTrials: return "InsufficientTrials";
        case ErrorKind::ConstellationTooLarge: return "ConstellationTooLarge";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace pilot_clf
