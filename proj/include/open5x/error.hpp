#pragma once

#include <stdexcept>
#include <string>

namespace open5x {

enum class ErrorCode {
    MalformedStl,
    EmptyMesh,
    InvalidParams,
    RegionOffSurface,
    NonUnitNormal,
    NonPositiveInput,
    ZeroLengthSegment,
    MalformedLine,
    ModeConflict,
    MalformedRecord,
    NonUnitNormalRecord,
    MalformedConfig,
    MalformedTrace,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedStl: return "MalformedStl";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::RegionOffSurface: return "RegionOffSurface";
    case ErrorCode::NonUnitNormal: return "NonUnitNormal";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::ZeroLengthSegment: return "ZeroLengthSegment";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::ModeConflict: return "ModeConflict";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::NonUnitNormalRecord: return "NonUnitNormalRecord";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    }
    return "Unknown";
}

/// Every failure raised by the library. The message is prefixed with the
/// module that raised it, e.g. "gcode: line 12: ...".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& module, const std::string& message)
        : std::runtime_error(module + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace open5x
