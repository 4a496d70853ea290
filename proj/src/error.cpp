// SPDX-License-Identifier: Apache-2.0

#include "rankdist/error.hpp"

namespace rankdist {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::FactorOutOfRange: return "FactorOutOfRange";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::NoQualifyingRoi: return "NoQualifyingRoi";
    case ErrorCode::UnknownArch: return "UnknownArch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyRois: return "EmptyRois";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::InsufficientImages: return "InsufficientImages";
  }
  return "Unknown";
}

}  // namespace rankdist
