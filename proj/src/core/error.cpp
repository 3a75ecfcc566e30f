#include "lfr/core/error.hpp"

namespace lfr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParallelRay: return "ParallelRay";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::TangentRay: return "TangentRay";
    case ErrorCode::ZeroDirection: return "ZeroDirection";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllPointsMasked: return "AllPointsMasked";
    case ErrorCode::AllViewsMasked: return "AllViewsMasked";
    case ErrorCode::UnknownView: return "UnknownView";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
  }
  return "UnknownError";
}

}  // namespace lfr
