// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/error.hpp"

namespace dreamedit {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::TimestepOutOfRange: return "timestep out of range";
    case ErrorKind::DepthOutOfRange: return "depth out of range";
    case ErrorKind::UnknownToken: return "unknown token";
    case ErrorKind::EmptyDataset: return "empty dataset";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::SubjectNotFound: return "subject not found";
    case ErrorKind::EmptyMask: return "empty mask";
    case ErrorKind::DegenerateRegion: return "degenerate region";
    case ErrorKind::InvalidStrategy: return "invalid strategy";
    case ErrorKind::UnboundToken: return "unbound token";
    case ErrorKind::ZeroVector: return "zero vector";
    case ErrorKind::EmptyList: return "empty list";
    case ErrorKind::UnlabeledResult: return "unlabeled result";
    case ErrorKind::ClassMismatch: return "class mismatch";
    case ErrorKind::SizeTooSmall: return "size too small";
    case ErrorKind::ArchitectureMismatch: return "architecture mismatch";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Format: return "format error";
    }
    return "error";
}

} // namespace dreamedit
