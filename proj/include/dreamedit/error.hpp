// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dreamedit {

enum class ErrorKind {
    InvalidParameter,
    ShapeMismatch,
    TimestepOutOfRange,
    DepthOutOfRange,
    UnknownToken,
    EmptyDataset,
    Divergence,
    SubjectNotFound,
    EmptyMask,
    DegenerateRegion,
    InvalidStrategy,
    UnboundToken,
    ZeroVector,
    EmptyList,
    UnlabeledResult,
    ClassMismatch,
    SizeTooSmall,
    ArchitectureMismatch,
    Io,
    Format,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace dreamedit
