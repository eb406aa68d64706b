// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace scriptgen {

// Base class for all library errors. Subclasses distinguish the broad
// failure categories the C API maps to status codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

class CharsetError : public Error {
public:
    explicit CharsetError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

} // namespace scriptgen
