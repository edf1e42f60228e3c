#pragma once

#include "kern/ast.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace kern {

/// Syntax, scoping or link error, positioned at the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(SourcePos pos, const std::string& msg)
        : std::runtime_error("line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) +
                             ": " + msg),
          pos_(pos) {}

    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

/// Parses a .kern source. Every variable use must be bound, patterns must
/// be linear, guards must be side-effect free, and every call or spawn must
/// name a defined function with the right arity.
Program parse_program(std::string_view source);

}  // namespace kern
