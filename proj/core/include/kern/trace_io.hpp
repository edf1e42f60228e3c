#pragma once

#include "kern/trace.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kern {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceFile {
    std::vector<Event> events;  // witnessed global order
    Trace trace;
    std::vector<Violation> violations;
};

/// {"version":1,"events":[{"pid":"p1","action":{"kind":"spawn","child":"p2"}},...]}
/// One event per line; re-writing a read file reproduces it byte for byte.
std::string write_trace_json(const std::vector<Event>& events);

/// Parses and validates a trace file. Malformed JSON, unknown kinds or bad
/// ids throw FormatError naming the event index. Well-formedness violations
/// throw too unless `lenient`, in which case they are returned.
TraceFile read_trace_json(std::string_view text, bool lenient = false);

/// {"version":1,"log":{"p1":[{"kind":"spawn","child":"p2"},{"kind":"send","tag":"l1"}],...}}
std::string write_log_json(const Log& log);
Log read_log_json(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace kern
