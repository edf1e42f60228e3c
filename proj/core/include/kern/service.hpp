#pragma once

#include "kern/json.hpp"
#include "kern/rdebug.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kern {

enum class SessionMode { Record, Replay, Free };

const char* to_string(SessionMode m);

struct Session {
    std::string id;
    std::shared_ptr<const Program> program;
    std::string entry = "main";
    SessionMode mode = SessionMode::Free;
    RSystem sys;
    Log log;  // the full log the session started from
    /// The run race sets and variants refer to: the recorded run, or the
    /// log's replay. Free sessions use their current trace instead.
    std::optional<Trace> reference;
    std::optional<std::string> parent;
    std::optional<ReplayProblem> problem;  // a replay of the log gets stuck
    std::uint64_t seq = 0;                 // snapshot sequence number

    Trace race_trace() const;
};

/// Protocol errors carry a code and optional structured data.
struct ProtocolError : std::runtime_error {
    ProtocolError(int code, const std::string& msg, json data = nullptr)
        : std::runtime_error(msg), code(code), data(std::move(data)) {}
    int code;
    json data;
};

namespace error_code {
inline constexpr int parse_error = -32700;
inline constexpr int invalid_request = -32600;
inline constexpr int method_not_found = -32601;
inline constexpr int invalid_params = -32602;
inline constexpr int internal_error = -32603;
inline constexpr int unknown_session = 1;
inline constexpr int undo_blocked = 2;
inline constexpr int request_failed = 3;
inline constexpr int program_error = 4;
}  // namespace error_code

/// Debug sessions behind the JSON protocol.
///
/// Request:      {"id":1,"method":"step_fwd","params":{"session":"s1","pid":"p1"}}
/// Response:     {"id":1,"result":{...}} or {"id":1,"error":{"code":..,"message":..,"data":..}}
/// Notification: {"method":"state_changed","params":{"session":"s1","seq":3,"snapshot":{...}}}
///
/// Methods: load, snapshot, step_fwd, step_bwd, run_until, rollback_until,
/// rollback, race_sets, fork_variant, list_sessions, close. Every method that
/// changes a session is followed by a state_changed notification.
/// Requests are handled one at a time, in arrival order.
class Service {
public:
    struct Reply {
        json response;
        std::vector<json> notifications;
    };

    /// Handles one request line; returns the serialized response followed by
    /// any notifications, one JSON document per string.
    std::vector<std::string> handle_line(std::string_view line);

    /// Same, on parsed JSON.
    Reply handle(const json& request);

    /// Direct call, throwing ProtocolError.
    json call(const std::string& method, const json& params, std::vector<json>& notifications);

    std::size_t session_count() const;

private:
    Session& session(const json& params);
    json notify(Session& s);

    json load(const json& params, std::vector<json>& out);
    json fork_variant(const json& params, std::vector<json>& out);
    json race_sets(const json& params);
    json apply_request(const json& params, const Request& r, std::vector<json>& out);

    mutable std::mutex mu_;
    std::map<std::string, Session> sessions_;
    std::uint64_t next_id_ = 1;
};

}  // namespace kern
