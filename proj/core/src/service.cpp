#include "kern/service.hpp"

#include "kern/parser.hpp"
#include "kern/trace_io.hpp"

#include <utility>

namespace kern {

namespace {

ProtocolError invalid(const std::string& msg) { return ProtocolError(error_code::invalid_params, msg); }

const json& field(const json& params, const char* name) {
    if (!params.is_object() || !params.contains(name)) throw invalid(std::string("missing parameter \"") + name + "\"");
    return params.at(name);
}

std::string string_param(const json& params, const char* name) {
    const auto& v = field(params, name);
    if (!v.is_string()) throw invalid(std::string("parameter \"") + name + "\" must be a string");
    return v.get<std::string>();
}

std::string string_param(const json& params, const char* name, const std::string& fallback) {
    if (!params.is_object() || !params.contains(name)) return fallback;
    return string_param(params, name);
}

std::uint64_t uint_param(const json& params, const char* name, std::uint64_t fallback) {
    if (!params.is_object() || !params.contains(name)) return fallback;
    const auto& v = params.at(name);
    // Integers built in code are signed even when non-negative.
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw invalid(std::string("parameter \"") + name + "\" must be a non-negative integer");
    return v.get<std::uint64_t>();
}

Pid pid_param(const json& params, const char* name = "pid") {
    auto s = string_param(params, name);
    auto p = parse_pid(s);
    if (!p) throw invalid("\"" + s + "\" is not a pid");
    return *p;
}

Target target_param(const json& params) {
    try {
        return parse_target(field(params, "target"));
    } catch (const std::invalid_argument& e) {
        throw invalid(std::string("bad target: ") + e.what());
    }
}

SessionMode parse_mode(const std::string& s) {
    if (s == "record") return SessionMode::Record;
    if (s == "replay") return SessionMode::Replay;
    if (s == "free") return SessionMode::Free;
    throw invalid("unknown mode \"" + s + "\"");
}

SchedulerConfig scheduler_param(const json& params) {
    SchedulerConfig cfg;
    const auto delivery = string_param(params, "delivery", "lazy");
    if (delivery == "eager") {
        cfg.delivery = Delivery::Eager;
    } else if (delivery != "lazy") {
        throw invalid("unknown delivery \"" + delivery + "\"");
    }
    if (params.contains("schedule")) {
        try {
            cfg.policy = policy::Scripted{read_schedule_json(params.at("schedule").dump())};
        } catch (const FormatError& e) {
            throw invalid(std::string("bad schedule: ") + e.what());
        }
        return cfg;
    }
    const auto sched = string_param(params, "sched", "rr");
    if (sched == "random") {
        cfg.policy = policy::Random{uint_param(params, "seed", 0)};
    } else if (sched == "rr") {
        cfg.policy = policy::RoundRobin{static_cast<unsigned>(uint_param(params, "fuel", 1))};
    } else {
        throw invalid("unknown scheduler \"" + sched + "\"");
    }
    return cfg;
}

// Accepts either a log file document or its bare "log" object, or a trace file.
Log log_param(const json& params) {
    try {
        if (params.contains("log")) {
            const auto& l = params.at("log");
            json doc = l.contains("version") ? l : json{{"version", 1}, {"log", l}};
            return read_log_json(doc.dump());
        }
        if (params.contains("trace")) {
            const auto& t = params.at("trace");
            json doc = t.is_array() ? json{{"version", 1}, {"events", t}} : t;
            return log_of(read_trace_json(doc.dump()).trace);
        }
    } catch (const FormatError& e) {
        throw invalid(e.what());
    }
    throw invalid("replay mode needs a \"log\" or \"trace\" parameter");
}

json session_json(const Session& s) {
    json j{{"session", s.id}, {"mode", to_string(s.mode)}, {"seq", s.seq}};
    j["parent"] = s.parent ? json(*s.parent) : json(nullptr);
    j["problem"] = s.problem ? replay_problem_json(*s.problem) : json(nullptr);
    return j;
}

json full_snapshot(const Session& s) {
    json j = session_json(s);
    json snap = snapshot_json(*s.program, s.sys);
    for (auto& [k, v] : snap.items()) j[k] = std::move(v);
    return j;
}

ReplayOptions reference_options(const json& params) {
    ReplayOptions opts;
    opts.budget = uint_param(params, "budget", default_budget);
    opts.continue_after_log = true;
    opts.scheduler = scheduler_param(params);
    return opts;
}

}  // namespace

const char* to_string(SessionMode m) {
    switch (m) {
        case SessionMode::Record: return "record";
        case SessionMode::Replay: return "replay";
        case SessionMode::Free: return "free";
    }
    return "?";
}

Trace Session::race_trace() const { return reference ? *reference : current_trace(sys); }

std::size_t Service::session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::vector<std::string> Service::handle_line(std::string_view line) {
    json request;
    try {
        request = json::parse(line);
    } catch (const json::parse_error& e) {
        json err{{"id", nullptr}, {"error", {{"code", error_code::parse_error}, {"message", e.what()}}}};
        return {err.dump()};
    }
    auto reply = handle(request);
    std::vector<std::string> out{reply.response.dump()};
    for (const auto& n : reply.notifications) out.push_back(n.dump());
    return out;
}

Service::Reply Service::handle(const json& request) {
    Reply reply;
    json id = request.is_object() && request.contains("id") ? request.at("id") : json(nullptr);
    try {
        if (!request.is_object() || !request.contains("method") || !request.at("method").is_string()) {
            throw ProtocolError(error_code::invalid_request, "request needs a string \"method\"");
        }
        const json params = request.contains("params") ? request.at("params") : json::object();
        std::lock_guard lock(mu_);
        auto result = call(request.at("method").get<std::string>(), params, reply.notifications);
        reply.response = json{{"id", id}, {"result", std::move(result)}};
    } catch (const ProtocolError& e) {
        json err{{"code", e.code}, {"message", e.what()}};
        if (!e.data.is_null()) err["data"] = e.data;
        reply.response = json{{"id", id}, {"error", err}};
        reply.notifications.clear();
    } catch (const std::exception& e) {
        reply.response = json{{"id", id}, {"error", {{"code", error_code::internal_error}, {"message", e.what()}}}};
        reply.notifications.clear();
    }
    return reply;
}

Session& Service::session(const json& params) {
    auto id = string_param(params, "session");
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ProtocolError(error_code::unknown_session, "no session \"" + id + "\"");
    return it->second;
}

json Service::notify(Session& s) {
    ++s.seq;
    return json{{"method", "state_changed"}, {"params", {{"session", s.id}, {"seq", s.seq}, {"snapshot", full_snapshot(s)}}}};
}

json Service::call(const std::string& method, const json& params, std::vector<json>& out) {
    if (method == "load") return load(params, out);
    if (method == "fork_variant") return fork_variant(params, out);
    if (method == "race_sets") return race_sets(params);
    if (method == "snapshot") return full_snapshot(session(params));
    if (method == "list_sessions") {
        json list = json::array();
        for (const auto& [id, s] : sessions_) list.push_back(session_json(s));
        return json{{"sessions", list}};
    }
    if (method == "close") {
        auto& s = session(params);
        const auto id = s.id;
        sessions_.erase(id);
        return json{{"closed", id}};
    }
    if (method == "step_fwd") return apply_request(params, request::StepFwd{pid_param(params)}, out);
    if (method == "step_bwd") return apply_request(params, request::StepBwd{pid_param(params)}, out);
    if (method == "run_until") return apply_request(params, request::FwdUntil{target_param(params)}, out);
    if (method == "rollback_until") return apply_request(params, request::BwdUntil{target_param(params)}, out);
    if (method == "rollback") {
        return apply_request(params, request::RollbackSteps{pid_param(params), uint_param(params, "n", 1)}, out);
    }
    throw ProtocolError(error_code::method_not_found, "unknown method \"" + method + "\"");
}

json Service::load(const json& params, std::vector<json>& out) {
    std::string source;
    if (params.contains("source")) {
        source = string_param(params, "source");
    } else {
        const auto path = string_param(params, "path");
        try {
            source = read_text_file(path);
        } catch (const std::exception& e) {
            throw ProtocolError(error_code::program_error, e.what());
        }
    }
    Session s;
    try {
        s.program = std::make_shared<const Program>(parse_program(source));
    } catch (const ParseError& e) {
        throw ProtocolError(error_code::program_error, e.what());
    }
    s.entry = string_param(params, "entry", "main");
    if (!s.program->find(s.entry, 0)) throw ProtocolError(error_code::program_error, "no function " + s.entry + "/0");
    const bool has_log = params.contains("log") || params.contains("trace");
    s.mode = parse_mode(string_param(params, "mode", has_log ? "replay" : "record"));

    const auto budget = uint_param(params, "budget", default_budget);
    try {
        switch (s.mode) {
            case SessionMode::Record: {
                auto r = run(*s.program, s.entry, scheduler_param(params), budget);
                s.reference = r.trace;
                s.log = log_of(r.trace);
                break;
            }
            case SessionMode::Replay: {
                s.log = log_param(params);
                auto r = replay(*s.program, s.entry, s.log, reference_options(params));
                s.reference = r.trace;
                s.problem = r.problem;
                break;
            }
            case SessionMode::Free: break;
        }
        s.sys = initial_rsystem(*s.program, s.entry, s.log);
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(error_code::program_error, e.what());
    }
    s.id = "s" + std::to_string(next_id_++);
    auto& stored = sessions_.emplace(s.id, std::move(s)).first->second;
    out.push_back(notify(stored));
    return full_snapshot(stored);
}

json Service::fork_variant(const json& params, std::vector<json>& out) {
    const auto& parent = session(params);
    const auto& rj = field(params, "receive");
    const EventRef receive{pid_param(rj), uint_param(rj, "index", 0)};
    const auto tag_s = string_param(params, "tag");
    const auto tag = parse_tag(tag_s);
    if (!tag) throw invalid("\"" + tag_s + "\" is not a tag");

    Session child;
    child.program = parent.program;
    child.entry = parent.entry;
    child.mode = SessionMode::Replay;
    child.parent = parent.id;
    try {
        child.log = race_variant(parent.race_trace(), receive, *tag);
    } catch (const std::invalid_argument& e) {
        throw invalid(e.what());
    }
    auto r = replay(*child.program, child.entry, child.log, reference_options(params));
    child.reference = r.trace;
    child.problem = r.problem;
    child.sys = initial_rsystem(*child.program, child.entry, child.log);
    child.id = "s" + std::to_string(next_id_++);
    auto& stored = sessions_.emplace(child.id, std::move(child)).first->second;
    out.push_back(notify(stored));
    json result = full_snapshot(stored);
    result["feasible"] = r.log_completed;
    result["variant_log"] = log_json(stored.log);
    return result;
}

json Service::race_sets(const json& params) {
    const auto& s = session(params);
    const Trace t = s.race_trace();
    json j = analysis_json(t);
    j["session"] = s.id;
    j["source"] = s.reference ? "reference" : "current";
    return j;
}

json Service::apply_request(const json& params, const Request& r, std::vector<json>& out) {
    auto& s = session(params);
    const auto budget = uint_param(params, "budget", default_budget);
    StepReport report;
    try {
        report = perform(*s.program, s.sys, r, budget);
    } catch (const RequestError& e) {
        const int code = e.prerequisites.empty() ? error_code::request_failed : error_code::undo_blocked;
        throw ProtocolError(code, e.what(), json{{"prerequisites", undo_steps_json(e.prerequisites)}});
    } catch (const UndoBlocked& e) {
        throw ProtocolError(error_code::undo_blocked, e.what(),
                            json{{"prerequisites", undo_steps_json(e.prerequisites)}});
    } catch (const std::exception& e) {
        throw ProtocolError(error_code::request_failed, e.what());
    }
    out.push_back(notify(s));
    json j = step_report_json(report);
    j["seq"] = s.seq;
    return j;
}

}  // namespace kern
