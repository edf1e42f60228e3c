#include "kern/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace kern {

using ojson = nlohmann::ordered_json;

namespace {

ojson action_json(const Action& a) {
    ojson j;
    j["kind"] = kind_name(a);
    if (auto s = std::get_if<act::Spawn>(&a)) {
        j["child"] = s->child.str();
    } else if (auto s = std::get_if<act::Send>(&a)) {
        j["tag"] = s->tag.str();
        j["to"] = s->to.str();
    } else if (auto d = std::get_if<act::Deliver>(&a)) {
        j["tag"] = d->tag.str();
    } else if (auto r = std::get_if<act::Rec>(&a)) {
        j["tag"] = r->tag.str();
    }
    return j;
}

ojson log_action_json(const LogAction& a) {
    ojson j;
    j["kind"] = kind_name(a);
    if (auto s = std::get_if<logact::Spawn>(&a)) {
        j["child"] = s->child.str();
    } else if (auto s = std::get_if<logact::Send>(&a)) {
        j["tag"] = s->tag.str();
    } else if (auto r = std::get_if<logact::Rec>(&a)) {
        j["tag"] = r->tag.str();
    }
    return j;
}

std::string field(const ojson& j, const char* name, const std::string& where) {
    if (!j.is_object() || !j.contains(name) || !j[name].is_string()) {
        throw FormatError(where + ": missing string field \"" + name + "\"");
    }
    return j[name].get<std::string>();
}

Pid pid_field(const ojson& j, const char* name, const std::string& where) {
    auto s = field(j, name, where);
    auto p = parse_pid(s);
    if (!p) throw FormatError(where + ": \"" + s + "\" is not a pid");
    return *p;
}

Tag tag_field(const ojson& j, const char* name, const std::string& where) {
    auto s = field(j, name, where);
    auto t = parse_tag(s);
    if (!t) throw FormatError(where + ": \"" + s + "\" is not a tag");
    return *t;
}

void check_version(const ojson& doc) {
    if (!doc.is_object() || !doc.contains("version") || doc["version"] != 1) {
        throw FormatError("unsupported or missing \"version\" (expected 1)");
    }
}

ojson parse(std::string_view text) {
    try {
        return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

std::string write_trace_json(const std::vector<Event>& events) {
    std::string out = "{\"version\":1,\"events\":[";
    for (std::size_t i = 0; i < events.size(); ++i) {
        ojson e;
        e["pid"] = events[i].pid.str();
        e["action"] = action_json(events[i].action);
        out += "\n";
        out += e.dump();
        if (i + 1 < events.size()) out += ",";
    }
    out += events.empty() ? "]}\n" : "\n]}\n";
    return out;
}

TraceFile read_trace_json(std::string_view text, bool lenient) {
    const ojson doc = parse(text);
    check_version(doc);
    if (!doc.contains("events") || !doc["events"].is_array()) {
        throw FormatError("missing \"events\" array");
    }
    TraceFile tf;
    std::size_t index = 0;
    for (const auto& e : doc["events"]) {
        const std::string where = "event " + std::to_string(index);
        const Pid pid = pid_field(e, "pid", where);
        if (!e.contains("action")) throw FormatError(where + ": missing \"action\"");
        const auto& a = e["action"];
        const std::string kind = field(a, "kind", where);
        Action action;
        if (kind == "spawn") {
            action = act::Spawn{pid_field(a, "child", where)};
        } else if (kind == "exit") {
            action = act::Exit{};
        } else if (kind == "send") {
            action = act::Send{tag_field(a, "tag", where), pid_field(a, "to", where)};
        } else if (kind == "deliver") {
            action = act::Deliver{tag_field(a, "tag", where)};
        } else if (kind == "rec") {
            action = act::Rec{tag_field(a, "tag", where)};
        } else {
            throw FormatError(where + ": unknown action kind \"" + kind + "\"");
        }
        tf.events.push_back({pid, action});
        ++index;
    }
    tf.trace = trace_from_events(tf.events);
    tf.violations = well_formed(tf.trace);
    if (!lenient && !tf.violations.empty()) {
        std::string msg = "trace is not well-formed:";
        for (const auto& v : tf.violations) msg += std::string(" (") + v.rule + ") " + v.message + ";";
        throw FormatError(msg);
    }
    return tf;
}

std::string write_log_json(const Log& log) {
    std::string out = "{\"version\":1,\"log\":{";
    bool first = true;
    for (const auto& [p, as] : log.seq) {
        ojson arr = ojson::array();
        for (const auto& a : as) arr.push_back(log_action_json(a));
        out += first ? "\n" : ",\n";
        out += ojson(p.str()).dump() + ":" + arr.dump();
        first = false;
    }
    out += first ? "}}\n" : "\n}}\n";
    return out;
}

Log read_log_json(std::string_view text) {
    const ojson doc = parse(text);
    check_version(doc);
    if (!doc.contains("log") || !doc["log"].is_object()) {
        throw FormatError("missing \"log\" object");
    }
    Log log;
    for (const auto& [key, arr] : doc["log"].items()) {
        auto pid = parse_pid(key);
        if (!pid) throw FormatError("log key \"" + key + "\" is not a pid");
        if (!arr.is_array()) throw FormatError("log entry for " + key + " is not an array");
        auto& seq = log.seq[*pid];
        std::size_t index = 0;
        for (const auto& a : arr) {
            const std::string where = key + "[" + std::to_string(index++) + "]";
            const std::string kind = field(a, "kind", where);
            if (kind == "spawn") {
                seq.push_back(logact::Spawn{pid_field(a, "child", where)});
            } else if (kind == "send") {
                seq.push_back(logact::Send{tag_field(a, "tag", where)});
            } else if (kind == "rec") {
                seq.push_back(logact::Rec{tag_field(a, "tag", where)});
            } else {
                throw FormatError(where + ": unknown log action kind \"" + kind + "\"");
            }
        }
    }
    return log;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

}  // namespace kern
