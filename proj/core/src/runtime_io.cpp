#include "kern/runtime.hpp"
#include "kern/trace_io.hpp"

#include <nlohmann/json.hpp>

namespace kern {

using ojson = nlohmann::ordered_json;

std::string write_schedule_json(const std::vector<TransitionChoice>& script) {
    std::string out = "[";
    for (std::size_t i = 0; i < script.size(); ++i) {
        ojson j;
        if (auto p = std::get_if<choice::Proc>(&script[i])) {
            j["kind"] = "proc";
            j["pid"] = p->pid.str();
        } else {
            const auto& d = std::get<choice::Deliver>(script[i]);
            j["kind"] = "deliver";
            j["from"] = d.from.str();
            j["to"] = d.to.str();
        }
        out += "\n" + j.dump();
        if (i + 1 < script.size()) out += ",";
    }
    out += script.empty() ? "]\n" : "\n]\n";
    return out;
}

std::vector<TransitionChoice> read_schedule_json(std::string_view text) {
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) throw FormatError("a schedule is a JSON array of choices");
    auto pid = [](const ojson& j, const char* name, const std::string& where) {
        if (!j.contains(name) || !j[name].is_string()) {
            throw FormatError(where + ": missing string field \"" + name + "\"");
        }
        auto p = parse_pid(j[name].get<std::string>());
        if (!p) throw FormatError(where + ": \"" + j[name].get<std::string>() + "\" is not a pid");
        return *p;
    };
    std::vector<TransitionChoice> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& j = doc[i];
        const std::string where = "entry " + std::to_string(i);
        if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
            throw FormatError(where + ": missing string field \"kind\"");
        }
        const auto kind = j["kind"].get<std::string>();
        if (kind == "proc") {
            out.push_back(choice::Proc{pid(j, "pid", where)});
        } else if (kind == "deliver") {
            out.push_back(choice::Deliver{pid(j, "from", where), pid(j, "to", where)});
        } else {
            throw FormatError(where + ": unknown choice kind \"" + kind + "\"");
        }
    }
    return out;
}

}  // namespace kern
