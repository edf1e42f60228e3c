#include "kern/json.hpp"

namespace kern {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json tag_list(const std::set<Tag>& tags) {
    json out = json::array();
    for (Tag t : tags) out.push_back(t.str());
    return out;
}

std::string string_field(const json& j, const char* name) {
    if (!j.is_object() || !j.contains(name) || !j[name].is_string()) {
        throw std::invalid_argument(std::string("missing string field \"") + name + "\"");
    }
    return j[name].get<std::string>();
}

Tag tag_field(const json& j) {
    auto s = string_field(j, "tag");
    auto t = parse_tag(s);
    if (!t) throw std::invalid_argument("\"" + s + "\" is not a tag");
    return *t;
}

Pid pid_field(const json& j) {
    auto s = string_field(j, "pid");
    auto p = parse_pid(s);
    if (!p) throw std::invalid_argument("\"" + s + "\" is not a pid");
    return *p;
}

}  // namespace

json action_json(const Action& a) {
    json j;
    j["kind"] = kind_name(a);
    std::visit(overloaded{
                   [&](const act::Spawn& x) { j["child"] = x.child.str(); },
                   [&](const act::Exit&) {},
                   [&](const act::Send& x) {
                       j["tag"] = x.tag.str();
                       j["to"] = x.to.str();
                   },
                   [&](const act::Deliver& x) { j["tag"] = x.tag.str(); },
                   [&](const act::Rec& x) { j["tag"] = x.tag.str(); },
               },
               a);
    return j;
}

json log_action_json(const LogAction& a) {
    json j;
    j["kind"] = kind_name(a);
    std::visit(overloaded{
                   [&](const logact::Spawn& x) { j["child"] = x.child.str(); },
                   [&](const logact::Send& x) { j["tag"] = x.tag.str(); },
                   [&](const logact::Rec& x) { j["tag"] = x.tag.str(); },
               },
               a);
    return j;
}

json event_json(const Event& e) { return json{{"pid", e.pid.str()}, {"action", action_json(e.action)}}; }

json message_json(const Message& m) { return json{{"tag", m.tag.str()}, {"value", to_string(m.value)}}; }

json log_json(const Log& l) {
    json out = json::object();
    for (const auto& [p, as] : l.seq) {
        json arr = json::array();
        for (const auto& a : as) arr.push_back(log_action_json(a));
        out[p.str()] = std::move(arr);
    }
    return out;
}

json trace_json(const Trace& t) {
    json out = json::object();
    for (const auto& [p, as] : t.seq) {
        json arr = json::array();
        for (const auto& a : as) arr.push_back(action_json(a));
        out[p.str()] = std::move(arr);
    }
    return out;
}

json symptoms_json(const Symptoms& s) {
    json blocked = json::array();
    for (Pid p : s.blocked) blocked.push_back(p.str());
    return json{{"blocked", blocked}, {"lost", tag_list(s.lost)}, {"orphan", tag_list(s.orphan)}};
}

json race_set_json(const Trace&, const RaceSet& rs) {
    json races = json::object();
    for (const auto& [p, tags] : rs.races) {
        json arr = json::array();
        for (Tag t : tags) arr.push_back(t.str());
        races[p.str()] = std::move(arr);
    }
    return json{{"receive",
                 {{"pid", rs.receive.pid.str()}, {"index", rs.receive.index}, {"tag", rs.consumed.str()}}},
                {"races", races}};
}

json analysis_json(const Trace& t) {
    json sets = json::array();
    for (const auto& [ref, rs] : all_race_sets(t)) sets.push_back(race_set_json(t, rs));
    return json{{"symptoms", symptoms_json(symptoms(t))}, {"race_sets", sets}};
}

json exploration_json(const ExplorationReport& r) {
    json explored = json::array();
    for (const auto& run : r.explored) {
        json j{{"log", log_json(run.log)},
               {"symptoms", symptoms_json(run.symptoms)},
               {"stop_reason", to_string(run.stop_reason)},
               {"depth", run.depth}};
        if (run.parent) {
            j["parent"] = *run.parent;
            j["receive"] = json{{"pid", run.receive->pid.str()}, {"index", run.receive->index}};
            j["tag"] = run.tag->str();
        }
        explored.push_back(std::move(j));
    }
    json infeasible = json::array();
    for (const auto& v : r.infeasible) {
        infeasible.push_back(json{{"parent", v.parent},
                                  {"receive", {{"pid", v.receive.pid.str()}, {"index", v.receive.index}}},
                                  {"tag", v.tag.str()},
                                  {"problem", v.problem}});
    }
    json witnesses = json::object();
    for (const auto& [k, i] : r.witnesses) witnesses[to_string(k)] = i;
    return json{{"explored", explored},
                {"infeasible", infeasible},
                {"witnesses", witnesses},
                {"frontier_exhausted", r.frontier_exhausted}};
}

json undo_steps_json(const std::vector<UndoStep>& steps) {
    json out = json::array();
    for (const auto& st : steps) {
        const bool deliver = std::holds_alternative<bwd::UndoDeliver>(st.choice);
        const Pid pid = std::visit([](const auto& c) { return c.pid; }, st.choice);
        out.push_back(json{{"pid", pid.str()},
                           {"kind", deliver ? "deliver" : "proc"},
                           {"action", st.action},
                           {"description", st.describe()}});
    }
    return out;
}

json step_report_json(const StepReport& r) {
    json fwd = json::array();
    for (const auto& e : r.forward) fwd.push_back(event_json(e));
    json bwd = json::array();
    for (const auto& e : r.backward) bwd.push_back(event_json(e));
    json j{{"forward", fwd}, {"backward", bwd}, {"transitions", r.transitions}, {"reached", r.reached}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

json replay_problem_json(const ReplayProblem& p) {
    return std::visit(overloaded{
                          [&](const StuckAtReceive& s) {
                              return json{{"kind", "stuck_at_receive"},
                                          {"pid", s.pid.str()},
                                          {"tag", s.tag.str()},
                                          {"present", s.present},
                                          {"message", to_string(p)}};
                          },
                          [&](const ReplayDivergence& d) {
                              return json{{"kind", "divergence"},
                                          {"pid", d.pid.str()},
                                          {"expected", d.expected},
                                          {"actual", d.actual},
                                          {"message", to_string(p)}};
                          },
                      },
                      p);
}

json snapshot_json(const Program& prog, const RSystem& s) {
    json procs = json::array();
    for (const auto& [pid, proc] : s.pool) {
        const auto view = inspect(prog, s, pid);
        json mailbox = json::array();
        for (const auto& m : proc.mailbox) mailbox.push_back(message_json(m));
        json events = json::array();
        for (const auto& a : proc.events) events.push_back(action_json(a));
        json next_log = nullptr;
        if (auto it = s.omega.seq.find(pid); it != s.omega.seq.end() && !it->second.empty()) {
            next_log = log_action_json(it->second.front());
        }
        json p{{"pid", pid.str()},
               {"status", to_string(view.status)},
               {"mailbox", mailbox},
               {"history", proc.history.size()},
               {"next_log", next_log},
               {"events", events}};
        if (!view.reason.empty()) p["reason"] = view.reason;
        if (proc.exited || final(proc.ls)) {
            p["value"] = final(proc.ls) ? to_string(result(proc.ls)) : "";
            if (proc.ls.crash) p["crash"] = *proc.ls.crash;
        }
        procs.push_back(std::move(p));
    }
    json network = json::array();
    for (const auto& [key, q] : s.network) {
        json msgs = json::array();
        for (const auto& m : q) msgs.push_back(message_json(m));
        network.push_back(json{{"from", key.first.str()}, {"to", key.second.str()}, {"messages", msgs}});
    }
    json enabled = json::array();
    for (const auto& c : enabled_fwd(prog, s)) enabled.push_back(to_string(c));
    return json{{"processes", procs}, {"network", network}, {"log", log_json(s.omega)}, {"enabled", enabled}};
}

Target parse_target(const json& j) {
    const auto kind = string_field(j, "kind");
    if (kind == "send") return target::SendOf{tag_field(j)};
    if (kind == "rec") return target::RecOf{tag_field(j)};
    if (kind == "deliver") return target::DeliverOf{tag_field(j)};
    if (kind == "spawn") return target::SpawnOf{pid_field(j)};
    if (kind == "exit") return target::ExitOf{pid_field(j)};
    if (kind == "deadlock") return target::Deadlock{};
    if (kind == "orphan") return target::OrphanFound{};
    if (kind == "lost") return target::LostFound{};
    throw std::invalid_argument("unknown target kind \"" + kind + "\"");
}

json target_json(const Target& t) {
    return std::visit(overloaded{
                          [](const target::SendOf& x) { return json{{"kind", "send"}, {"tag", x.tag.str()}}; },
                          [](const target::RecOf& x) { return json{{"kind", "rec"}, {"tag", x.tag.str()}}; },
                          [](const target::DeliverOf& x) { return json{{"kind", "deliver"}, {"tag", x.tag.str()}}; },
                          [](const target::SpawnOf& x) { return json{{"kind", "spawn"}, {"pid", x.pid.str()}}; },
                          [](const target::ExitOf& x) { return json{{"kind", "exit"}, {"pid", x.pid.str()}}; },
                          [](const target::Deadlock&) { return json{{"kind", "deadlock"}}; },
                          [](const target::OrphanFound&) { return json{{"kind", "orphan"}}; },
                          [](const target::LostFound&) { return json{{"kind", "lost"}}; },
                      },
                      t);
}

}  // namespace kern
