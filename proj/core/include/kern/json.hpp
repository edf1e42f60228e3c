#pragma once

#include "kern/analysis.hpp"
#include "kern/rdebug.hpp"
#include "kern/trace.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace kern {

using json = nlohmann::ordered_json;

json action_json(const Action& a);
json log_action_json(const LogAction& a);
json event_json(const Event& e);
json message_json(const Message& m);
json log_json(const Log& l);
json trace_json(const Trace& t);  // {"p1":[actions...],...}

json symptoms_json(const Symptoms& s);
json race_set_json(const Trace& t, const RaceSet& rs);
/// The `analyze` report: {"symptoms":{...},"race_sets":[...]}.
json analysis_json(const Trace& t);
json exploration_json(const ExplorationReport& r);

json undo_steps_json(const std::vector<UndoStep>& steps);
json step_report_json(const StepReport& r);
json replay_problem_json(const ReplayProblem& p);

/// Processes, network queues and the remaining log of a debugger state.
json snapshot_json(const Program& prog, const RSystem& s);

/// {"kind":"send"|"rec"|"deliver","tag":"l1"}, {"kind":"spawn"|"exit","pid":"p2"},
/// {"kind":"deadlock"|"orphan"|"lost"}. Throws std::invalid_argument.
Target parse_target(const json& j);
json target_json(const Target& t);

}  // namespace kern
