#pragma once

#include "kern/eval.hpp"
#include "kern/runtime.hpp"
#include "kern/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kern {

// History entries hold the local state before the step, plus what the undo
// needs. `fresh` marks ids allocated (or receives selected) in free mode,
// i.e. while the process had no log left.
namespace hist {
struct Exit {
    LocalState ls;
    Mailbox q;
};
struct Local {
    LocalState ls;
};
struct Self {
    LocalState ls;
};
struct Spawn {
    LocalState ls;
    Pid child;
    bool fresh = false;
};
struct Send {
    LocalState ls;
    Pid to;
    Message msg;
    bool fresh = false;
};
struct Rec {
    LocalState ls;
    Tag tag;
    Value value;
    std::size_t index = 0;
    bool fresh = false;
};
}  // namespace hist

using HistoryEntry = std::variant<hist::Exit, hist::Local, hist::Self, hist::Spawn, hist::Send, hist::Rec>;

/// Local/Self entries emit no event.
bool silent(const HistoryEntry& h);
/// "exit", "local", "self", "spawn(p3)", "send(l2)", "rec(l1)".
std::string describe(const HistoryEntry& h);

struct DeliveryRecord {
    Tag tag;
    Pid from;
};

struct RProcess {
    Pid pid;
    std::vector<HistoryEntry> history;  // back() is the most recent
    LocalState ls;
    bool exited = false;
    Mailbox mailbox;
    std::vector<DeliveryRecord> deliveries;  // delivered messages, oldest first
    std::vector<Action> events;        // this process's trace sequence
};

struct RSystem {
    Log omega;  // remaining log; a missing or empty entry means free mode
    Network network;
    std::map<Pid, RProcess> pool;
    std::uint64_t next_pid = 2;
    std::uint64_t next_tag = 1;
};

/// Root process running `entry`/0 with the whole `log` ahead of it. Fresh
/// counters start past every id the log mentions.
RSystem initial_rsystem(const Program& prog, const std::string& entry, const Log& log);

struct Divergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogKind { Spawn, Send, Rec };

/// Head of ω(p) when it has the requested kind: returns its id and drops it.
/// With ω(p) empty, returns a fresh id from the counter instead (rec has no
/// fresh form and returns nullopt). Throws Divergence on a kind mismatch.
std::optional<std::uint64_t> next_p(RSystem& s, Pid p, LogKind kind);

/// The message to deliver next to `p`, as (sender, tag). If the next logged
/// rec of p is queued somewhere, the head of that queue; otherwise the head
/// of the smallest-sender queue whose tag is not received later in ω(p).
std::optional<std::pair<Pid, Tag>> admissible(const RSystem& s, Pid p);

enum class ProcStatus { Ready, Blocked, Divergent, Exited };

const char* to_string(ProcStatus st);

/// What the process would do if stepped now.
struct ProcView {
    ProcStatus status = ProcStatus::Exited;
    bool visible = false;     // the step emits an event
    bool free_alloc = false;  // visible step taken with ω(p) empty
    std::string reason;       // why Blocked or Divergent
    std::optional<Tag> awaited;  // Blocked in replay mode: the logged tag
};

ProcView inspect(const Program& prog, const RSystem& s, Pid p);

/// Forward choices allowed by the replay semantics: Proc(p) for Ready
/// processes, Deliver of the admissible message for processes with log
/// left, any queue head for processes in free mode. No delivery reaches an
/// exited process.
std::vector<TransitionChoice> enabled_fwd(const Program& prog, const RSystem& s);

/// Applies one forward rule and pushes its history entry.
/// Throws InapplicableChoice if the choice is not enabled.
std::optional<Event> fwd_step(const Program& prog, RSystem& s, const TransitionChoice& c);

namespace bwd {
/// Undo the head of p's history.
struct UndoProc {
    Pid pid;
    bool operator==(const UndoProc&) const = default;
};
/// Undo p's most recent delivery.
struct UndoDeliver {
    Pid pid;
    bool operator==(const UndoDeliver&) const = default;
};
}  // namespace bwd

using BackwardChoice = std::variant<bwd::UndoProc, bwd::UndoDeliver>;

/// A backward step at the granularity a user sees: UndoProc undoes a visible
/// entry together with the silent entries beneath it (or a trailing run of
/// silent entries); UndoDeliver undoes one delivery.
struct UndoStep {
    BackwardChoice choice;
    std::string action;  // e.g. "send(l2)", "deliver(l1)", "local steps"

    std::string describe() const;  // "undo send(l2) on p3"
    bool operator==(const UndoStep&) const = default;
};

struct UndoCheck {
    bool ok = false;
    std::vector<UndoStep> prerequisites;  // when blocked, in execution order
    std::string reason;
};

/// Whether the backward rule for `c` applies now. When it does not, lists
/// the undo steps that make it applicable.
UndoCheck can_undo(const Program& prog, const RSystem& s, const BackwardChoice& c);

/// can_undo(...).ok without planning the prerequisites.
bool undoable(const RSystem& s, const BackwardChoice& c);

struct UndoBlocked : std::runtime_error {
    UndoBlocked(const std::string& msg, std::vector<UndoStep> prereqs)
        : std::runtime_error(msg), prerequisites(std::move(prereqs)) {}
    std::vector<UndoStep> prerequisites;
};

/// Inverse of one forward rule. Throws UndoBlocked, leaving `s` untouched,
/// when a causal-consistency condition fails.
std::optional<Event> bwd_step(const Program& prog, RSystem& s, const BackwardChoice& c);

/// Undoes one user-level step (see UndoStep). Throws UndoBlocked.
std::vector<Event> bwd_unit(const Program& prog, RSystem& s, const BackwardChoice& c);

/// The current trace: each process's recorded sequence.
Trace current_trace(const RSystem& s);

/// Deterministic textual form of the whole state, including ω and counters.
std::string serialize(const RSystem& s);

struct ReplayOptions {
    std::size_t budget = default_budget;
    /// After the log is consumed, keep running in free mode.
    bool continue_after_log = false;
    SchedulerConfig scheduler;  // used only after the log
};

struct StuckAtReceive {
    Pid pid;
    Tag tag;
    bool present = false;  // the message arrived but no clause accepts it
};

struct ReplayDivergence {
    Pid pid;
    std::string expected;
    std::string actual;
};

using ReplayProblem = std::variant<StuckAtReceive, ReplayDivergence>;

std::string to_string(const ReplayProblem& p);

struct ReplayResult {
    RSystem sys;
    std::vector<Event> events;  // witnessed order
    Trace trace;
    bool log_completed = false;
    std::optional<ReplayProblem> problem;
    StopReason stop_reason = StopReason::Completed;
};

/// Drives the forward semantics along `log`: round-robin over processes,
/// delivering only messages the log asks for, with processes whose log is
/// used up taking only silent and exit steps. Reports the first process
/// that cannot follow its log.
ReplayResult replay(const Program& prog, const std::string& entry, const Log& log, const ReplayOptions& opts = {});

// Controlled requests.

namespace target {
struct SendOf {
    Tag tag;
};
struct RecOf {
    Tag tag;
};
struct DeliverOf {
    Tag tag;
};
struct SpawnOf {
    Pid pid;
};
struct ExitOf {
    Pid pid;
};
struct Deadlock {};
struct OrphanFound {};
struct LostFound {};
}  // namespace target

using Target = std::variant<target::SendOf, target::RecOf, target::DeliverOf, target::SpawnOf, target::ExitOf,
                            target::Deadlock, target::OrphanFound, target::LostFound>;

std::string to_string(const Target& t);

namespace request {
struct StepFwd {
    Pid pid;
};
struct StepBwd {
    Pid pid;
};
struct FwdUntil {
    Target target;
};
struct BwdUntil {
    Target target;
};
struct RollbackSteps {
    Pid pid;
    std::size_t n = 1;
};
}  // namespace request

using Request =
    std::variant<request::StepFwd, request::StepBwd, request::FwdUntil, request::BwdUntil, request::RollbackSteps>;

struct RequestError : std::runtime_error {
    explicit RequestError(const std::string& msg, std::vector<UndoStep> prereqs = {})
        : std::runtime_error(msg), prerequisites(std::move(prereqs)) {}
    std::vector<UndoStep> prerequisites;
};

struct StepReport {
    std::vector<Event> forward;   // events performed, in order
    std::vector<Event> backward;  // events undone, in order
    std::size_t transitions = 0;
    bool reached = true;  // the target fired (until-requests)
    std::string note;     // e.g. why an until-request stopped early
};

/// Applies a request. On error the system is left unchanged.
StepReport perform(const Program& prog, RSystem& s, const Request& r, std::size_t budget = default_budget);

/// The undo steps, in order, that end with the target action undone.
/// Throws RequestError if the target is not in the current past.
std::vector<UndoStep> plan_rollback(const Program& prog, const RSystem& s, const Target& t);

}  // namespace kern
