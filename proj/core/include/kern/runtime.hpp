#pragma once

#include "kern/eval.hpp"
#include "kern/trace.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kern {

using QueueKey = std::pair<Pid, Pid>;  // (sender, target)

/// Per ordered pair FIFO queues of sent but undelivered messages. Empty
/// queues are not stored.
using Network = std::map<QueueKey, std::deque<Message>>;

struct Process {
    Pid pid;
    LocalState ls;
    Mailbox mailbox;
};

struct System {
    Network network;
    std::map<Pid, Process> pool;
    std::uint64_t next_pid = 2;
    std::uint64_t next_tag = 1;
};

/// Root process p1 running `entry`/0 with an empty network.
System initial_system(const Program& prog, const std::string& entry);

namespace choice {
/// Apply the one non-deliver rule applicable to the process.
struct Proc {
    Pid pid;
    bool operator==(const Proc&) const = default;
};
/// Move the head of queue (from, to) to the tail of to's mailbox.
struct Deliver {
    Pid from;
    Pid to;
    bool operator==(const Deliver&) const = default;
};
}  // namespace choice

using TransitionChoice = std::variant<choice::Proc, choice::Deliver>;

std::string to_string(const TransitionChoice& c);

struct InapplicableChoice : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// True if a receive in focus has no matching message (rule Receive cannot fire).
bool blocked_at_receive(const Process& p);

bool proc_enabled(const System& sys, Pid p);

/// Procs in pid order, then delivers in queue order.
std::vector<TransitionChoice> enabled(const System& sys);

/// Applies one rule in place and returns its event (none for Local/Self).
/// Throws InapplicableChoice if the choice is not enabled.
std::optional<Event> apply(const Program& prog, System& sys, const TransitionChoice& c);

struct StepOutcome {
    std::optional<Event> event;
    System sys;
};

StepOutcome step(const Program& prog, System sys, const TransitionChoice& c);

/// Deterministic textual form of the whole system.
std::string serialize(const System& sys);

namespace policy {
struct RoundRobin {
    unsigned fuel = 1;  // process steps per turn
};
struct Random {
    std::uint64_t seed = 0;
};
/// Proc(p) runs p's silent steps up to and including its next event, so
/// scripts list only visible transitions. Once exhausted, round-robin.
struct Scripted {
    std::vector<TransitionChoice> script;
};
}  // namespace policy

enum class Delivery { Eager, Lazy };

struct SchedulerConfig {
    std::variant<policy::RoundRobin, policy::Random, policy::Scripted> policy = policy::RoundRobin{};
    Delivery delivery = Delivery::Lazy;
};

enum class StopReason { Completed, Stuck, Budget };

const char* to_string(StopReason r);

inline constexpr std::size_t default_budget = 10000;

struct Transition {
    TransitionChoice choice;
    std::optional<Event> event;
};

struct RunResult {
    std::vector<Transition> transitions;  // every rule application, in order
    std::vector<Event> events;            // the witnessed event order
    Trace trace;
    System final_sys;
    StopReason stop_reason = StopReason::Completed;
    std::map<Pid, Value> results;  // value of each exited process
    std::map<Pid, std::string> crashes;
};

/// Runs until nothing is enabled or `budget` transitions have been applied.
/// Throws InapplicableChoice when a scripted entry cannot be applied.
RunResult run(const Program& prog, const std::string& entry, const SchedulerConfig& sched,
              std::size_t budget = default_budget);

/// Scripted-schedule file: [{"kind":"proc","pid":"p1"},{"kind":"deliver","from":"p3","to":"p2"}]
std::string write_schedule_json(const std::vector<TransitionChoice>& script);
/// Throws FormatError (trace_io.hpp) on malformed input.
std::vector<TransitionChoice> read_schedule_json(std::string_view text);

}  // namespace kern
