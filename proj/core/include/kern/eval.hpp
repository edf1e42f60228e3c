#pragma once

#include "kern/ast.hpp"
#include "kern/value.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kern {

using Env = std::map<std::string, Value>;

/// Placeholder left in focus by self/spawn/receive steps; the system layer
/// fills it (with a pid, or with the selected clause body).
struct Future {
    bool operator==(const Future&) const = default;
};

namespace frame {
/// Evaluating the operands of `node` left to right; `done` holds the values
/// computed so far.
struct Args {
    const Expr* node;
    std::vector<Value> done;
};
struct LetBody {
    const Expr* node;
};
struct SeqNext {
    const Expr* node;
};
struct CaseSelect {
    const Expr* node;
};
/// Call return: the caller's environment.
struct Return {
    Env saved;
};
}  // namespace frame

using Frame = std::variant<frame::Args, frame::LetBody, frame::SeqNext, frame::CaseSelect, frame::Return>;

struct LocalState {
    Env env;
    std::variant<const Expr*, Value, Future> focus;
    std::vector<Frame> stack;
    /// Set when evaluation failed; the state is then final with focus 'crashed'.
    std::optional<std::string> crash;
};

/// Local state for calling `fun` with `args` (the initial state of a process).
LocalState initial_state(const FunDef& fun, const std::vector<Value>& args);

bool final(const LocalState& ls);
bool awaiting_future(const LocalState& ls);

/// Value of a final state.
const Value& result(const LocalState& ls);

namespace label {
struct Local {};
struct Self {};
struct Send {
    Value value;
    Pid to;
};
struct Rec {
    const Expr* receive;  // the ex::Receive node holding the clauses
};
struct Spawn {
    std::string fname;
    std::vector<Value> args;
};
}  // namespace label

using EvalLabel = std::variant<label::Local, label::Self, label::Send, label::Rec, label::Spawn>;

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepResult {
    EvalLabel label;
    LocalState next;
};

/// One small step. Self/Spawn/Rec steps leave a Future in focus.
/// Throws EvalError on runtime errors and std::logic_error if `ls` is final
/// or awaiting a future.
StepResult eval_step(const Program& prog, const LocalState& ls);

/// eval_step, but a runtime error yields a Local step into the crashed state.
StepResult step_or_crash(const Program& prog, const LocalState& ls);

/// Fills the future left by a Self or Spawn step.
LocalState bind_future(LocalState ls, Value v);

struct OldestMatching {};
struct ByTag {
    Tag tag;
};
using MatchMode = std::variant<OldestMatching, ByTag>;

struct MatchResult {
    LocalState state;  // future bound to the selected clause body
    Mailbox mailbox;   // input mailbox minus the consumed message
    Tag tag;
    Value value;
    std::size_t index;  // position of the consumed message in the input mailbox
};

/// Selects a message for the receive in focus of `ls` (a post-Rec state).
/// OldestMatching scans messages front to back, clauses top to bottom.
/// ByTag only considers the message carrying that tag.
std::optional<MatchResult> matchrec(const LocalState& ls, const Expr& receive, const Mailbox& q, MatchMode mode);

/// Deterministic textual form of a state, for structural comparison.
std::string serialize(const LocalState& ls);

}  // namespace kern
