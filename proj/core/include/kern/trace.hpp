#pragma once

#include "kern/ids.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kern {

// The five global actions of a trace.
namespace act {
struct Spawn {
    Pid child;
    bool operator==(const Spawn&) const = default;
};
struct Exit {
    bool operator==(const Exit&) const = default;
};
struct Send {
    Tag tag;
    Pid to;
    bool operator==(const Send&) const = default;
};
struct Deliver {
    Tag tag;
    bool operator==(const Deliver&) const = default;
};
struct Rec {
    Tag tag;
    bool operator==(const Rec&) const = default;
};
}  // namespace act

using Action = std::variant<act::Spawn, act::Exit, act::Send, act::Deliver, act::Rec>;

/// "spawn", "exit", "send", "deliver" or "rec".
std::string kind_name(const Action& a);
/// Human-readable form, e.g. "send(l1,p2)".
std::string to_string(const Action& a);
/// The message tag carried by send/deliver/rec.
std::optional<Tag> tag_of(const Action& a);

inline bool is_deliver(const Action& a) { return std::holds_alternative<act::Deliver>(a); }

struct Event {
    Pid pid;
    Action action;
    bool operator==(const Event&) const = default;
};

/// Positional event identity: index into the pid's action sequence.
struct EventRef {
    Pid pid;
    std::size_t index = 0;
    auto operator<=>(const EventRef&) const = default;
};

std::string to_string(const EventRef& r);

struct Trace {
    std::map<Pid, std::vector<Action>> seq;

    const Action& at(const EventRef& r) const;
    bool contains(const EventRef& r) const;
    std::size_t event_count() const;
    /// All event refs, ordered by pid then index.
    std::vector<EventRef> refs() const;

    bool operator==(const Trace&) const = default;
};

/// Per-pid projection of a witnessed event order. Spawned children get an
/// entry even when they never act, so blocked-but-silent processes show up.
Trace trace_from_events(const std::vector<Event>& events);

// Log actions: a trace without delivers and exits, and without send targets.
namespace logact {
struct Spawn {
    Pid child;
    bool operator==(const Spawn&) const = default;
};
struct Send {
    Tag tag;
    bool operator==(const Send&) const = default;
};
struct Rec {
    Tag tag;
    bool operator==(const Rec&) const = default;
};
}  // namespace logact

using LogAction = std::variant<logact::Spawn, logact::Send, logact::Rec>;

std::string kind_name(const LogAction& a);
std::string to_string(const LogAction& a);

struct Log {
    std::map<Pid, std::vector<LogAction>> seq;

    std::size_t action_count() const;
    bool operator==(const Log&) const = default;
};

Log log_of(const Trace& t);

struct Violation {
    char rule;  // 'a'..'g', see well_formed
    std::string message;
    bool operator==(const Violation&) const = default;
};

/// Checks the structural rules every recorded trace satisfies:
///  (a) each tag has at most one send, one deliver and one rec;
///  (b) deliver(l) on p requires send(l,p);
///  (c) rec(l) requires an earlier deliver(l) on the same pid;
///  (d) each pid is spawned at most once, and never the root;
///  (e) every non-root pid that acts has been spawned;
///  (f) exit, if present, is last;
///  (g) pid and tag namespaces are disjoint. The types keep them apart and
///      the JSON reader rejects a pid spelled as a tag; here we only reject
///      the zero ids no allocator hands out.
/// Returns an empty list iff all hold.
std::vector<Violation> well_formed(const Trace& t);

/// Where each tag's send, deliver and rec events live.
struct TagEvents {
    std::optional<EventRef> send;
    std::optional<EventRef> deliver;
    std::optional<EventRef> rec;
};
std::map<Tag, TagEvents> index_tags(const Trace& t);

/// Same-pid ordering; nullopt when the pids differ.
std::optional<bool> precedes(const Trace& t, const EventRef& a, const EventRef& b);

/// Happened-before over one trace. Base edges are built once; reachability
/// from a source is computed by DFS the first time it is asked and cached.
class HappenedBefore {
public:
    explicit HappenedBefore(const Trace& t);

    bool operator()(const EventRef& a, const EventRef& b) const;
    bool independent(const EventRef& a, const EventRef& b) const;

    /// Every event reachable from `a` (strict successors).
    std::vector<EventRef> successors(const EventRef& a) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    std::size_t node(const EventRef& r) const;
    const std::vector<bool>& reach(std::size_t src) const;

    std::map<Pid, std::size_t> offset_;
    std::vector<EventRef> nodes_;
    std::vector<std::vector<std::size_t>> succ_;
    mutable std::vector<std::optional<std::vector<bool>>> reach_;
};

bool happened_before(const Trace& t, const EventRef& a, const EventRef& b);
bool independent(const Trace& t, const EventRef& a, const EventRef& b);

struct MalformedTrace : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Renaming {
    std::map<Pid, Pid> pids;
    std::map<Tag, Tag> tags;

    Pid apply(Pid p) const;
    Tag apply(Tag t) const;
};

Trace rename(const Trace& t, const Renaming& r);
Log rename(const Log& l, const Renaming& r);

/// Canonical renaming: the root becomes p1, then the sequences of already
/// renamed pids are scanned in renamed order, numbering spawn targets and
/// send tags on first encounter. Throws MalformedTrace on several roots.
Renaming canonical_renaming(const Trace& t);
Renaming canonical_renaming(const Log& l);

Trace canonicalize(const Trace& t);
Log canonicalize(const Log& l);

bool trace_equal(const Trace& a, const Trace& b);
bool log_equal(const Log& a, const Log& b);

}  // namespace kern
