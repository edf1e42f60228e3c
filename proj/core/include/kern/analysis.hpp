#pragma once

#include "kern/ast.hpp"
#include "kern/rdebug.hpp"
#include "kern/runtime.hpp"
#include "kern/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kern {

struct Symptoms {
    std::set<Pid> blocked;  // sequence does not end with exit
    std::set<Tag> lost;     // sent, never delivered
    std::set<Tag> orphan;   // delivered, never received

    bool empty() const { return blocked.empty() && lost.empty() && orphan.empty(); }
    bool operator==(const Symptoms&) const = default;
};

Symptoms symptoms(const Trace& t);

struct RaceSet {
    EventRef receive;
    Tag consumed;
    std::map<Pid, std::vector<Tag>> races;  // per sender, in send order

    /// Every racing tag, senders in pid order.
    std::vector<Tag> tags() const;
    bool empty() const { return races.empty(); }
};

/// Messages that could have been received at `receive` instead: ℓ′ races
/// with the consumed ℓ when ℓ′ was sent to the same process and delivered,
/// its delivery does not precede ℓ's, and ℓ's delivery does not happen
/// before ℓ′'s send. Throws std::invalid_argument if `receive` is not a rec.
RaceSet race_set(const Trace& t, const EventRef& receive);
RaceSet race_set(const Trace& t, const HappenedBefore& hb, const EventRef& receive);

/// Race sets of every receive, omitting empty ones.
std::map<EventRef, RaceSet> all_race_sets(const Trace& t);

/// The log that replays `t` up to `receive`, except that the receive takes
/// `alt`: every event happening after the receive is dropped and the
/// receive's tag is replaced. Throws std::invalid_argument unless `alt` is
/// in the receive's race set.
Log race_variant(const Trace& t, const EventRef& receive, Tag alt);

enum class SymptomKind { Deadlock, Orphan, Lost };

const char* to_string(SymptomKind k);
std::optional<SymptomKind> parse_symptom_kind(std::string_view s);
bool exhibits(const Symptoms& s, SymptomKind k);

struct ExploreConfig {
    std::size_t max_depth = 1;               // race-variant substitutions along one path
    std::size_t budget = default_budget;     // transitions per run
    std::size_t max_runs = 256;              // replays before giving up
    std::uint64_t seed = 0;
    std::set<SymptomKind> targets;           // stop once all are witnessed
    /// Also consider delayed messages (every matching message, not just the
    /// first). Not implemented; explore throws if set.
    bool include_delayed = false;
};

struct ExploredRun {
    Log log;  // canonical
    Symptoms symptoms;
    StopReason stop_reason = StopReason::Completed;
    std::size_t depth = 0;
    std::optional<std::size_t> parent;  // index into explored
    std::optional<EventRef> receive;    // the receive whose message was swapped
    std::optional<Tag> tag;             // in the parent's naming
};

struct InfeasibleVariant {
    std::size_t parent;
    EventRef receive;
    Tag tag;
    std::string problem;
};

struct ExplorationReport {
    std::vector<ExploredRun> explored;
    std::vector<InfeasibleVariant> infeasible;
    std::map<SymptomKind, std::size_t> witnesses;  // first witnessing run
    bool frontier_exhausted = true;
};

/// Depth-first search over race variants. The first run uses a seeded
/// random schedule with lazy delivery; each variant is replayed and then
/// continued with a random schedule seeded from the config. For every
/// receive and every sender's list, tags are tried in send order until one
/// replays. Runs are deduplicated by canonical log.
ExplorationReport explore(const Program& prog, const std::string& entry, const ExploreConfig& config);

/// Same search, starting from an already recorded run instead of a fresh one.
ExplorationReport explore_from(const Program& prog, const std::string& entry, const Trace& first,
                               StopReason first_stop, const ExploreConfig& config);

}  // namespace kern
