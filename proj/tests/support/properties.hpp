#pragma once

// Property checks shared by the unit tests and the acceptance runner. Each
// returns an empty string on success and a description of the first
// failure otherwise.

#include "kern/rdebug.hpp"
#include "kern/runtime.hpp"

#include <cstdint>
#include <string>

namespace kern::testing {

/// Records a random lazy run, replays its log, and compares logs.
std::string check_replay_fidelity(const Program& prog, std::uint64_t seed);

struct LoopStats {
    std::size_t samples = 0;
    std::string failure;
};

/// Walks a random forward derivation of the debugger (replaying `log`, or
/// free when it is empty) and at every state takes one forward step and
/// its inverse, comparing the serialized states. Stops after `max_samples`.
LoopStats check_loop_property(const Program& prog, const Log& log, std::uint64_t seed, std::size_t max_samples);

/// Replays `log` to the end, undoes every step, and compares with the
/// initial state (including the full log in ω).
std::string check_full_rollback(const Program& prog, const Log& log);

struct CommutationStats {
    std::size_t pairs = 0;
    std::size_t deliver_rec_pairs = 0;  // deliver(l') next to rec(l), same process
    std::string failure;
};

/// For every adjacent pair of transitions of a random runtime derivation
/// that belong to different processes, or whose events are independent,
/// applies them in the other order and compares the post-states up to the
/// renaming of freshly allocated ids.
CommutationStats check_commutation(const Program& prog, std::uint64_t seed, std::size_t max_transitions);

/// `serialize(sys)` with pid and tag tokens renamed.
std::string serialize_renamed(const System& sys, const std::map<std::string, std::string>& names);

}  // namespace kern::testing
