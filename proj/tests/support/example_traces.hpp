#pragma once

#include "kern/trace.hpp"

namespace kern::testing {

inline Action spawn(std::uint64_t p) { return act::Spawn{Pid{p}}; }
inline Action send(std::uint64_t l, std::uint64_t p) { return act::Send{Tag{l}, Pid{p}}; }
inline Action deliver(std::uint64_t l) { return act::Deliver{Tag{l}}; }
inline Action rec(std::uint64_t l) { return act::Rec{Tag{l}}; }
inline Action exit_() { return act::Exit{}; }

/// The three-process example: p1 spawns p2 and p3 and sends l1 to p2; p3
/// sends l2 and l3 to p2; p2 receives l1 once.
inline Trace trace_star() {
    Trace t;
    t.seq[Pid{1}] = {spawn(2), spawn(3), send(1, 2), exit_()};
    t.seq[Pid{2}] = {deliver(1), rec(1), deliver(2), deliver(3)};
    t.seq[Pid{3}] = {send(2, 2), send(3, 2), exit_()};
    return t;
}

/// Same run, but l2 reaches p2 before l1 (the p3 exit is not drawn in that
/// diagram; the recorded run has it).
inline Trace trace_fig1c() {
    Trace t;
    t.seq[Pid{1}] = {spawn(2), spawn(3), send(1, 2), exit_()};
    t.seq[Pid{2}] = {deliver(2), deliver(1), rec(1), deliver(3)};
    t.seq[Pid{3}] = {send(2, 2), send(3, 2), exit_()};
    return t;
}

inline Log log_star() {
    Log l;
    l.seq[Pid{1}] = {logact::Spawn{Pid{2}}, logact::Spawn{Pid{3}}, logact::Send{Tag{1}}};
    l.seq[Pid{2}] = {logact::Rec{Tag{1}}};
    l.seq[Pid{3}] = {logact::Send{Tag{2}}, logact::Send{Tag{3}}};
    return l;
}

}  // namespace kern::testing
