#pragma once

#include "kern/ids.hpp"

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kern {

struct Atom {
    std::string name;
    auto operator<=>(const Atom&) const = default;
};

struct Value;

struct Tuple {
    std::vector<Value> elems;
};

struct List {
    std::vector<Value> elems;
};

/// Runtime values: integers, atoms, pids, tuples and lists. Pids have no
/// literal syntax; they only enter through spawn/1 and self/0.
struct Value {
    std::variant<std::int64_t, Atom, Pid, Tuple, List> data;

    static Value integer(std::int64_t n) { return Value{n}; }
    static Value atom(std::string name) { return Value{Atom{std::move(name)}}; }
    static Value pid(Pid p) { return Value{p}; }
    static Value tuple(std::vector<Value> elems);
    static Value list(std::vector<Value> elems);

    bool is_atom(std::string_view name) const;
    bool operator==(const Value& other) const;
};

/// Standard term order: integer < atom < pid < tuple < list; tuples compare
/// by arity first, lists lexicographically.
std::strong_ordering compare(const Value& a, const Value& b);

/// Erlang-like rendering: 42, ok, <p2>, {a,1}, [1,2].
std::string to_string(const Value& v);

struct Message {
    Tag tag;
    Value value;
    bool operator==(const Message&) const = default;
};

using Mailbox = std::vector<Message>;

}  // namespace kern
