#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace kern {

/// Process identifier. Serialized as "p<N>"; the root process of a run is p1.
struct Pid {
    std::uint64_t id = 0;

    auto operator<=>(const Pid&) const = default;
    std::string str() const { return "p" + std::to_string(id); }
};

/// Message tag. Serialized as "l<N>"; disjoint from the pid namespace.
struct Tag {
    std::uint64_t id = 0;

    auto operator<=>(const Tag&) const = default;
    std::string str() const { return "l" + std::to_string(id); }
};

namespace detail {
inline std::optional<std::uint64_t> parse_prefixed(std::string_view s, char prefix) {
    if (s.size() < 2 || s.front() != prefix) {
        return std::nullopt;
    }
    std::uint64_t n = 0;
    for (char c : s.substr(1)) {
        if (c < '0' || c > '9') {
            return std::nullopt;
        }
        n = n * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return n;
}
}  // namespace detail

inline std::optional<Pid> parse_pid(std::string_view s) {
    if (auto n = detail::parse_prefixed(s, 'p')) {
        return Pid{*n};
    }
    return std::nullopt;
}

inline std::optional<Tag> parse_tag(std::string_view s) {
    if (auto n = detail::parse_prefixed(s, 'l')) {
        return Tag{*n};
    }
    return std::nullopt;
}

}  // namespace kern

template <>
struct std::hash<kern::Pid> {
    std::size_t operator()(kern::Pid p) const noexcept { return std::hash<std::uint64_t>{}(p.id); }
};

template <>
struct std::hash<kern::Tag> {
    std::size_t operator()(kern::Tag t) const noexcept { return std::hash<std::uint64_t>{}(t.id); }
};
