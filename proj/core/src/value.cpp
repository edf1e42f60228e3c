#include "kern/value.hpp"

#include <algorithm>

namespace kern {

Value Value::tuple(std::vector<Value> elems) { return Value{Tuple{std::move(elems)}}; }
Value Value::list(std::vector<Value> elems) { return Value{List{std::move(elems)}}; }

bool Value::is_atom(std::string_view name) const {
    auto a = std::get_if<Atom>(&data);
    return a && a->name == name;
}

bool Value::operator==(const Value& other) const { return compare(*this, other) == 0; }

namespace {
std::strong_ordering compare_seq(const std::vector<Value>& a, const std::vector<Value>& b) {
    const auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (auto c = compare(a[i], b[i]); c != 0) return c;
    }
    return a.size() <=> b.size();
}
}  // namespace

std::strong_ordering compare(const Value& a, const Value& b) {
    if (a.data.index() != b.data.index()) return a.data.index() <=> b.data.index();
    switch (a.data.index()) {
        case 0:
            return std::get<std::int64_t>(a.data) <=> std::get<std::int64_t>(b.data);
        case 1:
            return std::get<Atom>(a.data) <=> std::get<Atom>(b.data);
        case 2:
            return std::get<Pid>(a.data) <=> std::get<Pid>(b.data);
        case 3: {
            const auto& x = std::get<Tuple>(a.data).elems;
            const auto& y = std::get<Tuple>(b.data).elems;
            if (x.size() != y.size()) return x.size() <=> y.size();
            return compare_seq(x, y);
        }
        default:
            return compare_seq(std::get<List>(a.data).elems, std::get<List>(b.data).elems);
    }
}

std::string to_string(const Value& v) {
    struct Render {
        std::string operator()(std::int64_t n) const { return std::to_string(n); }
        std::string operator()(const Atom& a) const { return a.name; }
        std::string operator()(Pid p) const { return "<" + p.str() + ">"; }
        std::string operator()(const Tuple& t) const { return join("{", t.elems, "}"); }
        std::string operator()(const List& l) const { return join("[", l.elems, "]"); }
        static std::string join(const char* open, const std::vector<Value>& xs, const char* close) {
            std::string s = open;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (i) s += ",";
                s += to_string(xs[i]);
            }
            return s + close;
        }
    };
    return std::visit(Render{}, v.data);
}

}  // namespace kern
