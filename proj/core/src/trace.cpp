#include "kern/trace.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace kern {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

std::string kind_name(const Action& a) {
    return std::visit(overloaded{[](const act::Spawn&) { return std::string("spawn"); },
                                 [](const act::Exit&) { return std::string("exit"); },
                                 [](const act::Send&) { return std::string("send"); },
                                 [](const act::Deliver&) { return std::string("deliver"); },
                                 [](const act::Rec&) { return std::string("rec"); }},
                      a);
}

std::string to_string(const Action& a) {
    return std::visit(
        overloaded{[](const act::Spawn& s) { return "spawn(" + s.child.str() + ")"; },
                   [](const act::Exit&) { return std::string("exit"); },
                   [](const act::Send& s) { return "send(" + s.tag.str() + "," + s.to.str() + ")"; },
                   [](const act::Deliver& d) { return "deliver(" + d.tag.str() + ")"; },
                   [](const act::Rec& r) { return "rec(" + r.tag.str() + ")"; }},
        a);
}

std::optional<Tag> tag_of(const Action& a) {
    if (auto s = std::get_if<act::Send>(&a)) return s->tag;
    if (auto d = std::get_if<act::Deliver>(&a)) return d->tag;
    if (auto r = std::get_if<act::Rec>(&a)) return r->tag;
    return std::nullopt;
}

std::string to_string(const EventRef& r) { return r.pid.str() + "#" + std::to_string(r.index); }

const Action& Trace::at(const EventRef& r) const {
    auto it = seq.find(r.pid);
    if (it == seq.end() || r.index >= it->second.size()) {
        throw std::out_of_range("event " + to_string(r) + " not in trace");
    }
    return it->second[r.index];
}

bool Trace::contains(const EventRef& r) const {
    auto it = seq.find(r.pid);
    return it != seq.end() && r.index < it->second.size();
}

std::size_t Trace::event_count() const {
    std::size_t n = 0;
    for (const auto& [_, as] : seq) n += as.size();
    return n;
}

std::vector<EventRef> Trace::refs() const {
    std::vector<EventRef> out;
    for (const auto& [p, as] : seq) {
        for (std::size_t i = 0; i < as.size(); ++i) out.push_back({p, i});
    }
    return out;
}

Trace trace_from_events(const std::vector<Event>& events) {
    Trace t;
    for (const auto& e : events) {
        t.seq[e.pid].push_back(e.action);
        if (auto s = std::get_if<act::Spawn>(&e.action)) {
            t.seq.try_emplace(s->child);
        }
    }
    return t;
}

std::string kind_name(const LogAction& a) {
    return std::visit(overloaded{[](const logact::Spawn&) { return std::string("spawn"); },
                                 [](const logact::Send&) { return std::string("send"); },
                                 [](const logact::Rec&) { return std::string("rec"); }},
                      a);
}

std::string to_string(const LogAction& a) {
    return std::visit(overloaded{[](const logact::Spawn& s) { return "spawn(" + s.child.str() + ")"; },
                                 [](const logact::Send& s) { return "send(" + s.tag.str() + ")"; },
                                 [](const logact::Rec& r) { return "rec(" + r.tag.str() + ")"; }},
                      a);
}

std::size_t Log::action_count() const {
    std::size_t n = 0;
    for (const auto& [_, as] : seq) n += as.size();
    return n;
}

Log log_of(const Trace& t) {
    Log l;
    for (const auto& [p, as] : t.seq) {
        auto& out = l.seq[p];
        for (const auto& a : as) {
            if (auto s = std::get_if<act::Spawn>(&a)) {
                out.push_back(logact::Spawn{s->child});
            } else if (auto s = std::get_if<act::Send>(&a)) {
                out.push_back(logact::Send{s->tag});
            } else if (auto r = std::get_if<act::Rec>(&a)) {
                out.push_back(logact::Rec{r->tag});
            }
        }
    }
    return l;
}

std::map<Tag, TagEvents> index_tags(const Trace& t) {
    std::map<Tag, TagEvents> idx;
    for (const auto& [p, as] : t.seq) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            const EventRef ref{p, i};
            if (auto s = std::get_if<act::Send>(&as[i])) {
                auto& slot = idx[s->tag].send;
                if (!slot) slot = ref;
            } else if (auto d = std::get_if<act::Deliver>(&as[i])) {
                auto& slot = idx[d->tag].deliver;
                if (!slot) slot = ref;
            } else if (auto r = std::get_if<act::Rec>(&as[i])) {
                auto& slot = idx[r->tag].rec;
                if (!slot) slot = ref;
            }
        }
    }
    return idx;
}

std::vector<Violation> well_formed(const Trace& t) {
    std::vector<Violation> out;
    auto report = [&](char rule, std::string msg) { out.push_back({rule, std::move(msg)}); };

    std::map<Tag, int> sends, delivers, recs;
    std::map<Tag, Pid> send_target;
    std::map<Pid, int> spawned;
    for (const auto& [p, as] : t.seq) {
        if (p.id == 0) report('g', "pid p0 is not a valid pid");
        for (std::size_t i = 0; i < as.size(); ++i) {
            const auto& a = as[i];
            if (auto tag = tag_of(a); tag && tag->id == 0) {
                report('g', "tag l0 is not a valid tag at " + to_string(EventRef{p, i}));
            }
            if (auto s = std::get_if<act::Spawn>(&a)) {
                if (s->child.id == 0) report('g', "spawn of p0 at " + to_string(EventRef{p, i}));
                ++spawned[s->child];
            } else if (auto s = std::get_if<act::Send>(&a)) {
                ++sends[s->tag];
                send_target.emplace(s->tag, s->to);
            } else if (auto d = std::get_if<act::Deliver>(&a)) {
                ++delivers[d->tag];
            } else if (auto r = std::get_if<act::Rec>(&a)) {
                ++recs[r->tag];
            }
            if (std::holds_alternative<act::Exit>(a) && i + 1 != as.size()) {
                report('f', "exit is not last in " + p.str());
            }
        }
    }

    auto dup = [&](const std::map<Tag, int>& counts, const char* what) {
        for (const auto& [tag, n] : counts) {
            if (n > 1) report('a', tag.str() + " has " + std::to_string(n) + " " + what + " events");
        }
    };
    dup(sends, "send");
    dup(delivers, "deliver");
    dup(recs, "rec");

    for (const auto& [p, as] : t.seq) {
        std::set<Tag> delivered_here;
        for (std::size_t i = 0; i < as.size(); ++i) {
            if (auto d = std::get_if<act::Deliver>(&as[i])) {
                auto it = send_target.find(d->tag);
                if (it == send_target.end()) {
                    report('b', "deliver(" + d->tag.str() + ") on " + p.str() + " has no send");
                } else if (it->second != p) {
                    report('b', "deliver(" + d->tag.str() + ") on " + p.str() + " but it was sent to " +
                                    it->second.str());
                }
                delivered_here.insert(d->tag);
            } else if (auto r = std::get_if<act::Rec>(&as[i])) {
                if (!delivered_here.contains(r->tag)) {
                    report('c', "rec(" + r->tag.str() + ") on " + p.str() + " without an earlier deliver");
                }
            }
        }
    }

    std::vector<Pid> unspawned;
    for (const auto& [p, as] : t.seq) {
        if (!as.empty() && !spawned.contains(p)) unspawned.push_back(p);
    }
    for (const auto& [child, n] : spawned) {
        if (n > 1) report('d', child.str() + " spawned " + std::to_string(n) + " times");
    }
    if (unspawned.empty() && !t.seq.empty() && t.event_count() > 0) {
        report('d', "every acting pid is spawned; there is no root");
    }
    for (std::size_t i = 1; i < unspawned.size(); ++i) {
        report('e', unspawned[i].str() + " acts but is never spawned");
    }
    return out;
}

std::optional<bool> precedes(const Trace& t, const EventRef& a, const EventRef& b) {
    if (!t.contains(a) || !t.contains(b)) {
        throw std::out_of_range("precedes: event not in trace");
    }
    if (a.pid != b.pid) return std::nullopt;
    return a.index < b.index;
}

HappenedBefore::HappenedBefore(const Trace& t) {
    for (const auto& [p, as] : t.seq) {
        offset_[p] = nodes_.size();
        for (std::size_t i = 0; i < as.size(); ++i) nodes_.push_back({p, i});
    }
    succ_.resize(nodes_.size());
    reach_.resize(nodes_.size());

    std::map<Tag, std::vector<std::size_t>> sends, delivers, recs;
    for (const auto& [p, as] : t.seq) {
        const std::size_t base = offset_[p];
        std::set<Tag> deliver_tags;
        std::size_t n_delivers = 0;
        for (const auto& a : as) {
            if (auto d = std::get_if<act::Deliver>(&a)) {
                deliver_tags.insert(d->tag);
                ++n_delivers;
            }
        }
        const bool distinct_delivers = deliver_tags.size() == n_delivers;

        std::optional<std::size_t> prev_plain;
        std::optional<std::size_t> prev_deliver;
        std::vector<std::size_t> delivers_here;
        for (std::size_t i = 0; i < as.size(); ++i) {
            const std::size_t n = base + i;
            const auto& a = as[i];
            if (auto d = std::get_if<act::Deliver>(&a)) {
                // (2) delivers of one process are ordered among themselves
                if (distinct_delivers) {
                    if (prev_deliver) succ_[*prev_deliver].push_back(n);
                } else {
                    for (std::size_t j : delivers_here) {
                        if (std::get<act::Deliver>(as[j - base]).tag != d->tag) succ_[j].push_back(n);
                    }
                }
                prev_deliver = n;
                delivers_here.push_back(n);
                delivers[d->tag].push_back(n);
            } else {
                // (1) program order over everything but delivers
                if (prev_plain) succ_[*prev_plain].push_back(n);
                prev_plain = n;
            }
            if (auto s = std::get_if<act::Send>(&a)) sends[s->tag].push_back(n);
            if (auto r = std::get_if<act::Rec>(&a)) recs[r->tag].push_back(n);
            if (std::holds_alternative<act::Exit>(a)) {
                // (6) everything in the process precedes its exit
                for (std::size_t j = 0; j < as.size(); ++j) {
                    if (j != i) succ_[base + j].push_back(n);
                }
            }
        }
    }
    for (const auto& [p, as] : t.seq) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            if (auto s = std::get_if<act::Spawn>(&as[i])) {
                // (3) spawn precedes every event of the child
                auto it = t.seq.find(s->child);
                if (it == t.seq.end()) continue;
                const std::size_t child_base = offset_[s->child];
                for (std::size_t j = 0; j < it->second.size(); ++j) {
                    succ_[offset_[p] + i].push_back(child_base + j);
                }
            }
        }
    }
    // (4) send before deliver, (5) deliver before rec
    for (const auto& [tag, ss] : sends) {
        auto it = delivers.find(tag);
        if (it == delivers.end()) continue;
        for (auto s : ss)
            for (auto d : it->second) succ_[s].push_back(d);
    }
    for (const auto& [tag, ds] : delivers) {
        auto it = recs.find(tag);
        if (it == recs.end()) continue;
        for (auto d : ds)
            for (auto r : it->second) succ_[d].push_back(r);
    }
}

std::size_t HappenedBefore::node(const EventRef& r) const {
    auto it = offset_.find(r.pid);
    if (it == offset_.end()) throw std::out_of_range("event " + to_string(r) + " not in trace");
    const std::size_t end = std::next(it) == offset_.end() ? nodes_.size() : std::next(it)->second;
    if (it->second + r.index >= end) throw std::out_of_range("event " + to_string(r) + " not in trace");
    return it->second + r.index;
}

const std::vector<bool>& HappenedBefore::reach(std::size_t src) const {
    auto& slot = reach_[src];
    if (slot) return *slot;
    std::vector<bool> seen(nodes_.size(), false);
    std::vector<std::size_t> stack(succ_[src].begin(), succ_[src].end());
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        if (seen[n]) continue;
        seen[n] = true;
        for (auto m : succ_[n]) {
            if (!seen[m]) stack.push_back(m);
        }
    }
    slot = std::move(seen);
    return *slot;
}

bool HappenedBefore::operator()(const EventRef& a, const EventRef& b) const {
    return reach(node(a))[node(b)];
}

bool HappenedBefore::independent(const EventRef& a, const EventRef& b) const {
    return !(*this)(a, b) && !(*this)(b, a);
}

std::vector<EventRef> HappenedBefore::successors(const EventRef& a) const {
    const auto& r = reach(node(a));
    std::vector<EventRef> out;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i]) out.push_back(nodes_[i]);
    }
    return out;
}

bool happened_before(const Trace& t, const EventRef& a, const EventRef& b) {
    return HappenedBefore(t)(a, b);
}

bool independent(const Trace& t, const EventRef& a, const EventRef& b) {
    return HappenedBefore(t).independent(a, b);
}

Pid Renaming::apply(Pid p) const {
    auto it = pids.find(p);
    return it == pids.end() ? p : it->second;
}

Tag Renaming::apply(Tag t) const {
    auto it = tags.find(t);
    return it == tags.end() ? t : it->second;
}

Trace rename(const Trace& t, const Renaming& r) {
    Trace out;
    for (const auto& [p, as] : t.seq) {
        auto& dst = out.seq[r.apply(p)];
        for (const auto& a : as) {
            dst.push_back(std::visit(
                overloaded{[&](const act::Spawn& s) -> Action { return act::Spawn{r.apply(s.child)}; },
                           [&](const act::Exit&) -> Action { return act::Exit{}; },
                           [&](const act::Send& s) -> Action { return act::Send{r.apply(s.tag), r.apply(s.to)}; },
                           [&](const act::Deliver& d) -> Action { return act::Deliver{r.apply(d.tag)}; },
                           [&](const act::Rec& x) -> Action { return act::Rec{r.apply(x.tag)}; }},
                a));
        }
    }
    return out;
}

Log rename(const Log& l, const Renaming& r) {
    Log out;
    for (const auto& [p, as] : l.seq) {
        auto& dst = out.seq[r.apply(p)];
        for (const auto& a : as) {
            dst.push_back(std::visit(
                overloaded{[&](const logact::Spawn& s) -> LogAction { return logact::Spawn{r.apply(s.child)}; },
                           [&](const logact::Send& s) -> LogAction { return logact::Send{r.apply(s.tag)}; },
                           [&](const logact::Rec& x) -> LogAction { return logact::Rec{r.apply(x.tag)}; }},
                a));
        }
    }
    return out;
}

namespace {

// Shared canonical-renaming scan over anything shaped like a per-pid action
// map. `visit` reports, for one action, a spawned child and/or a sent tag and
// any other tags/pids mentioned (assigned only in the fallback pass).
struct Mention {
    std::optional<Pid> spawned;
    std::optional<Tag> sent;
    std::optional<Tag> other_tag;
    std::optional<Pid> other_pid;
};

template <class Seq, class Visit>
Renaming scan_renaming(const std::map<Pid, std::vector<Seq>>& seq, Visit visit) {
    std::set<Pid> spawned;
    for (const auto& [_, as] : seq) {
        for (const auto& a : as) {
            if (auto m = visit(a); m.spawned) spawned.insert(*m.spawned);
        }
    }
    std::vector<Pid> roots;
    for (const auto& [p, as] : seq) {
        if (!spawned.contains(p) && !as.empty()) roots.push_back(p);
    }
    if (roots.empty()) {
        // a silent root (e.g. a log of a run that only exits)
        for (const auto& [p, as] : seq) {
            if (!spawned.contains(p)) roots.push_back(p);
        }
    }
    if (roots.size() > 1) {
        std::string msg = "several root pids:";
        for (auto p : roots) msg += " " + p.str();
        throw MalformedTrace(msg);
    }

    Renaming r;
    if (roots.empty()) {
        if (!seq.empty()) throw MalformedTrace("no root pid: every pid is spawned");
        return r;
    }
    std::uint64_t next_pid = 1, next_tag = 1;
    std::vector<Pid> order{roots.front()};
    r.pids[roots.front()] = Pid{next_pid++};
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto it = seq.find(order[i]);
        if (it == seq.end()) continue;
        for (const auto& a : it->second) {
            const auto m = visit(a);
            if (m.spawned && !r.pids.contains(*m.spawned)) {
                r.pids[*m.spawned] = Pid{next_pid++};
                order.push_back(*m.spawned);
            }
            if (m.sent && !r.tags.contains(*m.sent)) r.tags[*m.sent] = Tag{next_tag++};
        }
    }
    // Fallback for ids the scan cannot reach (only in malformed inputs or
    // in logs whose sends were cut): number them in scan order.
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto it = seq.find(order[i]);
        if (it == seq.end()) continue;
        for (const auto& a : it->second) {
            const auto m = visit(a);
            if (m.other_tag && !r.tags.contains(*m.other_tag)) r.tags[*m.other_tag] = Tag{next_tag++};
            if (m.other_pid && !r.pids.contains(*m.other_pid)) r.pids[*m.other_pid] = Pid{next_pid++};
        }
    }
    for (const auto& [p, as] : seq) {
        if (!r.pids.contains(p)) r.pids[p] = Pid{next_pid++};
        for (const auto& a : as) {
            const auto m = visit(a);
            if (m.sent && !r.tags.contains(*m.sent)) r.tags[*m.sent] = Tag{next_tag++};
            if (m.other_tag && !r.tags.contains(*m.other_tag)) r.tags[*m.other_tag] = Tag{next_tag++};
            if (m.spawned && !r.pids.contains(*m.spawned)) r.pids[*m.spawned] = Pid{next_pid++};
            if (m.other_pid && !r.pids.contains(*m.other_pid)) r.pids[*m.other_pid] = Pid{next_pid++};
        }
    }
    return r;
}

Mention mention(const Action& a) {
    return std::visit(overloaded{[](const act::Spawn& s) { return Mention{s.child, {}, {}, {}}; },
                                 [](const act::Exit&) { return Mention{}; },
                                 [](const act::Send& s) { return Mention{{}, s.tag, {}, s.to}; },
                                 [](const act::Deliver& d) { return Mention{{}, {}, d.tag, {}}; },
                                 [](const act::Rec& x) { return Mention{{}, {}, x.tag, {}}; }},
                      a);
}

Mention mention(const LogAction& a) {
    return std::visit(overloaded{[](const logact::Spawn& s) { return Mention{s.child, {}, {}, {}}; },
                                 [](const logact::Send& s) { return Mention{{}, s.tag, {}, {}}; },
                                 [](const logact::Rec& x) { return Mention{{}, {}, x.tag, {}}; }},
                      a);
}

template <class Seq>
void normalize_entries(std::map<Pid, std::vector<Seq>>& seq) {
    // Every spawned pid gets an entry; silent pids nobody spawned are dropped
    // unless they are the only (root) entry.
    std::set<Pid> spawned;
    for (const auto& [_, as] : seq) {
        for (const auto& a : as) {
            if (auto m = mention(a); m.spawned) spawned.insert(*m.spawned);
        }
    }
    for (auto p : spawned) seq.try_emplace(p);
    for (auto it = seq.begin(); it != seq.end();) {
        if (it->second.empty() && !spawned.contains(it->first) && it->first != Pid{1}) {
            it = seq.erase(it);
        } else {
            ++it;
        }
    }
}

}  // namespace

Renaming canonical_renaming(const Trace& t) {
    return scan_renaming(t.seq, [](const Action& a) { return mention(a); });
}

Renaming canonical_renaming(const Log& l) {
    return scan_renaming(l.seq, [](const LogAction& a) { return mention(a); });
}

Trace canonicalize(const Trace& t) {
    Trace out = rename(t, canonical_renaming(t));
    normalize_entries(out.seq);
    return out;
}

Log canonicalize(const Log& l) {
    Log out = rename(l, canonical_renaming(l));
    normalize_entries(out.seq);
    return out;
}

bool trace_equal(const Trace& a, const Trace& b) { return canonicalize(a) == canonicalize(b); }

bool log_equal(const Log& a, const Log& b) { return canonicalize(a) == canonicalize(b); }

}  // namespace kern
