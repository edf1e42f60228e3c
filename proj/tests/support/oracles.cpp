#include "oracles.hpp"

#include <algorithm>
#include <set>

namespace kern::testing {

ClosureOracle::ClosureOracle(const Trace& t) {
    for (const auto& [p, as] : t.seq) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            index_[{p, i}] = refs_.size();
            refs_.push_back({p, i});
        }
    }
    const std::size_t n = refs_.size();
    m_.assign(n, std::vector<bool>(n, false));
    auto action = [&](std::size_t i) -> const Action& { return t.seq.at(refs_[i].pid)[refs_[i].index]; };
    auto tag = [&](std::size_t i) -> std::optional<Tag> {
        const auto& a = action(i);
        if (auto s = std::get_if<act::Send>(&a)) return s->tag;
        if (auto d = std::get_if<act::Deliver>(&a)) return d->tag;
        if (auto r = std::get_if<act::Rec>(&a)) return r->tag;
        return std::nullopt;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto& a1 = action(i);
            const auto& a2 = action(j);
            const bool same = refs_[i].pid == refs_[j].pid;
            const bool earlier = same && refs_[i].index < refs_[j].index;
            const bool d1 = std::holds_alternative<act::Deliver>(a1);
            const bool d2 = std::holds_alternative<act::Deliver>(a2);
            bool edge = false;
            if (earlier && !d1 && !d2) edge = true;                      // 1
            if (earlier && d1 && d2 && tag(i) != tag(j)) edge = true;    // 2
            if (auto s = std::get_if<act::Spawn>(&a1); s && s->child == refs_[j].pid) edge = true;  // 3
            if (std::holds_alternative<act::Send>(a1) && d2 && tag(i) == tag(j)) edge = true;      // 4
            if (d1 && std::holds_alternative<act::Rec>(a2) && tag(i) == tag(j)) edge = true;       // 5
            if (same && i != j && std::holds_alternative<act::Exit>(a2)) edge = true;              // 6
            m_[i][j] = edge;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!m_[i][k]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (m_[k][j]) m_[i][j] = true;
            }
        }
    }
}

namespace {

std::optional<EventRef> find_event(const Trace& t, auto pred) {
    for (const auto& [p, as] : t.seq) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            if (pred(as[i])) return EventRef{p, i};
        }
    }
    return std::nullopt;
}

}  // namespace

std::map<Pid, std::vector<Tag>> oracle_race_set(const Trace& t, const EventRef& receive) {
    const ClosureOracle hb(t);
    const Tag l = std::get<act::Rec>(t.seq.at(receive.pid)[receive.index]).tag;
    const Pid p = receive.pid;
    const auto e_d = *find_event(t, [&](const Action& a) {
        auto d = std::get_if<act::Deliver>(&a);
        return d && d->tag == l;
    });
    std::map<Pid, std::vector<std::pair<std::size_t, Tag>>> found;
    for (const auto& e_s : hb.events()) {
        auto send = std::get_if<act::Send>(&t.seq.at(e_s.pid)[e_s.index]);
        if (!send || send->tag == l || send->to != p) continue;
        const auto& mine = t.seq.at(p);
        std::optional<std::size_t> d_index;
        for (std::size_t i = 0; i < mine.size(); ++i) {
            if (mine[i] == Action{act::Deliver{send->tag}}) d_index = i;
        }
        if (!d_index) continue;
        const bool delivered_before = *d_index < e_d.index;  // e'_d precedes e_d
        if (delivered_before || hb.before(e_d, e_s)) continue;
        found[e_s.pid].emplace_back(e_s.index, send->tag);
    }
    std::map<Pid, std::vector<Tag>> out;
    for (auto& [sender, v] : found) {
        std::sort(v.begin(), v.end());
        for (const auto& [i, tag] : v) out[sender].push_back(tag);
    }
    return out;
}

Log oracle_variant(const Trace& t, const EventRef& receive, Tag alt) {
    const ClosureOracle hb(t);
    Trace kept;
    std::set<Pid> unborn;
    for (const auto& e : hb.events()) {
        const auto& a = t.seq.at(e.pid)[e.index];
        if (hb.before(receive, e)) {
            if (auto s = std::get_if<act::Spawn>(&a)) unborn.insert(s->child);
            continue;
        }
        kept.seq[e.pid].push_back(e == receive ? Action{act::Rec{alt}} : a);
    }
    Log out;
    for (const auto& [p, as] : t.seq) {
        if (unborn.contains(p)) continue;
        auto& seq = out.seq[p];
        for (const auto& a : kept.seq[p]) {
            if (auto s = std::get_if<act::Spawn>(&a)) seq.push_back(logact::Spawn{s->child});
            if (auto s = std::get_if<act::Send>(&a)) seq.push_back(logact::Send{s->tag});
            if (auto r = std::get_if<act::Rec>(&a)) seq.push_back(logact::Rec{r->tag});
        }
    }
    return out;
}

}  // namespace kern::testing
