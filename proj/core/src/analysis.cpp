#include "kern/analysis.hpp"

#include "kern/trace_io.hpp"

#include <algorithm>
#include <stdexcept>

namespace kern {

Symptoms symptoms(const Trace& t) {
    Symptoms s;
    for (const auto& [p, as] : t.seq) {
        if (as.empty() || !std::holds_alternative<act::Exit>(as.back())) s.blocked.insert(p);
    }
    for (const auto& [tag, ev] : index_tags(t)) {
        if (ev.send && !ev.deliver) s.lost.insert(tag);
        if (ev.deliver && !ev.rec) s.orphan.insert(tag);
    }
    return s;
}

std::vector<Tag> RaceSet::tags() const {
    std::vector<Tag> out;
    for (const auto& [p, ts] : races) out.insert(out.end(), ts.begin(), ts.end());
    return out;
}

RaceSet race_set(const Trace& t, const HappenedBefore& hb, const EventRef& receive) {
    if (!t.contains(receive)) throw std::invalid_argument("no event " + to_string(receive));
    auto rec = std::get_if<act::Rec>(&t.at(receive));
    if (!rec) throw std::invalid_argument(to_string(receive) + " is not a receive");
    const auto idx = index_tags(t);
    const auto& mine = idx.at(rec->tag);
    if (!mine.deliver) throw std::invalid_argument("message " + rec->tag.str() + " has no deliver event");
    const EventRef e_d = *mine.deliver;

    RaceSet rs{receive, rec->tag, {}};
    std::map<Pid, std::vector<std::pair<std::size_t, Tag>>> by_sender;
    for (const auto& [tag, ev] : idx) {
        if (tag == rec->tag || !ev.send || !ev.deliver) continue;
        auto send = std::get_if<act::Send>(&t.at(*ev.send));
        if (!send || send->to != receive.pid || ev.deliver->pid != receive.pid) continue;
        if (precedes(t, *ev.deliver, e_d).value_or(false)) continue;
        if (hb(e_d, *ev.send)) continue;
        by_sender[ev.send->pid].emplace_back(ev.send->index, tag);
    }
    for (auto& [sender, list] : by_sender) {
        std::sort(list.begin(), list.end());
        auto& out = rs.races[sender];
        for (const auto& [index, tag] : list) out.push_back(tag);
    }
    return rs;
}

RaceSet race_set(const Trace& t, const EventRef& receive) { return race_set(t, HappenedBefore(t), receive); }

std::map<EventRef, RaceSet> all_race_sets(const Trace& t) {
    std::map<EventRef, RaceSet> out;
    const HappenedBefore hb(t);
    for (const auto& ref : t.refs()) {
        if (!std::holds_alternative<act::Rec>(t.at(ref))) continue;
        RaceSet rs = race_set(t, hb, ref);
        if (!rs.empty()) out.emplace(ref, std::move(rs));
    }
    return out;
}

Log race_variant(const Trace& t, const EventRef& receive, Tag alt) {
    const HappenedBefore hb(t);
    const RaceSet rs = race_set(t, hb, receive);
    const auto tags = rs.tags();
    if (std::find(tags.begin(), tags.end(), alt) == tags.end()) {
        throw std::invalid_argument(alt.str() + " is not in the race set of " + to_string(receive));
    }
    const auto after = hb.successors(receive);
    Trace variant;
    std::set<Pid> unspawned;
    for (const auto& [p, as] : t.seq) {
        auto& out = variant.seq[p];
        for (std::size_t i = 0; i < as.size(); ++i) {
            const EventRef ref{p, i};
            if (std::find(after.begin(), after.end(), ref) != after.end()) {
                if (auto s = std::get_if<act::Spawn>(&as[i])) unspawned.insert(s->child);
                continue;
            }
            out.push_back(ref == receive ? Action{act::Rec{alt}} : as[i]);
        }
    }
    for (Pid p : unspawned) variant.seq.erase(p);
    return log_of(variant);
}

const char* to_string(SymptomKind k) {
    switch (k) {
        case SymptomKind::Deadlock: return "deadlock";
        case SymptomKind::Orphan: return "orphan";
        case SymptomKind::Lost: return "lost";
    }
    return "?";
}

std::optional<SymptomKind> parse_symptom_kind(std::string_view s) {
    if (s == "deadlock") return SymptomKind::Deadlock;
    if (s == "orphan") return SymptomKind::Orphan;
    if (s == "lost") return SymptomKind::Lost;
    return std::nullopt;
}

bool exhibits(const Symptoms& s, SymptomKind k) {
    switch (k) {
        case SymptomKind::Deadlock: return !s.blocked.empty();
        case SymptomKind::Orphan: return !s.orphan.empty();
        case SymptomKind::Lost: return !s.lost.empty();
    }
    return false;
}

namespace {

class Explorer {
public:
    Explorer(const Program& prog, const std::string& entry, const ExploreConfig& cfg)
        : prog_(prog), entry_(entry), cfg_(cfg) {
        if (cfg.include_delayed) throw std::runtime_error("include_delayed: not implemented");
    }

    ExplorationReport run(const Trace& first, StopReason stop) {
        add(first, stop, 0, std::nullopt, std::nullopt, std::nullopt);
        if (!done()) search(first, 0, 0);
        return std::move(report_);
    }

private:
    bool done() const {
        if (cfg_.targets.empty()) return false;
        return std::all_of(cfg_.targets.begin(), cfg_.targets.end(),
                           [&](SymptomKind k) { return report_.witnesses.contains(k); });
    }

    // Records a run unless an equivalent one was seen; returns its index.
    std::optional<std::size_t> add(const Trace& t, StopReason stop, std::size_t depth, std::optional<std::size_t> parent,
                                   std::optional<EventRef> receive, std::optional<Tag> tag) {
        Log canon = canonicalize(log_of(t));
        if (!seen_.insert(write_log_json(canon)).second) return std::nullopt;
        const std::size_t index = report_.explored.size();
        ExploredRun r{std::move(canon), symptoms(t), stop, depth, parent, receive, tag};
        for (auto k : {SymptomKind::Deadlock, SymptomKind::Orphan, SymptomKind::Lost}) {
            if (exhibits(r.symptoms, k)) report_.witnesses.try_emplace(k, index);
        }
        report_.explored.push_back(std::move(r));
        return index;
    }

    // Returns true when the search should stop.
    bool search(const Trace& t, std::size_t index, std::size_t depth) {
        if (depth >= cfg_.max_depth) return false;
        for (const auto& [receive, rs] : all_race_sets(t)) {
            for (const auto& [sender, tags] : rs.races) {
                for (Tag tag : tags) {
                    if (runs_ >= cfg_.max_runs) {
                        report_.frontier_exhausted = false;
                        return true;
                    }
                    ++runs_;
                    ReplayOptions opts;
                    opts.budget = cfg_.budget;
                    opts.continue_after_log = true;
                    opts.scheduler.policy = policy::Random{cfg_.seed + runs_};
                    opts.scheduler.delivery = Delivery::Lazy;
                    auto rr = replay(prog_, entry_, race_variant(t, receive, tag), opts);
                    if (!rr.log_completed) {
                        report_.infeasible.push_back(
                            {index, receive, tag, rr.problem ? to_string(*rr.problem) : "log not completed"});
                        continue;
                    }
                    // First feasible tag of this sender: stop trying its later ones.
                    if (auto child = add(rr.trace, rr.stop_reason, depth + 1, index, receive, tag)) {
                        if (done() || search(rr.trace, *child, depth + 1)) return true;
                    }
                    break;
                }
            }
        }
        return false;
    }

    const Program& prog_;
    const std::string& entry_;
    const ExploreConfig& cfg_;
    ExplorationReport report_;
    std::set<std::string> seen_;
    std::size_t runs_ = 0;
};

}  // namespace

ExplorationReport explore_from(const Program& prog, const std::string& entry, const Trace& first,
                               StopReason first_stop, const ExploreConfig& config) {
    return Explorer(prog, entry, config).run(first, first_stop);
}

ExplorationReport explore(const Program& prog, const std::string& entry, const ExploreConfig& config) {
    Explorer explorer(prog, entry, config);
    SchedulerConfig sched;
    sched.policy = policy::Random{config.seed};
    sched.delivery = Delivery::Lazy;
    auto r = run(prog, entry, sched, config.budget);
    return explorer.run(r.trace, r.stop_reason);
}

}  // namespace kern
