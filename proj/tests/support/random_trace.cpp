#include "random_trace.hpp"

#include <deque>
#include <map>
#include <random>
#include <set>

namespace kern::testing {

std::vector<Event> random_events(std::uint64_t seed, const TraceGenConfig& cfg) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    std::vector<Pid> pids{Pid{1}};
    std::set<Pid> exited;
    std::map<Pid, std::vector<Tag>> mailbox;
    std::map<std::pair<Pid, Pid>, std::deque<Tag>> queues;
    std::uint64_t next_pid = 2, next_tag = 1;
    std::vector<Event> out;

    const std::size_t target = 1 + pick(cfg.max_events);
    while (out.size() < target) {
        enum Kind { Spawn, Send, Deliver, Rec, Exit };
        std::vector<std::pair<Kind, std::size_t>> options;
        for (std::size_t i = 0; i < pids.size(); ++i) {
            if (exited.contains(pids[i])) continue;
            if (pids.size() < cfg.max_procs) options.emplace_back(Spawn, i);
            options.emplace_back(Send, i);
            options.emplace_back(Send, i);
            if (!mailbox[pids[i]].empty()) {
                options.emplace_back(Rec, i);
                options.emplace_back(Rec, i);
            }
            options.emplace_back(Exit, i);
        }
        std::vector<std::pair<Pid, Pid>> ready;
        for (const auto& [key, q] : queues) {
            if (!q.empty() && !exited.contains(key.second)) ready.push_back(key);
        }
        for (std::size_t i = 0; i < ready.size(); ++i) options.emplace_back(Deliver, i);
        if (options.empty()) break;

        const auto [kind, i] = options[pick(options.size())];
        switch (kind) {
            case Spawn: {
                const Pid child{next_pid++};
                out.push_back({pids[i], act::Spawn{child}});
                pids.push_back(child);
                break;
            }
            case Send: {
                const Pid to = pids[pick(pids.size())];
                const Tag tag{next_tag++};
                out.push_back({pids[i], act::Send{tag, to}});
                queues[{pids[i], to}].push_back(tag);
                break;
            }
            case Deliver: {
                auto& q = queues[ready[i]];
                const Tag tag = q.front();
                q.pop_front();
                out.push_back({ready[i].second, act::Deliver{tag}});
                mailbox[ready[i].second].push_back(tag);
                break;
            }
            case Rec: {
                auto& mb = mailbox[pids[i]];
                const auto j = pick(mb.size());
                out.push_back({pids[i], act::Rec{mb[j]}});
                mb.erase(mb.begin() + static_cast<std::ptrdiff_t>(j));
                break;
            }
            case Exit:
                out.push_back({pids[i], act::Exit{}});
                exited.insert(pids[i]);
                break;
        }
    }
    return out;
}

}  // namespace kern::testing
