#include "kern/runtime.hpp"

#include <random>
#include <sstream>

namespace kern {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const Expr* receive_in_focus(const LocalState& ls) {
    auto e = std::get_if<const Expr*>(&ls.focus);
    if (e && std::holds_alternative<ex::Receive>((*e)->node)) return *e;
    return nullptr;
}

std::optional<Event> apply_proc(const Program& prog, System& sys, Pid pid) {
    auto it = sys.pool.find(pid);
    if (it == sys.pool.end()) throw InapplicableChoice("no process " + pid.str());
    Process& proc = it->second;

    if (final(proc.ls)) {
        sys.pool.erase(it);
        return Event{pid, act::Exit{}};
    }

    if (const Expr* rcv = receive_in_focus(proc.ls)) {
        auto [lbl, next] = eval_step(prog, proc.ls);
        auto m = matchrec(next, *rcv, proc.mailbox, OldestMatching{});
        if (!m) throw InapplicableChoice(pid.str() + " is blocked at a receive");
        proc.ls = std::move(m->state);
        proc.mailbox = std::move(m->mailbox);
        return Event{pid, act::Rec{m->tag}};
    }

    auto [lbl, next] = step_or_crash(prog, proc.ls);
    return std::visit(
        overloaded{
            [&](label::Local&) -> std::optional<Event> {
                proc.ls = std::move(next);
                return std::nullopt;
            },
            [&](label::Self&) -> std::optional<Event> {
                proc.ls = bind_future(std::move(next), Value::pid(pid));
                return std::nullopt;
            },
            [&](label::Spawn& s) -> std::optional<Event> {
                const FunDef* f = prog.find(s.fname, s.args.size());
                if (!f) throw std::logic_error("unlinked function " + s.fname);
                const Pid child{sys.next_pid++};
                proc.ls = bind_future(std::move(next), Value::pid(child));
                sys.pool.emplace(child, Process{child, initial_state(*f, s.args), {}});
                return Event{pid, act::Spawn{child}};
            },
            [&](label::Send& s) -> std::optional<Event> {
                const Tag tag{sys.next_tag++};
                sys.network[{pid, s.to}].push_back(Message{tag, std::move(s.value)});
                proc.ls = std::move(next);
                return Event{pid, act::Send{tag, s.to}};
            },
            [&](label::Rec&) -> std::optional<Event> { throw std::logic_error("receive outside focus check"); },
        },
        lbl);
}

std::optional<Event> apply_deliver(System& sys, const choice::Deliver& d) {
    auto q = sys.network.find({d.from, d.to});
    auto target = sys.pool.find(d.to);
    if (q == sys.network.end() || target == sys.pool.end()) {
        throw InapplicableChoice("cannot deliver from " + d.from.str() + " to " + d.to.str());
    }
    Message m = std::move(q->second.front());
    q->second.pop_front();
    if (q->second.empty()) sys.network.erase(q);
    const Tag tag = m.tag;
    target->second.mailbox.push_back(std::move(m));
    return Event{d.to, act::Deliver{tag}};
}

}  // namespace

System initial_system(const Program& prog, const std::string& entry) {
    const FunDef* f = prog.find(entry, 0);
    if (!f) throw std::invalid_argument("no function " + entry + "/0");
    System sys;
    sys.pool.emplace(Pid{1}, Process{Pid{1}, initial_state(*f, {}), {}});
    return sys;
}

std::string to_string(const TransitionChoice& c) {
    return std::visit(overloaded{
                          [](const choice::Proc& p) { return "proc(" + p.pid.str() + ")"; },
                          [](const choice::Deliver& d) { return "deliver(" + d.from.str() + "," + d.to.str() + ")"; },
                      },
                      c);
}

bool blocked_at_receive(const Process& p) {
    if (!receive_in_focus(p.ls)) return false;
    // Receive steps never crash and are pure, so re-stepping is cheap and exact.
    static const Program none;
    auto [lbl, next] = eval_step(none, p.ls);
    return !matchrec(next, *std::get<label::Rec>(lbl).receive, p.mailbox, OldestMatching{});
}

bool proc_enabled(const System& sys, Pid p) {
    auto it = sys.pool.find(p);
    return it != sys.pool.end() && !blocked_at_receive(it->second);
}

std::vector<TransitionChoice> enabled(const System& sys) {
    std::vector<TransitionChoice> out;
    for (const auto& [pid, proc] : sys.pool) {
        if (!blocked_at_receive(proc)) out.push_back(choice::Proc{pid});
    }
    for (const auto& [key, q] : sys.network) {
        if (!q.empty() && sys.pool.contains(key.second)) out.push_back(choice::Deliver{key.first, key.second});
    }
    return out;
}

std::optional<Event> apply(const Program& prog, System& sys, const TransitionChoice& c) {
    return std::visit(overloaded{
                          [&](const choice::Proc& p) { return apply_proc(prog, sys, p.pid); },
                          [&](const choice::Deliver& d) { return apply_deliver(sys, d); },
                      },
                      c);
}

StepOutcome step(const Program& prog, System sys, const TransitionChoice& c) {
    auto ev = apply(prog, sys, c);
    return {std::move(ev), std::move(sys)};
}

std::string serialize(const System& sys) {
    std::ostringstream out;
    out << "next_pid=" << sys.next_pid << " next_tag=" << sys.next_tag << '\n';
    for (const auto& [key, q] : sys.network) {
        out << "queue " << key.first.str() << "->" << key.second.str() << ':';
        for (const auto& m : q) out << ' ' << m.tag.str() << '=' << to_string(m.value);
        out << '\n';
    }
    for (const auto& [pid, proc] : sys.pool) {
        out << "proc " << pid.str() << ' ' << serialize(proc.ls) << " mailbox:";
        for (const auto& m : proc.mailbox) out << ' ' << m.tag.str() << '=' << to_string(m.value);
        out << '\n';
    }
    return out.str();
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Completed: return "completed";
        case StopReason::Stuck: return "stuck";
        case StopReason::Budget: return "budget";
    }
    return "?";
}

namespace {

class Runner {
public:
    Runner(const Program& prog, const SchedulerConfig& sched, std::size_t budget, System sys)
        : prog_(prog), sched_(sched), budget_(budget) {
        result_.final_sys = std::move(sys);
    }

    RunResult run() {
        std::visit(overloaded{
                       [&](const policy::RoundRobin& rr) { round_robin(rr.fuel); },
                       [&](const policy::Random& r) { random(r.seed); },
                       [&](const policy::Scripted& s) {
                           scripted(s.script);
                           if (!out_of_budget()) round_robin(1);
                       },
                   },
                   sched_.policy);
        finish();
        return std::move(result_);
    }

private:
    System& sys() { return result_.final_sys; }
    bool out_of_budget() const { return result_.transitions.size() >= budget_; }
    bool eager() const { return sched_.delivery == Delivery::Eager; }

    std::optional<Event> take(const TransitionChoice& c) {
        if (auto p = std::get_if<choice::Proc>(&c)) {
            auto it = sys().pool.find(p->pid);
            if (it != sys().pool.end() && final(it->second.ls)) {
                result_.results.emplace(p->pid, result(it->second.ls));
                if (it->second.ls.crash) result_.crashes.emplace(p->pid, *it->second.ls.crash);
            }
        }
        auto ev = apply(prog_, sys(), c);
        result_.transitions.push_back({c, ev});
        if (ev) {
            result_.events.push_back(*ev);
            if (eager()) {
                if (auto s = std::get_if<act::Send>(&ev->action); s && sys().pool.contains(s->to)) {
                    // Instant delivery: the message goes straight into the mailbox.
                    take(choice::Deliver{ev->pid, s->to});
                }
            }
        }
        return ev;
    }

    std::vector<TransitionChoice> choices() const {
        auto all = enabled(result_.final_sys);
        if (!eager()) return all;
        std::erase_if(all, [](const TransitionChoice& c) { return std::holds_alternative<choice::Deliver>(c); });
        return all;
    }

    void round_robin(unsigned fuel) {
        std::optional<Pid> last_proc;
        std::optional<QueueKey> last_queue;
        while (!out_of_budget()) {
            bool progressed = false;
            // Next process after the previous one, in pid order, that can step.
            std::optional<Pid> next;
            for (const auto& [pid, proc] : sys().pool) {
                if (last_proc && pid <= *last_proc) continue;
                if (!blocked_at_receive(proc)) {
                    next = pid;
                    break;
                }
            }
            if (!next) {
                for (const auto& [pid, proc] : sys().pool) {
                    if (!blocked_at_receive(proc)) {
                        next = pid;
                        break;
                    }
                }
            }
            if (next) {
                last_proc = next;
                for (unsigned k = 0; k < std::max(fuel, 1u) && !out_of_budget() && proc_enabled(sys(), *next); ++k) {
                    take(choice::Proc{*next});
                    progressed = true;
                }
            }
            if (!eager() && !out_of_budget()) {
                if (auto q = next_queue(last_queue)) {
                    last_queue = q;
                    take(choice::Deliver{q->first, q->second});
                    progressed = true;
                }
            }
            if (!progressed) return;
        }
    }

    std::optional<QueueKey> next_queue(const std::optional<QueueKey>& after) {
        std::optional<QueueKey> first;
        for (const auto& [key, q] : sys().network) {
            if (q.empty() || !sys().pool.contains(key.second)) continue;
            if (!first) first = key;
            if (!after || key > *after) return key;
        }
        return first;
    }

    void random(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        while (!out_of_budget()) {
            auto cs = choices();
            if (cs.empty()) return;
            take(cs[rng() % cs.size()]);
        }
    }

    void scripted(const std::vector<TransitionChoice>& script) {
        for (std::size_t i = 0; i < script.size() && !out_of_budget(); ++i) {
            const auto& c = script[i];
            const std::string where = "schedule entry " + std::to_string(i) + " (" + to_string(c) + ")";
            if (auto p = std::get_if<choice::Proc>(&c)) {
                while (!out_of_budget()) {
                    if (!proc_enabled(sys(), p->pid)) throw InapplicableChoice(where + " is not enabled");
                    if (take(c)) break;
                }
            } else {
                const auto& d = std::get<choice::Deliver>(c);
                auto q = sys().network.find({d.from, d.to});
                if (q == sys().network.end() || !sys().pool.contains(d.to)) {
                    throw InapplicableChoice(where + " is not enabled");
                }
                take(c);
            }
        }
    }

    void finish() {
        result_.trace = trace_from_events(result_.events);
        if (!choices().empty()) {
            result_.stop_reason = StopReason::Budget;
        } else {
            result_.stop_reason = sys().pool.empty() ? StopReason::Completed : StopReason::Stuck;
        }
    }

    const Program& prog_;
    const SchedulerConfig& sched_;
    std::size_t budget_;
    RunResult result_;
};

}  // namespace

RunResult run(const Program& prog, const std::string& entry, const SchedulerConfig& sched, std::size_t budget) {
    return Runner(prog, sched, budget, initial_system(prog, entry)).run();
}

}  // namespace kern
