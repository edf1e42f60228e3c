#include "kern/rdebug.hpp"

#include <algorithm>
#include <random>
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

const Expr* receive_in_focus(const LocalState& ls) {
    auto e = std::get_if<const Expr*>(&ls.focus);
    if (e && std::holds_alternative<ex::Receive>((*e)->node)) return *e;
    return nullptr;
}

const std::vector<LogAction>* omega_of(const RSystem& s, Pid p) {
    auto it = s.omega.seq.find(p);
    return it == s.omega.seq.end() || it->second.empty() ? nullptr : &it->second;
}

void prepend(RSystem& s, Pid p, LogAction a) {
    auto& seq = s.omega.seq[p];
    seq.insert(seq.begin(), std::move(a));
}

void drop_head(RSystem& s, Pid p) {
    auto it = s.omega.seq.find(p);
    it->second.erase(it->second.begin());
    if (it->second.empty()) s.omega.seq.erase(it);
}

void remove_event(RProcess& proc, const Action& a) {
    auto it = std::find(proc.events.rbegin(), proc.events.rend(), a);
    if (it == proc.events.rend()) throw std::logic_error("event " + to_string(a) + " missing on " + proc.pid.str());
    proc.events.erase(std::next(it).base());
}

RProcess& process(RSystem& s, Pid p) {
    auto it = s.pool.find(p);
    if (it == s.pool.end()) throw InapplicableChoice("no process " + p.str());
    return it->second;
}

const RProcess& process(const RSystem& s, Pid p) {
    auto it = s.pool.find(p);
    if (it == s.pool.end()) throw InapplicableChoice("no process " + p.str());
    return it->second;
}

const char* log_kind_name(LogKind k) {
    switch (k) {
        case LogKind::Spawn: return "spawn";
        case LogKind::Send: return "send";
        case LogKind::Rec: return "rec";
    }
    return "?";
}

LogKind kind_of(const LogAction& a) {
    return std::visit(overloaded{
                          [](const logact::Spawn&) { return LogKind::Spawn; },
                          [](const logact::Send&) { return LogKind::Send; },
                          [](const logact::Rec&) { return LogKind::Rec; },
                      },
                      a);
}

// What stepping a process would do, with the work already done.
struct Probe {
    ProcView view;
    std::optional<StepResult> step;
    std::optional<MatchResult> match;
};

Probe probe(const Program& prog, const RSystem& s, Pid pid) {
    Probe pr;
    const RProcess& proc = process(s, pid);
    if (proc.exited) {
        pr.view.status = ProcStatus::Exited;
        return pr;
    }
    const auto* om = omega_of(s, pid);
    auto divergent = [&](const std::string& actual) {
        pr.view.status = ProcStatus::Divergent;
        pr.view.reason = "log expects " + to_string(om->front()) + " but the process " + actual;
        return pr;
    };
    if (final(proc.ls)) {
        if (om) return divergent("has finished");
        pr.view.status = ProcStatus::Ready;
        pr.view.visible = true;
        return pr;
    }
    if (const Expr* rcv = receive_in_focus(proc.ls)) {
        pr.step = eval_step(prog, proc.ls);
        if (om) {
            auto r = std::get_if<logact::Rec>(&om->front());
            if (!r) return divergent("is at a receive");
            pr.match = matchrec(pr.step->next, *rcv, proc.mailbox, ByTag{r->tag});
            if (!pr.match) {
                pr.view.status = ProcStatus::Blocked;
                pr.view.awaited = r->tag;
                const bool present = std::any_of(proc.mailbox.begin(), proc.mailbox.end(),
                                                 [&](const Message& m) { return m.tag == r->tag; });
                pr.view.reason = present ? "message " + r->tag.str() + " matches no receive clause"
                                         : "waiting for message " + r->tag.str();
                return pr;
            }
        } else {
            pr.match = matchrec(pr.step->next, *rcv, proc.mailbox, OldestMatching{});
            if (!pr.match) {
                pr.view.status = ProcStatus::Blocked;
                pr.view.reason = "no message matches the receive";
                return pr;
            }
            pr.view.free_alloc = true;
        }
        pr.view.status = ProcStatus::Ready;
        pr.view.visible = true;
        return pr;
    }
    pr.step = step_or_crash(prog, proc.ls);
    const auto& lbl = pr.step->label;
    const bool spawn = std::holds_alternative<label::Spawn>(lbl);
    const bool send = std::holds_alternative<label::Send>(lbl);
    if (spawn || send) {
        if (om && kind_of(om->front()) != (spawn ? LogKind::Spawn : LogKind::Send)) {
            return divergent(spawn ? "spawns" : "sends");
        }
        pr.view.visible = true;
        pr.view.free_alloc = !om;
    }
    pr.view.status = ProcStatus::Ready;
    return pr;
}

bool deliverable(const RSystem& s, const choice::Deliver& d) {
    auto t = s.pool.find(d.to);
    if (t == s.pool.end() || t->second.exited) return false;
    auto q = s.network.find({d.from, d.to});
    if (q == s.network.end() || q->second.empty()) return false;
    if (!omega_of(s, d.to)) return true;
    auto a = admissible(s, d.to);
    return a && a->first == d.from;
}

std::string entry_state(const HistoryEntry& h) {
    return std::visit([](const auto& e) { return serialize(e.ls); }, h);
}

}  // namespace

bool silent(const HistoryEntry& h) {
    return std::holds_alternative<hist::Local>(h) || std::holds_alternative<hist::Self>(h);
}

std::string describe(const HistoryEntry& h) {
    return std::visit(overloaded{
                          [](const hist::Exit&) -> std::string { return "exit"; },
                          [](const hist::Local&) -> std::string { return "local"; },
                          [](const hist::Self&) -> std::string { return "self"; },
                          [](const hist::Spawn& e) { return "spawn(" + e.child.str() + ")"; },
                          [](const hist::Send& e) { return "send(" + e.msg.tag.str() + ")"; },
                          [](const hist::Rec& e) { return "rec(" + e.tag.str() + ")"; },
                      },
                      h);
}

const char* to_string(ProcStatus st) {
    switch (st) {
        case ProcStatus::Ready: return "running";
        case ProcStatus::Blocked: return "blocked";
        case ProcStatus::Divergent: return "divergent";
        case ProcStatus::Exited: return "exited";
    }
    return "?";
}

RSystem initial_rsystem(const Program& prog, const std::string& entry, const Log& log) {
    const FunDef* f = prog.find(entry, 0);
    if (!f) throw std::invalid_argument("no function " + entry + "/0");
    RSystem s;
    std::uint64_t max_pid = 1;
    std::uint64_t max_tag = 0;
    for (const auto& [p, as] : log.seq) {
        if (as.empty()) continue;
        s.omega.seq.emplace(p, as);
        max_pid = std::max(max_pid, p.id);
        for (const auto& a : as) {
            std::visit(overloaded{
                           [&](const logact::Spawn& x) { max_pid = std::max(max_pid, x.child.id); },
                           [&](const logact::Send& x) { max_tag = std::max(max_tag, x.tag.id); },
                           [&](const logact::Rec& x) { max_tag = std::max(max_tag, x.tag.id); },
                       },
                       a);
        }
    }
    s.next_pid = max_pid + 1;
    s.next_tag = max_tag + 1;
    RProcess root;
    root.pid = Pid{1};
    root.ls = initial_state(*f, {});
    s.pool.emplace(root.pid, std::move(root));
    return s;
}

std::optional<std::uint64_t> next_p(RSystem& s, Pid p, LogKind kind) {
    const auto* om = omega_of(s, p);
    if (!om) {
        switch (kind) {
            case LogKind::Spawn: return s.next_pid++;
            case LogKind::Send: return s.next_tag++;
            case LogKind::Rec: return std::nullopt;
        }
    }
    const LogAction& head = om->front();
    if (kind_of(head) != kind) {
        throw Divergence(p.str() + ": log expects " + to_string(head) + " but the process performs " +
                         log_kind_name(kind));
    }
    const std::uint64_t id = std::visit(overloaded{
                                            [](const logact::Spawn& x) { return x.child.id; },
                                            [](const logact::Send& x) { return x.tag.id; },
                                            [](const logact::Rec& x) { return x.tag.id; },
                                        },
                                        head);
    drop_head(s, p);
    return id;
}

std::optional<std::pair<Pid, Tag>> admissible(const RSystem& s, Pid p) {
    std::optional<Tag> needed;
    std::set<Tag> later;
    if (const auto* om = omega_of(s, p)) {
        for (const auto& a : *om) {
            if (auto r = std::get_if<logact::Rec>(&a)) {
                if (!needed) {
                    needed = r->tag;
                } else {
                    later.insert(r->tag);
                }
            }
        }
    }
    if (needed) {
        for (const auto& [key, q] : s.network) {
            if (key.second != p || q.empty()) continue;
            for (const auto& m : q) {
                if (m.tag == *needed) return std::make_pair(key.first, q.front().tag);
            }
        }
    }
    for (const auto& [key, q] : s.network) {
        if (key.second != p || q.empty()) continue;
        if (!later.contains(q.front().tag)) return std::make_pair(key.first, q.front().tag);
    }
    return std::nullopt;
}

ProcView inspect(const Program& prog, const RSystem& s, Pid p) { return probe(prog, s, p).view; }

std::vector<TransitionChoice> enabled_fwd(const Program& prog, const RSystem& s) {
    std::vector<TransitionChoice> out;
    for (const auto& [pid, proc] : s.pool) {
        if (probe(prog, s, pid).view.status == ProcStatus::Ready) out.push_back(choice::Proc{pid});
    }
    for (const auto& [key, q] : s.network) {
        choice::Deliver d{key.first, key.second};
        if (deliverable(s, d)) out.push_back(d);
    }
    return out;
}

std::optional<Event> fwd_step(const Program& prog, RSystem& s, const TransitionChoice& c) {
    if (auto d = std::get_if<choice::Deliver>(&c)) {
        if (!deliverable(s, *d)) throw InapplicableChoice(to_string(c) + " is not enabled");
        auto q = s.network.find({d->from, d->to});
        Message m = std::move(q->second.front());
        q->second.pop_front();
        if (q->second.empty()) s.network.erase(q);
        RProcess& target = s.pool.at(d->to);
        const Action a = act::Deliver{m.tag};
        target.deliveries.push_back({m.tag, d->from});
        target.mailbox.push_back(std::move(m));
        target.events.push_back(a);
        return Event{d->to, a};
    }

    const Pid pid = std::get<choice::Proc>(c).pid;
    Probe pr = probe(prog, s, pid);
    if (pr.view.status != ProcStatus::Ready) {
        throw InapplicableChoice(to_string(c) + " is not enabled: " + pid.str() + " is " +
                                 to_string(pr.view.status) + (pr.view.reason.empty() ? "" : " (" + pr.view.reason + ")"));
    }
    RProcess& proc = s.pool.at(pid);
    const bool fresh = !omega_of(s, pid);

    if (!pr.step) {  // final: rule Exit
        proc.history.push_back(hist::Exit{proc.ls, std::move(proc.mailbox)});
        proc.mailbox.clear();
        proc.exited = true;
        proc.events.push_back(act::Exit{});
        return Event{pid, act::Exit{}};
    }

    if (pr.match) {
        auto& m = *pr.match;
        next_p(s, pid, LogKind::Rec);
        proc.history.push_back(hist::Rec{proc.ls, m.tag, m.value, m.index, fresh});
        proc.ls = std::move(m.state);
        proc.mailbox = std::move(m.mailbox);
        proc.events.push_back(act::Rec{m.tag});
        return Event{pid, act::Rec{m.tag}};
    }

    auto& [lbl, next] = *pr.step;
    return std::visit(
        overloaded{
            [&](label::Local&) -> std::optional<Event> {
                proc.history.push_back(hist::Local{std::move(proc.ls)});
                proc.ls = std::move(next);
                return std::nullopt;
            },
            [&](label::Self&) -> std::optional<Event> {
                proc.history.push_back(hist::Self{std::move(proc.ls)});
                proc.ls = bind_future(std::move(next), Value::pid(pid));
                return std::nullopt;
            },
            [&](label::Spawn& sp) -> std::optional<Event> {
                const FunDef* f = prog.find(sp.fname, sp.args.size());
                if (!f) throw std::logic_error("unlinked function " + sp.fname);
                RSystem undo = s;
                const Pid child{*next_p(s, pid, LogKind::Spawn)};
                if (s.pool.contains(child)) {
                    s = std::move(undo);
                    throw Divergence(pid.str() + ": log spawns " + child.str() + " which already exists");
                }
                RProcess& parent = s.pool.at(pid);
                parent.history.push_back(hist::Spawn{std::move(parent.ls), child, fresh});
                parent.ls = bind_future(std::move(next), Value::pid(child));
                parent.events.push_back(act::Spawn{child});
                RProcess kid;
                kid.pid = child;
                kid.ls = initial_state(*f, sp.args);
                s.pool.emplace(child, std::move(kid));
                return Event{pid, act::Spawn{child}};
            },
            [&](label::Send& sd) -> std::optional<Event> {
                const Tag tag{*next_p(s, pid, LogKind::Send)};
                Message m{tag, std::move(sd.value)};
                s.network[{pid, sd.to}].push_back(m);
                proc.history.push_back(hist::Send{std::move(proc.ls), sd.to, std::move(m), fresh});
                proc.ls = std::move(next);
                proc.events.push_back(act::Send{tag, sd.to});
                return Event{pid, act::Send{tag, sd.to}};
            },
            [&](label::Rec&) -> std::optional<Event> { throw std::logic_error("receive outside focus check"); },
        },
        lbl);
}

// ---------------------------------------------------------------------------
// Backward semantics

namespace {

struct Need {
    std::optional<BackwardChoice> first;  // undo this first
    std::string reason;                   // what the dependency is
};

// The next undo that must happen before `c` can fire, or nothing if it can.
// Throws RequestError when there is nothing to undo at all.
Need dependency(const RSystem& s, const BackwardChoice& c) {
    if (auto u = std::get_if<bwd::UndoDeliver>(&c)) {
        const RProcess& proc = process(s, u->pid);
        if (proc.deliveries.empty()) throw RequestError(u->pid.str() + " has no delivery to undo");
        const DeliveryRecord& last = proc.deliveries.back();
        if (proc.exited) return {bwd::UndoProc{u->pid}, u->pid.str() + " has exited"};
        if (!proc.mailbox.empty() && proc.mailbox.back().tag == last.tag) return {};
        return {bwd::UndoProc{u->pid}, "message " + last.tag.str() + " was received by " + u->pid.str()};
    }
    const Pid pid = std::get<bwd::UndoProc>(c).pid;
    const RProcess& proc = process(s, pid);
    if (proc.history.empty()) throw RequestError(pid.str() + " has nothing to undo");
    const HistoryEntry& head = proc.history.back();
    if (auto sp = std::get_if<hist::Spawn>(&head)) {
        auto it = s.pool.find(sp->child);
        if (it == s.pool.end()) throw std::logic_error("spawned process " + sp->child.str() + " is missing");
        const RProcess& kid = it->second;
        const std::string why = sp->child.str() + " has acted";
        if (!kid.history.empty()) return {bwd::UndoProc{kid.pid}, why};
        if (!kid.deliveries.empty()) return {bwd::UndoDeliver{kid.pid}, why};
        for (const auto& [key, q] : s.network) {
            if (key.second == kid.pid && !q.empty()) {
                return {bwd::UndoProc{key.first}, "messages to " + kid.pid.str() + " are in transit"};
            }
        }
        return {};
    }
    if (auto sd = std::get_if<hist::Send>(&head)) {
        auto q = s.network.find({pid, sd->to});
        if (q != s.network.end() && !q->second.empty() && q->second.back().tag == sd->msg.tag) return {};
        const bool queued = q != s.network.end() && std::any_of(q->second.begin(), q->second.end(), [&](const Message& m) {
                                return m.tag == sd->msg.tag;
                            });
        if (queued) throw std::logic_error("message " + sd->msg.tag.str() + " is not at the tail of its queue");
        return {bwd::UndoDeliver{sd->to}, "message " + sd->msg.tag.str() + " was delivered to " + sd->to.str()};
    }
    return {};
}

std::optional<Event> undo_deliver(RSystem& s, Pid pid) {
    RProcess& proc = s.pool.at(pid);
    const DeliveryRecord d = proc.deliveries.back();
    proc.deliveries.pop_back();
    Message m = std::move(proc.mailbox.back());
    proc.mailbox.pop_back();
    s.network[{d.from, pid}].push_front(std::move(m));
    remove_event(proc, act::Deliver{d.tag});
    return Event{pid, act::Deliver{d.tag}};
}

std::optional<Event> undo_proc(RSystem& s, Pid pid) {
    RProcess& proc = s.pool.at(pid);
    HistoryEntry head = std::move(proc.history.back());
    proc.history.pop_back();
    const bool log_empty = !omega_of(s, pid);
    return std::visit(
        overloaded{
            [&](hist::Exit& e) -> std::optional<Event> {
                proc.ls = std::move(e.ls);
                proc.mailbox = std::move(e.q);
                proc.exited = false;
                remove_event(proc, act::Exit{});
                return Event{pid, act::Exit{}};
            },
            [&](hist::Local& e) -> std::optional<Event> {
                proc.ls = std::move(e.ls);
                return std::nullopt;
            },
            [&](hist::Self& e) -> std::optional<Event> {
                proc.ls = std::move(e.ls);
                return std::nullopt;
            },
            [&](hist::Spawn& e) -> std::optional<Event> {
                proc.ls = std::move(e.ls);
                remove_event(proc, act::Spawn{e.child});
                const Pid child = e.child;
                s.pool.erase(child);
                if (e.fresh && log_empty && child.id + 1 == s.next_pid && !omega_of(s, child)) {
                    --s.next_pid;
                } else {
                    prepend(s, pid, logact::Spawn{child});
                }
                return Event{pid, act::Spawn{child}};
            },
            [&](hist::Send& e) -> std::optional<Event> {
                auto q = s.network.find({pid, e.to});
                q->second.pop_back();
                if (q->second.empty()) s.network.erase(q);
                proc.ls = std::move(e.ls);
                remove_event(proc, act::Send{e.msg.tag, e.to});
                if (e.fresh && log_empty && e.msg.tag.id + 1 == s.next_tag) {
                    --s.next_tag;
                } else {
                    prepend(s, pid, logact::Send{e.msg.tag});
                }
                return Event{pid, act::Send{e.msg.tag, e.to}};
            },
            [&](hist::Rec& e) -> std::optional<Event> {
                if (e.index > proc.mailbox.size()) throw std::logic_error("receive index out of range");
                proc.mailbox.insert(proc.mailbox.begin() + static_cast<std::ptrdiff_t>(e.index), Message{e.tag, e.value});
                proc.ls = std::move(e.ls);
                remove_event(proc, act::Rec{e.tag});
                if (!(e.fresh && log_empty)) prepend(s, pid, logact::Rec{e.tag});
                return Event{pid, act::Rec{e.tag}};
            },
        },
        head);
}

// Undo without checking guards (callers establish them).
std::optional<Event> undo_raw(RSystem& s, const BackwardChoice& c) {
    if (auto u = std::get_if<bwd::UndoDeliver>(&c)) return undo_deliver(s, u->pid);
    return undo_proc(s, std::get<bwd::UndoProc>(c).pid);
}

std::string unit_action(const RSystem& s, const BackwardChoice& c) {
    if (auto u = std::get_if<bwd::UndoDeliver>(&c)) {
        const RProcess& proc = process(s, u->pid);
        if (proc.deliveries.empty()) return "deliver";
        return "deliver(" + proc.deliveries.back().tag.str() + ")";
    }
    const RProcess& proc = process(s, std::get<bwd::UndoProc>(c).pid);
    if (proc.history.empty()) return "nothing";
    if (silent(proc.history.back())) return "local steps";
    return describe(proc.history.back());
}

std::vector<Event> undo_unit_raw(RSystem& s, const BackwardChoice& c) {
    std::vector<Event> out;
    if (std::holds_alternative<bwd::UndoDeliver>(c)) {
        out.push_back(*undo_raw(s, c));
        return out;
    }
    const Pid pid = std::get<bwd::UndoProc>(c).pid;
    auto& h = s.pool.at(pid).history;
    if (!silent(h.back())) out.push_back(*undo_raw(s, c));
    while (!s.pool.at(pid).history.empty() && silent(s.pool.at(pid).history.back())) undo_raw(s, c);
    return out;
}

constexpr std::size_t plan_limit = 1000000;

// Undoes (on `sim`) whatever `c` depends on, recording each unit.
void make_undoable(RSystem& sim, const BackwardChoice& c, std::vector<UndoStep>& out) {
    while (true) {
        Need need = dependency(sim, c);
        if (!need.first) return;
        if (out.size() > plan_limit) throw std::logic_error("undo planning does not terminate");
        make_undoable(sim, *need.first, out);
        out.push_back({*need.first, unit_action(sim, *need.first)});
        undo_unit_raw(sim, *need.first);
    }
}

Pid pid_of(const BackwardChoice& c) {
    return std::visit([](const auto& x) { return x.pid; }, c);
}

}  // namespace

std::string UndoStep::describe() const { return "undo " + action + " on " + pid_of(choice).str(); }

bool undoable(const RSystem& s, const BackwardChoice& c) {
    try {
        return !dependency(s, c).first;
    } catch (const RequestError&) {
        return false;
    } catch (const InapplicableChoice&) {
        return false;
    }
}

UndoCheck can_undo(const Program&, const RSystem& s, const BackwardChoice& c) {
    UndoCheck out;
    Need need;
    try {
        need = dependency(s, c);
    } catch (const RequestError& e) {
        out.reason = e.what();
        return out;
    } catch (const InapplicableChoice& e) {
        out.reason = e.what();
        return out;
    }
    if (!need.first) {
        out.ok = true;
        return out;
    }
    out.reason = need.reason;
    RSystem sim = s;
    make_undoable(sim, c, out.prerequisites);
    return out;
}

std::optional<Event> bwd_step(const Program& prog, RSystem& s, const BackwardChoice& c) {
    auto check = can_undo(prog, s, c);
    if (!check.ok) {
        std::string msg = "cannot undo " + unit_action(s, c) + " on " + pid_of(c).str() + ": " + check.reason;
        throw UndoBlocked(msg, std::move(check.prerequisites));
    }
    return undo_raw(s, c);
}

std::vector<Event> bwd_unit(const Program& prog, RSystem& s, const BackwardChoice& c) {
    auto check = can_undo(prog, s, c);
    if (!check.ok) {
        std::string msg = "cannot undo " + unit_action(s, c) + " on " + pid_of(c).str() + ": " + check.reason;
        throw UndoBlocked(msg, std::move(check.prerequisites));
    }
    return undo_unit_raw(s, c);
}

Trace current_trace(const RSystem& s) {
    Trace t;
    for (const auto& [pid, proc] : s.pool) t.seq.emplace(pid, proc.events);
    return t;
}

std::string serialize(const RSystem& s) {
    std::ostringstream out;
    out << "next_pid=" << s.next_pid << " next_tag=" << s.next_tag << '\n';
    for (const auto& [pid, as] : s.omega.seq) {
        out << "log " << pid.str() << ':';
        for (const auto& a : as) out << ' ' << to_string(a);
        out << '\n';
    }
    for (const auto& [key, q] : s.network) {
        out << "queue " << key.first.str() << "->" << key.second.str() << ':';
        for (const auto& m : q) out << ' ' << m.tag.str() << '=' << to_string(m.value);
        out << '\n';
    }
    for (const auto& [pid, proc] : s.pool) {
        out << "proc " << pid.str() << (proc.exited ? " exited" : "") << " ls " << serialize(proc.ls) << '\n';
        out << "  mailbox:";
        for (const auto& m : proc.mailbox) out << ' ' << m.tag.str() << '=' << to_string(m.value);
        out << "\n  deliveries:";
        for (const auto& d : proc.deliveries) out << ' ' << d.tag.str() << '<' << d.from.str();
        out << "\n  events:";
        for (const auto& a : proc.events) out << ' ' << to_string(a);
        out << '\n';
        for (const auto& h : proc.history) {
            out << "  h " << describe(h);
            std::visit(overloaded{
                           [&](const hist::Exit& e) {
                               for (const auto& m : e.q) out << ' ' << m.tag.str() << '=' << to_string(m.value);
                           },
                           [&](const hist::Spawn& e) { out << (e.fresh ? " fresh" : ""); },
                           [&](const hist::Send& e) {
                               out << " to " << e.to.str() << ' ' << to_string(e.msg.value) << (e.fresh ? " fresh" : "");
                           },
                           [&](const hist::Rec& e) {
                               out << ' ' << to_string(e.value) << " at " << e.index << (e.fresh ? " fresh" : "");
                           },
                           [](const auto&) {},
                       },
                       h);
            out << " | " << entry_state(h) << '\n';
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Replay

std::string to_string(const ReplayProblem& p) {
    return std::visit(overloaded{
                          [](const StuckAtReceive& s) {
                              return "StuckAtReceive(" + s.pid.str() + ", " + s.tag.str() + ")" +
                                     (s.present ? ": the message matches no receive clause" : "");
                          },
                          [](const ReplayDivergence& d) {
                              return "Divergence(" + d.pid.str() + "): expected " + d.expected + ", actual " + d.actual;
                          },
                      },
                      p);
}

namespace {

class Replayer {
public:
    Replayer(const Program& prog, const ReplayOptions& opts, RSystem s) : prog_(prog), opts_(opts) {
        result_.sys = std::move(s);
    }

    ReplayResult run() {
        follow_log();
        result_.log_completed = result_.sys.omega.seq.empty();
        if (!result_.log_completed) diagnose();
        if (result_.log_completed && opts_.continue_after_log) free_run();
        finish();
        return std::move(result_);
    }

private:
    RSystem& sys() { return result_.sys; }
    bool out_of_budget() const { return transitions_ >= opts_.budget; }

    std::optional<Event> take(const TransitionChoice& c) {
        ++transitions_;
        auto ev = fwd_step(prog_, sys(), c);
        if (ev) result_.events.push_back(*ev);
        return ev;
    }

    // Round-robin over processes, one visible event per turn; processes
    // whose log is used up only take silent and exit steps.
    void follow_log() {
        bool progressed = true;
        while (progressed && !out_of_budget()) {
            progressed = false;
            std::vector<Pid> pids;
            for (const auto& [pid, proc] : sys().pool) pids.push_back(pid);
            for (Pid pid : pids) {
                while (!out_of_budget()) {
                    auto v = inspect(prog_, sys(), pid);
                    if (v.status != ProcStatus::Ready || v.free_alloc) break;
                    progressed = true;
                    if (take(choice::Proc{pid})) break;
                }
                if (out_of_budget()) return;
                if (!omega_of(sys(), pid) || sys().pool.at(pid).exited) continue;
                auto a = admissible(sys(), pid);
                if (a && needed(pid)) {
                    take(choice::Deliver{a->first, pid});
                    progressed = true;
                }
            }
        }
    }

    // True if the log of `pid` is waiting for a message that is queued.
    bool needed(Pid pid) {
        const auto* om = omega_of(sys(), pid);
        for (const auto& a : *om) {
            if (auto r = std::get_if<logact::Rec>(&a)) {
                for (const auto& [key, q] : sys().network) {
                    if (key.second != pid) continue;
                    for (const auto& m : q) {
                        if (m.tag == r->tag) return true;
                    }
                }
                return false;
            }
        }
        return false;
    }

    void diagnose() {
        std::optional<ReplayProblem> waiting;
        for (const auto& [pid, as] : sys().omega.seq) {
            if (!sys().pool.contains(pid)) continue;
            auto v = inspect(prog_, sys(), pid);
            if (v.status == ProcStatus::Divergent) {
                const auto& head = as.front();
                std::string actual = v.reason.substr(v.reason.find(" but the process ") + 17);
                result_.problem = ReplayDivergence{pid, to_string(head), actual};
                return;
            }
            if (v.status == ProcStatus::Blocked && v.awaited) {
                const bool present = v.reason.find("matches no") != std::string::npos;
                StuckAtReceive stuck{pid, *v.awaited, present};
                if (present) {
                    result_.problem = stuck;
                    return;
                }
                if (!waiting) waiting = stuck;
            }
        }
        result_.problem = waiting;
    }

    void free_run() {
        const auto& sched = opts_.scheduler;
        const bool eager = sched.delivery == Delivery::Eager;
        std::mt19937_64 rng(0);
        const auto* random = std::get_if<policy::Random>(&sched.policy);
        if (random) rng.seed(random->seed);
        std::size_t turn = 0;
        while (!out_of_budget()) {
            auto cs = enabled_fwd(prog_, sys());
            if (eager) {
                std::erase_if(cs, [](const TransitionChoice& c) { return std::holds_alternative<choice::Deliver>(c); });
            }
            if (cs.empty()) {
                if (!eager) return;
                // Under instant delivery a queue can only be left over behind the log.
                auto all = enabled_fwd(prog_, sys());
                if (all.empty()) return;
                take(all.front());
                continue;
            }
            const auto& c = random ? cs[rng() % cs.size()] : cs[turn++ % cs.size()];
            auto ev = take(c);
            if (eager && ev) {
                if (auto s = std::get_if<act::Send>(&ev->action)) {
                    choice::Deliver d{ev->pid, s->to};
                    if (!out_of_budget() && deliverable(sys(), d)) take(d);
                }
            }
        }
    }

    void finish() {
        result_.trace = current_trace(sys());
        if (out_of_budget() && !enabled_fwd(prog_, sys()).empty()) {
            result_.stop_reason = StopReason::Budget;
            return;
        }
        const bool all_exited = std::all_of(sys().pool.begin(), sys().pool.end(),
                                            [](const auto& kv) { return kv.second.exited; });
        result_.stop_reason = all_exited ? StopReason::Completed : StopReason::Stuck;
    }

    const Program& prog_;
    const ReplayOptions& opts_;
    ReplayResult result_;
    std::size_t transitions_ = 0;
};

}  // namespace

ReplayResult replay(const Program& prog, const std::string& entry, const Log& log, const ReplayOptions& opts) {
    return Replayer(prog, opts, initial_rsystem(prog, entry, log)).run();
}

// ---------------------------------------------------------------------------
// Requests

std::string to_string(const Target& t) {
    return std::visit(overloaded{
                          [](const target::SendOf& x) { return "send(" + x.tag.str() + ")"; },
                          [](const target::RecOf& x) { return "rec(" + x.tag.str() + ")"; },
                          [](const target::DeliverOf& x) { return "deliver(" + x.tag.str() + ")"; },
                          [](const target::SpawnOf& x) { return "spawn(" + x.pid.str() + ")"; },
                          [](const target::ExitOf& x) { return "exit(" + x.pid.str() + ")"; },
                          [](const target::Deadlock&) -> std::string { return "deadlock"; },
                          [](const target::OrphanFound&) -> std::string { return "orphan"; },
                          [](const target::LostFound&) -> std::string { return "lost"; },
                      },
                      t);
}

namespace {

bool event_hits(const Event& e, const Target& t) {
    return std::visit(
        overloaded{
            [&](const target::SendOf& x) {
                auto a = std::get_if<act::Send>(&e.action);
                return a && a->tag == x.tag;
            },
            [&](const target::RecOf& x) {
                auto a = std::get_if<act::Rec>(&e.action);
                return a && a->tag == x.tag;
            },
            [&](const target::DeliverOf& x) {
                auto a = std::get_if<act::Deliver>(&e.action);
                return a && a->tag == x.tag;
            },
            [&](const target::SpawnOf& x) {
                auto a = std::get_if<act::Spawn>(&e.action);
                return a && a->child == x.pid;
            },
            [&](const target::ExitOf& x) { return e.pid == x.pid && std::holds_alternative<act::Exit>(e.action); },
            [](const auto&) { return false; },
        },
        t);
}

bool is_symptom(const Target& t) {
    return std::holds_alternative<target::Deadlock>(t) || std::holds_alternative<target::OrphanFound>(t) ||
           std::holds_alternative<target::LostFound>(t);
}

// Symptoms that are already certain: a message left at an exited process
// (orphan) or queued for one (lost). At quiescence everything is certain.
bool symptom_settled(const RSystem& s, const Target& t, bool quiescent) {
    if (std::holds_alternative<target::Deadlock>(t)) {
        return quiescent && std::any_of(s.pool.begin(), s.pool.end(), [](const auto& kv) { return !kv.second.exited; });
    }
    if (std::holds_alternative<target::OrphanFound>(t)) {
        for (const auto& [pid, proc] : s.pool) {
            if (!proc.mailbox.empty() && quiescent) return true;
            if (proc.exited && !proc.history.empty()) {
                if (auto e = std::get_if<hist::Exit>(&proc.history.back()); e && !e->q.empty()) return true;
            }
        }
        return false;
    }
    if (std::holds_alternative<target::LostFound>(t)) {
        for (const auto& [key, q] : s.network) {
            if (q.empty()) continue;
            if (quiescent) return true;
            auto it = s.pool.find(key.second);
            if (it == s.pool.end() || it->second.exited) return true;
        }
    }
    return false;
}

bool in_past(const RSystem& s, const Target& t) {
    for (const auto& [pid, proc] : s.pool) {
        for (const auto& a : proc.events) {
            if (event_hits(Event{pid, a}, t)) return true;
        }
    }
    return false;
}

BackwardChoice default_undo(const RSystem& s, Pid pid) {
    const RProcess& proc = process(s, pid);
    if (!proc.history.empty() && silent(proc.history.back())) return bwd::UndoProc{pid};
    if (!proc.events.empty() && is_deliver(proc.events.back())) return bwd::UndoDeliver{pid};
    if (proc.history.empty()) {
        if (proc.deliveries.empty()) throw RequestError(pid.str() + " has nothing to undo");
        return bwd::UndoDeliver{pid};
    }
    return bwd::UndoProc{pid};
}

std::vector<UndoStep> undo_with_prereqs(RSystem& sim, const BackwardChoice& c) {
    std::vector<UndoStep> steps;
    make_undoable(sim, c, steps);
    steps.push_back({c, unit_action(sim, c)});
    undo_unit_raw(sim, c);
    return steps;
}

void append_events(std::vector<Event>& out, const std::vector<Event>& evs) { out.insert(out.end(), evs.begin(), evs.end()); }

class Forward {
public:
    Forward(const Program& prog, RSystem& s, std::size_t budget, StepReport& report)
        : prog_(prog), s_(s), budget_(budget), report_(report) {}

    // One round-robin turn: a unit of the next ready process, then one
    // admissible delivery. Returns false when nothing could move.
    bool turn(const Target& t, bool& hit) {
        bool moved = false;
        if (auto p = next_ready()) {
            moved = true;
            while (report_.transitions < budget_) {
                auto v = inspect(prog_, s_, *p);
                if (v.status != ProcStatus::Ready) break;
                auto ev = take(choice::Proc{*p});
                if (ev && event_hits(*ev, t)) hit = true;
                if (ev) break;
            }
            if (hit || settled(t, false)) return true;
        }
        if (report_.transitions >= budget_) return moved;
        if (auto d = next_delivery()) {
            moved = true;
            auto ev = take(*d);
            if (ev && event_hits(*ev, t)) hit = true;
        }
        return moved;
    }

    bool settled(const Target& t, bool quiescent) const { return is_symptom(t) && symptom_settled(s_, t, quiescent); }

private:
    std::optional<Event> take(const TransitionChoice& c) {
        ++report_.transitions;
        auto ev = fwd_step(prog_, s_, c);
        if (ev) report_.forward.push_back(*ev);
        return ev;
    }

    std::optional<Pid> next_ready() {
        std::optional<Pid> wrap;
        for (const auto& [pid, proc] : s_.pool) {
            if (inspect(prog_, s_, pid).status != ProcStatus::Ready) continue;
            if (!wrap) wrap = pid;
            if (pid > last_proc_) {
                last_proc_ = pid;
                return pid;
            }
        }
        if (wrap) last_proc_ = *wrap;
        return wrap;
    }

    std::optional<choice::Deliver> next_delivery() {
        std::optional<choice::Deliver> wrap;
        for (const auto& [pid, proc] : s_.pool) {
            if (proc.exited) continue;
            auto a = admissible(s_, pid);
            if (!a) continue;
            choice::Deliver d{a->first, pid};
            if (!wrap) wrap = d;
            if (pid > last_target_) {
                last_target_ = pid;
                return d;
            }
        }
        if (wrap) last_target_ = wrap->to;
        return wrap;
    }

    const Program& prog_;
    RSystem& s_;
    std::size_t budget_;
    StepReport& report_;
    Pid last_proc_{0};  // pids start at 1, so 0 means "none yet"
    Pid last_target_{0};
};

StepReport step_fwd(const Program& prog, RSystem& s, Pid pid, std::size_t budget) {
    StepReport report;
    const RProcess& proc = process(s, pid);
    if (proc.exited) throw RequestError(pid.str() + " has exited");
    while (report.transitions < budget) {
        auto v = inspect(prog, s, pid);
        if (v.status != ProcStatus::Ready) {
            if (report.transitions > 0) {
                report.note = pid.str() + " is " + to_string(v.status) + ": " + v.reason;
                return report;
            }
            if (auto a = admissible(s, pid)) {
                ++report.transitions;
                report.forward.push_back(*fwd_step(prog, s, choice::Deliver{a->first, pid}));
                return report;
            }
            throw RequestError(pid.str() + " cannot step: " + to_string(v.status) +
                               (v.reason.empty() ? "" : " (" + v.reason + ")"));
        }
        ++report.transitions;
        if (auto ev = fwd_step(prog, s, choice::Proc{pid})) {
            report.forward.push_back(*ev);
            return report;
        }
    }
    report.note = "budget exhausted";
    return report;
}

StepReport fwd_until(const Program& prog, RSystem& s, const Target& t, std::size_t budget) {
    if (!is_symptom(t) && in_past(s, t)) throw RequestError(to_string(t) + " has already happened");
    StepReport report;
    Forward fwd(prog, s, budget, report);
    bool hit = false;
    if (fwd.settled(t, enabled_fwd(prog, s).empty())) return report;
    while (report.transitions < budget) {
        const bool moved = fwd.turn(t, hit);
        if (hit) return report;
        const bool quiescent = !moved || enabled_fwd(prog, s).empty();
        if (fwd.settled(t, quiescent)) return report;
        if (quiescent) {
            report.reached = false;
            report.note = "nothing left to run before " + to_string(t);
            return report;
        }
    }
    report.reached = false;
    report.note = "budget exhausted before " + to_string(t);
    return report;
}

}  // namespace

std::vector<UndoStep> plan_rollback(const Program&, const RSystem& s, const Target& t) {
    if (is_symptom(t)) throw RequestError("going backward to " + to_string(t) + " is not supported");
    if (!in_past(s, t)) throw RequestError(to_string(t) + " is not in the current past");
    // Which undo removes the target, and which process it lives on.
    BackwardChoice c = bwd::UndoProc{Pid{0}};
    for (const auto& [pid, proc] : s.pool) {
        for (const auto& a : proc.events) {
            if (!event_hits(Event{pid, a}, t)) continue;
            c = is_deliver(a) ? BackwardChoice{bwd::UndoDeliver{pid}} : BackwardChoice{bwd::UndoProc{pid}};
        }
    }
    RSystem sim = s;
    std::vector<UndoStep> steps;
    while (in_past(sim, t)) {
        auto more = undo_with_prereqs(sim, c);
        steps.insert(steps.end(), more.begin(), more.end());
    }
    return steps;
}

StepReport perform(const Program& prog, RSystem& s, const Request& r, std::size_t budget) {
    RSystem work = s;
    auto run_undo = [&](const std::vector<UndoStep>& steps, StepReport& report) {
        for (const auto& st : steps) {
            append_events(report.backward, undo_unit_raw(work, st.choice));
            ++report.transitions;
        }
    };
    StepReport report = std::visit(
        overloaded{
            [&](const request::StepFwd& x) { return step_fwd(prog, work, x.pid, budget); },
            [&](const request::StepBwd& x) {
                StepReport rep;
                const BackwardChoice c = default_undo(work, x.pid);
                auto check = can_undo(prog, work, c);
                if (!check.ok) {
                    std::string msg = "cannot undo " + unit_action(work, c) + " on " + x.pid.str() + ": " + check.reason;
                    if (!check.prerequisites.empty()) {
                        msg += "; first";
                        for (std::size_t i = 0; i < check.prerequisites.size(); ++i) {
                            msg += (i ? ", " : " ") + check.prerequisites[i].describe();
                        }
                    }
                    throw RequestError(msg, std::move(check.prerequisites));
                }
                append_events(rep.backward, undo_unit_raw(work, c));
                rep.transitions = 1;
                return rep;
            },
            [&](const request::FwdUntil& x) { return fwd_until(prog, work, x.target, budget); },
            [&](const request::BwdUntil& x) {
                StepReport rep;
                run_undo(plan_rollback(prog, work, x.target), rep);
                return rep;
            },
            [&](const request::RollbackSteps& x) {
                StepReport rep;
                for (std::size_t i = 0; i < x.n; ++i) {
                    RSystem sim = work;
                    run_undo(undo_with_prereqs(sim, default_undo(work, x.pid)), rep);
                }
                return rep;
            },
        },
        r);
    s = std::move(work);
    return report;
}

}  // namespace kern
