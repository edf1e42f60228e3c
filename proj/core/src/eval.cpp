#include "kern/eval.hpp"

#include <sstream>
#include <stdexcept>

namespace kern {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Value boolean(bool b) { return Value::atom(b ? "true" : "false"); }

std::int64_t as_int(const Value& v, BinOp op) {
    if (auto n = std::get_if<std::int64_t>(&v.data)) return *n;
    throw EvalError(std::string("bad argument to '") + to_string(op) + "': " + to_string(v));
}

bool as_bool(const Value& v, BinOp op) {
    if (v.is_atom("true")) return true;
    if (v.is_atom("false")) return false;
    throw EvalError(std::string("bad argument to '") + to_string(op) + "': " + to_string(v));
}

Value apply(BinOp op, const Value& a, const Value& b) {
    std::int64_t r = 0;
    switch (op) {
        case BinOp::Add:
            if (__builtin_add_overflow(as_int(a, op), as_int(b, op), &r)) throw EvalError("integer overflow");
            return Value::integer(r);
        case BinOp::Sub:
            if (__builtin_sub_overflow(as_int(a, op), as_int(b, op), &r)) throw EvalError("integer overflow");
            return Value::integer(r);
        case BinOp::Mul:
            if (__builtin_mul_overflow(as_int(a, op), as_int(b, op), &r)) throw EvalError("integer overflow");
            return Value::integer(r);
        case BinOp::Div: {
            const auto x = as_int(a, op);
            const auto y = as_int(b, op);
            if (y == 0) throw EvalError("division by zero");
            if (x == INT64_MIN && y == -1) throw EvalError("integer overflow");
            return Value::integer(x / y);
        }
        case BinOp::Eq: return boolean(compare(a, b) == 0);
        case BinOp::Ne: return boolean(compare(a, b) != 0);
        case BinOp::Lt: return boolean(compare(a, b) < 0);
        case BinOp::Le: return boolean(compare(a, b) <= 0);
        case BinOp::Gt: return boolean(compare(a, b) > 0);
        case BinOp::Ge: return boolean(compare(a, b) >= 0);
        case BinOp::And: {
            const bool x = as_bool(a, op);
            return boolean(as_bool(b, op) && x);
        }
        case BinOp::Or: {
            const bool x = as_bool(a, op);
            return boolean(as_bool(b, op) || x);
        }
    }
    throw std::logic_error("unknown operator");
}

bool match(const Pattern& p, const Value& v, Env& env) {
    return std::visit(
        overloaded{
            [&](const pat::Lit& l) { return l.value == v; },
            [&](const pat::Wild&) { return true; },
            [&](const pat::Var& var) {
                if (var.bind) {
                    env.insert_or_assign(var.name, v);
                    return true;
                }
                auto it = env.find(var.name);
                return it != env.end() && it->second == v;
            },
            [&](const pat::Tuple& t) {
                auto tv = std::get_if<Tuple>(&v.data);
                if (!tv || tv->elems.size() != t.elems.size()) return false;
                for (std::size_t i = 0; i < t.elems.size(); ++i) {
                    if (!match(*t.elems[i], tv->elems[i], env)) return false;
                }
                return true;
            },
            [&](const pat::List& l) {
                auto lv = std::get_if<List>(&v.data);
                if (!lv) return false;
                const auto& xs = lv->elems;
                if (l.tail ? xs.size() < l.elems.size() : xs.size() != l.elems.size()) return false;
                for (std::size_t i = 0; i < l.elems.size(); ++i) {
                    if (!match(*l.elems[i], xs[i], env)) return false;
                }
                if (!l.tail) return true;
                return match(*l.tail, Value::list({xs.begin() + static_cast<std::ptrdiff_t>(l.elems.size()), xs.end()}),
                             env);
            },
        },
        p.node);
}

// Guards are pure, so they are evaluated in one go rather than stepped.
Value eval_pure(const Expr& e, const Env& env) {
    auto operands = [&](const std::vector<ExprPtr>& ops) {
        std::vector<Value> out;
        out.reserve(ops.size());
        for (const auto& op : ops) out.push_back(eval_pure(*op, env));
        return out;
    };
    return std::visit(
        overloaded{
            [&](const ex::Lit& l) { return l.value; },
            [&](const ex::Var& v) {
                auto it = env.find(v.name);
                if (it == env.end()) throw EvalError("unbound variable " + v.name);
                return it->second;
            },
            [&](const ex::Tuple& t) { return Value::tuple(operands(t.operands)); },
            [&](const ex::List& l) {
                auto vals = operands(l.operands);
                if (!l.has_tail) return Value::list(std::move(vals));
                auto tail = std::get_if<List>(&vals.back().data);
                if (!tail) throw EvalError("improper list tail " + to_string(vals.back()));
                std::vector<Value> out(vals.begin(), vals.end() - 1);
                out.insert(out.end(), tail->elems.begin(), tail->elems.end());
                return Value::list(std::move(out));
            },
            [&](const ex::Binary& b) {
                return apply(b.op, eval_pure(*b.operands[0], env), eval_pure(*b.operands[1], env));
            },
            [&](const auto&) -> Value { throw EvalError("expression not allowed in a guard"); },
        },
        e.node);
}

bool guard_holds(const Clause& c, const Env& env) {
    if (!c.guard) return true;
    try {
        return eval_pure(*c.guard, env).is_atom("true");
    } catch (const EvalError&) {
        return false;
    }
}

// Env after matching `v` against the first clause whose pattern and guard accept it.
std::optional<std::pair<const Clause*, Env>> select(const std::vector<Clause>& clauses, const Value& v,
                                                    const Env& env) {
    for (const auto& c : clauses) {
        Env extended = env;
        if (match(*c.pattern, v, extended) && guard_holds(c, extended)) return std::make_pair(&c, std::move(extended));
    }
    return std::nullopt;
}

const std::vector<ExprPtr>* operands_of(const Expr& e) {
    return std::visit(
        overloaded{
            [](const ex::Tuple& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const ex::List& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const ex::Binary& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const ex::Call& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const ex::Spawn& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const ex::Send& n) -> const std::vector<ExprPtr>* { return &n.operands; },
            [](const auto&) -> const std::vector<ExprPtr>* { return nullptr; },
        },
        e.node);
}

// The node's operands are all values: perform the node's own step.
EvalLabel fire(const Program& prog, LocalState& ls, const Expr& node, std::vector<Value> vals) {
    return std::visit(
        overloaded{
            [&](const ex::Tuple&) -> EvalLabel {
                ls.focus = Value::tuple(std::move(vals));
                return label::Local{};
            },
            [&](const ex::List& l) -> EvalLabel {
                if (l.has_tail) {
                    auto tail = std::get_if<List>(&vals.back().data);
                    if (!tail) throw EvalError("improper list tail " + to_string(vals.back()));
                    std::vector<Value> out(vals.begin(), vals.end() - 1);
                    out.insert(out.end(), tail->elems.begin(), tail->elems.end());
                    ls.focus = Value::list(std::move(out));
                } else {
                    ls.focus = Value::list(std::move(vals));
                }
                return label::Local{};
            },
            [&](const ex::Binary& b) -> EvalLabel {
                ls.focus = apply(b.op, vals[0], vals[1]);
                return label::Local{};
            },
            [&](const ex::Call& c) -> EvalLabel {
                const FunDef* f = prog.find(c.fname, vals.size());
                if (!f) throw EvalError("undefined function " + c.fname + "/" + std::to_string(vals.size()));
                Env callee;
                for (std::size_t i = 0; i < vals.size(); ++i) callee.emplace(f->params[i], std::move(vals[i]));
                // A call in tail position reuses the pending return frame.
                if (ls.stack.empty() || !std::holds_alternative<frame::Return>(ls.stack.back())) {
                    ls.stack.push_back(frame::Return{std::move(ls.env)});
                }
                ls.env = std::move(callee);
                ls.focus = f->body.get();
                return label::Local{};
            },
            [&](const ex::Spawn& s) -> EvalLabel {
                ls.focus = Future{};
                return label::Spawn{s.fname, std::move(vals)};
            },
            [&](const ex::Send&) -> EvalLabel {
                auto to = std::get_if<Pid>(&vals[0].data);
                if (!to) throw EvalError("bad send target " + to_string(vals[0]));
                ls.focus = vals[1];
                return label::Send{vals[1], *to};
            },
            [&](const auto&) -> EvalLabel { throw std::logic_error("node has no operands"); },
        },
        node.node);
}

EvalLabel step_expr(const Program& prog, LocalState& ls, const Expr& e) {
    if (const auto* ops = operands_of(e)) {
        if (ops->empty()) return fire(prog, ls, e, {});
        ls.stack.push_back(frame::Args{&e, {}});
        ls.focus = ops->front().get();
        return label::Local{};
    }
    return std::visit(
        overloaded{
            [&](const ex::Lit& l) -> EvalLabel {
                ls.focus = l.value;
                return label::Local{};
            },
            [&](const ex::Var& v) -> EvalLabel {
                auto it = ls.env.find(v.name);
                if (it == ls.env.end()) throw EvalError("unbound variable " + v.name);
                ls.focus = it->second;
                return label::Local{};
            },
            [&](const ex::Let& l) -> EvalLabel {
                ls.stack.push_back(frame::LetBody{&e});
                ls.focus = l.bound.get();
                return label::Local{};
            },
            [&](const ex::Seq& s) -> EvalLabel {
                ls.stack.push_back(frame::SeqNext{&e});
                ls.focus = s.first.get();
                return label::Local{};
            },
            [&](const ex::Case& c) -> EvalLabel {
                ls.stack.push_back(frame::CaseSelect{&e});
                ls.focus = c.scrutinee.get();
                return label::Local{};
            },
            [&](const ex::Receive&) -> EvalLabel {
                ls.focus = Future{};
                return label::Rec{&e};
            },
            [&](const ex::Self&) -> EvalLabel {
                ls.focus = Future{};
                return label::Self{};
            },
            [&](const auto&) -> EvalLabel { throw std::logic_error("unexpected node"); },
        },
        e.node);
}

EvalLabel step_value(const Program& prog, LocalState& ls, Value v) {
    Frame top = std::move(ls.stack.back());
    ls.stack.pop_back();
    return std::visit(
        overloaded{
            [&](frame::Args& a) -> EvalLabel {
                a.done.push_back(std::move(v));
                const auto& ops = *operands_of(*a.node);
                if (a.done.size() < ops.size()) {
                    ls.focus = ops[a.done.size()].get();
                    ls.stack.push_back(std::move(a));
                    return label::Local{};
                }
                return fire(prog, ls, *a.node, std::move(a.done));
            },
            [&](frame::LetBody& f) -> EvalLabel {
                const auto& let = std::get<ex::Let>(f.node->node);
                Env extended = ls.env;
                if (!match(*let.pattern, v, extended)) throw EvalError("no match of right hand side " + to_string(v));
                ls.env = std::move(extended);
                ls.focus = let.body.get();
                return label::Local{};
            },
            [&](frame::SeqNext& f) -> EvalLabel {
                ls.focus = std::get<ex::Seq>(f.node->node).second.get();
                return label::Local{};
            },
            [&](frame::CaseSelect& f) -> EvalLabel {
                const auto& c = std::get<ex::Case>(f.node->node);
                auto sel = select(c.clauses, v, ls.env);
                if (!sel) throw EvalError("no case clause matching " + to_string(v));
                ls.env = std::move(sel->second);
                ls.focus = sel->first->body.get();
                return label::Local{};
            },
            [&](frame::Return& f) -> EvalLabel {
                ls.env = std::move(f.saved);
                ls.focus = std::move(v);
                return label::Local{};
            },
        },
        top);
}

}  // namespace

LocalState initial_state(const FunDef& fun, const std::vector<Value>& args) {
    if (args.size() != fun.params.size()) {
        throw EvalError("function " + fun.name + "/" + std::to_string(fun.params.size()) + " called with " +
                        std::to_string(args.size()) + " arguments");
    }
    LocalState ls;
    for (std::size_t i = 0; i < args.size(); ++i) ls.env.emplace(fun.params[i], args[i]);
    ls.focus = fun.body.get();
    return ls;
}

bool final(const LocalState& ls) { return ls.stack.empty() && std::holds_alternative<Value>(ls.focus); }

bool awaiting_future(const LocalState& ls) { return std::holds_alternative<Future>(ls.focus); }

const Value& result(const LocalState& ls) {
    if (!final(ls)) throw std::logic_error("result of a non-final state");
    return std::get<Value>(ls.focus);
}

StepResult eval_step(const Program& prog, const LocalState& ls) {
    if (final(ls)) throw std::logic_error("eval_step on a final state");
    if (awaiting_future(ls)) throw std::logic_error("eval_step on a state awaiting a future");
    LocalState next = ls;
    EvalLabel l = std::holds_alternative<Value>(next.focus)
                      ? step_value(prog, next, std::get<Value>(std::move(next.focus)))
                      : step_expr(prog, next, *std::get<const Expr*>(next.focus));
    return {std::move(l), std::move(next)};
}

StepResult step_or_crash(const Program& prog, const LocalState& ls) {
    try {
        return eval_step(prog, ls);
    } catch (const EvalError& err) {
        LocalState crashed;
        crashed.env = ls.env;
        crashed.focus = Value::atom("crashed");
        crashed.crash = err.what();
        return {label::Local{}, std::move(crashed)};
    }
}

LocalState bind_future(LocalState ls, Value v) {
    if (!awaiting_future(ls)) throw std::logic_error("no future to bind");
    ls.focus = std::move(v);
    return ls;
}

std::optional<MatchResult> matchrec(const LocalState& ls, const Expr& receive, const Mailbox& q, MatchMode mode) {
    if (!awaiting_future(ls)) throw std::logic_error("matchrec on a state without a future");
    const auto& clauses = std::get<ex::Receive>(receive.node).clauses;
    const auto* by_tag = std::get_if<ByTag>(&mode);
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (by_tag && q[i].tag != by_tag->tag) continue;
        if (auto sel = select(clauses, q[i].value, ls.env)) {
            MatchResult r{ls, q, q[i].tag, q[i].value, i};
            r.state.env = std::move(sel->second);
            r.state.focus = sel->first->body.get();
            r.mailbox.erase(r.mailbox.begin() + static_cast<std::ptrdiff_t>(i));
            return r;
        }
        if (by_tag) return std::nullopt;
    }
    return std::nullopt;
}

std::string serialize(const LocalState& ls) {
    std::ostringstream out;
    auto env = [&](const Env& e) {
        out << '{';
        for (const auto& [k, v] : e) out << k << '=' << to_string(v) << ';';
        out << '}';
    };
    env(ls.env);
    std::visit(overloaded{
                   [&](const Expr* e) { out << " e" << e->id; },
                   [&](const Value& v) { out << " v" << to_string(v); },
                   [&](const Future&) { out << " k"; },
               },
               ls.focus);
    for (const auto& f : ls.stack) {
        std::visit(overloaded{
                       [&](const frame::Args& a) {
                           out << " A" << a.node->id << '[';
                           for (const auto& v : a.done) out << to_string(v) << ',';
                           out << ']';
                       },
                       [&](const frame::LetBody& l) { out << " L" << l.node->id; },
                       [&](const frame::SeqNext& s) { out << " S" << s.node->id; },
                       [&](const frame::CaseSelect& c) { out << " C" << c.node->id; },
                       [&](const frame::Return& r) {
                           out << " R";
                           env(r.saved);
                       },
                   },
                   f);
    }
    if (ls.crash) out << " crash:" << *ls.crash;
    return out.str();
}

}  // namespace kern
