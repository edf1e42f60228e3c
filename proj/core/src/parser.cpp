#include "kern/parser.hpp"

#include <cctype>
#include <set>
#include <vector>

namespace kern {

const char* to_string(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "div";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "/=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "=<";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "and";
        case BinOp::Or: return "or";
    }
    return "?";
}

namespace {

enum class Tok { Int, Atom, Var, Sym, End };

struct Token {
    Tok kind;
    std::string text;
    std::int64_t number = 0;
    SourcePos pos;
};

const std::set<std::string> keywords = {"case", "of",    "end", "receive", "when", "let",
                                        "in",   "spawn", "self", "div",    "and",  "or"};

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    SourcePos pos;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++pos.line;
                pos.column = 1;
            } else {
                ++pos.column;
            }
        }
    };
    static const char* symbols[] = {"->", "=<", ">=", "==", "/=", "(", ")", "{", "}", "[", "]", ",",
                                    ".",  ";",  "!",  "|",  "=",  "<", ">", "+", "-", "*"};
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '%') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        const SourcePos start = pos;
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            std::int64_t n = 0;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
                n = n * 10 + (src[j] - '0');
                ++j;
            }
            out.push_back({Tok::Int, std::string(src.substr(i, j - i)), n, start});
            advance(j - i);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            std::string word(src.substr(i, j - i));
            Tok kind;
            if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
                kind = Tok::Var;
            } else if (keywords.contains(word)) {
                kind = Tok::Sym;
            } else {
                kind = Tok::Atom;
            }
            out.push_back({kind, std::move(word), 0, start});
            advance(j - i);
            continue;
        }
        bool matched = false;
        for (const char* s : symbols) {
            const std::string_view sym(s);
            if (src.substr(i, sym.size()) == sym) {
                out.push_back({Tok::Sym, std::string(sym), 0, start});
                advance(sym.size());
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError(start, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, "<end of input>", 0, pos});
    return out;
}

using Scope = std::set<std::string>;

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program program() {
        Program prog;
        while (peek().kind != Tok::End) {
            FunDef f = fundef();
            auto key = std::make_pair(f.name, f.params.size());
            if (prog.funs.contains(key)) {
                throw ParseError(last_fun_pos_, "function " + f.name + "/" + std::to_string(f.params.size()) +
                                                    " is defined twice");
            }
            prog.funs.emplace(key, std::move(f));
        }
        for (const auto& [name, arity, pos] : references_) {
            if (!prog.find(name, arity)) {
                throw ParseError(pos, "unknown function " + name + "/" + std::to_string(arity));
            }
        }
        prog.node_count = next_id_;
        return prog;
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(std::string_view sym) const { return peek().kind == Tok::Sym && peek().text == sym; }

    Token take() {
        Token t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }

    Token expect(std::string_view sym) {
        if (!at(sym)) {
            throw ParseError(peek().pos, "expected '" + std::string(sym) + "' but found '" + peek().text + "'");
        }
        return take();
    }

    [[noreturn]] void unexpected(const std::string& what) {
        throw ParseError(peek().pos, "expected " + what + " but found '" + peek().text + "'");
    }

    template <class Node>
    ExprPtr make(SourcePos pos, Node node) {
        auto e = std::make_shared<Expr>();
        e->node = std::move(node);
        e->id = next_id_++;
        e->pos = pos;
        return e;
    }

    FunDef fundef() {
        if (peek().kind != Tok::Atom) unexpected("a function name");
        const Token name = take();
        last_fun_pos_ = name.pos;
        expect("(");
        FunDef f;
        f.name = name.text;
        Scope scope;
        if (!at(")")) {
            while (true) {
                if (peek().kind != Tok::Var) unexpected("a parameter variable");
                const Token v = take();
                if (scope.contains(v.text)) throw ParseError(v.pos, "parameter " + v.text + " repeated");
                scope.insert(v.text);
                f.params.push_back(v.text);
                if (!at(",")) break;
                take();
            }
        }
        expect(")");
        expect("->");
        f.body = body(scope);
        expect(".");
        return f;
    }

    // Body: comma-separated expressions; `Pattern = Expr` binds for the rest.
    ExprPtr body(Scope scope) {
        const SourcePos start = peek().pos;
        if (match_ahead()) {
            Scope fresh;
            PatternPtr p = pattern(scope, fresh);
            expect("=");
            ExprPtr bound = expr(scope);
            scope.insert(fresh.begin(), fresh.end());
            ExprPtr rest;
            if (at(",")) {
                take();
                rest = body(scope);
            } else if (auto v = std::get_if<pat::Var>(&p->node); v && v->bind) {
                rest = make(start, ex::Var{v->name});
            } else {
                throw ParseError(peek().pos, "a match must be followed by another expression");
            }
            return make(start, ex::Let{p, bound, rest});
        }
        ExprPtr first = expr(scope);
        if (!at(",")) return first;
        take();
        return make(start, ex::Seq{first, body(scope)});
    }

    // True if the tokens from here up to a top-level '=' form a pattern.
    bool match_ahead() const {
        int depth = 0;
        for (std::size_t k = 0;; ++k) {
            const Token& t = peek(k);
            if (t.kind == Tok::End) return false;
            if (t.kind == Tok::Int || t.kind == Tok::Var || t.kind == Tok::Atom) {
                if (t.kind == Tok::Atom && peek(k + 1).kind == Tok::Sym && peek(k + 1).text == "(") return false;
                continue;
            }
            const std::string& s = t.text;
            if (s == "{" || s == "[") {
                ++depth;
            } else if (s == "}" || s == "]") {
                if (--depth < 0) return false;
            } else if (s == "=") {
                return depth == 0 && k > 0;
            } else if (s == ",") {
                if (depth == 0) return false;
            } else if (s != "|" && s != "-") {
                return false;
            }
        }
    }

    PatternPtr pattern(const Scope& scope, Scope& fresh) {
        auto p = std::make_shared<Pattern>();
        p->pos = peek().pos;
        const Token t = peek();
        if (t.kind == Tok::Int) {
            take();
            p->node = pat::Lit{Value::integer(t.number)};
        } else if (at("-") && peek(1).kind == Tok::Int) {
            take();
            p->node = pat::Lit{Value::integer(-take().number)};
        } else if (t.kind == Tok::Atom) {
            take();
            p->node = pat::Lit{Value::atom(t.text)};
        } else if (t.kind == Tok::Var) {
            take();
            if (t.text == "_") {
                p->node = pat::Wild{};
            } else if (fresh.contains(t.text)) {
                throw ParseError(t.pos, "variable " + t.text + " occurs twice in a pattern");
            } else if (scope.contains(t.text)) {
                p->node = pat::Var{t.text, false};
            } else {
                fresh.insert(t.text);
                p->node = pat::Var{t.text, true};
            }
        } else if (at("{")) {
            take();
            pat::Tuple tup;
            if (!at("}")) {
                while (true) {
                    tup.elems.push_back(pattern(scope, fresh));
                    if (!at(",")) break;
                    take();
                }
            }
            expect("}");
            p->node = std::move(tup);
        } else if (at("[")) {
            take();
            pat::List lst;
            if (!at("]")) {
                while (true) {
                    lst.elems.push_back(pattern(scope, fresh));
                    if (!at(",")) break;
                    take();
                }
                if (at("|")) {
                    take();
                    lst.tail = pattern(scope, fresh);
                }
            }
            expect("]");
            p->node = std::move(lst);
        } else {
            unexpected("a pattern");
        }
        return p;
    }

    ExprPtr expr(const Scope& scope) { return send(scope); }

    ExprPtr send(const Scope& scope) {
        const SourcePos start = peek().pos;
        ExprPtr lhs = disjunction(scope);
        if (!at("!")) return lhs;
        take();
        ExprPtr rhs = send(scope);
        return make(start, ex::Send{{lhs, rhs}});
    }

    ExprPtr binary(SourcePos pos, BinOp op, ExprPtr l, ExprPtr r) { return make(pos, ex::Binary{op, {l, r}}); }

    ExprPtr disjunction(const Scope& scope) {
        ExprPtr lhs = conjunction(scope);
        while (at("or")) {
            const auto pos = take().pos;
            lhs = binary(pos, BinOp::Or, lhs, conjunction(scope));
        }
        return lhs;
    }

    ExprPtr conjunction(const Scope& scope) {
        ExprPtr lhs = comparison(scope);
        while (at("and")) {
            const auto pos = take().pos;
            lhs = binary(pos, BinOp::And, lhs, comparison(scope));
        }
        return lhs;
    }

    ExprPtr comparison(const Scope& scope) {
        ExprPtr lhs = additive(scope);
        static const std::pair<const char*, BinOp> ops[] = {{"==", BinOp::Eq}, {"/=", BinOp::Ne},
                                                            {"=<", BinOp::Le}, {">=", BinOp::Ge},
                                                            {"<", BinOp::Lt},  {">", BinOp::Gt}};
        for (const auto& [sym, op] : ops) {
            if (at(sym)) {
                const auto pos = take().pos;
                return binary(pos, op, lhs, additive(scope));
            }
        }
        return lhs;
    }

    ExprPtr additive(const Scope& scope) {
        ExprPtr lhs = multiplicative(scope);
        while (at("+") || at("-")) {
            const Token t = take();
            lhs = binary(t.pos, t.text == "+" ? BinOp::Add : BinOp::Sub, lhs, multiplicative(scope));
        }
        return lhs;
    }

    ExprPtr multiplicative(const Scope& scope) {
        ExprPtr lhs = unary(scope);
        while (at("*") || at("div")) {
            const Token t = take();
            lhs = binary(t.pos, t.text == "*" ? BinOp::Mul : BinOp::Div, lhs, unary(scope));
        }
        return lhs;
    }

    ExprPtr unary(const Scope& scope) {
        if (at("-")) {
            const auto pos = take().pos;
            if (peek().kind == Tok::Int) return make(pos, ex::Lit{Value::integer(-take().number)});
            return binary(pos, BinOp::Sub, make(pos, ex::Lit{Value::integer(0)}), unary(scope));
        }
        return primary(scope);
    }

    std::vector<ExprPtr> args_until(const Scope& scope, std::string_view close) {
        std::vector<ExprPtr> out;
        if (at(close)) return out;
        while (true) {
            out.push_back(expr(scope));
            if (!at(",")) break;
            take();
        }
        return out;
    }

    ExprPtr primary(const Scope& scope) {
        const Token t = peek();
        switch (t.kind) {
            case Tok::Int:
                take();
                return make(t.pos, ex::Lit{Value::integer(t.number)});
            case Tok::Atom:
                take();
                if (at("(")) {
                    take();
                    auto args = args_until(scope, ")");
                    expect(")");
                    references_.push_back({t.text, args.size(), t.pos});
                    return make(t.pos, ex::Call{t.text, std::move(args)});
                }
                return make(t.pos, ex::Lit{Value::atom(t.text)});
            case Tok::Var:
                take();
                if (t.text == "_") throw ParseError(t.pos, "'_' cannot be used as an expression");
                if (!scope.contains(t.text)) throw ParseError(t.pos, "variable " + t.text + " is unbound");
                return make(t.pos, ex::Var{t.text});
            case Tok::End:
                unexpected("an expression");
            case Tok::Sym:
                break;
        }
        if (at("{")) {
            take();
            auto elems = args_until(scope, "}");
            expect("}");
            return make(t.pos, ex::Tuple{std::move(elems)});
        }
        if (at("[")) {
            take();
            ex::List lst;
            if (!at("]")) {
                lst.operands = args_until(scope, "]");
                if (at("|")) {
                    take();
                    lst.operands.push_back(expr(scope));
                    lst.has_tail = true;
                }
            }
            expect("]");
            return make(t.pos, std::move(lst));
        }
        if (at("(")) {
            take();
            ExprPtr e = body(scope);
            expect(")");
            return e;
        }
        if (at("case")) {
            take();
            ExprPtr scrutinee = expr(scope);
            expect("of");
            auto cs = clauses(scope);
            expect("end");
            return make(t.pos, ex::Case{scrutinee, std::move(cs)});
        }
        if (at("receive")) {
            take();
            auto cs = clauses(scope);
            expect("end");
            return make(t.pos, ex::Receive{std::move(cs)});
        }
        if (at("let")) {
            take();
            Scope fresh;
            PatternPtr p = pattern(scope, fresh);
            expect("=");
            ExprPtr bound = expr(scope);
            expect("in");
            Scope inner = scope;
            inner.insert(fresh.begin(), fresh.end());
            ExprPtr in = expr(inner);
            return make(t.pos, ex::Let{p, bound, in});
        }
        if (at("spawn")) {
            take();
            expect("(");
            if (peek().kind != Tok::Atom) unexpected("a function name");
            const Token fname = take();
            expect(",");
            expect("[");
            auto args = args_until(scope, "]");
            expect("]");
            expect(")");
            references_.push_back({fname.text, args.size(), fname.pos});
            return make(t.pos, ex::Spawn{fname.text, std::move(args)});
        }
        if (at("self")) {
            take();
            expect("(");
            expect(")");
            return make(t.pos, ex::Self{});
        }
        unexpected("an expression");
    }

    std::vector<Clause> clauses(const Scope& scope) {
        std::vector<Clause> out;
        while (true) {
            Scope fresh;
            Clause c;
            c.pattern = pattern(scope, fresh);
            Scope inner = scope;
            inner.insert(fresh.begin(), fresh.end());
            if (at("when")) {
                take();
                c.guard = expr(inner);
                check_guard(*c.guard);
            }
            expect("->");
            c.body = body(inner);
            out.push_back(std::move(c));
            if (!at(";")) break;
            take();
        }
        return out;
    }

    void check_guard(const Expr& e) {
        auto bad = [&](const char* what) {
            throw ParseError(e.pos, std::string(what) + " is not allowed in a guard");
        };
        std::visit(
            [&](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, ex::Tuple> || std::is_same_v<N, ex::List> ||
                              std::is_same_v<N, ex::Binary>) {
                    for (const auto& op : n.operands) check_guard(*op);
                } else if constexpr (std::is_same_v<N, ex::Call>) {
                    bad("a function call");
                } else if constexpr (std::is_same_v<N, ex::Send>) {
                    bad("a send");
                } else if constexpr (std::is_same_v<N, ex::Receive>) {
                    bad("a receive");
                } else if constexpr (std::is_same_v<N, ex::Spawn>) {
                    bad("spawn");
                } else if constexpr (std::is_same_v<N, ex::Self>) {
                    bad("self()");
                } else if constexpr (std::is_same_v<N, ex::Case> || std::is_same_v<N, ex::Let> ||
                                     std::is_same_v<N, ex::Seq>) {
                    bad("a compound expression");
                }
            },
            e.node);
    }

    struct Reference {
        std::string name;
        std::size_t arity;
        SourcePos pos;
    };

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::uint32_t next_id_ = 0;
    SourcePos last_fun_pos_;
    std::vector<Reference> references_;
};

}  // namespace

Program parse_program(std::string_view source) { return Parser(lex(source)).program(); }

}  // namespace kern
