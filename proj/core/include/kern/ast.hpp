#pragma once

#include "kern/value.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kern {

struct SourcePos {
    int line = 1;
    int column = 1;
};

struct Pattern;
using PatternPtr = std::shared_ptr<const Pattern>;

namespace pat {
struct Lit {
    Value value;
};
/// `bind` is resolved at parse time: false means the variable was already
/// bound, so the pattern compares against its value instead of binding.
struct Var {
    std::string name;
    bool bind = true;
};
struct Wild {};
struct Tuple {
    std::vector<PatternPtr> elems;
};
struct List {
    std::vector<PatternPtr> elems;
    PatternPtr tail;  // null: the list has exactly elems.size() elements
};
}  // namespace pat

struct Pattern {
    std::variant<pat::Lit, pat::Var, pat::Wild, pat::Tuple, pat::List> node;
    SourcePos pos;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Clause {
    PatternPtr pattern;
    ExprPtr guard;  // may be null
    ExprPtr body;
};

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

const char* to_string(BinOp op);

// Nodes whose children are evaluated left to right into values before the
// node itself fires keep them in `operands`.
namespace ex {
struct Lit {
    Value value;
};
struct Var {
    std::string name;
};
struct Tuple {
    std::vector<ExprPtr> operands;
};
struct List {
    std::vector<ExprPtr> operands;  // elements, then the tail if has_tail
    bool has_tail = false;
};
struct Binary {
    BinOp op;
    std::vector<ExprPtr> operands;  // lhs, rhs
};
struct Let {
    PatternPtr pattern;
    ExprPtr bound;
    ExprPtr body;
};
struct Seq {
    ExprPtr first;
    ExprPtr second;
};
struct Case {
    ExprPtr scrutinee;
    std::vector<Clause> clauses;
};
struct Call {
    std::string fname;
    std::vector<ExprPtr> operands;
};
struct Spawn {
    std::string fname;
    std::vector<ExprPtr> operands;
};
struct Send {
    std::vector<ExprPtr> operands;  // target, message
};
struct Receive {
    std::vector<Clause> clauses;
};
struct Self {};
}  // namespace ex

struct Expr {
    std::variant<ex::Lit, ex::Var, ex::Tuple, ex::List, ex::Binary, ex::Let, ex::Seq, ex::Case, ex::Call,
                 ex::Spawn, ex::Send, ex::Receive, ex::Self>
        node;
    std::uint32_t id = 0;  // unique per program, used to serialize states
    SourcePos pos;
};

struct FunDef {
    std::string name;
    std::vector<std::string> params;
    ExprPtr body;
};

struct Program {
    std::map<std::pair<std::string, std::size_t>, FunDef> funs;
    std::uint32_t node_count = 0;

    const FunDef* find(const std::string& name, std::size_t arity) const {
        auto it = funs.find({name, arity});
        return it == funs.end() ? nullptr : &it->second;
    }
};

}  // namespace kern
