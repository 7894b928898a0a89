// Semantic passes: include resolution, template instantiation, object
// merging into one flat object, semantic checking, and the opt-in
// dimensional-analysis check.
#pragma once

#include <functional>
#include <set>
#include <unordered_map>

#include "mm/model.hpp"
#include "mm/parser.hpp"

namespace mm {

// ---------------------------------------------------------------------------
// Structural equality (used for include name-clash detection)

inline bool base_expr_equal(const BaseExpr& a, const BaseExpr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case BaseExpr::Named: return a.name == b.name;
        case BaseExpr::Range: return expr_equal(a.lo, b.lo) && expr_equal(a.hi, b.hi);
        case BaseExpr::Enum: return a.labels == b.labels;
        case BaseExpr::Prod:
            if (a.factors.size() != b.factors.size()) return false;
            for (std::size_t i = 0; i < a.factors.size(); ++i)
                if (!base_expr_equal(a.factors[i], b.factors[i])) return false;
            return true;
    }
    return false;
}

inline bool attr_decl_equal(const AttributeDecl& a, const AttributeDecl& b) {
    if (a.name != b.name || a.display_name != b.display_name || a.cell_format != b.cell_format)
        return false;
    if (a.base.has_value() != b.base.has_value()) return false;
    if (a.base && !base_expr_equal(*a.base, *b.base)) return false;
    if (a.unit != b.unit) return false;
    return true;
}

inline bool equation_equal(const Equation& a, const Equation& b) {
    if (a.attr != b.attr || a.patterns.size() != b.patterns.size()) return false;
    for (std::size_t i = 0; i < a.patterns.size(); ++i) {
        const auto& p = a.patterns[i];
        const auto& q = b.patterns[i];
        if (p.is_all != q.is_all) return false;
        if (p.is_all) {
            if (p.var != q.var || p.constraint_op != q.constraint_op) return false;
            if (!p.constraint_op.empty() && !expr_equal(p.bound, q.bound)) return false;
        } else if (!expr_equal(p.point, q.point)) {
            return false;
        }
    }
    return expr_equal(a.rhs, b.rhs);
}

inline bool object_equal(const ObjPtr& a, const ObjPtr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    if (a->name != b->name) return false;
    if (a->attrs.size() != b->attrs.size() || a->equations.size() != b->equations.size() ||
        a->args.size() != b->args.size())
        return false;
    for (std::size_t i = 0; i < a->attrs.size(); ++i)
        if (!attr_decl_equal(a->attrs[i], b->attrs[i])) return false;
    for (std::size_t i = 0; i < a->equations.size(); ++i)
        if (!equation_equal(a->equations[i], b->equations[i])) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return object_equal(a->base, b->base) && object_equal(a->rhs, b->rhs);
}

// ---------------------------------------------------------------------------
// Constant evaluation

class ConstEval {
public:
    explicit ConstEval(const Program& p) : prog_(&p) {}

    // Evaluates a constant expression; bindings (quantifier variables or
    // template parameters) take precedence over named constants.
    std::optional<Decimal> eval(const ExprPtr& e,
                                const std::map<Ident, Decimal>* bindings = nullptr) {
        if (!e) return std::nullopt;
        switch (e->kind) {
            case Expr::Num: return e->num;
            case Expr::Neg: {
                auto v = eval(e->args[0], bindings);
                if (!v) return std::nullopt;
                return -*v;
            }
            case Expr::Bin: {
                auto l = eval(e->args[0], bindings);
                auto r = eval(e->args[1], bindings);
                if (!l || !r) return std::nullopt;
                if (e->text == "+") return *l + *r;
                if (e->text == "-") return *l - *r;
                if (e->text == "*") return *l * *r;
                if (e->text == "/") return Decimal::div(*l, *r);
                if (e->text == "^") {
                    if (!r->is_integer()) return std::nullopt;
                    return Decimal::pow(*l, r->to_int());
                }
                return std::nullopt;
            }
            case Expr::NameRef: {
                if (!e->args.empty()) return std::nullopt;
                if (bindings) {
                    auto it = bindings->find(e->text);
                    if (it != bindings->end()) return it->second;
                }
                return constant(e->text);
            }
            default: return std::nullopt;
        }
    }

    std::optional<Decimal> constant(const Ident& name) {
        auto it = memo_.find(name);
        if (it != memo_.end()) return it->second;
        const ConstantDef* def = prog_->find_constant(name);
        if (!def || visiting_.count(name)) return std::nullopt;
        visiting_.insert(name);
        auto v = eval(def->value);
        visiting_.erase(name);
        memo_[name] = v;
        return v;
    }

    std::optional<long long> eval_int(const ExprPtr& e,
                                      const std::map<Ident, Decimal>* bindings = nullptr) {
        auto v = eval(e, bindings);
        if (!v || !v->is_integer()) return std::nullopt;
        return v->to_int();
    }

private:
    const Program* prog_;
    std::unordered_map<Ident, std::optional<Decimal>> memo_;
    std::set<Ident> visiting_;
};

// ---------------------------------------------------------------------------
// Include resolution

// load(path, from_key) returns {canonical key, source text} or nullopt.
using IncludeLoad = std::function<std::optional<std::pair<std::string, std::string>>(
    const std::string& path, const std::string& from_key)>;

inline std::string include_basename(const std::string& key) {
    std::size_t slash = key.find_last_of("/\\");
    std::string name = slash == std::string::npos ? key : key.substr(slash + 1);
    if (name.size() > 3 && name.compare(name.size() - 3, 3, ".mm") == 0)
        name.resize(name.size() - 3);
    return name;
}

namespace detail {

template <typename T, typename Eq>
void merge_named(std::vector<std::pair<Ident, T>>& into, const std::vector<std::pair<Ident, T>>& from,
                 Eq eq, std::vector<Diagnostic>& diags, const char* what) {
    for (auto& [name, def] : from) {
        bool clash = false, present = false;
        for (auto& [n2, d2] : into)
            if (n2 == name) {
                present = true;
                clash = !eq(def, d2);
            }
        if (clash)
            diags.push_back(error_at(1, 1, std::string("Name clash: ") + what + " " + name +
                                               " has two different definitions"));
        else if (!present)
            into.emplace_back(name, def);
    }
}

inline void resolve_includes_impl(Program& p, const IncludeLoad& load, const std::string& from_key,
                                  std::map<std::string, Program>& memo,
                                  std::vector<std::string>& chain,
                                  std::vector<Diagnostic>& diags) {
    for (const std::string& path : p.includes) {
        auto loaded = load(path, from_key);
        if (!loaded) {
            diags.push_back(error_at(1, 1, "Include file not found: " + path));
            continue;
        }
        auto& [key, source] = *loaded;
        if (std::find(chain.begin(), chain.end(), key) != chain.end()) {
            std::string cycle;
            for (auto& k : chain) cycle += k + " -> ";
            diags.push_back(error_at(1, 1, "Include cycle: " + cycle + key));
            continue;
        }
        auto it = memo.find(key);
        if (it == memo.end()) {
            ParseResult parsed = parse_source(source);
            for (auto& d : parsed.diagnostics)
                diags.push_back(error_at(d.line, d.col, "In " + key + ": " + d.message));
            chain.push_back(key);
            resolve_includes_impl(parsed.program, load, key, memo, chain, diags);
            chain.pop_back();
            // Bind the included file's root object to the file's basename.
            std::string base = include_basename(key);
            if (parsed.program.root && !parsed.program.find_object(base))
                parsed.program.objects.emplace_back(base, parsed.program.root);
            it = memo.emplace(key, std::move(parsed.program)).first;
        }
        const Program& inc = it->second;
        for (auto& u : inc.units)
            if (std::find(p.units.begin(), p.units.end(), u) == p.units.end())
                p.units.push_back(u);
        merge_named(p.bases, inc.bases, base_expr_equal, diags, "base");
        merge_named(p.constants, inc.constants,
                    [](const ConstantDef& a, const ConstantDef& b) {
                        return expr_equal(a.value, b.value) && a.declared_unit == b.declared_unit;
                    },
                    diags, "constant");
        merge_named(p.templates, inc.templates,
                    [](const TemplateDef& a, const TemplateDef& b) {
                        if (a.params.size() != b.params.size()) return false;
                        for (std::size_t i = 0; i < a.params.size(); ++i)
                            if (a.params[i].name != b.params[i].name ||
                                a.params[i].type != b.params[i].type)
                                return false;
                        return object_equal(a.body, b.body);
                    },
                    diags, "template");
        merge_named(p.objects, inc.objects, object_equal, diags, "object");
    }
}

}  // namespace detail

inline void resolve_includes(Program& p, const IncludeLoad& load, const std::string& root_key,
                             std::vector<Diagnostic>& diags) {
    std::map<std::string, Program> memo;
    std::vector<std::string> chain{root_key};
    detail::resolve_includes_impl(p, load, root_key, memo, chain, diags);
}

// ---------------------------------------------------------------------------
// Base resolution

inline std::optional<Base> resolve_base_expr(const BaseExpr& be, const Program& p, ConstEval& ce,
                                             std::vector<Diagnostic>& diags, int depth = 0) {
    if (depth > 32) {
        diags.push_back(error_at(be.line, be.col, "Base definitions nest too deeply"));
        return std::nullopt;
    }
    switch (be.kind) {
        case BaseExpr::Named: {
            const BaseExpr* def = p.find_base(be.name);
            if (!def) {
                diags.push_back(error_at(be.line, be.col, "Undeclared identifier " + be.name));
                return std::nullopt;
            }
            return resolve_base_expr(*def, p, ce, diags, depth + 1);
        }
        case BaseExpr::Range: {
            auto lo = ce.eval_int(be.lo);
            auto hi = ce.eval_int(be.hi);
            if (!lo || !hi) {
                diags.push_back(error_at(be.line, be.col, "Base bounds must be integer constants"));
                return std::nullopt;
            }
            if (*lo > *hi) {
                diags.push_back(error_at(be.line, be.col, "Empty base " + std::to_string(*lo) +
                                                              ":" + std::to_string(*hi)));
                return std::nullopt;
            }
            return Base::int_range(*lo, *hi);
        }
        case BaseExpr::Enum: {
            std::set<std::string> seen;
            for (auto& l : be.labels)
                if (!seen.insert(l).second) {
                    diags.push_back(error_at(be.line, be.col, "Duplicate base label \"" + l + "\""));
                    return std::nullopt;
                }
            if (be.labels.empty()) {
                diags.push_back(error_at(be.line, be.col, "Empty base"));
                return std::nullopt;
            }
            return Base::enumeration(be.labels);
        }
        case BaseExpr::Prod: {
            std::vector<Base> factors;
            for (auto& f : be.factors) {
                auto b = resolve_base_expr(f, p, ce, diags, depth + 1);
                if (!b) return std::nullopt;
                factors.push_back(std::move(*b));
            }
            return Base::product(std::move(factors));
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Template instantiation

namespace detail {

inline ExprPtr subst_expr(const ExprPtr& e, const std::map<Ident, ExprPtr>& sub) {
    if (!e) return e;
    if (e->kind == Expr::NameRef && e->args.empty()) {
        auto it = sub.find(e->text);
        if (it != sub.end()) return it->second;
    }
    auto copy = std::make_shared<Expr>(*e);
    for (auto& a : copy->args) a = subst_expr(a, sub);
    return copy;
}

inline BaseExpr subst_base(const BaseExpr& b, const std::map<Ident, ExprPtr>& sub) {
    BaseExpr r = b;
    if (r.kind == BaseExpr::Range) {
        r.lo = subst_expr(r.lo, sub);
        r.hi = subst_expr(r.hi, sub);
    } else if (r.kind == BaseExpr::Prod) {
        for (auto& f : r.factors) f = subst_base(f, sub);
    }
    return r;
}

inline Equation subst_equation(const Equation& eq, const std::map<Ident, ExprPtr>& sub) {
    Equation r = eq;
    for (auto& p : r.patterns) {
        if (p.point) p.point = subst_expr(p.point, sub);
        if (p.bound) p.bound = subst_expr(p.bound, sub);
    }
    r.rhs = subst_expr(r.rhs, sub);
    return r;
}

inline ObjPtr subst_object(const ObjPtr& o, const std::map<Ident, ExprPtr>& sub) {
    if (!o) return o;
    auto copy = std::make_shared<ObjectExpr>(*o);
    for (auto& a : copy->attrs)
        if (a.base) a.base = subst_base(*a.base, sub);
    for (auto& e : copy->equations) e = subst_equation(e, sub);
    for (auto& a : copy->args) a = subst_expr(a, sub);
    copy->base = subst_object(copy->base, sub);
    copy->rhs = subst_object(copy->rhs, sub);
    return copy;
}

inline bool object_has_united_attr(const ObjPtr& o) {
    if (!o) return false;
    for (auto& a : o->attrs)
        if (a.unit) return true;
    return object_has_united_attr(o->base) || object_has_united_attr(o->rhs);
}

}  // namespace detail

inline ObjPtr instantiate_template(const Ident& name, const TemplateDef& def,
                                   const std::vector<ExprPtr>& args, int line, int col,
                                   ConstEval& ce, std::vector<Diagnostic>& diags) {
    if (args.size() != def.params.size()) {
        diags.push_back(error_at(line, col, "Template " + name + " expects " +
                                                std::to_string(def.params.size()) +
                                                " arguments, got " + std::to_string(args.size())));
        return nullptr;
    }
    if (detail::object_has_united_attr(def.body)) {
        diags.push_back(error_at(def.line, def.col,
                                 "Units on template attributes are not supported"));
        return nullptr;
    }
    std::map<Ident, ExprPtr> sub;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const TemplateParam& p = def.params[i];
        const ExprPtr& a = args[i];
        if (p.type == "integer") {
            auto v = ce.eval(a);
            if (!v || !v->is_integer()) {
                diags.push_back(error_at(a->line, a->col,
                                         "Template argument for " + p.name +
                                             " must be an integer constant"));
                return nullptr;
            }
            sub[p.name] = make_num(*v, a->line, a->col);
        } else {
            if (a->kind != Expr::Str) {
                diags.push_back(error_at(a->line, a->col,
                                         "Template argument for " + p.name + " must be a string"));
                return nullptr;
            }
            sub[p.name] = a;
        }
    }
    return detail::subst_object(def.body, sub);
}

// ---------------------------------------------------------------------------
// Object merging

struct FlatAttr {
    AttributeDecl decl;
    std::optional<Base> base;  // nullopt = scalar
};

struct FlatObject {
    std::vector<FlatAttr> attrs;
    std::vector<Equation> equations;

    const FlatAttr* find(const Ident& name) const {
        for (auto& a : attrs)
            if (a.decl.name == name) return &a;
        return nullptr;
    }
    std::size_t dims_of(const Ident& name) const {
        const FlatAttr* a = find(name);
        return a && a->base ? a->base->dims() : 0;
    }
};

namespace detail {

inline void add_attr(FlatObject& flat, const AttributeDecl& decl, const Program& p, ConstEval& ce,
                     bool same_literal, std::vector<Diagnostic>& diags) {
    std::optional<Base> base;
    if (decl.base) {
        base = resolve_base_expr(*decl.base, p, ce, diags);
        if (decl.base && !base) return;  // already diagnosed
    }
    for (auto& existing : flat.attrs) {
        if (existing.decl.name != decl.name) continue;
        if (same_literal) {
            diags.push_back(error_at(decl.line, decl.col,
                                     "Duplicate attribute " + decl.name + " in object"));
        } else if (!(existing.base == base)) {
            diags.push_back(error_at(decl.line, decl.col,
                                     "Base mismatch for attribute " + decl.name));
        }
        // Equal bases across merged operands: the same attribute, identified.
        return;
    }
    flat.attrs.push_back(FlatAttr{decl, std::move(base)});
}

inline void merge_into(FlatObject& flat, const ObjPtr& o, const Program& p, ConstEval& ce,
                       std::set<Ident>& visiting, std::vector<Diagnostic>& diags) {
    if (!o) return;
    switch (o->kind) {
        case ObjectExpr::Literal: {
            std::set<Ident> in_this_literal;
            for (auto& a : o->attrs) {
                bool dup_here = !in_this_literal.insert(a.name).second;
                add_attr(flat, a, p, ce, dup_here, diags);
            }
            for (auto& e : o->equations) flat.equations.push_back(e);
            break;
        }
        case ObjectExpr::NamedRef: {
            if (visiting.count(o->name)) {
                diags.push_back(error_at(o->line, o->col,
                                         "Cyclic object definition " + o->name));
                return;
            }
            ObjPtr def = p.find_object(o->name);
            if (!def) {
                diags.push_back(error_at(o->line, o->col, "Undeclared identifier " + o->name));
                return;
            }
            visiting.insert(o->name);
            merge_into(flat, def, p, ce, visiting, diags);
            visiting.erase(o->name);
            break;
        }
        case ObjectExpr::TemplateApply: {
            const TemplateDef* def = p.find_template(o->name);
            if (!def) {
                diags.push_back(error_at(o->line, o->col, "Undeclared identifier " + o->name));
                return;
            }
            ObjPtr inst = instantiate_template(o->name, *def, o->args, o->line, o->col, ce, diags);
            if (inst) merge_into(flat, inst, p, ce, visiting, diags);
            break;
        }
        case ObjectExpr::Plus: {
            merge_into(flat, o->base, p, ce, visiting, diags);
            if (o->rhs) merge_into(flat, o->rhs, p, ce, visiting, diags);
            std::set<Ident> in_this_literal;
            for (auto& a : o->attrs) {
                bool dup_here = !in_this_literal.insert(a.name).second;
                add_attr(flat, a, p, ce, dup_here, diags);
            }
            break;
        }
        case ObjectExpr::Where: {
            merge_into(flat, o->base, p, ce, visiting, diags);
            for (auto& e : o->equations) flat.equations.push_back(e);
            break;
        }
    }
}

}  // namespace detail

inline FlatObject merge_objects(const ObjPtr& root, const Program& p, ConstEval& ce,
                                std::vector<Diagnostic>& diags) {
    FlatObject flat;
    std::set<Ident> visiting;
    detail::merge_into(flat, root, p, ce, visiting, diags);
    return flat;
}

// ---------------------------------------------------------------------------
// Semantic checking

inline const std::set<std::string>& builtin_functions() {
    static const std::set<std::string> fns = {"IF",  "ISERR", "MIN",   "MAX",
                                              "SUM", "AVERAGE", "MATCH", "RAND"};
    return fns;
}

// Converts a point-pattern expression to a coordinate of the given factor.
inline std::optional<long long> pattern_coord(const Base& factor, const ExprPtr& e, ConstEval& ce,
                                              const std::map<Ident, Decimal>* bindings = nullptr) {
    if (factor.kind == Base::Enum) {
        if (e && e->kind == Expr::Str) {
            for (std::size_t i = 0; i < factor.labels.size(); ++i)
                if (factor.labels[i] == e->text) return (long long)i + 1;
            return std::nullopt;
        }
        auto v = ce.eval_int(e, bindings);
        if (v && *v >= 1 && *v <= (long long)factor.labels.size()) return *v;
        return std::nullopt;
    }
    auto v = ce.eval_int(e, bindings);
    if (v && *v >= factor.lo && *v <= factor.hi) return *v;
    return std::nullopt;
}

// Enumerates the points an equation's patterns cover; nullopt when a
// pattern is not constant-evaluable (diagnosed elsewhere).
inline std::optional<std::vector<Point>> equation_points(const Equation& eq, const Base* base,
                                                          ConstEval& ce) {
    std::size_t n = base ? base->dims() : 0;
    if (eq.patterns.size() != n) return std::nullopt;
    std::vector<std::vector<long long>> per_dim(n);
    for (std::size_t d = 0; d < n; ++d) {
        const Base& f = base->factor(d);
        const IndexPattern& p = eq.patterns[d];
        if (p.is_all) {
            std::optional<long long> bound;
            if (!p.constraint_op.empty()) {
                bound = ce.eval_int(p.bound);
                if (!bound) return std::nullopt;
            }
            long long lo = f.kind == Base::IntRange ? f.lo : 1;
            long long hi = f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
            for (long long c = lo; c <= hi; ++c) {
                bool ok = true;
                if (bound) {
                    if (p.constraint_op == ">") ok = c > *bound;
                    else if (p.constraint_op == "<") ok = c < *bound;
                    else if (p.constraint_op == ">=") ok = c >= *bound;
                    else if (p.constraint_op == "<=") ok = c <= *bound;
                }
                if (ok) per_dim[d].push_back(c);
            }
        } else {
            auto c = pattern_coord(f, p.point, ce);
            if (!c) return std::nullopt;
            per_dim[d].push_back(*c);
        }
    }
    std::vector<Point> points;
    Point cur(n);
    std::function<void(std::size_t)> rec = [&](std::size_t d) {
        if (d == n) { points.push_back(cur); return; }
        for (long long c : per_dim[d]) { cur[d] = c; rec(d + 1); }
    };
    rec(0);
    return points;
}

namespace detail {

struct RhsChecker {
    const FlatObject& flat;
    const Program& prog;
    ConstEval& ce;
    const std::set<Ident>& vars;
    std::vector<Diagnostic>& diags;

    void walk(const ExprPtr& e, bool call_arg = false) {
        if (!e) return;
        switch (e->kind) {
            case Expr::NameRef: {
                if (e->args.empty() && !e->bracketed) {
                    if (vars.count(e->text)) return;
                    const FlatAttr* a = flat.find(e->text);
                    if (a) {
                        if (a->base)
                            diags.push_back(error_at(e->line, e->col,
                                                     "Wrong number of subscripts for " + e->text));
                        return;
                    }
                    if (prog.find_constant(e->text)) return;
                    diags.push_back(error_at(e->line, e->col, "Undeclared identifier " + e->text));
                    return;
                }
                const FlatAttr* a = flat.find(e->text);
                if (!a) {
                    diags.push_back(error_at(e->line, e->col, "Undeclared identifier " + e->text));
                } else {
                    std::size_t dims = a->base ? a->base->dims() : 0;
                    if (e->args.size() != dims)
                        diags.push_back(error_at(e->line, e->col,
                                                 "Wrong number of subscripts for " + e->text));
                }
                for (auto& ix : e->args) walk(ix);
                return;
            }
            case Expr::RangeRef: {
                if (!call_arg)
                    diags.push_back(error_at(e->line, e->col,
                                             "range is only allowed as a function argument"));
                const FlatAttr* a = flat.find(e->text);
                if (!a) {
                    diags.push_back(error_at(e->line, e->col, "Undeclared identifier " + e->text));
                } else {
                    std::size_t dims = a->base ? a->base->dims() : 0;
                    if (e->args.size() > dims)
                        diags.push_back(error_at(e->line, e->col,
                                                 "Wrong number of subscripts for " + e->text));
                }
                for (auto& s : e->args)
                    for (auto& part : (s->kind == Expr::Span ? s->args : std::vector<ExprPtr>{s}))
                        walk(part);
                return;
            }
            case Expr::Call: {
                if (!builtin_functions().count(e->text))
                    diags.push_back(error_at(e->line, e->col, "Unknown function " + e->text));
                for (auto& a : e->args) walk(a, /*call_arg=*/true);
                return;
            }
            default:
                for (auto& a : e->args) walk(a);
                return;
        }
    }
};

}  // namespace detail

inline std::vector<Diagnostic> check_semantics(const FlatObject& flat, const Program& p,
                                               ConstEval& ce) {
    std::vector<Diagnostic> diags;

    for (const Equation& eq : flat.equations) {
        const FlatAttr* attr = flat.find(eq.attr);
        if (!attr) {
            diags.push_back(error_at(eq.line, eq.col, "Undeclared identifier " + eq.attr));
            continue;
        }
        std::size_t dims = attr->base ? attr->base->dims() : 0;
        if (eq.patterns.size() != dims) {
            diags.push_back(error_at(eq.line, eq.col, "Wrong number of subscripts for " + eq.attr));
            continue;
        }
        std::set<Ident> vars;
        for (const IndexPattern& pat : eq.patterns) {
            if (pat.is_all) {
                if (!vars.insert(pat.var).second)
                    diags.push_back(error_at(pat.line, pat.col,
                                             "Duplicate quantifier variable " + pat.var));
                if (p.find_constant(pat.var))
                    diags.push_back(warning_at(pat.line, pat.col,
                                               "Quantifier variable " + pat.var +
                                                   " shadows constant " + pat.var));
                if (!pat.constraint_op.empty() && !ce.eval_int(pat.bound))
                    diags.push_back(error_at(pat.line, pat.col,
                                             "Guard bound must be an integer constant"));
            } else if (pat.point) {
                // Point patterns must be constant (enum label or integer).
                if (pat.point->kind != Expr::Str && !ce.eval(pat.point))
                    diags.push_back(error_at(pat.line, pat.col,
                                             "Index pattern must be a constant"));
            }
        }
        detail::RhsChecker checker{flat, p, ce, vars, diags};
        checker.walk(eq.rhs);
    }

    // Overlap: two equations covering the same point of one attribute.
    std::map<Ident, std::vector<std::pair<const Equation*, std::set<Point>>>> coverage;
    for (const Equation& eq : flat.equations) {
        const FlatAttr* attr = flat.find(eq.attr);
        if (!attr) continue;
        long long size = attr->base ? base_cardinality(*attr->base) : 1;
        if (size > 100000) {
            diags.push_back(warning_at(eq.line, eq.col,
                                       "Attribute " + eq.attr +
                                           " is too large for overlap checking"));
            continue;
        }
        auto pts = equation_points(eq, attr->base ? &*attr->base : nullptr, ce);
        if (!pts) continue;
        auto& list = coverage[eq.attr];
        std::set<Point> set(pts->begin(), pts->end());
        for (auto& [other, covered] : list) {
            for (const Point& pt : set)
                if (covered.count(pt)) {
                    std::string where;
                    for (std::size_t d = 0; d < pt.size(); ++d)
                        where += (d ? "," : "") + std::to_string(pt[d]);
                    diags.push_back(error_at(eq.line, eq.col,
                                             "Equations for " + eq.attr +
                                                 " overlap at point " + where));
                    break;
                }
        }
        list.emplace_back(&eq, std::move(set));
    }

    // Layout slots must name known attributes, each at most once.
    if (p.layout) {
        std::set<Ident> placed;
        for (auto& row : p.layout->rows)
            for (auto& cell : row.cells) {
                if (cell.kind != LayoutCell::Slot) continue;
                if (!flat.find(cell.attr))
                    diags.push_back(error_at(1, 1, "Unknown attribute " + cell.attr + " in layout"));
                else if (!placed.insert(cell.attr).second)
                    diags.push_back(error_at(1, 1,
                                             "Attribute " + cell.attr +
                                                 " appears in more than one layout slot"));
            }
    }

    sort_diagnostics(diags);
    return diags;
}

// ---------------------------------------------------------------------------
// Dimensional analysis (opt-in)

namespace detail {

struct UnitChecker {
    const FlatObject& flat;
    const Program& prog;
    ConstEval& ce;
    std::vector<Diagnostic>& diags;
    std::map<Ident, std::optional<UnitExpr>> const_memo;

    std::string render(const UnitExpr& u) const {
        if (u.dimensionless()) return "1";
        return unit_to_string(u, prog.units);
    }

    std::optional<UnitExpr> constant_unit(const Ident& name) {
        auto it = const_memo.find(name);
        if (it != const_memo.end()) return it->second;
        const ConstantDef* def = prog.find_constant(name);
        if (!def) return UnitExpr{};
        const_memo[name] = UnitExpr{};  // cycle guard
        std::optional<UnitExpr> u;
        if (def->declared_unit) u = def->declared_unit;
        else u = synth(def->value);
        const_memo[name] = u;
        return u;
    }

    std::optional<UnitExpr> synth(const ExprPtr& e) {
        if (!e) return UnitExpr{};
        switch (e->kind) {
            case Expr::Num: return e->unit ? *e->unit : UnitExpr{};
            case Expr::Str: return UnitExpr{};
            case Expr::Neg: return synth(e->args[0]);
            case Expr::NameRef: {
                const FlatAttr* a = flat.find(e->text);
                if (a) {
                    for (auto& ix : e->args) synth(ix);
                    return a->decl.unit ? *a->decl.unit : UnitExpr{};
                }
                if (prog.find_constant(e->text)) return constant_unit(e->text);
                return UnitExpr{};  // quantifier variable
            }
            case Expr::RangeRef: {
                const FlatAttr* a = flat.find(e->text);
                return a && a->decl.unit ? *a->decl.unit : UnitExpr{};
            }
            case Expr::Bin: {
                auto l = synth(e->args[0]);
                auto r = synth(e->args[1]);
                if (!l || !r) return std::nullopt;
                const std::string& op = e->text;
                if (op == "*") return unit_mul(*l, *r);
                if (op == "/") return unit_div(*l, *r);
                if (op == "^") {
                    if (!r->dimensionless()) {
                        diags.push_back(error_at(e->line, e->col,
                                                 "Operator ^ expects something with no units "
                                                 "here, not units " + render(*r) + "."));
                        return std::nullopt;
                    }
                    if (l->dimensionless()) return UnitExpr{};
                    auto k = ce.eval_int(e->args[1]);
                    if (!k) {
                        diags.push_back(error_at(e->line, e->col,
                                                 "Operator ^ needs a constant exponent when its "
                                                 "base has units " + render(*l) + "."));
                        return std::nullopt;
                    }
                    return unit_pow(*l, *k);
                }
                // + - and comparisons require equal units.
                if (!(*l == *r)) {
                    diags.push_back(error_at(e->line, e->col,
                                             "The left-hand argument has units " + render(*l) +
                                                 ", but the right-hand argument has units " +
                                                 render(*r) + "."));
                    return std::nullopt;
                }
                return l;
            }
            case Expr::Call: {
                std::vector<std::optional<UnitExpr>> arg_units;
                for (auto& a : e->args) arg_units.push_back(synth(a));
                const std::string& fn = e->text;
                if (fn == "RAND" || fn == "ISERR" || fn == "MATCH") return UnitExpr{};
                if (fn == "IF") {
                    if (arg_units.size() == 3 && arg_units[1] && arg_units[2]) {
                        if (!(*arg_units[1] == *arg_units[2])) {
                            diags.push_back(error_at(e->line, e->col,
                                                     "The left-hand argument has units " +
                                                         render(*arg_units[1]) +
                                                         ", but the right-hand argument has units " +
                                                         render(*arg_units[2]) + "."));
                            return std::nullopt;
                        }
                        return arg_units[1];
                    }
                    return std::nullopt;
                }
                // MIN/MAX/SUM/AVERAGE: unit-uniform arguments, same result.
                std::optional<UnitExpr> common;
                for (auto& u : arg_units) {
                    if (!u) return std::nullopt;
                    if (!common) common = u;
                    else if (!(*common == *u)) {
                        diags.push_back(error_at(e->line, e->col,
                                                 "The left-hand argument has units " +
                                                     render(*common) +
                                                     ", but the right-hand argument has units " +
                                                     render(*u) + "."));
                        return std::nullopt;
                    }
                }
                return common ? common : std::optional<UnitExpr>(UnitExpr{});
            }
            default: return UnitExpr{};
        }
    }
};

// True when an expression contains only literals and arithmetic.
inline bool literal_only(const ExprPtr& e) {
    if (!e) return false;
    switch (e->kind) {
        case Expr::Num: case Expr::Str: return true;
        case Expr::Neg: return literal_only(e->args[0]);
        case Expr::Bin: return literal_only(e->args[0]) && literal_only(e->args[1]);
        default: return false;
    }
}

}  // namespace detail

inline std::vector<Diagnostic> check_units(const FlatObject& flat, const Program& p,
                                           ConstEval& ce) {
    std::vector<Diagnostic> diags;
    detail::UnitChecker checker{flat, p, ce, diags, {}};

    for (auto& [name, def] : p.constants) {
        auto u = checker.synth(def.value);
        if (!u || !def.declared_unit) continue;
        if (u->dimensionless() && !def.declared_unit->dimensionless()) {
            if (detail::literal_only(def.value)) {
                diags.push_back(warning_at(def.line, def.col,
                                           "Constant " + name + " is declared with units " +
                                               checker.render(*def.declared_unit) +
                                               ", but its value is a plain number"));
                continue;
            }
        }
        if (!(*u == *def.declared_unit))
            diags.push_back(error_at(def.line, def.col,
                                     "Constant " + name + " is declared with units " +
                                         checker.render(*def.declared_unit) +
                                         ", but its value has units " + checker.render(*u) + "."));
    }

    for (const Equation& eq : flat.equations) {
        auto rhs = checker.synth(eq.rhs);
        const FlatAttr* attr = flat.find(eq.attr);
        if (!rhs || !attr) continue;
        UnitExpr lhs = attr->decl.unit ? *attr->decl.unit : UnitExpr{};
        if (lhs == *rhs) continue;
        if (rhs->dimensionless() && detail::literal_only(eq.rhs)) {
            diags.push_back(warning_at(eq.line, eq.col,
                                       "Attribute " + eq.attr + " has units " +
                                           checker.render(lhs) +
                                           ", but is assigned a plain number"));
        } else {
            diags.push_back(error_at(eq.line, eq.col,
                                     "The left-hand argument has units " + checker.render(lhs) +
                                         ", but the right-hand argument has units " +
                                         checker.render(*rhs) + "."));
        }
    }

    sort_diagnostics(diags);
    return diags;
}

}  // namespace mm
