// Decompilation: lifting a cellmap to a trivial attribute-per-cell model,
// scripted transformations (strip-headers, auto-static, rename, rebase,
// roll), spreadsheet analysis, and the MM pretty-printer.
#pragma once

#include <climits>
#include <sstream>

#include "mm/codegen.hpp"

namespace mm {

// ---------------------------------------------------------------------------
// Decompiled model

struct DecompAttr {
    Ident name;
    AttrAlloc alloc;  // alloc.base is the attribute's base; scalars have none
    std::optional<std::string> format;
};

struct DecompModel {
    std::vector<DecompAttr> attrs;
    std::vector<Equation> equations;
    std::vector<std::pair<CellAddr, std::string>> statics;  // header/static text

    const DecompAttr* find(const Ident& name) const {
        for (auto& a : attrs)
            if (a.name == name) return &a;
        return nullptr;
    }
};

inline Ident cell_attr_name(CellAddr a) {
    std::string s = a1_name(a);
    for (auto& c : s) c = char(std::tolower((unsigned char)c));
    return s;
}

namespace detail {

inline ExprPtr lift_expr(const ExprPtr& e) {
    if (!e) return e;
    if (e->kind == Expr::Cell)
        return make_name(cell_attr_name(e->addr), {}, false, e->line, e->col);
    auto copy = std::make_shared<Expr>(*e);
    for (auto& a : copy->args) a = lift_expr(a);
    return copy;
}

}  // namespace detail

// One scalar attribute per cell, named after the cell (b2, c17, ...).
// Header cells become static text; cells that are referenced but absent
// become blank attributes so their addresses survive recompilation.
inline DecompModel lift_trivial(const CellMap& map) {
    DecompModel model;
    std::set<CellAddr> wanted;
    for (auto& [addr, entry] : map.cells)
        if (!entry.is_header) wanted.insert(addr);
    DependencyGraph g = build_dependency_graph(map);
    for (CellAddr a : g.inputs)
        if (!map.cells.count(a)) wanted.insert(a);

    for (auto& [addr, entry] : map.cells)
        if (entry.is_header) {
            std::string text = entry.content == CellEntry::TextConst ? entry.text
                               : entry.content == CellEntry::NumberConst ? entry.num.to_string()
                                                                         : "";
            model.statics.emplace_back(addr, text);
        }

    for (CellAddr addr : wanted) {
        DecompAttr attr;
        attr.name = cell_attr_name(addr);
        attr.alloc.origin = addr;
        auto it = map.cells.find(addr);
        if (it != map.cells.end()) {
            const CellEntry& entry = it->second;
            attr.format = entry.format;
            Equation eq;
            eq.attr = attr.name;
            switch (entry.content) {
                case CellEntry::NumberConst: eq.rhs = make_num(entry.num); break;
                case CellEntry::TextConst: eq.rhs = make_str(entry.text); break;
                case CellEntry::Formula: eq.rhs = detail::lift_expr(entry.formula); break;
            }
            model.equations.push_back(std::move(eq));
        }
        model.attrs.push_back(std::move(attr));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Transform scripts

struct TransformCommand {
    std::string op;
    std::vector<std::string> args;
    int line = 0;
};

struct TransformScript {
    std::vector<TransformCommand> commands;
};

// Script grammar, one command per line ('#' starts a comment):
//   strip-headers
//   auto-static
//   rename <old> <new>
//   rebase <new> [lo:hi] ([lo:hi]) from <cell1>..<cellN> (column|row)
//   roll <attr> (<var>)
//   auto-roll
inline TransformScript parse_transform_script(const std::string& text,
                                              std::vector<Diagnostic>& diags) {
    TransformScript script;
    int lineno = 0;
    for (const std::string& raw : split_lines(text)) {
        ++lineno;
        std::string line = raw.substr(0, raw.find('#'));
        std::istringstream in(line);
        std::vector<std::string> words;
        std::string w;
        while (in >> w) words.push_back(w);
        if (words.empty()) continue;
        TransformCommand cmd;
        cmd.op = words[0];
        cmd.args.assign(words.begin() + 1, words.end());
        cmd.line = lineno;
        static const std::set<std::string> ops = {"strip-headers", "auto-static", "rename",
                                                  "rebase", "roll", "auto-roll"};
        if (!ops.count(cmd.op)) {
            diags.push_back(error_at(lineno, 1, "Unknown transform '" + cmd.op + "'"));
            continue;
        }
        script.commands.push_back(std::move(cmd));
    }
    return script;
}

namespace detail {

inline ExprPtr rewrite_names(const ExprPtr& e,
                             const std::function<ExprPtr(const ExprPtr&)>& hook) {
    if (!e) return e;
    if (e->kind == Expr::NameRef || e->kind == Expr::RangeRef || e->kind == Expr::CellRange) {
        ExprPtr r = hook(e);
        if (r && r != e) return r;
    }
    bool changed = false;
    std::vector<ExprPtr> args;
    for (auto& a : e->args) {
        ExprPtr na = rewrite_names(a, hook);
        changed |= na != a;
        args.push_back(na);
    }
    if (!changed) return e;
    auto copy = std::make_shared<Expr>(*e);
    copy->args = std::move(args);
    return copy;
}

inline void rewrite_model(DecompModel& model,
                          const std::function<ExprPtr(const ExprPtr&)>& hook) {
    for (auto& eq : model.equations) {
        eq.rhs = rewrite_names(eq.rhs, hook);
        for (auto& p : eq.patterns) {
            if (p.point) p.point = rewrite_names(p.point, hook);
            if (p.bound) p.bound = rewrite_names(p.bound, hook);
        }
    }
}

inline bool model_references(const DecompModel& model, const Ident& name) {
    bool found = false;
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
        if (!e || found) return;
        if ((e->kind == Expr::NameRef || e->kind == Expr::RangeRef) && e->text == name) {
            found = true;
            return;
        }
        for (auto& a : e->args) scan(a);
    };
    for (auto& eq : model.equations) scan(eq.rhs);
    return found;
}

inline std::optional<std::pair<long long, long long>> parse_span_arg(std::string s) {
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::size_t colon = s.find(':');
    if (colon == std::string::npos) return std::nullopt;
    try {
        long long lo = std::stoll(s.substr(0, colon));
        long long hi = std::stoll(s.substr(colon + 1));
        if (lo > hi) return std::nullopt;
        return std::make_pair(lo, hi);
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace detail

// Text attributes that nothing references become static layout text.
inline void transform_auto_static(DecompModel& model) {
    std::set<Ident> statics;
    for (auto& attr : model.attrs) {
        if (attr.alloc.base) continue;
        bool all_text = false;
        for (auto& eq : model.equations)
            if (eq.attr == attr.name) {
                all_text = eq.rhs && eq.rhs->kind == Expr::Str;
                if (!all_text) break;
            }
        if (all_text && !detail::model_references(model, attr.name)) statics.insert(attr.name);
    }
    for (auto it = model.equations.begin(); it != model.equations.end();) {
        if (statics.count(it->attr)) {
            const DecompAttr* a = model.find(it->attr);
            model.statics.emplace_back(a->alloc.origin, it->rhs->text);
            it = model.equations.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = model.attrs.begin(); it != model.attrs.end();)
        it = statics.count(it->name) ? model.attrs.erase(it) : ++it;
    std::sort(model.statics.begin(), model.statics.end());
}

// Same move as auto-static; headers lifted from the spreadsheet are
// already static, so this only demotes leftover text attributes.
inline void transform_strip_headers(DecompModel& model) { transform_auto_static(model); }

inline void transform_rename(DecompModel& model, const Ident& from, const Ident& to,
                             int line, std::vector<Diagnostic>& diags) {
    if (!model.find(from)) {
        diags.push_back(error_at(line, 1, "rename: no attribute named " + from));
        return;
    }
    if (model.find(to)) {
        diags.push_back(error_at(line, 1, "rename: attribute " + to + " already exists"));
        return;
    }
    for (auto& attr : model.attrs)
        if (attr.name == from) attr.name = to;
    for (auto& eq : model.equations)
        if (eq.attr == from) eq.attr = to;
    detail::rewrite_model(model, [&](const ExprPtr& e) -> ExprPtr {
        if (e->text != from) return e;
        auto copy = std::make_shared<Expr>(*e);
        copy->text = to;
        return copy;
    });
}

// Gathers scalar cell-attributes lying on a grid into one based attribute.
inline void transform_rebase(DecompModel& model, const TransformCommand& cmd,
                             std::vector<Diagnostic>& diags) {
    auto fail = [&](const std::string& msg) {
        diags.push_back(error_at(cmd.line, 1, "rebase: " + msg));
    };
    // <new> [lo:hi] ([lo:hi]) from <cell1>..<cellN> (column|row)
    std::size_t i = 0;
    if (cmd.args.size() < 5) {
        fail("expected: rebase NEW [lo:hi] from CELLS column|row");
        return;
    }
    Ident name = cmd.args[i++];
    std::vector<std::pair<long long, long long>> spans;
    while (i < cmd.args.size() && cmd.args[i] != "from") {
        std::string arg = cmd.args[i];
        if (arg.size() >= 2 && arg.front() == '[' && arg.back() == ']')
            arg = arg.substr(1, arg.size() - 2);
        auto s = detail::parse_span_arg(arg);
        if (!s) { fail("bad range '" + cmd.args[i] + "'"); return; }
        spans.push_back(*s);
        ++i;
    }
    if (spans.empty() || spans.size() > 2) { fail("expected one or two ranges"); return; }
    if (i >= cmd.args.size() || cmd.args[i] != "from") { fail("expected 'from'"); return; }
    ++i;
    if (i + 1 >= cmd.args.size()) { fail("expected cells and a direction"); return; }
    const std::string& dir = cmd.args.back();
    bool down;
    if (dir == "column" || dir == "down") down = true;
    else if (dir == "row" || dir == "right") down = false;
    else { fail("expected 'column' or 'row'"); return; }
    // The cells may be written b5..b9 or listed individually; only the
    // first one matters for placement — the rest follow the direction.
    Ident origin_name = cmd.args[i];
    if (auto dots = origin_name.find(".."); dots != std::string::npos)
        origin_name = origin_name.substr(0, dots);

    if (model.find(name)) { fail("attribute " + name + " already exists"); return; }
    const DecompAttr* origin = model.find(origin_name);
    if (!origin) { fail("no attribute named " + origin_name); return; }
    if (origin->alloc.base) { fail(origin_name + " is not a scalar attribute"); return; }

    std::vector<Base> factors;
    for (auto& [lo, hi] : spans) factors.push_back(Base::int_range(lo, hi));
    Base base = Base::product(factors);

    AttrAlloc alloc;
    alloc.origin = origin->alloc.origin;
    alloc.base = base;
    alloc.deltas.push_back(down ? std::pair<int, int>{1, 0} : std::pair<int, int>{0, 1});
    if (spans.size() == 2)
        alloc.deltas.push_back(down ? std::pair<int, int>{0, 1} : std::pair<int, int>{1, 0});

    // Map each point's cell to the scalar attribute living there.
    std::map<Ident, Point> absorbed;
    std::optional<std::string> format;
    for (const Point& p : enumerate_points(base)) {
        CellAddr addr = point_to_addr(alloc, p);
        const DecompAttr* at = nullptr;
        for (auto& a : model.attrs)
            if (!a.alloc.base && a.alloc.origin == addr) { at = &a; break; }
        if (!at) continue;  // blank cell inside the region
        absorbed[at->name] = p;
        if (!format && at->format) format = at->format;
    }
    if (absorbed.empty()) { fail("no attributes in the region"); return; }

    // Replace the absorbed scalars with the new attribute, keeping the
    // position of the first one.
    bool placed = false;
    for (auto it = model.attrs.begin(); it != model.attrs.end();) {
        if (!absorbed.count(it->name)) { ++it; continue; }
        if (!placed) {
            DecompAttr na;
            na.name = name;
            na.alloc = alloc;
            na.format = format;
            *it = std::move(na);
            placed = true;
            ++it;
        } else {
            it = model.attrs.erase(it);
        }
    }

    auto point_pattern = [&](const Point& p) {
        std::vector<IndexPattern> pats;
        for (long long c : p) {
            IndexPattern pat;
            pat.point = make_num(Decimal::from_int(c));
            pats.push_back(std::move(pat));
        }
        return pats;
    };
    for (auto& eq : model.equations) {
        auto it = absorbed.find(eq.attr);
        if (it == absorbed.end()) continue;
        eq.attr = name;
        eq.patterns = point_pattern(it->second);
    }
    auto factor_lo = [&](std::size_t d) {
        const Base& f = base.factor(d);
        return f.kind == Base::IntRange ? f.lo : 1;
    };
    auto factor_hi = [&](std::size_t d) {
        const Base& f = base.factor(d);
        return f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
    };
    auto corners = [&](const Point& a, const Point& b) {
        CellAddr f = point_to_addr(alloc, a), t = point_to_addr(alloc, b);
        return std::make_pair(
            CellAddr{std::min(f.row, t.row), std::min(f.col, t.col)},
            CellAddr{std::max(f.row, t.row), std::max(f.col, t.col)});
    };
    auto range_ref = [&](std::vector<ExprPtr> indices, const ExprPtr& at) {
        auto r = std::make_shared<Expr>();
        r->kind = Expr::RangeRef;
        r->text = name;
        r->args = std::move(indices);
        r->line = at->line;
        r->col = at->col;
        return r;
    };
    detail::rewrite_model(model, [&](const ExprPtr& e) -> ExprPtr {
        if (e->kind == Expr::CellRange) {
            // A rectangle covering a whole slice of the region reads
            // back as a range reference.
            std::pair<CellAddr, CellAddr> rect{e->addr, e->addr2};
            Point lo, hi;
            for (std::size_t d = 0; d < base.dims(); ++d) {
                lo.push_back(factor_lo(d));
                hi.push_back(factor_hi(d));
            }
            if (corners(lo, hi) == rect) return range_ref({}, e);
            if (base.dims() == 2)
                for (long long i = factor_lo(0); i <= factor_hi(0); ++i)
                    if (corners({i, factor_lo(1)}, {i, factor_hi(1)}) == rect)
                        return range_ref({make_num(Decimal::from_int(i))}, e);
            return e;
        }
        auto it = absorbed.find(e->text);
        if (it == absorbed.end() || e->kind != Expr::NameRef || !e->args.empty()) return e;
        std::vector<ExprPtr> indices;
        for (long long c : it->second) indices.push_back(make_num(Decimal::from_int(c)));
        return make_name(name, std::move(indices), true, e->line, e->col);
    });
}

// ---------------------------------------------------------------------------
// Rolling: replaces families of point equations with quantified ones by
// anti-unification. Each instance is abstracted over every dimension of
// the target attribute; structurally equal abstractions whose points form
// a guard-expressible box are merged, largest family first.

namespace detail {

inline long long roll_point_coord(const Base& factor, const ExprPtr& e) {
    if (factor.kind == Base::Enum && e->kind == Expr::Str) {
        for (std::size_t i = 0; i < factor.labels.size(); ++i)
            if (factor.labels[i] == e->text) return (long long)i + 1;
        return 0;
    }
    if (e->kind == Expr::Num && e->num.is_integer()) return e->num.to_int();
    if (e->kind == Expr::Neg && e->args[0]->kind == Expr::Num && e->args[0]->num.is_integer())
        return -e->args[0]->num.to_int();
    return LLONG_MIN;
}

inline ExprPtr offset_var(const Ident& var, long long offset) {
    ExprPtr v = make_name(var);
    if (offset == 0) return v;
    if (offset > 0) return make_bin("+", v, make_num(Decimal::from_int(offset)));
    return make_bin("-", v, make_num(Decimal::from_int(-offset)));
}

struct RollContext {
    const DecompModel& model;
    const DecompAttr& target;
    std::vector<Ident> vars;  // one per dimension of the target

    // Abstracts one equation instance's right-hand side relative to its point.
    ExprPtr abstract(const ExprPtr& e, const Point& at) const {
        if (!e) return e;
        if ((e->kind == Expr::NameRef || e->kind == Expr::RangeRef) && !e->args.empty()) {
            const DecompAttr* ref = model.find(e->text);
            if (ref && ref->alloc.base) {
                const Base& tb = *target.alloc.base;
                const Base& rb = *ref->alloc.base;
                std::vector<ExprPtr> indices;
                bool changed = false;
                for (std::size_t d = 0; d < e->args.size(); ++d) {
                    const ExprPtr& ix = e->args[d];
                    bool matches = d < at.size() && d < rb.dims() &&
                                   rb.factor(d) == tb.factor(d);
                    if (matches) {
                        long long j = roll_point_coord(rb.factor(d), ix);
                        if (j != LLONG_MIN) {
                            if (rb.factor(d).kind == Base::Enum) {
                                // Labels admit no arithmetic: abstract only an
                                // exact match with the instance's coordinate.
                                if (j == at[d]) {
                                    indices.push_back(make_name(vars[d]));
                                    changed = true;
                                    continue;
                                }
                            } else {
                                indices.push_back(offset_var(vars[d], j - at[d]));
                                changed = true;
                                continue;
                            }
                        }
                    }
                    indices.push_back(abstract(ix, at));
                    changed |= indices.back() != ix;
                }
                if (!changed) return e;
                auto copy = std::make_shared<Expr>(*e);
                copy->args = std::move(indices);
                copy->bracketed = true;
                return copy;
            }
        }
        bool changed = false;
        std::vector<ExprPtr> args;
        for (auto& a : e->args) {
            args.push_back(abstract(a, at));
            changed |= args.back() != a;
        }
        if (!changed) return e;
        auto copy = std::make_shared<Expr>(*e);
        copy->args = std::move(args);
        return copy;
    }
};

inline ExprPtr subst_var_num(const ExprPtr& e, const Ident& var, long long value) {
    std::map<Ident, ExprPtr> sub;
    sub[var] = make_num(Decimal::from_int(value));
    return subst_expr(e, sub);
}

}  // namespace detail

inline void transform_roll(DecompModel& model, const Ident& attr_name,
                           std::vector<Diagnostic>& diags, int line = 1,
                           const std::optional<Ident>& var_hint = std::nullopt) {
    const DecompAttr* attr = model.find(attr_name);
    if (!attr) {
        diags.push_back(error_at(line, 1, "roll: no attribute named " + attr_name));
        return;
    }
    if (!attr->alloc.base) return;  // scalars have nothing to roll
    const Base& base = *attr->alloc.base;
    std::size_t n = base.dims();
    if (base_cardinality(base) > 100000) {
        diags.push_back(warning_at(line, 1, "roll: attribute " + attr_name + " is too large"));
        return;
    }

    // Quantifier names: the first unused short identifiers.
    std::set<Ident> taken;
    for (auto& a : model.attrs) taken.insert(a.name);
    detail::RollContext ctx{model, *attr, {}};
    static const char* candidates[] = {"e", "t", "i", "j", "k", "m", "p", "q", "r", "s"};
    std::size_t ci = 0;
    for (std::size_t d = 0; d < n; ++d) {
        if (d == 0 && var_hint) { ctx.vars.push_back(*var_hint); continue; }
        while (ci < 10 && taken.count(candidates[ci])) ++ci;
        ctx.vars.push_back(ci < 10 ? candidates[ci++] : "v" + std::to_string(d));
    }

    struct Instance {
        std::size_t eq_index;
        Point point;
        ExprPtr templ;
        bool consumed = false;
    };
    std::vector<Instance> instances;
    for (std::size_t i = 0; i < model.equations.size(); ++i) {
        const Equation& eq = model.equations[i];
        if (eq.attr != attr_name || eq.patterns.size() != n) continue;
        Point p;
        bool constant = true;
        for (std::size_t d = 0; d < n; ++d) {
            const IndexPattern& pat = eq.patterns[d];
            if (pat.is_all || !pat.point) { constant = false; break; }
            long long c = detail::roll_point_coord(base.factor(d), pat.point);
            if (c == LLONG_MIN || !coord_in_base(base.factor(d), c)) { constant = false; break; }
            p.push_back(c);
        }
        if (!constant) continue;
        instances.push_back(Instance{i, p, ctx.abstract(eq.rhs, p), false});
    }

    struct Rolled {
        std::size_t first_eq;
        Equation eq;
    };
    std::vector<Rolled> rolled;
    std::set<std::size_t> remove;

    while (true) {
        // Group unconsumed instances by template equality; keep the largest
        // group whose point set is a guard-expressible box.
        int best = -1;
        std::vector<std::size_t> best_members;
        std::vector<char> grouped(instances.size(), 0);
        for (std::size_t i = 0; i < instances.size(); ++i) {
            if (instances[i].consumed || grouped[i]) continue;
            std::vector<std::size_t> members{i};
            for (std::size_t j = i + 1; j < instances.size(); ++j) {
                if (instances[j].consumed || grouped[j]) continue;
                if (expr_equal(instances[i].templ, instances[j].templ)) {
                    members.push_back(j);
                    grouped[j] = 1;
                }
            }
            if ((int)members.size() < 2 || (int)members.size() <= best) continue;

            // Box test: per-dimension contiguous coordinate runs whose
            // product matches the member count, each run expressible as a
            // full span, prefix, suffix, or single point.
            bool ok = true;
            std::vector<std::vector<long long>> coords(n);
            for (std::size_t d = 0; d < n && ok; ++d) {
                std::set<long long> s;
                for (std::size_t m : members) s.insert(instances[m].point[d]);
                coords[d].assign(s.begin(), s.end());
                for (std::size_t k = 1; k < coords[d].size(); ++k)
                    if (coords[d][k] != coords[d][k - 1] + 1) ok = false;
                const Base& f = base.factor(d);
                long long lo = f.kind == Base::IntRange ? f.lo : 1;
                long long hi = f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
                bool full = coords[d].front() == lo && coords[d].back() == hi;
                bool prefix = coords[d].front() == lo;
                bool suffix = coords[d].back() == hi;
                if (!full && !prefix && !suffix && coords[d].size() > 1) ok = false;
            }
            long long prod = 1;
            for (auto& c : coords) prod *= (long long)c.size();
            if (prod != (long long)members.size()) ok = false;
            if (ok) {
                best = (int)members.size();
                best_members = members;
            }
        }
        if (best < 0) break;

        // Build the quantified equation.
        std::vector<std::vector<long long>> coords(n);
        for (std::size_t d = 0; d < n; ++d) {
            std::set<long long> s;
            for (std::size_t m : best_members) s.insert(instances[m].point[d]);
            coords[d].assign(s.begin(), s.end());
        }
        std::size_t first = instances[best_members[0]].eq_index;
        for (std::size_t m : best_members) {
            first = std::min(first, instances[m].eq_index);
            instances[m].consumed = true;
            remove.insert(instances[m].eq_index);
        }
        Equation eq;
        eq.attr = attr_name;
        ExprPtr rhs = instances[best_members[0]].templ;
        for (std::size_t d = 0; d < n; ++d) {
            const Base& f = base.factor(d);
            long long lo = f.kind == Base::IntRange ? f.lo : 1;
            long long hi = f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
            IndexPattern pat;
            if (coords[d].size() == 1) {
                long long c = coords[d][0];
                if (f.kind == Base::Enum)
                    pat.point = make_str(f.labels[(std::size_t)c - 1]);
                else
                    pat.point = make_num(Decimal::from_int(c));
                rhs = detail::subst_var_num(rhs, ctx.vars[d], c);
            } else {
                pat.is_all = true;
                pat.var = ctx.vars[d];
                if (coords[d].front() != lo) {
                    pat.constraint_op = ">";
                    pat.bound = make_num(Decimal::from_int(coords[d].front() - 1));
                } else if (coords[d].back() != hi) {
                    pat.constraint_op = "<";
                    pat.bound = make_num(Decimal::from_int(coords[d].back() + 1));
                }
            }
            eq.patterns.push_back(std::move(pat));
        }
        eq.rhs = rhs;
        rolled.push_back(Rolled{first, std::move(eq)});
    }

    if (rolled.empty()) return;
    std::vector<Equation> out;
    for (std::size_t i = 0; i < model.equations.size(); ++i) {
        for (auto& r : rolled)
            if (r.first_eq == i) out.push_back(r.eq);
        if (!remove.count(i)) out.push_back(model.equations[i]);
    }
    model.equations = std::move(out);
}

inline void apply_transforms(DecompModel& model, const TransformScript& script,
                             std::vector<Diagnostic>& diags) {
    for (const TransformCommand& cmd : script.commands) {
        if (cmd.op == "strip-headers") {
            transform_strip_headers(model);
        } else if (cmd.op == "auto-static") {
            transform_auto_static(model);
        } else if (cmd.op == "rename") {
            if (cmd.args.size() != 2)
                diags.push_back(error_at(cmd.line, 1, "rename expects two names"));
            else
                transform_rename(model, cmd.args[0], cmd.args[1], cmd.line, diags);
        } else if (cmd.op == "rebase") {
            transform_rebase(model, cmd, diags);
        } else if (cmd.op == "roll") {
            if (cmd.args.empty() || cmd.args.size() > 2)
                diags.push_back(error_at(cmd.line, 1, "roll expects an attribute name"));
            else if (cmd.args.size() == 2)
                transform_roll(model, cmd.args[0], diags, cmd.line, cmd.args[1]);
            else
                transform_roll(model, cmd.args[0], diags, cmd.line);
        } else if (cmd.op == "auto-roll") {
            std::vector<Ident> names;
            for (auto& a : model.attrs)
                if (a.alloc.base) names.push_back(a.name);
            for (auto& nm : names) transform_roll(model, nm, diags, cmd.line);
        }
    }
}

// ---------------------------------------------------------------------------
// Model -> program (with a layout that pins every cell address)

namespace detail {

inline BaseExpr base_to_expr(const Base& b) {
    BaseExpr e;
    if (b.kind == Base::IntRange) {
        e.kind = BaseExpr::Range;
        e.lo = make_num(Decimal::from_int(b.lo));
        e.hi = make_num(Decimal::from_int(b.hi));
    } else if (b.kind == Base::Enum) {
        e.kind = BaseExpr::Enum;
        e.labels = b.labels;
    } else {
        e.kind = BaseExpr::Prod;
        for (auto& f : b.factors) e.factors.push_back(base_to_expr(f));
    }
    return e;
}

}  // namespace detail

inline Program model_to_program(const DecompModel& model) {
    Program prog;
    auto literal = std::make_shared<ObjectExpr>();
    literal->kind = ObjectExpr::Literal;
    for (const DecompAttr& a : model.attrs) {
        AttributeDecl d;
        d.name = a.name;
        if (a.alloc.base) d.base = detail::base_to_expr(*a.alloc.base);
        d.cell_format = a.format;
        literal->attrs.push_back(std::move(d));
    }
    if (model.equations.empty()) {
        prog.root = literal;
    } else {
        auto where = std::make_shared<ObjectExpr>();
        where->kind = ObjectExpr::Where;
        where->base = literal;
        where->equations = model.equations;
        prog.root = where;
    }

    // Layout grid: a slot at each attribute's origin, text where statics
    // live, empty cells elsewhere.
    struct Slot { const DecompAttr* attr = nullptr; const std::string* text = nullptr; };
    std::map<CellAddr, Slot> grid;
    int max_row = 0;
    for (const DecompAttr& a : model.attrs) {
        grid[a.alloc.origin].attr = &a;
        max_row = std::max(max_row, a.alloc.origin.row);
    }
    for (auto& [addr, text] : model.statics) {
        grid[addr].text = &text;
        max_row = std::max(max_row, addr.row);
    }
    LayoutSpec layout;
    for (int r = 1; r <= max_row; ++r) {
        LayoutRow row;
        int last = 0;
        for (auto& [addr, slot] : grid)
            if (addr.row == r) last = std::max(last, addr.col);
        for (int c = 1; c <= last; ++c) {
            LayoutCell cell;
            auto it = grid.find(CellAddr{r, c});
            if (it != grid.end() && it->second.attr) {
                cell.kind = LayoutCell::Slot;
                cell.attr = it->second.attr->name;
                const auto& deltas = it->second.attr->alloc.deltas;
                cell.direction =
                    !deltas.empty() && deltas[0] == std::pair<int, int>{0, 1} ? "right" : "down";
            } else if (it != grid.end() && it->second.text) {
                cell.text = *it->second.text;
            }
            row.cells.push_back(std::move(cell));
        }
        layout.rows.push_back(std::move(row));
    }
    prog.layout = std::move(layout);
    return prog;
}

// ---------------------------------------------------------------------------
// Spreadsheet analysis

struct AnalysisReport {
    struct Suspect {
        CellAddr cell;
        std::string expected;  // the formula the column pattern implies, A1 style
    };
    std::vector<Suspect> hardcoded;
    std::vector<CellAddr> used_uninitialized;
    std::vector<CellAddr> initialized_unused;
    std::vector<std::vector<CellAddr>> cycles;
};

namespace detail {

// Renders a formula with references replaced by offsets from `self`, so
// formulas that differ only by translation compare equal.
inline std::string relative_key(const ExprPtr& e, CellAddr self) {
    if (!e) return "";
    auto rel = [&](CellAddr a) {
        return "R[" + std::to_string(a.row - self.row) + "]C[" + std::to_string(a.col - self.col) +
               "]";
    };
    switch (e->kind) {
        case Expr::Num: return e->num.to_string();
        case Expr::Str: return quote_formula_string(e->text);
        case Expr::Cell: return rel(e->addr);
        case Expr::CellRange: return rel(e->addr) + ":" + rel(e->addr2);
        case Expr::Neg: return "-(" + relative_key(e->args[0], self) + ")";
        case Expr::Bin:
            return "(" + relative_key(e->args[0], self) + e->text +
                   relative_key(e->args[1], self) + ")";
        case Expr::Call: {
            std::string s = e->text + "(";
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) s += ",";
                s += relative_key(e->args[i], self);
            }
            return s + ")";
        }
        default: return "?";
    }
}

inline ExprPtr translate_refs(const ExprPtr& e, int drow, int dcol) {
    if (!e) return e;
    auto copy = std::make_shared<Expr>(*e);
    if (e->kind == Expr::Cell || e->kind == Expr::CellRange) {
        copy->addr = CellAddr{e->addr.row + drow, e->addr.col + dcol};
        copy->addr2 = CellAddr{e->addr2.row + drow, e->addr2.col + dcol};
    }
    for (auto& a : copy->args) a = translate_refs(a, drow, dcol);
    return copy;
}

}  // namespace detail

// Flags constants that sit where a dominant column formula pattern says a
// formula should be, plus blank-but-referenced cells, unread constants and
// circular references. A pattern dominates a column when at least
// `min_group` formula cells share it and they make up at least `threshold`
// of the column's formula-or-number cells.
inline AnalysisReport analyze(const CellMap& map, double threshold = 0.75, int min_group = 4) {
    AnalysisReport report;
    DependencyGraph g = build_dependency_graph(map);
    report.cycles = g.cycles;
    for (CellAddr a : g.inputs)
        if (!map.cells.count(a)) report.used_uninitialized.push_back(a);
    for (CellAddr a : g.statics) {
        const CellEntry& e = map.cells.at(a);
        if (!e.is_header && e.content == CellEntry::NumberConst)
            report.initialized_unused.push_back(a);
    }

    // Column-wise pattern analysis.
    std::map<int, std::vector<CellAddr>> by_col;
    for (auto& [addr, entry] : map.cells) {
        if (entry.is_header) continue;
        if (entry.content == CellEntry::Formula || entry.content == CellEntry::NumberConst)
            by_col[addr.col].push_back(addr);
    }
    for (auto& [col, cells] : by_col) {
        std::map<std::string, std::vector<CellAddr>> groups;
        for (CellAddr a : cells) {
            const CellEntry& e = map.cells.at(a);
            if (e.content == CellEntry::Formula)
                groups[detail::relative_key(e.formula, a)].push_back(a);
        }
        const std::vector<CellAddr>* majority = nullptr;
        std::string majority_key;
        for (auto& [key, members] : groups)
            if (!majority || members.size() > majority->size()) {
                majority = &members;
                majority_key = key;
            }
        if (!majority || (int)majority->size() < min_group) continue;
        if ((double)majority->size() < threshold * (double)cells.size()) continue;
        int lo = majority->front().row, hi = majority->front().row;
        for (CellAddr a : *majority) { lo = std::min(lo, a.row); hi = std::max(hi, a.row); }
        CellAddr rep = majority->front();
        const ExprPtr& pattern = map.cells.at(rep).formula;
        for (CellAddr a : cells) {
            const CellEntry& e = map.cells.at(a);
            if (e.content != CellEntry::NumberConst) continue;
            if (a.row < lo || a.row > hi) continue;
            ExprPtr expected = detail::translate_refs(pattern, a.row - rep.row, a.col - rep.col);
            report.hardcoded.push_back(
                AnalysisReport::Suspect{a, render_formula(expected, RefStyle::A1)});
        }
    }
    return report;
}

inline std::string render_analysis_text(const AnalysisReport& r) {
    std::ostringstream out;
    out << "hardcoded values: " << r.hardcoded.size() << "\n";
    for (auto& s : r.hardcoded)
        out << "  " << a1_name(s.cell) << " is a constant where the column computes "
            << s.expected << "\n";
    out << "used but empty: " << r.used_uninitialized.size() << "\n";
    for (auto& a : r.used_uninitialized) out << "  " << a1_name(a) << "\n";
    out << "set but unused: " << r.initialized_unused.size() << "\n";
    for (auto& a : r.initialized_unused) out << "  " << a1_name(a) << "\n";
    out << "circular references: " << r.cycles.size() << "\n";
    for (auto& cycle : r.cycles) {
        out << " ";
        for (auto& a : cycle) out << " " << a1_name(a);
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// MM pretty-printer

namespace detail {

inline std::string mm_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';  // doubled-quote escape
        out += c;
    }
    return out + "\"";
}

inline std::string render_unit_mm(const UnitExpr& u, const std::vector<Ident>& order) {
    return unit_to_string(u, order);
}

inline std::string render_mm_expr(const Program& prog, const ExprPtr& e, int parent_prec = 0) {
    if (!e) return "";
    switch (e->kind) {
        case Expr::Num: {
            std::string s = e->num.to_string();
            if (e->unit && !e->unit->dimensionless()) {
                if (e->unit->exponents.size() == 1 && e->unit->exponents.begin()->second == 1)
                    s += " " + e->unit->exponents.begin()->first;
                else
                    s += " (" + render_unit_mm(*e->unit, prog.units) + ")";
            }
            return s;
        }
        case Expr::Str: return mm_quote(e->text);
        case Expr::NameRef: {
            std::string s = e->text;
            if (!e->args.empty()) {
                s += "[";
                for (std::size_t i = 0; i < e->args.size(); ++i) {
                    if (i) s += ", ";
                    s += render_mm_expr(prog, e->args[i]);
                }
                s += "]";
            }
            return s;
        }
        case Expr::RangeRef: {
            std::string s = "range " + e->text;
            if (!e->args.empty()) {
                s += "[";
                for (std::size_t i = 0; i < e->args.size(); ++i) {
                    if (i) s += ", ";
                    const ExprPtr& a = e->args[i];
                    if (a->kind == Expr::Span)
                        s += render_mm_expr(prog, a->args[0]) + ":" +
                             render_mm_expr(prog, a->args[1]);
                    else
                        s += render_mm_expr(prog, a);
                }
                s += "]";
            }
            return parent_prec > 0 ? "(" + s + ")" : s;
        }
        case Expr::Cell: return "range(" + a1_name(e->addr) + ":" + a1_name(e->addr) + ")";
        case Expr::CellRange:
            return "range(" + a1_name(e->addr) + ":" + a1_name(e->addr2) + ")";
        case Expr::Neg: {
            std::string s = "-" + render_mm_expr(prog, e->args[0], 4);
            return parent_prec > 4 ? "(" + s + ")" : s;
        }
        case Expr::Bin: {
            int p = op_prec(e->text);
            bool right_assoc = e->text == "^";
            std::string s = render_mm_expr(prog, e->args[0], right_assoc ? p + 1 : p) + " " +
                            e->text + " " +
                            render_mm_expr(prog, e->args[1], right_assoc ? p : p + 1);
            return p < parent_prec ? "(" + s + ")" : s;
        }
        case Expr::Call: {
            std::string fn = e->text;
            for (auto& c : fn) c = char(std::tolower((unsigned char)c));
            std::string s = fn + "(";
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) s += ", ";
                s += render_mm_expr(prog, e->args[i]);
            }
            return s + ")";
        }
        default: return "";
    }
}

inline std::string render_mm_pattern(const Program& prog, const IndexPattern& p) {
    if (!p.is_all) return render_mm_expr(prog, p.point);
    std::string s = "all " + p.var;
    if (!p.constraint_op.empty())
        s += " " + p.constraint_op + " " + render_mm_expr(prog, p.bound);
    return s;
}

inline std::string render_mm_equation(const Program& prog, const Equation& eq) {
    std::string s = eq.attr;
    if (!eq.patterns.empty()) {
        s += "[";
        for (std::size_t i = 0; i < eq.patterns.size(); ++i) {
            if (i) s += ", ";
            s += render_mm_pattern(prog, eq.patterns[i]);
        }
        s += "]";
    }
    return s + " = " + render_mm_expr(prog, eq.rhs);
}

inline std::string render_base_expr_mm(const Program& prog, const BaseExpr& b) {
    switch (b.kind) {
        case BaseExpr::Named: return b.name;
        case BaseExpr::Range:
            return "[" + render_mm_expr(prog, b.lo) + ":" + render_mm_expr(prog, b.hi) + "]";
        case BaseExpr::Enum: {
            std::string s = "{";
            for (std::size_t i = 0; i < b.labels.size(); ++i) {
                if (i) s += ", ";
                s += mm_quote(b.labels[i]);
            }
            return s + "}";
        }
        case BaseExpr::Prod: {
            std::string s;
            for (std::size_t i = 0; i < b.factors.size(); ++i) {
                if (i) s += " * ";
                s += render_base_expr_mm(prog, b.factors[i]);
            }
            return s;
        }
    }
    return "";
}

// Greedy wrap at `width` columns; continuation lines get four extra spaces.
// Breaks only at spaces outside string literals.
inline void emit_wrapped(std::ostringstream& out, const std::string& line, int width = 72) {
    if ((int)line.size() <= width) {
        out << line << "\n";
        return;
    }
    std::string indent;
    for (char c : line) {
        if (c != ' ') break;
        indent += ' ';
    }
    std::string cont = indent + "    ";
    std::string cur = indent;
    std::string word;
    bool in_string = false;
    auto flush_word = [&]() {
        if (word.empty()) return;
        if (cur == indent) {
            cur += word;
        } else if ((int)(cur.size() + 1 + word.size()) <= width) {
            cur += " " + word;
        } else {
            out << cur << "\n";
            cur = cont + word;
        }
        word.clear();
    };
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == ' ' && !in_string) flush_word();
        else word += c;
    }
    flush_word();
    if (!cur.empty()) out << cur << "\n";
}

inline void print_attr_decl(std::ostringstream& out, const Program& prog,
                            const AttributeDecl& d) {
    std::string line = "  " + d.name;
    if (d.base) {
        if (d.base->kind == BaseExpr::Range)
            line += " " + render_base_expr_mm(prog, *d.base);
        else
            line += " : " + render_base_expr_mm(prog, *d.base);
    }
    for (std::size_t i = 0; i < d.display_name.size(); ++i)
        line += (i == 0 ? " name " : " br ") + mm_quote(d.display_name[i]);
    if (d.unit) line += " unit " + render_unit_mm(*d.unit, prog.units);
    if (d.cell_format) line += " format " + *d.cell_format;
    out << line << "\n";  // never wrapped: `format` runs to end of line
}

inline void print_objexpr(std::ostringstream& out, const Program& prog, const ObjPtr& o) {
    if (!o) {
        out << "attributes <\n>\n";
        return;
    }
    switch (o->kind) {
        case ObjectExpr::Literal: {
            out << "attributes <\n";
            for (auto& d : o->attrs) print_attr_decl(out, prog, d);
            out << ">\n";
            if (!o->equations.empty()) {
                out << "where\n";
                for (std::size_t i = 0; i < o->equations.size(); ++i)
                    emit_wrapped(out, "  " + render_mm_equation(prog, o->equations[i]) +
                                          (i + 1 < o->equations.size() ? " and" : ""));
            }
            break;
        }
        case ObjectExpr::NamedRef:
            out << o->name << "\n";
            break;
        case ObjectExpr::TemplateApply: {
            std::string s = o->name + "(";
            for (std::size_t i = 0; i < o->args.size(); ++i) {
                if (i) s += ", ";
                s += render_mm_expr(prog, o->args[i]);
            }
            out << s << ")\n";
            break;
        }
        case ObjectExpr::Plus:
            print_objexpr(out, prog, o->base);
            if (o->rhs) {
                out << "plus ";
                print_objexpr(out, prog, o->rhs);
            } else {
                out << "plus attributes <\n";
                for (auto& d : o->attrs) print_attr_decl(out, prog, d);
                out << ">\n";
            }
            break;
        case ObjectExpr::Where:
            print_objexpr(out, prog, o->base);
            out << "where\n";
            for (std::size_t i = 0; i < o->equations.size(); ++i)
                emit_wrapped(out, "  " + render_mm_equation(prog, o->equations[i]) +
                                      (i + 1 < o->equations.size() ? " and" : ""));
            break;
    }
}

}  // namespace detail

inline std::string pretty_print(const Program& prog) {
    std::ostringstream out;
    for (auto& inc : prog.includes) out << "include " << detail::mm_quote(inc) << "\n";
    for (auto& u : prog.units) out << "unit " << u << "\n";
    for (auto& [name, base] : prog.bases)
        out << "base " << name << " = " << detail::render_base_expr_mm(prog, base) << "\n";
    for (auto& [name, def] : prog.constants) {
        std::string line = "constant " + name;
        if (def.declared_unit) line += " : " + detail::render_unit_mm(*def.declared_unit, prog.units);
        line += " = " + detail::render_mm_expr(prog, def.value);
        detail::emit_wrapped(out, line);
    }
    if (!prog.includes.empty() || !prog.units.empty() || !prog.bases.empty() ||
        !prog.constants.empty())
        out << "\n";
    for (auto& [name, def] : prog.templates) {
        out << name << "(";
        for (std::size_t i = 0; i < def.params.size(); ++i) {
            if (i) out << ", ";
            out << def.params[i].name << " : " << def.params[i].type;
        }
        out << ") =\n";
        detail::print_objexpr(out, prog, def.body);
        out << "\n";
    }
    for (auto& [name, obj] : prog.objects) {
        out << name << " =\n";
        detail::print_objexpr(out, prog, obj);
        out << "\n";
    }
    bool root_is_last_named = prog.root && prog.root->kind == ObjectExpr::NamedRef &&
                              !prog.objects.empty() &&
                              prog.objects.back().first == prog.root->name;
    if (prog.root && !root_is_last_named) {
        detail::print_objexpr(out, prog, prog.root);
        out << "\n";
    }
    if (prog.layout) {
        out << "layout\n<table>\n";
        for (auto& row : prog.layout->rows) {
            out << "  <tr>";
            for (auto& cell : row.cells) {
                if (cell.kind == LayoutCell::Slot)
                    out << "<td><attr name=\"" << cell.attr << "\" dir=\"" << cell.direction
                        << "\"/></td>";
                else if (cell.text.empty())
                    out << "<td></td>";
                else
                    out << "<td>" << cell.text << "</td>";
            }
            out << "</tr>\n";
        }
        out << "</table>\n";
    }
    std::string s = out.str();
    while (s.size() >= 2 && s[s.size() - 1] == '\n' && s[s.size() - 2] == '\n') s.pop_back();
    return s;
}

// Convenience: full decompile pipeline.
inline std::string decompile(const CellMap& map, const TransformScript& script,
                             std::vector<Diagnostic>& diags) {
    DecompModel model = lift_trivial(map);
    apply_transforms(model, script, diags);
    return pretty_print(model_to_program(model));
}

}  // namespace mm
