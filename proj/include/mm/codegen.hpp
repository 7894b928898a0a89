// Storage allocation and equation unrolling: turns a checked flat object
// into a cellmap ready for SYLK output.
#pragma once

#include "mm/formula.hpp"
#include "mm/semantics.hpp"

namespace mm {

struct GridPlan {
    std::map<Ident, AttrAlloc> allocs;
    // Static text (layout prose and default headers), placed as header cells.
    std::vector<std::pair<CellAddr, std::string>> statics;
};

namespace detail {

inline std::string header_text(const AttributeDecl& decl) {
    if (decl.display_name.empty()) return decl.name;
    std::string s;
    for (auto& frag : decl.display_name) {
        if (!s.empty()) s += " ";
        s += frag;
    }
    return s;
}

// Column deltas for dimensions 2..n of a >2-D attribute: mixed-radix
// strides so every point gets a distinct column.
inline std::vector<std::pair<int, int>> stacked_deltas(const Base& base, bool down_first) {
    std::size_t n = base.dims();
    std::vector<std::pair<int, int>> deltas(n);
    // Dimensions beyond the first map to the cross axis; later dimensions
    // vary fastest, so dimension i has stride = product of later cards.
    std::vector<long long> cross(n, 1);
    for (std::size_t d = 1; d < n; ++d) {
        long long s = 1;
        for (std::size_t k = d + 1; k < n; ++k) s *= base_cardinality(base.factor(k));
        cross[d] = s;
    }
    for (std::size_t d = 0; d < n; ++d) {
        if (d == 0)
            deltas[d] = down_first ? std::pair<int, int>{1, 0} : std::pair<int, int>{0, 1};
        else
            deltas[d] = down_first ? std::pair<int, int>{0, (int)cross[d]}
                                   : std::pair<int, int>{(int)cross[d], 0};
    }
    return deltas;
}

inline long long cross_extent(const Base& base) {
    long long w = 1;
    for (std::size_t d = 1; d < base.dims(); ++d) w *= base_cardinality(base.factor(d));
    return w;
}

}  // namespace detail

// Default policy: attributes in declaration order, one column block each,
// header in row 1, data from row 2 downward.
inline GridPlan allocate_default(const FlatObject& flat) {
    GridPlan plan;
    int col = 1;
    for (const FlatAttr& a : flat.attrs) {
        AttrAlloc alloc;
        alloc.origin = CellAddr{2, col};
        alloc.header_cell = CellAddr{1, col};
        alloc.base = a.base;
        long long width = 1;
        if (a.base) {
            alloc.deltas = detail::stacked_deltas(*a.base, /*down_first=*/true);
            width = detail::cross_extent(*a.base);
        }
        plan.statics.emplace_back(*alloc.header_cell, detail::header_text(a.decl));
        plan.allocs[a.decl.name] = std::move(alloc);
        col += (int)width;
    }
    return plan;
}

// Layout-driven policy: each layout row is a sheet row, each cell a sheet
// column; attribute slots become allocation origins. Attributes the layout
// does not place are appended with the default policy to the right.
inline GridPlan allocate_from_layout(const FlatObject& flat, const LayoutSpec& layout,
                                     std::vector<Diagnostic>& diags) {
    GridPlan plan;
    int row = 1;
    int max_col = 0;
    for (const LayoutRow& lr : layout.rows) {
        int col = 1;
        for (const LayoutCell& cell : lr.cells) {
            if (cell.kind == LayoutCell::Text) {
                if (!cell.text.empty()) plan.statics.emplace_back(CellAddr{row, col}, cell.text);
                max_col = std::max(max_col, col);
            } else {
                const FlatAttr* a = flat.find(cell.attr);
                if (a) {
                    AttrAlloc alloc;
                    alloc.origin = CellAddr{row, col};
                    alloc.base = a->base;
                    bool down = cell.direction != "right";
                    if (a->base) alloc.deltas = detail::stacked_deltas(*a->base, down);
                    long long cross = a->base ? detail::cross_extent(*a->base) : 1;
                    long long major = a->base ? base_cardinality(a->base->factor(0)) : 1;
                    long long width = down ? cross : major;
                    max_col = std::max(max_col, col + (int)width - 1);
                    plan.allocs[cell.attr] = std::move(alloc);
                }
            }
            ++col;
        }
        ++row;
    }
    int col = max_col + 1;
    for (const FlatAttr& a : flat.attrs) {
        if (plan.allocs.count(a.decl.name)) continue;
        AttrAlloc alloc;
        alloc.origin = CellAddr{2, col};
        alloc.header_cell = CellAddr{1, col};
        alloc.base = a.base;
        long long width = 1;
        if (a.base) {
            alloc.deltas = detail::stacked_deltas(*a.base, true);
            width = detail::cross_extent(*a.base);
        }
        plan.statics.emplace_back(*alloc.header_cell, detail::header_text(a.decl));
        plan.allocs[a.decl.name] = std::move(alloc);
        col += (int)width;
    }
    // Collisions between attribute footprints and statics.
    std::map<CellAddr, std::string> owner;
    for (auto& [addr, text] : plan.statics) {
        auto [it, fresh] = owner.emplace(addr, "static text");
        if (!fresh)
            diags.push_back(error_at(1, 1, "Layout collision at " + a1_name(addr)));
    }
    for (auto& [name, alloc] : plan.allocs) {
        std::vector<Point> pts = alloc.base ? enumerate_points(*alloc.base)
                                            : std::vector<Point>{Point{}};
        for (const Point& p : pts) {
            CellAddr a = point_to_addr(alloc, p);
            auto [it, fresh] = owner.emplace(a, name);
            if (!fresh)
                diags.push_back(error_at(1, 1, "Layout collision at " + a1_name(a) + " between " +
                                                   it->second + " and " + name));
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Unrolling

namespace detail {

// Folds an all-literal expression to an exact number; nullopt when any
// step would be inexact (such folds are left as formulas).
inline std::optional<Decimal> fold_exact(const ExprPtr& e) {
    if (!e) return std::nullopt;
    switch (e->kind) {
        case Expr::Num: return e->num;
        case Expr::Neg: {
            auto v = fold_exact(e->args[0]);
            return v ? std::optional<Decimal>(-*v) : std::nullopt;
        }
        case Expr::Bin: {
            auto l = fold_exact(e->args[0]);
            auto r = fold_exact(e->args[1]);
            if (!l || !r) return std::nullopt;
            if (e->text == "+") return *l + *r;
            if (e->text == "-") return *l - *r;
            if (e->text == "*") return *l * *r;
            if (e->text == "/") return Decimal::div(*l, *r);
            if (e->text == "^" && r->is_integer()) return Decimal::pow(*l, r->to_int());
            return std::nullopt;
        }
        default: return std::nullopt;
    }
}

struct Unroller {
    const FlatObject& flat;
    const Program& prog;
    const GridPlan& plan;
    ConstEval& ce;
    std::vector<Diagnostic>& diags;

    std::optional<long long> index_coord(const Base& factor, const ExprPtr& ix,
                                         const std::map<Ident, Decimal>& bindings,
                                         const Ident& attr) {
        if (factor.kind == Base::Enum) {
            if (ix->kind == Expr::Str) {
                for (std::size_t i = 0; i < factor.labels.size(); ++i)
                    if (factor.labels[i] == ix->text) return (long long)i + 1;
                diags.push_back(error_at(ix->line, ix->col,
                                         "Index out of base for " + attr));
                return std::nullopt;
            }
            // Only a bare variable or literal ordinal may index an
            // enumeration; arithmetic on labels has no meaning.
            bool plain = ix->kind == Expr::Num ||
                         (ix->kind == Expr::NameRef && ix->args.empty());
            if (!plain) {
                diags.push_back(error_at(ix->line, ix->col,
                                         "Arithmetic on enumeration coordinates is not allowed"));
                return std::nullopt;
            }
        }
        auto v = ce.eval(ix, &bindings);
        if (!v || !v->is_integer()) {
            diags.push_back(error_at(ix->line, ix->col, "Subscript is not an integer"));
            return std::nullopt;
        }
        return v->to_int();
    }

    ExprPtr attr_ref_cell(const ExprPtr& e, const std::map<Ident, Decimal>& bindings) {
        const FlatAttr* a = flat.find(e->text);
        const AttrAlloc& alloc = plan.allocs.at(e->text);
        Point p;
        for (std::size_t d = 0; d < e->args.size(); ++d) {
            auto c = index_coord(a->base->factor(d), e->args[d], bindings, e->text);
            if (!c) return nullptr;
            p.push_back(*c);
        }
        try {
            return make_cell(point_to_addr(alloc, p), e->line, e->col);
        } catch (const OutOfBaseError&) {
            diags.push_back(error_at(e->line, e->col, "Index out of base for " + e->text));
            return nullptr;
        }
    }

    ExprPtr range_ref_cells(const ExprPtr& e, const std::map<Ident, Decimal>& bindings) {
        const FlatAttr* a = flat.find(e->text);
        const AttrAlloc& alloc = plan.allocs.at(e->text);
        std::size_t dims = a->base ? a->base->dims() : 0;
        Point lo, hi;
        for (std::size_t d = 0; d < dims; ++d) {
            const Base& f = a->base->factor(d);
            long long full_lo = f.kind == Base::IntRange ? f.lo : 1;
            long long full_hi = f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
            if (d >= e->args.size()) {
                lo.push_back(full_lo);
                hi.push_back(full_hi);
                continue;
            }
            const ExprPtr& s = e->args[d];
            if (s->kind == Expr::Span) {
                auto c1 = index_coord(f, s->args[0], bindings, e->text);
                auto c2 = index_coord(f, s->args[1], bindings, e->text);
                if (!c1 || !c2) return nullptr;
                lo.push_back(std::min(*c1, *c2));
                hi.push_back(std::max(*c1, *c2));
            } else {
                auto c = index_coord(f, s, bindings, e->text);
                if (!c) return nullptr;
                lo.push_back(*c);
                hi.push_back(*c);
            }
        }
        try {
            CellAddr from = point_to_addr(alloc, lo);
            CellAddr to = point_to_addr(alloc, hi);
            return make_cell_range(CellAddr{std::min(from.row, to.row), std::min(from.col, to.col)},
                                   CellAddr{std::max(from.row, to.row), std::max(from.col, to.col)},
                                   e->line, e->col);
        } catch (const OutOfBaseError&) {
            diags.push_back(error_at(e->line, e->col, "Index out of base for " + e->text));
            return nullptr;
        }
    }

    // Rewrites one equation instance into a cell-level formula.
    ExprPtr instantiate(const ExprPtr& e, const std::map<Ident, Decimal>& bindings) {
        if (!e) return nullptr;
        switch (e->kind) {
            case Expr::Num: {
                if (!e->unit) return e;
                auto copy = std::make_shared<Expr>(*e);
                copy->unit.reset();  // units do not survive into cells
                return copy;
            }
            case Expr::Str: return e;
            case Expr::Cell:
            case Expr::CellRange: return e;
            case Expr::NameRef: {
                auto it = bindings.find(e->text);
                if (it != bindings.end() && e->args.empty())
                    return make_num(it->second, e->line, e->col);
                const FlatAttr* a = flat.find(e->text);
                if (a) return attr_ref_cell(e, bindings);
                auto v = ce.constant(e->text);
                if (v) return make_num(*v, e->line, e->col);
                diags.push_back(error_at(e->line, e->col, "Undeclared identifier " + e->text));
                return nullptr;
            }
            case Expr::RangeRef: return range_ref_cells(e, bindings);
            default: {
                auto copy = std::make_shared<Expr>(*e);
                for (auto& a : copy->args) {
                    a = instantiate(a, bindings);
                    if (!a) return nullptr;
                }
                return copy;
            }
        }
    }
};

}  // namespace detail

inline CellMap unroll(const FlatObject& flat, const GridPlan& plan, const Program& prog,
                      ConstEval& ce, std::vector<Diagnostic>& diags) {
    CellMap map;
    for (auto& [addr, text] : plan.statics) {
        CellEntry e;
        e.content = CellEntry::TextConst;
        e.text = text;
        e.is_header = true;
        map.cells[addr] = std::move(e);
    }

    detail::Unroller un{flat, prog, plan, ce, diags};
    for (const Equation& eq : flat.equations) {
        const FlatAttr* attr = flat.find(eq.attr);
        if (!attr || !plan.allocs.count(eq.attr)) continue;
        const AttrAlloc& alloc = plan.allocs.at(eq.attr);

        // Enumerate the pattern's coordinate lists per dimension.
        std::size_t n = attr->base ? attr->base->dims() : 0;
        std::vector<std::vector<long long>> per_dim(n);
        std::vector<Ident> dim_var(n);
        bool bad = false;
        for (std::size_t d = 0; d < n && !bad; ++d) {
            const Base& f = attr->base->factor(d);
            const IndexPattern& p = eq.patterns[d];
            if (p.is_all) {
                dim_var[d] = p.var;
                std::optional<long long> bound;
                if (!p.constraint_op.empty()) {
                    bound = ce.eval_int(p.bound);
                    if (!bound) { bad = true; break; }
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
                if (!c) {
                    diags.push_back(error_at(p.line, p.col, "Index out of base for " + eq.attr));
                    bad = true;
                    break;
                }
                per_dim[d].push_back(*c);
            }
        }
        if (bad) continue;

        Point cur(n);
        std::function<void(std::size_t)> emit = [&](std::size_t d) {
            if (d < n) {
                for (long long c : per_dim[d]) { cur[d] = c; emit(d + 1); }
                return;
            }
            std::map<Ident, Decimal> bindings;
            for (std::size_t k = 0; k < n; ++k)
                if (!dim_var[k].empty()) bindings[dim_var[k]] = Decimal::from_int(cur[k]);
            ExprPtr rhs = un.instantiate(eq.rhs, bindings);
            if (!rhs) return;
            CellAddr target;
            try {
                target = point_to_addr(alloc, cur);
            } catch (const OutOfBaseError&) {
                diags.push_back(error_at(eq.line, eq.col, "Index out of base for " + eq.attr));
                return;
            }
            CellEntry entry;
            if (rhs->kind == Expr::Str) {
                entry.content = CellEntry::TextConst;
                entry.text = rhs->text;
            } else if (auto folded = detail::fold_exact(rhs)) {
                entry.content = CellEntry::NumberConst;
                entry.num = *folded;
            } else {
                entry.content = CellEntry::Formula;
                entry.formula = rhs;
            }
            entry.format = attr->decl.cell_format;
            auto [it, fresh] = map.cells.emplace(target, entry);
            if (!fresh)
                diags.push_back(error_at(eq.line, eq.col,
                                         "Cell collision at " + a1_name(target)));
        };
        emit(0);
    }
    return map;
}

// ---------------------------------------------------------------------------
// Plain-text cell dump: one line per cell, tab-separated:
//   <A1 address> <content> <format or -> <H or ->
// Numbers are bare, text is quoted, formulas start with "=" in A1 style.
inline std::string write_cellmap_text(const CellMap& map) {
    std::ostringstream out;
    for (auto& [addr, entry] : map.cells) {
        out << a1_name(addr) << "\t";
        switch (entry.content) {
            case CellEntry::NumberConst: out << entry.num.to_string(); break;
            case CellEntry::TextConst: out << quote_formula_string(entry.text); break;
            case CellEntry::Formula:
                out << "=" << render_formula(entry.formula, RefStyle::A1);
                break;
        }
        out << "\t" << (entry.format ? *entry.format : "-") << "\n";
    }
    return out.str();
}

}  // namespace mm
