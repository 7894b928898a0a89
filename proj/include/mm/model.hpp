// Shared domain model: bases, points, units, expressions, equations,
// objects, cell addresses and cellmaps. Everything here is immutable
// after construction and safe to share across threads.
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mm/decimal.hpp"

namespace mm {

using Ident = std::string;

// ---------------------------------------------------------------------------
// Cell addresses (single sheet, 1-based rows and columns)

struct CellAddr {
    int row = 0;
    int col = 0;
    auto operator<=>(const CellAddr&) const = default;
};

inline std::string col_letters(int col) {
    std::string s;
    while (col > 0) {
        int r = (col - 1) % 26;
        s.insert(s.begin(), char('A' + r));
        col = (col - 1) / 26;
    }
    return s;
}

inline std::string a1_name(CellAddr a) {
    return col_letters(a.col) + std::to_string(a.row);
}

inline std::optional<CellAddr> parse_a1(std::string_view text) {
    std::size_t i = 0;
    int col = 0, row = 0;
    while (i < text.size() && ((text[i] >= 'A' && text[i] <= 'Z') || (text[i] >= 'a' && text[i] <= 'z'))) {
        char c = text[i] >= 'a' ? char(text[i] - 'a' + 'A') : text[i];
        col = col * 26 + (c - 'A' + 1);
        ++i;
    }
    if (i == 0 || i == text.size()) return std::nullopt;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        row = row * 10 + (text[i] - '0');
        ++i;
    }
    if (i != text.size() || row < 1 || col < 1) return std::nullopt;
    return CellAddr{row, col};
}

// ---------------------------------------------------------------------------
// Bases and points

struct Base {
    enum Kind { IntRange, Enum, Product };
    Kind kind = IntRange;
    long long lo = 0, hi = 0;          // IntRange
    std::vector<std::string> labels;   // Enum
    std::vector<Base> factors;         // Product (each factor non-Product)

    static Base int_range(long long lo, long long hi) {
        Base b; b.kind = IntRange; b.lo = lo; b.hi = hi; return b;
    }
    static Base enumeration(std::vector<std::string> labels) {
        Base b; b.kind = Enum; b.labels = std::move(labels); return b;
    }
    static Base product(std::vector<Base> factors) {
        if (factors.size() == 1) return factors[0];
        Base b; b.kind = Product;
        for (auto& f : factors) {
            if (f.kind == Product)
                b.factors.insert(b.factors.end(), f.factors.begin(), f.factors.end());
            else
                b.factors.push_back(std::move(f));
        }
        return b;
    }

    std::size_t dims() const { return kind == Product ? factors.size() : 1; }
    const Base& factor(std::size_t d) const { return kind == Product ? factors[d] : *this; }

    bool operator==(const Base& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case IntRange: return lo == o.lo && hi == o.hi;
            case Enum: return labels == o.labels;
            case Product: return factors == o.factors;
        }
        return false;
    }
};

inline long long base_cardinality(const Base& b) {
    switch (b.kind) {
        case Base::IntRange: return b.hi - b.lo + 1;
        case Base::Enum: return (long long)b.labels.size();
        case Base::Product: {
            long long n = 1;
            for (auto& f : b.factors) n *= base_cardinality(f);
            return n;
        }
    }
    return 0;
}

// One coordinate per base dimension. IntRange coordinates are the actual
// integer values (e.g. 1997); Enum coordinates are 1-based label ordinals.
using Point = std::vector<long long>;

inline long long coord_ordinal(const Base& factor, long long coord) {
    return factor.kind == Base::IntRange ? coord - factor.lo + 1 : coord;
}

inline bool coord_in_base(const Base& factor, long long coord) {
    if (factor.kind == Base::IntRange) return coord >= factor.lo && coord <= factor.hi;
    return coord >= 1 && coord <= (long long)factor.labels.size();
}

// Enumerates all points of b in lexicographic order (first dimension slowest).
inline std::vector<Point> enumerate_points(const Base& b) {
    std::size_t n = b.dims();
    std::vector<Point> out;
    Point cur(n);
    auto lo_of = [&](std::size_t d) {
        const Base& f = b.factor(d);
        return f.kind == Base::IntRange ? f.lo : 1;
    };
    auto hi_of = [&](std::size_t d) {
        const Base& f = b.factor(d);
        return f.kind == Base::IntRange ? f.hi : (long long)f.labels.size();
    };
    for (std::size_t d = 0; d < n; ++d) cur[d] = lo_of(d);
    while (true) {
        out.push_back(cur);
        std::size_t d = n;
        while (d > 0) {
            --d;
            if (cur[d] < hi_of(d)) { ++cur[d]; break; }
            cur[d] = lo_of(d);
            if (d == 0) return out;
        }
    }
}

// ---------------------------------------------------------------------------
// Units

struct UnitExpr {
    // symbol -> nonzero exponent; empty means dimensionless
    std::map<std::string, int> exponents;

    bool dimensionless() const { return exponents.empty(); }
    bool operator==(const UnitExpr&) const = default;
};

inline UnitExpr unit_of(const std::string& symbol) {
    UnitExpr u;
    u.exponents[symbol] = 1;
    return u;
}

inline UnitExpr unit_mul(const UnitExpr& a, const UnitExpr& b) {
    UnitExpr r = a;
    for (auto& [sym, exp] : b.exponents) {
        int& e = r.exponents[sym];
        e += exp;
        if (e == 0) r.exponents.erase(sym);
    }
    return r;
}

inline UnitExpr unit_div(const UnitExpr& a, const UnitExpr& b) {
    UnitExpr r = a;
    for (auto& [sym, exp] : b.exponents) {
        int& e = r.exponents[sym];
        e -= exp;
        if (e == 0) r.exponents.erase(sym);
    }
    return r;
}

inline UnitExpr unit_pow(const UnitExpr& a, long long k) {
    UnitExpr r;
    if (k == 0) return r;
    for (auto& [sym, exp] : a.exponents) r.exponents[sym] = int(exp * k);
    return r;
}

// Canonical rendering: symbols in declaration order, "^k" only when k != 1.
// Symbols missing from the declaration list follow in alphabetical order.
inline std::string unit_to_string(const UnitExpr& u, const std::vector<std::string>& decl_order) {
    std::vector<std::string> syms;
    for (auto& s : decl_order)
        if (u.exponents.count(s)) syms.push_back(s);
    for (auto& [s, _] : u.exponents)
        if (std::find(syms.begin(), syms.end(), s) == syms.end()) syms.push_back(s);
    std::string out;
    for (auto& s : syms) {
        if (!out.empty()) out += " * ";
        out += s;
        int e = u.exponents.at(s);
        if (e != 1) out += "^" + std::to_string(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum Kind {
        Num,        // num (+ optional unit annotation)
        Str,        // text
        NameRef,    // text [args = indices]; attr/constant/var, resolved in semantics
        RangeRef,   // text [args = slice]; only legal as a call argument
        Span,       // args = {lo, hi}; only legal inside a RangeRef slice
        Bin,        // text = operator, args = {left, right}
        Neg,        // args = {operand}
        Call,       // text = function name (canonical uppercase), args
        Cell,       // addr
        CellRange,  // addr .. addr2
    };

    Kind kind = Num;
    int line = 0, col = 0;
    Decimal num;
    std::optional<UnitExpr> unit;  // Num only
    std::string text;
    bool bracketed = false;  // NameRef: subscript brackets were written
    std::vector<ExprPtr> args;
    CellAddr addr, addr2;
};

inline ExprPtr make_num(Decimal d, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Num; e->num = d; e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_str(std::string s, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Str; e->text = std::move(s); e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_name(Ident name, std::vector<ExprPtr> indices = {}, bool bracketed = false,
                         int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::NameRef; e->text = std::move(name); e->args = std::move(indices);
    e->bracketed = bracketed; e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_bin(std::string op, ExprPtr l, ExprPtr r, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Bin; e->text = std::move(op); e->args = {std::move(l), std::move(r)};
    e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_neg(ExprPtr x, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Neg; e->args = {std::move(x)}; e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_call(std::string fn, std::vector<ExprPtr> args, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Call; e->text = std::move(fn); e->args = std::move(args);
    e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_cell(CellAddr a, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Cell; e->addr = a; e->line = line; e->col = col;
    return e;
}
inline ExprPtr make_cell_range(CellAddr from, CellAddr to, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::CellRange; e->addr = from; e->addr2 = to; e->line = line; e->col = col;
    return e;
}

// Structural equality; source positions and subscript spelling are ignored.
inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case Expr::Num:
            if (!(a->num == b->num)) return false;
            if (a->unit.has_value() != b->unit.has_value()) return false;
            if (a->unit && !(*a->unit == *b->unit)) return false;
            break;
        case Expr::Str:
        case Expr::NameRef:
        case Expr::RangeRef:
        case Expr::Bin:
        case Expr::Call:
            if (a->text != b->text) return false;
            break;
        case Expr::Cell:
            return a->addr == b->addr;
        case Expr::CellRange:
            return a->addr == b->addr && a->addr2 == b->addr2;
        case Expr::Span:
        case Expr::Neg:
            break;
    }
    if (a->args.size() != b->args.size()) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Equations, attributes, objects, programs

struct IndexPattern {
    bool is_all = false;
    ExprPtr point;                 // !is_all: constant-evaluable point
    Ident var;                     // is_all: quantifier variable
    std::string constraint_op;     // "", ">", "<", ">=", "<="
    ExprPtr bound;                 // constraint bound, constant-evaluable
    int line = 0, col = 0;
};

struct Equation {
    Ident attr;
    std::vector<IndexPattern> patterns;
    ExprPtr rhs;
    int line = 0, col = 0;
};

// Syntactic base expression; resolved to a concrete Base in semantics.
struct BaseExpr {
    enum Kind { Named, Range, Enum, Prod };
    Kind kind = Named;
    Ident name;                        // Named
    ExprPtr lo, hi;                    // Range
    std::vector<std::string> labels;   // Enum
    std::vector<BaseExpr> factors;     // Prod
    int line = 0, col = 0;
};

struct AttributeDecl {
    Ident name;
    std::optional<BaseExpr> base;          // nullopt = scalar
    std::optional<UnitExpr> unit;
    std::vector<std::string> display_name; // fragments, joined across "br"
    std::optional<std::string> cell_format;
    int line = 0, col = 0;
};

struct ObjectExpr;
using ObjPtr = std::shared_ptr<const ObjectExpr>;

struct ObjectExpr {
    enum Kind { Literal, NamedRef, TemplateApply, Plus, Where };
    Kind kind = Literal;
    std::vector<AttributeDecl> attrs;  // Literal, Plus (the added attributes)
    std::vector<Equation> equations;   // Literal, Where (the added equations)
    Ident name;                        // NamedRef, TemplateApply
    std::vector<ExprPtr> args;         // TemplateApply
    ObjPtr base;                       // Plus, Where
    ObjPtr rhs;                        // Plus with a named/applied right operand
    int line = 0, col = 0;
};

struct LayoutCell {
    enum Kind { Text, Slot };
    Kind kind = Text;
    std::string text;       // Text (may be empty: spacer cell)
    Ident attr;             // Slot
    std::string direction;  // Slot: "down" or "right"
};

struct LayoutRow {
    std::vector<LayoutCell> cells;
};

struct LayoutSpec {
    std::vector<LayoutRow> rows;
};

struct ConstantDef {
    ExprPtr value;
    std::optional<UnitExpr> declared_unit;
    int line = 0, col = 0;
};

struct TemplateParam {
    Ident name;
    std::string type;  // "integer" or "string"
};

struct TemplateDef {
    std::vector<TemplateParam> params;
    ObjPtr body;
    int line = 0, col = 0;
};

struct Program {
    std::vector<std::string> includes;
    std::vector<Ident> units;  // unit symbols, declaration order
    std::vector<std::pair<Ident, BaseExpr>> bases;
    std::vector<std::pair<Ident, ConstantDef>> constants;
    std::vector<std::pair<Ident, TemplateDef>> templates;
    std::vector<std::pair<Ident, ObjPtr>> objects;
    ObjPtr root;
    std::optional<LayoutSpec> layout;

    const BaseExpr* find_base(const Ident& n) const {
        for (auto& [k, v] : bases) if (k == n) return &v;
        return nullptr;
    }
    const ConstantDef* find_constant(const Ident& n) const {
        for (auto& [k, v] : constants) if (k == n) return &v;
        return nullptr;
    }
    const TemplateDef* find_template(const Ident& n) const {
        for (auto& [k, v] : templates) if (k == n) return &v;
        return nullptr;
    }
    ObjPtr find_object(const Ident& n) const {
        for (auto& [k, v] : objects) if (k == n) return v;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Values and cellmaps

struct Value {
    enum Kind { Number, Text, Boolean, Error, Empty };
    enum ErrKind { DIV0, VALUE, NA, REF };
    Kind kind = Empty;
    double num = 0;
    std::string text;
    bool flag = false;
    ErrKind err = VALUE;

    static Value number(double d) { Value v; v.kind = Number; v.num = d; return v; }
    static Value string(std::string s) { Value v; v.kind = Text; v.text = std::move(s); return v; }
    static Value boolean(bool b) { Value v; v.kind = Boolean; v.flag = b; return v; }
    static Value error(ErrKind e) { Value v; v.kind = Error; v.err = e; return v; }
    static Value empty() { return Value{}; }

    bool operator==(const Value& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case Number: return num == o.num;
            case Text: return text == o.text;
            case Boolean: return flag == o.flag;
            case Error: return err == o.err;
            case Empty: return true;
        }
        return false;
    }
};

struct CellEntry {
    enum Content { NumberConst, TextConst, Formula };
    Content content = NumberConst;
    Decimal num;
    std::string text;
    ExprPtr formula;  // Cell/CellRange/literals/Bin/Neg/Call only
    std::optional<std::string> format;
    bool is_header = false;

    bool operator==(const CellEntry& o) const {
        if (content != o.content || format != o.format || is_header != o.is_header) return false;
        switch (content) {
            case NumberConst: return num == o.num;
            case TextConst: return text == o.text;
            case Formula: return expr_equal(formula, o.formula);
        }
        return false;
    }
};

struct CellMap {
    std::map<CellAddr, CellEntry> cells;
    bool operator==(const CellMap&) const = default;
};

// ---------------------------------------------------------------------------
// Allocation

struct OutOfBaseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AttrAlloc {
    CellAddr origin;
    std::vector<std::pair<int, int>> deltas;  // (drow, dcol) per dimension
    std::optional<CellAddr> header_cell;
    std::optional<Base> base;                 // nullopt = scalar
};

inline CellAddr point_to_addr(const AttrAlloc& alloc, const Point& p) {
    if (p.size() != alloc.deltas.size())
        throw OutOfBaseError("point arity does not match allocation");
    CellAddr a = alloc.origin;
    for (std::size_t d = 0; d < p.size(); ++d) {
        const Base& f = alloc.base ? alloc.base->factor(d) : Base::int_range(1, 1);
        if (!coord_in_base(f, p[d]))
            throw OutOfBaseError("coordinate outside base");
        long long ord = coord_ordinal(f, p[d]);
        a.row += alloc.deltas[d].first * int(ord - 1);
        a.col += alloc.deltas[d].second * int(ord - 1);
    }
    return a;
}

}  // namespace mm
