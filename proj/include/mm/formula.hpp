// Spreadsheet-level machinery: formula rendering/parsing (A1 and R1C1),
// the SYLK subset reader, dependency graphs, the deterministic evaluator
// and value formatting.
#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "mm/diagnostics.hpp"
#include "mm/model.hpp"

namespace mm {

enum class RefStyle { A1, R1C1 };

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline int op_prec(const std::string& op) {
    if (op == "=" || op == "<" || op == ">" || op == "<=" || op == ">=" || op == "<>") return 1;
    if (op == "+" || op == "-") return 2;
    if (op == "*" || op == "/") return 3;
    if (op == "^") return 5;
    return 0;
}

}  // namespace detail

inline std::string quote_formula_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string render_ref(CellAddr a, RefStyle style) {
    if (style == RefStyle::A1) return a1_name(a);
    return "R" + std::to_string(a.row) + "C" + std::to_string(a.col);
}

// Renders a cell-level formula (Cell/CellRange/Num/Str/Bin/Neg/Call only).
inline std::string render_formula(const ExprPtr& e, RefStyle style, int parent_prec = 0) {
    if (!e) return "";
    switch (e->kind) {
        case Expr::Num: return e->num.to_string();
        case Expr::Str: return quote_formula_string(e->text);
        case Expr::Cell: return render_ref(e->addr, style);
        case Expr::CellRange:
            return render_ref(e->addr, style) + ":" + render_ref(e->addr2, style);
        case Expr::Neg: {
            std::string s = "-" + render_formula(e->args[0], style, 4);
            return parent_prec > 4 ? "(" + s + ")" : s;
        }
        case Expr::Bin: {
            int p = detail::op_prec(e->text);
            bool right_assoc = e->text == "^";
            std::string s = render_formula(e->args[0], style, right_assoc ? p + 1 : p) + e->text +
                            render_formula(e->args[1], style, right_assoc ? p : p + 1);
            return p < parent_prec ? "(" + s + ")" : s;
        }
        case Expr::Call: {
            std::string s = e->text + "(";
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) s += ",";
                s += render_formula(e->args[i], style, 0);
            }
            return s + ")";
        }
        default: return "";
    }
}

// ---------------------------------------------------------------------------
// Formula parsing (used by the SYLK reader and --set)

struct FormulaParseResult {
    ExprPtr expr;
    std::string error;  // empty on success
};

namespace detail {

class FormulaParser {
public:
    FormulaParser(std::string_view text, RefStyle style) : text_(text), style_(style) {}

    FormulaParseResult run() {
        ExprPtr e = parse_cmp();
        skip_ws();
        if (!err_.empty()) return {nullptr, err_};
        if (pos_ != text_.size()) return {nullptr, "Unexpected input at offset " + std::to_string(pos_)};
        return {e, ""};
    }

private:
    std::string_view text_;
    RefStyle style_;
    std::size_t pos_ = 0;
    std::string err_;

    void fail(std::string m) { if (err_.empty()) err_ = std::move(m); }
    void skip_ws() { while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_; }
    char peek() { skip_ws(); return pos_ < text_.size() ? text_[pos_] : '\0'; }
    bool accept(char c) { if (peek() == c) { ++pos_; return true; } return false; }

    ExprPtr parse_cmp() {
        ExprPtr l = parse_add();
        while (err_.empty()) {
            skip_ws();
            std::string op;
            if (pos_ + 1 < text_.size()) {
                std::string two(text_.substr(pos_, 2));
                if (two == "<=" || two == ">=" || two == "<>") op = two;
            }
            if (op.empty() && pos_ < text_.size() &&
                (text_[pos_] == '=' || text_[pos_] == '<' || text_[pos_] == '>'))
                op = std::string(1, text_[pos_]);
            if (op.empty()) break;
            pos_ += op.size();
            l = make_bin(op, l, parse_add());
        }
        return l;
    }
    ExprPtr parse_add() {
        ExprPtr l = parse_mul();
        while (err_.empty()) {
            char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            l = make_bin(std::string(1, c), l, parse_mul());
        }
        return l;
    }
    ExprPtr parse_mul() {
        ExprPtr l = parse_unary();
        while (err_.empty()) {
            char c = peek();
            if (c != '*' && c != '/') break;
            ++pos_;
            l = make_bin(std::string(1, c), l, parse_unary());
        }
        return l;
    }
    ExprPtr parse_unary() {
        if (accept('-')) return make_neg(parse_unary());
        if (accept('+')) return parse_unary();
        return parse_pow();
    }
    ExprPtr parse_pow() {
        ExprPtr l = parse_atom();
        if (peek() == '^') {
            ++pos_;
            return make_bin("^", l, parse_unary());
        }
        return l;
    }

    std::optional<CellAddr> parse_cell_ref() {
        skip_ws();
        std::size_t save = pos_;
        if (style_ == RefStyle::R1C1) {
            if (pos_ >= text_.size() || (text_[pos_] != 'R' && text_[pos_] != 'r')) return std::nullopt;
            ++pos_;
            long long row = 0;
            std::size_t digits = 0;
            while (pos_ < text_.size() && isdigit((unsigned char)text_[pos_])) {
                row = row * 10 + (text_[pos_] - '0'); ++pos_; ++digits;
            }
            if (!digits || pos_ >= text_.size() || (text_[pos_] != 'C' && text_[pos_] != 'c')) {
                pos_ = save; return std::nullopt;
            }
            ++pos_;
            long long col = 0; digits = 0;
            while (pos_ < text_.size() && isdigit((unsigned char)text_[pos_])) {
                col = col * 10 + (text_[pos_] - '0'); ++pos_; ++digits;
            }
            if (!digits) { pos_ = save; return std::nullopt; }
            return CellAddr{(int)row, (int)col};
        }
        std::size_t i = pos_;
        while (i < text_.size() && isalpha((unsigned char)text_[i])) ++i;
        std::size_t letters = i - pos_;
        std::size_t j = i;
        while (j < text_.size() && isdigit((unsigned char)text_[j])) ++j;
        if (!letters || j == i) return std::nullopt;
        auto a = parse_a1(text_.substr(pos_, j - pos_));
        if (!a) return std::nullopt;
        pos_ = j;
        return a;
    }

    ExprPtr parse_atom() {
        char c = peek();
        if (c == '(') {
            ++pos_;
            ExprPtr e = parse_cmp();
            if (!accept(')')) fail("Missing )");
            return e;
        }
        if (c == '"') {
            ++pos_;
            std::string s;
            while (pos_ < text_.size()) {
                if (text_[pos_] == '"') {
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') { s += '"'; pos_ += 2; }
                    else { ++pos_; return make_str(s); }
                } else {
                    s += text_[pos_++];
                }
            }
            fail("Unterminated string");
            return make_str(s);
        }
        if (isdigit((unsigned char)c) || c == '.') {
            std::size_t i = pos_;
            while (i < text_.size() && (isdigit((unsigned char)text_[i]) || text_[i] == '.')) ++i;
            auto d = Decimal::parse(text_.substr(pos_, i - pos_));
            if (!d) { fail("Bad number"); return make_num(Decimal()); }
            pos_ = i;
            return make_num(*d);
        }
        if (isalpha((unsigned char)c)) {
            // A cell reference, possibly a range, or a function call.
            std::size_t save = pos_;
            auto a = parse_cell_ref();
            if (a) {
                std::size_t after = pos_;
                if (peek() == ':') {
                    ++pos_;
                    auto b = parse_cell_ref();
                    if (b) return make_cell_range(*a, *b);
                    pos_ = after;
                }
                return make_cell(*a);
            }
            pos_ = save;
            std::size_t i = pos_;
            while (i < text_.size() && (isalnum((unsigned char)text_[i]) || text_[i] == '_')) ++i;
            std::string name(text_.substr(pos_, i - pos_));
            for (char& ch : name) ch = (char)toupper((unsigned char)ch);
            pos_ = i;
            if (peek() != '(') { fail("Unknown name " + name); return make_num(Decimal()); }
            ++pos_;
            std::vector<ExprPtr> args;
            if (peek() != ')') {
                args.push_back(parse_cmp());
                // Both "," and ";" are accepted as argument separators.
                while (err_.empty() && (peek() == ',' || peek() == ';')) {
                    ++pos_;
                    args.push_back(parse_cmp());
                }
            }
            if (!accept(')')) fail("Missing ) after arguments of " + name);
            return make_call(name, std::move(args));
        }
        fail(std::string("Unexpected character '") + c + "' in formula");
        ++pos_;
        return make_num(Decimal());
    }
};

}  // namespace detail

inline FormulaParseResult parse_formula(std::string_view text, RefStyle style) {
    return detail::FormulaParser(text, style).run();
}

// ---------------------------------------------------------------------------
// SYLK subset

// Grammar of the written subset (LF line endings):
//   ID;PMM
//   P;P<format>                      (one per distinct format, in first use order)
//   F;Y<row>;X<col>;P<index>         (immediately before the cell it formats)
//   C;Y<row>;X<col>;K<const>[;H]     (numeric constant, or "text" with "" escapes)
//   C;Y<row>;X<col>;E<formula>[;H]   (R1C1 absolute references, uppercase functions)
//   E
// Literal semicolons inside fields are written as ";;". The trailing H flag
// marks header cells so that reading back a written map is lossless.

struct SylkReadResult {
    CellMap map;
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

// Splits a SYLK record into fields, honouring the ";;" escape.
inline std::vector<std::string> split_sylk_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == ';') {
            if (i + 1 < line.size() && line[i + 1] == ';') { cur += ';'; ++i; }
            else { fields.push_back(cur); cur.clear(); }
        } else {
            cur += line[i];
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string escape_sylk_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ';') out += ";;";
        else out += c;
    }
    return out;
}

}  // namespace detail

inline SylkReadResult read_sylk(const std::string& text) {
    SylkReadResult res;
    std::vector<std::string> lines = split_lines(text);
    std::vector<std::string> formats;
    bool saw_id = false, saw_end = false;
    std::optional<std::string> pending_format;
    CellAddr pending_addr{0, 0};
    int lineno = 0;

    for (const std::string& raw : lines) {
        ++lineno;
        if (raw.empty()) continue;
        if (saw_end) {
            res.diagnostics.push_back(error_at(lineno, 1, "Record after E terminator"));
            break;
        }
        std::vector<std::string> f = detail::split_sylk_record(raw);
        const std::string& rt = f[0];

        if (rt == "ID") {
            saw_id = true;
            continue;
        }
        if (rt == "E") { saw_end = true; continue; }
        if (rt == "P") {
            if (f.size() < 2 || f[1].empty() || f[1][0] != 'P') {
                res.diagnostics.push_back(error_at(lineno, 1, "Malformed P record"));
                continue;
            }
            formats.push_back(f[1].substr(1));
            continue;
        }
        if (rt == "F" || rt == "C") {
            int row = 0, col = 0;
            std::string payload;
            bool have_payload = false, header = false;
            char payload_kind = 0;
            bool bad = false;
            for (std::size_t i = 1; i < f.size(); ++i) {
                if (f[i].empty()) { bad = true; break; }
                char tag = f[i][0];
                std::string rest = f[i].substr(1);
                if (tag == 'Y') row = atoi(rest.c_str());
                else if (tag == 'X') col = atoi(rest.c_str());
                else if (tag == 'K' || tag == 'E' || tag == 'P') {
                    payload = rest; payload_kind = tag; have_payload = true;
                } else if (tag == 'H' && rest.empty()) header = true;
                else { bad = true; break; }
            }
            if (bad || row < 1 || col < 1 || !have_payload) {
                res.diagnostics.push_back(error_at(lineno, 1, "Malformed " + rt + " record"));
                continue;
            }
            CellAddr addr{row, col};
            if (rt == "F") {
                if (payload_kind != 'P') {
                    res.diagnostics.push_back(error_at(lineno, 1, "Malformed F record"));
                    continue;
                }
                int idx = atoi(payload.c_str());
                if (idx < 0 || idx >= (int)formats.size()) {
                    res.diagnostics.push_back(error_at(lineno, 1, "F record names unknown format"));
                    continue;
                }
                pending_format = formats[idx];
                pending_addr = addr;
                continue;
            }
            CellEntry entry;
            if (payload_kind == 'E') {
                auto parsed = parse_formula(payload, RefStyle::R1C1);
                if (!parsed.expr) {
                    res.diagnostics.push_back(
                        error_at(lineno, 1, "Bad formula in C record: " + parsed.error));
                    continue;
                }
                entry.content = CellEntry::Formula;
                entry.formula = parsed.expr;
            } else if (!payload.empty() && payload[0] == '"') {
                std::string s;
                bool closed = false;
                for (std::size_t i = 1; i < payload.size(); ++i) {
                    if (payload[i] == '"') {
                        if (i + 1 < payload.size() && payload[i + 1] == '"') { s += '"'; ++i; }
                        else { closed = i + 1 == payload.size(); break; }
                    } else {
                        s += payload[i];
                    }
                }
                if (!closed) {
                    res.diagnostics.push_back(error_at(lineno, 1, "Bad string in C record"));
                    continue;
                }
                entry.content = CellEntry::TextConst;
                entry.text = s;
            } else {
                std::string num = payload;
                bool neg = false;
                if (!num.empty() && num[0] == '-') { neg = true; num = num.substr(1); }
                auto d = Decimal::parse(num);
                if (!d) {
                    res.diagnostics.push_back(error_at(lineno, 1, "Bad constant in C record"));
                    continue;
                }
                entry.content = CellEntry::NumberConst;
                entry.num = neg ? -*d : *d;
            }
            entry.is_header = header;
            if (pending_format && pending_addr == addr) entry.format = *pending_format;
            pending_format.reset();
            res.map.cells[addr] = std::move(entry);
            continue;
        }
        res.diagnostics.push_back(warning_at(lineno, 1, "Skipping record type " + rt));
    }
    if (!saw_id) res.diagnostics.push_back(error_at(1, 1, "Missing ID record"));
    if (!saw_end) res.diagnostics.push_back(error_at(lineno, 1, "Missing E terminator"));
    return res;
}

inline std::string write_sylk(const CellMap& map) {
    std::ostringstream out;
    out << "ID;PMM\n";
    std::vector<std::string> formats;
    auto format_index = [&](const std::string& fmt) -> int {
        for (std::size_t i = 0; i < formats.size(); ++i)
            if (formats[i] == fmt) return (int)i;
        formats.push_back(fmt);
        return (int)formats.size() - 1;
    };
    for (auto& [addr, entry] : map.cells)
        if (entry.format) format_index(*entry.format);
    for (auto& fmt : formats) out << "P;P" << detail::escape_sylk_field(fmt) << "\n";

    for (auto& [addr, entry] : map.cells) {
        std::string yx = "Y" + std::to_string(addr.row) + ";X" + std::to_string(addr.col);
        if (entry.format) out << "F;" << yx << ";P" << format_index(*entry.format) << "\n";
        out << "C;" << yx << ";";
        switch (entry.content) {
            case CellEntry::NumberConst:
                out << "K" << entry.num.to_string();
                break;
            case CellEntry::TextConst:
                out << "K" << detail::escape_sylk_field(quote_formula_string(entry.text));
                break;
            case CellEntry::Formula:
                out << "E" << detail::escape_sylk_field(render_formula(entry.formula, RefStyle::R1C1));
                break;
        }
        if (entry.is_header) out << ";H";
        out << "\n";
    }
    out << "E\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Dependency graph

struct DependencyGraph {
    // Edges point from a cell to the cells its formula reads.
    std::map<CellAddr, std::vector<CellAddr>> reads;
    std::vector<CellAddr> inputs;        // constants read by some formula
    std::vector<CellAddr> outputs;       // formula cells no formula reads
    std::vector<CellAddr> statics;       // constants nothing reads
    std::vector<std::vector<CellAddr>> cycles;
};

inline void collect_refs(const ExprPtr& e, std::vector<CellAddr>& out) {
    if (!e) return;
    if (e->kind == Expr::Cell) {
        out.push_back(e->addr);
    } else if (e->kind == Expr::CellRange) {
        for (int r = std::min(e->addr.row, e->addr2.row); r <= std::max(e->addr.row, e->addr2.row); ++r)
            for (int c = std::min(e->addr.col, e->addr2.col); c <= std::max(e->addr.col, e->addr2.col); ++c)
                out.push_back(CellAddr{r, c});
    }
    for (auto& a : e->args) collect_refs(a, out);
}

inline DependencyGraph build_dependency_graph(const CellMap& map) {
    DependencyGraph g;
    std::set<CellAddr> read_by_someone;
    for (auto& [addr, entry] : map.cells) {
        if (entry.content != CellEntry::Formula) continue;
        std::vector<CellAddr> refs;
        collect_refs(entry.formula, refs);
        std::sort(refs.begin(), refs.end());
        refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
        for (auto& r : refs) read_by_someone.insert(r);
        g.reads[addr] = std::move(refs);
    }
    for (auto& [addr, entry] : map.cells) {
        bool formula = entry.content == CellEntry::Formula;
        bool read = read_by_someone.count(addr) != 0;
        if (formula && !read) g.outputs.push_back(addr);
        if (!formula && read) g.inputs.push_back(addr);
        if (!formula && !read) g.statics.push_back(addr);
    }
    // Cells referenced but absent count as inputs (blank input cells).
    for (auto& addr : read_by_someone)
        if (!map.cells.count(addr)) g.inputs.push_back(addr);
    std::sort(g.inputs.begin(), g.inputs.end());

    // Cycle detection (iterative DFS over formula cells).
    std::map<CellAddr, int> state;  // 0 unvisited, 1 on stack, 2 done
    std::vector<CellAddr> stack;
    std::function<void(CellAddr)> dfs = [&](CellAddr a) {
        auto it = g.reads.find(a);
        if (it == g.reads.end()) { state[a] = 2; return; }
        state[a] = 1;
        stack.push_back(a);
        for (CellAddr r : it->second) {
            int s = state.count(r) ? state[r] : 0;
            if (s == 0) dfs(r);
            else if (s == 1) {
                std::vector<CellAddr> cycle;
                for (auto rit = stack.rbegin(); rit != stack.rend(); ++rit) {
                    cycle.push_back(*rit);
                    if (*rit == r) break;
                }
                std::reverse(cycle.begin(), cycle.end());
                g.cycles.push_back(std::move(cycle));
            }
        }
        stack.pop_back();
        state[a] = 2;
    };
    for (auto& [addr, _] : g.reads)
        if (!state.count(addr)) dfs(addr);
    return g;
}

// ---------------------------------------------------------------------------
// Evaluation

// Deterministic generator behind RAND(): a 64-bit linear congruential
// generator; the seed is forced odd so state never collapses to zero.
class DetRand {
public:
    explicit DetRand(std::uint64_t seed) : state_(seed | 1ull) {}
    double next() {
        state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
        return double(state_ >> 11) / 9007199254740992.0;  // [0,1), 53 bits
    }

private:
    std::uint64_t state_;
};

struct EvalResult {
    std::map<CellAddr, Value> values;
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

struct Evaluator {
    const CellMap& map;
    std::map<CellAddr, Value> values;
    std::map<CellAddr, std::vector<double>> rand_draws;
    std::map<CellAddr, std::size_t> rand_next;

    Value cell_value(CellAddr a) const {
        auto it = values.find(a);
        if (it != values.end()) return it->second;
        return Value::empty();
    }

    static std::optional<double> as_number(const Value& v) {
        switch (v.kind) {
            case Value::Number: return v.num;
            case Value::Boolean: return v.flag ? 1.0 : 0.0;
            case Value::Empty: return 0.0;
            default: return std::nullopt;
        }
    }

    Value eval(const ExprPtr& e, CellAddr self) {
        switch (e->kind) {
            case Expr::Num: return Value::number(e->num.to_double());
            case Expr::Str: return Value::string(e->text);
            case Expr::Cell: return cell_value(e->addr);
            case Expr::CellRange: return Value::error(Value::VALUE);  // only legal in calls
            case Expr::Neg: {
                Value v = eval(e->args[0], self);
                if (v.kind == Value::Error) return v;
                auto n = as_number(v);
                return n ? Value::number(-*n) : Value::error(Value::VALUE);
            }
            case Expr::Bin: return eval_bin(e, self);
            case Expr::Call: return eval_call(e, self);
            default: return Value::error(Value::VALUE);
        }
    }

    Value eval_bin(const ExprPtr& e, CellAddr self) {
        Value l = eval(e->args[0], self);
        Value r = eval(e->args[1], self);
        if (l.kind == Value::Error) return l;
        if (r.kind == Value::Error) return r;
        const std::string& op = e->text;
        if (op == "=" || op == "<>") {
            bool eq;
            if (l.kind == Value::Text || r.kind == Value::Text) {
                eq = l.kind == Value::Text && r.kind == Value::Text && l.text == r.text;
            } else {
                auto a = as_number(l), b = as_number(r);
                if (!a || !b) return Value::error(Value::VALUE);
                eq = *a == *b;
            }
            return Value::boolean(op == "=" ? eq : !eq);
        }
        auto a = as_number(l), b = as_number(r);
        if (!a || !b) return Value::error(Value::VALUE);
        if (op == "+") return Value::number(*a + *b);
        if (op == "-") return Value::number(*a - *b);
        if (op == "*") return Value::number(*a * *b);
        if (op == "/") return *b == 0 ? Value::error(Value::DIV0) : Value::number(*a / *b);
        if (op == "^") return Value::number(std::pow(*a, *b));
        if (op == "<") return Value::boolean(*a < *b);
        if (op == ">") return Value::boolean(*a > *b);
        if (op == "<=") return Value::boolean(*a <= *b);
        if (op == ">=") return Value::boolean(*a >= *b);
        return Value::error(Value::VALUE);
    }

    // Flattens call arguments, expanding ranges; skips blank-and-absent cells
    // inside ranges (they do not contribute to aggregates).
    bool gather(const ExprPtr& a, CellAddr self, std::vector<Value>& out, Value& err) {
        if (a->kind == Expr::CellRange) {
            int r1 = std::min(a->addr.row, a->addr2.row), r2 = std::max(a->addr.row, a->addr2.row);
            int c1 = std::min(a->addr.col, a->addr2.col), c2 = std::max(a->addr.col, a->addr2.col);
            for (int r = r1; r <= r2; ++r)
                for (int c = c1; c <= c2; ++c) {
                    Value v = cell_value(CellAddr{r, c});
                    if (v.kind == Value::Error) { err = v; return false; }
                    if (v.kind == Value::Empty) continue;
                    out.push_back(v);
                }
            return true;
        }
        Value v = eval(a, self);
        if (v.kind == Value::Error) { err = v; return false; }
        out.push_back(v);
        return true;
    }

    Value eval_call(const ExprPtr& e, CellAddr self) {
        const std::string& fn = e->text;
        if (fn == "RAND") {
            auto& queue = rand_draws[self];
            std::size_t& next = rand_next[self];
            if (next < queue.size()) return Value::number(queue[next++]);
            return Value::number(0);  // draws are always pre-seeded; defensive
        }
        if (fn == "IF") {
            if (e->args.size() != 3) return Value::error(Value::VALUE);
            Value c = eval(e->args[0], self);
            if (c.kind == Value::Error) return c;
            auto n = as_number(c);
            if (!n) return Value::error(Value::VALUE);
            return eval(e->args[*n != 0 ? 1 : 2], self);
        }
        if (fn == "ISERR") {
            if (e->args.size() != 1) return Value::error(Value::VALUE);
            Value v = eval(e->args[0], self);
            return Value::boolean(v.kind == Value::Error);
        }
        if (fn == "MATCH") {
            // MATCH(needle, range, 0): position of first exact match, else #N/A.
            if (e->args.size() != 3) return Value::error(Value::VALUE);
            Value needle = eval(e->args[0], self);
            if (needle.kind == Value::Error) return needle;
            Value type = eval(e->args[2], self);
            auto t = as_number(type);
            if (!t || *t != 0) return Value::error(Value::VALUE);
            std::vector<Value> hay;
            Value err = Value::empty();
            if (e->args[1]->kind != Expr::CellRange) return Value::error(Value::VALUE);
            const auto& rng = e->args[1];
            int r1 = std::min(rng->addr.row, rng->addr2.row), r2 = std::max(rng->addr.row, rng->addr2.row);
            int c1 = std::min(rng->addr.col, rng->addr2.col), c2 = std::max(rng->addr.col, rng->addr2.col);
            int pos = 0;
            for (int r = r1; r <= r2; ++r)
                for (int c = c1; c <= c2; ++c) {
                    ++pos;
                    Value v = cell_value(CellAddr{r, c});
                    if (v == needle) return Value::number(pos);
                    if (needle.kind == Value::Number && v.kind == Value::Number &&
                        v.num == needle.num)
                        return Value::number(pos);
                }
            return Value::error(Value::NA);
        }
        std::vector<Value> args;
        Value err = Value::empty();
        for (auto& a : e->args)
            if (!gather(a, self, args, err)) return err;
        std::vector<double> nums;
        for (auto& v : args) {
            if (v.kind == Value::Text) continue;  // text ignored by aggregates
            auto n = as_number(v);
            if (!n) return Value::error(Value::VALUE);
            nums.push_back(*n);
        }
        if (fn == "SUM") {
            double s = 0;
            for (double d : nums) s += d;
            return Value::number(s);
        }
        if (fn == "AVERAGE") {
            if (nums.empty()) return Value::error(Value::DIV0);
            double s = 0;
            for (double d : nums) s += d;
            return Value::number(s / (double)nums.size());
        }
        if (fn == "MIN" || fn == "MAX") {
            if (nums.empty()) return Value::number(0);
            double m = nums[0];
            for (double d : nums)
                m = fn == "MIN" ? std::min(m, d) : std::max(m, d);
            return Value::number(m);
        }
        return Value::error(Value::VALUE);
    }
};

inline void count_rands(const ExprPtr& e, int& n) {
    if (!e) return;
    if (e->kind == Expr::Call && e->text == "RAND") ++n;
    for (auto& a : e->args) count_rands(a, n);
}

}  // namespace detail

// Evaluates every formula cell. RAND draws are consumed deterministically:
// cells in row-major order, then left to right within each formula, with
// the draws taken before any evaluation happens.
inline EvalResult evaluate(const CellMap& map, std::uint64_t seed,
                           const std::map<CellAddr, Value>& overrides = {}) {
    EvalResult res;
    detail::Evaluator ev{map, {}, {}, {}};

    DetRand rng(seed);
    for (auto& [addr, entry] : map.cells) {
        if (entry.content != CellEntry::Formula) continue;
        int n = 0;
        detail::count_rands(entry.formula, n);
        for (int i = 0; i < n; ++i) ev.rand_draws[addr].push_back(rng.next());
    }

    // Constants first.
    for (auto& [addr, entry] : map.cells) {
        if (entry.content == CellEntry::NumberConst)
            ev.values[addr] = Value::number(entry.num.to_double());
        else if (entry.content == CellEntry::TextConst)
            ev.values[addr] = Value::string(entry.text);
    }
    for (auto& [addr, v] : overrides) ev.values[addr] = v;

    // Topological order over formula cells; cells on cycles become #REF!.
    DependencyGraph g = build_dependency_graph(map);
    for (auto& cycle : g.cycles) {
        std::string desc;
        for (auto& a : cycle) desc += (desc.empty() ? "" : " -> ") + a1_name(a);
        res.diagnostics.push_back(warning_at(1, 1, "Circular reference: " + desc));
    }
    std::set<CellAddr> on_cycle;
    for (auto& cycle : g.cycles)
        for (auto& a : cycle) on_cycle.insert(a);

    std::map<CellAddr, int> remaining;
    std::map<CellAddr, std::vector<CellAddr>> dependents;
    std::vector<CellAddr> ready;
    for (auto& [addr, refs] : g.reads) {
        int n = 0;
        for (CellAddr r : refs)
            if (g.reads.count(r) && !on_cycle.count(r)) {
                ++n;
                dependents[r].push_back(addr);
            }
        remaining[addr] = n;
        if (n == 0) ready.push_back(addr);
    }
    // Deterministic order among ready cells: row-major.
    std::sort(ready.begin(), ready.end());
    std::size_t qi = 0;
    while (qi < ready.size()) {
        CellAddr a = ready[qi++];
        if (on_cycle.count(a)) {
            ev.values[a] = Value::error(Value::REF);
        } else if (!overrides.count(a)) {
            ev.values[a] = ev.eval(map.cells.at(a).formula, a);
        }
        for (CellAddr d : dependents[a])
            if (--remaining[d] == 0) ready.push_back(d);
    }
    for (auto& a : on_cycle)
        if (!ev.values.count(a)) ev.values[a] = Value::error(Value::REF);

    res.values = std::move(ev.values);
    return res;
}

// ---------------------------------------------------------------------------
// Value formatting

inline std::string format_double(double d) {
    if (d == (long long)d && std::abs(d) < 1e15)
        return std::to_string((long long)d);
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, p);
}

inline std::string error_name(Value::ErrKind e) {
    switch (e) {
        case Value::DIV0: return "#DIV/0!";
        case Value::VALUE: return "#VALUE!";
        case Value::NA: return "#N/A";
        case Value::REF: return "#REF!";
    }
    return "#VALUE!";
}

// Renders a value under an optional cell format. "0.00" rounds half away
// from zero to two places; "hh:mm" treats the number as a fraction of a day.
inline std::string format_value(const Value& v, const std::optional<std::string>& format) {
    switch (v.kind) {
        case Value::Empty: return "";
        case Value::Text: return v.text;
        case Value::Boolean: return v.flag ? "TRUE" : "FALSE";
        case Value::Error: return error_name(v.err);
        case Value::Number: break;
    }
    double d = v.num;
    if (format && *format == "0.00") {
        double scaled = d * 100.0;
        long long n = (long long)(scaled >= 0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5));
        std::string sign = n < 0 ? "-" : "";
        unsigned long long m = n < 0 ? -(unsigned long long)n : (unsigned long long)n;
        std::string digits = std::to_string(m);
        while (digits.size() < 3) digits.insert(digits.begin(), '0');
        return sign + digits.substr(0, digits.size() - 2) + "." + digits.substr(digits.size() - 2);
    }
    if (format && *format == "hh:mm") {
        double minutes = std::floor(d * 24.0 * 60.0 + 1e-9);
        long long total = (long long)minutes;
        total %= 24 * 60;
        if (total < 0) total += 24 * 60;
        long long h = total / 60, m = total % 60;
        char buf[8];
        std::snprintf(buf, sizeof buf, "%02lld:%02lld", h, m);
        return buf;
    }
    return format_double(d);
}

}  // namespace mm
