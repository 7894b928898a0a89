// Recursive-descent parser for MM source and the HTML-like layout section.
//
// Parsing is error-tolerant: syntax errors become diagnostics and the
// parser resynchronises at `and` and declaration boundaries so one run can
// report several problems. All three attribute-block spellings are
// accepted (`attributes < .. >`, `attribute < .. >`, bare `< .. >`), and
// `;` terminators are optional everywhere.
#pragma once

#include <functional>
#include <set>

#include "mm/lexer.hpp"
#include "mm/model.hpp"

namespace mm {

struct ParseResult {
    Program program;
    std::vector<Diagnostic> diagnostics;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    ParseResult run() {
        parse_toplevel();
        if (!prog_.root) {
            if (!prog_.objects.empty()) {
                // The last object defined in the file doubles as its root.
                auto node = std::make_shared<ObjectExpr>();
                node->kind = ObjectExpr::NamedRef;
                node->name = prog_.objects.back().first;
                prog_.root = node;
            } else {
                auto node = std::make_shared<ObjectExpr>();
                node->kind = ObjectExpr::Literal;
                prog_.root = node;
            }
        }
        sort_diagnostics(diags_);
        return ParseResult{std::move(prog_), std::move(diags_)};
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Program prog_;
    std::vector<Diagnostic> diags_;
    std::set<std::string> unit_symbols_;

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t n = 1) const {
        return toks_[std::min(pos_ + n, toks_.size() - 1)];
    }
    bool at_end() const { return cur().kind == Token::End; }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    bool is_kw(const char* k) const { return cur().kind == Token::Keyword && cur().text == k; }
    bool is_punct(const char* p) const { return cur().kind == Token::Punct && cur().text == p; }
    bool accept_kw(const char* k) { if (is_kw(k)) { next(); return true; } return false; }
    bool accept_punct(const char* p) { if (is_punct(p)) { next(); return true; } return false; }

    void err_here(std::string msg) { diags_.push_back(error_at(cur().line, cur().col, std::move(msg))); }

    bool expect_punct(const char* p) {
        if (accept_punct(p)) return true;
        err_here(std::string("Expected '") + p + "'");
        return false;
    }
    void skip_semis() { while (accept_punct(";")) {} }

    // ---- top level ---------------------------------------------------------

    void parse_toplevel() {
        while (!at_end()) {
            skip_semis();
            if (at_end()) break;
            if (accept_kw("include")) {
                if (cur().kind == Token::String) prog_.includes.push_back(next().text);
                else err_here("Expected file name string after 'include'");
            } else if (accept_kw("unit")) {
                if (cur().kind == Token::Identifier) {
                    prog_.units.push_back(next().text);
                    unit_symbols_.insert(prog_.units.back());
                } else {
                    err_here("Expected unit symbol after 'unit'");
                }
            } else if (accept_kw("base")) {
                Token nametok = cur();
                if (nametok.kind != Token::Identifier) { err_here("Expected base name"); recover(); continue; }
                next();
                expect_punct("=");
                prog_.bases.emplace_back(nametok.text, parse_base_product());
            } else if (accept_kw("constant")) {
                parse_constant();
            } else if (is_kw("layout")) {
                Token kw = next();
                if (cur().kind == Token::LayoutBody) {
                    Token body = next();
                    prog_.layout = parse_layout_text(body.text, body.line, body.col, diags_);
                } else {
                    diags_.push_back(error_at(kw.line, kw.col, "Expected layout body"));
                }
            } else if (is_kw("attributes") || is_kw("attribute") || is_punct("<")) {
                prog_.root = parse_objexpr();
            } else if (cur().kind == Token::Identifier) {
                parse_definition_or_root();
            } else {
                err_here("Unexpected token '" + cur().text + "'");
                next();
            }
        }
    }

    void recover() {
        while (!at_end() && !is_punct(";") && cur().kind != Token::Keyword) next();
    }

    void parse_constant() {
        Token nametok = cur();
        if (nametok.kind != Token::Identifier) { err_here("Expected constant name"); recover(); return; }
        next();
        ConstantDef def;
        def.line = nametok.line;
        def.col = nametok.col;
        if (accept_punct(":")) def.declared_unit = parse_unit_expr();
        expect_punct("=");
        def.value = parse_expr();
        prog_.constants.emplace_back(nametok.text, std::move(def));
    }

    // `name = objexpr`, `name(T:integer,..) = objexpr`, or a root object
    // expression that happens to start with an identifier.
    void parse_definition_or_root() {
        const Token& name = cur();
        if (peek().kind == Token::Punct && peek().text == "=") {
            next(); next();
            prog_.objects.emplace_back(name.text, parse_objexpr());
            return;
        }
        if (peek().kind == Token::Punct && peek().text == "(" &&
            peek(2).kind == Token::Identifier && peek(3).kind == Token::Punct &&
            peek(3).text == ":") {
            next(); next();
            TemplateDef def;
            def.line = name.line;
            def.col = name.col;
            while (!at_end() && !is_punct(")")) {
                if (cur().kind != Token::Identifier) { err_here("Expected parameter name"); break; }
                TemplateParam p;
                p.name = next().text;
                expect_punct(":");
                if (cur().kind == Token::Identifier &&
                    (cur().text == "integer" || cur().text == "string")) {
                    p.type = next().text;
                } else {
                    err_here("Expected parameter type 'integer' or 'string'");
                    p.type = "integer";
                }
                def.params.push_back(std::move(p));
                accept_punct(",");
            }
            expect_punct(")");
            expect_punct("=");
            def.body = parse_objexpr();
            prog_.templates.emplace_back(name.text, std::move(def));
            return;
        }
        prog_.root = parse_objexpr();
    }

    // ---- object expressions ------------------------------------------------

    ObjPtr parse_objexpr() {
        ObjPtr node = parse_obj_primary();
        while (true) {
            if (is_kw("plus")) {
                Token kw = next();
                auto plus = std::make_shared<ObjectExpr>();
                plus->kind = ObjectExpr::Plus;
                plus->base = node;
                plus->line = kw.line;
                plus->col = kw.col;
                if (accept_kw("attributes") || accept_kw("attribute")) {
                    if (expect_punct("<")) plus->attrs = parse_attr_decls();
                } else {
                    plus->rhs = parse_obj_primary();  // plus over a named object
                }
                node = plus;
            } else if (is_kw("where")) {
                Token kw = next();
                auto where = std::make_shared<ObjectExpr>();
                where->kind = ObjectExpr::Where;
                where->base = node;
                where->line = kw.line;
                where->col = kw.col;
                where->equations = parse_equations();
                node = where;
            } else {
                break;
            }
        }
        return node;
    }

    ObjPtr parse_obj_primary() {
        auto node = std::make_shared<ObjectExpr>();
        node->line = cur().line;
        node->col = cur().col;
        if (accept_kw("attributes") || accept_kw("attribute") || is_punct("<")) {
            node->kind = ObjectExpr::Literal;
            if (expect_punct("<")) node->attrs = parse_attr_decls();
            return node;
        }
        if (cur().kind == Token::Identifier) {
            Token name = next();
            node->name = name.text;
            if (accept_punct("(")) {
                node->kind = ObjectExpr::TemplateApply;
                while (!at_end() && !is_punct(")")) {
                    node->args.push_back(parse_expr());
                    if (!accept_punct(",")) break;
                }
                expect_punct(")");
            } else {
                node->kind = ObjectExpr::NamedRef;
            }
            return node;
        }
        err_here("Expected an object expression");
        next();
        node->kind = ObjectExpr::Literal;
        return node;
    }

    std::vector<AttributeDecl> parse_attr_decls() {
        std::vector<AttributeDecl> decls;
        while (!at_end() && !is_punct(">")) {
            skip_semis();
            if (is_punct(">") || at_end()) break;
            if (cur().kind != Token::Identifier) {
                err_here("Expected attribute name");
                next();
                continue;
            }
            AttributeDecl d;
            Token name = next();
            d.name = name.text;
            d.line = name.line;
            d.col = name.col;
            if (accept_punct(":")) {
                d.base = parse_base_product();
            } else if (is_punct("[")) {
                next();
                d.base = parse_base_product(/*bare_range=*/true);
                expect_punct("]");
            }
            parse_qualifiers(d);
            decls.push_back(std::move(d));
        }
        expect_punct(">");
        return decls;
    }

    void parse_qualifiers(AttributeDecl& d) {
        while (true) {
            if (accept_kw("name")) {
                if (cur().kind == Token::String) d.display_name.push_back(next().text);
                else err_here("Expected string after 'name'");
                while (accept_kw("br")) {
                    if (cur().kind == Token::String) d.display_name.push_back(next().text);
                    else { err_here("Expected string after 'br'"); break; }
                }
            } else if (is_kw("format")) {
                Token kw = next();
                // Everything on the same line as `format` is the format string.
                std::string fmt;
                while (!at_end() && cur().line == kw.line &&
                       cur().kind != Token::Keyword && !is_punct(">") && !is_punct(";")) {
                    fmt += next().text;
                }
                if (fmt.empty()) err_here("Expected format string");
                else d.cell_format = fmt;
            } else if (accept_kw("unit")) {
                d.unit = parse_unit_expr();
            } else {
                break;
            }
        }
    }

    // ---- bases -------------------------------------------------------------

    BaseExpr parse_base_product(bool bare_range = false) {
        BaseExpr first = parse_base_factor(bare_range);
        if (!is_punct("*")) return first;
        BaseExpr prod;
        prod.kind = BaseExpr::Prod;
        prod.line = first.line;
        prod.col = first.col;
        prod.factors.push_back(std::move(first));
        while (accept_punct("*")) prod.factors.push_back(parse_base_factor(false));
        return prod;
    }

    BaseExpr parse_base_factor(bool bare_range) {
        BaseExpr b;
        b.line = cur().line;
        b.col = cur().col;
        if (accept_punct("[")) {
            b.kind = BaseExpr::Range;
            b.lo = parse_expr();
            expect_punct(":");
            b.hi = parse_expr();
            expect_punct("]");
            return b;
        }
        if (accept_punct("{")) {
            b.kind = BaseExpr::Enum;
            while (!at_end() && !is_punct("}")) {
                if (cur().kind == Token::String) b.labels.push_back(next().text);
                else { err_here("Expected label string"); next(); }
                accept_punct(",");
            }
            expect_punct("}");
            return b;
        }
        if (cur().kind == Token::Identifier || cur().kind == Token::Number) {
            // Either a named base or, inside brackets, a bare `lo:hi` range.
            // Unary level only: a `*` here separates product factors.
            ExprPtr lo = parse_unary();
            if (bare_range && accept_punct(":")) {
                b.kind = BaseExpr::Range;
                b.lo = lo;
                b.hi = parse_unary();
                return b;
            }
            if (lo->kind == Expr::NameRef && lo->args.empty()) {
                b.kind = BaseExpr::Named;
                b.name = lo->text;
                return b;
            }
            diags_.push_back(error_at(b.line, b.col, "Expected a base"));
            b.kind = BaseExpr::Range;
            b.lo = lo;
            b.hi = lo;
            return b;
        }
        err_here("Expected a base");
        next();
        b.kind = BaseExpr::Range;
        b.lo = make_num(Decimal::from_int(1));
        b.hi = make_num(Decimal::from_int(1));
        return b;
    }

    // ---- equations ---------------------------------------------------------

    std::vector<Equation> parse_equations() {
        std::vector<Equation> eqs;
        while (true) {
            if (cur().kind != Token::Identifier) {
                err_here("Expected an equation");
                break;
            }
            eqs.push_back(parse_equation());
            skip_semis();
            if (!accept_kw("and")) break;
        }
        return eqs;
    }

    Equation parse_equation() {
        Equation eq;
        Token name = next();
        eq.attr = name.text;
        eq.line = name.line;
        eq.col = name.col;
        if (accept_punct("[")) {
            while (!at_end() && !is_punct("]")) {
                eq.patterns.push_back(parse_pattern());
                if (!accept_punct(",")) break;
            }
            expect_punct("]");
        }
        expect_punct("=");
        eq.rhs = parse_expr();
        return eq;
    }

    IndexPattern parse_pattern() {
        IndexPattern p;
        p.line = cur().line;
        p.col = cur().col;
        if (accept_kw("all")) {
            p.is_all = true;
            if (cur().kind == Token::Identifier) p.var = next().text;
            else err_here("Expected quantifier variable after 'all'");
            if (is_punct(">") || is_punct("<") || is_punct(">=") || is_punct("<=")) {
                p.constraint_op = next().text;
                p.bound = parse_expr();
            }
        } else {
            p.point = parse_expr();
        }
        return p;
    }

    // ---- expressions -------------------------------------------------------

    ExprPtr parse_expr() { return parse_cmp(); }

    ExprPtr parse_cmp() {
        ExprPtr lhs = parse_add();
        while (is_punct("=") || is_punct("<") || is_punct(">") || is_punct("<=") ||
               is_punct(">=") || is_punct("<>")) {
            Token op = next();
            lhs = make_bin(op.text, lhs, parse_add(), op.line, op.col);
        }
        return lhs;
    }

    ExprPtr parse_add() {
        ExprPtr lhs = parse_mul();
        while (is_punct("+") || is_punct("-")) {
            Token op = next();
            lhs = make_bin(op.text, lhs, parse_mul(), op.line, op.col);
        }
        return lhs;
    }

    ExprPtr parse_mul() {
        ExprPtr lhs = parse_unary();
        while (is_punct("*") || is_punct("/")) {
            Token op = next();
            lhs = make_bin(op.text, lhs, parse_unary(), op.line, op.col);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (is_punct("-")) {
            Token op = next();
            return make_neg(parse_unary(), op.line, op.col);
        }
        return parse_pow();
    }

    ExprPtr parse_pow() {
        ExprPtr base = parse_primary();
        if (is_punct("^")) {
            Token op = next();
            return make_bin("^", base, parse_unary(), op.line, op.col);
        }
        return base;
    }

    ExprPtr parse_primary() {
        Token t = cur();
        if (t.kind == Token::Number) {
            next();
            auto d = Decimal::parse(t.text);
            if (!d) {
                diags_.push_back(error_at(t.line, t.col, "Bad number '" + t.text + "'"));
                d = Decimal::from_int(0);
            }
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Num;
            e->num = *d;
            e->line = t.line;
            e->col = t.col;
            // `1 cm`, `3cm`, `2(cm/sec)`: a unit expression may follow.
            if (cur().kind == Token::Identifier && unit_symbols_.count(cur().text)) {
                e->unit = parse_unit_expr(/*known_only=*/true);
            } else if (is_punct("(") && peek().kind == Token::Identifier &&
                       unit_symbols_.count(peek().text)) {
                next();
                e->unit = parse_unit_expr();
                expect_punct(")");
            }
            return e;
        }
        if (t.kind == Token::String) {
            next();
            return make_str(t.text, t.line, t.col);
        }
        if (is_kw("range")) {
            next();
            if (is_punct("(")) {
                // Decompiler intermediate form: a literal cell range.
                next();
                auto from = expect_a1();
                expect_punct(":");
                auto to = expect_a1();
                expect_punct(")");
                return make_cell_range(from, to, t.line, t.col);
            }
            if (cur().kind != Token::Identifier) {
                err_here("Expected attribute name after 'range'");
                return make_num(Decimal::from_int(0), t.line, t.col);
            }
            Token name = next();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::RangeRef;
            e->text = name.text;
            e->line = t.line;
            e->col = t.col;
            if (accept_punct("[")) {
                while (!at_end() && !is_punct("]")) {
                    ExprPtr lo = parse_expr();
                    if (accept_punct(":")) {
                        auto span = std::make_shared<Expr>();
                        span->kind = Expr::Span;
                        span->args = {lo, parse_expr()};
                        e->args.push_back(span);
                    } else {
                        e->args.push_back(lo);
                    }
                    if (!accept_punct(",")) break;
                }
                expect_punct("]");
            }
            return e;
        }
        if (t.kind == Token::Identifier) {
            next();
            if (accept_punct("(")) {
                std::vector<ExprPtr> args;
                while (!at_end() && !is_punct(")")) {
                    args.push_back(parse_expr());
                    if (!accept_punct(",")) break;
                }
                expect_punct(")");
                std::string fn = t.text;
                for (auto& c : fn) c = char(std::toupper((unsigned char)c));
                return make_call(fn, std::move(args), t.line, t.col);
            }
            std::vector<ExprPtr> indices;
            bool bracketed = false;
            if (accept_punct("[")) {
                bracketed = true;
                while (!at_end() && !is_punct("]")) {
                    indices.push_back(parse_expr());
                    if (!accept_punct(",")) break;
                }
                expect_punct("]");
            }
            return make_name(t.text, std::move(indices), bracketed, t.line, t.col);
        }
        if (accept_punct("(")) {
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        err_here("Expected an expression");
        if (!at_end()) next();
        return make_num(Decimal::from_int(0), t.line, t.col);
    }

    CellAddr expect_a1() {
        if (cur().kind == Token::Identifier) {
            auto a = parse_a1(cur().text);
            if (a) { next(); return *a; }
        }
        err_here("Expected a cell address");
        if (!at_end()) next();
        return CellAddr{1, 1};
    }

    UnitExpr parse_unit_expr(bool known_only = false) {
        auto term = [&]() -> UnitExpr {
            if (cur().kind != Token::Identifier) {
                err_here("Expected unit symbol");
                return UnitExpr{};
            }
            std::string sym = next().text;
            long long exp = 1;
            if (accept_punct("^")) {
                bool neg = accept_punct("-");
                if (cur().kind == Token::Number) {
                    exp = std::stoll(next().text);
                    if (neg) exp = -exp;
                } else {
                    err_here("Expected integer exponent");
                }
            }
            return unit_pow(unit_of(sym), exp);
        };
        UnitExpr u = term();
        while (is_punct("*") || is_punct("/")) {
            bool ok = peek().kind == Token::Identifier &&
                      (!known_only || unit_symbols_.count(peek().text));
            if (!ok) break;
            std::string op = next().text;
            UnitExpr rhs = term();
            u = op == "*" ? unit_mul(u, rhs) : unit_div(u, rhs);
        }
        return u;
    }

public:
    // ---- layout ------------------------------------------------------------

    // Parses the raw text following the `layout` keyword. The body is
    // HTML-like: <table>, <tr>, <td>, static text, and <attr name="X"/>
    // slots with an optional dir="down|right".
    static LayoutSpec parse_layout_text(const std::string& text, int base_line, int base_col,
                                        std::vector<Diagnostic>& diags) {
        LayoutSpec spec;
        std::size_t i = 0;
        int line = base_line, col = base_col;

        auto advance = [&](std::size_t n = 1) {
            for (std::size_t k = 0; k < n && i < text.size(); ++k) {
                if (text[i] == '\n') { ++line; col = 1; }
                else ++col;
                ++i;
            }
        };
        auto skip_ws = [&]() {
            while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                                       text[i] == '\r'))
                advance();
        };
        auto lower = [](std::string s) {
            for (auto& c : s) c = char(std::tolower((unsigned char)c));
            return s;
        };

        struct Tag {
            bool closing = false, selfclose = false;
            std::string name;
            std::map<std::string, std::string> attrs;
            int line = 0, col = 0;
        };
        auto read_tag = [&]() -> Tag {
            Tag tag;
            tag.line = line;
            tag.col = col;
            advance();  // '<'
            if (i < text.size() && text[i] == '/') { tag.closing = true; advance(); }
            while (i < text.size() && (std::isalnum((unsigned char)text[i]) || text[i] == '_')) {
                tag.name += text[i];
                advance();
            }
            tag.name = lower(tag.name);
            while (true) {
                skip_ws();
                if (i >= text.size()) break;
                if (text[i] == '/') {
                    tag.selfclose = true;
                    advance();
                    continue;
                }
                if (text[i] == '>') { advance(); break; }
                std::string key;
                while (i < text.size() && (std::isalnum((unsigned char)text[i]) || text[i] == '_')) {
                    key += text[i];
                    advance();
                }
                if (key.empty()) { advance(); continue; }
                skip_ws();
                std::string value;
                if (i < text.size() && text[i] == '=') {
                    advance();
                    skip_ws();
                    if (i < text.size() && text[i] == '"') {
                        advance();
                        while (i < text.size() && text[i] != '"') { value += text[i]; advance(); }
                        advance();
                    } else {
                        while (i < text.size() && !std::isspace((unsigned char)text[i]) &&
                               text[i] != '>' && text[i] != '/') {
                            value += text[i];
                            advance();
                        }
                    }
                }
                tag.attrs[lower(key)] = value;
            }
            return tag;
        };
        auto read_text = [&]() -> std::string {
            std::string s;
            while (i < text.size() && text[i] != '<') { s += text[i]; advance(); }
            // Collapse interior whitespace runs; trim the ends.
            std::string out;
            bool space = false;
            for (char c : s) {
                if (std::isspace((unsigned char)c)) { space = !out.empty(); continue; }
                if (space) out += ' ';
                space = false;
                out += c;
            }
            return out;
        };

        skip_ws();
        if (i >= text.size() || text[i] != '<') {
            diags.push_back(error_at(line, col, "Expected <table> in layout"));
            return spec;
        }
        Tag table = read_tag();
        if (table.name != "table" || table.closing) {
            diags.push_back(error_at(table.line, table.col, "Expected <table> in layout"));
            return spec;
        }
        bool table_closed = false;
        while (i < text.size()) {
            skip_ws();
            if (i >= text.size()) break;
            if (text[i] != '<') { read_text(); continue; }
            Tag tag = read_tag();
            if (tag.closing && tag.name == "table") { table_closed = true; break; }
            if (tag.closing) {
                diags.push_back(error_at(tag.line, tag.col, "Mismatched tag </" + tag.name + ">"));
                continue;
            }
            if (tag.name != "tr") {
                diags.push_back(error_at(tag.line, tag.col, "Unknown tag <" + tag.name + ">"));
                continue;
            }
            LayoutRow row;
            bool row_closed = false;
            while (i < text.size()) {
                skip_ws();
                if (i >= text.size()) break;
                if (text[i] != '<') { read_text(); continue; }
                Tag cell_tag = read_tag();
                if (cell_tag.closing && cell_tag.name == "tr") { row_closed = true; break; }
                if (cell_tag.closing && cell_tag.name == "table") {
                    diags.push_back(error_at(cell_tag.line, cell_tag.col, "Mismatched tag </table>"));
                    table_closed = true;
                    break;
                }
                if (cell_tag.name != "td" || cell_tag.closing) {
                    diags.push_back(
                        error_at(cell_tag.line, cell_tag.col, "Unknown tag <" + cell_tag.name + ">"));
                    continue;
                }
                LayoutCell cell;
                cell.kind = LayoutCell::Text;
                bool td_closed = false;
                while (i < text.size()) {
                    if (text[i] != '<') {
                        std::string s = read_text();
                        if (!s.empty()) { cell.kind = LayoutCell::Text; cell.text = s; }
                        continue;
                    }
                    Tag inner = read_tag();
                    if (inner.closing && inner.name == "td") { td_closed = true; break; }
                    if (inner.name == "attr" && inner.selfclose) {
                        cell.kind = LayoutCell::Slot;
                        auto it = inner.attrs.find("name");
                        if (it == inner.attrs.end())
                            diags.push_back(
                                error_at(inner.line, inner.col, "<attr> tag needs a name"));
                        else
                            cell.attr = it->second;
                        auto dir = inner.attrs.find("dir");
                        cell.direction = dir != inner.attrs.end() ? dir->second : "down";
                        if (cell.direction != "down" && cell.direction != "right") {
                            diags.push_back(error_at(inner.line, inner.col,
                                                     "Bad dir '" + cell.direction + "'"));
                            cell.direction = "down";
                        }
                        continue;
                    }
                    diags.push_back(
                        error_at(inner.line, inner.col, "Mismatched tag <" + inner.name + ">"));
                    break;
                }
                if (!td_closed && i >= text.size())
                    diags.push_back(error_at(cell_tag.line, cell_tag.col, "Mismatched tag <td>"));
                row.cells.push_back(std::move(cell));
            }
            if (!row_closed && i >= text.size())
                diags.push_back(error_at(tag.line, tag.col, "Mismatched tag <tr>"));
            spec.rows.push_back(std::move(row));
            if (table_closed) break;
        }
        if (!table_closed)
            diags.push_back(error_at(table.line, table.col, "Mismatched tag <table>"));
        return spec;
    }
};

inline ParseResult parse_source(const std::string& source) {
    TokenizeResult tok = tokenize(source);
    Parser parser(std::move(tok.tokens));
    ParseResult res = parser.run();
    res.diagnostics.insert(res.diagnostics.begin(), tok.diagnostics.begin(),
                           tok.diagnostics.end());
    sort_diagnostics(res.diagnostics);
    return res;
}

}  // namespace mm
