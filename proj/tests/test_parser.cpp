#include "doctest.h"
#include "helpers.hpp"
#include "mm/mm.hpp"

using namespace mm;

static Program parse_ok(const std::string& src) {
    ParseResult r = parse_source(src);
    REQUIRE(!has_errors(r.diagnostics));
    return std::move(r.program);
}

// The literal under any chain of where/plus wrappers.
static const ObjectExpr* literal_of(const ObjPtr& o) {
    const ObjectExpr* p = o.get();
    while (p && p->kind != ObjectExpr::Literal) p = p->base.get();
    return p;
}

static const std::vector<Equation>& equations_of(const ObjPtr& o) {
    const ObjectExpr* p = o.get();
    while (p->kind != ObjectExpr::Where && p->kind != ObjectExpr::Literal) p = p->base.get();
    return p->equations;
}

TEST_CASE("tokenizer basics") {
    auto [toks, diags] = tokenize("constant N = 4 // servers\nbase event = [1:10]");
    REQUIRE(!has_errors(diags));
    CHECK(toks[0].kind == Token::Keyword);
    CHECK(toks[0].text == "constant");
    CHECK(toks[1].text == "N");
    CHECK(toks[3].text == "4");
    // the comment vanishes
    CHECK(toks[4].text == "base");
}

TEST_CASE("nested comments and strings") {
    auto [toks, diags] = tokenize("/* a /* b */ c */ x \"he said \"\"hi\"\"\"");
    REQUIRE(!has_errors(diags));
    CHECK(toks[0].text == "x");
    CHECK(toks[1].kind == Token::String);
    CHECK(toks[1].text == "he said \"hi\"");
}

TEST_CASE("currency signs lex as identifier characters") {
    auto [toks, diags] = tokenize("unit £");
    REQUIRE(toks.size() >= 2);
    CHECK(toks[1].kind == Token::Identifier);
    CHECK(toks[1].text == "£");
}

TEST_CASE("attribute declarations, both spellings") {
    Program p = parse_ok("attributes <\n  a [ 1995:2004 ]\n  b : [1995:2004]\n  c\n>");
    REQUIRE(p.root);
    const ObjectExpr* lit = literal_of(p.root);
    REQUIRE(lit);
    REQUIRE(lit->attrs.size() == 3);
    CHECK(lit->attrs[0].base);
    CHECK(lit->attrs[1].base);
    CHECK(!lit->attrs[2].base);  // scalar
    CHECK(base_expr_equal(*lit->attrs[0].base, *lit->attrs[1].base));
}

TEST_CASE("product bases keep their factors") {
    Program p = parse_ok("constant N = 4\nattributes < x : [1:10] * [1:N] >");
    auto& b = *literal_of(p.root)->attrs[0].base;
    REQUIRE(b.kind == BaseExpr::Prod);
    CHECK(b.factors.size() == 2);
    Program q = parse_ok(
        "base lifespan = [ 1995:2004 ]\nbase cost_type = { \"Overheads\", \"Lighting\" }\n"
        "attributes < costs : lifespan * cost_type * cost_type >");
    auto& qb = *literal_of(q.root)->attrs[0].base;
    REQUIRE(qb.kind == BaseExpr::Prod);
    CHECK(qb.factors.size() == 3);
    CHECK(qb.factors[0].kind == BaseExpr::Named);
}

TEST_CASE("qualifiers: name fragments, format, unit") {
    Program p = parse_ok(
        "unit £\n"
        "attributes <\n"
        "  wages : [1:3] name \"Basic\" br \"Wages\" format 0.00 \n"
        "  cost unit £\n"
        ">");
    auto& w = literal_of(p.root)->attrs[0];
    CHECK(w.display_name == std::vector<std::string>{"Basic", "Wages"});
    CHECK(w.cell_format == "0.00");
    CHECK(literal_of(p.root)->attrs[1].unit == unit_of("£"));
}

TEST_CASE("expression precedence") {
    Program p = parse_ok("attributes < a > where a = 1 + 2 * 3 ^ 2 ^ 2");
    const Equation& eq = equations_of(p.root).at(0);
    // ^ binds tightest and right-associates: 1 + (2 * (3 ^ (2 ^ 2)))
    REQUIRE(eq.rhs->kind == Expr::Bin);
    CHECK(eq.rhs->text == "+");
    CHECK(eq.rhs->args[1]->text == "*");
    CHECK(eq.rhs->args[1]->args[1]->text == "^");
    CHECK(eq.rhs->args[1]->args[1]->args[1]->text == "^");
}

TEST_CASE("quantified patterns and guards") {
    Program p = parse_ok(
        "attributes < a [1995:2004] > where\n"
        "  a[ 1995 ] = 1 and a[ all t > 1995 ] = a[ t-1 ] * 1.2");
    auto& eqs = equations_of(p.root);
    REQUIRE(eqs.size() == 2);
    CHECK(!eqs[0].patterns[0].is_all);
    CHECK(eqs[1].patterns[0].is_all);
    CHECK(eqs[1].patterns[0].var == "t");
    CHECK(eqs[1].patterns[0].constraint_op == ">");
}

TEST_CASE("number with unit attaches only to declared symbols") {
    Program p = parse_ok("unit cm\nconstant a = 2 cm\nconstant b = 2 (cm/cm)\nconstant c = 2");
    CHECK(p.constants[0].second.value->unit == unit_of("cm"));
    CHECK(p.constants[1].second.value->unit == UnitExpr{});  // explicitly dimensionless
    CHECK(!p.constants[2].second.value->unit);
}

TEST_CASE("range arguments") {
    Program p = parse_ok(
        "attributes < pst : [1:10] * [1:4]  s [1:10] > where\n"
        "  s[all e] = min( range pst[e] )");
    const ExprPtr& call = equations_of(p.root)[0].rhs;
    REQUIRE(call->kind == Expr::Call);
    CHECK(call->text == "MIN");
    REQUIRE(call->args[0]->kind == Expr::RangeRef);
    CHECK(call->args[0]->text == "pst");
    CHECK(call->args[0]->args.size() == 1);
}

TEST_CASE("layout section parses tables, slots and directions") {
    Program p = parse_ok(
        "attributes < a >\n"
        "layout\n<table>\n"
        "  <tr><td>Value</td><td><attr name=\"a\"/></td></tr>\n"
        "  <tr><td><attr name=\"a2\" dir=\"right\"/></td></tr>\n"
        "</table>");
    REQUIRE(p.layout);
    REQUIRE(p.layout->rows.size() == 2);
    CHECK(p.layout->rows[0].cells[0].text == "Value");
    CHECK(p.layout->rows[0].cells[1].kind == LayoutCell::Slot);
    CHECK(p.layout->rows[0].cells[1].direction == "down");
    CHECK(p.layout->rows[1].cells[0].direction == "right");
}

TEST_CASE("layout tag errors are reported") {
    ParseResult r = parse_source("attributes < a >\nlayout\n<table><tr><td>x</tr></table>");
    CHECK(has_errors(r.diagnostics));
}

TEST_CASE("objects: templates, application, plus, where") {
    Program p = parse_ok(testutil::slurp(testutil::corpus_path("company_template.mm")));
    REQUIRE(p.templates.size() == 1);
    CHECK(p.templates[0].first == "company_template");
    CHECK(p.templates[0].second.params.size() == 2);
    REQUIRE(p.objects.size() == 1);
    CHECK(p.objects[0].second->kind == ObjectExpr::TemplateApply);
    // root defaults to the last named object
    REQUIRE(p.root);
    CHECK(p.root->kind == ObjectExpr::NamedRef);
    CHECK(p.root->name == "company");
}

TEST_CASE("listing renderer") {
    std::string src = "line one\nline two\nline three\nline four";
    std::vector<Diagnostic> diags = {error_at(4, 6, "Bad things")};
    std::string listing = render_listing(src, diags);
    CHECK(listing == "...\n2: line two\n3: line three\n4: line four\n        ^\n"
                     "    Error: Bad things\n");
    // no diagnostics: the whole source, numbered
    CHECK(render_listing("a\nb", {}) == "1: a\n2: b\n");
}

TEST_CASE("pretty-print of a parsed program re-parses equal") {
    for (const char* name : {"company.mm", "company2.mm", "company3.mm", "lazydays.mm"}) {
        Program p = parse_ok(testutil::slurp(testutil::corpus_path(name)));
        std::string once = pretty_print(p);
        Program q = parse_ok(once);
        CHECK(pretty_print(q) == once);
    }
}
