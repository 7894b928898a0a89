#include "doctest.h"
#include "helpers.hpp"
#include "mm/mm.hpp"

using namespace mm;
using testutil::compile_source;
using testutil::has_error_message;

TEST_CASE("includes bind the included root to the file's basename") {
    auto c = testutil::compile_file("company2.mm");
    REQUIRE(!has_errors(c.diagnostics));
    CHECK(c.flat.find("incomings"));
    CHECK(c.flat.find("profit"));
    // three equations: profit law from company, seed + growth from company2
    CHECK(c.flat.equations.size() == 3);
}

TEST_CASE("include cycles are reported, not followed") {
    auto loop = [](const std::string& path,
                   const std::string&) -> std::optional<std::pair<std::string, std::string>> {
        if (path == "a") return std::make_pair(std::string("a"), std::string("include \"b\"\nx = attributes < p >"));
        if (path == "b") return std::make_pair(std::string("b"), std::string("include \"a\"\ny = attributes < q >"));
        return std::nullopt;
    };
    ParseResult r = parse_source("include \"a\"\nroot = attributes < z >");
    resolve_includes(r.program, loop, "<top>", r.diagnostics);
    CHECK(has_errors(r.diagnostics));
}

TEST_CASE("template instantiation substitutes parameters") {
    auto c = testutil::compile_file("company_template.mm");
    REQUIRE(!has_errors(c.diagnostics));
    const FlatAttr* inc = c.flat.find("incomings");
    REQUIRE(inc);
    REQUIRE(inc->base);
    CHECK(base_cardinality(*inc->base) == 10);
    // same flat object as writing the base by hand
    auto plain = testutil::compile_file("company.mm");
    CHECK(c.map.cells == plain.map.cells);
}

TEST_CASE("template arity and argument types are checked") {
    std::string tmpl = "t(A:integer) = attributes < x [1:A] >\n";
    CHECK(has_errors(compile_source(tmpl + "o = t(1, 2)").diagnostics));
    CHECK(has_errors(compile_source(tmpl + "o = t(\"five\")").diagnostics));
    CHECK(!has_errors(compile_source(tmpl + "o = t(5)").diagnostics));
}

TEST_CASE("merge: plus and where combine attribute sets") {
    auto c = testutil::compile_file("company3.mm");
    REQUIRE(!has_errors(c.diagnostics));
    CHECK(c.flat.attrs.size() == 4);
    CHECK(c.flat.find("workforce"));
    CHECK(c.flat.equations.size() == 2);
}

TEST_CASE("merge is associative on shared names with equal bases") {
    std::string a = "x = attributes < a [1:3]  b [1:3] > where a[all t] = b[t]\n";
    std::string b = "y = attributes < b [1:3]  c [1:3] >\n";
    auto c1 = compile_source(a + b + "z = x plus y where c[all t] = 1\nroot = z");
    REQUIRE(!has_errors(c1.diagnostics));
    CHECK(c1.flat.attrs.size() == 3);  // b identified across the two operands
    auto c2 = compile_source(a + b + "w = y where c[all t] = 1\nroot = x plus w");
    REQUIRE(!has_errors(c2.diagnostics));
    CHECK(c2.map.cells == c1.map.cells);
}

TEST_CASE("duplicate attribute in one object literal") {
    auto c = compile_source("attributes < a  a >");
    CHECK(has_error_message(c.diagnostics, "Duplicate attribute a in object"));
}

TEST_CASE("same name with different bases cannot merge") {
    auto c = compile_source(
        "x = attributes < a [1:3] >\ny = attributes < a [1:4] >\n"
        "z = x plus attributes < >\nr = z\nroot = x plus attributes < a [1:4] >");
    CHECK(has_error_message(c.diagnostics, "Base mismatch for attribute a"));
}

TEST_CASE("cyclic object definitions are an error") {
    auto c = compile_source("x = y where a = 1\ny = x where b = 2\nroot = x");
    bool reported = has_error_message(c.diagnostics, "Cyclic object definition x") ||
                    has_error_message(c.diagnostics, "Cyclic object definition y");
    CHECK(reported);
}

TEST_CASE("undeclared identifiers") {
    auto c = compile_source("attributes < a > where a = blance + 1");
    CHECK(has_error_message(c.diagnostics, "Undeclared identifier blance"));
}

TEST_CASE("subscript arity must match the base") {
    auto c = compile_source("attributes < a [1:3] > where a[1, 2] = 0");
    CHECK(has_errors(c.diagnostics));
    auto d = compile_source("attributes < a > where a[1] = 0");
    CHECK(has_errors(d.diagnostics));
}

TEST_CASE("overlapping equations for one point") {
    auto c = compile_source(
        "attributes < a [1:5] > where a[all t] = 1 and a[2] = 2");
    CHECK(has_errors(c.diagnostics));
    // a guard removes the overlap
    auto d = compile_source(
        "attributes < a [1:5] > where a[all t > 2] = 1 and a[2] = 2");
    CHECK(!has_errors(d.diagnostics));
}

TEST_CASE("quantifier shadowing a constant warns") {
    auto c = compile_source(
        "constant N = 4\nattributes < a [1:10] > where a[all N] = N");
    bool warned = false;
    for (auto& dg : c.diagnostics)
        if (dg.severity == Diagnostic::Warning &&
            dg.message == "Quantifier variable N shadows constant N")
            warned = true;
    CHECK(warned);
    CHECK(!has_errors(c.diagnostics));
}

TEST_CASE("empty bases are rejected") {
    auto c = compile_source("attributes < a [5:4] >");
    CHECK(has_error_message(c.diagnostics, "Empty base 5:4"));
}

TEST_CASE("unit mismatch messages match the compiler's wording") {
    auto c = compile_source(testutil::slurp(testutil::corpus_path("units_bad.mm")), true);
    CHECK(has_error_message(
        c.diagnostics,
        "The left-hand argument has units cm, but the right-hand argument has units sec."));
    CHECK(has_error_message(
        c.diagnostics, "Operator ^ expects something with no units here, not units cm."));
    CHECK(has_error_message(
        c.diagnostics,
        "The left-hand argument has units cm * sec^-1, but the right-hand argument has units cm * £."));
    int errors = 0;
    for (auto& d : c.diagnostics) errors += d.severity == Diagnostic::Error;
    CHECK(errors == 3);  // the well-formed constants pass
}

TEST_CASE("units flow through attributes and equations") {
    auto ok = compile_source(
        "unit m\nunit s\n"
        "attributes < d [1:3] unit m  t [1:3] unit s  v [1:3] unit m / s >\n"
        "where v[all i] = d[i] / t[i]",
        true);
    CHECK(!has_errors(ok.diagnostics));
    auto bad = compile_source(
        "unit m\nunit s\n"
        "attributes < d [1:3] unit m  t [1:3] unit s >\n"
        "where d[all i] = t[i]",
        true);
    CHECK(has_errors(bad.diagnostics));
}

TEST_CASE("template attributes may not carry units") {
    auto c = compile_source(
        "unit m\nt(A:integer) = attributes < x [1:A] unit m >\no = t(3)");
    CHECK(has_error_message(c.diagnostics, "Units on template attributes are not supported"));
}
