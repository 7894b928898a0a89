#include "doctest.h"
#include "helpers.hpp"
#include "mm/mm.hpp"

using namespace mm;
using testutil::compile_source;

TEST_CASE("default allocation: columns in declaration order") {
    auto c = testutil::compile_file("company.mm");
    REQUIRE(!has_errors(c.diagnostics));
    // headers row 1, data rows 2..11
    CHECK(c.map.cells.at({1, 1}).text == "incomings");
    CHECK(c.map.cells.at({1, 2}).text == "outgoings");
    CHECK(c.map.cells.at({1, 3}).text == "profit");
    CHECK(c.map.cells.at({1, 1}).is_header);
    for (int r = 2; r <= 11; ++r) {
        const CellEntry& e = c.map.cells.at({r, 3});
        REQUIRE(e.content == CellEntry::Formula);
        CHECK(render_formula(e.formula, RefStyle::A1) ==
              "A" + std::to_string(r) + "-B" + std::to_string(r));
    }
    CHECK(!c.map.cells.count({2, 1}));  // inputs stay blank
}

TEST_CASE("scalar attributes take row 2 of one column") {
    auto c = compile_source("attributes < a [1:3]  s > where s = 7");
    CHECK(c.map.cells.at({2, 2}).num.to_string() == "7");
}

TEST_CASE("two-dimensional attributes fan out over columns") {
    auto c = compile_source(
        "constant N = 4\nattributes < pst : [1:10] * [1:N] >\nwhere pst[all e, all s] = s");
    REQUIRE(!has_errors(c.diagnostics));
    for (int col = 1; col <= 4; ++col)
        CHECK(c.map.cells.at({2, col}).num.to_string() == std::to_string(col));
    CHECK(c.map.cells.count({11, 4}));
    CHECK(!c.map.cells.count({2, 5}));
}

TEST_CASE("three-dimensional mixed-radix columns") {
    auto c = compile_source(
        "attributes < x : [1:2] * [1:2] * [1:2] >\nwhere x[all i, all j, all k] = 4*i+2*j+k");
    REQUIRE(!has_errors(c.diagnostics));
    // hand enumeration: 4 columns (dims 2,3), 2 data rows
    std::set<CellAddr> data;
    for (auto& [a, e] : c.map.cells)
        if (!e.is_header) data.insert(a);
    CHECK(data.size() == 8);
    CHECK(c.map.cells.at({2, 1}).num.to_string() == "7");   // (1,1,1)
    CHECK(c.map.cells.at({2, 2}).num.to_string() == "8");   // (1,1,2)
    CHECK(c.map.cells.at({2, 3}).num.to_string() == "9");   // (1,2,1)
    CHECK(c.map.cells.at({3, 4}).num.to_string() == "14");  // (2,2,2)
}

TEST_CASE("header text joins display fragments") {
    auto c = compile_source("attributes < x [1:2] name \"Service\" br \"start\" >");
    CHECK(c.map.cells.at({1, 1}).text == "Service start");
}

TEST_CASE("layout allocation follows the table grid") {
    auto c = compile_source(
        "attributes < a >\nwhere a = 1\n"
        "layout\n<table><tr><td>Value</td><td><attr name=\"a\"/></td></tr></table>");
    REQUIRE(!has_errors(c.diagnostics));
    CHECK(c.map.cells.at({1, 1}).text == "Value");
    CHECK(c.map.cells.at({1, 1}).is_header);
    CHECK(c.map.cells.at({1, 2}).num.to_string() == "1");
}

TEST_CASE("layout direction right runs along the row") {
    auto c = compile_source(
        "attributes < a [1:3] >\nwhere a[all i] = i\n"
        "layout\n<table><tr><td><attr name=\"a\" dir=\"right\"/></td></tr></table>");
    REQUIRE(!has_errors(c.diagnostics));
    CHECK(c.map.cells.at({1, 1}).num.to_string() == "1");
    CHECK(c.map.cells.at({1, 3}).num.to_string() == "3");
}

TEST_CASE("overlapping layout slots collide") {
    auto c = compile_source(
        "attributes < a [1:5]  b [1:5] >\n"
        "layout\n<table>\n<tr><td><attr name=\"a\"/></td></tr>\n"
        "<tr><td><attr name=\"b\"/></td></tr>\n</table>");
    bool collided = false;
    for (auto& d : c.diagnostics)
        collided |= d.message.rfind("Layout collision", 0) == 0;
    CHECK(collided);
}

TEST_CASE("attributes missing from the layout go to its right") {
    auto c = compile_source(
        "attributes < a [1:3]  b [1:3] >\nwhere b[all i] = a[i]\n"
        "layout\n<table><tr><td><attr name=\"a\"/></td></tr></table>");
    REQUIRE(!has_errors(c.diagnostics));
    // b appended in default style: header row 1, data rows 2..4, column 2
    CHECK(c.map.cells.at({1, 2}).text == "b");
    CHECK(render_formula(c.map.cells.at({2, 2}).formula, RefStyle::A1) == "A1");
}

TEST_CASE("unroll instance counts match guard-satisfying points") {
    auto c = compile_source(
        "attributes < a [1995:2004] > where\n"
        "  a[1995] = 1 and a[all t > 1995] = a[t-1] * 1.2");
    int formulas = 0, constants = 0;
    for (auto& [addr, e] : c.map.cells) {
        formulas += e.content == CellEntry::Formula;
        constants += !e.is_header && e.content == CellEntry::NumberConst;
    }
    CHECK(formulas == 9);
    CHECK(constants == 1);
}

TEST_CASE("unguarded recurrences fall off the base") {
    auto c = compile_source("attributes < a [1995:2004] > where a[all t] = a[t-1]");
    CHECK(testutil::has_error_message(c.diagnostics, "Index out of base for a"));
}

TEST_CASE("constant folding is exact and decimal") {
    auto c = compile_source("attributes < s  t > where s = 9 / 24 and t = 1 / 3");
    CHECK(c.map.cells.at({2, 1}).content == CellEntry::NumberConst);
    CHECK(c.map.cells.at({2, 1}).num.to_string() == "0.375");
    // 1/3 does not terminate: stays a formula
    CHECK(c.map.cells.at({2, 2}).content == CellEntry::Formula);
}

TEST_CASE("enumeration coordinates admit no arithmetic") {
    auto c = compile_source(
        "base k = { \"a\", \"b\" }\nattributes < x [k] > where x[all e] = x[e-1]");
    CHECK(testutil::has_error_message(c.diagnostics,
                                      "Arithmetic on enumeration coordinates is not allowed"));
}

TEST_CASE("cell collisions inside one attribute are impossible, across attributes reported") {
    auto c = compile_source(
        "attributes < a [1:3]  b [1:3] >\nwhere a[all i] = 1 and b[all i] = 2\n"
        "layout\n<table><tr>"
        "<td><attr name=\"a\"/></td></tr><tr><td><attr name=\"b\"/></td>"
        "</tr></table>");
    CHECK(has_errors(c.diagnostics));
}

TEST_CASE("cellmap text dump") {
    auto c = compile_source("attributes < a > where a = 1");
    CHECK(write_cellmap_text(c.map) == "A1\t\"a\"\t-\nA2\t1\t-\n");
    CHECK(write_cellmap_text(CellMap{}).empty());
}

TEST_CASE("changing the server constant moves every column over") {
    std::string queue = testutil::slurp(testutil::corpus_path("queue.mm"));
    auto c4 = compile_source(queue);
    REQUIRE(!has_errors(c4.diagnostics));
    int maxcol4 = 0;
    for (auto& [a, _] : c4.map.cells) maxcol4 = std::max(maxcol4, a.col);
    CHECK(maxcol4 == 14);
    std::string queue6 = queue;
    queue6.replace(queue6.find("constant N = 4"), 14, "constant N = 6");
    auto c6 = compile_source(queue6);
    REQUIRE(!has_errors(c6.diagnostics));
    int maxcol6 = 0;
    for (auto& [a, _] : c6.map.cells) maxcol6 = std::max(maxcol6, a.col);
    CHECK(maxcol6 == 16);
}
