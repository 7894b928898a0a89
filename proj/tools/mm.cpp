// Command-line front end: compile, decompile, check, eval, analyze.
//
// Exit codes: 0 success, 1 problems in the input (diagnostics printed),
// 2 usage or I/O errors.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mm/mm.hpp"

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return true;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << text;
    return (bool)out;
}

void print_diags(const std::vector<mm::Diagnostic>& diags) {
    for (auto& d : diags)
        std::cerr << d.line << ":" << d.col << ": "
                  << (d.severity == mm::Diagnostic::Error ? "Error: " : "Warning: ") << d.message
                  << "\n";
}

mm::IncludeLoad file_loader() {
    return [](const std::string& path, const std::string& from_key)
               -> std::optional<std::pair<std::string, std::string>> {
        fs::path p(path);
        if (p.is_relative()) p = fs::path(from_key).parent_path() / p;
        std::error_code ec;
        fs::path canon = fs::weakly_canonical(p, ec);
        if (ec) canon = p;
        auto text = read_file(canon.string());
        if (!text && !canon.has_extension()) {
            canon.replace_extension(".mm");
            text = read_file(canon.string());
        }
        if (!text) return std::nullopt;
        return std::make_pair(canon.string(), *text);
    };
}

struct FrontEnd {
    mm::Program program;
    mm::FlatObject flat;
    std::vector<mm::Diagnostic> diagnostics;
    bool ok = false;
};

FrontEnd run_front_end(const std::string& source, const std::string& path, bool units) {
    FrontEnd fe;
    mm::ParseResult parsed = mm::parse_source(source);
    fe.program = std::move(parsed.program);
    fe.diagnostics = std::move(parsed.diagnostics);
    mm::resolve_includes(fe.program, file_loader(), path, fe.diagnostics);
    mm::ConstEval ce(fe.program);
    fe.flat = mm::merge_objects(fe.program.root, fe.program, ce, fe.diagnostics);
    auto sem = mm::check_semantics(fe.flat, fe.program, ce);
    fe.diagnostics.insert(fe.diagnostics.end(), sem.begin(), sem.end());
    if (units) {
        auto ud = mm::check_units(fe.flat, fe.program, ce);
        fe.diagnostics.insert(fe.diagnostics.end(), ud.begin(), ud.end());
    }
    mm::sort_diagnostics(fe.diagnostics);
    fe.ok = !mm::has_errors(fe.diagnostics);
    return fe;
}

int report_problems(const FrontEnd& fe, const std::string& source, bool listing) {
    if (listing) {
        std::cout << mm::render_listing(source, fe.diagnostics);
    } else {
        print_diags(fe.diagnostics);
    }
    return fe.ok ? 0 : 1;
}

std::string to_csv(const mm::CellMap& map, const std::map<mm::CellAddr, mm::Value>& values) {
    int max_row = 0, max_col = 0;
    for (auto& [addr, _] : map.cells) {
        max_row = std::max(max_row, addr.row);
        max_col = std::max(max_col, addr.col);
    }
    std::ostringstream out;
    for (int r = 1; r <= max_row; ++r) {
        for (int c = 1; c <= max_col; ++c) {
            if (c > 1) out << ",";
            mm::CellAddr a{r, c};
            auto vit = values.find(a);
            auto cit = map.cells.find(a);
            std::string s = vit == values.end()
                                ? ""
                                : mm::format_value(vit->second,
                                                   cit != map.cells.end() ? cit->second.format
                                                                          : std::nullopt);
            if (s.find_first_of(",\"\n") != std::string::npos) {
                std::string q = "\"";
                for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                s = q + "\"";
            }
            out << s;
        }
        out << "\n";
    }
    return out.str();
}

nlohmann::json report_to_json(const mm::AnalysisReport& r) {
    nlohmann::json j;
    j["hardcoded"] = nlohmann::json::array();
    for (auto& s : r.hardcoded)
        j["hardcoded"].push_back({{"cell", mm::a1_name(s.cell)}, {"expected", s.expected}});
    j["used_uninitialized"] = nlohmann::json::array();
    for (auto& a : r.used_uninitialized) j["used_uninitialized"].push_back(mm::a1_name(a));
    j["initialized_unused"] = nlohmann::json::array();
    for (auto& a : r.initialized_unused) j["initialized_unused"].push_back(mm::a1_name(a));
    j["cycles"] = nlohmann::json::array();
    for (auto& cycle : r.cycles) {
        nlohmann::json arr = nlohmann::json::array();
        for (auto& a : cycle) arr.push_back(mm::a1_name(a));
        j["cycles"].push_back(arr);
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spreadsheet-description compiler and decompiler"};
    app.require_subcommand(1);

    std::string input, output, transforms, report_path, format = "sylk";
    bool listing = false, units = false, cells = false;
    unsigned long long seed = 1;
    double threshold = 0.75;
    std::vector<std::string> sets;

    auto* compile = app.add_subcommand("compile", "Compile a model to a spreadsheet");
    compile->add_option("input", input, "Model source file")->required();
    compile->add_option("-o,--output", output, "Output file (default stdout)");
    compile->add_flag("--listing", listing, "Print an annotated source listing");
    compile->add_flag("--units", units, "Also run dimensional analysis");
    compile->add_flag("--cells", cells, "Write the plain-text cell dump instead of SYLK");

    auto* check = app.add_subcommand("check", "Check a model without compiling");
    check->add_option("input", input, "Model source file")->required();
    check->add_flag("--listing", listing, "Print an annotated source listing");
    check->add_flag("--units", units, "Also run dimensional analysis");

    auto* decompile = app.add_subcommand("decompile", "Recover a model from a spreadsheet");
    decompile->add_option("input", input, "SYLK input file")->required();
    decompile->add_option("-o,--output", output, "Output file (default stdout)");
    decompile->add_option("--transforms", transforms, "Transform script to apply");

    auto* eval = app.add_subcommand("eval", "Evaluate a spreadsheet");
    eval->add_option("input", input, "SYLK input file")->required();
    eval->add_option("-o,--output", output, "Output file (default stdout)");
    eval->add_option("--seed", seed, "Random seed (default 1)");
    eval->add_option("--set", sets, "Override an input cell, e.g. --set B2=150");
    eval->add_option("--format", format, "Output format: sylk, cells or csv")
        ->check(CLI::IsMember({"sylk", "cells", "csv"}));

    auto* analyze = app.add_subcommand("analyze", "Report suspicious spreadsheet structure");
    analyze->add_option("input", input, "SYLK input file")->required();
    analyze->add_option("--report", report_path, "Write a JSON report to this file");
    analyze->add_option("--hardcode-threshold", threshold,
                        "Dominance threshold for the hardcoded-value check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto source = read_file(input);
    if (!source) {
        std::cerr << "Cannot read " << input << "\n";
        return 2;
    }

    if (compile->parsed() || check->parsed()) {
        FrontEnd fe = run_front_end(*source, input, units);
        if (check->parsed() || !fe.ok || listing)
            if (int rc = report_problems(fe, *source, listing); check->parsed() || rc != 0)
                return rc;
        std::vector<mm::Diagnostic> diags;
        mm::ConstEval ce(fe.program);
        mm::GridPlan plan = fe.program.layout
                                ? mm::allocate_from_layout(fe.flat, *fe.program.layout, diags)
                                : mm::allocate_default(fe.flat);
        mm::CellMap map = mm::unroll(fe.flat, plan, fe.program, ce, diags);
        if (mm::has_errors(diags)) {
            print_diags(diags);
            return 1;
        }
        std::string text = cells ? mm::write_cellmap_text(map) : mm::write_sylk(map);
        if (!write_output(output, text)) {
            std::cerr << "Cannot write " << output << "\n";
            return 2;
        }
        return 0;
    }

    if (decompile->parsed()) {
        mm::SylkReadResult sylk = mm::read_sylk(*source);
        if (mm::has_errors(sylk.diagnostics)) {
            print_diags(sylk.diagnostics);
            return 1;
        }
        mm::TransformScript script;
        std::vector<mm::Diagnostic> diags;
        if (!transforms.empty()) {
            auto stext = read_file(transforms);
            if (!stext) {
                std::cerr << "Cannot read " << transforms << "\n";
                return 2;
            }
            script = mm::parse_transform_script(*stext, diags);
        }
        mm::DecompModel model = mm::lift_trivial(sylk.map);
        mm::apply_transforms(model, script, diags);
        if (mm::has_errors(diags)) {
            print_diags(diags);
            return 1;
        }
        std::string text = mm::pretty_print(mm::model_to_program(model)) + "\n";
        if (!write_output(output, text)) {
            std::cerr << "Cannot write " << output << "\n";
            return 2;
        }
        return 0;
    }

    if (eval->parsed()) {
        mm::SylkReadResult sylk;
        bool is_sylk = source->rfind("ID;", 0) == 0;
        if (!is_sylk) {
            // A model source: compile in memory first.
            FrontEnd fe = run_front_end(*source, input, false);
            if (!fe.ok) return report_problems(fe, *source, false);
            std::vector<mm::Diagnostic> diags;
            mm::ConstEval ce(fe.program);
            mm::GridPlan plan = fe.program.layout
                                    ? mm::allocate_from_layout(fe.flat, *fe.program.layout, diags)
                                    : mm::allocate_default(fe.flat);
            sylk.map = mm::unroll(fe.flat, plan, fe.program, ce, diags);
            if (mm::has_errors(diags)) {
                print_diags(diags);
                return 1;
            }
        } else {
            sylk = mm::read_sylk(*source);
            if (mm::has_errors(sylk.diagnostics)) {
                print_diags(sylk.diagnostics);
                return 1;
            }
        }
        std::map<mm::CellAddr, mm::Value> overrides;
        for (const std::string& s : sets) {
            std::size_t eq = s.find('=');
            std::optional<mm::CellAddr> addr;
            if (eq != std::string::npos && eq + 1 < s.size())
                addr = mm::parse_a1(std::string_view(s).substr(0, eq));
            if (!addr) {
                std::cerr << "Bad --set '" << s << "' (expected CELL=value)\n";
                return 2;
            }
            auto it = sylk.map.cells.find(*addr);
            if (it != sylk.map.cells.end() && it->second.content == mm::CellEntry::Formula) {
                std::cerr << "Cannot set " << mm::a1_name(*addr) << ": it holds a formula\n";
                return 1;
            }
            std::string v = s.substr(eq + 1);
            auto d = mm::Decimal::parse(v[0] == '-' ? v.substr(1) : v);
            if (d)
                overrides[*addr] = mm::Value::number((v[0] == '-' ? -*d : *d).to_double());
            else
                overrides[*addr] = mm::Value::string(v);
        }
        mm::EvalResult result = mm::evaluate(sylk.map, seed, overrides);
        print_diags(result.diagnostics);
        std::string text;
        if (format == "csv") {
            text = to_csv(sylk.map, result.values);
        } else if (format == "cells") {
            std::ostringstream out;
            for (auto& [addr, v] : result.values) {
                auto cit = sylk.map.cells.find(addr);
                out << mm::a1_name(addr) << "\t"
                    << mm::format_value(v, cit != sylk.map.cells.end() ? cit->second.format
                                                                       : std::nullopt)
                    << "\n";
            }
            text = out.str();
        } else {
            // SYLK of computed values: formulas become their results.
            mm::CellMap computed = sylk.map;
            for (auto& [addr, entry] : computed.cells) {
                auto vit = result.values.find(addr);
                if (vit == result.values.end()) continue;
                const mm::Value& v = vit->second;
                if (entry.content == mm::CellEntry::Formula || overrides.count(addr)) {
                    if (v.kind == mm::Value::Number) {
                        entry.content = mm::CellEntry::NumberConst;
                        auto d = mm::Decimal::parse(mm::format_double(v.num));
                        entry.num = d ? *d : mm::Decimal();
                        entry.formula = nullptr;
                    } else {
                        entry.content = mm::CellEntry::TextConst;
                        entry.text = mm::format_value(v, std::nullopt);
                        entry.formula = nullptr;
                    }
                }
            }
            text = mm::write_sylk(computed);
        }
        if (!write_output(output, text)) {
            std::cerr << "Cannot write " << output << "\n";
            return 2;
        }
        return 0;
    }

    if (analyze->parsed()) {
        mm::SylkReadResult sylk = mm::read_sylk(*source);
        if (mm::has_errors(sylk.diagnostics)) {
            print_diags(sylk.diagnostics);
            return 1;
        }
        mm::AnalysisReport rep = mm::analyze(sylk.map, threshold);
        std::cout << mm::render_analysis_text(rep);
        if (!report_path.empty() && !write_output(report_path, report_to_json(rep).dump(2) + "\n")) {
            std::cerr << "Cannot write " << report_path << "\n";
            return 2;
        }
        bool findings = !rep.hardcoded.empty() || !rep.used_uninitialized.empty() ||
                        !rep.initialized_unused.empty() || !rep.cycles.empty();
        return findings ? 1 : 0;
    }

    return 2;
}
