// Shared plumbing for the test suites.
#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mm/mm.hpp"

namespace testutil {

inline std::string source_dir() {
    const char* env = std::getenv("MM_SOURCE_DIR");
    return env ? env : ".";
}

inline std::string corpus_path(const std::string& name) {
    return source_dir() + "/tests/corpus/" + name;
}

inline std::string golden_path(const std::string& name) {
    return source_dir() + "/tests/golden/" + name;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Include loader over the corpus directory (adds ".mm" when missing).
inline mm::IncludeLoad corpus_loader() {
    return [](const std::string& path, const std::string&)
               -> std::optional<std::pair<std::string, std::string>> {
        std::string p = corpus_path(path);
        std::ifstream probe(p);
        if (!probe) p += ".mm";
        try {
            return std::make_pair(p, slurp(p));
        } catch (...) {
            return std::nullopt;
        }
    };
}

struct Compiled {
    mm::Program program;
    mm::FlatObject flat;
    mm::CellMap map;
    std::vector<mm::Diagnostic> diagnostics;
};

// Front end + codegen in one step; diagnostics collected, never thrown.
inline Compiled compile_source(const std::string& source, bool units = false) {
    Compiled c;
    mm::ParseResult parsed = mm::parse_source(source);
    c.program = std::move(parsed.program);
    c.diagnostics = std::move(parsed.diagnostics);
    mm::resolve_includes(c.program, corpus_loader(), "<test>", c.diagnostics);
    mm::ConstEval ce(c.program);
    c.flat = mm::merge_objects(c.program.root, c.program, ce, c.diagnostics);
    auto sem = mm::check_semantics(c.flat, c.program, ce);
    c.diagnostics.insert(c.diagnostics.end(), sem.begin(), sem.end());
    if (units) {
        auto ud = mm::check_units(c.flat, c.program, ce);
        c.diagnostics.insert(c.diagnostics.end(), ud.begin(), ud.end());
    }
    if (mm::has_errors(c.diagnostics)) return c;
    std::vector<mm::Diagnostic> gen;
    mm::GridPlan plan = c.program.layout
                            ? mm::allocate_from_layout(c.flat, *c.program.layout, gen)
                            : mm::allocate_default(c.flat);
    c.map = mm::unroll(c.flat, plan, c.program, ce, gen);
    c.diagnostics.insert(c.diagnostics.end(), gen.begin(), gen.end());
    return c;
}

inline Compiled compile_file(const std::string& corpus_name, bool units = false) {
    return compile_source(slurp(corpus_path(corpus_name)), units);
}

inline bool has_error_message(const std::vector<mm::Diagnostic>& diags, const std::string& msg) {
    for (auto& d : diags)
        if (d.severity == mm::Diagnostic::Error && d.message == msg) return true;
    return false;
}

}  // namespace testutil
