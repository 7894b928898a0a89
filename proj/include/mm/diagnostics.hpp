// Diagnostics and listing rendering.
#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace mm {

struct Diagnostic {
    enum Severity { Error, Warning };
    Severity severity = Error;
    int line = 1;
    int col = 1;
    std::string message;
};

inline Diagnostic error_at(int line, int col, std::string msg) {
    return Diagnostic{Diagnostic::Error, line, col, std::move(msg)};
}
inline Diagnostic warning_at(int line, int col, std::string msg) {
    return Diagnostic{Diagnostic::Warning, line, col, std::move(msg)};
}

inline bool has_errors(const std::vector<Diagnostic>& ds) {
    return std::any_of(ds.begin(), ds.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Error; });
}

inline void sort_diagnostics(std::vector<Diagnostic>& ds) {
    std::stable_sort(ds.begin(), ds.end(), [](const Diagnostic& a, const Diagnostic& b) {
        if (a.line != b.line) return a.line < b.line;
        return a.col < b.col;
    });
}

inline std::vector<std::string> split_lines(const std::string& source) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : source) {
        if (c == '\n') { lines.push_back(cur); cur.clear(); }
        else if (c != '\r') cur += c;
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

// Numbered source listing with caret-and-message blocks under diagnosed
// lines. With no diagnostics the whole source is listed; otherwise only
// diagnosed lines plus two lines of leading context appear, elided runs
// shown as "...".
inline std::string render_listing(const std::string& source, std::vector<Diagnostic> diagnostics) {
    sort_diagnostics(diagnostics);
    std::vector<std::string> lines = split_lines(source);
    int nlines = (int)lines.size();

    std::vector<char> show(nlines + 1, diagnostics.empty() ? 1 : 0);
    for (auto& d : diagnostics)
        for (int l = std::max(1, d.line - 2); l <= std::min(nlines, d.line); ++l)
            show[l] = 1;

    std::ostringstream out;
    bool elided = false;
    std::size_t di = 0;
    for (int l = 1; l <= nlines; ++l) {
        if (!show[l]) {
            if (!elided) { out << "...\n"; elided = true; }
            while (di < diagnostics.size() && diagnostics[di].line == l) ++di;  // defensive
            continue;
        }
        elided = false;
        std::string prefix = std::to_string(l) + ": ";
        out << prefix << lines[l - 1] << "\n";
        while (di < diagnostics.size() && diagnostics[di].line == l) {
            const Diagnostic& d = diagnostics[di++];
            // the caret sits under the diagnosed column, prefix included
            out << std::string(prefix.size() + std::max(0, d.col - 1), ' ') << "^\n";
            out << "    " << (d.severity == Diagnostic::Error ? "Error: " : "Warning: ")
                << d.message << "\n";
        }
    }
    return out.str();
}

}  // namespace mm
