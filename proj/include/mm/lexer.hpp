// MM tokenizer.
//
// Comments (// to end of line and nestable /* ... */) are dropped from the
// stream; listings are rendered from the raw source. When the `layout`
// keyword is met, the rest of the source is captured verbatim as a single
// LayoutBody token, since layout bodies are HTML-like text, not MM tokens.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "mm/diagnostics.hpp"

namespace mm {

struct Token {
    enum Kind { Keyword, Identifier, Number, String, Punct, LayoutBody, End };
    Kind kind = End;
    std::string text;
    int line = 1;
    int col = 1;
};

inline const std::array<const char*, 15>& mm_keywords() {
    static const std::array<const char*, 15> kw = {
        "attributes", "attribute", "where", "and", "all", "include", "constant",
        "base", "unit", "plus", "range", "name", "br", "format", "layout"};
    return kw;
}

inline bool is_mm_keyword(const std::string& s) {
    for (auto* k : mm_keywords())
        if (s == k) return true;
    return false;
}

struct TokenizeResult {
    std::vector<Token> tokens;
    std::vector<Diagnostic> diagnostics;
};

inline TokenizeResult tokenize(const std::string& source) {
    TokenizeResult res;
    std::size_t i = 0;
    int line = 1, col = 1;

    auto advance = [&](std::size_t n = 1) {
        for (std::size_t k = 0; k < n && i < source.size(); ++k) {
            if (source[i] == '\n') { ++line; col = 1; }
            else ++col;
            ++i;
        }
    };
    auto push = [&](Token::Kind kind, std::string text, int l, int c) {
        res.tokens.push_back(Token{kind, std::move(text), l, c});
    };
    // Identifier characters: letters, digits, underscore, and any byte
    // outside ASCII so that unit symbols such as £ lex as plain names.
    auto is_ident_start = [](unsigned char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c >= 0x80 ||
               c == '$';
    };
    auto is_ident_char = [&](unsigned char c) {
        return is_ident_start(c) || (c >= '0' && c <= '9');
    };

    while (i < source.size()) {
        unsigned char c = source[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') { advance(); continue; }

        if (c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
            while (i < source.size() && source[i] != '\n') advance();
            continue;
        }
        if (c == '/' && i + 1 < source.size() && source[i + 1] == '*') {
            int l = line, cpos = col;
            advance(2);
            int depth = 1;
            while (i < source.size() && depth > 0) {
                if (source[i] == '/' && i + 1 < source.size() && source[i + 1] == '*') {
                    ++depth; advance(2);
                } else if (source[i] == '*' && i + 1 < source.size() && source[i + 1] == '/') {
                    --depth; advance(2);
                } else {
                    advance();
                }
            }
            if (depth > 0)
                res.diagnostics.push_back(error_at(l, cpos, "Unterminated comment"));
            continue;
        }

        int l = line, cp = col;

        if (c == '"') {
            std::string text;
            advance();
            bool closed = false;
            while (i < source.size()) {
                char d = source[i];
                if (d == '"' && i + 1 < source.size() && source[i + 1] == '"') {
                    text += '"';  // doubled-quote escape
                    advance(2);
                } else if (d == '"') {
                    advance();
                    closed = true;
                    break;
                } else if (d == '\n') {
                    break;
                } else {
                    text += d;
                    advance();
                }
            }
            if (!closed) {
                res.diagnostics.push_back(error_at(l, cp, "Unterminated string"));
            } else {
                push(Token::String, text, l, cp);
            }
            continue;
        }

        if (c >= '0' && c <= '9') {
            std::string text;
            while (i < source.size() && source[i] >= '0' && source[i] <= '9') {
                text += source[i]; advance();
            }
            if (i + 1 < source.size() && source[i] == '.' && source[i + 1] >= '0' &&
                source[i + 1] <= '9') {
                text += '.'; advance();
                while (i < source.size() && source[i] >= '0' && source[i] <= '9') {
                    text += source[i]; advance();
                }
            }
            push(Token::Number, text, l, cp);
            continue;
        }

        if (is_ident_start(c)) {
            std::string text;
            while (i < source.size() && is_ident_char((unsigned char)source[i])) {
                text += source[i]; advance();
            }
            if (is_mm_keyword(text)) {
                push(Token::Keyword, text, l, cp);
                if (text == "layout") {
                    // Capture everything after `layout` as raw text.
                    push(Token::LayoutBody, source.substr(i), line, col);
                    break;
                }
            } else {
                push(Token::Identifier, text, l, cp);
            }
            continue;
        }

        // Two-character operators first.
        if (i + 1 < source.size()) {
            std::string two = source.substr(i, 2);
            if (two == "<=" || two == ">=" || two == "<>") {
                push(Token::Punct, two, l, cp);
                advance(2);
                continue;
            }
        }
        static const std::string singles = "<>=+-*/^[]{}(),;:.";
        if (singles.find((char)c) != std::string::npos) {
            push(Token::Punct, std::string(1, (char)c), l, cp);
            advance();
            continue;
        }

        res.diagnostics.push_back(
            error_at(l, cp, std::string("Illegal character '") + (char)c + "'"));
        advance();
    }

    res.tokens.push_back(Token{Token::End, "", line, col});
    return res;
}

}  // namespace mm
