#pragma once

// Minimal RFC-4180 CSV reader/writer. Quoted fields may contain commas,
// doubled quotes, and embedded newlines. Header row mandatory for all
// study files; empty field means missing.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace crossfuse::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record started
};

inline std::vector<Row> parse(std::istream& in) {
    std::vector<Row> rows;
    Row cur;
    std::string field;
    std::size_t line = 1;
    cur.line = 1;
    bool in_quotes = false;
    bool any = false;

    int ch;
    while ((ch = in.get()) != EOF) {
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            any = true;
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                any = true;
                break;
            case ',':
                cur.fields.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                if (any) {
                    cur.fields.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(cur));
                    cur = Row{};
                    any = false;
                }
                cur.line = line;
                break;
            default:
                field.push_back(c);
                any = true;
        }
    }
    if (in_quotes)
        throw MalformedRow("unterminated quoted field", cur.line, cur.fields.size() + 1);
    if (any) {
        cur.fields.push_back(std::move(field));
        rows.push_back(std::move(cur));
    }
    return rows;
}

inline std::vector<Row> parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return parse(in);
}

inline std::string escape(const std::string& s) {
    bool need = s.find_first_of(",\"\n\r") != std::string::npos;
    if (!need) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace crossfuse::csv
