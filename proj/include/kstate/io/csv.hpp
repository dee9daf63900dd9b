#pragma once

// Minimal RFC 4180 reader/writer: comma separated, double-quote escaping,
// quoted fields may span lines. CR before LF is dropped.

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kstate/error.hpp"

namespace kstate::csv {

struct Row {
    std::size_t line = 0; // 1-based line where the record starts
    std::vector<std::string> fields;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Next record, or nullopt at end of input. Blank lines are skipped.
    std::optional<Row> next() {
        while (true) {
            if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
            Row row;
            row.line = line_ + 1;
            std::string field;
            bool quoted = false;
            bool any = false;
            while (true) {
                const int c = in_.get();
                if (c == std::char_traits<char>::eof()) {
                    if (quoted) {
                        throw Error(ErrorCode::ParseError,
                                    "line " + std::to_string(row.line) + ": unterminated quoted field");
                    }
                    break;
                }
                const char ch = static_cast<char>(c);
                if (quoted) {
                    if (ch == '"') {
                        if (in_.peek() == '"') {
                            field.push_back('"');
                            in_.get();
                        } else {
                            quoted = false;
                        }
                    } else {
                        if (ch == '\n') ++line_;
                        field.push_back(ch);
                    }
                    continue;
                }
                if (ch == '\n') {
                    ++line_;
                    break;
                }
                if (ch == '\r' && in_.peek() == '\n') continue;
                any = true;
                if (ch == '"' && field.empty()) {
                    quoted = true;
                } else if (ch == ',') {
                    row.fields.push_back(std::move(field));
                    field.clear();
                } else {
                    field.push_back(ch);
                }
            }
            if (!any && row.fields.empty() && field.empty()) {
                if (in_.peek() == std::char_traits<char>::eof() && in_.eof()) return std::nullopt;
                continue;
            }
            row.fields.push_back(std::move(field));
            return row;
        }
    }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << quote(fields[i]);
    }
    out << '\n';
}

} // namespace kstate::csv
