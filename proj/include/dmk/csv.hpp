#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace dmk::csv {

// RFC-4180 style: fields may be double-quoted; quoted fields may contain
// commas, newlines, and doubled quotes. Rows are returned with the quoting
// removed. A trailing newline does not produce an empty row.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;  // current row has content (possibly an empty first field)

    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        any = true;
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(row);
        row.clear();
        any = false;
    };

    char c;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; any = true; break;
            case ',': end_field(); break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                end_row();
                break;
            case '\n': end_row(); break;
            default: field += c; any = true;
        }
    }
    if (any || !row.empty()) end_row();
    return rows;
}

inline std::string escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace dmk::csv
