#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace termalign {

// Minimal RFC 4180 reader: quoted cells, "" escapes, embedded newlines,
// CRLF line endings. Returns false at end of input. `lines_consumed` is the
// number of physical lines the row spanned (for error reporting).
inline bool read_csv_row(std::istream& in, std::vector<std::string>& row,
                         std::size_t& lines_consumed) {
    row.clear();
    lines_consumed = 0;
    int ch = in.get();
    if (ch == EOF) return false;

    std::string cell;
    bool quoted = false;
    bool any = false;
    lines_consumed = 1;
    while (ch != EOF) {
        char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                int next = in.peek();
                if (next == '"') {
                    in.get();
                    cell.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++lines_consumed;
                cell.push_back(c);
            }
        } else if (c == '"' && cell.empty() && !any) {
            quoted = true;
        } else if (c == ',') {
            row.push_back(cell);
            cell.clear();
            any = false;
        } else if (c == '\n') {
            break;
        } else if (c == '\r' && in.peek() == '\n') {
            in.get();
            break;
        } else {
            cell.push_back(c);
            any = true;
        }
        ch = in.get();
    }
    row.push_back(cell);
    return true;
}

inline bool read_csv_row(std::istream& in, std::vector<std::string>& row) {
    std::size_t n = 0;
    return read_csv_row(in, row, n);
}

inline std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.put(',');
        out << csv_escape(row[i]);
    }
    out.put('\n');
}

}  // namespace termalign
