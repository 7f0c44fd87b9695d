#include "dclogit/csv.hpp"

#include "dclogit/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dclogit::csv {

int Table::column(const std::string& name) const {
    for (size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return static_cast<int>(c);
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& origin, size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { field += '"'; ++i; }
                else quoted = false;
            } else field += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted)
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": unterminated quote");
    out.push_back(field);
    return out;
}

} // namespace

Table parse(const std::string& text, const std::string& origin) {
    Table t;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line, origin, lineno);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected " +
                                      std::to_string(t.header.size()) + " fields, got " +
                                      std::to_string(fields.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty())
        throw ValidationError(origin + ": empty file");
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            const std::string& f = fields[i];
            if (f.find_first_of(",\"\n") != std::string::npos) {
                out << '"';
                for (char c : f) { if (c == '"') out << '"'; out << c; }
                out << '"';
            } else out << f;
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace dclogit::csv
