#include "hdgee/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "hdgee/error.hpp"

namespace hdgee {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error(fmt::format("line {}: {}", line, what)), line_(line) {}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view field, std::size_t line, std::string_view column) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError(line, fmt::format("column {}: '{}' is not a number", column, field));
    }
    if (!std::isfinite(value)) {
        throw ParseError(line, fmt::format("column {}: value is not finite", column));
    }
    return value;
}

void format_number(std::string& out, double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace

ClusteredDataset read_csv(std::istream& in, Family family) {
    const MarginalModel model(family);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError(1, "empty input (expected header cluster,y,x1,...,xp)");
    }
    ++line_no;
    const auto header = split(trim(line));
    if (header.size() < 3 || trim(header[0]) != "cluster" || trim(header[1]) != "y") {
        throw ParseError(line_no, "header must be cluster,y,x1,...,xp");
    }
    const std::size_t p = header.size() - 2;
    for (std::size_t k = 0; k < p; ++k) {
        if (trim(header[k + 2]) != fmt::format("x{}", k + 1)) {
            throw ParseError(line_no, fmt::format("header column {} must be x{}", k + 3, k + 1));
        }
    }

    std::vector<ClusterObservation> clusters;
    std::set<std::string, std::less<>> finished;
    std::string current;
    Vector y;
    std::vector<double> x;
    const auto flush = [&] {
        if (y.empty()) return;
        const std::size_t m = y.size();
        clusters.push_back({std::move(y), Matrix(m, p, std::move(x))});
        y = {};
        x = {};
        finished.insert(current);
    };

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        const auto fields = split(text);
        if (fields.size() != p + 2) {
            throw ParseError(line_no, fmt::format("expected {} fields, found {}", p + 2, fields.size()));
        }
        const std::string_view id = trim(fields[0]);
        if (id.empty()) throw ParseError(line_no, "empty cluster id");
        if (id != current) {
            flush();
            if (finished.contains(id)) {
                throw ParseError(line_no, fmt::format("rows of cluster '{}' are not contiguous", id));
            }
            current = std::string(id);
        }
        const double response = parse_number(fields[1], line_no, "y");
        if (!model.admits(response)) {
            throw ParseError(line_no,
                             fmt::format("response {} is not valid for the {} family", trim(fields[1]), family_name(family)));
        }
        y.push_back(response);
        for (std::size_t k = 0; k < p; ++k) {
            x.push_back(parse_number(fields[k + 2], line_no, fmt::format("x{}", k + 1)));
        }
    }
    flush();
    if (clusters.empty()) {
        throw ParseError(line_no, "no observations after the header");
    }
    return ClusteredDataset(std::move(clusters), family);
}

ClusteredDataset read_csv(const std::filesystem::path& path, Family family) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(0, fmt::format("cannot open '{}'", path.string()));
    }
    return read_csv(in, family);
}

void write_csv(std::ostream& out, const ClusteredDataset& data) {
    std::string text = "cluster,y";
    for (std::size_t k = 0; k < data.p(); ++k) text += fmt::format(",x{}", k + 1);
    text += '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto& c = data[i];
        for (std::size_t j = 0; j < c.size(); ++j) {
            text += std::to_string(i + 1);
            text += ',';
            format_number(text, c.y[j]);
            for (double v : c.x.row(j)) {
                text += ',';
                format_number(text, v);
            }
            text += '\n';
        }
    }
    out << text;
}

void write_csv(const std::filesystem::path& path, const ClusteredDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(fmt::format("cannot write '{}'", path.string()));
    }
    write_csv(out, data);
}

}  // namespace hdgee
