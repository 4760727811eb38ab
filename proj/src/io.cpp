#include "wsub/io.hpp"

#include "wsub/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <vector>

namespace wsub {

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> lines;  // source line of each row
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(const std::string& tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != last)
        throw ParseError("malformed number '" + tok + "'", line);
    if (!std::isfinite(v)) throw ParseError("non-finite value '" + tok + "'", line);
    return v;
}

Table read_table(std::istream& is, std::size_t min_cols) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = cells;
            if (t.header.size() < min_cols) throw ParseError("header has too few columns", lineno);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             lineno);
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_number(c, lineno));
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) throw ParseError("empty file", lineno + 1);
    if (t.rows.empty()) throw ParseError("no data rows", lineno + 1);
    return t;
}

void expect_header(const Table& t, const std::vector<std::string>& names) {
    if (t.header != names) {
        std::string want;
        for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
        throw ParseError("expected header '" + want + "'", 1);
    }
}

// Uniform axis through the given sorted centers.
Axis axis_from_centers(const std::vector<double>& c, const std::vector<std::size_t>& lines) {
    const auto n = static_cast<Eigen::Index>(c.size());
    if (n == 1) return Axis{c[0] - 0.5, 1.0, 1};
    const double dx = (c.back() - c.front()) / static_cast<double>(n - 1);
    if (!(dx > 0.0)) throw ParseError("cell centers must increase", lines.size() > 1 ? lines[1] : 1);
    for (std::size_t i = 1; i < c.size(); ++i) {
        const double step = c[i] - c[i - 1];
        if (std::abs(step - dx) > 1e-9 * std::max(1.0, std::abs(dx)) + 1e-12 * std::abs(c[i]))
            throw ParseError("cell centers are not uniformly spaced", lines[i]);
    }
    return Axis{c.front() - 0.5 * dx, dx, n};
}

Eigen::VectorXd checked_masses(const std::vector<double>& m, const std::vector<std::size_t>& lines) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < 0.0) throw ParseError("negative mass", lines[i]);
        v[static_cast<Eigen::Index>(i)] = m[i];
        total += m[i];
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw ParseError("masses sum to " + format_double(total) + ", expected 1", lines.back());
    return v;
}

template <class T, class F>
T load_with(const std::string& path, F&& reader) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "'");
    return reader(in);
}

template <class T>
void save_with(const std::string& path, const T& value) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write '" + path + "'");
    if constexpr (std::is_same_v<T, PointCloud>) {
        write_cloud_csv(out, value);
    } else {
        write_grid_csv(out, value);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_grid_csv(std::ostream& os, const GridMeasure1D& mu) {
    os << "x,mass\n";
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        os << format_double(mu.axis.center(i)) << ',' << format_double(mu.mass[i]) << '\n';
}

void write_grid_csv(std::ostream& os, const GridMeasure2D& mu) {
    os << "x1,x2,mass\n";
    for (Eigen::Index i = 0; i < mu.mass.rows(); ++i)
        for (Eigen::Index j = 0; j < mu.mass.cols(); ++j)
            os << format_double(mu.axis0.center(i)) << ',' << format_double(mu.axis1.center(j)) << ','
               << format_double(mu.mass(i, j)) << '\n';
}

void write_cloud_csv(std::ostream& os, const PointCloud& cloud) {
    for (Eigen::Index k = 0; k < cloud.dim(); ++k) os << 'x' << (k + 1) << ',';
    os << "weight\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        for (Eigen::Index k = 0; k < cloud.dim(); ++k) os << format_double(cloud.points(i, k)) << ',';
        os << format_double(cloud.weights[i]) << '\n';
    }
}

GridMeasure1D read_grid_csv(std::istream& is) {
    const Table t = read_table(is, 2);
    expect_header(t, {"x", "mass"});
    std::vector<double> x, m;
    for (const auto& r : t.rows) {
        x.push_back(r[0]);
        m.push_back(r[1]);
    }
    const Axis axis = axis_from_centers(x, t.lines);
    return GridMeasure1D::normalized(axis, checked_masses(m, t.lines));
}

GridMeasure2D read_grid2d_csv(std::istream& is) {
    const Table t = read_table(is, 3);
    expect_header(t, {"x1", "x2", "mass"});
    std::map<double, int> xs, ys;
    for (const auto& r : t.rows) {
        xs.emplace(r[0], 0);
        ys.emplace(r[1], 0);
    }
    std::vector<double> cx, cy;
    for (auto& [k, v] : xs) {
        v = static_cast<int>(cx.size());
        cx.push_back(k);
    }
    for (auto& [k, v] : ys) {
        v = static_cast<int>(cy.size());
        cy.push_back(k);
    }
    if (cx.size() * cy.size() != t.rows.size())
        throw ParseError("2D grid rows do not form a full tensor grid", t.lines.back());
    const std::vector<std::size_t> lx(cx.size(), t.lines.front()), ly(cy.size(), t.lines.front());
    const Axis a0 = axis_from_centers(cx, lx), a1 = axis_from_centers(cy, ly);
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(a0.n, a1.n, -1.0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[2] < 0.0) throw ParseError("negative mass", t.lines[r]);
        auto& cell = m(xs.at(row[0]), ys.at(row[1]));
        if (cell >= 0.0) throw ParseError("duplicate cell", t.lines[r]);
        cell = row[2];
    }
    if (std::abs(m.sum() - 1.0) > 1e-6) throw ParseError("masses sum to " + format_double(m.sum()), t.lines.back());
    return GridMeasure2D::normalized(a0, a1, m);
}

PointCloud read_cloud_csv(std::istream& is) {
    const Table t = read_table(is, 2);
    const std::size_t d = t.header.size() - 1;
    std::vector<std::string> want;
    for (std::size_t k = 0; k < d; ++k) want.push_back("x" + std::to_string(k + 1));
    want.push_back("weight");
    expect_header(t, want);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
    std::vector<double> w;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t k = 0; k < d; ++k)
            pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = t.rows[r][k];
        w.push_back(t.rows[r][d]);
    }
    Eigen::VectorXd wv = checked_masses(w, t.lines);
    return PointCloud(pts, wv / wv.sum());
}

void save(const std::string& path, const GridMeasure1D& mu) { save_with(path, mu); }
void save(const std::string& path, const GridMeasure2D& mu) { save_with(path, mu); }
void save(const std::string& path, const PointCloud& cloud) { save_with(path, cloud); }

GridMeasure1D load_grid(const std::string& path) {
    return load_with<GridMeasure1D>(path, [](std::istream& in) { return read_grid_csv(in); });
}
GridMeasure2D load_grid2d(const std::string& path) {
    return load_with<GridMeasure2D>(path, [](std::istream& in) { return read_grid2d_csv(in); });
}
PointCloud load_cloud(const std::string& path) {
    return load_with<PointCloud>(path, [](std::istream& in) { return read_cloud_csv(in); });
}

}  // namespace wsub
