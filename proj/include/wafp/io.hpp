#pragma once

// File helpers and CSV writers shared by the run directory and the CLI.

#include "wafp/common.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wafp {

namespace fs = std::filesystem;

/// "%.17g"; round-trips every double.
inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

inline void write_text(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot open " + p.string() + " for writing");
    os << content;
    if (!os) throw IoError("write failed for " + p.string());
}

inline std::string read_text(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string loss_history_csv(const std::vector<double>& losses) {
    std::string s = "epoch,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) s += std::to_string(i + 1) + "," + fmt17(losses[i]) + "\n";
    return s;
}

/// Header "t,x_1,...,x_n" when `t` is given, else "x_1,...,x_n".
inline void append_samples_csv(std::string& out, const RowMatrix& x, std::optional<double> t, bool header) {
    if (header) {
        if (t) out += "t,";
        for (Eigen::Index i = 0; i < x.cols(); ++i) out += (i ? ",x_" : "x_") + std::to_string(i + 1);
        out += "\n";
    }
    for (Eigen::Index m = 0; m < x.rows(); ++m) {
        if (t) out += fmt17(*t) + ",";
        for (Eigen::Index i = 0; i < x.cols(); ++i) out += (i ? "," : "") + fmt17(x(m, i));
        out += "\n";
    }
}

inline std::string samples_csv(const RowMatrix& x, std::optional<double> t = std::nullopt) {
    std::string s;
    append_samples_csv(s, x, t, true);
    return s;
}

/// Matrix with a leading label column, e.g. error heatmaps (dims x times).
inline std::string labelled_matrix_csv(const std::string& row_label, const std::vector<std::string>& col_names,
                                       const RowMatrix& m) {
    std::string s = row_label;
    for (const auto& c : col_names) s += "," + c;
    s += "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        s += std::to_string(i + 1);
        for (Eigen::Index j = 0; j < m.cols(); ++j) s += "," + fmt17(m(i, j));
        s += "\n";
    }
    return s;
}

}  // namespace wafp
