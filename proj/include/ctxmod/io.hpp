#pragma once

#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace ctxmod {

inline std::string format_double(double v, int precision = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

// Labeled matrix CSV: header row of column labels, one leading label per row.
inline void write_matrix_csv(std::ostream& os, const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& col_labels,
                             const Eigen::MatrixXd& m, const std::string& corner = "") {
  os << corner;
  for (const auto& c : col_labels) os << ',' << c;
  os << "\n";
  for (int i = 0; i < m.rows(); ++i) {
    os << row_labels[i];
    for (int j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
    os << "\n";
  }
}

// Static index striping over a worker pool; slot-indexed writes keep results
// deterministic regardless of scheduling.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (jobs <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = std::min(jobs, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace ctxmod
