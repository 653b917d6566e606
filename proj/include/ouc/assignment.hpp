#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/matrix.hpp"

namespace ouc {

struct Assignment {
  /// row i is matched to column column_of_row[i]
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix: Jonker-Volgenant shortest
/// augmenting paths, started from auction prices instead of column reduction.
[[nodiscard]] inline Assignment solve_assignment(const Matrix& cost) {
  if (!cost.square()) throw Error(ErrorKind::Dimension, "assignment cost must be square");
  const std::size_t n = cost.rows();
  Assignment out;
  if (n == 0) return out;
  if (!all_finite(cost)) throw Error(ErrorKind::Domain, "assignment cost has non-finite entries");
  if (n == 1) {
    out.column_of_row = {0};
    out.cost = cost(0, 0);
    return out;
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr long kNone = -1;
  std::vector<long> rowsol(n, kNone);
  std::vector<long> colsol(n, kNone);
  std::vector<double> v(n, 0.0);

  double cmin = kInf;
  double cmax = -kInf;
  for (double c : cost.data()) {
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const double range = cmax - cmin;

  // Starting prices from an eps-scaling auction. Plain augmenting row reduction is the
  // eps = 0 case and can cycle on real-valued costs; a positive bid increment cannot.
  // Only the prices are kept: optimality comes from the exact phase below.
  if (range > 0.0) {
    std::vector<std::size_t> queue;
    queue.reserve(n);
    const double eps_final = range * 1e-4 / static_cast<double>(n);
    for (double eps = range / 4.0;; eps = std::max(eps / 8.0, eps_final)) {
      std::fill(rowsol.begin(), rowsol.end(), kNone);
      std::fill(colsol.begin(), colsol.end(), kNone);
      queue.clear();
      for (std::size_t i = n; i-- > 0;) queue.push_back(i);
      while (!queue.empty()) {
        const std::size_t i = queue.back();
        queue.pop_back();
        const double* row = cost.row(i).data();
        double best = kInf;
        double second = kInf;
        std::size_t jbest = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double h = row[j] - v[j];
          if (h < second) {
            if (h < best) {
              second = best;
              best = h;
              jbest = j;
            } else {
              second = h;
            }
          }
        }
        v[jbest] -= (second - best) + eps;
        const long owner = colsol[jbest];
        colsol[jbest] = static_cast<long>(i);
        rowsol[i] = static_cast<long>(jbest);
        if (owner != kNone) {
          rowsol[static_cast<std::size_t>(owner)] = kNone;
          queue.push_back(static_cast<std::size_t>(owner));
        }
      }
      if (eps <= eps_final) break;
    }
  }

  // Keep only pairs that are exactly tight under the final prices.
  std::vector<std::size_t> free_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = cost.row(i).data();
    if (rowsol[i] != kNone) {
      const auto j = static_cast<std::size_t>(rowsol[i]);
      const double mine = row[j] - v[j];
      bool tight = true;
      for (std::size_t k = 0; k < n && tight; ++k) tight = row[k] - v[k] >= mine;
      if (tight) continue;
      colsol[j] = kNone;
      rowsol[i] = kNone;
    }
    free_rows.push_back(i);
  }
  const std::size_t numfree = free_rows.size();

  // Shortest augmenting paths: Dijkstra on reduced costs, one column settled per step,
  // over contiguous arrays (the relax pass also finds the next minimum).
  std::vector<double> d(n);
  std::vector<std::size_t> pred(n);
  std::vector<unsigned char> settled(n);
  std::vector<std::size_t> scanned;
  scanned.reserve(n);
  for (std::size_t f = 0; f < numfree; ++f) {
    const std::size_t freerow = free_rows[f];
    const double* row = cost.row(freerow).data();
    std::size_t jmin = 0;
    double dmin = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = row[j] - v[j];
      pred[j] = freerow;
      settled[j] = 0;
      if (d[j] < dmin) {
        dmin = d[j];
        jmin = j;
      }
    }
    scanned.clear();
    std::size_t endofpath = 0;
    for (;;) {
      if (colsol[jmin] == kNone) {
        endofpath = jmin;
        break;
      }
      settled[jmin] = 1;
      scanned.push_back(jmin);
      const auto i = static_cast<std::size_t>(colsol[jmin]);
      const double* ri = cost.row(i).data();
      const double h = ri[jmin] - v[jmin] - dmin;
      dmin = kInf;
      for (std::size_t j = 0; j < n; ++j) {
        if (settled[j]) continue;
        const double v2 = ri[j] - v[j] - h;
        if (v2 < d[j]) {
          d[j] = v2;
          pred[j] = i;
        }
        // ties go to a free column so the path ends early
        if (d[j] < dmin || (d[j] == dmin && colsol[j] == kNone && colsol[jmin] != kNone)) {
          dmin = d[j];
          jmin = j;
        }
      }
    }

    for (std::size_t j1 : scanned) v[j1] += d[j1] - dmin;
    // Flip the path.
    std::size_t i = 0;
    do {
      i = pred[endofpath];
      colsol[endofpath] = static_cast<long>(i);
      const std::size_t j1 = endofpath;
      endofpath = static_cast<std::size_t>(rowsol[i]);
      rowsol[i] = static_cast<long>(j1);
    } while (i != freerow);
  }

  out.column_of_row.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.column_of_row[i] = static_cast<std::size_t>(rowsol[i]);
    out.cost += cost(i, out.column_of_row[i]);
  }
  return out;
}

}  // namespace ouc
