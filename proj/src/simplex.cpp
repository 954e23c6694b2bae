#include "ncrc/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncrc/common.hpp"

namespace ncrc {

namespace {
constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-9;

enum RowKind { kLe, kGe, kEq };
}  // namespace

void SimplexSolver::add_le(std::vector<double> row, double rhs) {
  rows_.push_back(std::move(row));
  rhs_.push_back(rhs);
  kind_.push_back(kLe);
}

void SimplexSolver::add_eq(std::vector<double> row, double rhs) {
  rows_.push_back(std::move(row));
  rhs_.push_back(rhs);
  kind_.push_back(kEq);
}

LpResult SimplexSolver::solve() const {
  const int n = static_cast<int>(c_.size());
  const int m = static_cast<int>(rows_.size());

  // Normalize to nonnegative rhs; a flipped <= becomes a >= row.
  std::vector<std::vector<double>> a(rows_);
  std::vector<double> b(rhs_);
  std::vector<int> kind(kind_.begin(), kind_.end());
  for (int i = 0; i < m; ++i) {
    NCRC_CHECK(static_cast<int>(a[i].size()) == n);
    if (b[i] < 0.0) {
      for (double& v : a[i]) v = -v;
      b[i] = -b[i];
      if (kind[i] == kLe) kind[i] = kGe;
      else if (kind[i] == kGe) kind[i] = kLe;
    }
  }

  int n_slack = 0, n_surplus = 0, n_art = 0;
  for (int i = 0; i < m; ++i) {
    if (kind[i] == kLe) ++n_slack;
    else if (kind[i] == kGe) { ++n_surplus; ++n_art; }
    else ++n_art;
  }
  const int total = n + n_slack + n_surplus + n_art;
  const int rhs_col = total;

  // Tableau rows 0..m-1 are constraints, row m is the phase-2 cost row and
  // row m+1 the phase-1 cost row (both kept in reduced form w.r.t. the basis).
  std::vector<std::vector<double>> tab(m + 2, std::vector<double>(total + 1, 0.0));
  std::vector<int> basis(m, -1);

  int slack_at = n, surplus_at = n + n_slack, art_at = n + n_slack + n_surplus;
  int si = 0, gi = 0, ai = 0;
  std::vector<int> art_cols;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) tab[i][j] = a[i][j];
    tab[i][rhs_col] = b[i];
    if (kind[i] == kLe) {
      tab[i][slack_at + si] = 1.0;
      basis[i] = slack_at + si;
      ++si;
    } else {
      if (kind[i] == kGe) {
        tab[i][surplus_at + gi] = -1.0;
        ++gi;
      }
      tab[i][art_at + ai] = 1.0;
      basis[i] = art_at + ai;
      art_cols.push_back(art_at + ai);
      ++ai;
    }
  }

  // Phase-2 cost row: maximize c.x stored as -c (so positive entries mean
  // "done"); we look for negative entries to improve.
  for (int j = 0; j < n; ++j) tab[m][j] = -c_[j];
  // Phase-1 cost row: minimize sum of artificials; reduced against the
  // artificial basis by subtracting their rows.
  for (int c : art_cols) tab[m + 1][c] = 1.0;
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= art_at) {
      for (int j = 0; j <= total; ++j) tab[m + 1][j] -= tab[i][j];
    }
  }

  auto pivot = [&](int pr, int pc) {
    double pv = tab[pr][pc];
    double inv = 1.0 / pv;
    for (int j = 0; j <= total; ++j) tab[pr][j] *= inv;
    for (int i = 0; i < m + 2; ++i) {
      if (i == pr) continue;
      double f = tab[i][pc];
      if (f == 0.0) continue;
      double* ri = tab[i].data();
      const double* rp = tab[pr].data();
      for (int j = 0; j <= total; ++j) ri[j] -= f * rp[j];
      ri[pc] = 0.0;
    }
    basis[pr] = pc;
  };

  // cost_row: m+1 for phase 1, m for phase 2. allowed_cols limits pricing.
  auto run = [&](int cost_row, int allowed_cols) -> bool {
    long long iter = 0;
    int stall = 0;
    const long long max_iter = 50000 + 20LL * (m + allowed_cols);
    while (iter++ < max_iter) {
      bool bland = stall > 2 * m + 20;
      int pc = -1;
      double best = -kCostEps;
      for (int j = 0; j < allowed_cols; ++j) {
        double rc = tab[cost_row][j];
        if (rc < -kCostEps) {
          if (bland) { pc = j; break; }
          if (rc < best) { best = rc; pc = j; }
        }
      }
      if (pc < 0) return true;  // optimal for this phase
      int pr = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (tab[i][pc] > kPivotEps) {
          double ratio = tab[i][rhs_col] / tab[i][pc];
          if (ratio < best_ratio - 1e-12 ||
              (std::abs(ratio - best_ratio) <= 1e-12 &&
               (pr < 0 || basis[i] < basis[pr]))) {
            best_ratio = ratio;
            pr = i;
          }
        }
      }
      if (pr < 0) return false;  // unbounded
      stall = (best_ratio < 1e-12) ? stall + 1 : 0;
      pivot(pr, pc);
    }
    NCRC_CHECK_MSG(false, "simplex iteration limit");
    return false;
  };

  LpResult res;

  if (n_art > 0) {
    if (!run(m + 1, n + n_slack + n_surplus)) {
      res.unbounded = true;  // phase 1 is never unbounded in exact arithmetic
      return res;
    }
    // Phase-1 objective value = sum of artificials = -tab[m+1][rhs].
    double art_val = -tab[m + 1][rhs_col];
    if (art_val > 1e-7) {
      res.infeasible = true;
      return res;
    }
    // Pivot residual zero-level artificials out when possible.
    for (int i = 0; i < m; ++i) {
      if (basis[i] >= art_at) {
        for (int j = 0; j < art_at; ++j) {
          if (std::abs(tab[i][j]) > 1e-8) { pivot(i, j); break; }
        }
      }
    }
  }

  if (!run(m, n + n_slack + n_surplus)) {
    res.unbounded = true;
    return res;
  }

  res.optimal = true;
  res.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = tab[i][rhs_col];
  res.objective = 0.0;
  for (int j = 0; j < n; ++j) res.objective += c_[j] * res.x[j];
  int le_idx = 0;
  for (int i = 0; i < m; ++i) {
    if (kind_[i] != kLe) continue;
    double lhs = 0.0;
    for (int j = 0; j < n; ++j) lhs += rows_[i][j] * res.x[j];
    if (std::abs(lhs - rhs_[i]) < 1e-7) res.binding_le_rows.push_back(le_idx);
    ++le_idx;
  }
  return res;
}

}  // namespace ncrc
