#pragma once

#include <string>
#include <vector>

namespace ncrc {

// Dense two-phase simplex for small/medium LPs:
//   maximize c.x  s.t.  A_le x <= b_le,  A_eq x = b_eq,  x >= 0.
// Instances in this project stay below ~2e4 variables and ~4e3 rows, where a
// dense tableau is simple and fast enough. Largest-coefficient pricing with a
// Bland fallback guards against cycling.
struct LpResult {
  bool optimal = false;
  bool infeasible = false;
  bool unbounded = false;
  double objective = 0.0;
  std::vector<double> x;
  // Row indices (into the caller's <= rows) whose slack is ~0 at the optimum.
  std::vector<int> binding_le_rows;
};

class SimplexSolver {
 public:
  void set_objective(std::vector<double> c) { c_ = std::move(c); }
  void add_le(std::vector<double> row, double rhs);
  void add_eq(std::vector<double> row, double rhs);
  LpResult solve() const;

 private:
  std::vector<double> c_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> rhs_;
  std::vector<int> kind_;
};

}  // namespace ncrc
