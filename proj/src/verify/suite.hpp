// Runtime invariant suite: every mathematical property the layers promise,
// runnable per scope from the CLI (`check`) and reused by the tests.
#pragma once

#include <string>
#include <vector>

namespace lvt {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0;   // quantity compared against the tolerance
  double tolerance = 0;  // pass iff measured <= tolerance
  double elapsed_s = 0;
  std::string note;      // shapes, counts, sub-results
};

struct CheckReport {
  std::vector<CheckResult> checks;

  bool all_pass() const;
  std::string to_json() const;
};

/// Runs one scope of checks: "tensor", "csa", "rasa", "backbone" or "all".
/// `seed` feeds every randomized draw (each check mixes in its own name, so
/// checks are independent of suite order). Gradient and oracle-agreement
/// checks always run in double; `f64` additionally switches the
/// precision-agnostic tensor identities from float to double.
CheckReport run_invariant_suite(const std::string& scope, unsigned long long seed, bool f64);

}  // namespace lvt
