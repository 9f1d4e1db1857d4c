// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// nonzero if any criterion fails.

#include <cstdio>

#include "textunlock/selftest.hpp"

int main() {
  const auto results = textunlock::selftest::run_all();
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%s %-28s %s [%.2fs, limit %.0fs]\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(),
                r.seconds, r.time_limit);
    failed += !r.pass;
  }
  std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
