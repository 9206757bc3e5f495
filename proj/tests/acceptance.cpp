#include <cstdio>
#include <cstdlib>
#include <string>

#include "unier/repro.hpp"

// Prints one line per acceptance criterion; exits non-zero if any fails.
// An optional argument selects a fixture (default "all").
int main(int argc, char** argv) {
  const std::string fixture = argc > 1 ? argv[1] : "all";
  int failed = 0;
  for (int id : [&] {
         for (const auto& f : unier::repro::fixtures()) {
           if (f.name == fixture) return f.criteria;
         }
         std::fprintf(stderr, "unknown fixture %s\n", fixture.c_str());
         std::exit(2);
       }()) {
    const auto r = unier::repro::run_criterion(id);
    std::printf("%s\n", unier::repro::format_result(r).c_str());
    std::fflush(stdout);
    failed += !r.passed;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
