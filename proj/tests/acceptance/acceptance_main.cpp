// One PASS/FAIL line per acceptance criterion.
//
//   refacer_acceptance                  evaluate everything, exit 0 once every line is printed
//   refacer_acceptance --strict         exit 1 if any selected criterion fails
//   refacer_acceptance --only 1 --only 4
//   refacer_acceptance --run-experiments --work-dir DIR

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>

#include "acceptance.hpp"
#include "refacer/error.hpp"

int main(int argc, char** argv) {
  using namespace refacer::acceptance;

  CLI::App app{"Acceptance criteria report", "refacer_acceptance"};
  std::vector<int> only;
  bool strict = false;
  ExperimentOptions exp;
  exp.work_dir = std::filesystem::temp_directory_path() / "refacer_acceptance";
  app.add_option("--only", only, "Evaluate only these criteria (repeatable)")->check(CLI::Range(1, 11));
  app.add_flag("--strict", strict, "Exit 1 when a selected criterion fails");
  app.add_flag("--run-experiments", exp.force, "Run the desk-scale experiments regardless of the projected runtime");
  app.add_option("--work-dir", exp.work_dir, "Where experiment runs write their outputs");
  CLI11_PARSE(app, argc, argv);

  std::vector<Criterion> all = property_criteria();
  for (auto& c : experiment_criteria(exp)) all.push_back(std::move(c));
  std::sort(all.begin(), all.end(), [](const Criterion& a, const Criterion& b) { return a.id < b.id; });

  int failures = 0, reported = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %2d %s  %s: %s\n", c.id, v.pass ? "PASS" : "FAIL", c.title.c_str(), v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
    ++reported;
  }
  std::printf("%d/%d criteria passed\n", reported - failures, reported);
  return strict && failures > 0 ? 1 : 0;
}
