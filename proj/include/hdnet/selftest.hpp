#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace hdnet {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> failures;  // one line per failing property
  std::string summary;
  double seconds = 0.0;
};

// gradients, knn_oracle, mgd_identities, ld_contracts, loss_composition,
// metric_oracles.
std::vector<std::string> selftest_suites();

// Quick mode runs fewer seeds and samples fewer model coordinates. Throws
// ContractError for an unknown suite.
SuiteResult run_suite(std::string_view name, bool quick);

std::vector<SuiteResult> run_selftest(bool quick,
                                      const std::function<void(const SuiteResult&)>& on_result = {});

}  // namespace hdnet
