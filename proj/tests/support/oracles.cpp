#include "oracles.hpp"

#include <cmath>
#include <map>

#include "proxyseg/mining.hpp"

namespace proxyseg::testing {

double oracle_variation_ratio(const std::vector<int>& votes) {
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int best = 0;
  for (const auto& [cls, n] : counts) best = std::max(best, n);
  return 1.0 - static_cast<double>(best) / static_cast<double>(votes.size());
}

std::size_t enumerate_variation_ratios(int members, int classes, std::string& failure) {
  std::size_t tuples = 1;
  for (int e = 0; e < members; ++e) tuples *= static_cast<std::size_t>(classes);
  std::vector<LabelMap> maps(static_cast<std::size_t>(members), LabelMap(1, 1, tuples));
  std::vector<std::vector<int>> votes(tuples);
  for (std::size_t t = 0; t < tuples; ++t) {
    std::size_t code = t;
    for (int e = 0; e < members; ++e) {
      const int v = static_cast<int>(code % static_cast<std::size_t>(classes));
      code /= static_cast<std::size_t>(classes);
      maps[static_cast<std::size_t>(e)].values[t] = static_cast<std::uint8_t>(v);
      votes[t].push_back(v);
    }
  }
  const auto got = variation_ratios(maps);
  for (std::size_t t = 0; t < tuples; ++t) {
    const double want = oracle_variation_ratio(votes[t]);
    if (std::abs(got[t] - want) > 1e-15 && failure.empty()) {
      failure = "E=" + std::to_string(members) + " K=" + std::to_string(classes) + " tuple " + std::to_string(t) +
                ": got " + std::to_string(got[t]) + ", want " + std::to_string(want);
    }
  }
  return tuples;
}

ScalarMetrics scalar_metrics(const LabelMap& predictions, const LabelMap& truth, std::size_t num_classes) {
  ScalarMetrics m;
  std::size_t correct = 0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth.values[i] == kIgnoreLabel) continue;
    ++valid;
    correct += predictions.values[i] == truth.values[i];
  }
  m.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(valid);
  double sum = 0.0;
  int present = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth.values[i] == kIgnoreLabel) continue;
      const bool p = predictions.values[i] == k;
      const bool t = truth.values[i] == k;
      inter += p && t;
      uni += p || t;
    }
    if (uni == 0) {
      m.iou.emplace_back();
    } else {
      m.iou.emplace_back(static_cast<double>(inter) / static_cast<double>(uni));
      sum += *m.iou.back();
      ++present;
    }
  }
  m.mean_iou = sum / present;
  return m;
}

}  // namespace proxyseg::testing
