#include "corral/core.hpp"

#include <algorithm>
#include <cstdio>

namespace corral {

int SwitchingComparator::segment_of(int t) const {
  auto it = std::upper_bound(starts.begin(), starts.end(), t);
  return static_cast<int>(it - starts.begin()) - 1;
}

void SwitchingComparator::validate() const {
  if (starts.empty() || starts.front() != 0) {
    throw ContractViolation("comparator segments must start at round 0");
  }
  for (std::size_t k = 1; k < starts.size(); ++k) {
    if (starts[k] <= starts[k - 1]) {
      throw ContractViolation("comparator boundaries must be strictly increasing");
    }
  }
  if (starts.back() >= T) throw ContractViolation("comparator boundary beyond horizon");
  if (anchors.size() != starts.size()) {
    throw ContractViolation("comparator needs one anchor per segment");
  }
}

RegretReport compute_regret(std::span<const double> realized, const LossSequence& losses,
                            const SwitchingComparator& comparator) {
  if (static_cast<int>(realized.size()) != losses.T || comparator.T != losses.T) {
    throw ContractViolation("regret: trace length " + std::to_string(realized.size()) +
                            " does not match horizon " + std::to_string(losses.T));
  }
  comparator.validate();

  RegretReport report;
  report.per_round.resize(realized.size());
  report.per_segment_regret.assign(comparator.segments(), 0.0);
  for (int k = 0; k < comparator.segments(); ++k) {
    const Vec& anchor = comparator.anchors[k];
    if (anchor.size() != losses.d) throw ContractViolation("anchor dimension mismatch");
    double seg = 0.0;
    for (int t = comparator.starts[k]; t < comparator.segment_end(k); ++t) {
      double comparator_loss = 0.0;
      for (int n = 0; n < losses.d; ++n) comparator_loss += losses.rows(t, n) * anchor[n];
      const double r = realized[t] - comparator_loss;
      report.per_round[t] = r;
      seg += r;
    }
    report.per_segment_regret[k] = seg;
  }
  double total = 0.0;
  for (double seg : report.per_segment_regret) total += seg;
  report.cumulative_regret = total;
  return report;
}

std::string format_diagnostics(const std::vector<std::pair<std::string_view, double>>& diag) {
  std::string out;
  char buf[64];
  for (const auto& [key, value] : diag) {
    if (!out.empty()) out += ';';
    out.append(key);
    std::snprintf(buf, sizeof buf, "=%.17g", value);
    out += buf;
  }
  return out;
}

}  // namespace corral
