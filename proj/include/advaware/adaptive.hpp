#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advaware/pipeline.hpp"

namespace advaware {

/// Gains (a, b, c) reward good decisions and costs (d, e, f) penalize bad ones.
struct CostProfile {
  std::string name;
  double ca = 0, cb = 0, cc = 0;
  double cd = 0, ce = 0, cf = 0;

  void validate() const;
  [[nodiscard]] CostProfile scaled(double factor) const;
};

struct DecisionCounts {
  std::uint64_t a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;

  [[nodiscard]] std::uint64_t total() const { return a + b + c + d + e + f; }
  void add(DecisionKind kind);
  friend bool operator==(const DecisionCounts&, const DecisionCounts&) = default;
};

/// Runs adv_aware at parameter k on every member and tallies decision_of.
DecisionCounts count_decisions(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier,
                               int k);

/// Same tally from precomputed detection scores (flagged iff score > k).
DecisionCounts count_decisions(const SetScores& scores, int k);

/// f = Cd*Nd + Ce*Ne + Cf*Nf - Ca*Na - Cb*Nb - Cc*Nc over raw counts.
double objective(const DecisionCounts& n, const CostProfile& c);

struct SweepRow {
  int k = 1;
  DecisionCounts counts;
  double f = 0;
};

struct OptimalK {
  int k = 1;
  std::vector<SweepRow> table;  // one row per candidate, in k_range order
};

/// Exhaustive search over k_range; ties go to the smallest k.
OptimalK optimal_k(const SetScores& scores, const CostProfile& profile, std::span<const int> k_range);
OptimalK optimal_k(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier,
                   const CostProfile& profile, std::span<const int> k_range);

/// 1..class_count
std::vector<int> full_k_range(int class_count);

/// autonomous_driving, healthcare, face_recognition, inappropriate_content.
const std::vector<CostProfile>& builtin_profiles();
const CostProfile& builtin_profile(const std::string& name);

}  // namespace advaware
