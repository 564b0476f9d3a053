#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advaware/adaptive.hpp"
#include "advaware/pipeline.hpp"

namespace advaware {

/// Detection scores of adversarial (positive) and clean (negative) images.
struct ScoredPopulation {
  std::vector<double> positives;
  std::vector<double> negatives;
};

/// P(random positive scores above random negative), ties counted 1/2.
/// Computed from grouped ranks in O(n log n).
double roc_auc(const ScoredPopulation& p);

/// Trapezoid area under the ROC traced by sweeping a threshold down through
/// every distinct score. Equal to roc_auc up to rounding.
double roc_auc_sweep(const ScoredPopulation& p);

/// Population of rank scores between SET_crc (clean) and SET_adv members.
ScoredPopulation clean_vs_adversarial(const SetScores& scores);

/// AUC of the hard detector at parameter k (score > k flags).
double detector_auc(const SetScores& scores, int k);

/// 100 * |adv| / (|adv| + |crc|).
double attack_success_ratio(const CategorizedSets& sets);

/// include_misclassified: 100 * (a + b + c) / all six counts.
/// otherwise: 100 * (a + c) / (a + c + d + f).
double system_accuracy(const DecisionCounts& n, bool include_misclassified);

/// Shortest round-trip decimal form; deterministic across runs.
std::string format_number(double v);

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180: CRLF-free, fields quoted when they hold a comma, quote or newline.
std::string to_csv(const ReportTable& t);
void write_csv(const ReportTable& t, const std::filesystem::path& path);

/// Columns: k, N_a, N_b, N_c, N_d, N_e, N_f, f, acc_with, acc_without, auc.
/// Accuracy fields are empty when their denominator is zero.
ReportTable sweep_table(const SetScores& scores, const CostProfile& profile, std::span<const int> k_range);

}  // namespace advaware
