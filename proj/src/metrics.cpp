#include "advaware/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace advaware {

namespace {

void require_populations(const ScoredPopulation& p) {
  if (p.positives.empty() || p.negatives.empty()) throw std::invalid_argument("AUC needs nonempty populations");
}

struct Tagged {
  double score;
  bool positive;
};

std::vector<Tagged> merged(const ScoredPopulation& p) {
  std::vector<Tagged> all;
  all.reserve(p.positives.size() + p.negatives.size());
  for (double s : p.positives) all.push_back({s, true});
  for (double s : p.negatives) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.score < b.score; });
  return all;
}

}  // namespace

double roc_auc(const ScoredPopulation& p) {
  require_populations(p);
  const auto all = merged(p);
  // Each positive wins against every lower negative and ties half of the equal ones.
  double wins = 0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    for (; j < all.size() && all[j].score == all[i].score; ++j) (all[j].positive ? pos : neg)++;
    wins += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
    negatives_below += neg;
    i = j;
  }
  return wins / (static_cast<double>(p.positives.size()) * static_cast<double>(p.negatives.size()));
}

double roc_auc_sweep(const ScoredPopulation& p) {
  require_populations(p);
  const auto all = merged(p);
  const double total_pos = static_cast<double>(p.positives.size());
  const double total_neg = static_cast<double>(p.negatives.size());
  double area = 0, tpr = 0, fpr = 0;
  // Highest threshold first: everything at or above it is flagged.
  for (std::size_t j = all.size(); j > 0;) {
    std::size_t i = j, pos = 0, neg = 0;
    for (; i > 0 && all[i - 1].score == all[j - 1].score; --i) (all[i - 1].positive ? pos : neg)++;
    const double next_tpr = tpr + static_cast<double>(pos) / total_pos;
    const double next_fpr = fpr + static_cast<double>(neg) / total_neg;
    area += (next_fpr - fpr) * (tpr + next_tpr) / 2;
    tpr = next_tpr;
    fpr = next_fpr;
    j = i;
  }
  return area;
}

ScoredPopulation clean_vs_adversarial(const SetScores& scores) {
  ScoredPopulation p;
  p.positives.assign(scores.adv.begin(), scores.adv.end());
  p.negatives.assign(scores.crc.begin(), scores.crc.end());
  return p;
}

double detector_auc(const SetScores& scores, int k) {
  ScoredPopulation p;
  for (int s : scores.adv) p.positives.push_back(s > k ? 1.0 : 0.0);
  for (int s : scores.crc) p.negatives.push_back(s > k ? 1.0 : 0.0);
  return roc_auc(p);
}

double attack_success_ratio(const CategorizedSets& sets) {
  const std::size_t attempts = sets.set_adv.size() + sets.set_crc.size();
  if (attempts == 0) throw std::invalid_argument("no attack attempts");
  return 100.0 * static_cast<double>(sets.set_adv.size()) / static_cast<double>(attempts);
}

double system_accuracy(const DecisionCounts& n, bool include_misclassified) {
  const std::uint64_t good = include_misclassified ? n.a + n.b + n.c : n.a + n.c;
  const std::uint64_t all = include_misclassified ? n.total() : n.a + n.c + n.d + n.f;
  if (all == 0) throw std::invalid_argument("system accuracy has a zero denominator");
  return 100.0 * static_cast<double>(good) / static_cast<double>(all);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const ReportTable& t) {
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  };
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + field(cells[i]);
    return out + "\n";
  };
  std::string out = line(t.columns);
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size()) throw std::invalid_argument("report row width != column count");
    out += line(r);
  }
  return out;
}

void write_csv(const ReportTable& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(t);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ReportTable sweep_table(const SetScores& scores, const CostProfile& profile, std::span<const int> k_range) {
  ReportTable t{{"k", "N_a", "N_b", "N_c", "N_d", "N_e", "N_f", "f", "acc_with", "acc_without", "auc"}, {}};
  const bool have_auc = !scores.adv.empty() && !scores.crc.empty();
  for (int k : k_range) {
    const auto n = count_decisions(scores, k);
    auto acc = [&](bool include) {
      const std::uint64_t denom = include ? n.total() : n.a + n.c + n.d + n.f;
      return denom == 0 ? std::string() : format_number(system_accuracy(n, include));
    };
    t.rows.push_back({std::to_string(k), std::to_string(n.a), std::to_string(n.b), std::to_string(n.c),
                      std::to_string(n.d), std::to_string(n.e), std::to_string(n.f),
                      format_number(objective(n, profile)), acc(true), acc(false),
                      have_auc ? format_number(detector_auc(scores, k)) : std::string()});
  }
  return t;
}

}  // namespace advaware
