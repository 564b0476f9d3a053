#include "advaware/adaptive.hpp"

#include <numeric>
#include <stdexcept>

namespace advaware {

void CostProfile::validate() const {
  for (double w : {ca, cb, cc, cd, ce, cf})
    if (!(w >= 0)) throw std::invalid_argument("cost profile '" + name + "' has a negative weight");
}

CostProfile CostProfile::scaled(double factor) const {
  return {name, ca * factor, cb * factor, cc * factor, cd * factor, ce * factor, cf * factor};
}

void DecisionCounts::add(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::a: ++a; break;
    case DecisionKind::b: ++b; break;
    case DecisionKind::c: ++c; break;
    case DecisionKind::d: ++d; break;
    case DecisionKind::e: ++e; break;
    case DecisionKind::f: ++f; break;
  }
}

namespace {
void check_k(int k, int class_count) {
  if (k < 1 || k > class_count) throw std::out_of_range("k=" + std::to_string(k) + " outside [1, class_count]");
}
}  // namespace

DecisionCounts count_decisions(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier,
                               int k) {
  check_k(k, verifier.class_count());
  std::vector<DecisionKind> kinds(sets.total());
  const std::size_t n_crc = sets.set_crc.size(), n_mis = sets.set_mis.size();
  parallel_for(kinds.size(), [&](std::size_t i) {
    if (i < n_crc)
      kinds[i] = decision_of(SetKind::crc, adv_aware(sets.set_crc[i].pixels, net, verifier, k));
    else if (i < n_crc + n_mis)
      kinds[i] = decision_of(SetKind::mis, adv_aware(sets.set_mis[i - n_crc].pixels, net, verifier, k));
    else
      kinds[i] = decision_of(SetKind::adv,
                             adv_aware(sets.set_adv[i - n_crc - n_mis].example.perturbed, net, verifier, k));
  });
  DecisionCounts n;
  for (auto kind : kinds) n.add(kind);
  return n;
}

DecisionCounts count_decisions(const SetScores& scores, int k) {
  check_k(k, scores.class_count);
  DecisionCounts n;
  for (int s : scores.crc) n.add(s > k ? DecisionKind::d : DecisionKind::a);
  for (int s : scores.mis) n.add(s > k ? DecisionKind::b : DecisionKind::e);
  for (int s : scores.adv) n.add(s > k ? DecisionKind::c : DecisionKind::f);
  return n;
}

double objective(const DecisionCounts& n, const CostProfile& c) {
  const auto v = [](std::uint64_t x) { return static_cast<double>(x); };
  return c.cd * v(n.d) + c.ce * v(n.e) + c.cf * v(n.f) - c.ca * v(n.a) - c.cb * v(n.b) - c.cc * v(n.c);
}

namespace {
template <typename CountAt>
OptimalK search(const CostProfile& profile, std::span<const int> k_range, CountAt count_at) {
  if (k_range.empty()) throw std::invalid_argument("k_range is empty");
  profile.validate();
  OptimalK out;
  out.table.reserve(k_range.size());
  bool have_best = false;
  double best_f = 0;
  for (int k : k_range) {
    SweepRow row{k, count_at(k), 0};
    row.f = objective(row.counts, profile);
    if (!have_best || row.f < best_f || (row.f == best_f && k < out.k)) {
      have_best = true;
      best_f = row.f;
      out.k = k;
    }
    out.table.push_back(row);
  }
  return out;
}
}  // namespace

OptimalK optimal_k(const SetScores& scores, const CostProfile& profile, std::span<const int> k_range) {
  return search(profile, k_range, [&](int k) { return count_decisions(scores, k); });
}

OptimalK optimal_k(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier,
                   const CostProfile& profile, std::span<const int> k_range) {
  return search(profile, k_range, [&](int k) { return count_decisions(sets, net, verifier, k); });
}

std::vector<int> full_k_range(int class_count) {
  std::vector<int> ks(static_cast<std::size_t>(class_count));
  std::iota(ks.begin(), ks.end(), 1);
  return ks;
}

const std::vector<CostProfile>& builtin_profiles() {
  static const std::vector<CostProfile> profiles{
      {"autonomous_driving", 0.3, 0.1, 0.5, 0.1, 0.3, 0.8},
      {"healthcare", 0.7, 0.4, 0.1, 0.4, 0.1, 0.3},
      {"face_recognition", 0.7, 0.4, 0.2, 0.4, 0.2, 0.2},
      {"inappropriate_content", 0.7, 0.1, 0.2, 0.3, 0.1, 0.1},
  };
  return profiles;
}

const CostProfile& builtin_profile(const std::string& name) {
  for (const auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown cost profile '" + name + "'");
}

}  // namespace advaware
