#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advaware/attacks.hpp"
#include "advaware/data.hpp"
#include "advaware/neuralnet.hpp"
#include "advaware/secondary.hpp"

namespace advaware {

enum class SetKind { crc, mis, adv };

std::string_view to_string(SetKind s);

/// A test image that was not successfully attacked (SET_crc or SET_mis).
struct CleanSample {
  std::size_t index = 0;  // position in the test dataset
  ClassIndex label = 0;
  ClassIndex prediction = 0;
  VectorXd pixels;
};

/// A correctly classified test image whose attack succeeded (SET_adv).
struct AdversarialSample {
  std::size_t index = 0;
  ClassIndex label = 0;
  AdversarialExample<double> example;
};

/// Partition of a test set: correctly classified and attack failed (crc),
/// misclassified clean (mis), successfully attacked (adv). Members of each
/// list are in ascending test index order.
struct CategorizedSets {
  AttackConfig attack;
  int class_count = 2;
  std::vector<CleanSample> set_crc;
  std::vector<CleanSample> set_mis;
  std::vector<AdversarialSample> set_adv;

  [[nodiscard]] std::size_t total() const { return set_crc.size() + set_mis.size() + set_adv.size(); }
};

/// Outcome of attacking one test image. `example` is present only when the
/// net classified the clean image correctly (otherwise no attack is run).
struct AttackAttempt {
  std::size_t index = 0;
  ClassIndex label = 0;
  ClassIndex prediction = 0;
  std::optional<AdversarialExample<double>> example;
};

/// Attacks every correctly classified image; fans out over parallel_for.
std::vector<AttackAttempt> attack_all(const Dataset& test, const NeuralNet<double>& net, const AttackConfig& attack);

/// Splits recorded attempts into crc / mis / adv.
CategorizedSets partition(const Dataset& test, const std::vector<AttackAttempt>& attempts, const AttackConfig& attack);

/// partition(attack_all(...)).
CategorizedSets categorize(const Dataset& test, const NeuralNet<double>& net, const AttackConfig& attack);

struct Verdict {
  bool forged = false;
  std::optional<ClassIndex> label;  // present iff not forged

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// The mismatch detector: the net's top-1 label must appear in the
/// verifier's top-k list, otherwise the image is flagged as forged.
Verdict adv_aware(const VectorXd& x, const NeuralNet<double>& net, const Verifier& verifier, int k);

enum class DecisionKind { a, b, c, d, e, f };

std::string_view to_string(DecisionKind d);

/// crc: a (accepted) / d (flagged); mis: b (flagged) / e (accepted);
/// adv: c (flagged) / f (accepted).
DecisionKind decision_of(SetKind origin, const Verdict& v);

/// Rank of the net's prediction in the verifier's ordering. adv_aware with
/// parameter k flags the image iff the score exceeds k.
int detection_score(const VectorXd& x, const NeuralNet<double>& net, const Verifier& verifier);

/// Detection scores of every member, aligned with the set lists. SET_adv
/// members are scored on their perturbed pixels.
struct SetScores {
  int class_count = 2;
  std::vector<int> crc;
  std::vector<int> mis;
  std::vector<int> adv;
};

SetScores score_sets(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier);

// Persistence: a JSON manifest of membership plus a binary sidecar holding
// the perturbed pixels of SET_adv as little-endian float64, in set order.

/// Writes <stem>.json and <stem>.bin into dir.
void save_sets(const CategorizedSets& sets, const std::filesystem::path& dir, const std::string& stem);

/// Raw attempts: <stem>.json plus <stem>.bin holding every attempted
/// perturbation (successful or not).
void save_attempts(const std::vector<AttackAttempt>& attempts, const AttackConfig& attack, std::size_t test_size,
                   const std::filesystem::path& dir, const std::string& stem);
std::vector<AttackAttempt> load_attempts(const std::filesystem::path& manifest, const Dataset& test,
                                         AttackConfig* attack = nullptr);

/// Restores sets saved with save_sets. Clean pixels are taken from `test`,
/// which must be the dataset the sets were built from.
CategorizedSets load_sets(const std::filesystem::path& manifest, const Dataset& test);

}  // namespace advaware
