#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "advaware/adaptive.hpp"
#include "advaware/metrics.hpp"
#include "test_util.hpp"

using namespace advaware;
using advaware::testing::read_text;
using advaware::testing::smooth_stencil;
using advaware::testing::TempDir;

namespace {

using LD = long double;
using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void verdict(int id, const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " C" << id << " " << name << ": " << detail << std::endl;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

std::vector<int> random_dims(std::mt19937_64& rng, int in_lo, int in_hi) {
  std::uniform_int_distribution<int> in(in_lo, in_hi), width(2, 12), depth(0, 2), classes(2, 6);
  std::vector<int> dims{in(rng)};
  for (int i = depth(rng); i > 0; --i) dims.push_back(width(rng));
  dims.push_back(classes(rng));
  return dims;
}

VectorXd random_unit(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 1);
  VectorXd x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

void gradient_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const LD h = 1e-3L;
  double worst = 0;
  int triples = 0;
  for (std::uint64_t seed = 1; triples < 120; ++seed) {
    const auto net = NeuralNet<double>::make(random_dims(rng, 2, 10), seed).cast<LD>();
    Vector<LD> x;
    do {
      x = random_unit(rng, net.input_dim()).cast<LD>();
    } while (!smooth_stencil(net, x, h));
    const auto label = static_cast<ClassIndex>(uniform_below(rng, static_cast<std::uint64_t>(net.class_count())));
    const Vector<LD> analytic = net.input_gradient(x, label);
    Vector<LD> numeric(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector<LD> up = x, down = x;
      up[i] += h;
      down[i] -= h;
      numeric[i] = (net.loss(up, label) - net.loss(down, label)) / (2 * h);
    }
    const LD scale = std::max(analytic.norm(), numeric.norm());
    if (scale < 1e-12L) continue;
    worst = std::max(worst, static_cast<double>((analytic - numeric).norm() / scale));
    ++triples;
  }
  const double t = seconds_since(t0);
  verdict(1, "gradient fidelity", worst <= 1e-4 && t < 10,
          "triples=" + std::to_string(triples) + " max_rel_err=" + fmt(worst) + " time=" + fmt(t) + "s");
}

void attack_budget() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> eps_d(0, 0.3), alpha_d(0.001, 0.1);
  std::uniform_int_distribution<int> steps_d(1, 10);
  double worst_excess = -1;
  bool in_range = true, identity = true;
  for (int run = 0; run < 1000; ++run) {
    const auto net = NeuralNet<double>::make(random_dims(rng, 2, 30), 5000 + static_cast<std::uint64_t>(run));
    const VectorXd x = random_unit(rng, net.input_dim());
    const auto label = static_cast<ClassIndex>(uniform_below(rng, static_cast<std::uint64_t>(net.class_count())));
    const double eps = eps_d(rng);
    const auto ex = run % 2 == 0 ? fgsm(net, x, label, eps) : pgd(net, x, label, eps, alpha_d(rng), steps_d(rng));
    worst_excess = std::max(worst_excess, (ex.perturbed - x).lpNorm<Eigen::Infinity>() - eps);
    in_range = in_range && ex.perturbed.minCoeff() >= 0 && ex.perturbed.maxCoeff() <= 1;
    if (run % 10 == 0) {
      const auto same = [&](const VectorXd& v) {
        return v.size() == x.size() && std::memcmp(v.data(), x.data(), sizeof(double) * x.size()) == 0;
      };
      identity = identity && same(fgsm(net, x, label, 0.0).perturbed) &&
                 same(pgd(net, x, label, 0.0, 0.05, 5).perturbed) && same(pgd(net, x, label, 0.1, 0.05, 0).perturbed);
    }
  }
  const double t = seconds_since(t0);
  verdict(2, "attack budget", worst_excess <= 1e-9 && in_range && identity && t < 30,
          "runs=1000 max(linf-eps)=" + fmt(worst_excess) + " pixels_in_unit=" + (in_range ? "yes" : "no") +
              " zero_budget_identical=" + (identity ? "yes" : "no") + " time=" + fmt(t) + "s");
}

void deepfool_linear() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0.25, 0.75), dist(0.01, 0.1);
  std::uniform_int_distribution<int> dim(2, 50);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = dim(rng);
    VectorXd w(n), x(n);
    for (auto& v : w) v = g(rng);
    for (auto& v : x) v = u(rng);
    // place x at a random signed distance from the boundary w.x + b = 0
    const double signed_dist = (t % 2 == 0 ? 1 : -1) * dist(rng);
    const double b = signed_dist * w.norm() - w.dot(x);
    MatrixXd wm = MatrixXd::Zero(2, n);
    wm.row(1) = w.transpose();
    const auto net = advaware::testing::linear_net(wm, (VectorXd(2) << 0, b).finished());
    const double f = w.dot(x) + b;
    const ClassIndex label = f > 0 ? 1 : 0;
    const VectorXd closed = -f * w / w.squaredNorm();
    const auto trace = deepfool_trace(net, x, label, 50, 0.02);
    worst = std::max(worst, (trace.raw_perturbation - closed).norm() / closed.norm());
  }
  const double t = seconds_since(t0);
  verdict(3, "deepfool linear oracle", worst <= 0.02 && t < 5,
          "classifiers=50 max_rel_l2=" + fmt(worst) + " time=" + fmt(t) + "s");
}

struct MnistExperiment {
  Dataset train, test;
  NeuralNet<double> net;
  RandomForest forest;
  double eps = 0;
  CategorizedSets fgsm_sets;
};

std::optional<MnistExperiment> immunity() {
  const auto t0 = Clock::now();
  const std::filesystem::path dir = ADVAWARE_MNIST_DIR;
  MnistExperiment e;
  try {
    e.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", Split::train);
    e.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", Split::test, 10);
  } catch (const std::exception& ex) {
    verdict(4, "immunity", false, std::string("cannot load MNIST: ") + ex.what());
    return std::nullopt;
  }
  e.net = NeuralNet<double>::make(std::vector<int>{784, 256, 128, 10}, 41);
  TrainConfig hp;
  hp.epochs = 10;
  hp.learning_rate = 0.05;
  hp.batch_size = 32;
  hp.seed = 42;
  advaware::train(e.net, e.train, hp);
  ForestConfig fc;
  fc.seed = 43;
  e.forest = fit_forest(e.train, fc);
  const double net_clean = 100 * accuracy(e.net, e.test);
  const double forest_clean = 100 * accuracy(e.forest, e.test);

  // smallest grid budget reaching 60% FGSM success on the net
  auto cfg = AttackConfig::defaults(AttackMethod::fgsm);
  double success = 0;
  for (int i = 1; i <= 30; ++i) {
    cfg.epsilon = 0.01 * i;
    e.fgsm_sets = categorize(e.test, e.net, cfg);
    success = attack_success_ratio(e.fgsm_sets);
    if (success >= 60) break;
  }
  e.eps = cfg.epsilon;

  // every test image is attacked with its true label
  std::vector<VectorXd> attacked(e.test.size());
  parallel_for(e.test.size(), [&](std::size_t i) {
    const auto& x = e.test.images[i];
    attacked[i] = fgsm(e.net, x.pixels, x.label, e.eps).perturbed;
  });
  std::size_t net_hits = 0, forest_hits = 0;
  for (std::size_t i = 0; i < attacked.size(); ++i) {
    net_hits += e.net.predict(attacked[i]) == e.test.images[i].label;
    forest_hits += e.forest.predict(attacked[i]) == e.test.images[i].label;
  }
  const double n = static_cast<double>(e.test.size());
  const double net_adv = 100 * static_cast<double>(net_hits) / n;
  const double forest_adv = 100 * static_cast<double>(forest_hits) / n;
  const double forest_delta = std::abs(forest_clean - forest_adv);
  const double net_drop = net_clean - net_adv;
  const double t = seconds_since(t0);
  verdict(4, "immunity", success >= 60 && forest_delta <= 5 && net_drop >= 25 && t < 600,
          "train=" + std::to_string(e.train.size()) + " test=" + std::to_string(e.test.size()) + " eps=" + fmt(e.eps) +
              " fgsm_success=" + fmt(success) + "% net " + fmt(net_clean) + "->" + fmt(net_adv) + " (drop " +
              fmt(net_drop) + ") forest " + fmt(forest_clean) + "->" + fmt(forest_adv) + " (delta " +
              fmt(forest_delta) + ") time=" + fmt(t) + "s");
  return e;
}

void detector_quality(const MnistExperiment& e) {
  const auto scores = score_sets(e.fgsm_sets, e.net, e.forest);
  const double top1 = detector_auc(scores, 1);
  const double rank = roc_auc(clean_vs_adversarial(scores));
  verdict(5, "detector quality", top1 >= 0.85,
          "fgsm top1_auc=" + fmt(top1) + " rank_auc=" + fmt(rank) + " crc=" + std::to_string(scores.crc.size()) +
              " adv=" + std::to_string(scores.adv.size()) + " floor=0.85 target=0.90" +
              (top1 >= 0.90 ? " target_met" : " target_missed"));
}

void partition_identities(const MnistExperiment* e) {
  Dataset test;
  NeuralNet<double> net;
  if (e) {
    test = e->test;
    net = e->net;
  } else {
    test = advaware::testing::blobs(100, 4, 20, 7, 0.2);
    net = NeuralNet<double>::make(std::vector<int>{20, 16, 4}, 8);
  }
  bool ok = true;
  std::optional<std::size_t> mis;
  std::string sizes;
  for (auto m : {AttackMethod::fgsm, AttackMethod::pgd, AttackMethod::deepfool, AttackMethod::cw}) {
    auto cfg = AttackConfig::defaults(m);
    if (m == AttackMethod::fgsm) cfg.epsilon = e ? e->eps : 0.1;
    const auto sets = categorize(test, net, cfg);
    std::vector<int> seen(test.size(), 0);
    for (const auto& s : sets.set_crc) seen.at(s.index)++;
    for (const auto& s : sets.set_mis) seen.at(s.index)++;
    for (const auto& s : sets.set_adv) seen.at(s.index)++;
    ok = ok && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
    if (!mis) mis = sets.set_mis.size();
    ok = ok && sets.set_mis.size() == *mis;
    sizes += " " + std::string(to_string(m)) + "=" + std::to_string(sets.set_crc.size()) + "/" +
             std::to_string(sets.set_mis.size()) + "/" + std::to_string(sets.set_adv.size());
  }
  verdict(6, "partition identities", ok, "crc/mis/adv" + sizes);
}

void counting_identities() {
  int combos = 0;
  bool ok = true;
  for (int t = 0; t < 24; ++t) {
    const int classes = 2 + t % 7;
    const auto train = advaware::testing::blobs(20, classes, 8, 900 + static_cast<std::uint64_t>(t), 0.2);
    const auto test = advaware::testing::blobs(8, classes, 8, 900 + static_cast<std::uint64_t>(t), 0.25);
    auto net = NeuralNet<double>::make(std::vector<int>{8, 10, classes}, static_cast<std::uint64_t>(t));
    TrainConfig hp;
    hp.epochs = 5;
    hp.learning_rate = 0.2;
    hp.seed = static_cast<std::uint64_t>(t);
    advaware::train(net, train, hp);
    std::unique_ptr<Verifier> verifier;
    if (t % 2 == 0) {
      ForestConfig fc;
      fc.tree_count = 5;
      fc.seed = static_cast<std::uint64_t>(t);
      verifier = std::make_unique<RandomForest>(fit_forest(train, fc));
    } else {
      verifier = std::make_unique<KnnVerifier>(train, 1 + t % 5);
    }
    auto cfg = AttackConfig::defaults(t % 3 == 0 ? AttackMethod::pgd : AttackMethod::fgsm);
    cfg.epsilon = 0.05 + 0.02 * (t % 5);
    const auto sets = categorize(test, net, cfg);
    DecisionCounts prev;
    for (int k = 1; k <= classes; ++k) {
      const auto n = count_decisions(sets, net, *verifier, k);
      ok = ok && n.a + n.d == sets.set_crc.size() && n.b + n.e == sets.set_mis.size() &&
           n.c + n.f == sets.set_adv.size();
      if (k > 1)
        ok = ok && n.a >= prev.a && n.e >= prev.e && n.f >= prev.f && n.d <= prev.d && n.b <= prev.b &&
             n.c <= prev.c;
      prev = n;
    }
    ok = ok && prev.b == 0 && prev.c == 0 && prev.d == 0;
    ++combos;
  }
  verdict(7, "counting identities", ok && combos >= 20, "combinations=" + std::to_string(combos));
}

void objective_oracle() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> w(0, 1), scale(1e-3, 1e3);
  std::uniform_int_distribution<int> count(0, 1000), size(0, 40);
  double worst = 0;
  bool argmin_ok = true, scale_ok = true;
  for (int t = 0; t < 200; ++t) {
    const CostProfile p{"r", w(rng), w(rng), w(rng), w(rng), w(rng), w(rng)};
    DecisionCounts n;
    for (auto* c : {&n.a, &n.b, &n.c, &n.d, &n.e, &n.f}) *c = static_cast<std::uint64_t>(count(rng));
    const LD expect = static_cast<LD>(p.cd) * n.d + static_cast<LD>(p.ce) * n.e + static_cast<LD>(p.cf) * n.f -
                      static_cast<LD>(p.ca) * n.a - static_cast<LD>(p.cb) * n.b - static_cast<LD>(p.cc) * n.c;
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<LD>(objective(n, p)) - expect)));

    const int classes = 2 + t % 10;
    SetScores s;
    s.class_count = classes;
    std::uniform_int_distribution<int> score(1, classes);
    for (auto* v : {&s.crc, &s.mis, &s.adv}) {
      v->resize(static_cast<std::size_t>(size(rng)));
      for (auto& x : *v) x = score(rng);
    }
    const auto ks = full_k_range(classes);
    int brute = -1;
    LD brute_f = 0;
    for (int k : ks) {
      std::array<std::uint64_t, 6> c{};
      for (int r : s.crc) c[r > k ? 3 : 0]++;
      for (int r : s.mis) c[r > k ? 1 : 4]++;
      for (int r : s.adv) c[r > k ? 2 : 5]++;
      const LD f = static_cast<LD>(p.cd) * c[3] + static_cast<LD>(p.ce) * c[4] + static_cast<LD>(p.cf) * c[5] -
                   static_cast<LD>(p.ca) * c[0] - static_cast<LD>(p.cb) * c[1] - static_cast<LD>(p.cc) * c[2];
      if (brute < 0 || f < brute_f) {
        brute = k;
        brute_f = f;
      }
    }
    const int best = optimal_k(s, p, ks).k;
    argmin_ok = argmin_ok && best == brute;
    for (int r = 0; r < 3; ++r) scale_ok = scale_ok && optimal_k(s, p.scaled(scale(rng)), ks).k == best;
  }
  verdict(8, "objective/optimizer oracle", worst <= 1e-12 && argmin_ok && scale_ok,
          "instances=200 max_abs_err=" + fmt(worst) + " argmin_matches=" + (argmin_ok ? "yes" : "no") +
              " scale_invariant=" + (scale_ok ? "yes" : "no"));
}

void auc_oracle() {
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<int> levels(1, 8), total(2, 500);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = total(rng);
    std::uniform_int_distribution<int> split(1, n - 1), score(1, levels(rng));
    const int pos = split(rng);
    ScoredPopulation p;
    for (int i = 0; i < n; ++i) (i < pos ? p.positives : p.negatives).push_back(score(rng));
    double wins = 0;
    for (double a : p.positives)
      for (double b : p.negatives) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    const double oracle = wins / (static_cast<double>(p.positives.size()) * static_cast<double>(p.negatives.size()));
    worst = std::max({worst, std::abs(roc_auc_sweep(p) - oracle), std::abs(roc_auc(p) - oracle)});
  }
  verdict(9, "AUC oracle equivalence", worst <= 1e-9, "populations=100 max_abs_diff=" + fmt(worst));
}

std::map<std::string, std::string> bundle(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  if (!std::filesystem::exists(root)) return files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).generic_string()] = read_text(e.path());
  return files;
}

void determinism(const char* cli) {
  if (!cli) {
    verdict(10, "determinism", false, "no CLI path given");
    return;
  }
  TempDir tmp("determinism");
  const std::filesystem::path config = std::filesystem::path(ADVAWARE_CONFIG_DIR) / "determinism.yaml";
  const auto run = [&](const std::string& out, int jobs) {
    const std::string cmd = std::string("\"") + cli + "\" run -c \"" + config.string() + "\" -o \"" +
                            (tmp / out).string() + "\" -j " + std::to_string(jobs) + " 2>/dev/null";
    return std::system(cmd.c_str());
  };
  const int rc_a = run("a", 1), rc_b = run("b", 2);
  const auto a = bundle(tmp / "a"), b = bundle(tmp / "b");
  std::size_t reports = 0;
  for (const auto& [name, _] : a) reports += name.rfind("reports/", 0) == 0;
  verdict(10, "determinism", rc_a == 0 && rc_b == 0 && reports >= 5 && a == b,
          "exit=" + std::to_string(rc_a) + "/" + std::to_string(rc_b) + " files=" + std::to_string(a.size()) +
              " report_files=" + std::to_string(reports) + " identical=" + (a == b ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = Clock::now();
  gradient_fidelity();
  attack_budget();
  deepfool_linear();
  const auto experiment = immunity();
  if (experiment)
    detector_quality(*experiment);
  else
    verdict(5, "detector quality", false, "criterion-4 experiment unavailable");
  partition_identities(experiment ? &*experiment : nullptr);
  counting_identities();
  objective_oracle();
  auc_oracle();
  determinism(argc > 1 ? argv[1] : nullptr);
  const double t = seconds_since(t0);
  std::cout << "total time=" << fmt(t) << "s (limit 900s), failed=" << failures << std::endl;
  return failures == 0 && t <= 900 ? 0 : 1;
}
