#include "advaware/pipeline.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "advaware/serialize.hpp"

namespace advaware {

std::string_view to_string(SetKind s) {
  switch (s) {
    case SetKind::crc: return "crc";
    case SetKind::mis: return "mis";
    case SetKind::adv: return "adv";
  }
  return "?";
}

std::string_view to_string(DecisionKind d) {
  switch (d) {
    case DecisionKind::a: return "a";
    case DecisionKind::b: return "b";
    case DecisionKind::c: return "c";
    case DecisionKind::d: return "d";
    case DecisionKind::e: return "e";
    case DecisionKind::f: return "f";
  }
  return "?";
}

std::vector<AttackAttempt> attack_all(const Dataset& test, const NeuralNet<double>& net, const AttackConfig& attack) {
  attack.validate();
  std::vector<AttackAttempt> attempts(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const Image& x = test.images[i];
    AttackAttempt& a = attempts[i];
    a.index = i;
    a.label = x.label;
    a.prediction = net.predict(x.pixels);
    if (a.prediction == x.label) a.example = run_attack(net, x.pixels, x.label, attack);
  });
  return attempts;
}

CategorizedSets partition(const Dataset& test, const std::vector<AttackAttempt>& attempts, const AttackConfig& attack) {
  if (attempts.size() != test.size()) throw std::invalid_argument("attempt count != test set size");
  CategorizedSets sets;
  sets.attack = attack;
  sets.class_count = test.class_count;
  for (const auto& a : attempts) {
    const Image& x = test.images.at(a.index);
    if (a.prediction != a.label)
      sets.set_mis.push_back({a.index, a.label, a.prediction, x.pixels});
    else if (!a.example || !a.example->succeeded)
      sets.set_crc.push_back({a.index, a.label, a.prediction, x.pixels});
    else
      sets.set_adv.push_back({a.index, a.label, *a.example});
  }
  return sets;
}

CategorizedSets categorize(const Dataset& test, const NeuralNet<double>& net, const AttackConfig& attack) {
  return partition(test, attack_all(test, net, attack), attack);
}

Verdict adv_aware(const VectorXd& x, const NeuralNet<double>& net, const Verifier& verifier, int k) {
  if (k < 1 || k > verifier.class_count()) throw std::out_of_range("k=" + std::to_string(k) + " out of range");
  const ClassIndex y = net.predict(x);
  const auto top = verifier.top_k(x, k);
  if (std::find(top.begin(), top.end(), y) != top.end()) return {false, y};
  return {true, std::nullopt};
}

DecisionKind decision_of(SetKind origin, const Verdict& v) {
  switch (origin) {
    case SetKind::crc: return v.forged ? DecisionKind::d : DecisionKind::a;
    case SetKind::mis: return v.forged ? DecisionKind::b : DecisionKind::e;
    case SetKind::adv: return v.forged ? DecisionKind::c : DecisionKind::f;
  }
  throw std::invalid_argument("unknown set");
}

int detection_score(const VectorXd& x, const NeuralNet<double>& net, const Verifier& verifier) {
  return verifier.rank_of(x, net.predict(x));
}

SetScores score_sets(const CategorizedSets& sets, const NeuralNet<double>& net, const Verifier& verifier) {
  SetScores s;
  s.class_count = verifier.class_count();
  s.crc.resize(sets.set_crc.size());
  s.mis.resize(sets.set_mis.size());
  s.adv.resize(sets.set_adv.size());
  const std::size_t n_crc = s.crc.size(), n_mis = s.mis.size();
  parallel_for(sets.total(), [&](std::size_t i) {
    if (i < n_crc)
      s.crc[i] = detection_score(sets.set_crc[i].pixels, net, verifier);
    else if (i < n_crc + n_mis)
      s.mis[i - n_crc] = detection_score(sets.set_mis[i - n_crc].pixels, net, verifier);
    else
      s.adv[i - n_crc - n_mis] = detection_score(sets.set_adv[i - n_crc - n_mis].example.perturbed, net, verifier);
  });
  return s;
}

namespace {

void write_pixels(std::ofstream& out, const VectorXd& v) {
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    auto bits = std::bit_cast<std::uint64_t>(v[p]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

VectorXd read_pixels(const std::vector<char>& bytes, std::size_t offset, Eigen::Index dim) {
  if ((offset + static_cast<std::size_t>(dim)) * sizeof(double) > bytes.size())
    throw std::runtime_error("perturbation sidecar is truncated");
  VectorXd v(dim);
  for (Eigen::Index p = 0; p < dim; ++p) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + (offset + static_cast<std::size_t>(p)) * sizeof bits, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v[p] = std::bit_cast<double>(bits);
  }
  return v;
}

std::vector<char> read_sidecar(const std::filesystem::path& path) {
  std::ifstream blob(path, std::ios::binary);
  if (!blob) throw std::runtime_error("missing perturbation sidecar " + path.string());
  return {std::istreambuf_iterator<char>(blob), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_sets(const CategorizedSets& sets, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto blob_name = stem + ".bin";
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : sets.set_crc)
    samples.push_back({{"index", s.index}, {"label", s.label}, {"set", "crc"}, {"prediction", s.prediction}});
  for (const auto& s : sets.set_mis)
    samples.push_back({{"index", s.index}, {"label", s.label}, {"set", "mis"}, {"prediction", s.prediction}});

  std::ofstream blob(dir / blob_name, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + (dir / blob_name).string());
  std::size_t offset = 0;
  for (const auto& s : sets.set_adv) {
    samples.push_back({{"index", s.index},
                       {"label", s.label},
                       {"set", "adv"},
                       {"prediction", s.label},
                       {"offset", offset},
                       {"iterations", s.example.iterations_used}});
    write_pixels(blob, s.example.perturbed);
    offset += static_cast<std::size_t>(s.example.perturbed.size());
  }
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a["index"].template get<std::size_t>() < b["index"].template get<std::size_t>(); });

  nlohmann::json doc = {{"format", "advaware.categorized_sets"},
                        {"version", 1},
                        {"attack", sets.attack},
                        {"class_count", sets.class_count},
                        {"test_size", sets.total()},
                        {"counts", {{"crc", sets.set_crc.size()}, {"mis", sets.set_mis.size()}, {"adv", sets.set_adv.size()}}},
                        {"blob", blob_name},
                        {"samples", samples}};
  write_json_file(doc, dir / (stem + ".json"));
}

CategorizedSets load_sets(const std::filesystem::path& manifest, const Dataset& test) {
  const auto doc = read_json_file(manifest);
  if (doc.value("format", "") != "advaware.categorized_sets" || doc.value("version", 0) != 1)
    throw std::runtime_error(manifest.string() + ": not a version-1 categorized-sets manifest");
  if (doc.at("test_size").get<std::size_t>() != test.size())
    throw std::runtime_error(manifest.string() + ": test set size does not match the dataset");

  const auto bytes = read_sidecar(manifest.parent_path() / doc.at("blob").get<std::string>());

  CategorizedSets sets;
  sets.attack = doc.at("attack").get<AttackConfig>();
  sets.class_count = doc.at("class_count").get<int>();
  const auto dim = static_cast<Eigen::Index>(test.feature_dim());
  for (const auto& s : doc.at("samples")) {
    const auto index = s.at("index").get<std::size_t>();
    if (index >= test.size()) throw std::runtime_error("sample index out of range in " + manifest.string());
    const Image& x = test.images[index];
    const auto label = s.at("label").get<ClassIndex>();
    if (label != x.label) throw std::runtime_error("label mismatch at test index " + std::to_string(index));
    const auto set = s.at("set").get<std::string>();
    if (set == "crc" || set == "mis") {
      CleanSample c{index, label, s.at("prediction").get<ClassIndex>(), x.pixels};
      (set == "crc" ? sets.set_crc : sets.set_mis).push_back(std::move(c));
      continue;
    }
    if (set != "adv") throw std::runtime_error("unknown set tag '" + set + "'");
    AdversarialSample a;
    a.index = index;
    a.label = label;
    a.example.original = x.pixels;
    a.example.perturbed = read_pixels(bytes, s.at("offset").get<std::size_t>(), dim);
    a.example.attack = sets.attack;
    a.example.label = label;
    a.example.succeeded = true;
    a.example.iterations_used = s.at("iterations").get<int>();
    sets.set_adv.push_back(std::move(a));
  }
  return sets;
}

void save_attempts(const std::vector<AttackAttempt>& attempts, const AttackConfig& attack, std::size_t test_size,
                   const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto blob_name = stem + ".bin";
  std::ofstream blob(dir / blob_name, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + (dir / blob_name).string());
  nlohmann::json records = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : attempts) {
    nlohmann::json r = {{"index", a.index}, {"label", a.label}, {"prediction", a.prediction}};
    if (a.example) {
      r["offset"] = offset;
      r["succeeded"] = a.example->succeeded;
      r["iterations"] = a.example->iterations_used;
      write_pixels(blob, a.example->perturbed);
      offset += static_cast<std::size_t>(a.example->perturbed.size());
    }
    records.push_back(std::move(r));
  }
  write_json_file({{"format", "advaware.attack_attempts"},
                   {"version", 1},
                   {"attack", attack},
                   {"test_size", test_size},
                   {"blob", blob_name},
                   {"attempts", records}},
                  dir / (stem + ".json"));
}

std::vector<AttackAttempt> load_attempts(const std::filesystem::path& manifest, const Dataset& test,
                                         AttackConfig* attack) {
  const auto doc = read_json_file(manifest);
  if (doc.value("format", "") != "advaware.attack_attempts" || doc.value("version", 0) != 1)
    throw std::runtime_error(manifest.string() + ": not a version-1 attack-attempts manifest");
  if (doc.at("test_size").get<std::size_t>() != test.size())
    throw std::runtime_error(manifest.string() + ": test set size does not match the dataset");
  const auto cfg = doc.at("attack").get<AttackConfig>();
  if (attack) *attack = cfg;
  const auto bytes = read_sidecar(manifest.parent_path() / doc.at("blob").get<std::string>());
  const auto dim = static_cast<Eigen::Index>(test.feature_dim());
  std::vector<AttackAttempt> out;
  for (const auto& r : doc.at("attempts")) {
    AttackAttempt a;
    a.index = r.at("index").get<std::size_t>();
    if (a.index >= test.size()) throw std::runtime_error("attempt index out of range");
    a.label = r.at("label").get<ClassIndex>();
    a.prediction = r.at("prediction").get<ClassIndex>();
    if (r.contains("offset")) {
      AdversarialExample<double> ex;
      ex.original = test.images[a.index].pixels;
      ex.perturbed = read_pixels(bytes, r.at("offset").get<std::size_t>(), dim);
      ex.attack = cfg;
      ex.label = a.label;
      ex.succeeded = r.at("succeeded").get<bool>();
      ex.iterations_used = r.at("iterations").get<int>();
      a.example = std::move(ex);
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace advaware
