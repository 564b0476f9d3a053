#include "advaware/attacks.hpp"

namespace advaware {

std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::fgsm: return "fgsm";
    case AttackMethod::pgd: return "pgd";
    case AttackMethod::deepfool: return "deepfool";
    case AttackMethod::cw: return "cw";
  }
  return "unknown";
}

AttackMethod parse_attack_method(std::string_view name) {
  if (name == "fgsm") return AttackMethod::fgsm;
  if (name == "pgd") return AttackMethod::pgd;
  if (name == "deepfool") return AttackMethod::deepfool;
  if (name == "cw" || name == "cw_l2") return AttackMethod::cw;
  throw std::invalid_argument("unknown attack method '" + std::string(name) + "'");
}

AttackConfig AttackConfig::defaults(AttackMethod m) {
  AttackConfig cfg;
  cfg.method = m;
  switch (m) {
    case AttackMethod::fgsm:
      cfg.epsilon = 0.007;
      cfg.steps = 1;
      break;
    case AttackMethod::pgd:
      cfg.epsilon = 0.03;
      cfg.alpha = 0.004;
      cfg.steps = 40;
      break;
    case AttackMethod::deepfool:
      cfg.steps = 50;
      cfg.overshoot = 0.02;
      break;
    case AttackMethod::cw:
      cfg.c = 1.0;
      cfg.kappa = 0.0;
      cfg.steps = 50;
      cfg.lr = 0.01;
      break;
  }
  return cfg;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0)) throw std::invalid_argument("epsilon must be >= 0");
  if (!(alpha >= 0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(lr >= 0)) throw std::invalid_argument("lr must be >= 0");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(overshoot >= 0)) throw std::invalid_argument("overshoot must be >= 0");
  if (!(c >= 0)) throw std::invalid_argument("c must be >= 0");
  if (!(kappa >= 0)) throw std::invalid_argument("kappa must be >= 0");
}

}  // namespace advaware
