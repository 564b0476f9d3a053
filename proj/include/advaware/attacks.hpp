#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "advaware/common.hpp"
#include "advaware/neuralnet.hpp"

namespace advaware {

enum class AttackMethod { fgsm, pgd, deepfool, cw };

std::string_view to_string(AttackMethod m);
AttackMethod parse_attack_method(std::string_view name);

/// Untargeted attack parameters. Defaults are the reference settings:
/// FGSM eps 0.007; PGD eps 0.03, alpha 0.004, 40 steps; DeepFool 50 steps,
/// overshoot 0.02; CW c 1, kappa 0, 50 steps, lr 0.01.
struct AttackConfig {
  AttackMethod method = AttackMethod::fgsm;
  double epsilon = 0.007;
  double alpha = 0.004;
  int steps = 0;
  double overshoot = 0.02;
  double c = 1.0;
  double kappa = 0.0;
  double lr = 0.01;

  static AttackConfig defaults(AttackMethod m);

  /// Throws std::invalid_argument on a negative parameter.
  void validate() const;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

template <typename Scalar = double>
struct AdversarialExample {
  Vector<Scalar> original;
  Vector<Scalar> perturbed;  // clamped to [0, 1]
  AttackConfig attack;
  ClassIndex label = 0;  // true label the attack moved away from
  bool succeeded = false;
  int iterations_used = 0;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> sign(const Vector<Scalar>& g) {
  return g.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

template <typename Scalar>
Vector<Scalar> clamp_unit(const Vector<Scalar>& v) {
  return v.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

template <typename Scalar>
AdversarialExample<Scalar> finish(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, Vector<Scalar> perturbed,
                                  const AttackConfig& cfg, ClassIndex label, int iterations) {
  AdversarialExample<Scalar> out;
  out.original = x;
  out.perturbed = std::move(perturbed);
  out.attack = cfg;
  out.label = label;
  out.succeeded = net.predict(out.perturbed) != label;
  out.iterations_used = iterations;
  return out;
}

template <typename Scalar>
void check_attack_input(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label) {
  if (x.size() != net.input_dim()) throw DimensionError("attack input length != input_dim");
  if (label < 0 || label >= net.class_count()) throw DimensionError("attack label out of range");
}

}  // namespace detail

/// x' = clamp(x + eps * sign(grad), 0, 1), with sign(0) = 0.
template <typename Scalar>
AdversarialExample<Scalar> fgsm(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label,
                                double epsilon) {
  detail::check_attack_input(net, x, label);
  AttackConfig cfg = AttackConfig::defaults(AttackMethod::fgsm);
  cfg.epsilon = epsilon;
  cfg.validate();
  if (epsilon == 0) return detail::finish(net, x, Vector<Scalar>(x), cfg, label, 0);
  const Vector<Scalar> step = static_cast<Scalar>(epsilon) * detail::sign(net.input_gradient(x, label));
  return detail::finish(net, x, detail::clamp_unit<Scalar>(x + step), cfg, label, 1);
}

/// Iterated sign-gradient steps from x (no random start). After each step
/// every pixel is clipped to [x - eps, x + eps] and then to [0, 1].
template <typename Scalar>
AdversarialExample<Scalar> pgd(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label,
                               double epsilon, double alpha, int steps) {
  detail::check_attack_input(net, x, label);
  AttackConfig cfg{AttackMethod::pgd, epsilon, alpha, steps};
  cfg.validate();
  const Scalar eps = static_cast<Scalar>(epsilon);
  const Vector<Scalar> lower = (x.array() - eps).matrix();
  const Vector<Scalar> upper = (x.array() + eps).matrix();
  Vector<Scalar> adv = x;
  for (int s = 0; s < steps; ++s) {
    adv += static_cast<Scalar>(alpha) * detail::sign(net.input_gradient(adv, label));
    adv = detail::clamp_unit<Scalar>(adv.cwiseMax(lower).cwiseMin(upper));
  }
  return detail::finish(net, x, std::move(adv), cfg, label, steps);
}

template <typename Scalar>
struct DeepfoolResult {
  AdversarialExample<Scalar> example;
  Vector<Scalar> raw_perturbation;  // accumulated step before overshoot and clamping
};

/// DeepFool with the accumulated perturbation exposed. Each iteration
/// linearizes every logit difference z_k - z_label at the current iterate,
/// takes the minimal L2 step onto the nearest linearized boundary, and
/// re-evaluates at clamp(x + (1 + overshoot) * total, 0, 1).
template <typename Scalar>
DeepfoolResult<Scalar> deepfool_trace(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label,
                                      int steps, double overshoot) {
  detail::check_attack_input(net, x, label);
  AttackConfig cfg = AttackConfig::defaults(AttackMethod::deepfool);
  cfg.steps = steps;
  cfg.overshoot = overshoot;
  cfg.validate();

  const Scalar scale = Scalar(1) + static_cast<Scalar>(overshoot);
  Vector<Scalar> total = Vector<Scalar>::Zero(x.size());
  Vector<Scalar> adv = x;
  int iterations = 0;
  while (iterations < steps) {
    const Vector<Scalar> z = net.logits(adv);
    if (argmax(z) != label) break;
    const Matrix<Scalar> jac = net.logit_jacobian(adv);
    Scalar best_dist = std::numeric_limits<Scalar>::infinity();
    Vector<Scalar> best_step;
    for (int k = 0; k < net.class_count(); ++k) {
      if (k == label) continue;
      const Vector<Scalar> w = (jac.row(k) - jac.row(label)).transpose();
      const Scalar norm_sq = w.squaredNorm();
      if (norm_sq == Scalar(0)) continue;
      const Scalar f = z[k] - z[label];
      const Scalar dist = std::abs(f) / std::sqrt(norm_sq);
      if (dist < best_dist) {
        best_dist = dist;
        best_step = (std::abs(f) / norm_sq) * w;
      }
    }
    if (best_step.size() == 0) break;  // flat in every direction
    total += best_step;
    adv = detail::clamp_unit<Scalar>(x + scale * total);
    ++iterations;
  }
  return {detail::finish(net, x, std::move(adv), cfg, label, iterations), std::move(total)};
}

template <typename Scalar>
AdversarialExample<Scalar> deepfool(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label,
                                    int steps, double overshoot) {
  return deepfool_trace(net, x, label, steps, overshoot).example;
}

/// CW objective |x' - x|^2 + c * max(z_label - max_{j != label} z_j + kappa, 0).
template <typename Scalar>
Scalar cw_objective(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, const Vector<Scalar>& candidate,
                    ClassIndex label, double c, double kappa) {
  const Vector<Scalar> z = net.logits(candidate);
  Scalar other = -std::numeric_limits<Scalar>::infinity();
  for (int j = 0; j < z.size(); ++j)
    if (j != label) other = std::max(other, z[j]);
  const Scalar hinge = std::max(z[label] - other + static_cast<Scalar>(kappa), Scalar(0));
  return (candidate - x).squaredNorm() + static_cast<Scalar>(c) * hinge;
}

/// Untargeted CW-L2 in tanh space, optimized with Adam. Returns the
/// successful iterate of smallest L2 distortion, or the final iterate when
/// none succeeded. An iterate succeeds when the prediction leaves `label`
/// with margin at least kappa.
template <typename Scalar>
AdversarialExample<Scalar> cw_l2(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label, double c,
                                 double kappa, int steps, double lr) {
  detail::check_attack_input(net, x, label);
  AttackConfig cfg{AttackMethod::cw, 0, 0, steps, 0, c, kappa, lr};
  cfg.validate();
  if (steps == 0) return detail::finish(net, x, Vector<Scalar>(x), cfg, label, 0);

  using std::atanh, std::tanh;
  const Scalar shrink = Scalar(0.999999);
  Vector<Scalar> w = ((Scalar(2) * x.array() - Scalar(1)) * shrink).unaryExpr([](Scalar v) { return atanh(v); }).matrix();
  Vector<Scalar> m = Vector<Scalar>::Zero(x.size()), v = m;
  const Scalar beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, rate = static_cast<Scalar>(lr);

  std::optional<Vector<Scalar>> best;
  Scalar best_l2 = std::numeric_limits<Scalar>::infinity();
  Vector<Scalar> current;
  int used = 0;
  for (int step = 0; step <= steps; ++step) {
    const Vector<Scalar> t = w.unaryExpr([](Scalar a) { return tanh(a); });
    current = (t.array() + Scalar(1)).matrix() / Scalar(2);
    const Vector<Scalar> z = net.logits(current);
    ClassIndex other = label == 0 ? 1 : 0;
    for (int j = 0; j < z.size(); ++j)
      if (j != label && z[j] > z[other]) other = j;
    const Scalar margin = z[label] - z[other];
    const Scalar l2 = (current - x).squaredNorm();
    if (argmax(z) != label && margin <= -static_cast<Scalar>(kappa) && l2 < best_l2) {
      best_l2 = l2;
      best = current;
    }
    if (step == steps) break;

    Vector<Scalar> grad = Scalar(2) * (current - x);
    if (margin + static_cast<Scalar>(kappa) > Scalar(0)) {
      Vector<Scalar> seed = Vector<Scalar>::Zero(z.size());
      seed[label] = static_cast<Scalar>(c);
      seed[other] = -static_cast<Scalar>(c);
      grad += net.backward_logits(current, seed);
    }
    grad = grad.cwiseProduct(((Scalar(1) - t.array().square()) / Scalar(2)).matrix());
    m = beta1 * m + (Scalar(1) - beta1) * grad;
    v = beta2 * v + (Scalar(1) - beta2) * grad.cwiseProduct(grad);
    const Scalar bias1 = Scalar(1) - std::pow(beta1, step + 1);
    const Scalar bias2 = Scalar(1) - std::pow(beta2, step + 1);
    w -= (rate * (m / bias1).array() / ((v / bias2).array().sqrt() + adam_eps)).matrix();
    used = step + 1;
  }
  return detail::finish(net, x, best ? *best : current, cfg, label, used);
}

/// Dispatches on cfg.method.
template <typename Scalar>
AdversarialExample<Scalar> run_attack(const NeuralNet<Scalar>& net, const Vector<Scalar>& x, ClassIndex label,
                                      const AttackConfig& cfg) {
  cfg.validate();
  AdversarialExample<Scalar> ex;
  switch (cfg.method) {
    case AttackMethod::fgsm: ex = fgsm(net, x, label, cfg.epsilon); break;
    case AttackMethod::pgd: ex = pgd(net, x, label, cfg.epsilon, cfg.alpha, cfg.steps); break;
    case AttackMethod::deepfool: ex = deepfool(net, x, label, cfg.steps, cfg.overshoot); break;
    case AttackMethod::cw: ex = cw_l2(net, x, label, cfg.c, cfg.kappa, cfg.steps, cfg.lr); break;
    default: throw std::invalid_argument("unknown attack method");
  }
  ex.attack = cfg;
  return ex;
}

/// Untargeted success: the perturbed image is no longer classified as true_label.
template <typename Scalar>
bool attack_success(const NeuralNet<Scalar>& net, const AdversarialExample<Scalar>& adv, ClassIndex true_label) {
  return net.predict(adv.perturbed) != true_label;
}

}  // namespace advaware
