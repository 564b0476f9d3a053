#include <gtest/gtest.h>

#include <random>

#include "advaware/neuralnet.hpp"
#include "advaware/serialize.hpp"
#include "test_util.hpp"

using namespace advaware;
using advaware::testing::blobs;
using advaware::testing::linear_net;
using advaware::testing::smooth_stencil;

namespace {

using LD = long double;

// Central differences of the loss in long double.
Vector<LD> fd_gradient(const NeuralNet<LD>& net, const Vector<LD>& x, ClassIndex label, LD h) {
  Vector<LD> g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector<LD> up = x, down = x;
    up[i] += h;
    down[i] -= h;
    g[i] = (net.loss(up, label) - net.loss(down, label)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Forward, ZeroNetIsUniform) {
  auto net = NeuralNet<double>::make(std::vector<int>{4, 3, 5}, 1);
  for (auto& l : net.layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  const VectorXd p = net.forward(VectorXd::Constant(4, 0.3));
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(p[i], 0.2);
  EXPECT_EQ(net.predict(VectorXd::Constant(4, 0.3)), 0);
}

TEST(Forward, IdentityLayerSoftmax) {
  const auto net = linear_net(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  const VectorXd p = net.forward((VectorXd(2) << 2, 0).finished());
  // e^2 / (e^2 + 1)
  EXPECT_NEAR(p[0], 0.8807970779778823, 1e-15);
  EXPECT_NEAR(p[1], 0.11920292202211755, 1e-15);
}

TEST(Forward, SumsToOne) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    const auto net = NeuralNet<double>::make(std::vector<int>{6, 8, 8, 4}, static_cast<std::uint64_t>(t));
    VectorXd x(6);
    for (auto& v : x) v = u(rng);
    EXPECT_NEAR(net.forward(x).sum(), 1.0, 1e-9);
  }
}

TEST(Forward, StableForHugeLogits) {
  const auto net = linear_net(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  const VectorXd p = net.forward((VectorXd(2) << 1000, 0).finished());
  EXPECT_EQ(p[0], 1.0);
  EXPECT_LT(p[1], 1e-300);
  EXPECT_FALSE(std::isnan(p[1]));
}

TEST(Predict, ArgmaxAndTieBreak) {
  const VectorXd probs = (VectorXd(3) << 0.1, 0.7, 0.2).finished();
  const auto net = linear_net(MatrixXd::Identity(3, 3), VectorXd::Zero(3));
  EXPECT_EQ(net.predict(probs.array().log().matrix()), 1);
  EXPECT_EQ(argmax(VectorXd::Constant(4, 0.25)), 0);
  EXPECT_EQ(argmax((VectorXd(3) << 0.2, 0.5, 0.5).finished()), 1);
}

TEST(Forward, DimensionErrors) {
  const auto net = NeuralNet<double>::make(std::vector<int>{3, 2}, 0);
  EXPECT_THROW((void)net.forward(VectorXd::Zero(4)), DimensionError);
  EXPECT_THROW((void)net.input_gradient(VectorXd::Zero(3), 2), DimensionError);
  EXPECT_THROW((void)net.input_gradient(VectorXd::Zero(3), -1), DimensionError);
  EXPECT_THROW(NeuralNet<double>::make(std::vector<int>{3}, 0), DimensionError);
  EXPECT_THROW(NeuralNet<double>::make(std::vector<int>{3, 1}, 0), DimensionError);
  DenseLayer<double> a{MatrixXd::Zero(4, 3), VectorXd::Zero(4), Activation::relu};
  DenseLayer<double> b{MatrixXd::Zero(2, 5), VectorXd::Zero(2), Activation::identity};
  EXPECT_THROW(NeuralNet<double>({a, b}), DimensionError);
}

TEST(InputGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int t = 0; t < 30; ++t) {
    const auto net = NeuralNet<double>::make(std::vector<int>{5, 7, 6, 3}, 100 + static_cast<std::uint64_t>(t));
    const auto wide = net.cast<LD>();
    VectorXd x(5);
    do {
      for (auto& v : x) v = u(rng);
    } while (!smooth_stencil(wide, Vector<LD>(x.cast<LD>()), 1e-3L));
    const ClassIndex label = static_cast<ClassIndex>(t % 3);
    const Vector<LD> analytic = wide.input_gradient(x.cast<LD>(), label);
    const Vector<LD> numeric = fd_gradient(wide, x.cast<LD>(), label, 1e-3L);
    const LD scale = std::max(analytic.norm(), numeric.norm());
    if (scale < 1e-12L) continue;
    worst = std::max(worst, static_cast<double>((analytic - numeric).norm() / scale));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(InputGradient, LinearClosedForm) {
  MatrixXd w(3, 2);
  w << 1, -2, 0.5, 3, -1, 0.25;
  const VectorXd b = (VectorXd(3) << 0.1, -0.2, 0.3).finished();
  const auto net = linear_net(w, b);
  const VectorXd x = (VectorXd(2) << 0.4, 0.7).finished();
  const VectorXd z = w * x + b;
  const VectorXd p = z.array().exp() / z.array().exp().sum();
  VectorXd onehot = VectorXd::Zero(3);
  onehot[2] = 1;
  const VectorXd expected = w.transpose() * (p - onehot);
  EXPECT_LT((net.input_gradient(x, 2) - expected).norm(), 1e-14);
}

TEST(InputGradient, SaturatedLabelGivesZero) {
  const auto net = linear_net(MatrixXd::Identity(2, 2) * 1000.0, VectorXd::Zero(2));
  const VectorXd x = (VectorXd(2) << 1, 0).finished();
  ASSERT_EQ(net.forward(x)[0], 1.0);
  EXPECT_EQ(net.input_gradient(x, 0), VectorXd::Zero(2));
}

TEST(InputGradient, ImageOverloadAgrees) {
  const auto net = NeuralNet<double>::make(std::vector<int>{4, 5, 3}, 9);
  Image img{Shape{1, 2, 2}, VectorXd::Constant(4, 0.5), 1};
  EXPECT_EQ(input_gradient(net, img, 1), net.input_gradient(img.pixels, 1));
  EXPECT_EQ(predict(net, img), net.predict(img.pixels));
}

TEST(LogitJacobian, RowsMatchBackward) {
  const auto net = NeuralNet<double>::make(std::vector<int>{4, 6, 3}, 5);
  const VectorXd x = VectorXd::LinSpaced(4, 0.1, 0.9);
  const MatrixXd jac = net.logit_jacobian(x);
  const VectorXd seed = (VectorXd(3) << 0.5, -1, 2).finished();
  EXPECT_LT((jac.transpose() * seed - net.backward_logits(x, seed)).norm(), 1e-12);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto d = blobs(10, 2, 3, 1);
  auto net = NeuralNet<double>::make(std::vector<int>{3, 4, 2}, 2);
  const auto before = net;
  TrainConfig hp;
  hp.learning_rate = 0;
  hp.epochs = 3;
  hp.seed = 1;
  train(net, d, hp);
  EXPECT_TRUE(net == before);
}

TEST(Train, SeparableLossDecreases) {
  Dataset d;
  d.class_count = 2;
  for (int i = 0; i < 40; ++i) {
    const double t = i / 40.0;
    d.images.push_back({Shape{1, 1, 2}, (VectorXd(2) << t, 0.1).finished(), 0});
    d.images.push_back({Shape{1, 1, 2}, (VectorXd(2) << t, 0.9).finished(), 1});
  }
  auto net = NeuralNet<double>::make(std::vector<int>{2, 2}, 3);
  TrainConfig hp;
  hp.epochs = 50;
  hp.learning_rate = 0.5;
  hp.batch_size = 8;
  hp.seed = 4;
  const auto r = train(net, d, hp);
  ASSERT_EQ(r.epoch_loss.size(), 50u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_EQ(accuracy(net, d), 1.0);
}

TEST(Train, SeedDeterminism) {
  const auto d = blobs(15, 3, 4, 2);
  TrainConfig hp;
  hp.epochs = 4;
  hp.batch_size = 5;
  hp.seed = 8;
  auto a = NeuralNet<double>::make(std::vector<int>{4, 6, 3}, 1);
  auto b = a;
  const auto ra = train(a, d, hp);
  const auto rb = train(b, d, hp);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
}

TEST(Train, RejectsEmptyAndMismatched) {
  auto net = NeuralNet<double>::make(std::vector<int>{3, 2}, 0);
  Dataset empty;
  EXPECT_THROW(train(net, empty, TrainConfig{}), std::invalid_argument);
  EXPECT_THROW(train(net, blobs(2, 2, 4, 0), TrainConfig{}), DimensionError);
  EXPECT_THROW(train(net, blobs(2, 3, 3, 0), TrainConfig{}), DimensionError);
}

TEST(NetJson, RoundTripIsExact) {
  const auto net = NeuralNet<double>::make(std::vector<int>{5, 4, 3}, 21);
  const auto doc = net_to_json(net);
  EXPECT_EQ(doc["format"], "advaware.neuralnet");
  const auto back = net_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_TRUE(back == net);
}

TEST(NetJson, RejectsMalformed) {
  auto doc = net_to_json(NeuralNet<double>::make(std::vector<int>{2, 2}, 1));
  auto wrong_format = doc;
  wrong_format["format"] = "other";
  EXPECT_THROW(net_from_json(wrong_format), FormatError);
  auto short_weights = doc;
  short_weights["layers"][0]["weights"].erase(0);
  EXPECT_ANY_THROW(net_from_json(short_weights));
}
