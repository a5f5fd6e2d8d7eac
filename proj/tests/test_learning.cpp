#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "cspr/mlp.hpp"

using namespace cspr;

namespace {

// Two gaussian blobs, linearly separable.
void blobs2(std::mt19937_64& rng, int n_per, MatX& X, std::vector<int>& y) {
  std::normal_distribution<double> g(0.0, 0.4);
  X.resize(2 * n_per, 2);
  y.clear();
  for (int i = 0; i < n_per; ++i) {
    X.row(i) << -2.0 + g(rng), -2.0 + g(rng);
    y.push_back(0);
  }
  for (int i = 0; i < n_per; ++i) {
    X.row(n_per + i) << 2.0 + g(rng), 2.0 + g(rng);
    y.push_back(1);
  }
}

void blobs3(std::mt19937_64& rng, int n_per, MatX& X, std::vector<int>& y) {
  std::normal_distribution<double> g(0.0, 0.5);
  const double cx[3] = {-3.0, 3.0, 0.0};
  const double cy[3] = {0.0, 0.0, 3.5};
  X.resize(3 * n_per, 2);
  y.clear();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < n_per; ++i) {
      X.row(c * n_per + i) << cx[c] + g(rng), cy[c] + g(rng);
      y.push_back(c);
    }
}

}  // namespace

TEST_CASE("softmax head is a probability vector") {
  MLP net(4, {8, 8}, 3, 42);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    VecX x(4);
    for (int i = 0; i < 4; ++i) x(i) = g(rng);
    const VecX p = net.predict_proba(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
    // argmax of the probabilities is the prediction
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (p(i) > p(best)) best = i;
    CHECK(net.predict(x) == best);
  }
}

TEST_CASE("linearly separable data trains to full accuracy") {
  std::mt19937_64 rng(11);
  MatX X, Xtest;
  std::vector<int> y, ytest;
  blobs2(rng, 150, X, y);
  blobs2(rng, 60, Xtest, ytest);

  MLPConfig cfg;
  cfg.hidden = {16, 16};
  cfg.max_epochs = 120;
  cfg.seed = 3;
  auto net = MLP::train(X, y, 2, cfg);
  REQUIRE(net.ok());
  CHECK(net->accuracy(Xtest, ytest) == 1.0);
}

TEST_CASE("three blobs are learned to high held-out accuracy") {
  std::mt19937_64 rng(12);
  MatX X, Xtest;
  std::vector<int> y, ytest;
  blobs3(rng, 200, X, y);
  blobs3(rng, 80, Xtest, ytest);

  MLPConfig cfg;
  cfg.hidden = {20, 20};
  cfg.max_epochs = 150;
  cfg.seed = 4;
  TrainReport rep;
  auto net = MLP::train(X, y, 3, cfg, &rep);
  REQUIRE(net.ok());
  CHECK(net->accuracy(Xtest, ytest) > 0.97);
  CHECK(rep.epochs > 0);
  CHECK(rep.val_accuracy > 0.9);
}

TEST_CASE("label shuffling drops accuracy to chance") {
  std::mt19937_64 rng(13);
  MatX X, Xtest;
  std::vector<int> y, ytest;
  blobs3(rng, 200, X, y);
  blobs3(rng, 150, Xtest, ytest);
  std::shuffle(y.begin(), y.end(), rng);  // destroy the feature-label link

  MLPConfig cfg;
  cfg.hidden = {20, 20};
  cfg.max_epochs = 60;
  cfg.seed = 5;
  auto net = MLP::train(X, y, 3, cfg);
  REQUIRE(net.ok());
  const double acc = net->accuracy(Xtest, ytest);
  CHECK(acc > 1.0 / 3.0 - 0.1);
  CHECK(acc < 1.0 / 3.0 + 0.1);
}

TEST_CASE("training is bit-deterministic in the seed") {
  std::mt19937_64 rng(14);
  MatX X;
  std::vector<int> y;
  blobs2(rng, 80, X, y);

  MLPConfig cfg;
  cfg.hidden = {10};
  cfg.max_epochs = 30;
  cfg.seed = 77;
  auto a = MLP::train(X, y, 2, cfg);
  auto b = MLP::train(X, y, 2, cfg);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  for (size_t k = 0; k < a->weights().size(); ++k) {
    CHECK((a->weights()[k] - b->weights()[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a->biases()[k] - b->biases()[k]).cwiseAbs().maxCoeff() == 0.0);
  }

  cfg.seed = 78;
  auto c = MLP::train(X, y, 2, cfg);
  REQUIRE(c.ok());
  CHECK((a->weights()[0] - c->weights()[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training loss decreases without large regressions") {
  std::mt19937_64 rng(15);
  MatX X;
  std::vector<int> y;
  blobs3(rng, 150, X, y);

  MLPConfig cfg;
  cfg.hidden = {20, 20};
  cfg.max_epochs = 80;
  cfg.seed = 6;
  TrainReport rep;
  auto net = MLP::train(X, y, 3, cfg, &rep);
  REQUIRE(net.ok());
  REQUIRE(rep.train_loss.size() > 5);
  CHECK(rep.train_loss.back() < rep.train_loss.front());
  for (size_t e = 1; e < rep.train_loss.size(); ++e)
    CHECK(rep.train_loss[e] <= rep.train_loss[e - 1] * 1.05 + 1e-12);
}

TEST_CASE("model artifact round-trips exactly") {
  std::mt19937_64 rng(16);
  MatX X, Xtest;
  std::vector<int> y, ytest;
  blobs2(rng, 100, X, y);
  blobs2(rng, 50, Xtest, ytest);

  MLPConfig cfg;
  cfg.hidden = {12, 12};
  cfg.max_epochs = 40;
  cfg.seed = 8;
  auto net = MLP::train(X, y, 2, cfg);
  REQUIRE(net.ok());

  const std::string path = "mlp_roundtrip_test.json";
  REQUIRE(net->save(path) == Err::kOk);
  auto back = MLP::load(path);
  REQUIRE(back.ok());
  std::remove(path.c_str());

  CHECK(back->n_in() == 2);
  CHECK(back->n_out() == 2);
  for (int i = 0; i < Xtest.rows(); ++i) {
    const VecX p0 = net->predict_proba(Xtest.row(i).transpose());
    const VecX p1 = back->predict_proba(Xtest.row(i).transpose());
    CHECK((p0 - p1).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("degenerate datasets are rejected") {
  MatX X(10, 2);
  X.setRandom();
  std::vector<int> y(10, 0);  // class 1 never appears
  MLPConfig cfg;
  cfg.hidden = {4};
  CHECK(MLP::train(X, y, 2, cfg).err == Err::kConfig);

  std::vector<int> bad(10, 0);
  bad[3] = 5;  // out of range
  CHECK(MLP::train(X, bad, 2, cfg).err == Err::kConfig);
}

TEST_CASE("argmax tie-break picks the lowest class index") {
  MLP net(2, {}, 3, 1);
  for (auto& W : net.weights()) W.setZero();
  for (auto& b : net.biases()) b.setZero();
  const VecX p = net.predict_proba(Vec2(0.3, -0.7));
  CHECK(std::abs(p(0) - 1.0 / 3.0) < 1e-12);
  CHECK(net.predict(Vec2(0.3, -0.7)) == 0);
}

TEST_CASE("scaler normalizes the training columns") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(5.0, 3.0);
  MatX X(400, 3);
  for (int i = 0; i < X.rows(); ++i)
    X.row(i) << g(rng), 10.0 * g(rng), -2.0 * g(rng);
  const Scaler s = Scaler::fit(X);
  VecX mean = VecX::Zero(3), var = VecX::Zero(3);
  for (int i = 0; i < X.rows(); ++i) mean += s.apply(X.row(i).transpose());
  mean /= X.rows();
  for (int i = 0; i < X.rows(); ++i) {
    const VecX d = s.apply(X.row(i).transpose()) - mean;
    var += d.cwiseProduct(d);
  }
  var /= X.rows() - 1;
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((var - VecX::Ones(3)).cwiseAbs().maxCoeff() < 1e-9);

  // constant column: no blow-up
  MatX Xc(10, 1);
  Xc.setConstant(4.2);
  const Scaler sc = Scaler::fit(Xc);
  CHECK(std::isfinite(sc.apply(VecX::Constant(1, 4.2))(0)));
}
