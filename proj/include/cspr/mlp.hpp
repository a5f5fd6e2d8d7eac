#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cspr/types.hpp"

namespace cspr {

// Per-feature z-score normalization, fitted on the training split and stored
// with the network.
struct Scaler {
  VecX mean;
  VecX stdev;

  VecX apply(const VecX& x) const;
  static Scaler fit(const MatX& X);  // rows are samples
  static Scaler identity(int n);
};

struct MLPConfig {
  std::vector<int> hidden{30, 30, 30, 30, 30};
  double l2 = 1e-4;
  double lr = 1e-3;
  int batch = 32;
  int max_epochs = 200;
  int patience = 15;          // early-stop window on validation loss
  double val_fraction = 0.15;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss;  // one entry per epoch
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  int epochs = 0;
};

// Dense feedforward classifier: tanh hidden layers, softmax head,
// cross-entropy loss with L2 weight decay, Adam minibatch training.
class MLP {
 public:
  MLP() = default;
  MLP(int n_in, const std::vector<int>& hidden, int n_out, std::uint64_t seed);

  int n_in() const { return W_.empty() ? 0 : static_cast<int>(W_.front().cols()); }
  int n_out() const { return W_.empty() ? 0 : static_cast<int>(W_.back().rows()); }

  // Scaled input -> class probabilities (sums to one).
  VecX predict_proba(const VecX& x) const;
  int predict(const VecX& x) const;  // argmax, lowest index wins ties
  double accuracy(const MatX& X, const std::vector<int>& y) const;

  static Expected<MLP> train(const MatX& X, const std::vector<int>& y, int n_classes,
                             const MLPConfig& cfg, TrainReport* report = nullptr);

  Err save(const std::string& path) const;
  static Expected<MLP> load(const std::string& path);

  // Exposed for symmetry checks (exact weight surgery in tests).
  std::vector<MatX>& weights() { return W_; }
  std::vector<VecX>& biases() { return b_; }
  const std::vector<MatX>& weights() const { return W_; }
  const std::vector<VecX>& biases() const { return b_; }
  Scaler& scaler() { return scaler_; }
  const Scaler& scaler() const { return scaler_; }

 private:
  VecX forward(const VecX& x_scaled) const;

  std::vector<MatX> W_;  // W_[k]: layer k+1 size x layer k size
  std::vector<VecX> b_;
  Scaler scaler_;
};

}  // namespace cspr
