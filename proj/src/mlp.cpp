#include "cspr/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace cspr {

using nlohmann::json;

VecX Scaler::apply(const VecX& x) const {
  return (x - mean).cwiseQuotient(stdev);
}

Scaler Scaler::fit(const MatX& X) {
  Scaler s;
  s.mean = X.colwise().mean();
  VecX var = VecX::Zero(X.cols());
  for (int i = 0; i < X.rows(); ++i) {
    const VecX d = X.row(i).transpose() - s.mean;
    var += d.cwiseProduct(d);
  }
  var /= std::max<int>(1, static_cast<int>(X.rows()) - 1);
  s.stdev = var.cwiseSqrt().cwiseMax(1e-12);  // constant features pass through
  return s;
}

Scaler Scaler::identity(int n) {
  Scaler s;
  s.mean = VecX::Zero(n);
  s.stdev = VecX::Ones(n);
  return s;
}

MLP::MLP(int n_in, const std::vector<int>& hidden, int n_out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> sizes;
  sizes.push_back(n_in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_out);
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int rows = sizes[k + 1], cols = sizes[k];
    const double limit = std::sqrt(6.0 / (rows + cols));  // Glorot uniform
    std::uniform_real_distribution<double> u(-limit, limit);
    MatX W(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) W(i, j) = u(rng);
    W_.push_back(W);
    b_.push_back(VecX::Zero(rows));
  }
  scaler_ = Scaler::identity(n_in);
}

VecX MLP::forward(const VecX& x_scaled) const {
  VecX a = x_scaled;
  for (size_t k = 0; k < W_.size(); ++k) {
    VecX z = W_[k] * a + b_[k];
    if (k + 1 < W_.size())
      a = z.array().tanh();
    else
      a = z;
  }
  // stable softmax
  const double zmax = a.maxCoeff();
  VecX e = (a.array() - zmax).exp();
  return e / e.sum();
}

VecX MLP::predict_proba(const VecX& x) const { return forward(scaler_.apply(x)); }

int MLP::predict(const VecX& x) const {
  const VecX p = predict_proba(x);
  int best = 0;
  for (int i = 1; i < p.size(); ++i)
    if (p(i) > p(best)) best = i;  // strict: ties keep the lowest index
  return best;
}

double MLP::accuracy(const MatX& X, const std::vector<int>& y) const {
  if (X.rows() == 0) return 0.0;
  int hits = 0;
  for (int i = 0; i < X.rows(); ++i)
    if (predict(X.row(i).transpose()) == y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(X.rows());
}

namespace {

struct Adam {
  std::vector<MatX> mW, vW;
  std::vector<VecX> mb, vb;
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit Adam(const MLP& net) {
    for (const auto& W : net.weights()) {
      mW.push_back(MatX::Zero(W.rows(), W.cols()));
      vW.push_back(MatX::Zero(W.rows(), W.cols()));
    }
    for (const auto& b : net.biases()) {
      mb.push_back(VecX::Zero(b.size()));
      vb.push_back(VecX::Zero(b.size()));
    }
  }

  void step(MLP& net, const std::vector<MatX>& gW, const std::vector<VecX>& gb, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (size_t k = 0; k < gW.size(); ++k) {
      mW[k] = b1 * mW[k] + (1 - b1) * gW[k];
      vW[k] = b2 * vW[k] + (1 - b2) * gW[k].cwiseProduct(gW[k]);
      net.weights()[k] -=
          lr * (mW[k] / c1).cwiseQuotient(((vW[k] / c2).cwiseSqrt().array() + eps).matrix());
      mb[k] = b1 * mb[k] + (1 - b1) * gb[k];
      vb[k] = b2 * vb[k] + (1 - b2) * gb[k].cwiseProduct(gb[k]);
      net.biases()[k] -=
          lr * (mb[k] / c1).cwiseQuotient(((vb[k] / c2).cwiseSqrt().array() + eps).matrix());
    }
  }
};

// Mean cross-entropy + 0.5*l2*sum(|W|^2) and its gradients over one batch of
// pre-scaled rows.
double batch_backprop(MLP& net, const MatX& Xs, const std::vector<int>& y,
                      const std::vector<int>& idx, double l2, std::vector<MatX>& gW,
                      std::vector<VecX>& gb) {
  auto& W = net.weights();
  auto& b = net.biases();
  const size_t L = W.size();
  for (size_t k = 0; k < L; ++k) {
    gW[k].setZero();
    gb[k].setZero();
  }
  double loss = 0.0;
  std::vector<VecX> act(L + 1);
  for (int row : idx) {
    act[0] = Xs.row(row).transpose();
    for (size_t k = 0; k < L; ++k) {
      VecX z = W[k] * act[k] + b[k];
      act[k + 1] = (k + 1 < L) ? VecX(z.array().tanh()) : z;
    }
    const double zmax = act[L].maxCoeff();
    VecX p = (act[L].array() - zmax).exp();
    p /= p.sum();
    loss -= std::log(std::max(p(y[row]), 1e-300));

    VecX delta = p;  // softmax + cross-entropy
    delta(y[row]) -= 1.0;
    for (size_t k = L; k-- > 0;) {
      gW[k] += delta * act[k].transpose();
      gb[k] += delta;
      if (k > 0) {
        VecX da = W[k].transpose() * delta;
        delta = da.cwiseProduct((1.0 - act[k].array().square()).matrix());
      }
    }
  }
  const double n = static_cast<double>(idx.size());
  loss /= n;
  for (size_t k = 0; k < L; ++k) {
    gW[k] /= n;
    gb[k] /= n;
    gW[k] += l2 * W[k];
    loss += 0.5 * l2 * W[k].squaredNorm();
  }
  return loss;
}

double dataset_loss(const MLP& net, const MatX& Xs, const std::vector<int>& y,
                    const std::vector<int>& idx, double l2) {
  double loss = 0.0;
  for (int row : idx) {
    // forward on pre-scaled rows: bypass the scaler
    VecX a = Xs.row(row).transpose();
    const auto& W = net.weights();
    const auto& b = net.biases();
    for (size_t k = 0; k < W.size(); ++k) {
      VecX z = W[k] * a + b[k];
      a = (k + 1 < W.size()) ? VecX(z.array().tanh()) : z;
    }
    const double zmax = a.maxCoeff();
    VecX p = (a.array() - zmax).exp();
    p /= p.sum();
    loss -= std::log(std::max(p(y[row]), 1e-300));
  }
  loss /= std::max<size_t>(1, idx.size());
  for (const auto& W : net.weights()) loss += 0.5 * l2 * W.squaredNorm();
  return loss;
}

}  // namespace

Expected<MLP> MLP::train(const MatX& X, const std::vector<int>& y, int n_classes,
                         const MLPConfig& cfg, TrainReport* report) {
  if (X.rows() < 2 * n_classes || static_cast<size_t>(X.rows()) != y.size()) return Err::kConfig;
  std::vector<int> counts(n_classes, 0);
  for (int label : y) {
    if (label < 0 || label >= n_classes) return Err::kConfig;
    ++counts[label];
  }
  if (*std::min_element(counts.begin(), counts.end()) == 0) return Err::kConfig;

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(X.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val = std::max(1, static_cast<int>(cfg.val_fraction * X.rows()));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) return Err::kConfig;

  MatX Xtrain(train_idx.size(), X.cols());
  for (size_t i = 0; i < train_idx.size(); ++i) Xtrain.row(i) = X.row(train_idx[i]);
  const Scaler scaler = Scaler::fit(Xtrain);
  MatX Xs(X.rows(), X.cols());
  for (int i = 0; i < X.rows(); ++i) Xs.row(i) = scaler.apply(X.row(i).transpose()).transpose();

  MLP net(static_cast<int>(X.cols()), cfg.hidden, n_classes, cfg.seed + 1);
  net.scaler_ = scaler;
  Adam opt(net);

  std::vector<MatX> gW;
  std::vector<VecX> gb;
  for (const auto& W : net.W_) gW.push_back(MatX::Zero(W.rows(), W.cols()));
  for (const auto& b : net.b_) gb.push_back(VecX::Zero(b.size()));

  MLP best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  TrainReport rep;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (size_t start = 0; start < train_idx.size(); start += cfg.batch) {
      const size_t stop = std::min(train_idx.size(), start + cfg.batch);
      std::vector<int> batch(train_idx.begin() + start, train_idx.begin() + stop);
      batch_backprop(net, Xs, y, batch, cfg.l2, gW, gb);
      opt.step(net, gW, gb, cfg.lr);
    }
    rep.train_loss.push_back(dataset_loss(net, Xs, y, train_idx, cfg.l2));
    const double vl = dataset_loss(net, Xs, y, val_idx, cfg.l2);
    ++rep.epochs;
    if (vl < best_val - 1e-6) {
      best_val = vl;
      best = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  best.scaler_ = scaler;
  if (report) {
    rep.val_loss = best_val;
    int hits = 0;
    for (int i : val_idx)
      if (best.predict(X.row(i).transpose()) == y[i]) ++hits;
    rep.val_accuracy = val_idx.empty() ? 0.0 : double(hits) / double(val_idx.size());
    *report = rep;
  }
  return best;
}

Err MLP::save(const std::string& path) const {
  json j;
  j["format"] = "cspr-mlp";
  j["version"] = 1;
  std::vector<int> sizes;
  sizes.push_back(n_in());
  for (const auto& W : W_) sizes.push_back(static_cast<int>(W.rows()));
  j["layers"] = sizes;
  j["scaler"]["mean"] = std::vector<double>(scaler_.mean.data(), scaler_.mean.data() + scaler_.mean.size());
  j["scaler"]["stdev"] = std::vector<double>(scaler_.stdev.data(), scaler_.stdev.data() + scaler_.stdev.size());
  json jw = json::array(), jb = json::array();
  for (const auto& W : W_) {
    std::vector<double> flat(W.size());
    Eigen::Map<MatX>(flat.data(), W.rows(), W.cols()) = W;
    jw.push_back(flat);
  }
  for (const auto& b : b_) jb.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  j["weights"] = jw;
  j["biases"] = jb;
  std::ofstream out(path);
  if (!out) return Err::kIo;
  out << j.dump(1) << "\n";
  return out.good() ? Err::kOk : Err::kIo;
}

Expected<MLP> MLP::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Err::kIo;
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return Err::kIo;
  }
  if (j.value("format", "") != "cspr-mlp") return Err::kIo;
  const auto sizes = j.at("layers").get<std::vector<int>>();
  if (sizes.size() < 2) return Err::kIo;
  MLP net;
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    const auto flat = j.at("weights").at(k).get<std::vector<double>>();
    if (static_cast<int>(flat.size()) != sizes[k + 1] * sizes[k]) return Err::kIo;
    MatX W = Eigen::Map<const MatX>(flat.data(), sizes[k + 1], sizes[k]);
    net.W_.push_back(W);
    const auto bv = j.at("biases").at(k).get<std::vector<double>>();
    if (static_cast<int>(bv.size()) != sizes[k + 1]) return Err::kIo;
    net.b_.push_back(Eigen::Map<const VecX>(bv.data(), bv.size()));
  }
  const auto mean = j.at("scaler").at("mean").get<std::vector<double>>();
  const auto stdev = j.at("scaler").at("stdev").get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != sizes.front()) return Err::kIo;
  net.scaler_.mean = Eigen::Map<const VecX>(mean.data(), mean.size());
  net.scaler_.stdev = Eigen::Map<const VecX>(stdev.data(), stdev.size());
  return net;
}

}  // namespace cspr
