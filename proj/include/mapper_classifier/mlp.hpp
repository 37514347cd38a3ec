#pragma once

// Fully connected rectifier network with inverted dropout and a log-softmax
// head, trained by mini-batch SGD with classical momentum on the negative
// log likelihood. Templated on the scalar so tests can run in double while
// the pipeline trains in float.

#include "mapper_classifier/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace mc {

enum class Mode { train, eval };

struct MlpShape {
  std::vector<int> hidden{4000, 2000};
  int n_classes = 10;
  double dropout = 0.25;  // drop probability after each hidden layer
};

struct TrainConfig {
  std::size_t batch_size = 100;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 30;
  std::uint64_t seed = 1;

  void validate() const {
    require(batch_size > 0, "batch_size must be positive");
    require(learning_rate > 0, "learning_rate must be positive");
    require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    require(epochs > 0, "epochs must be positive");
  }
};

template <class T>
class Mlp {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  struct Layer {
    Mat weight;  // out x in
    Vec bias;    // out
  };

  struct Gradients {
    std::vector<Mat> weight;
    std::vector<Vec> bias;
  };

  /// Pre-activations and (post-dropout) activations of one forward pass.
  struct Trace {
    std::vector<RowMat> pre;      // per layer, batch x out
    std::vector<RowMat> act;      // act[0] = input, act[l+1] = layer l output
    std::vector<RowMat> masks;    // per hidden layer, scaled keep masks
    RowMat log_probs;
  };

  Mlp() = default;

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases.
  Mlp(int input_width, const MlpShape& shape, std::uint64_t seed) : dropout_(shape.dropout) {
    require(input_width > 0, "mlp: input width must be positive");
    require(shape.dropout >= 0 && shape.dropout < 1, "mlp: dropout must lie in [0, 1)");
    std::vector<int> widths{input_width};
    widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
    widths.push_back(shape.n_classes);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const int in = widths[l], out = widths[l + 1];
      const double a = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> u(-a, a);
      Layer layer{Mat(out, in), Vec::Zero(out)};
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = static_cast<T>(u(rng));
      layers_.push_back(std::move(layer));
    }
  }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  double dropout() const { return dropout_; }
  void set_dropout(double p) { dropout_ = p; }
  int input_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
  int n_classes() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

  /// Full forward pass. In train mode dropout masks are drawn from `rng`
  /// unless `fixed_masks` supplies them.
  Trace trace(const RowMat& x, Mode mode, std::mt19937_64* rng = nullptr,
              const std::vector<RowMat>* fixed_masks = nullptr) const {
    require(!layers_.empty(), "mlp: network has no layers");
    require(x.cols() == input_width(), "mlp: batch width " + std::to_string(x.cols()) +
                                           " does not match input width " + std::to_string(input_width()));
    Trace t;
    t.act.push_back(x);
    const T keep = static_cast<T>(1.0 - dropout_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      RowMat z = t.act.back() * layers_[l].weight.transpose();
      z.rowwise() += layers_[l].bias.transpose();
      t.pre.push_back(z);
      if (l + 1 == layers_.size()) break;
      RowMat a = z.cwiseMax(T(0));
      if (mode == Mode::train && dropout_ > 0) {
        RowMat m;
        if (fixed_masks != nullptr) {
          m = (*fixed_masks)[l];
        } else {
          require(rng != nullptr, "mlp: train-mode forward needs a random stream");
          m.resize(a.rows(), a.cols());
          std::bernoulli_distribution bern(1.0 - dropout_);
          for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = bern(*rng) ? T(1) / keep : T(0);
        }
        a = a.cwiseProduct(m);
        t.masks.push_back(std::move(m));
      }
      t.act.push_back(std::move(a));
    }
    const RowMat& logits = t.pre.back();
    const Vec row_max = logits.rowwise().maxCoeff();
    RowMat shifted = logits.colwise() - row_max;
    const Vec lse = shifted.array().exp().rowwise().sum().log().matrix();
    t.log_probs = shifted.colwise() - lse;
    return t;
  }

  RowMat forward(const RowMat& x, Mode mode, std::mt19937_64* rng = nullptr) const {
    return trace(x, mode, rng).log_probs;
  }

  /// Mean negative log likelihood of `labels` and its gradient.
  T loss_and_gradient(const RowMat& x, const std::vector<int>& labels, Gradients& grad, Mode mode,
                      std::mt19937_64* rng = nullptr, const std::vector<RowMat>* fixed_masks = nullptr) const {
    require(static_cast<std::size_t>(x.rows()) == labels.size(), "mlp: batch and labels differ in length");
    const Trace t = trace(x, mode, rng, fixed_masks);
    const auto batch = static_cast<T>(x.rows());
    T loss = 0;
    RowMat delta = t.log_probs.array().exp().matrix();  // softmax
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int y = labels[i];
      require(y >= 0 && y < n_classes(), "mlp: label out of range");
      loss -= t.log_probs(static_cast<Eigen::Index>(i), y);
      delta(static_cast<Eigen::Index>(i), y) -= T(1);
    }
    delta /= batch;
    grad.weight.resize(layers_.size());
    grad.bias.resize(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      grad.weight[l] = delta.transpose() * t.act[l];
      grad.bias[l] = delta.colwise().sum().transpose();
      if (l == 0) break;
      RowMat back = delta * layers_[l].weight;
      back = back.cwiseProduct((t.pre[l - 1].array() > T(0)).template cast<T>().matrix());
      if (mode == Mode::train && !t.masks.empty()) back = back.cwiseProduct(t.masks[l - 1]);
      delta = std::move(back);
    }
    return loss / batch;
  }

  /// Class with the largest log-probability per row; ties go to the
  /// smallest class index.
  std::vector<int> predict(const RowMatrix& x, Eigen::Index chunk = 1000) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += chunk) {
      const Eigen::Index nr = std::min(chunk, x.rows() - r0);
      const RowMat lp = forward(x.middleRows(r0, nr).template cast<T>(), Mode::eval);
      for (Eigen::Index r = 0; r < nr; ++r) {
        Eigen::Index arg = 0;
        for (Eigen::Index c = 1; c < lp.cols(); ++c)
          if (lp(r, c) > lp(r, arg)) arg = c;
        out.push_back(static_cast<int>(arg));
      }
    }
    return out;
  }

  // Checkpoint: "MCMLP1\0\0", u32 scalar bytes, u32 layers, f64 dropout,
  // then per layer u32 rows, u32 cols, weights (column-major), biases.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot create checkpoint " + path);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, sizeof(T));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(layers_.size()));
    put<double>(out, dropout_);
    for (const auto& l : layers_) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
      out.write(reinterpret_cast<const char*>(l.weight.data()), static_cast<std::streamsize>(sizeof(T) * l.weight.size()));
      out.write(reinterpret_cast<const char*>(l.bias.data()), static_cast<std::streamsize>(sizeof(T) * l.bias.size()));
    }
    if (!out) throw Error("short write to checkpoint " + path);
  }

  static Mlp load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path);
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(path + ": not an MLP checkpoint");
    if (get<std::uint32_t>(in) != sizeof(T)) throw Error(path + ": checkpoint scalar type mismatch");
    const auto n_layers = get<std::uint32_t>(in);
    Mlp net;
    net.dropout_ = get<double>(in);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      const auto rows = get<std::uint32_t>(in), cols = get<std::uint32_t>(in);
      Layer l{Mat(rows, cols), Vec(rows)};
      in.read(reinterpret_cast<char*>(l.weight.data()), static_cast<std::streamsize>(sizeof(T) * l.weight.size()));
      in.read(reinterpret_cast<char*>(l.bias.data()), static_cast<std::streamsize>(sizeof(T) * l.bias.size()));
      if (!in) throw Error(path + ": truncated checkpoint");
      if (!net.layers_.empty() && net.layers_.back().weight.rows() != l.weight.cols())
        throw Error(path + ": inconsistent layer shapes");
      net.layers_.push_back(std::move(l));
    }
    return net;
  }

 private:
  static constexpr char kMagic[8] = {'M', 'C', 'M', 'L', 'P', '1', '\0', '\0'};

  template <class U>
  static void put(std::ostream& out, U v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class U>
  static U get(std::istream& in) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("truncated checkpoint header");
    return v;
  }

  std::vector<Layer> layers_;
  double dropout_ = 0.25;
};

template <class T>
struct TrainResult {
  Mlp<T> net;
  std::vector<double> epoch_loss;  // mean mini-batch loss per epoch
};

/// Shuffled mini-batch SGD, v <- momentum*v - lr*grad; w <- w + v.
template <class T>
TrainResult<T> train(const RowMatrix& x, const std::vector<int>& labels, const TrainConfig& cfg,
                     const MlpShape& shape = {},
                     const std::function<void(int, double)>& on_epoch = {}) {
  cfg.validate();
  require(static_cast<std::size_t>(x.rows()) == labels.size(), "train: matrix rows and labels differ in length");
  require(x.rows() > 0, "train: empty training matrix");
  using Net = Mlp<T>;
  TrainResult<T> res{Net(static_cast<int>(x.cols()), shape, derive_seed(cfg.seed, 1)), {}};
  Net& net = res.net;

  typename Net::Gradients velocity;
  for (const auto& l : net.layers()) {
    velocity.weight.push_back(Net::Mat::Zero(l.weight.rows(), l.weight.cols()));
    velocity.bias.push_back(Net::Vec::Zero(l.bias.size()));
  }
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 2));
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const T lr = static_cast<T>(cfg.learning_rate), mu = static_cast<T>(cfg.momentum);

  typename Net::Gradients grad;
  typename Net::RowMat batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      batch.resize(static_cast<Eigen::Index>(len), x.cols());
      batch_labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i])).template cast<T>();
        batch_labels[i] = labels[order[start + i]];
      }
      const T loss = net.loss_and_gradient(batch, batch_labels, grad, Mode::train, &dropout_rng);
      if (!std::isfinite(static_cast<double>(loss)))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(n_batches + 1) + " (try a smaller learning rate)");
      auto& layers = net.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        velocity.weight[l] = mu * velocity.weight[l] - lr * grad.weight[l];
        velocity.bias[l] = mu * velocity.bias[l] - lr * grad.bias[l];
        layers[l].weight += velocity.weight[l];
        layers[l].bias += velocity.bias[l];
      }
      loss_sum += static_cast<double>(loss);
      ++n_batches;
    }
    res.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
    if (on_epoch) on_epoch(epoch + 1, res.epoch_loss.back());
  }
  return res;
}

}  // namespace mc
