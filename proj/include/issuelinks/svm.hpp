#pragma once

// One-vs-rest linear SVM trained by seeded stochastic subgradient descent on
// the class-weighted hinge loss (Pegasos step sizes, fixed epoch count).

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "issuelinks/detail/hash.hpp"
#include "issuelinks/detail/parallel.hpp"
#include "issuelinks/detail/random.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/sparse.hpp"

namespace issuelinks {

struct SvmConfig {
  std::size_t epochs = 20;
  double regularization = 1e-4;  // lambda in lambda/2 |w|^2
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

class LinearSvm {
 public:
  LinearSvm() = default;

  static LinearSvm train(const CsrMatrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                         std::span<const double> class_weight, const SvmConfig& cfg) {
    if (!(cfg.regularization > 0.0)) throw Error(ErrorKind::InvalidArgument, "regularization must be positive");
    if (cfg.epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be at least 1");
    LinearSvm m;
    m.dimension_ = x.cols;
    m.weights_.assign(n_classes, std::vector<double>(x.cols, 0.0));
    m.bias_.assign(n_classes, 0.0);
    detail::parallel_for(n_classes, cfg.jobs, [&](std::size_t c) {
      train_binary(x, y, c, class_weight, cfg, m.weights_[c], m.bias_[c]);
    });
    return m;
  }

  std::vector<double> margins(std::span<const std::uint32_t> idx, std::span<const double> val) const {
    std::vector<double> out(bias_);
    for (std::size_t c = 0; c < weights_.size(); ++c) {
      const auto& w = weights_[c];
      double s = 0.0;
      for (std::size_t q = 0; q < idx.size(); ++q) s += w[idx[q]] * val[q];
      out[c] += s;
    }
    return out;
  }

  std::size_t n_classes() const { return weights_.size(); }
  std::size_t dimension() const { return dimension_; }

  nlohmann::json to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < weights_.size(); ++c) {
      std::vector<std::uint32_t> idx;
      std::vector<double> val;
      for (std::size_t f = 0; f < weights_[c].size(); ++f) {
        if (weights_[c][f] != 0.0) {
          idx.push_back(static_cast<std::uint32_t>(f));
          val.push_back(weights_[c][f]);
        }
      }
      classes.push_back({{"bias", bias_[c]}, {"indices", idx}, {"values", val}});
    }
    return {{"dimension", dimension_}, {"classes", classes}};
  }

  static LinearSvm from_json(const nlohmann::json& j) {
    LinearSvm m;
    m.dimension_ = j.at("dimension").get<std::size_t>();
    for (const auto& c : j.at("classes")) {
      std::vector<double> w(m.dimension_, 0.0);
      const auto idx = c.at("indices").get<std::vector<std::uint32_t>>();
      const auto val = c.at("values").get<std::vector<double>>();
      for (std::size_t q = 0; q < idx.size(); ++q) w.at(idx[q]) = val[q];
      m.weights_.push_back(std::move(w));
      m.bias_.push_back(c.at("bias").get<double>());
    }
    return m;
  }

 private:
  // w is kept as scale * v so the shrink step is O(1); the bias is an extra
  // always-one feature and is regularized with the rest.
  static void train_binary(const CsrMatrix& x, std::span<const std::size_t> y, std::size_t cls,
                           std::span<const double> class_weight, const SvmConfig& cfg,
                           std::vector<double>& w_out, double& b_out) {
    const std::size_t n = x.rows();
    std::vector<double> v(x.cols, 0.0);
    double vb = 0.0;
    double scale = 1.0;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    detail::Rng rng(detail::derive_seed(cfg.seed, cls));
    const double lambda = cfg.regularization;
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const auto idx = x.row_indices(i);
        const auto val = x.row_values(i);
        double s = vb;
        for (std::size_t q = 0; q < idx.size(); ++q) s += v[idx[q]] * val[q];
        const double label = y[i] == cls ? 1.0 : -1.0;
        const double margin = label * scale * s;

        const double shrink = 1.0 - eta * lambda;
        if (shrink <= 0.0) {
          std::fill(v.begin(), v.end(), 0.0);
          vb = 0.0;
          scale = 1.0;
        } else {
          scale *= shrink;
        }
        if (margin < 1.0) {
          const double step = eta * class_weight[y[i]] * label / scale;
          for (std::size_t q = 0; q < idx.size(); ++q) v[idx[q]] += step * val[q];
          vb += step;
        }
        if (scale < 1e-9) {
          for (double& w : v) w *= scale;
          vb *= scale;
          scale = 1.0;
        }
      }
    }
    w_out.resize(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) w_out[f] = v[f] * scale;
    b_out = vb * scale;
  }

  std::size_t dimension_ = 0;
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
};

}  // namespace issuelinks
