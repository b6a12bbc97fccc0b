#pragma once

// Loop-level re-implementation of the stack feature path on plain vectors.
// Shares only the parameter structs with the library.

#include <cmath>
#include <vector>

#include "focuskit/attention.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major rows

inline Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline Vec matvec(const Mat& a, const Vec& x) {
  Vec y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  return y;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec layer_norm(const Vec& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / std::sqrt(var + 1e-6);
  return out;
}

/// Single-head attention over a list of tokens. Returns updates without the
/// residual; `weights` receives the softmax matrix.
inline std::vector<Vec> attention(const std::vector<Vec>& xs, const Mat& wq, const Mat& wk, const Mat& wv,
                                  const Mat& wo, Mat* weights = nullptr) {
  const std::size_t n = xs.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(xs[0].size()));
  std::vector<Vec> q, k, v;
  for (const auto& x : xs) {
    q.push_back(matvec(wq, x));
    k.push_back(matvec(wk, x));
    v.push_back(matvec(wv, x));
  }
  Mat a(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q[i].size(); ++c) s += q[i][c] * k[j][c];
      a[i][j] = s * scale;
      mx = std::max(mx, a[i][j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (a[i][j] = std::exp(a[i][j] - mx));
    for (std::size_t j = 0; j < n; ++j) a[i][j] /= z;
  }
  if (weights) *weights = a;
  std::vector<Vec> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec mixed(v[0].size(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < mixed.size(); ++c) mixed[c] += a[i][j] * v[j][c];
    out.push_back(matvec(wo, mixed));
  }
  return out;
}

inline Vec fd_embed(double d, const focuskit::attention::FdMlpParams& p) {
  const double x = std::log(d);
  Vec h(static_cast<std::size_t>(p.w1.size()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double z = p.w1(static_cast<Eigen::Index>(i)) * x + p.b1(static_cast<Eigen::Index>(i));
    h[i] = z / (1.0 + std::exp(-z));
  }
  return add(matvec(to_mat(p.w2), h), to_vec(p.b2));
}

/// tokens[m][t] is a C-vector.
using Stack = std::vector<std::vector<Vec>>;

inline std::vector<Vec> vit_block(const std::vector<Vec>& x, const focuskit::attention::VitBlockParams& p) {
  std::vector<Vec> normed;
  for (const auto& t : x) normed.push_back(layer_norm(t));
  const auto upd = attention(normed, to_mat(p.wq), to_mat(p.wk), to_mat(p.wv), to_mat(p.wo));
  std::vector<Vec> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(add(x[i], upd[i]));
  const Mat w1 = to_mat(p.mlp_w1);
  const Mat w2 = to_mat(p.mlp_w2);
  for (auto& t : y) {
    Vec h = add(matvec(w1, layer_norm(t)), to_vec(p.mlp_b1));
    for (double& v : h) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    t = add(t, add(matvec(w2, h), to_vec(p.mlp_b2)));
  }
  return y;
}

inline Stack stack_attention(const Stack& in, const std::vector<double>& fds,
                             const focuskit::attention::StackAttnParams& p, bool add_fd, std::vector<Mat>* maps = nullptr) {
  Stack x = in;
  if (add_fd)
    for (std::size_t m = 0; m < x.size(); ++m) {
      const Vec e = oracle::fd_embed(fds[m], p.fd_mlp);
      for (auto& t : x[m]) t = add(t, e);
    }
  Stack out = x;
  for (std::size_t t = 0; t < x[0].size(); ++t) {
    std::vector<Vec> column;
    for (std::size_t m = 0; m < x.size(); ++m) column.push_back(x[m][t]);
    Mat w;
    const auto upd = attention(column, to_mat(p.wq), to_mat(p.wk), to_mat(p.wv), to_mat(p.wo), &w);
    if (maps) maps->push_back(w);
    for (std::size_t m = 0; m < x.size(); ++m) out[m][t] = add(column[m], upd[m]);
  }
  return out;
}

inline std::vector<Vec> forward_extract(const Stack& in, const std::vector<double>& fds,
                                        const focuskit::attention::ExtractorParams& params, int l1) {
  Stack x = in;
  for (int l = 0; l < l1; ++l) {
    const auto& layer = params.layers[static_cast<std::size_t>(l)];
    for (auto& image : x) image = oracle::vit_block(image, layer.block);
    x = oracle::stack_attention(x, fds, layer.stack, params.add_fd_embedding);
  }
  std::vector<Vec> mean(x[0].size(), Vec(x[0][0].size(), 0.0));
  for (const auto& image : x)
    for (std::size_t t = 0; t < image.size(); ++t)
      for (std::size_t c = 0; c < image[t].size(); ++c) mean[t][c] += image[t][c] / static_cast<double>(x.size());
  return mean;
}

inline Stack from_grid(const focuskit::attention::TokenGrid& g) {
  Stack s(static_cast<std::size_t>(g.stack()),
          std::vector<Vec>(static_cast<std::size_t>(g.tokens()), Vec(static_cast<std::size_t>(g.channels()))));
  for (int m = 0; m < g.stack(); ++m)
    for (int t = 0; t < g.tokens(); ++t)
      for (int c = 0; c < g.channels(); ++c) s[m][t][c] = g.at(m, c, t);
  return s;
}

}  // namespace oracle
