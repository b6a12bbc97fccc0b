#pragma once

// Forward-only numerical reference of the focus-stack feature path:
// patch embedding, per-image ViT block, focus-distance embedding, attention
// across the stack at every spatial token, and mean collapse.
//
// Conventions: tokens are column vectors in R^C; projections act as W x.
// The focus-distance MLP takes log(d) and uses SiLU between its two layers.
// Layer norm has no affine parameters.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "focuskit/random.hpp"
#include "focuskit/synth.hpp"

namespace focuskit::attention {

inline constexpr std::string_view kFdActivation = "silu";
inline constexpr std::string_view kFdInput = "log_meters";
inline constexpr double kLayerNormEps = 1e-6;

/// M x C x T values, stored as one C x T matrix per stack entry.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(int stack, int channels, int tokens)
      : channels_(channels), tokens_(tokens),
        planes_(static_cast<std::size_t>(stack), Eigen::MatrixXd::Zero(channels, tokens)) {
    if (stack < 1 || channels < 1 || tokens < 1) throw std::invalid_argument("TokenGrid: empty dimension");
  }

  int stack() const { return static_cast<int>(planes_.size()); }
  int channels() const { return channels_; }
  int tokens() const { return tokens_; }

  double& at(int m, int c, int t) { return planes_[static_cast<std::size_t>(m)](c, t); }
  double at(int m, int c, int t) const { return planes_[static_cast<std::size_t>(m)](c, t); }

  Eigen::MatrixXd& plane(int m) { return planes_[static_cast<std::size_t>(m)]; }
  const Eigen::MatrixXd& plane(int m) const { return planes_[static_cast<std::size_t>(m)]; }

  bool all_finite() const {
    for (const auto& p : planes_)
      if (!p.allFinite()) return false;
    return true;
  }

 private:
  int channels_ = 0;
  int tokens_ = 0;
  std::vector<Eigen::MatrixXd> planes_;
};

struct FdMlpParams {
  Eigen::VectorXd w1;  // hidden
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // C x hidden
  Eigen::VectorXd b2;  // C
};

struct StackAttnParams {
  Eigen::MatrixXd wq, wk, wv, wo;  // C x C
  FdMlpParams fd_mlp;
  int heads = 1;
};

struct VitBlockParams {
  Eigen::MatrixXd wq, wk, wv, wo;  // C x C
  Eigen::MatrixXd mlp_w1;          // hidden x C
  Eigen::VectorXd mlp_b1;
  Eigen::MatrixXd mlp_w2;  // C x hidden
  Eigen::VectorXd mlp_b2;
  int heads = 1;
};

struct ExtractionLayer {
  VitBlockParams block;
  StackAttnParams stack;
};

struct ExtractorParams {
  std::vector<ExtractionLayer> layers;
  bool add_fd_embedding = true;
};

/// Counts query-key score evaluations; one per (query, key) pair per head.
struct AttentionStats {
  std::uint64_t score_evaluations = 0;
};

/// Row-stochastic attention maps recorded per spatial token (and per head).
struct AttentionTrace {
  std::vector<Eigen::MatrixXd> maps;
};

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Eigen::VectorXd fd_embed(double focus_distance_m, const FdMlpParams& p) {
  if (!(focus_distance_m > 0.0)) throw std::domain_error("fd_embed: focus distance must be > 0");
  const double x = std::log(focus_distance_m);
  Eigen::VectorXd hidden = p.w1 * x + p.b1;
  for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden(i) = silu(hidden(i));
  return p.w2 * hidden + p.b2;
}

namespace detail {

/// Multi-head softmax attention over the columns of x (C x n). Returns the
/// output-projected update (C x n) without the residual.
inline Eigen::MatrixXd attend(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
                              const Eigen::MatrixXd& wv, const Eigen::MatrixXd& wo, int heads,
                              AttentionStats* stats, AttentionTrace* trace) {
  const Eigen::Index c = x.rows();
  const Eigen::Index n = x.cols();
  if (heads < 1 || c % heads != 0) throw std::invalid_argument("attention: heads must divide channels");
  const Eigen::Index dh = c / heads;
  const Eigen::MatrixXd q = wq * x;
  const Eigen::MatrixXd k = wk * x;
  const Eigen::MatrixXd v = wv * x;
  Eigen::MatrixXd mixed(c, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleRows(h * dh, dh);
    const auto kh = k.middleRows(h * dh, dh);
    Eigen::MatrixXd scores(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) scores(i, j) = qh.col(i).dot(kh.col(j)) * scale;
    if (stats) stats->score_evaluations += static_cast<std::uint64_t>(n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - mx).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    if (trace) trace->maps.push_back(scores);
    mixed.middleRows(h * dh, dh) = v.middleRows(h * dh, dh) * scores.transpose();
  }
  return wo * mixed;
}

inline Eigen::MatrixXd layer_norm_columns(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().mean();
    out.col(j) = (x.col(j).array() - mean) / std::sqrt(var + kLayerNormEps);
  }
  return out;
}

}  // namespace detail

/// Pre-norm ViT block on one image's C x T tokens.
inline Eigen::MatrixXd vit_block(const Eigen::MatrixXd& x, const VitBlockParams& p) {
  Eigen::MatrixXd y = x + detail::attend(detail::layer_norm_columns(x), p.wq, p.wk, p.wv, p.wo, p.heads, nullptr, nullptr);
  Eigen::MatrixXd hidden = p.mlp_w1 * detail::layer_norm_columns(y);
  hidden.colwise() += p.mlp_b1;
  hidden = hidden.unaryExpr([](double v) { return gelu(v); });
  Eigen::MatrixXd update = p.mlp_w2 * hidden;
  update.colwise() += p.mlp_b2;
  return y + update;
}

/// Adds each image's focus-distance embedding to its tokens (when enabled),
/// then runs softmax self-attention across the M stack entries at every
/// spatial token, with a residual connection.
inline TokenGrid stack_attention(const TokenGrid& tokens, const std::vector<double>& fds, const StackAttnParams& p,
                                 bool add_fd_embedding = true, AttentionStats* stats = nullptr,
                                 AttentionTrace* trace = nullptr) {
  const int m = tokens.stack();
  const int c = tokens.channels();
  if (static_cast<int>(fds.size()) != m) throw std::invalid_argument("stack_attention: one focus distance per image");
  if (p.wq.rows() != c || p.wq.cols() != c) throw std::invalid_argument("stack_attention: projection size mismatch");

  TokenGrid in = tokens;
  if (add_fd_embedding) {
    for (int i = 0; i < m; ++i) in.plane(i).colwise() += fd_embed(fds[static_cast<std::size_t>(i)], p.fd_mlp);
  }
  TokenGrid out(m, c, tokens.tokens());
  Eigen::MatrixXd x(c, m);
  for (int t = 0; t < tokens.tokens(); ++t) {
    for (int i = 0; i < m; ++i) x.col(i) = in.plane(i).col(t);
    const Eigen::MatrixXd y = x + detail::attend(x, p.wq, p.wk, p.wv, p.wo, p.heads, stats, trace);
    for (int i = 0; i < m; ++i) out.plane(i).col(t) = y.col(i);
  }
  return out;
}

/// Mean over the stack dimension; C x T.
inline Eigen::MatrixXd collapse(const TokenGrid& tokens) {
  Eigen::MatrixXd sum = tokens.plane(0);
  for (int i = 1; i < tokens.stack(); ++i) sum += tokens.plane(i);
  return sum / static_cast<double>(tokens.stack());
}

/// L1 rounds of (per-image ViT block, stack attention), then collapse.
inline Eigen::MatrixXd forward_extract(const TokenGrid& tokens, const std::vector<double>& fds,
                                       const ExtractorParams& params, int l1, AttentionStats* stats = nullptr,
                                       AttentionTrace* trace = nullptr) {
  if (l1 < 0 || static_cast<std::size_t>(l1) > params.layers.size())
    throw std::invalid_argument("forward_extract: not enough layers for L1");
  if (static_cast<int>(fds.size()) != tokens.stack())
    throw std::invalid_argument("forward_extract: one focus distance per image");
  TokenGrid x = tokens;
  for (int l = 0; l < l1; ++l) {
    const auto& layer = params.layers[static_cast<std::size_t>(l)];
    for (int i = 0; i < x.stack(); ++i) x.plane(i) = vit_block(x.plane(i), layer.block);
    x = stack_attention(x, fds, layer.stack, params.add_fd_embedding, stats, trace);
  }
  return collapse(x);
}

/// Splits each image into non-overlapping patch x patch tiles and projects the
/// flattened tile (channel-major, then row, then column) to C channels.
/// weight is C x (3 patch^2).
inline TokenGrid patch_embed(const std::vector<RgbImage>& images, int patch, const Eigen::MatrixXd& weight,
                             const Eigen::VectorXd& bias) {
  if (images.empty()) throw std::invalid_argument("patch_embed: no images");
  const int w = images.front().width();
  const int h = images.front().height();
  if (patch < 1 || w % patch != 0 || h % patch != 0)
    throw std::invalid_argument("patch_embed: patch size must divide image dimensions");
  const int dim = 3 * patch * patch;
  if (weight.cols() != dim || weight.rows() != bias.size())
    throw std::invalid_argument("patch_embed: weight shape mismatch");
  const int pw = w / patch;
  const int ph = h / patch;
  TokenGrid out(static_cast<int>(images.size()), static_cast<int>(weight.rows()), pw * ph);
  Eigen::VectorXd flat(dim);
  for (std::size_t m = 0; m < images.size(); ++m) {
    if (!images[m].same_size(w, h)) throw std::invalid_argument("patch_embed: images differ in size");
    for (int py = 0; py < ph; ++py) {
      for (int px = 0; px < pw; ++px) {
        int k = 0;
        for (int c = 0; c < 3; ++c)
          for (int dy = 0; dy < patch; ++dy)
            for (int dx = 0; dx < patch; ++dx) flat(k++) = images[m](px * patch + dx, py * patch + dy, c);
        out.plane(static_cast<int>(m)).col(py * pw + px) = weight * flat + bias;
      }
    }
  }
  return out;
}

namespace detail {

inline Eigen::MatrixXd seeded_matrix(Eigen::Index rows, Eigen::Index cols, double scale, SeededRng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

inline Eigen::VectorXd seeded_vector(Eigen::Index n, double scale, SeededRng& rng) {
  return seeded_matrix(n, 1, scale, rng).col(0);
}

}  // namespace detail

struct ExtractorShape {
  int channels = 4;
  int mlp_hidden = 8;
  int fd_hidden = 4;
  int layers = 1;
  int heads = 1;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization in a fixed draw
/// order. With zero_fd_mlp the focus-distance MLP output layer is zeroed.
inline ExtractorParams seeded_params(const ExtractorShape& shape, SeededRng& rng, bool zero_fd_mlp = false) {
  const int c = shape.channels;
  const double sc = 1.0 / std::sqrt(static_cast<double>(c));
  const double sh = 1.0 / std::sqrt(static_cast<double>(shape.mlp_hidden));
  const double sf = 1.0 / std::sqrt(static_cast<double>(shape.fd_hidden));
  ExtractorParams params;
  for (int l = 0; l < shape.layers; ++l) {
    ExtractionLayer layer;
    auto& b = layer.block;
    b.heads = shape.heads;
    b.wq = detail::seeded_matrix(c, c, sc, rng);
    b.wk = detail::seeded_matrix(c, c, sc, rng);
    b.wv = detail::seeded_matrix(c, c, sc, rng);
    b.wo = detail::seeded_matrix(c, c, sc, rng);
    b.mlp_w1 = detail::seeded_matrix(shape.mlp_hidden, c, sc, rng);
    b.mlp_b1 = detail::seeded_vector(shape.mlp_hidden, sc, rng);
    b.mlp_w2 = detail::seeded_matrix(c, shape.mlp_hidden, sh, rng);
    b.mlp_b2 = detail::seeded_vector(c, sh, rng);
    auto& s = layer.stack;
    s.heads = shape.heads;
    s.wq = detail::seeded_matrix(c, c, sc, rng);
    s.wk = detail::seeded_matrix(c, c, sc, rng);
    s.wv = detail::seeded_matrix(c, c, sc, rng);
    s.wo = detail::seeded_matrix(c, c, sc, rng);
    s.fd_mlp.w1 = detail::seeded_vector(shape.fd_hidden, 1.0, rng);
    s.fd_mlp.b1 = detail::seeded_vector(shape.fd_hidden, 1.0, rng);
    s.fd_mlp.w2 = detail::seeded_matrix(c, shape.fd_hidden, sf, rng);
    s.fd_mlp.b2 = detail::seeded_vector(c, sf, rng);
    if (zero_fd_mlp) {
      s.fd_mlp.w2.setZero();
      s.fd_mlp.b2.setZero();
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

}  // namespace focuskit::attention
