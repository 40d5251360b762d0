#include "ptz/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ptz {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecR = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MapM = Eigen::Map<MatR<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatR<T>>;
template <typename T>
using MapV = Eigen::Map<VecR<T>>;
template <typename T>
using CMapV = Eigen::Map<const VecR<T>>;

template <typename T>
void im2col(const LayerInfo& L, const T* in, AlignedVector<T>& col) {
  const int k = L.kernel;
  const int C = L.in_c;
  const std::size_t cols = static_cast<std::size_t>(k) * k * C;
  col.assign(static_cast<std::size_t>(L.out_h) * L.out_w * cols, T(0));
  for (int oy = 0; oy < L.out_h; ++oy) {
    for (int ox = 0; ox < L.out_w; ++ox) {
      T* row = col.data() + (static_cast<std::size_t>(oy) * L.out_w + ox) * cols;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * L.stride - L.pad_top + ky;
        if (iy < 0 || iy >= L.in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * L.stride - L.pad_left + kx;
          if (ix < 0 || ix >= L.in_w) continue;
          const T* src = in + (static_cast<std::size_t>(iy) * L.in_w + ix) * C;
          std::copy(src, src + C, row + (ky * k + kx) * C);
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const LayerInfo& L, const T* col, T* d_in) {
  const int k = L.kernel;
  const int C = L.in_c;
  const std::size_t cols = static_cast<std::size_t>(k) * k * C;
  for (int oy = 0; oy < L.out_h; ++oy) {
    for (int ox = 0; ox < L.out_w; ++ox) {
      const T* row = col + (static_cast<std::size_t>(oy) * L.out_w + ox) * cols;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * L.stride - L.pad_top + ky;
        if (iy < 0 || iy >= L.in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * L.stride - L.pad_left + kx;
          if (ix < 0 || ix >= L.in_w) continue;
          T* dst = d_in + (static_cast<std::size_t>(iy) * L.in_w + ix) * C;
          const T* src = row + (ky * k + kx) * C;
          for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

NetworkSpec NetworkSpec::image(HeadSet heads, bool ci) {
  NetworkSpec s;
  s.trunk = Trunk::image_cnn;
  s.heads = heads;
  s.ci_injection = ci;
  s.convs = {{5, 64, 2}, {3, 32, 2}, {3, 32, 2}, {3, 16, 2}};
  s.fc = {64, 64, 64};
  return s;
}

NetworkSpec NetworkSpec::bbox(HeadSet heads, bool ci) {
  NetworkSpec s;
  s.trunk = Trunk::bbox_mlp;
  s.heads = heads;
  s.ci_injection = ci;
  s.fc = {64, 64};
  return s;
}

std::string describe(const NetworkSpec& s) {
  std::ostringstream os;
  if (s.trunk == Trunk::image_cnn) {
    os << "image " << s.input_w << "x" << s.input_h << "x" << s.input_c;
    for (const auto& c : s.convs) os << " conv" << c.kernel << "x" << c.kernel << "x" << c.out_channels << "/s" << c.stride;
  } else {
    os << "bbox " << s.bbox_inputs;
  }
  for (int f : s.fc) os << " fc" << f;
  if (s.ci_injection) os << " +ci";
  static const char* names[] = {"policy+value", "policy", "relloc", "detector"};
  os << " -> " << names[static_cast<int>(s.heads)];
  return os.str();
}

int head_output_count(HeadSet heads) {
  switch (heads) {
    case HeadSet::policy_value: return kPolicyLogits + 1;
    case HeadSet::policy: return kPolicyLogits;
    case HeadSet::relloc: return 3;
    case HeadSet::detector: return 4;
  }
  return 0;
}

bool has_policy(HeadSet heads) { return heads == HeadSet::policy_value || heads == HeadSet::policy; }
bool has_value(HeadSet heads) { return heads == HeadSet::policy_value; }

int input_size(const NetworkSpec& s) {
  return s.trunk == Trunk::image_cnn ? s.input_w * s.input_h * s.input_c : s.bbox_inputs;
}

int conv_out_size(int in, int stride) { return (in + stride - 1) / stride; }

int conv_pad_before(int in, int kernel, int stride) {
  const int out = conv_out_size(in, stride);
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

std::size_t LayerInfo::weight_count() const {
  if (kind == Kind::conv) return static_cast<std::size_t>(kernel) * kernel * in_c * out_c;
  return static_cast<std::size_t>(in_c) * out_c;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  int flat = 0;
  if (spec_.trunk == Trunk::image_cnn) {
    if (spec_.input_w <= 0 || spec_.input_h <= 0 || spec_.input_c <= 0) throw std::invalid_argument("bad input shape");
    int h = spec_.input_h, w = spec_.input_w, c = spec_.input_c;
    for (const auto& cs : spec_.convs) {
      LayerInfo L;
      L.kind = LayerInfo::Kind::conv;
      L.in_h = h;
      L.in_w = w;
      L.in_c = c;
      L.kernel = cs.kernel;
      L.stride = cs.stride;
      L.out_h = conv_out_size(h, cs.stride);
      L.out_w = conv_out_size(w, cs.stride);
      L.out_c = cs.out_channels;
      L.pad_top = conv_pad_before(h, cs.kernel, cs.stride);
      L.pad_left = conv_pad_before(w, cs.kernel, cs.stride);
      layers_.push_back(L);
      h = L.out_h;
      w = L.out_w;
      c = L.out_c;
    }
    flat = h * w * c;
  } else {
    flat = spec_.bbox_inputs;
  }
  int width = flat + (spec_.ci_injection ? 1 : 0);
  for (int f : spec_.fc) {
    LayerInfo L;
    L.kind = LayerInfo::Kind::fc;
    L.in_c = width;
    L.out_c = f;
    layers_.push_back(L);
    width = f;
  }
  if (spec_.fc.empty() && spec_.ci_injection)
    throw std::invalid_argument("CI injection needs at least one fully connected layer");
  trunk_layers_ = layers_.size();
  auto add_head = [&](int outputs) {
    LayerInfo L;
    L.kind = LayerInfo::Kind::head;
    L.in_c = width;
    L.out_c = outputs;
    L.relu = false;
    layers_.push_back(L);
  };
  switch (spec_.heads) {
    case HeadSet::policy_value:
      add_head(kPolicyLogits);
      add_head(1);
      break;
    case HeadSet::policy: add_head(kPolicyLogits); break;
    case HeadSet::relloc: add_head(3); break;
    case HeadSet::detector: add_head(4); break;
  }
  std::size_t off = 0;
  for (auto& L : layers_) {
    L.weight_offset = off;
    off += L.weight_count();
    L.bias_offset = off;
    off += static_cast<std::size_t>(L.out_c);
  }
  param_count_ = off;
}

int Network::trunk_width() const { return layers_[trunk_layers_].in_c; }

std::vector<double> Network::init_params(std::uint64_t seed) const {
  std::vector<double> p(param_count_, 0.0);
  Rng rng(seed, "init");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerInfo& L = layers_[i];
    const double fan_in = L.kind == LayerInfo::Kind::conv ? double(L.kernel) * L.kernel * L.in_c : double(L.in_c);
    double bound = L.kind == LayerInfo::Kind::head ? std::sqrt(1.0 / fan_in) : std::sqrt(6.0 / fan_in);
    if (L.kind == LayerInfo::Kind::head && i == trunk_layers_ && has_policy(spec_.heads)) bound *= 0.01;
    for (std::size_t k = 0; k < L.weight_count(); ++k) p[L.weight_offset + k] = rng.uniform(-bound, bound);
  }
  return p;
}

template <typename T>
void Network::forward(const T* params, const T* input, std::optional<double> ci, ForwardCache<T>& cache) const {
  if (spec_.ci_injection != ci.has_value()) throw std::invalid_argument("CI input must be given iff the net injects it");
  cache.inputs.resize(layers_.size());
  cache.cols.resize(layers_.size());
  AlignedVector<T> x(input, input + input_size(spec_));
  bool first_fc = true;
  for (std::size_t i = 0; i < trunk_layers_; ++i) {
    const LayerInfo& L = layers_[i];
    if (L.kind == LayerInfo::Kind::conv) {
      im2col(L, x.data(), cache.cols[i]);
      cache.inputs[i] = std::move(x);
      const int rows = L.out_h * L.out_w;
      const int cols = L.kernel * L.kernel * L.in_c;
      CMapM<T> col(cache.cols[i].data(), rows, cols);
      CMapM<T> W(params + L.weight_offset, cols, L.out_c);
      CMapV<T> b(params + L.bias_offset, L.out_c);
      x.assign(static_cast<std::size_t>(rows) * L.out_c, T(0));
      MapM<T> out(x.data(), rows, L.out_c);
      out.noalias() = col * W;
      out.rowwise() += b;
    } else {
      if (first_fc && spec_.ci_injection) x.push_back(static_cast<T>(*ci));
      first_fc = false;
      cache.inputs[i] = std::move(x);
      CMapV<T> in(cache.inputs[i].data(), L.in_c);
      CMapM<T> W(params + L.weight_offset, L.in_c, L.out_c);
      CMapV<T> b(params + L.bias_offset, L.out_c);
      x.assign(static_cast<std::size_t>(L.out_c), T(0));
      MapV<T> out(x.data(), L.out_c);
      out.noalias() = in * W;
      out += b;
    }
    for (T& v : x) v = v > T(0) ? v : T(0);
  }
  cache.trunk_out = std::move(x);
  cache.outputs.clear();
  for (std::size_t i = trunk_layers_; i < layers_.size(); ++i) {
    const LayerInfo& L = layers_[i];
    CMapV<T> in(cache.trunk_out.data(), L.in_c);
    CMapM<T> W(params + L.weight_offset, L.in_c, L.out_c);
    CMapV<T> b(params + L.bias_offset, L.out_c);
    VecR<T> out = in * W + b;
    cache.outputs.insert(cache.outputs.end(), out.data(), out.data() + L.out_c);
  }
}

template <typename T>
void Network::backward(const T* params, const ForwardCache<T>& cache, const T* d_outputs, T* grad) const {
  AlignedVector<T> d(cache.trunk_out.size(), T(0));
  const T* dout = d_outputs;
  for (std::size_t i = trunk_layers_; i < layers_.size(); ++i) {
    const LayerInfo& L = layers_[i];
    CMapV<T> in(cache.trunk_out.data(), L.in_c);
    CMapV<T> g(dout, L.out_c);
    CMapM<T> W(params + L.weight_offset, L.in_c, L.out_c);
    MapM<T>(grad + L.weight_offset, L.in_c, L.out_c).noalias() += in.transpose() * g;
    MapV<T>(grad + L.bias_offset, L.out_c) += g;
    MapV<T>(d.data(), L.in_c).noalias() += g * W.transpose();
    dout = dout + L.out_c;
  }

  for (std::size_t ii = trunk_layers_; ii-- > 0;) {
    const LayerInfo& L = layers_[ii];
    // ReLU mask from this layer's output: the next layer's input (or the trunk output).
    const AlignedVector<T>& out = ii + 1 < trunk_layers_ ? cache.inputs[ii + 1] : cache.trunk_out;
    const std::size_t n_out =
        L.kind == LayerInfo::Kind::conv ? static_cast<std::size_t>(L.out_h) * L.out_w * L.out_c : std::size_t(L.out_c);
    for (std::size_t k = 0; k < n_out; ++k)
      if (!(out[k] > T(0))) d[k] = T(0);
    d.resize(n_out);

    if (L.kind == LayerInfo::Kind::conv) {
      const int rows = L.out_h * L.out_w;
      const int cols = L.kernel * L.kernel * L.in_c;
      CMapM<T> dpre(d.data(), rows, L.out_c);
      CMapM<T> col(cache.cols[ii].data(), rows, cols);
      CMapM<T> W(params + L.weight_offset, cols, L.out_c);
      MapM<T>(grad + L.weight_offset, cols, L.out_c).noalias() += col.transpose() * dpre;
      MapV<T>(grad + L.bias_offset, L.out_c) += dpre.colwise().sum();
      if (ii == 0) return;
      MatR<T> dcol = dpre * W.transpose();
      AlignedVector<T> d_in(static_cast<std::size_t>(L.in_h) * L.in_w * L.in_c, T(0));
      col2im_add(L, dcol.data(), d_in.data());
      d = std::move(d_in);
    } else {
      CMapV<T> in(cache.inputs[ii].data(), L.in_c);
      CMapV<T> g(d.data(), L.out_c);
      CMapM<T> W(params + L.weight_offset, L.in_c, L.out_c);
      MapM<T>(grad + L.weight_offset, L.in_c, L.out_c).noalias() += in.transpose() * g;
      MapV<T>(grad + L.bias_offset, L.out_c) += g;
      if (ii == 0) return;
      AlignedVector<T> d_in(static_cast<std::size_t>(L.in_c), T(0));
      MapV<T>(d_in.data(), L.in_c).noalias() = g * W.transpose();
      d = std::move(d_in);
    }
  }
}

template void Network::forward<float>(const float*, const float*, std::optional<double>, ForwardCache<float>&) const;
template void Network::forward<double>(const double*, const double*, std::optional<double>, ForwardCache<double>&) const;
template void Network::backward<float>(const float*, const ForwardCache<float>&, const float*, float*) const;
template void Network::backward<double>(const double*, const ForwardCache<double>&, const double*, double*) const;

std::size_t analytic_param_count(const NetworkSpec& s) {
  std::size_t total = 0;
  std::size_t width = 0;
  if (s.trunk == Trunk::image_cnn) {
    int h = s.input_h, w = s.input_w, c = s.input_c;
    for (const auto& cs : s.convs) {
      total += static_cast<std::size_t>(cs.kernel * cs.kernel * c + 1) * cs.out_channels;
      h = (h + cs.stride - 1) / cs.stride;
      w = (w + cs.stride - 1) / cs.stride;
      c = cs.out_channels;
    }
    width = static_cast<std::size_t>(h) * w * c;
  } else {
    width = static_cast<std::size_t>(s.bbox_inputs);
  }
  if (s.ci_injection) width += 1;
  for (int f : s.fc) {
    total += (width + 1) * static_cast<std::size_t>(f);
    width = static_cast<std::size_t>(f);
  }
  std::size_t outs = 0;
  switch (s.heads) {
    case HeadSet::policy_value: outs = 10; break;
    case HeadSet::policy: outs = 9; break;
    case HeadSet::relloc: outs = 3; break;
    case HeadSet::detector: outs = 4; break;
  }
  total += (width + 1) * outs;
  return total;
}

// ---- policy heads ----

void softmax3(const double* z, double* p) {
  const double m = std::max({z[0], z[1], z[2]});
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    p[k] = std::exp(z[k] - m);
    s += p[k];
  }
  for (int k = 0; k < 3; ++k) p[k] /= s;
}

HeadStats action_logprob_entropy(const double* logits, const int* action) {
  HeadStats st;
  for (int h = 0; h < 3; ++h) {
    const double* z = logits + 3 * h;
    const double m = std::max({z[0], z[1], z[2]});
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m));
    st.logprob += z[action[h]] - lse;
    for (int k = 0; k < 3; ++k) {
      const double lp = z[k] - lse;
      st.entropy -= std::exp(lp) * lp;
    }
  }
  return st;
}

void logprob_entropy_grad(const double* logits, const int* action, double* d_logprob, double* d_entropy) {
  for (int h = 0; h < 3; ++h) {
    double p[3];
    softmax3(logits + 3 * h, p);
    double H = 0.0;
    double lp[3];
    for (int k = 0; k < 3; ++k) {
      lp[k] = std::log(std::max(p[k], 1e-300));
      H -= p[k] * lp[k];
    }
    for (int k = 0; k < 3; ++k) {
      d_logprob[3 * h + k] = (k == action[h] ? 1.0 : 0.0) - p[k];
      d_entropy[3 * h + k] = -p[k] * (lp[k] + H);
    }
  }
}

// ---- optimizer ----

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& opt, double lr) {
  if (grads.size() != params.size() || opt.m.size() != params.size())
    throw std::invalid_argument("adam_step: length mismatch");
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grads[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grads[i] * grads[i];
    const double mhat = opt.m[i] / bc1;
    const double vhat = opt.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

double clip_grad_norm(std::vector<double>& grads, double max_norm) {
  double ss = 0.0;
  for (double g : grads) ss += g * g;
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

}  // namespace ptz
