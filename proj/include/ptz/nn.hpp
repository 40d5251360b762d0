#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ptz/rng.hpp"

namespace ptz {

enum class Trunk : std::uint8_t { image_cnn = 0, bbox_mlp = 1 };
enum class HeadSet : std::uint8_t { policy_value = 0, policy = 1, relloc = 2, detector = 3 };

struct ConvSpec {
  int kernel = 3;
  int out_channels = 1;
  int stride = 1;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct NetworkSpec {
  Trunk trunk = Trunk::image_cnn;
  bool ci_injection = false;
  HeadSet heads = HeadSet::policy_value;
  int input_w = 120;
  int input_h = 120;
  int input_c = 1;
  std::vector<ConvSpec> convs;
  std::vector<int> fc;
  int bbox_inputs = 4;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

  /// Four strided convolutions (5x5x64, 3x3x32, 3x3x32, 3x3x16) then fc 64-64-64.
  static NetworkSpec image(HeadSet heads, bool ci = false);
  /// fc 64-64 over [xmin, ymin, xmax, ymax].
  static NetworkSpec bbox(HeadSet heads, bool ci = false);
};

std::string describe(const NetworkSpec& spec);
int head_output_count(HeadSet heads);
bool has_policy(HeadSet heads);
bool has_value(HeadSet heads);
int input_size(const NetworkSpec& spec);

inline constexpr int kPolicyLogits = 9;  // three 3-way heads: pan, tilt, zoom

/// "Same" padding with output ceil(in / stride).
int conv_out_size(int in, int stride);
int conv_pad_before(int in, int kernel, int stride);

struct LayerInfo {
  enum class Kind { conv, fc, head } kind = Kind::fc;
  int in_h = 1, in_w = 1, in_c = 0;  // conv geometry; fc uses in_c as input width
  int out_h = 1, out_w = 1, out_c = 0;
  int kernel = 1, stride = 1, pad_top = 0, pad_left = 0;
  bool relu = true;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t weight_count() const;
  std::size_t param_count() const { return weight_count() + static_cast<std::size_t>(out_c); }
};

/// Eigen-aligned storage for network inputs, parameters and caches.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct ForwardCache {
  std::vector<AlignedVector<T>> inputs;  // input activation of each layer
  std::vector<AlignedVector<T>> cols;    // im2col matrix of conv layers
  AlignedVector<T> trunk_out;            // last hidden activation
  AlignedVector<T> outputs;
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  std::size_t param_count() const { return param_count_; }
  int output_count() const { return head_output_count(spec_.heads); }
  int trunk_width() const;

  /// Fan-in scaled uniform weights, zero biases; the policy head is scaled by 0.01.
  std::vector<double> init_params(std::uint64_t seed) const;

  /// Outputs: policy logits (9) then value (1) for policy_value; regression targets otherwise.
  template <typename T>
  void forward(const T* params, const T* input, std::optional<double> ci, ForwardCache<T>& cache) const;

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(outputs).
  template <typename T>
  void backward(const T* params, const ForwardCache<T>& cache, const T* d_outputs, T* grad) const;

 private:
  NetworkSpec spec_;
  std::vector<LayerInfo> layers_;  // trunk layers then head layers
  std::size_t trunk_layers_ = 0;
  std::size_t param_count_ = 0;
};

/// Independent closed-form parameter count of a spec.
std::size_t analytic_param_count(const NetworkSpec& spec);

// ---- policy heads ----

struct HeadStats {
  double logprob = 0.0;
  double entropy = 0.0;
};

/// Softmax of one 3-way head.
void softmax3(const double* logits, double* probs);
/// Joint log-probability and entropy of the three independent heads. `action` is three indices in {0,1,2}.
HeadStats action_logprob_entropy(const double* logits, const int* action);
/// Gradients w.r.t. the 9 logits of logprob(action) and of the entropy.
void logprob_entropy_grad(const double* logits, const int* action, double* d_logprob, double* d_entropy);

// ---- Adam ----

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& opt, double lr);

/// Scales `grads` so that their L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_grad_norm(std::vector<double>& grads, double max_norm);

}  // namespace ptz
