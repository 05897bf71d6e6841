#ifndef KSRL_NN_HPP
#define KSRL_NN_HPP

#include <span>
#include <string>
#include <vector>

#include "ksrl/mat.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

enum class Activation { Tanh, Relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fixed-topology feed-forward network: affine layers with tanh/relu on hidden
// layers and a linear output layer. This is the only function approximator in
// the project; there is no general autodiff graph.
class Mlp {
 public:
  Mlp() = default;

  // sizes = {input, hidden..., output}. Hidden layers get orthogonal init with
  // gain sqrt(2); the output layer uses orthogonal init scaled by final_gain.
  // Biases start at zero.
  static Mlp create(const std::vector<int>& sizes, Activation act, Rng& rng,
                    double final_gain = 1.0);

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation activation() const { return activation_; }

  Vec forward(std::span<const double> x) const;

  // Layer activations kept around for the backward pass. post[0] is the input,
  // post[l+1] the output of layer l (after activation).
  struct Trace {
    std::vector<Vec> pre;
    std::vector<Vec> post;
  };
  Vec forward(std::span<const double> x, Trace& trace) const;

  struct Gradients {
    std::vector<Mat> d_weights;
    std::vector<Vec> d_biases;
    Vec d_input;

    Vec flatten() const;  // same ordering as Mlp parameter flattening
  };

  // Exact reverse-mode gradients of <upstream, forward(x)> with respect to all
  // parameters and the input.
  Gradients backward(const Trace& trace, std::span<const double> upstream) const;

  Gradients zero_gradients() const;
  static void accumulate(Gradients& acc, const Gradients& g);
  static void scale(Gradients& g, double factor);

  size_t param_count() const;
  Vec get_params() const;  // per layer: weights row-major, then bias
  void set_params(std::span<const double> flat);
  bool params_finite() const;

  const Mat& weight(int layer) const { return weights_[layer]; }
  const Vec& bias(int layer) const { return biases_[layer]; }
  Mat& weight(int layer) { return weights_[layer]; }
  Vec& bias(int layer) { return biases_[layer]; }

 private:
  std::vector<int> layer_sizes_;
  std::vector<Mat> weights_;  // weights_[l]: out x in
  std::vector<Vec> biases_;
  Activation activation_ = Activation::Tanh;
};

// Adam with bias correction over a flat parameter vector.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Vec m;
  Vec v;
};

AdamState make_adam(size_t n_params, double lr);

// Throws std::invalid_argument on non-finite gradients (the update is
// rejected; params and state are left untouched). Parameters are checked to
// be finite after the step.
void adam_step(AdamState& state, Vec& params, std::span<const double> grads);

// Scales grads in place so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(std::span<double> grads, double max_norm);

// Versioned text checkpoint: layer sizes + row-major parameter arrays.
void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

}  // namespace ksrl

#endif  // KSRL_NN_HPP
