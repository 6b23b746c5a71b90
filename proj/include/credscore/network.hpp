#ifndef CREDSCORE_NETWORK_HPP
#define CREDSCORE_NETWORK_HPP

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "credscore/features.hpp"

namespace credscore {

inline constexpr int kConvKernel = 10;
inline constexpr int kConvStride = 5;
inline constexpr int kHiddenLayers = 6;

struct NetworkHyper {
  int image_rows = 15;
  int conv_filters = 4;
  int conv_kernel = kConvKernel;
  int conv_stride = kConvStride;
  std::array<int, kHiddenLayers> widths{64, 32, 16, 16, 16, 8};  // fc1..fc6
  std::uint64_t seed = 7;

  int input_size() const { return image_rows * kImageCols; }
  // Valid-padding positions of the 1-D convolution over the flattened image.
  int conv_positions() const { return (input_size() - conv_kernel) / conv_stride + 1; }
  int conv_output_size() const { return conv_filters * conv_positions(); }
  void validate() const;

  bool operator==(const NetworkHyper&) const = default;
};

// Affine map stored as an out x in row-major weight matrix.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  double w(int o, int i) const { return weight[static_cast<std::size_t>(o * in + i)]; }
  bool operator==(const DenseLayer&) const = default;
};

struct NetworkParams {
  NetworkHyper hyper;
  std::vector<double> conv_weight;  // filters x kernel
  std::vector<double> conv_bias;    // filters
  std::array<DenseLayer, kHiddenLayers> fc;  // fc1..fc6
  DenseLayer output;                // fc6 -> scalar

  // Every tensor, in a fixed order: conv weight, conv bias, fc1 W, fc1 b, ...,
  // output W, output b.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  static std::vector<std::string> tensor_names();
  std::size_t parameter_count() const;

  // Same shapes, all zeros.
  static NetworkParams zeros(const NetworkHyper& hyper);

  bool operator==(const NetworkParams&) const = default;
};

struct ForwardTrace {
  std::vector<double> conv1;  // filter-major: conv1[f * positions + p]
  std::array<std::vector<double>, kHiddenLayers> fc;
  double output = 0.0;
};

struct ForwardResult {
  double score;
  ForwardTrace trace;
};

struct Gradients {
  NetworkParams params;
  double data1_norm = 0.0;
  std::vector<double> image;  // d loss / d pixel, row-major
};

// Glorot-uniform weights from the hyper seed; zero biases.
NetworkParams init_params(const NetworkHyper& hyper);

// conv1 = tanh(conv(x)), fc1..fc3 = tanh chain on x, fc4 = tanh on
// [data1_norm, fc3], fc5 = tanh on [conv1, fc4], fc6 = sigmoid,
// output = sigmoid. Throws Error(Errc::shape_mismatch).
ForwardResult forward(const NetworkParams& params, const FeatureImage& image, double data1_norm);

// Exact gradient of (score - target)^2.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const FeatureImage& image, double data1_norm, double target);

double loss(double score, double rating);

// Column sums of the fc1 weight matrix, one per pixel, in image layout.
FeatureImage sum_first_layer_weights(const NetworkParams& params);

void save_params(std::ostream& os, const NetworkParams& params);
NetworkParams load_params(std::istream& is);

// Central-difference check of backward() on one example. Relative error per
// coordinate is |a - n| / max(|a|, |n|, floor).
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};
GradCheckResult gradient_check(const NetworkParams& params, const FeatureImage& image,
                               double data1_norm, double target, double epsilon = 1e-5,
                               double floor = 1e-6);

}  // namespace credscore

#endif
