#include "credscore/network.hpp"

#include <algorithm>
#include <cmath>

#include "credscore/binary_io.hpp"
#include "credscore/error.hpp"
#include "credscore/random.hpp"

namespace credscore {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DenseLayer make_layer(int in, int out) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.weight.assign(static_cast<std::size_t>(in) * static_cast<std::size_t>(out), 0.0);
  l.bias.assign(static_cast<std::size_t>(out), 0.0);
  return l;
}

// (W in + b)[o], summed in four interleaved lanes
double affine_row(const DenseLayer& l, std::span<const double> in, int o) {
  const double* row = &l.weight[static_cast<std::size_t>(o * l.in)];
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= l.in; i += 4) {
    s0 += row[i] * in[i];
    s1 += row[i + 1] * in[i + 1];
    s2 += row[i + 2] * in[i + 2];
    s3 += row[i + 3] * in[i + 3];
  }
  for (; i < l.in; ++i) s0 += row[i] * in[i];
  return l.bias[o] + ((s0 + s1) + (s2 + s3));
}

double activate(int layer, double v) { return layer == kHiddenLayers - 1 ? sigmoid(v) : std::tanh(v); }

// Input of hidden layer l: x for fc1, [data1_norm, fc3] for fc4, [conv1, fc4]
// for fc5, otherwise the previous layer. buf backs the concatenated inputs.
std::span<const double> layer_input(const ForwardTrace& t, std::span<const double> x, double data1_norm, int l,
                                    std::vector<double>& buf) {
  switch (l) {
    case 0:
      return x;
    case 3:
      buf.assign(1, data1_norm);
      buf.insert(buf.end(), t.fc[2].begin(), t.fc[2].end());
      return buf;
    case 4:
      buf.assign(t.conv1.begin(), t.conv1.end());
      buf.insert(buf.end(), t.fc[3].begin(), t.fc[3].end());
      return buf;
    default:
      return t.fc[static_cast<std::size_t>(l - 1)];
  }
}

void conv_filter(const NetworkParams& p, std::span<const double> x, int f, std::vector<double>& conv1) {
  const auto& h = p.hyper;
  const int P = h.conv_positions();
  const double* kernel = &p.conv_weight[static_cast<std::size_t>(f * h.conv_kernel)];
  for (int q = 0; q < P; ++q) {
    double s = p.conv_bias[f];
    const double* window = &x[static_cast<std::size_t>(q * h.conv_stride)];
    for (int j = 0; j < h.conv_kernel; ++j) s += kernel[j] * window[j];
    conv1[static_cast<std::size_t>(f * P + q)] = std::tanh(s);
  }
}

// Recomputes hidden layers from index `from` on, then the output. Earlier
// trace entries are kept.
void propagate(const NetworkParams& p, std::span<const double> x, double data1_norm, ForwardTrace& t, int from) {
  std::vector<double> buf;
  for (int l = from; l < kHiddenLayers; ++l) {
    const auto in = layer_input(t, x, data1_norm, l, buf);
    auto& out = t.fc[static_cast<std::size_t>(l)];
    for (int o = 0; o < p.fc[l].out; ++o) out[static_cast<std::size_t>(o)] = activate(l, affine_row(p.fc[l], in, o));
  }
  t.output = sigmoid(affine_row(p.output, t.fc[kHiddenLayers - 1], 0));
}

// Accumulates parameter gradients for one layer given its pre-activation
// delta, and adds W^T delta into d_in.
void affine_backward(const DenseLayer& l, DenseLayer& g, std::span<const double> in,
                     std::span<const double> delta, std::span<double> d_in) {
  for (int o = 0; o < l.out; ++o) {
    const double d = delta[o];
    g.bias[o] += d;
    if (d == 0.0) continue;
    const double* row = &l.weight[static_cast<std::size_t>(o * l.in)];
    double* grow = &g.weight[static_cast<std::size_t>(o * l.in)];
    for (int i = 0; i < l.in; ++i) {
      grow[i] += d * in[i];
      d_in[i] += row[i] * d;
    }
  }
}

void check_image(const NetworkHyper& h, const FeatureImage& image) {
  if (image.rows() != h.image_rows || image.cols() != kImageCols) {
    throw Error(Errc::shape_mismatch,
                "image is " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                    ", network expects " + std::to_string(h.image_rows) + "x" +
                    std::to_string(kImageCols));
  }
}

void check_shapes(const NetworkParams& p) {
  const auto& h = p.hyper;
  bool ok = p.conv_weight.size() == static_cast<std::size_t>(h.conv_filters * h.conv_kernel) &&
            p.conv_bias.size() == static_cast<std::size_t>(h.conv_filters);
  const std::array<int, kHiddenLayers> ins{h.input_size(), h.widths[0], h.widths[1],
                                           h.widths[2] + 1, h.conv_output_size() + h.widths[3],
                                           h.widths[4]};
  for (int l = 0; l < kHiddenLayers; ++l) {
    const auto& fc = p.fc[l];
    ok = ok && fc.in == ins[l] && fc.out == h.widths[l] &&
         fc.weight.size() == static_cast<std::size_t>(fc.in * fc.out) &&
         fc.bias.size() == static_cast<std::size_t>(fc.out);
  }
  ok = ok && p.output.in == h.widths[5] && p.output.out == 1 &&
       p.output.weight.size() == static_cast<std::size_t>(h.widths[5]) && p.output.bias.size() == 1;
  if (!ok) throw Error(Errc::shape_mismatch, "network parameters do not match their hyperparameters");
}

}  // namespace

void NetworkHyper::validate() const {
  if (image_rows < 1) throw Error(Errc::invalid_argument, "network: image_rows must be >= 1");
  if (conv_kernel != kConvKernel || conv_stride != kConvStride) {
    throw Error(Errc::invalid_argument, "network: convolution kernel is fixed at 10, stride 5");
  }
  if (input_size() < conv_kernel) {
    throw Error(Errc::invalid_argument, "network: image smaller than the convolution kernel");
  }
  if (conv_filters < 1) throw Error(Errc::invalid_argument, "network: conv_filters must be >= 1");
  for (int w : widths) {
    if (w < 1) throw Error(Errc::invalid_argument, "network: layer widths must be >= 1");
  }
}

NetworkParams NetworkParams::zeros(const NetworkHyper& h) {
  h.validate();
  NetworkParams p;
  p.hyper = h;
  p.conv_weight.assign(static_cast<std::size_t>(h.conv_filters * h.conv_kernel), 0.0);
  p.conv_bias.assign(static_cast<std::size_t>(h.conv_filters), 0.0);
  p.fc[0] = make_layer(h.input_size(), h.widths[0]);
  p.fc[1] = make_layer(h.widths[0], h.widths[1]);
  p.fc[2] = make_layer(h.widths[1], h.widths[2]);
  p.fc[3] = make_layer(h.widths[2] + 1, h.widths[3]);
  p.fc[4] = make_layer(h.conv_output_size() + h.widths[3], h.widths[4]);
  p.fc[5] = make_layer(h.widths[4], h.widths[5]);
  p.output = make_layer(h.widths[5], 1);
  return p;
}

std::vector<std::span<double>> NetworkParams::tensors() {
  std::vector<std::span<double>> t{conv_weight, conv_bias};
  for (auto& l : fc) {
    t.emplace_back(l.weight);
    t.emplace_back(l.bias);
  }
  t.emplace_back(output.weight);
  t.emplace_back(output.bias);
  return t;
}

std::vector<std::span<const double>> NetworkParams::tensors() const {
  std::vector<std::span<const double>> t{conv_weight, conv_bias};
  for (const auto& l : fc) {
    t.emplace_back(l.weight);
    t.emplace_back(l.bias);
  }
  t.emplace_back(output.weight);
  t.emplace_back(output.bias);
  return t;
}

std::vector<std::string> NetworkParams::tensor_names() {
  std::vector<std::string> names{"conv1.weight", "conv1.bias"};
  for (int l = 1; l <= kHiddenLayers; ++l) {
    names.push_back("fc" + std::to_string(l) + ".weight");
    names.push_back("fc" + std::to_string(l) + ".bias");
  }
  names.push_back("output.weight");
  names.push_back("output.bias");
  return names;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

NetworkParams init_params(const NetworkHyper& hyper) {
  NetworkParams p = NetworkParams::zeros(hyper);
  Rng rng(hyper.seed);
  auto fill = [&](std::vector<double>& w, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w) v = (2.0 * uniform01(rng) - 1.0) * limit;
  };
  fill(p.conv_weight, hyper.conv_kernel, hyper.conv_kernel * hyper.conv_filters);
  for (auto& l : p.fc) fill(l.weight, l.in, l.out);
  fill(p.output.weight, p.output.in, p.output.out);
  return p;
}

ForwardResult forward(const NetworkParams& params, const FeatureImage& image, double data1_norm) {
  check_shapes(params);
  const auto& h = params.hyper;
  check_image(h, image);
  const auto x = image.pixels();

  ForwardResult r{0.0, {}};
  auto& t = r.trace;
  t.conv1.resize(static_cast<std::size_t>(h.conv_output_size()));
  for (int f = 0; f < h.conv_filters; ++f) conv_filter(params, x, f, t.conv1);
  for (int l = 0; l < kHiddenLayers; ++l) t.fc[l].resize(static_cast<std::size_t>(h.widths[l]));
  propagate(params, x, data1_norm, t, 0);
  r.score = t.output;
  return r;
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const FeatureImage& image, double data1_norm, double target) {
  check_shapes(params);
  const auto& h = params.hyper;
  check_image(h, image);
  bool trace_ok = trace.conv1.size() == static_cast<std::size_t>(h.conv_output_size());
  for (int l = 0; l < kHiddenLayers; ++l) {
    trace_ok = trace_ok && trace.fc[l].size() == static_cast<std::size_t>(h.widths[l]);
  }
  if (!trace_ok) throw Error(Errc::shape_mismatch, "forward trace does not match the parameters");

  Gradients g;
  g.params = NetworkParams::zeros(h);
  auto& gp = g.params;
  const auto x = image.pixels();
  g.image.assign(x.size(), 0.0);

  const double s = trace.output;
  const double delta_out = 2.0 * (s - target) * s * (1.0 - s);

  std::vector<double> d6(trace.fc[5].size(), 0.0);
  affine_backward(params.output, gp.output, trace.fc[5], std::span<const double>(&delta_out, 1), d6);
  for (std::size_t i = 0; i < d6.size(); ++i) d6[i] *= trace.fc[5][i] * (1.0 - trace.fc[5][i]);

  std::vector<double> d5(trace.fc[4].size(), 0.0);
  affine_backward(params.fc[5], gp.fc[5], trace.fc[4], d6, d5);
  for (std::size_t i = 0; i < d5.size(); ++i) d5[i] *= 1.0 - trace.fc[4][i] * trace.fc[4][i];

  // fc5 input = [conv1, fc4]
  std::vector<double> in5(trace.conv1);
  in5.insert(in5.end(), trace.fc[3].begin(), trace.fc[3].end());
  std::vector<double> d_in5(in5.size(), 0.0);
  affine_backward(params.fc[4], gp.fc[4], in5, d5, d_in5);
  const std::size_t nconv = trace.conv1.size();

  std::vector<double> d4(trace.fc[3].size());
  for (std::size_t i = 0; i < d4.size(); ++i) {
    d4[i] = d_in5[nconv + i] * (1.0 - trace.fc[3][i] * trace.fc[3][i]);
  }

  // fc4 input = [data1_norm, fc3]
  std::vector<double> in4;
  in4.reserve(trace.fc[2].size() + 1);
  in4.push_back(data1_norm);
  in4.insert(in4.end(), trace.fc[2].begin(), trace.fc[2].end());
  std::vector<double> d_in4(in4.size(), 0.0);
  affine_backward(params.fc[3], gp.fc[3], in4, d4, d_in4);
  g.data1_norm = d_in4[0];

  std::vector<double> d3(trace.fc[2].size());
  for (std::size_t i = 0; i < d3.size(); ++i) {
    d3[i] = d_in4[i + 1] * (1.0 - trace.fc[2][i] * trace.fc[2][i]);
  }
  std::vector<double> d2(trace.fc[1].size(), 0.0);
  affine_backward(params.fc[2], gp.fc[2], trace.fc[1], d3, d2);
  for (std::size_t i = 0; i < d2.size(); ++i) d2[i] *= 1.0 - trace.fc[1][i] * trace.fc[1][i];

  std::vector<double> d1(trace.fc[0].size(), 0.0);
  affine_backward(params.fc[1], gp.fc[1], trace.fc[0], d2, d1);
  for (std::size_t i = 0; i < d1.size(); ++i) d1[i] *= 1.0 - trace.fc[0][i] * trace.fc[0][i];

  affine_backward(params.fc[0], gp.fc[0], x, d1, g.image);

  // conv1 branch
  const int P = h.conv_positions();
  for (int f = 0; f < h.conv_filters; ++f) {
    const double* kernel = &params.conv_weight[static_cast<std::size_t>(f * h.conv_kernel)];
    double* gkernel = &gp.conv_weight[static_cast<std::size_t>(f * h.conv_kernel)];
    for (int p = 0; p < P; ++p) {
      const auto idx = static_cast<std::size_t>(f * P + p);
      const double a = trace.conv1[idx];
      const double delta = d_in5[idx] * (1.0 - a * a);
      gp.conv_bias[f] += delta;
      const auto base = static_cast<std::size_t>(p * h.conv_stride);
      for (int j = 0; j < h.conv_kernel; ++j) {
        gkernel[j] += delta * x[base + j];
        g.image[base + j] += kernel[j] * delta;
      }
    }
  }
  return g;
}

double loss(double score, double rating) {
  const double d = score - rating;
  return d * d;
}

FeatureImage sum_first_layer_weights(const NetworkParams& params) {
  check_shapes(params);
  const auto& fc1 = params.fc[0];
  FeatureImage out(params.hyper.image_rows, kImageCols);
  auto px = out.pixels();
  for (int o = 0; o < fc1.out; ++o) {
    for (int i = 0; i < fc1.in; ++i) px[i] += fc1.w(o, i);
  }
  return out;
}

namespace {
constexpr char kNetMagic[9] = "CSNETPRM";
constexpr std::uint32_t kNetVersion = 1;
}  // namespace

void save_params(std::ostream& os, const NetworkParams& p) {
  using namespace binary;
  check_shapes(p);
  write_magic(os, kNetMagic, kNetVersion);
  const auto& h = p.hyper;
  write_u32(os, static_cast<std::uint32_t>(h.image_rows));
  write_u32(os, static_cast<std::uint32_t>(h.conv_filters));
  write_u32(os, static_cast<std::uint32_t>(h.conv_kernel));
  write_u32(os, static_cast<std::uint32_t>(h.conv_stride));
  for (int w : h.widths) write_u32(os, static_cast<std::uint32_t>(w));
  write_u64(os, h.seed);
  for (auto t : p.tensors()) write_f64s(os, t);
  if (!os) throw Error(Errc::io, "failed writing network parameters");
}

NetworkParams load_params(std::istream& is) {
  using namespace binary;
  expect_magic(is, kNetMagic, kNetVersion);
  NetworkHyper h;
  h.image_rows = static_cast<int>(read_u32(is));
  h.conv_filters = static_cast<int>(read_u32(is));
  h.conv_kernel = static_cast<int>(read_u32(is));
  h.conv_stride = static_cast<int>(read_u32(is));
  for (auto& w : h.widths) w = static_cast<int>(read_u32(is));
  h.seed = read_u64(is);
  constexpr int kMaxDim = 1 << 16;
  if (h.image_rows > kMaxDim || h.conv_filters > kMaxDim ||
      std::any_of(h.widths.begin(), h.widths.end(), [](int w) { return w > kMaxDim; })) {
    throw Error(Errc::format, "network dump has out-of-range dimensions");
  }
  NetworkParams p = NetworkParams::zeros(h);
  for (auto t : p.tensors()) {
    auto v = read_f64s(is, t.size());
    if (v.size() != t.size()) throw Error(Errc::format, "network dump tensor has wrong length");
    std::copy(v.begin(), v.end(), t.begin());
  }
  return p;
}

GradCheckResult gradient_check(const NetworkParams& params, const FeatureImage& image,
                               double data1_norm, double target, double epsilon, double floor) {
  const auto fwd = forward(params, image, data1_norm);
  const auto grads = backward(params, fwd.trace, image, data1_norm, target);

  GradCheckResult res;
  auto consider = [&](double analytic, double numeric, const std::string& name) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (res.checked == 0 || rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_tensor = name;
    }
    ++res.checked;
  };

  // Rescores from the cached trace, recomputing only what the perturbed
  // parameter feeds; the result equals a full forward() bit for bit.
  const auto x = image.pixels();
  const auto& h = params.hyper;
  NetworkParams probe = params;
  ForwardTrace scratch;
  std::vector<double> buf;
  auto rescore = [&](std::size_t t, std::size_t i) {
    scratch = fwd.trace;
    if (t < 2) {
      const auto f = t == 0 ? i / static_cast<std::size_t>(h.conv_kernel) : i;
      conv_filter(probe, x, static_cast<int>(f), scratch.conv1);
      propagate(probe, x, data1_norm, scratch, 4);
    } else if (t < 2 + 2 * kHiddenLayers) {
      const int l = static_cast<int>((t - 2) / 2);
      const auto& layer = probe.fc[l];
      const auto o = t % 2 == 0 ? i / static_cast<std::size_t>(layer.in) : i;
      scratch.fc[l][o] = activate(l, affine_row(layer, layer_input(scratch, x, data1_norm, l, buf), static_cast<int>(o)));
      propagate(probe, x, data1_norm, scratch, l + 1);
    } else {
      propagate(probe, x, data1_norm, scratch, kHiddenLayers);
    }
    return loss(scratch.output, target);
  };

  auto probe_tensors = probe.tensors();
  const auto grad_tensors = grads.params.tensors();
  const auto names = NetworkParams::tensor_names();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    auto tensor = probe_tensors[t];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + epsilon;
      const double up = rescore(t, i);
      tensor[i] = saved - epsilon;
      const double down = rescore(t, i);
      tensor[i] = saved;
      consider(grad_tensors[t][i], (up - down) / (2.0 * epsilon), names[t]);
    }
  }
  const double up = loss(forward(params, image, data1_norm + epsilon).score, target);
  const double down = loss(forward(params, image, data1_norm - epsilon).score, target);
  consider(grads.data1_norm, (up - down) / (2.0 * epsilon), "data1_norm");
  return res;
}

}  // namespace credscore
