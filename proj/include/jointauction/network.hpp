#pragma once

// Architecture descriptor and trainable parameters of the allocation and
// payment networks.

#include <Eigen/Dense>
#include <cstdint>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jointauction/core.hpp"
#include "jointauction/sampling.hpp"

namespace jointauction {

/// Which candidates compete for slots.
///  joint      - every (store, brand) cell of the relation matrix, masked by it
///  stores     - each store alone, brands never allocated (RegretNet baseline)
///  singletons - each store and each brand alone (IRegNet baseline)
enum class BundleLayout : std::uint32_t { joint = 0, stores = 1, singletons = 2 };

enum class Activation : std::uint32_t { tanh = 0, relu = 1 };

inline std::string to_string(BundleLayout layout) {
  switch (layout) {
    case BundleLayout::joint: return "joint";
    case BundleLayout::stores: return "stores";
    case BundleLayout::singletons: return "singletons";
  }
  return "?";
}

inline std::string to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

struct ArchitectureSpec {
  std::size_t stores = 0;
  std::size_t brands = 0;
  std::size_t slots = 0;
  BundleLayout layout = BundleLayout::joint;
  std::vector<std::size_t> alloc_hidden{100, 100};
  std::vector<std::size_t> pay_hidden{100, 100};
  Activation activation = Activation::tanh;

  std::size_t bidders() const { return stores + brands; }

  /// Padded bundle capacity (m * n for the joint layout).
  std::size_t bundle_capacity() const {
    switch (layout) {
      case BundleLayout::joint: return stores * brands;
      case BundleLayout::stores: return stores;
      case BundleLayout::singletons: return stores + brands;
    }
    return 0;
  }

  /// Expected bids (bidder-major) followed by the flattened relation.
  std::size_t input_size() const { return bidders() * slots + stores * brands; }
  std::size_t alloc_output_size() const {
    return 2 * bundle_capacity() * (slots + 1);
  }
  std::size_t pay_input_size() const { return input_size() + bidders() * slots; }

  /// Bidders belonging to each bundle slot of the padded capacity.
  std::vector<std::vector<std::size_t>> bundle_members() const {
    std::vector<std::vector<std::size_t>> members;
    switch (layout) {
      case BundleLayout::joint:
        for (std::size_t i = 0; i < stores; ++i)
          for (std::size_t j = 0; j < brands; ++j) members.push_back({i, stores + j});
        break;
      case BundleLayout::stores:
        for (std::size_t i = 0; i < stores; ++i) members.push_back({i});
        break;
      case BundleLayout::singletons:
        for (std::size_t t = 0; t < bidders(); ++t) members.push_back({t});
        break;
    }
    return members;
  }

  /// Bidders that appear in at least one candidate bundle.
  std::vector<std::size_t> participants() const {
    std::vector<std::size_t> out;
    const std::size_t count = layout == BundleLayout::stores ? stores : bidders();
    for (std::size_t t = 0; t < count; ++t) out.push_back(t);
    return out;
  }

  void validate() const {
    if (stores == 0 || brands == 0 || slots == 0)
      throw Error("architecture needs m, n, K >= 1");
    for (auto w : alloc_hidden)
      if (w == 0) throw Error("hidden widths must be >= 1");
    for (auto w : pay_hidden)
      if (w == 0) throw Error("hidden widths must be >= 1");
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

using DenseStack = std::vector<DenseLayer>;

namespace detail {

inline DenseStack make_stack(std::size_t in, const std::vector<std::size_t>& hidden,
                             std::size_t out) {
  DenseStack stack;
  std::size_t prev = in;
  auto add = [&](std::size_t width) {
    stack.push_back({Eigen::MatrixXd::Zero(width, prev), Eigen::VectorXd::Zero(width)});
    prev = width;
  };
  for (auto w : hidden) add(w);
  add(out);
  return stack;
}

}  // namespace detail

struct NetworkParams {
  ArchitectureSpec spec;
  DenseStack alloc;
  DenseStack pay;

  static NetworkParams zeros(const ArchitectureSpec& spec) {
    spec.validate();
    NetworkParams p;
    p.spec = spec;
    p.alloc = detail::make_stack(spec.input_size(), spec.alloc_hidden,
                                 spec.alloc_output_size());
    p.pay = detail::make_stack(spec.pay_input_size(), spec.pay_hidden, spec.bidders());
    return p;
  }

  /// Zero biases, Gaussian weights with standard deviation 1/sqrt(fan-in).
  static NetworkParams initialize(const ArchitectureSpec& spec, Rng& rng) {
    NetworkParams p = zeros(spec);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](DenseStack& stack) {
      for (auto& layer : stack) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
          for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            layer.weight(r, c) = scale * normal(rng);
      }
    };
    fill(p.alloc);
    fill(p.pay);
    return p;
  }

  /// Every weight and bias array in declared order: allocation layers then
  /// payment layers, each as weight then bias.
  std::vector<std::span<double>> tensors() {
    std::vector<std::span<double>> out;
    for (auto* stack : {&alloc, &pay})
      for (auto& layer : *stack) {
        out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
        out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
      }
    return out;
  }
  std::vector<std::span<const double>> tensors() const {
    std::vector<std::span<const double>> out;
    for (auto* stack : {&alloc, &pay})
      for (auto& layer : *stack) {
        out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
        out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
      }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t d = 0;
    for (auto t : tensors()) d += t.size();
    return d;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for (auto t : tensors())
      for (double x : t) flat(at++) = x;
    return flat;
  }

  void assign(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
      throw Error("parameter vector has the wrong length");
    Eigen::Index at = 0;
    for (auto t : tensors())
      for (double& x : t) x = flat(at++);
  }

  void set_zero() {
    for (auto t : tensors())
      for (double& x : t) x = 0.0;
  }

  bool all_finite() const {
    for (auto t : tensors())
      for (double x : t)
        if (!std::isfinite(x)) return false;
    return true;
  }

  /// Order-sensitive FNV-1a over the raw bytes of every parameter.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto t : tensors())
      for (double x : t) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(&x);
        for (std::size_t i = 0; i < sizeof(double); ++i) {
          h ^= bytes[i];
          h *= 1099511628211ull;
        }
      }
    return h;
  }
};

}  // namespace jointauction
