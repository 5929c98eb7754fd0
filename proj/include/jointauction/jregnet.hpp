#pragma once

// Batched JRegNet forward map and its exact reverse-mode derivative.
//
// Every matrix holds one bid profile per column. Within a column:
//   features   bidders*K expected bids (t*K + k), then the m*n relation cells
//   logits     C block q*(K+1) + k, then R block with the same layout
//   A          q*(K+1) + k, column K is the unallocated (dummy) probability
//   S          t*K + k

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "jointauction/core.hpp"
#include "jointauction/exact.hpp"
#include "jointauction/network.hpp"

namespace jointauction {

/// Column-batched bid profiles with their slot CTRs and relation cells.
struct ProfileBatch {
  Eigen::MatrixXd bids;      // bidders x N
  Eigen::MatrixXd ctrs;      // K x N
  Eigen::MatrixXd relation;  // m*n x N, entries 0 or 1

  Eigen::Index size() const { return bids.cols(); }
};

inline ProfileBatch make_batch(std::span<const AuctionSample> samples,
                               const ArchitectureSpec& spec,
                               bool use_values = false) {
  const auto n_cols = static_cast<Eigen::Index>(samples.size());
  ProfileBatch b;
  b.bids.resize(static_cast<Eigen::Index>(spec.bidders()), n_cols);
  b.ctrs.resize(static_cast<Eigen::Index>(spec.slots), n_cols);
  b.relation.resize(static_cast<Eigen::Index>(spec.stores * spec.brands), n_cols);
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    if (s.stores() != spec.stores || s.brands() != spec.brands ||
        s.slots.size() != spec.slots)
      throw Error("sample dimensions do not match the architecture");
    const Profile& p = use_values ? s.truthful() : s.bids;
    for (std::size_t t = 0; t < spec.bidders(); ++t)
      b.bids(static_cast<Eigen::Index>(t), c) = p[t];
    for (std::size_t k = 0; k < spec.slots; ++k)
      b.ctrs(static_cast<Eigen::Index>(k), c) = s.slots[k];
    for (std::size_t i = 0; i < spec.stores; ++i)
      for (std::size_t j = 0; j < spec.brands; ++j)
        b.relation(static_cast<Eigen::Index>(i * spec.brands + j), c) =
            s.relation(i, j) ? 1.0 : 0.0;
  }
  return b;
}

/// Truthful values of the samples, bidders x N.
inline Eigen::MatrixXd value_matrix(std::span<const AuctionSample> samples,
                                    std::size_t bidders) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(bidders),
                    static_cast<Eigen::Index>(samples.size()));
  for (std::size_t l = 0; l < samples.size(); ++l)
    for (std::size_t t = 0; t < bidders; ++t)
      v(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) =
          samples[l].truthful()[t];
  return v;
}

/// Repeats every column once per listed bidder, replacing that bidder's bid
/// in its copy by misreports(bidder, column). Output column index is
/// column * bidders.size() + position of the bidder in the list.
inline ProfileBatch expand_misreports(const ProfileBatch& base,
                                      const Eigen::MatrixXd& misreports,
                                      std::span<const std::size_t> bidders) {
  const auto per = static_cast<Eigen::Index>(bidders.size());
  const Eigen::Index n_cols = base.size() * per;
  ProfileBatch out;
  out.bids.resize(base.bids.rows(), n_cols);
  out.ctrs.resize(base.ctrs.rows(), n_cols);
  out.relation.resize(base.relation.rows(), n_cols);
  for (Eigen::Index l = 0; l < base.size(); ++l)
    for (Eigen::Index p = 0; p < per; ++p) {
      const Eigen::Index c = l * per + p;
      const auto t = static_cast<Eigen::Index>(bidders[static_cast<std::size_t>(p)]);
      out.bids.col(c) = base.bids.col(l);
      out.bids(t, c) = misreports(t, l);
      out.ctrs.col(c) = base.ctrs.col(l);
      out.relation.col(c) = base.relation.col(l);
    }
  return out;
}

/// Column c of `m` repeated `times` times consecutively.
inline Eigen::MatrixXd repeat_columns(const Eigen::MatrixXd& m, Eigen::Index times) {
  Eigen::MatrixXd out(m.rows(), m.cols() * times);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < times; ++r) out.col(c * times + r) = m.col(c);
  return out;
}

/// Features: e_tk = alpha_k * b_t followed by the relation cells.
inline Eigen::MatrixXd build_input(const ProfileBatch& batch, const ArchitectureSpec& spec) {
  const auto bidders = static_cast<Eigen::Index>(spec.bidders());
  const auto k_slots = static_cast<Eigen::Index>(spec.slots);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(spec.input_size()), batch.size());
  for (Eigen::Index t = 0; t < bidders; ++t)
    for (Eigen::Index k = 0; k < k_slots; ++k)
      x.row(t * k_slots + k) = batch.ctrs.row(k).cwiseProduct(batch.bids.row(t));
  x.bottomRows(batch.relation.rows()) = batch.relation;
  return x;
}

inline std::vector<double> build_input(const AuctionSample& sample) {
  ArchitectureSpec spec;
  spec.stores = sample.stores();
  spec.brands = sample.brands();
  spec.slots = sample.slots.size();
  const auto x = build_input(make_batch(std::span(&sample, 1), spec), spec);
  return {x.data(), x.data() + x.size()};
}

/// Activations of a dense stack; activations[0] is the input and the last
/// entry the linear output.
struct StackTrace {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

inline StackTrace run_stack(const DenseStack& stack, Eigen::MatrixXd input,
                            Activation act) {
  StackTrace tr;
  tr.activations.reserve(stack.size() + 1);
  tr.activations.push_back(std::move(input));
  for (std::size_t l = 0; l < stack.size(); ++l) {
    Eigen::MatrixXd z = stack[l].weight * tr.activations.back();
    z.colwise() += stack[l].bias;
    if (l + 1 < stack.size()) {
      if (act == Activation::tanh)
        z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);  // vectorizes, unlike tanh()
      else
        z = z.cwiseMax(0.0);
    }
    tr.activations.push_back(std::move(z));
  }
  return tr;
}

/// Backpropagates d(output) through a stack. Accumulates parameter
/// gradients into `grads` when given; returns d(input) when `want_input`.
inline Eigen::MatrixXd backprop_stack(const DenseStack& stack, const StackTrace& tr,
                                      Eigen::MatrixXd d_out, Activation act,
                                      DenseStack* grads, bool want_input) {
  for (std::size_t l = stack.size(); l-- > 0;) {
    const Eigen::MatrixXd& in = tr.activations[l];
    if (grads) {
      (*grads)[l].weight.noalias() += d_out * in.transpose();
      (*grads)[l].bias += d_out.rowwise().sum();
    }
    if (l == 0 && !want_input) return {};
    Eigen::MatrixXd d_in = stack[l].weight.transpose() * d_out;
    if (l > 0) {
      if (act == Activation::tanh)
        d_in.array() *= 1.0 - in.array().square();
      else
        d_in.array() *= (in.array() > 0.0).cast<double>();
    }
    d_out = std::move(d_in);
  }
  return d_out;
}

/// Validity of each padded bundle row per column (q x N).
inline Eigen::MatrixXd bundle_mask(const ProfileBatch& batch, const ArchitectureSpec& spec) {
  if (spec.layout == BundleLayout::joint) return batch.relation;
  return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(spec.bundle_capacity()),
                               batch.size());
}

struct BistochasticResult {
  Eigen::MatrixXd col_soft;  // q*K x N, softmax down each slot column over valid rows
  Eigen::MatrixXd row_soft;  // q*(K+1) x N, softmax across each valid row
  Eigen::MatrixXd alloc;     // q*(K+1) x N
};

/// a_qk = min(column softmax of C, row softmax of R) on valid rows; the
/// dummy column only enters the row softmax and a_{q,K} = row_soft_{q,K}.
/// Masked rows are excluded from the column softmax (equivalent to a -1e9
/// logit) and their A rows are exactly zero.
inline BistochasticResult bistochastic(const Eigen::MatrixXd& logits,
                                       const Eigen::MatrixXd& mask,
                                       std::size_t capacity, std::size_t slots) {
  const auto q_cap = static_cast<Eigen::Index>(capacity);
  const auto k_slots = static_cast<Eigen::Index>(slots);
  const Eigen::Index width = k_slots + 1;
  const Eigen::Index n_cols = logits.cols();
  BistochasticResult r;
  r.col_soft = Eigen::MatrixXd::Zero(q_cap * k_slots, n_cols);
  r.row_soft = Eigen::MatrixXd::Zero(q_cap * width, n_cols);
  r.alloc = Eigen::MatrixXd::Zero(q_cap * width, n_cols);
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const double* cl = logits.col(c).data();
    const double* rl = cl + q_cap * width;
    const double* valid = mask.col(c).data();
    double* cs = r.col_soft.col(c).data();
    double* rs = r.row_soft.col(c).data();
    double* a = r.alloc.col(c).data();
    for (Eigen::Index k = 0; k < k_slots; ++k) {
      double hi = -std::numeric_limits<double>::infinity();
      for (Eigen::Index q = 0; q < q_cap; ++q)
        if (valid[q] != 0.0) hi = std::max(hi, cl[q * width + k]);
      if (!std::isfinite(hi)) continue;
      double sum = 0.0;
      for (Eigen::Index q = 0; q < q_cap; ++q)
        if (valid[q] != 0.0) sum += (cs[q * k_slots + k] = std::exp(cl[q * width + k] - hi));
      for (Eigen::Index q = 0; q < q_cap; ++q) cs[q * k_slots + k] /= sum;
    }
    for (Eigen::Index q = 0; q < q_cap; ++q) {
      if (valid[q] == 0.0) continue;
      const double* row = rl + q * width;
      double hi = row[0];
      for (Eigen::Index k = 1; k < width; ++k) hi = std::max(hi, row[k]);
      double sum = 0.0;
      for (Eigen::Index k = 0; k < width; ++k) sum += (rs[q * width + k] = std::exp(row[k] - hi));
      for (Eigen::Index k = 0; k < width; ++k) rs[q * width + k] /= sum;
      for (Eigen::Index k = 0; k < k_slots; ++k)
        a[q * width + k] = std::min(cs[q * k_slots + k], rs[q * width + k]);
      a[q * width + k_slots] = rs[q * width + k_slots];
    }
  }
  return r;
}

/// d(A) -> d(logits). Ties in the min take the column branch.
inline Eigen::MatrixXd bistochastic_backward(const BistochasticResult& bs,
                                             const Eigen::MatrixXd& mask,
                                             const Eigen::MatrixXd& d_alloc,
                                             std::size_t capacity, std::size_t slots) {
  const auto q_cap = static_cast<Eigen::Index>(capacity);
  const auto k_slots = static_cast<Eigen::Index>(slots);
  const Eigen::Index width = k_slots + 1;
  const Eigen::Index n_cols = d_alloc.cols();
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(2 * q_cap * width, n_cols);
  std::vector<double> d_cs(static_cast<std::size_t>(q_cap * k_slots));
  std::vector<double> d_rs(static_cast<std::size_t>(q_cap * width));
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const double* valid = mask.col(c).data();
    const double* cs = bs.col_soft.col(c).data();
    const double* rs = bs.row_soft.col(c).data();
    const double* da = d_alloc.col(c).data();
    double* dc = d_logits.col(c).data();
    double* dr = dc + q_cap * width;
    std::fill(d_cs.begin(), d_cs.end(), 0.0);
    std::fill(d_rs.begin(), d_rs.end(), 0.0);
    for (Eigen::Index q = 0; q < q_cap; ++q) {
      if (valid[q] == 0.0) continue;
      for (Eigen::Index k = 0; k < k_slots; ++k) {
        const double g = da[q * width + k];
        if (cs[q * k_slots + k] <= rs[q * width + k])
          d_cs[static_cast<std::size_t>(q * k_slots + k)] += g;
        else
          d_rs[static_cast<std::size_t>(q * width + k)] += g;
      }
      d_rs[static_cast<std::size_t>(q * width + k_slots)] += da[q * width + k_slots];
    }
    for (Eigen::Index k = 0; k < k_slots; ++k) {
      double dot = 0.0;
      for (Eigen::Index q = 0; q < q_cap; ++q)
        if (valid[q] != 0.0) dot += cs[q * k_slots + k] * d_cs[static_cast<std::size_t>(q * k_slots + k)];
      for (Eigen::Index q = 0; q < q_cap; ++q)
        if (valid[q] != 0.0)
          dc[q * width + k] = cs[q * k_slots + k] * (d_cs[static_cast<std::size_t>(q * k_slots + k)] - dot);
    }
    for (Eigen::Index q = 0; q < q_cap; ++q) {
      if (valid[q] == 0.0) continue;
      double dot = 0.0;
      for (Eigen::Index k = 0; k < width; ++k)
        dot += rs[q * width + k] * d_rs[static_cast<std::size_t>(q * width + k)];
      for (Eigen::Index k = 0; k < width; ++k)
        dr[q * width + k] = rs[q * width + k] * (d_rs[static_cast<std::size_t>(q * width + k)] - dot);
    }
  }
  return d_logits;
}

/// S: each bidder's slot probabilities summed over the bundles it belongs to.
inline Eigen::MatrixXd bundle_to_bidder(const Eigen::MatrixXd& alloc,
                                        const ArchitectureSpec& spec) {
  const auto k_slots = static_cast<Eigen::Index>(spec.slots);
  const Eigen::Index width = k_slots + 1;
  const auto members = spec.bundle_members();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.bidders()) * k_slots,
                                            alloc.cols());
  for (std::size_t q = 0; q < members.size(); ++q)
    for (std::size_t t : members[q])
      s.middleRows(static_cast<Eigen::Index>(t) * k_slots, k_slots) +=
          alloc.middleRows(static_cast<Eigen::Index>(q) * width, k_slots);
  return s;
}

inline Eigen::MatrixXd bundle_to_bidder_backward(const Eigen::MatrixXd& d_s,
                                                 const ArchitectureSpec& spec) {
  const auto k_slots = static_cast<Eigen::Index>(spec.slots);
  const Eigen::Index width = k_slots + 1;
  const auto members = spec.bundle_members();
  Eigen::MatrixXd d_a = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(members.size()) * width, d_s.cols());
  for (std::size_t q = 0; q < members.size(); ++q)
    for (std::size_t t : members[q])
      d_a.middleRows(static_cast<Eigen::Index>(q) * width, k_slots) +=
          d_s.middleRows(static_cast<Eigen::Index>(t) * k_slots, k_slots);
  return d_a;
}

struct ForwardTrace {
  Eigen::MatrixXd features;
  StackTrace alloc_net;
  Eigen::MatrixXd mask;
  BistochasticResult bistochastic;
  Eigen::MatrixXd bidder_alloc;    // S
  StackTrace pay_net;              // input is [features; S]
  Eigen::MatrixXd fractions;       // sigmoid outputs
  Eigen::MatrixXd expected_value;  // sum_k s_tk e_tk
  Eigen::MatrixXd payments;

  const Eigen::MatrixXd& logits() const { return alloc_net.output(); }
  const Eigen::MatrixXd& bundle_alloc() const { return bistochastic.alloc; }
};

/// Payment fractions from the payment network over [features; S].
inline StackTrace payment_network(const Eigen::MatrixXd& features,
                                  const Eigen::MatrixXd& bidder_alloc,
                                  const NetworkParams& params) {
  Eigen::MatrixXd in(features.rows() + bidder_alloc.rows(), features.cols());
  in.topRows(features.rows()) = features;
  in.bottomRows(bidder_alloc.rows()) = bidder_alloc;
  return run_stack(params.pay, std::move(in), params.spec.activation);
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

inline ForwardTrace forward(const NetworkParams& params, const ProfileBatch& batch) {
  const auto& spec = params.spec;
  const auto bidders = static_cast<Eigen::Index>(spec.bidders());
  const auto k_slots = static_cast<Eigen::Index>(spec.slots);
  ForwardTrace tr;
  tr.features = build_input(batch, spec);
  tr.alloc_net = run_stack(params.alloc, tr.features, spec.activation);
  tr.mask = bundle_mask(batch, spec);
  tr.bistochastic = bistochastic(tr.alloc_net.output(), tr.mask, spec.bundle_capacity(),
                                 spec.slots);
  tr.bidder_alloc = bundle_to_bidder(tr.bistochastic.alloc, spec);
  tr.pay_net = payment_network(tr.features, tr.bidder_alloc, params);
  tr.fractions = sigmoid(tr.pay_net.output());
  tr.expected_value.resize(bidders, batch.size());
  for (Eigen::Index t = 0; t < bidders; ++t)
    tr.expected_value.row(t) =
        (tr.bidder_alloc.middleRows(t * k_slots, k_slots).array() *
         tr.features.middleRows(t * k_slots, k_slots).array())
            .colwise()
            .sum();
  tr.payments = tr.fractions.cwiseProduct(tr.expected_value);
  return tr;
}

/// Upstream derivatives of a scalar objective with respect to the outputs.
/// Empty matrices stand for zero.
struct OutputGradient {
  Eigen::MatrixXd payments;      // bidders x N
  Eigen::MatrixXd bidder_alloc;  // bidders*K x N
  Eigen::MatrixXd bundle_alloc;  // q*(K+1) x N
};

/// Reverse-mode pass. Parameter gradients are accumulated into `grads`
/// (shaped like the parameters) when non-null; bid gradients (bidders x N)
/// are written to `d_bids` when non-null.
inline void backward(const NetworkParams& params, const ProfileBatch& batch,
                     const ForwardTrace& tr, const OutputGradient& upstream,
                     NetworkParams* grads, Eigen::MatrixXd* d_bids) {
  const auto& spec = params.spec;
  const auto bidders = static_cast<Eigen::Index>(spec.bidders());
  const auto k_slots = static_cast<Eigen::Index>(spec.slots);
  const Eigen::Index n_cols = batch.size();
  const Eigen::Index n_expected = bidders * k_slots;

  Eigen::MatrixXd d_s = upstream.bidder_alloc.size() != 0
                            ? upstream.bidder_alloc
                            : Eigen::MatrixXd::Zero(n_expected, n_cols);
  Eigen::MatrixXd d_features = Eigen::MatrixXd::Zero(tr.features.rows(), n_cols);

  if (upstream.payments.size() != 0) {
    const Eigen::MatrixXd d_fraction = upstream.payments.cwiseProduct(tr.expected_value);
    const Eigen::MatrixXd d_ev = upstream.payments.cwiseProduct(tr.fractions);
    for (Eigen::Index t = 0; t < bidders; ++t) {
      auto rows = Eigen::seqN(t * k_slots, k_slots);
      d_s(rows, Eigen::all).array() +=
          tr.features(rows, Eigen::all).array().rowwise() * d_ev.row(t).array();
      d_features(rows, Eigen::all).array() +=
          tr.bidder_alloc(rows, Eigen::all).array().rowwise() * d_ev.row(t).array();
    }
    const Eigen::MatrixXd d_z =
        d_fraction.cwiseProduct(tr.fractions.cwiseProduct(
            (1.0 - tr.fractions.array()).matrix()));
    const Eigen::MatrixXd d_pay_in = backprop_stack(
        params.pay, tr.pay_net, d_z, spec.activation, grads ? &grads->pay : nullptr, true);
    d_features += d_pay_in.topRows(tr.features.rows());
    d_s += d_pay_in.bottomRows(n_expected);
  }

  Eigen::MatrixXd d_a = bundle_to_bidder_backward(d_s, spec);
  if (upstream.bundle_alloc.size() != 0) d_a += upstream.bundle_alloc;
  const Eigen::MatrixXd d_logits = bistochastic_backward(
      tr.bistochastic, tr.mask, d_a, spec.bundle_capacity(), spec.slots);
  const bool want_input = d_bids != nullptr;
  Eigen::MatrixXd d_alloc_in = backprop_stack(params.alloc, tr.alloc_net, d_logits,
                                              spec.activation,
                                              grads ? &grads->alloc : nullptr, want_input);
  if (!d_bids) return;
  d_features += d_alloc_in;
  d_bids->resize(bidders, n_cols);
  for (Eigen::Index t = 0; t < bidders; ++t)
    d_bids->row(t) = (d_features.middleRows(t * k_slots, k_slots).array() *
                      batch.ctrs.array())
                         .colwise()
                         .sum();
}

/// Utility of the designated bidder of every column (true values given per
/// column) and the matching upstream gradient of sum_c weight_c * u_c.
inline Eigen::VectorXd designated_utilities(const ForwardTrace& tr, const ProfileBatch& batch,
                                            const Eigen::MatrixXd& values,
                                            std::span<const std::size_t> bidder_of_column) {
  const Eigen::Index k_slots = batch.ctrs.rows();
  Eigen::VectorXd u(batch.size());
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    const auto t = static_cast<Eigen::Index>(bidder_of_column[static_cast<std::size_t>(c)]);
    double g = 0.0;
    for (Eigen::Index k = 0; k < k_slots; ++k)
      g += tr.bidder_alloc(t * k_slots + k, c) * batch.ctrs(k, c);
    u(c) = values(t, c) * g - tr.payments(t, c);
  }
  return u;
}

inline OutputGradient designated_utility_gradient(const ProfileBatch& batch,
                                                  const Eigen::MatrixXd& values,
                                                  std::span<const std::size_t> bidder_of_column,
                                                  const Eigen::VectorXd& weights) {
  const Eigen::Index k_slots = batch.ctrs.rows();
  const Eigen::Index bidders = batch.bids.rows();
  OutputGradient g;
  g.payments = Eigen::MatrixXd::Zero(bidders, batch.size());
  g.bidder_alloc = Eigen::MatrixXd::Zero(bidders * k_slots, batch.size());
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    const auto t = static_cast<Eigen::Index>(bidder_of_column[static_cast<std::size_t>(c)]);
    const double w = weights(c);
    if (w == 0.0) continue;
    g.payments(t, c) = -w;
    for (Eigen::Index k = 0; k < k_slots; ++k)
      g.bidder_alloc(t * k_slots + k, c) = w * values(t, c) * batch.ctrs(k, c);
  }
  return g;
}

/// Utility of every bidder in every column, bidders x N.
inline Eigen::MatrixXd all_utilities(const ForwardTrace& tr, const ProfileBatch& batch,
                                     const Eigen::MatrixXd& values) {
  const Eigen::Index k_slots = batch.ctrs.rows();
  const Eigen::Index bidders = batch.bids.rows();
  Eigen::MatrixXd u(bidders, batch.size());
  for (Eigen::Index t = 0; t < bidders; ++t)
    u.row(t) = values.row(t).cwiseProduct(
                   (tr.bidder_alloc.middleRows(t * k_slots, k_slots).array() *
                    batch.ctrs.array())
                       .colwise()
                       .sum()
                       .matrix()) -
               tr.payments.row(t);
  return u;
}

/// Single-sample outcome with A compacted to the valid bundle rows.
inline MechanismOutcome to_outcome(const ForwardTrace& tr, const ArchitectureSpec& spec,
                                   Eigen::Index column = 0) {
  const std::size_t width = spec.slots + 1;
  MechanismOutcome out;
  std::size_t valid = 0;
  for (std::size_t q = 0; q < spec.bundle_capacity(); ++q)
    valid += tr.mask(static_cast<Eigen::Index>(q), column) != 0.0;
  out.bundle_alloc = Grid(valid, width);
  std::size_t row = 0;
  for (std::size_t q = 0; q < spec.bundle_capacity(); ++q) {
    if (tr.mask(static_cast<Eigen::Index>(q), column) == 0.0) continue;
    for (std::size_t k = 0; k < width; ++k)
      out.bundle_alloc(row, k) =
          tr.bundle_alloc()(static_cast<Eigen::Index>(q * width + k), column);
    ++row;
  }
  out.bidder_alloc = Grid(spec.bidders(), spec.slots);
  out.payments.resize(spec.bidders());
  for (std::size_t t = 0; t < spec.bidders(); ++t) {
    for (std::size_t k = 0; k < spec.slots; ++k)
      out.bidder_alloc(t, k) =
          tr.bidder_alloc(static_cast<Eigen::Index>(t * spec.slots + k), column);
    out.payments[t] = tr.payments(static_cast<Eigen::Index>(t), column);
  }
  return out;
}

/// Forward pass on one sample at its current bids.
inline MechanismOutcome outcome(const NetworkParams& params, const AuctionSample& sample) {
  const auto batch = make_batch(std::span(&sample, 1), params.spec);
  return to_outcome(forward(params, batch), params.spec);
}

/// The network as a plain outcome function.
inline OutcomeFunction as_mechanism(const NetworkParams& params) {
  return [params](const AuctionSample& s) { return outcome(params, s); };
}

}  // namespace jointauction
