#pragma once

// Binary checkpoints. All integers are little-endian u32/u64, all reals
// little-endian IEEE-754 binary64.
//
//   "JRGN" u32 version(=1)
//   u32 stores, brands, slots, layout, activation
//   u32 count, u32 width[count]        allocation hidden widths
//   u32 count, u32 width[count]        payment hidden widths
//   u64 d, f64[d]                      NetworkParams::tensors() order
//
// A trainer checkpoint appends
//
//   "TRST" u32 version(=1)
//   u64 iteration, f64 rho
//   u64 bidders, f64 lambda[bidders]
//   u64 len, char rng_state[len]       std::mt19937_64 textual state
//   u64 adam_step, u64 d, f64 first[d], f64 second[d]   (d = 0 before the first step)
//   u64 rows, u64 cols, f64 cache[rows*cols]            column-major, NaN = untouched
//   u64 len, u64 permutation[len], u64 cursor
//   u64 rows, then per row: u64 iteration, f64 loss, rev, mean_rgt, max_rgt, lambda_norm

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "jointauction/network.hpp"
#include "jointauction/trainer.hpp"

namespace jointauction {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO writes host byte order");

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  void u32(std::uint32_t x) { bytes(&x, 4); }
  void u64(std::uint64_t x) { bytes(&x, 8); }
  void f64(double x) { bytes(&x, 8); }
  void tag(const char (&t)[5]) { bytes(t, 4); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}
  void bytes(void* p, std::size_t n) {
    if (at_ + n > buf_.size()) throw Error("checkpoint truncated");
    std::memcpy(p, buf_.data() + at_, n);
    at_ += n;
  }
  std::uint32_t u32() { std::uint32_t x; bytes(&x, 4); return x; }
  std::uint64_t u64() { std::uint64_t x; bytes(&x, 8); return x; }
  double f64() { double x; bytes(&x, 8); return x; }
  void expect(const char (&t)[5]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, t, 4) != 0)
      throw Error(std::string("checkpoint: missing ") + t + " block");
  }
  bool at_end() const { return at_ == buf_.size(); }
  /// Bound for element counts read from the file.
  std::uint64_t count(std::size_t elem) {
    const auto n = u64();
    if (n > (buf_.size() - at_) / elem) throw Error("checkpoint: implausible length");
    return n;
  }

 private:
  std::string buf_;
  std::size_t at_ = 0;
};

inline void write_params(Writer& w, const NetworkParams& p) {
  const auto& s = p.spec;
  w.tag("JRGN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(s.stores));
  w.u32(static_cast<std::uint32_t>(s.brands));
  w.u32(static_cast<std::uint32_t>(s.slots));
  w.u32(static_cast<std::uint32_t>(s.layout));
  w.u32(static_cast<std::uint32_t>(s.activation));
  for (const auto* widths : {&s.alloc_hidden, &s.pay_hidden}) {
    w.u32(static_cast<std::uint32_t>(widths->size()));
    for (auto x : *widths) w.u32(static_cast<std::uint32_t>(x));
  }
  w.u64(p.parameter_count());
  for (auto t : p.tensors())
    for (double x : t) w.f64(x);
}

inline NetworkParams read_params(Reader& r) {
  r.expect("JRGN");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(v));
  ArchitectureSpec s;
  s.stores = r.u32();
  s.brands = r.u32();
  s.slots = r.u32();
  const auto layout = r.u32();
  const auto act = r.u32();
  if (layout > 2 || act > 1) throw Error("checkpoint: bad layout or activation code");
  s.layout = static_cast<BundleLayout>(layout);
  s.activation = static_cast<Activation>(act);
  for (auto* widths : {&s.alloc_hidden, &s.pay_hidden}) {
    const auto n = r.u32();
    if (n > 64) throw Error("checkpoint: implausible layer count");
    widths->resize(n);
    for (auto& x : *widths) x = r.u32();
  }
  auto p = NetworkParams::zeros(s);
  if (r.u64() != p.parameter_count())
    throw Error("checkpoint: parameter count does not match the architecture");
  for (auto t : p.tensors())
    for (double& x : t) x = r.f64();
  return p;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write-then-rename so readers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string serialize(const NetworkParams& params) {
  detail::Writer w;
  detail::write_params(w, params);
  return w.data();
}

inline NetworkParams deserialize_params(std::string bytes) {
  detail::Reader r(std::move(bytes));
  return detail::read_params(r);
}

inline void save_params(const std::filesystem::path& path, const NetworkParams& params) {
  detail::atomic_write(path, serialize(params));
}

/// Reads the parameter block; a trailing trainer block is ignored.
inline NetworkParams load_params(const std::filesystem::path& path) {
  return deserialize_params(detail::slurp(path));
}

inline std::string serialize(const TrainingState& s) {
  detail::Writer w;
  detail::write_params(w, s.params);
  w.tag("TRST");
  w.u32(kCheckpointVersion);
  w.u64(s.iteration);
  w.f64(s.rho);
  w.u64(static_cast<std::uint64_t>(s.lambdas.size()));
  for (Eigen::Index t = 0; t < s.lambdas.size(); ++t) w.f64(s.lambdas(t));
  std::ostringstream rng;
  rng << s.rng;
  const auto text = rng.str();
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  w.u64(s.adam.step);
  w.u64(static_cast<std::uint64_t>(s.adam.first.size()));
  for (Eigen::Index i = 0; i < s.adam.first.size(); ++i) w.f64(s.adam.first(i));
  for (Eigen::Index i = 0; i < s.adam.second.size(); ++i) w.f64(s.adam.second(i));
  w.u64(static_cast<std::uint64_t>(s.misreports.rows()));
  w.u64(static_cast<std::uint64_t>(s.misreports.cols()));
  for (Eigen::Index i = 0; i < s.misreports.size(); ++i) w.f64(s.misreports.data()[i]);
  w.u64(s.permutation.size());
  for (auto x : s.permutation) w.u64(x);
  w.u64(s.cursor);
  w.u64(s.history.size());
  for (const auto& h : s.history) {
    w.u64(h.iteration);
    for (double x : {h.loss, h.rev, h.mean_rgt, h.max_rgt, h.lambda_norm}) w.f64(x);
  }
  return w.data();
}

inline TrainingState deserialize_state(std::string bytes) {
  detail::Reader r(std::move(bytes));
  TrainingState s;
  s.params = detail::read_params(r);
  r.expect("TRST");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw Error("checkpoint: unsupported trainer block version " + std::to_string(v));
  s.iteration = r.u64();
  s.rho = r.f64();
  const auto bidders = r.count(8);
  if (bidders != s.params.spec.bidders()) throw Error("checkpoint: multiplier count mismatch");
  s.lambdas.resize(static_cast<Eigen::Index>(bidders));
  for (Eigen::Index t = 0; t < s.lambdas.size(); ++t) s.lambdas(t) = r.f64();
  std::string text(r.count(1), '\0');
  r.bytes(text.data(), text.size());
  std::istringstream rng(text);
  rng >> s.rng;
  if (!rng) throw Error("checkpoint: bad generator state");
  s.adam.step = r.u64();
  const auto d = r.count(16);
  s.adam.first.resize(static_cast<Eigen::Index>(d));
  s.adam.second.resize(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < s.adam.first.size(); ++i) s.adam.first(i) = r.f64();
  for (Eigen::Index i = 0; i < s.adam.second.size(); ++i) s.adam.second(i) = r.f64();
  const auto rows = r.u64();
  const auto cols = r.u64();
  if (rows != bidders) throw Error("checkpoint: misreport cache shape mismatch");
  s.misreports.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < s.misreports.size(); ++i) s.misreports.data()[i] = r.f64();
  s.permutation.resize(r.count(8));
  for (auto& x : s.permutation) x = r.u64();
  s.cursor = r.u64();
  s.history.resize(r.count(48));
  for (auto& h : s.history) {
    h.iteration = r.u64();
    h.loss = r.f64();
    h.rev = r.f64();
    h.mean_rgt = r.f64();
    h.max_rgt = r.f64();
    h.lambda_norm = r.f64();
  }
  if (!r.at_end()) throw Error("checkpoint: trailing bytes");
  return s;
}

inline void save_state(const std::filesystem::path& path, const TrainingState& state) {
  detail::atomic_write(path, serialize(state));
}

inline TrainingState load_state(const std::filesystem::path& path) {
  return deserialize_state(detail::slurp(path));
}

}  // namespace jointauction
