#include "vbgp/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "vbgp/errors.hpp"

namespace vbgp {

namespace {

// SplitMix64 finalizer; used to decorrelate seed material.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : base_(seed), engine_(mix64(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t index) const {
  return Rng(mix64(base_ ^ mix64(index + 0x51ed2701)));
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(next_u64() %
                                   static_cast<std::uint64_t>(i + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << base_ << " " << engine_;
  return os.str();
}

Rng Rng::restore_state(const std::string& state) {
  Rng r;
  std::istringstream is(state);
  is >> r.base_ >> r.engine_;
  if (is.fail()) throw InvalidArgument("Rng::restore_state: malformed state");
  return r;
}

bool Rng::operator==(const Rng& other) const {
  return base_ == other.base_ && engine_ == other.engine_;
}

}  // namespace vbgp
