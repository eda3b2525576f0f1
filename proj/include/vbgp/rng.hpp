#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vbgp {

// Deterministic seeded generator. All randomness in the library flows through
// an explicitly passed Rng; there is no ambient global state.
//
// Normal draws use a cos-only Box-Muller transform (two engine words per
// draw), so the stream position is a pure function of the draw count and the
// whole state round-trips through save_state()/restore_state().
//
// split(i) derives an independent child stream as a fixed function of the
// original seed material and i, independent of how far the parent has been
// advanced. Callers that fan out work per index (paths, permutations) use it
// so serial and parallel evaluation see identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // N(0, 1)

  Rng split(std::uint64_t index) const;

  // Fisher-Yates shuffle of [0, n); returned vector is a permutation.
  std::vector<int> permutation(int n);

  std::string save_state() const;
  static Rng restore_state(const std::string& state);

  bool operator==(const Rng& other) const;

 private:
  Rng() = default;

  std::uint64_t base_ = 0;  // seed material, kept for split()
  std::mt19937_64 engine_;
};

}  // namespace vbgp
