#pragma once

#include "madtwinnet/parameters.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace madt {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured quantity
  double limit = 0.0;  // pass threshold
  std::string detail;
};

/// Small dims used by every finite-difference check: N=16, F=8, T=8, L=2.
MaskerConfig gradient_check_dims();

/// Relative RMS error of istft(stft(x)) over samples at least one frame
/// away from either end.
double stft_roundtrip_error(const std::vector<double>& signal, const StftConfig& cfg);

/// Gradient checks, STFT round-trip, Griffin-Lim monotonicity and the mask,
/// KL and BSS invariants, all seeded by `seed`. `corrupt_gradient` is
/// forwarded to the full gradient check (tests use it to inject faults).
std::vector<CheckResult> run_self_checks(
    std::uint64_t seed, const std::function<void(ParameterSet&)>& corrupt_gradient = {});

/// Fixed-width table, one row per check.
void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace madt
