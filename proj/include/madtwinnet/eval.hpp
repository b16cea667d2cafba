#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace madt {

/// Metrics above this are reported as this value (perfect reconstructions
/// would otherwise be infinite).
inline constexpr double kMetricCapDb = 100.0;

/// estimate = target + interference + artifacts, exactly.
struct Decomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
};

/// Time-invariant projection decomposition: the target part is the
/// projection onto span{target_ref}; the interference part is the projection
/// onto span{target_ref, interferers} minus the target part.
/// Throws UndefinedMetric for a zero-energy target reference.
Decomposition bss_decompose(std::span<const double> estimate, std::span<const double> target_ref,
                            const std::vector<std::span<const double>>& interferer_refs);

struct SeparationScores {
  double sdr_db = 0.0;
  double sir_db = 0.0;
};

/// SDR = 10 log10(|s|^2 / |e_i + e_a|^2), SIR = 10 log10(|s|^2 / |e_i|^2),
/// each capped at kMetricCapDb. Throws UndefinedMetric when |s| = 0.
SeparationScores sdr_sir(const Decomposition& d);

struct TrackScore {
  std::string track;
  double sdr_db = 0.0;
  double sir_db = 0.0;
};

struct EvalScores {
  std::vector<TrackScore> per_track;
  double median_sdr = 0.0;
  double median_sir = 0.0;
};

/// Median of finite values; mean of the middle pair for even counts.
double median(std::vector<double> values);

/// Scores `<estimates>/<track>/vocals.wav` against `<references>/<track>/vocals.wav`
/// with `accompaniment.wav` as interferer. Signals are compared over their
/// common length. Tracks are scored in parallel on up to `threads` workers.
EvalScores evaluate_tracks(const std::filesystem::path& estimates,
                           const std::filesystem::path& references, std::size_t threads = 1);

/// CSV with header `track,sdr_db,sir_db` and a final MEDIAN row.
void write_scores_csv(std::ostream& out, const EvalScores& scores);

}  // namespace madt
