#include "madtwinnet/eval.hpp"

#include "madtwinnet/data.hpp"
#include "madtwinnet/errors.hpp"
#include "madtwinnet/wav.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <set>
#include <thread>

namespace madt {
namespace {

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double capped_ratio_db(double num, double den) {
  if (den <= 0.0) return kMetricCapDb;
  return std::min(kMetricCapDb, 10.0 * std::log10(num / den));
}

}  // namespace

Decomposition bss_decompose(std::span<const double> estimate, std::span<const double> target_ref,
                            const std::vector<std::span<const double>>& interferer_refs) {
  const std::size_t n = estimate.size();
  if (target_ref.size() != n) throw std::invalid_argument("bss_decompose: length mismatch");
  for (const auto& r : interferer_refs) {
    if (r.size() != n) throw std::invalid_argument("bss_decompose: length mismatch");
  }

  const auto k = static_cast<Eigen::Index>(1 + interferer_refs.size());
  Eigen::MatrixXd refs(static_cast<Eigen::Index>(n), k);
  refs.col(0) = Eigen::Map<const Eigen::VectorXd>(target_ref.data(), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < interferer_refs.size(); ++j) {
    refs.col(static_cast<Eigen::Index>(j + 1)) =
        Eigen::Map<const Eigen::VectorXd>(interferer_refs[j].data(), static_cast<Eigen::Index>(n));
  }
  const Eigen::Map<const Eigen::VectorXd> est(estimate.data(), static_cast<Eigen::Index>(n));

  const double target_energy = refs.col(0).squaredNorm();
  if (target_energy <= 0.0) throw UndefinedMetric("bss_decompose: target reference has zero energy");

  const Eigen::VectorXd s_target = refs.col(0) * (refs.col(0).dot(est) / target_energy);
  const Eigen::MatrixXd gram = refs.transpose() * refs;
  const Eigen::VectorXd coeffs = gram.completeOrthogonalDecomposition().solve(refs.transpose() * est);
  const Eigen::VectorXd p_all = refs * coeffs;
  const Eigen::VectorXd e_interf = p_all - s_target;

  Decomposition d;
  d.target.assign(s_target.data(), s_target.data() + n);
  d.interference.assign(e_interf.data(), e_interf.data() + n);
  d.artifacts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.artifacts[i] = estimate[i] - d.target[i] - d.interference[i];
  }
  return d;
}

SeparationScores sdr_sir(const Decomposition& d) {
  const double signal = energy(d.target);
  if (!(signal > 0.0)) throw UndefinedMetric("sdr_sir: target component has zero energy");
  std::vector<double> distortion(d.interference.size());
  for (std::size_t i = 0; i < distortion.size(); ++i) distortion[i] = d.interference[i] + d.artifacts[i];
  return SeparationScores{capped_ratio_db(signal, energy(distortion)),
                          capped_ratio_db(signal, energy(d.interference))};
}

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) throw UndefinedMetric("median: no finite values");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

EvalScores evaluate_tracks(const std::filesystem::path& estimates,
                           const std::filesystem::path& references, std::size_t threads) {
  const auto ref_tracks = list_tracks(references);
  const auto est_tracks = list_tracks(estimates);
  const std::set<std::string> ref_set(ref_tracks.begin(), ref_tracks.end());
  for (const auto& t : est_tracks) {
    if (ref_set.count(t) == 0) throw DatasetLayoutError("estimate track " + t + " has no reference");
  }
  for (const auto& t : ref_tracks) {
    if (!std::filesystem::is_regular_file(estimates / t / "vocals.wav")) {
      throw DatasetLayoutError("missing estimate " + (estimates / t / "vocals.wav").string());
    }
    for (const char* stem : {"vocals.wav", "accompaniment.wav"}) {
      if (!std::filesystem::is_regular_file(references / t / stem)) {
        throw DatasetLayoutError("missing reference " + (references / t / stem).string());
      }
    }
  }

  EvalScores scores;
  scores.per_track.resize(ref_tracks.size());
  auto score_one = [&](std::size_t i) {
    const auto& name = ref_tracks[i];
    auto est = read_wav(estimates / name / "vocals.wav").samples;
    auto voc = read_wav(references / name / "vocals.wav").samples;
    auto acc = read_wav(references / name / "accompaniment.wav").samples;
    const std::size_t n = std::min({est.size(), voc.size(), acc.size()});
    est.resize(n);
    voc.resize(n);
    acc.resize(n);
    const auto s = sdr_sir(bss_decompose(est, voc, {std::span<const double>(acc)}));
    scores.per_track[i] = TrackScore{name, s.sdr_db, s.sir_db};
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, ref_tracks.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < ref_tracks.size(); ++i) score_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < ref_tracks.size(); i = next++) {
            try {
              score_one(i);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<double> sdr;
  std::vector<double> sir;
  for (const auto& t : scores.per_track) {
    sdr.push_back(t.sdr_db);
    sir.push_back(t.sir_db);
  }
  scores.median_sdr = median(sdr);
  scores.median_sir = median(sir);
  return scores;
}

void write_scores_csv(std::ostream& out, const EvalScores& scores) {
  out << "track,sdr_db,sir_db\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& t : scores.per_track) out << t.track << ',' << t.sdr_db << ',' << t.sir_db << '\n';
  out << "MEDIAN," << scores.median_sdr << ',' << scores.median_sir << '\n';
}

}  // namespace madt
