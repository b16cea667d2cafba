#include "madtwinnet/data.hpp"
#include "madtwinnet/errors.hpp"
#include "madtwinnet/eval.hpp"
#include "madtwinnet/wav.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace madt;
using madt::testing::random_signal;
using madt::testing::TempDir;

namespace {

using Signal = std::vector<double>;

double dot(const Signal& a, const Signal& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Removes from `x` its projection on each of `basis` (assumed orthogonal), then
// rescales to the energy of basis[0].
Signal orthogonalize(Signal x, const std::vector<const Signal*>& basis) {
  for (const Signal* b : basis) {
    const double c = dot(x, *b) / dot(*b, *b);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * (*b)[i];
  }
  const double scale = std::sqrt(dot(*basis[0], *basis[0]) / dot(x, x));
  for (double& v : x) v *= scale;
  return x;
}

Signal combine(double a, const Signal& x, double b, const Signal& y, double c = 0.0, const Signal* z = nullptr) {
  Signal out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i] + (z ? c * (*z)[i] : 0.0);
  return out;
}

struct Triple {
  Signal target, interferer, artifact;
};

Triple orthogonal_triple(std::uint64_t seed, std::size_t n = 2048) {
  std::mt19937_64 rng(seed);
  Triple t;
  t.target = random_signal(rng, n);
  t.interferer = orthogonalize(random_signal(rng, n), {&t.target});
  t.artifact = orthogonalize(random_signal(rng, n), {&t.target, &t.interferer});
  return t;
}

}  // namespace

TEST(Bss, EstimateEqualToTargetIsCapped) {
  const Triple t = orthogonal_triple(1);
  for (double gain : {1.0, 2.0, -0.5}) {
    const Signal est = combine(gain, t.target, 0.0, t.target);
    const auto s = sdr_sir(bss_decompose(est, t.target, {t.interferer}));
    EXPECT_EQ(s.sdr_db, kMetricCapDb) << gain;
    EXPECT_EQ(s.sir_db, kMetricCapDb) << gain;
  }
}

TEST(Bss, RecoversKnownCoefficients) {
  const Triple t = orthogonal_triple(2);
  const double a = 0.7, b = 0.3, c = 0.2;
  const Signal est = combine(a, t.target, b, t.interferer, c, &t.artifact);
  const Decomposition d = bss_decompose(est, t.target, {t.interferer});
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_NEAR(d.target[i], a * t.target[i], 1e-10);
    EXPECT_NEAR(d.interference[i], b * t.interferer[i], 1e-10);
    EXPECT_NEAR(d.artifacts[i], c * t.artifact[i], 1e-10);
    EXPECT_NEAR(d.target[i] + d.interference[i] + d.artifacts[i], est[i], 1e-12);
  }
  const auto s = sdr_sir(d);
  // All three parts share the same energy, so only the coefficients matter.
  EXPECT_NEAR(s.sir_db, 10.0 * std::log10(a * a / (b * b)), 1e-9);
  EXPECT_NEAR(s.sdr_db, 10.0 * std::log10(a * a / (b * b + c * c)), 1e-9);
}

TEST(Bss, EqualEnergyArtifactGivesZeroSdr) {
  const Triple t = orthogonal_triple(3);
  const auto s = sdr_sir(bss_decompose(combine(1.0, t.target, 1.0, t.artifact), t.target, {t.interferer}));
  EXPECT_NEAR(s.sdr_db, 0.0, 1e-9);
  EXPECT_EQ(s.sir_db, kMetricCapDb);
}

TEST(Bss, EqualEnergyInterfererGivesZeroSir) {
  const Triple t = orthogonal_triple(4);
  const auto s = sdr_sir(bss_decompose(combine(1.0, t.target, 1.0, t.interferer), t.target, {t.interferer}));
  EXPECT_NEAR(s.sir_db, 0.0, 1e-9);
  EXPECT_NEAR(s.sdr_db, 0.0, 1e-9);
}

TEST(Bss, NonOrthogonalInterfererIsHandled) {
  std::mt19937_64 rng(5);
  const Signal target = random_signal(rng, 1024);
  const Signal raw = random_signal(rng, 1024);
  const Signal interferer = combine(1.0, raw, 0.4, target);  // correlated with the target
  const Signal est = combine(1.0, target, 0.5, interferer);
  const Decomposition d = bss_decompose(est, target, {interferer});
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_NEAR(d.target[i] + d.interference[i] + d.artifacts[i], est[i], 1e-12);
    EXPECT_NEAR(d.artifacts[i], 0.0, 1e-10);
  }
  EXPECT_NEAR(dot(d.target, d.interference), 0.0, 1e-8);
}

TEST(Bss, UndefinedCases) {
  const Triple t = orthogonal_triple(6, 256);
  const Signal zero(256, 0.0);
  EXPECT_THROW(bss_decompose(t.target, zero, {t.interferer}), UndefinedMetric);
  EXPECT_THROW(sdr_sir(bss_decompose(zero, t.target, {t.interferer})), UndefinedMetric);
  EXPECT_THROW(bss_decompose(t.target, Signal(10, 1.0), {t.interferer}), std::invalid_argument);
}

TEST(Median, OddEvenAndNonFinite) {
  EXPECT_EQ(median({9.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({5.0}), 5.0);
  EXPECT_EQ(median({std::numeric_limits<double>::quiet_NaN(), 3.0, 1.0,
                    std::numeric_limits<double>::infinity()}),
            2.0);
  EXPECT_THROW(median({}), UndefinedMetric);
  EXPECT_THROW(median({std::numeric_limits<double>::quiet_NaN()}), UndefinedMetric);
}

TEST(EvaluateTracks, IdenticalDirectoriesAreCapped) {
  TempDir dir("eval");
  for (std::uint64_t i = 0; i < 3; ++i) write_track_dir(dir / "ref" / ("t" + std::to_string(i)), synth_fixture(i, 0.5));
  const EvalScores s = evaluate_tracks(dir / "ref", dir / "ref", 2);
  ASSERT_EQ(s.per_track.size(), 3u);
  EXPECT_EQ(s.per_track[0].track, "t0");
  for (const auto& t : s.per_track) {
    EXPECT_EQ(t.sdr_db, kMetricCapDb);
    EXPECT_EQ(t.sir_db, kMetricCapDb);
  }
  EXPECT_EQ(s.median_sdr, kMetricCapDb);
}

TEST(EvaluateTracks, MixtureAsEstimateAndThreadCountInvariance) {
  TempDir dir("eval");
  for (std::uint64_t i = 0; i < 3; ++i) {
    const TrackPair t = synth_fixture(10 + i, 0.5);
    const std::string name = "t" + std::to_string(i);
    write_track_dir(dir / "ref" / name, t);
    std::filesystem::create_directories(dir / "est" / name);
    write_wav(dir / "est" / name / "vocals.wav", t.mixture, t.sample_rate);
  }
  const EvalScores one = evaluate_tracks(dir / "est", dir / "ref", 1);
  const EvalScores many = evaluate_tracks(dir / "est", dir / "ref", 3);
  ASSERT_EQ(one.per_track.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(one.per_track[i].sdr_db, many.per_track[i].sdr_db);
    EXPECT_LT(one.per_track[i].sdr_db, 50.0);
  }
  std::vector<double> sdr;
  for (const auto& t : one.per_track) sdr.push_back(t.sdr_db);
  EXPECT_EQ(one.median_sdr, median(sdr));
}

TEST(EvaluateTracks, LayoutErrors) {
  TempDir dir("eval");
  write_track_dir(dir / "ref" / "a", synth_fixture(1, 0.25));
  write_track_dir(dir / "ref" / "b", synth_fixture(2, 0.25));
  write_track_dir(dir / "est" / "a", synth_fixture(1, 0.25));
  EXPECT_THROW(evaluate_tracks(dir / "est", dir / "ref"), DatasetLayoutError);
  write_track_dir(dir / "est" / "c", synth_fixture(3, 0.25));
  write_track_dir(dir / "est" / "b", synth_fixture(2, 0.25));
  EXPECT_THROW(evaluate_tracks(dir / "est", dir / "ref"), DatasetLayoutError);
  EXPECT_THROW(evaluate_tracks(dir / "missing", dir / "ref"), DatasetLayoutError);
}

TEST(ScoresCsv, Format) {
  EvalScores s;
  s.per_track = {{"a", 1.5, 2.25}, {"b", -3.0, 100.0}};
  s.median_sdr = -0.75;
  s.median_sir = 51.125;
  std::ostringstream out;
  write_scores_csv(out, s);
  EXPECT_EQ(out.str(),
            "track,sdr_db,sir_db\n"
            "a,1.500000,2.250000\n"
            "b,-3.000000,100.000000\n"
            "MEDIAN,-0.750000,51.125000\n");
}
