#pragma once

// Statistics over simulated escape ensembles: inter-escape samples and their
// mean/SD/CV summaries, escape-sequence frequency tables with Wilson score
// intervals, raw-count histograms, and the trapped/direct decomposition of
// the second escape based on the noise-free fate of the first-crossing
// snapshot.

#include "escapenet/deterministic.hpp"
#include "escapenet/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace escapenet {

struct EscapeStats {
  int k = 0;  // samples are tau^k - tau^l over uncensored realizations
  int l = 0;  // l = 0 denotes the time origin (tau^0 = 0)
  long n_samples = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  double cv = std::numeric_limits<double>::quiet_NaN();
  long n_censored = 0;  // realizations excluded from the sample
  // mean is filled for n_samples >= 1; sd and cv need n_samples >= 2.
  bool available = false;
};

// Per-realization tau^k - tau^l over the uncensored records. Ordering of
// the crossing times guarantees every returned value is positive.
inline std::vector<double> inter_escape_times(
    const std::vector<EscapeRecord>& records, int k, int l) {
  if (l < 0 || k <= l)
    throw std::out_of_range("inter_escape_times: need 0 <= l < k");
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (k > static_cast<int>(rec.tau_node.size()))
      throw std::out_of_range(
          "inter_escape_times: k exceeds the number of nodes");
    if (rec.censored) continue;
    const double tau_k = rec.tau_ordered[k - 1];
    const double tau_l = l == 0 ? 0.0 : rec.tau_ordered[l - 1];
    out.push_back(tau_k - tau_l);
  }
  return out;
}

// Sample mean, sample SD (n-1 denominator), and their ratio CV = sd/mean.
// Accumulates in extended precision so merged and concatenated computations
// agree far below statistical noise.
inline EscapeStats compute_stats(const std::vector<double>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument(
        "compute_stats: need at least 2 samples, got " +
        std::to_string(samples.size()));
  EscapeStats st;
  st.n_samples = static_cast<long>(samples.size());
  long double sum = 0.0L;
  for (double x : samples) sum += x;
  st.mean = static_cast<double>(sum / samples.size());
  long double ss = 0.0L;
  for (double x : samples) {
    const long double d = x - st.mean;
    ss += d * d;
  }
  st.sd = static_cast<double>(std::sqrt(ss / (samples.size() - 1)));
  st.cv = st.sd == 0.0 ? 0.0 : st.sd / st.mean;
  st.available = true;
  return st;
}

// Convenience: stats of tau^{k|l} over an ensemble, with the excluded
// censored count reported.
inline EscapeStats escape_stats(const std::vector<EscapeRecord>& records,
                                int k, int l) {
  EscapeStats st = compute_stats(inter_escape_times(records, k, l));
  st.k = k;
  st.l = l;
  for (const auto& rec : records) st.n_censored += rec.censored ? 1 : 0;
  return st;
}

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

// 95% Wilson score interval for a binomial proportion of count out of n.
inline WilsonInterval wilson_95(long count, long n) {
  if (n <= 0 || count < 0 || count > n)
    throw std::invalid_argument("wilson_95: need 0 <= count <= n, n > 0");
  constexpr double z = 1.959963984540054;  // 97.5% normal quantile
  const double p = static_cast<double>(count) / static_cast<double>(n);
  const double z2n = z * z / static_cast<double>(n);
  const double denom = 1.0 + z2n;
  const double center = (p + 0.5 * z2n) / denom;
  const double hw =
      (z / denom) * std::sqrt(p * (1.0 - p) / static_cast<double>(n) +
                              0.25 * z2n / static_cast<double>(n));
  return {center - hw, center + hw};
}

struct SequenceEntry {
  long count = 0;
  double probability = 0.0;
  WilsonInterval wilson;
};

struct SequenceTable {
  std::map<std::vector<int>, SequenceEntry> entries;  // keyed by node order
  long n_uncensored = 0;
  long n_censored = 0;
};

// Empirical distribution of the escape order over uncensored realizations.
// Probabilities sum to one over the observed permutations.
inline SequenceTable sequence_distribution(
    const std::vector<EscapeRecord>& records) {
  SequenceTable table;
  for (const auto& rec : records) {
    if (rec.censored) {
      ++table.n_censored;
      continue;
    }
    ++table.n_uncensored;
    ++table.entries[rec.sequence].count;
  }
  if (table.n_uncensored == 0)
    throw std::invalid_argument(
        "sequence_distribution: every record is censored");
  for (auto& [seq, entry] : table.entries) {
    entry.probability = static_cast<double>(entry.count) /
                        static_cast<double>(table.n_uncensored);
    entry.wilson = wilson_95(entry.count, table.n_uncensored);
  }
  return table;
}

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  double bin_width = 0.0;
  std::vector<long> counts;  // bin i covers [lo + i*w, lo + (i+1)*w)
  long underflow = 0;        // samples below lo
  long overflow = 0;         // samples at or above hi
};

inline Histogram histogram(const std::vector<double>& samples,
                           double bin_width, double lo, double hi) {
  if (!(bin_width > 0.0))
    throw std::invalid_argument("histogram: bin_width must be positive");
  if (!(hi > lo)) throw std::invalid_argument("histogram: need hi > lo");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.bin_width = bin_width;
  const int n_bins = static_cast<int>(std::ceil((hi - lo) / bin_width));
  h.counts.assign(n_bins, 0);
  for (double x : samples) {
    if (x < lo) {
      ++h.underflow;
    } else if (x >= hi) {
      ++h.overflow;
    } else {
      int idx = static_cast<int>((x - lo) / bin_width);
      if (idx >= n_bins) idx = n_bins - 1;  // guard the hi-edge rounding
      ++h.counts[idx];
    }
  }
  return h;
}

// Noise-free fate of the first-crossing snapshot: integrate the drift from
// the snapshot and look at which attractor it lands on. All nodes active ->
// the partner was already committed when the first node crossed (direct);
// exactly one node active -> the partner fell back below its barrier
// (trapped); anything else, including no landing before t_max, is left
// unclassified.
inline EscapeClass classify_trapped(const EscapeRecord& rec,
                                    const NetworkSpec& net, double dt = 1e-3,
                                    double t_max = 1e4) {
  if (rec.snapshot_at_first_escape.empty())
    throw std::invalid_argument(
        "classify_trapped: record carries no first-escape snapshot");
  const std::string label = basin_of(rec.snapshot_at_first_escape, net, dt, t_max);
  if (label == "undetermined") return EscapeClass::unclassified;
  const long n_active = std::count(label.begin(), label.end(), 'A');
  if (n_active == static_cast<long>(label.size())) return EscapeClass::direct;
  if (n_active == 1) return EscapeClass::trapped;
  return EscapeClass::unclassified;
}

// Classifies every record that carries a snapshot; records without one
// (censored before any crossing, or snapshots disabled) stay unclassified.
inline void classify_ensemble(std::vector<EscapeRecord>& records,
                              const NetworkSpec& net, double dt = 1e-3,
                              double t_max = 1e4) {
  for (auto& rec : records)
    if (!rec.snapshot_at_first_escape.empty())
      rec.classification = classify_trapped(rec, net, dt, t_max);
}

struct MixtureDecomposition {
  double p_trapped = 0.0;    // trapped fraction among classified records
  EscapeStats stats_direct;  // second-escape gaps of direct records
  EscapeStats stats_trapped;
  EscapeStats combined;  // pooled over both classes
  // Mixture of the per-class second moments, sqrt((1-P) E(g0^2) + P E(g1^2))
  // with population (1/n) moments: the square root of the mixture's mean
  // square, not of its variance.
  double second_moment_rms = std::numeric_limits<double>::quiet_NaN();
  // Population SD of the mixture law itself: sqrt(mean square - mean^2).
  double population_sd = std::numeric_limits<double>::quiet_NaN();
  long n_unclassified = 0;
  long n_censored = 0;
};

namespace detail {

// Mean for any n >= 1; full stats only for n >= 2 (see EscapeStats.available).
inline EscapeStats class_stats(const std::vector<double>& samples) {
  if (samples.size() >= 2) return compute_stats(samples);
  EscapeStats st;
  st.n_samples = static_cast<long>(samples.size());
  if (samples.size() == 1) st.mean = samples.front();
  return st;
}

inline long double mean_square(const std::vector<double>& samples) {
  long double ss = 0.0L;
  for (double x : samples) ss += static_cast<long double>(x) * x;
  return ss / samples.size();
}

}  // namespace detail

// Splits the second-escape gap tau^{2|1} by the trapped/direct classification
// and reports per-class, pooled, and mixture-law summaries. Census fields
// count the records excluded from the split.
inline MixtureDecomposition mixture_decomposition(
    const std::vector<EscapeRecord>& records) {
  MixtureDecomposition mix;
  std::vector<double> direct, trapped, pooled;
  for (const auto& rec : records) {
    if (rec.censored) {
      ++mix.n_censored;
      continue;
    }
    if (rec.tau_node.size() < 2)
      throw std::invalid_argument(
          "mixture_decomposition: needs at least two nodes per record");
    if (rec.classification == EscapeClass::unclassified) {
      ++mix.n_unclassified;
      continue;
    }
    const double gap = rec.tau_ordered[1] - rec.tau_ordered[0];
    (rec.classification == EscapeClass::direct ? direct : trapped)
        .push_back(gap);
    pooled.push_back(gap);
  }
  if (pooled.empty())
    throw std::invalid_argument(
        "mixture_decomposition: no classified, uncensored records");

  mix.p_trapped = static_cast<double>(trapped.size()) /
                  static_cast<double>(pooled.size());
  mix.stats_direct = detail::class_stats(direct);
  mix.stats_trapped = detail::class_stats(trapped);
  mix.combined = detail::class_stats(pooled);
  for (auto* st : {&mix.stats_direct, &mix.stats_trapped, &mix.combined}) {
    st->k = 2;
    st->l = 1;
    st->n_censored = mix.n_censored;
  }

  long double ms = 0.0L;
  if (!direct.empty()) ms += (1.0L - mix.p_trapped) * detail::mean_square(direct);
  if (!trapped.empty()) ms += mix.p_trapped * detail::mean_square(trapped);
  mix.second_moment_rms = static_cast<double>(std::sqrt(ms));
  const long double m = mix.combined.mean;
  mix.population_sd =
      static_cast<double>(std::sqrt(std::max(0.0L, ms - m * m)));
  return mix;
}

// Same split, classifying the records first under the given network's
// noise-free flow. The input ensemble is not modified.
inline MixtureDecomposition mixture_decomposition(
    std::vector<EscapeRecord> records, const NetworkSpec& net,
    double dt = 1e-3, double t_max = 1e4) {
  classify_ensemble(records, net, dt, t_max);
  return mixture_decomposition(records);
}

}  // namespace escapenet
