#pragma once

// Seeded synthetic benchmarks with ground-truth change points.

#include "sinkcpd/metric_learn.hpp"
#include "sinkcpd/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace sinkcpd {

enum class Dataset { SwitchingVar, SwitchingGmm, FreqMixture, FreqSlopes };

const char* to_string(Dataset dataset);
/// Accepts the canonical names and the CLI aliases (var, gmm, freq, freq-slope).
Dataset dataset_from_string(const std::string& name);

/// How "N(0, I) + N(m, S)" is read for the GMM regimes: an equal-weight
/// mixture of the two Gaussians, or the sum of independent draws from each.
enum class GmmForm { Mixture, Additive };

const char* to_string(GmmForm form);
GmmForm gmm_form_from_string(const std::string& name);

struct GenSpec {
  Dataset dataset = Dataset::SwitchingGmm;
  Index n_changes = 25;
  Index segment_len = 100;
  /// Unset means the dataset's default noise. Meaning per dataset:
  ///   switching_var: std of the 49 nuisance dims (default 1)
  ///   switching_gmm: variance of extra isotropic noise N(0, v I) (default 0)
  ///   freq_mixture / freq_slopes: multiplier on the noise std (default 1)
  std::optional<double> noise_scale;
  std::uint64_t seed = 0;
  Index dim = 100;  // switching_gmm only
  GmmForm gmm_form = GmmForm::Mixture;  // switching_gmm only

  Index length() const { return (n_changes + 1) * segment_len; }
  void validate() const;
};

/// AR(2) x(t) = 0.6 x(t-1) - 0.5 x(t-2) + e, e ~ N(0, s^2), s alternating
/// 1 / 5 per segment, plus 49 iid N(0, 1) dims. 200 burn-in samples.
LabeledSequence gen_switching_var(const GenSpec& spec);

/// GMM regimes alternating per segment, read per `spec.gmm_form`:
///   alpha = N(0, I) + N(1, diag(3,3,3,1,...)),  beta = N(0, I) + N(1.5, diag(5,5,5,1,...))
LabeledSequence gen_switching_gmm(const GenSpec& spec);

/// Two sinusoid mixtures sampled at 10 Hz switching every segment, plus
/// N(0, 0.1) noise (variance).
LabeledSequence gen_freq_mixture(const GenSpec& spec);

/// freq_mixture plus 48 piecewise-linear dims whose slope flips between
/// -0.06 and 0.06 every 1000 samples, with N(0, 1e-4) noise. Labels mark the
/// frequency switches only.
LabeledSequence gen_freq_slopes(const GenSpec& spec);

LabeledSequence generate(const GenSpec& spec);

/// Draws from the two GMM regimes, used by the two-sample experiments.
/// `extra_noise_var` adds N(0, v I).
Matrix sample_gmm_alpha(Index n, Index dim, double extra_noise_var, CounterRng& rng,
                        GmmForm form = GmmForm::Mixture);
Matrix sample_gmm_beta(Index n, Index dim, double extra_noise_var, CounterRng& rng,
                       GmmForm form = GmmForm::Mixture);

}  // namespace sinkcpd
