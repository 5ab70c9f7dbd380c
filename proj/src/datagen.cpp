#include "sinkcpd/datagen.hpp"

#include "sinkcpd/error.hpp"

#include <cmath>
#include <numbers>

namespace sinkcpd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr Index kArBurnIn = 200;
constexpr Index kSlopeDims = 48;
constexpr Index kSlopePeriod = 1000;
constexpr double kSlope = 0.06;

// Distinct streams keep the datasets independent for equal seeds.
enum Stream : std::uint64_t { kVarStream = 1, kGmmStream = 2, kFreqStream = 3, kSlopeStream = 4 };

std::vector<Index> boundaries(const GenSpec& spec) {
  std::vector<Index> cps;
  for (Index k = 1; k <= spec.n_changes; ++k) cps.push_back(k * spec.segment_len);
  return cps;
}

double noise_or(const GenSpec& spec, double fallback) {
  return spec.noise_scale.value_or(fallback);
}

void fill_gmm_row(Matrix& out, Index row, bool beta, double extra_noise_var, GmmForm form,
                  CounterRng& rng) {
  const Index d = out.cols();
  const double extra_sd = std::sqrt(extra_noise_var);
  if (form == GmmForm::Additive) {
    const double mean = beta ? 1.5 : 1.0;
    const double head_sd = std::sqrt(beta ? 5.0 : 3.0);
    for (Index j = 0; j < d; ++j) {
      const double sd = j < 3 ? head_sd : 1.0;
      double x = rng.normal() + mean + sd * rng.normal();
      if (extra_noise_var > 0.0) x += extra_sd * rng.normal();
      out(row, j) = x;
    }
    return;
  }
  const bool second = rng.uniform() < 0.5;
  const double mean = second ? (beta ? 1.5 : 1.0) : 0.0;
  const double head_sd = second ? std::sqrt(beta ? 5.0 : 3.0) : 1.0;
  for (Index j = 0; j < d; ++j) {
    const double sd = j < 3 ? head_sd : 1.0;
    double x = mean + sd * rng.normal();
    if (extra_noise_var > 0.0) x += extra_sd * rng.normal();
    out(row, j) = x;
  }
}

double freq_dim1(double t, bool type_b) {
  return std::sin(kTwoPi * 0.1 * t) + std::sin(kTwoPi * 0.5 * t) +
         std::sin(kTwoPi * (type_b ? 0.35 : 0.3) * t);
}

double freq_dim2(double t, bool type_b) {
  return std::sin(kTwoPi * t) + std::sin(kTwoPi * 1.5 * t) +
         std::sin(kTwoPi * (type_b ? 0.35 : 1.7) * t);
}

}  // namespace

const char* to_string(Dataset dataset) {
  switch (dataset) {
    case Dataset::SwitchingVar: return "switching_var";
    case Dataset::SwitchingGmm: return "switching_gmm";
    case Dataset::FreqMixture: return "freq_mixture";
    case Dataset::FreqSlopes: return "freq_slopes";
  }
  return "?";
}

Dataset dataset_from_string(const std::string& name) {
  if (name == "switching_var" || name == "var") return Dataset::SwitchingVar;
  if (name == "switching_gmm" || name == "gmm") return Dataset::SwitchingGmm;
  if (name == "freq_mixture" || name == "freq") return Dataset::FreqMixture;
  if (name == "freq_slopes" || name == "freq-slope" || name == "freq_slope")
    return Dataset::FreqSlopes;
  throw InputError("unknown dataset '" + name + "' (expected var, gmm, freq, freq-slope)");
}

const char* to_string(GmmForm form) {
  return form == GmmForm::Mixture ? "mixture" : "additive";
}

GmmForm gmm_form_from_string(const std::string& name) {
  if (name == "mixture") return GmmForm::Mixture;
  if (name == "additive") return GmmForm::Additive;
  throw InputError("unknown GMM form '" + name + "' (expected mixture or additive)");
}

void GenSpec::validate() const {
  if (n_changes < 1) throw InputError("GenSpec: n_changes must be >= 1");
  if (segment_len < 2) throw InputError("GenSpec: segment_len must be >= 2");
  if (noise_scale && !(*noise_scale >= 0.0 && std::isfinite(*noise_scale)))
    throw InputError("GenSpec: noise_scale must be finite and >= 0");
  if (dataset == Dataset::SwitchingGmm && dim < 3)
    throw InputError("GenSpec: switching_gmm needs dim >= 3");
}

LabeledSequence gen_switching_var(const GenSpec& spec) {
  spec.validate();
  const Index T = spec.length();
  const Index d = 50;
  const double nuisance_sd = noise_or(spec, 1.0);
  CounterRng rng(spec.seed, kVarStream);
  LabeledSequence seq;
  seq.data.resize(T, d);
  seq.change_points = boundaries(spec);

  auto sigma_at = [&](Index t) { return (t / spec.segment_len) % 2 == 0 ? 1.0 : 5.0; };
  double x1 = 0.0;
  double x2 = 0.0;
  for (Index t = 0; t < kArBurnIn; ++t) {
    const double x = 0.6 * x1 - 0.5 * x2 + sigma_at(0) * rng.normal();
    x2 = x1;
    x1 = x;
  }
  for (Index t = 0; t < T; ++t) {
    const double x = 0.6 * x1 - 0.5 * x2 + sigma_at(t) * rng.normal();
    x2 = x1;
    x1 = x;
    seq.data(t, 0) = x;
    for (Index j = 1; j < d; ++j) seq.data(t, j) = nuisance_sd * rng.normal();
  }
  return seq;
}

Matrix sample_gmm_alpha(Index n, Index dim, double extra_noise_var, CounterRng& rng,
                        GmmForm form) {
  Matrix out(n, dim);
  for (Index i = 0; i < n; ++i) fill_gmm_row(out, i, false, extra_noise_var, form, rng);
  return out;
}

Matrix sample_gmm_beta(Index n, Index dim, double extra_noise_var, CounterRng& rng,
                       GmmForm form) {
  Matrix out(n, dim);
  for (Index i = 0; i < n; ++i) fill_gmm_row(out, i, true, extra_noise_var, form, rng);
  return out;
}

LabeledSequence gen_switching_gmm(const GenSpec& spec) {
  spec.validate();
  const Index T = spec.length();
  const double extra = noise_or(spec, 0.0);
  CounterRng rng(spec.seed, kGmmStream);
  LabeledSequence seq;
  seq.data.resize(T, spec.dim);
  seq.change_points = boundaries(spec);
  for (Index t = 0; t < T; ++t) {
    const bool beta = (t / spec.segment_len) % 2 == 1;
    fill_gmm_row(seq.data, t, beta, extra, spec.gmm_form, rng);
  }
  return seq;
}

LabeledSequence gen_freq_mixture(const GenSpec& spec) {
  spec.validate();
  const Index T = spec.length();
  const double sd = noise_or(spec, 1.0) * std::sqrt(0.1);
  CounterRng rng(spec.seed, kFreqStream);
  LabeledSequence seq;
  seq.data.resize(T, 2);
  seq.change_points = boundaries(spec);
  for (Index k = 0; k < T; ++k) {
    const double t = 0.1 * static_cast<double>(k);
    const bool type_b = (k / spec.segment_len) % 2 == 1;
    double a = freq_dim1(t, type_b);
    double b = freq_dim2(t, type_b);
    if (sd > 0.0) {
      a += sd * rng.normal();
      b += sd * rng.normal();
    }
    seq.data(k, 0) = a;
    seq.data(k, 1) = b;
  }
  return seq;
}

LabeledSequence gen_freq_slopes(const GenSpec& spec) {
  spec.validate();
  const LabeledSequence freq = gen_freq_mixture(spec);
  const Index T = freq.length();
  const double sd = noise_or(spec, 1.0) * std::sqrt(1e-4);
  CounterRng rng(spec.seed, kSlopeStream);
  LabeledSequence seq;
  seq.data.resize(T, 2 + kSlopeDims);
  seq.data.leftCols(2) = freq.data;
  seq.change_points = freq.change_points;

  // Half start falling, half start rising; all flip every kSlopePeriod
  // samples, phase-aligned to index 0.
  Vector level = Vector::Zero(kSlopeDims);
  for (Index t = 0; t < T; ++t) {
    const bool flipped = (t / kSlopePeriod) % 2 == 1;
    for (Index j = 0; j < kSlopeDims; ++j) {
      const bool falling_first = j < kSlopeDims / 2;
      const double slope = (falling_first != flipped) ? -kSlope : kSlope;
      if (t > 0) level(j) += slope;
      double x = level(j);
      if (sd > 0.0) x += sd * rng.normal();
      seq.data(t, 2 + j) = x;
    }
  }
  return seq;
}

LabeledSequence generate(const GenSpec& spec) {
  switch (spec.dataset) {
    case Dataset::SwitchingVar: return gen_switching_var(spec);
    case Dataset::SwitchingGmm: return gen_switching_gmm(spec);
    case Dataset::FreqMixture: return gen_freq_mixture(spec);
    case Dataset::FreqSlopes: return gen_freq_slopes(spec);
  }
  throw InputError("generate: unknown dataset");
}

}  // namespace sinkcpd
