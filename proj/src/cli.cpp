#include "sinkcpd/cli.hpp"

#include "sinkcpd/datagen.hpp"
#include "sinkcpd/detector.hpp"
#include "sinkcpd/error.hpp"
#include "sinkcpd/eval.hpp"
#include "sinkcpd/io.hpp"
#include "sinkcpd/presets.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace sinkcpd::cli {

namespace fs = std::filesystem;

namespace {

struct GenerateArgs {
  std::string dataset;
  std::uint64_t seed = 0;
  Index changes = 25;
  Index segment_len = 100;
  std::optional<double> noise;
  Index dim = 100;
  std::string gmm_form = "mixture";
  std::string out_dir;
};

struct TrainArgs {
  std::string data, labels, out, preset;
  std::optional<Index> proj_dim, window, buffer;
  std::optional<double> gamma, lr, margin, l1, val_frac;
  std::optional<int> iters;
  std::uint64_t seed = 0;
  std::string grad_mode = "paper_cross_only";
  std::string loss = "mean";
  std::string init = "auto";
  std::string l1_grid;
  bool no_standardize = false;
  bool verbose = false;
};

struct DetectArgs {
  std::string data, model, out, detections;
  std::optional<Index> window, min_sep;
  Index stride = 1;
  std::string threshold = "inf";
  double gamma = 0.1;
  bool raw = false;
};

struct EvalArgs {
  std::string scores, labels;
  Index margin = 0;
};

struct ExperimentArgs {
  std::string name;
  std::string windows = "5,10,20,50";
  std::string noise = "0,1,2,4";
  std::string dims = "5,50,100,1000";
  std::string model, out;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  double noise_var = 2.0;
  Index window = 10;
  int train_iters = 2000;
  Index train_changes = 25;
  std::string gmm_form = "mixture";
};

double parse_threshold(const std::string& text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || std::isnan(v))
    throw InputError("--threshold: expected a number or 'inf', got '" + text + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw InputError(std::string(flag) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InputError(std::string(flag) + ": empty list");
  return out;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  GenSpec spec;
  spec.dataset = dataset_from_string(a.dataset);
  spec.seed = a.seed;
  spec.n_changes = a.changes;
  spec.segment_len = a.segment_len;
  spec.noise_scale = a.noise;
  spec.dim = a.dim;
  spec.gmm_form = gmm_form_from_string(a.gmm_form);
  const LabeledSequence seq = generate(spec);
  const fs::path dir(a.out_dir);
  io::write_sequence_csv(dir / "data.csv", seq.data);
  io::write_labels(dir / "labels.txt", seq.change_points);
  out << "wrote " << seq.length() << "x" << seq.dim() << " sequence and "
      << seq.change_points.size() << " labels to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.preset.empty()) apply_preset(find_preset(a.preset), cfg);
  if (a.proj_dim) cfg.projection_dim = *a.proj_dim;
  if (a.window) cfg.window = *a.window;
  if (a.buffer) cfg.buffer = *a.buffer;
  if (a.gamma) cfg.gamma = *a.gamma;
  if (a.lr) cfg.learn_rate = *a.lr;
  if (a.margin) cfg.margin = *a.margin;
  if (a.l1) cfg.l1_weight = *a.l1;
  if (a.val_frac) cfg.validation_fraction = *a.val_frac;
  if (a.iters) cfg.iterations = *a.iters;
  cfg.seed = a.seed;
  cfg.grad_mode = grad_mode_from_string(a.grad_mode);
  cfg.loss_reduction = loss_reduction_from_string(a.loss);
  cfg.init = init_scheme_from_string(a.init);
  cfg.standardize = !a.no_standardize;
  cfg.validate();
  for (const auto& w : cfg.warnings()) err << "warning: " << w << "\n";

  LabeledSequence seq;
  seq.data = io::read_sequence_csv(a.data);
  seq.change_points = io::read_labels(a.labels, seq.data.rows());

  TrainProgress progress;
  if (a.verbose) {
    progress = [&err](int it, double tl, double vl) {
      if (it % 100 == 0) err << "iter " << it << " train " << tl << " val " << vl << "\n";
    };
  }
  TrainedModel model;
  if (!a.l1_grid.empty()) {
    const L1Selection sel = select_l1_weight(seq, cfg, parse_list<double>(a.l1_grid, "--l1-grid"));
    for (std::size_t k = 0; k < sel.candidates.size(); ++k) {
      const auto& c = sel.candidates[k];
      out << "l1=" << io::format_double(c.l1_weight) << " val_loss=" << io::format_double(c.val_loss)
          << " se=" << io::format_double(c.val_se) << (k == sel.chosen ? " (chosen)" : "") << "\n";
    }
    model = sel.candidates[sel.chosen].model;
  } else {
    model = train_metric(seq, cfg, nullptr, progress);
  }
  io::write_model(a.out, model);
  out << "trained r=" << model.metric.projection_dim() << " d=" << model.metric.dim()
      << " on " << model.train_change_points.size() << " change points ("
      << model.val_change_points.size() << " validation, " << model.skipped_change_points
      << " skipped); best iteration " << model.best_iteration << "; wrote " << a.out << "\n";
  return 0;
}

fs::path default_detections_path(const fs::path& scores_path) {
  fs::path p = scores_path;
  p.replace_filename(scores_path.stem().string() + "_detections.txt");
  return p;
}

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  Matrix data = io::read_sequence_csv(a.data);
  GroundMetric metric;
  Index window = 10;
  if (!a.model.empty()) {
    const TrainedModel model = io::read_model(a.model);
    if (model.metric.dim() != data.cols())
      throw InputError("model expects d=" + std::to_string(model.metric.dim()) +
                       " features but data has " + std::to_string(data.cols()) + " columns");
    data = model.standardizer.apply(data);
    metric = model.metric;
    window = model.config.window;
  } else {
    metric = GroundMetric::identity(data.cols(), a.gamma);
  }
  if (a.window) window = *a.window;
  const double tau = parse_threshold(a.threshold);
  const ChangeScoreSeries scores = change_scores(data, metric, window, a.stride);
  const Index min_sep = a.min_sep.value_or(window);
  const Detection det = a.raw ? detect_raw(scores, tau) : detect(scores, tau, min_sep);

  const fs::path scores_path(a.out);
  const fs::path det_path =
      a.detections.empty() ? default_detections_path(scores_path) : fs::path(a.detections);
  io::write_scores_csv(scores_path, scores);
  io::write_labels(det_path, det.indices);
  out << det.indices.size() << " detections; wrote " << scores_path.string() << " and "
      << det_path.string() << "\n";
  return 0;
}

nlohmann::json tau_json(double tau) {
  if (std::isinf(tau)) return tau > 0 ? "inf" : "-inf";
  return tau;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ChangeScoreSeries scores = io::read_scores_csv(a.scores);
  const auto labels = io::read_labels(a.labels, scores.length());
  const AucReport rep = auc(scores, labels, a.margin);
  nlohmann::json j;
  j["auc"] = rep.auc;
  j["match_margin"] = rep.match_margin;
  j["n_labels"] = labels.size();
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : rep.roc_points)
    roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"tau", tau_json(p.tau)}});
  j["roc"] = roc;
  out << j.dump(2) << "\n";
  return 0;
}

// Noise-free switching-GMM stream with the gmm preset, as in the error-curve
// studies; the learned metric is then applied to noisy clouds.
TrainedModel experiment_model(const ExperimentArgs& a) {
  if (!a.model.empty()) return io::read_model(a.model);
  GenSpec spec;
  spec.dataset = Dataset::SwitchingGmm;
  spec.n_changes = a.train_changes;
  spec.seed = a.seed;
  spec.gmm_form = gmm_form_from_string(a.gmm_form);
  const LabeledSequence seq = generate(spec);
  TrainConfig cfg;
  apply_preset(find_preset("gmm"), cfg);
  cfg.iterations = a.train_iters;
  cfg.seed = a.seed;
  return train_metric(seq, cfg);
}

CloudSampler gmm_sampler(bool alt, double noise_var, GmmForm form) {
  return [alt, noise_var, form](Index w, CounterRng& rng) {
    return alt ? sample_gmm_beta(w, 100, noise_var, rng, form)
               : sample_gmm_alpha(w, 100, noise_var, rng, form);
  };
}

void append_curve(std::string& csv, const char* label, const ErrorCurve& curve) {
  for (const auto& p : curve.points)
    csv += std::string(label) + "," + to_string(curve.axis) + "," +
           io::format_double(p.axis_value) + "," + io::format_double(p.tau) + "," +
           io::format_double(p.type1) + "," + io::format_double(p.type2) + "\n";
}

int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
  if (a.trials == 0) throw InputError("--trials must be >= 1");
  const GmmForm form = gmm_form_from_string(a.gmm_form);
  std::string csv;
  if (a.name == "errors-vs-window" || a.name == "errors-vs-noise") {
    const TrainedModel model = experiment_model(a);
    if (model.metric.dim() != 100)
      throw InputError("model expects d=" + std::to_string(model.metric.dim()) +
                       " features but the GMM samplers produce 100");
    const ScoringMetric learned{model.standardizer, model.metric};
    const ScoringMetric plain = ScoringMetric::plain(GroundMetric::identity(100, model.metric.gamma));
    csv = "metric,axis,axis_value,tau,type1,type2\n";
    const bool by_window = a.name == "errors-vs-window";
    const auto values = by_window ? std::vector<double>{} : parse_list<double>(a.noise, "--noise");
    const auto windows = by_window ? parse_list<Index>(a.windows, "--windows") : std::vector<Index>{};
    const std::size_t n = by_window ? windows.size() : values.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Index w = by_window ? windows[k] : a.window;
      const double nv = by_window ? a.noise_var : values[k];
      const double axis_value = by_window ? static_cast<double>(w) : nv;
      const ErrorAxis axis = by_window ? ErrorAxis::WindowSize : ErrorAxis::NoiseLevel;
      const auto null_s = gmm_sampler(false, nv, form);
      const auto alt_s = gmm_sampler(true, nv, form);
      append_curve(csv, "learned",
                   two_sample_error_rates(null_s, alt_s, learned, w, a.trials, a.seed, axis,
                                          axis_value));
      append_curve(csv, "identity",
                   two_sample_error_rates(null_s, alt_s, plain, w, a.trials, a.seed, axis,
                                          axis_value));
    }
  } else if (a.name == "proj-dim") {
    const auto dims = parse_list<Index>(a.dims, "--dims");
    GenSpec spec;
    spec.dataset = Dataset::SwitchingGmm;
    spec.n_changes = a.train_changes;
    spec.seed = a.seed;
    spec.gmm_form = form;
    const LabeledSequence seq = generate(spec);
    TrainConfig cfg;
    apply_preset(find_preset("gmm"), cfg);
    cfg.iterations = a.train_iters;
    cfg.seed = a.seed;
    const ProjectionStudy study =
        projection_dim_study(seq, gmm_sampler(false, a.noise_var, form),
                             gmm_sampler(true, a.noise_var, form),
                             dims, cfg, a.window, a.trials, a.seed);
    csv = "projection_dim,trained,rank,tau,type1,type2,error\n";
    for (const auto& e : study.entries) {
      std::string msg = e.error;
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      csv += std::to_string(e.projection_dim) + "," + (e.trained ? "1" : "0") + "," +
             std::to_string(e.rank) + "," + io::format_double(e.tau) + "," +
             io::format_double(e.type1) + "," + io::format_double(e.type2) + "," + msg + "\n";
    }
  } else {
    throw InputError("unknown experiment '" + a.name +
                     "' (known: errors-vs-window, errors-vs-noise, proj-dim)");
  }
  io::write_file_atomic(a.out, csv);
  out << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Change-point detection with learned Sinkhorn ground metrics", "sinkcpd"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic labeled sequence");
  g->add_option("--dataset", gen.dataset, "switching_var | switching_gmm | freq_mixture | freq_slopes")
      ->required();
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--changes", gen.changes, "Number of change points")->check(CLI::PositiveNumber);
  g->add_option("--segment-len", gen.segment_len, "Samples between changes")
      ->check(CLI::PositiveNumber);
  g->add_option("--noise", gen.noise, "Dataset-specific noise override");
  g->add_option("--dim", gen.dim, "Dimension (switching_gmm only)")->check(CLI::PositiveNumber);
  g->add_option("--gmm-form", gen.gmm_form, "mixture | additive (switching_gmm only)");
  g->add_option("--out", gen.out_dir, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Learn a ground metric from labeled change points");
  t->add_option("--data", tr.data, "Sequence CSV")->required();
  t->add_option("--labels", tr.labels, "Change-point label file")->required();
  t->add_option("--out", tr.out, "Model JSON path")->required();
  t->add_option("--preset", tr.preset, "Named defaults (gmm, freq, freq-slope, ...)");
  t->add_option("--proj-dim", tr.proj_dim, "Rows of L");
  t->add_option("--gamma", tr.gamma, "Entropic regularization");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--margin", tr.margin, "Triplet margin");
  t->add_option("--l1", tr.l1, "L1 weight");
  t->add_option("--l1-grid", tr.l1_grid, "Comma-separated L1 weights; picks one by validation");
  t->add_option("--window", tr.window, "Window length");
  t->add_option("--buffer", tr.buffer, "Gap between change point and windows");
  t->add_option("--iters", tr.iters, "Gradient steps");
  t->add_option("--val-frac", tr.val_frac, "Fraction of change points held out");
  t->add_option("--seed", tr.seed, "Initialization seed");
  t->add_option("--grad-mode", tr.grad_mode, "paper_cross_only | full_debiased");
  t->add_option("--loss", tr.loss, "Triplet loss reduction: mean | sum");
  t->add_option("--init", tr.init, "auto | identity | gaussian");
  t->add_flag("--no-standardize", tr.no_standardize, "Skip per-feature z-scoring");
  t->add_flag("--verbose", tr.verbose, "Report losses every 100 iterations");

  DetectArgs de;
  auto* d = app.add_subcommand("detect", "Score a sequence and report detections");
  d->add_option("--data", de.data, "Sequence CSV")->required();
  d->add_option("--model", de.model, "Model JSON (identity metric when omitted)");
  d->add_option("--window", de.window, "Window length (default: the model's)");
  d->add_option("--stride", de.stride, "Score every stride-th index")->check(CLI::PositiveNumber);
  d->add_option("--threshold", de.threshold, "Detection threshold (number or inf)");
  d->add_option("--min-sep", de.min_sep, "Peak neighborhood radius (default: window)");
  d->add_flag("--raw", de.raw, "Report every index above the threshold");
  d->add_option("--gamma", de.gamma, "Entropic regularization without a model");
  d->add_option("--out", de.out, "Scores CSV path")->required();
  d->add_option("--detections", de.detections, "Detections path");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "AUC of a score series against labels");
  e->add_option("--scores", ev.scores, "Scores CSV")->required();
  e->add_option("--labels", ev.labels, "Label file")->required();
  e->add_option("--margin", ev.margin, "Match tolerance in samples")->check(CLI::NonNegativeNumber);

  ExperimentArgs ex;
  auto* x = app.add_subcommand("experiment", "Two-sample error studies on the GMM pair");
  x->add_option("name", ex.name, "errors-vs-window | errors-vs-noise | proj-dim")->required();
  x->add_option("--windows", ex.windows, "Comma-separated window sizes");
  x->add_option("--noise", ex.noise, "Comma-separated noise variances");
  x->add_option("--dims", ex.dims, "Comma-separated projection dims");
  x->add_option("--model", ex.model, "Learned model (trained on the fly when omitted)");
  x->add_option("--trials", ex.trials, "Draws per hypothesis");
  x->add_option("--seed", ex.seed, "Seed");
  x->add_option("--noise-var", ex.noise_var, "Noise variance for window and rank studies");
  x->add_option("--window", ex.window, "Window for noise and rank studies");
  x->add_option("--train-iters", ex.train_iters, "Iterations when training on the fly");
  x->add_option("--train-changes", ex.train_changes, "Change points in the training stream");
  x->add_option("--gmm-form", ex.gmm_form, "mixture | additive");
  x->add_option("--out", ex.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out, err);
    if (*d) return cmd_detect(de, out);
    if (*e) return cmd_eval(ev, out);
    if (*x) return cmd_experiment(ex, out);
  } catch (const InputError& ex_) {
    err << "error: " << ex_.what() << "\n";
    if (*g) err << g->help();
    return 2;
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace sinkcpd::cli
