#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mcpca/baselines.hpp"
#include "mcpca/decompose.hpp"
#include "mcpca/diagnostics.hpp"
#include "mcpca/error.hpp"
#include "mcpca/ingest.hpp"
#include "mcpca/kernels.hpp"
#include "mcpca/model_io.hpp"
#include "mcpca/model_select.hpp"
#include "mcpca/random.hpp"
#include "mcpca/synth.hpp"

namespace mcpca::cli {

namespace fs = std::filesystem;

namespace {

// Parses "2,3,5" and ranges such as "2-5" (or a mix, "2-4,8").
std::vector<Eigen::Index> parse_index_list(const std::string& text, const char* what) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto dash = item.find('-', 1);
      if (dash != std::string::npos) {
        const long long lo = std::stoll(item.substr(0, dash), &used);
        const long long hi = std::stoll(item.substr(dash + 1));
        if (hi < lo) throw InputError(std::string("descending range in ") + what);
        for (long long v = lo; v <= hi; ++v) out.push_back(static_cast<Eigen::Index>(v));
      } else {
        const long long v = std::stoll(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(static_cast<Eigen::Index>(v));
      }
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw InputError(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  return out;
}

struct FitFlags {
  std::uint64_t seed = 0;
  int restarts = 10;
  double tol = FitConfig{}.tol;
  int max_iter = 500;

  void add(CLI::App* cmd, bool with_seed = true) {
    if (with_seed)
      cmd->add_option("--seed", seed, "Random seed for power-iteration starts")->capture_default_str();
    cmd->add_option("--restarts", restarts, "Random restarts per component")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--tol", tol, "Stop when 1-|cos| between iterates is below this")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "Power iterations per restart")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  FitConfig config() const {
    FitConfig cfg;
    cfg.seed = seed;
    cfg.restarts_per_component = restarts;
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    return cfg;
  }
};

// Dataset after optional global PCA, with what the model file needs to replay it.
struct Prepared {
  ContextDataset data;
  Preprocessing pre;
};

Prepared prepare(const std::string& input, const std::string& format, std::optional<Eigen::Index> pca) {
  Prepared out;
  out.data = load_contexts(input, parse_input_format(format));
  if (pca) {
    PcaReduction red = global_pca_reduce(out.data, *pca);
    out.pre.pca_components = *pca;
    out.pre.projection = red.projection;
    out.pre.pooled_mean = red.pooled_mean;
    out.data = std::move(red.reduced);
  }
  return out;
}

// Applies the model's stored projection to raw-dimension data.
ContextDataset apply_preprocessing(ContextDataset d, const Preprocessing& pre, Eigen::Index p) {
  if (!pre.projection) {
    if (d.p() != p)
      throw InputError("data has " + std::to_string(d.p()) + " variables, model expects " + std::to_string(p));
    return d;
  }
  const Matrix& P = *pre.projection;
  if (d.p() != P.cols())
    throw InputError("data has " + std::to_string(d.p()) + " variables, model's projection expects " +
                     std::to_string(P.cols()));
  const Vector mean = pre.pooled_mean ? *pre.pooled_mean : Vector::Zero(P.cols());
  for (auto& c : d.contexts) c.data = (c.data.rowwise() - mean.transpose()) * P.transpose();
  return d;
}

std::vector<std::string> component_header(Eigen::Index r) {
  std::vector<std::string> h;
  for (Eigen::Index j = 0; j < r; ++j) h.push_back("mcpc" + std::to_string(j + 1));
  return h;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

std::string zero_padded(Eigen::Index value, Eigen::Index max_value) {
  const auto width = std::to_string(max_value).size();
  std::string s = std::to_string(value);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

int cmd_fit(const std::string& input, const std::string& format, Eigen::Index rank,
            std::optional<Eigen::Index> pca, const FitFlags& flags, const fs::path& output,
            fs::path report_path, std::ostream& out) {
  Prepared prep = prepare(input, format, pca);
  const CovarianceTensor t = build_tensor(prep.data);
  if (rank > t.p())
    throw InputError("rank " + std::to_string(rank) + " exceeds p = " + std::to_string(t.p()) +
                     "; MCPCA requires r ≤ p");
  auto [model, report] = fit_mcpca(t, rank, flags.config());
  model.context_ids = prep.data.ids();
  ModelFile mf{std::move(model), prep.pre};
  save_model(output, mf);
  if (report_path.empty()) report_path = fs::path(output).replace_extension(".report.json");
  write_text_file(report_path, serialize_report(report, prep.pre));
  out << "fit rank " << rank << " on " << t.k() << " contexts x " << t.p() << " variables; reconstruction error "
      << format_double(report.reconstruction_error) << "\n";
  if (report.non_identifiable_suspect)
    out << "warning: collinear loading columns; components of those pairs are not identifiable\n";
  return kExitOk;
}

int cmd_select_rank(const std::string& input, const std::string& format, const std::string& candidates,
                    double threshold, int pairs, std::optional<Eigen::Index> pca, const FitFlags& flags,
                    const fs::path& output, std::ostream& out) {
  const auto ranks = parse_index_list(candidates, "candidates");
  if (ranks.empty()) throw InputError("candidate list is empty");
  Prepared prep = prepare(input, format, pca);
  const CovarianceTensor t = build_tensor(prep.data);
  const RankSelectionReport rep = select_rank(t, ranks, threshold, pairs, flags.config());
  write_text_file(output, serialize_rank_report(rep));
  out << "chosen rank: " << (rep.chosen ? std::to_string(*rep.chosen) : std::string("none")) << "\n";
  return kExitOk;
}

int cmd_score(const fs::path& model_path, const fs::path& data_path, const fs::path& output, bool center,
              std::ostream&) {
  const ModelFile mf = load_model(model_path);
  Matrix X = read_matrix(data_path);
  const Eigen::Index expected = mf.preprocessing.projection ? mf.preprocessing.projection->cols() : mf.model.p();
  if (X.cols() != expected)
    throw InputError("data has " + std::to_string(X.cols()) + " columns, model expects " + std::to_string(expected));
  if (center) X = (X.rowwise() - X.colwise().mean()).eval();
  if (mf.preprocessing.projection) {
    // Per-context centering already removed any shift, so the pooled mean is
    // only subtracted for uncentered scoring.
    if (!center && mf.preprocessing.pooled_mean) X = (X.rowwise() - mf.preprocessing.pooled_mean->transpose()).eval();
    X = X * mf.preprocessing.projection->transpose();
  }
  const Matrix scores = score_samples(mf.model, X);
  auto file = open_output(output);
  write_csv(file, scores, component_header(mf.model.r()));
  return kExitOk;
}

int cmd_diag(const fs::path& model_path, const std::string& input, const std::string& format,
             const fs::path& output, std::ostream& out) {
  const ModelFile mf = load_model(model_path);
  const ContextDataset d =
      apply_preprocessing(load_contexts(input, parse_input_format(format)), mf.preprocessing, mf.model.p());
  if (d.k() != mf.model.k())
    throw InputError("input has " + std::to_string(d.k()) + " contexts, model has " + std::to_string(mf.model.k()));
  const CovarianceTensor t = build_tensor(d);
  const auto [total, per] = reconstruction_error(t, mf.model);
  const VarianceExplained ve = variance_explained(t, mf.model);
  const auto unc = uncorrelatedness_score(t, mf.model);
  const auto kl = kl_loss(t, mf.model);

  auto file = open_output(output);
  file << "context,reconstruction_error,explained_ratio,naive_explained_ratio,residual_explained_ratio,"
          "uncorrelatedness,kl_loss,kl_status\n";
  int flagged = 0;
  for (Eigen::Index i = 0; i < t.k(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    file << d.contexts[s].id << ',' << format_double(per[s]) << ',' << format_double(ve.ratio[s]) << ','
         << format_double(ve.naive_ratio[s]) << ',' << format_double(ve.residual_ratio[s]) << ','
         << format_double(unc[s]) << ',';
    if (kl[s].value) {
      file << format_double(*kl[s].value) << ",ok\n";
    } else {
      file << ",not_positive_definite\n";
      ++flagged;
    }
  }
  out << "total reconstruction error " << format_double(total) << "\n";
  if (flagged) out << flagged << " context(s) have a non-positive-definite projected covariance\n";
  return kExitOk;
}

struct BenchFlags {
  std::string mode = "accuracy";
  Eigen::Index p = 100, k = 50, r = 60;
  double density = 0.2;
  Eigen::Index N = 1000;
  std::string N_grid = "10,100,1000,10000,100000";
  int trials = 40;
  std::string methods = "mcpca,pca_stack,jennrich";
  std::uint64_t seed = 0;
  bool noiseless = false;
  bool orthonormal = false;
  std::string external_dir;
  std::string export_dir;
  std::string output;
};

void export_trial(const fs::path& dir, int trial, const PlantedModel& pm, const CovarianceTensor& t) {
  fs::create_directories(dir);
  const std::string stem = "trial_" + std::to_string(trial);
  {
    auto f = open_output(dir / (stem + "_A_true.csv"));
    write_csv(f, pm.A_true);
  }
  {
    auto f = open_output(dir / (stem + "_B_true.csv"));
    write_csv(f, pm.B_true);
  }
  auto f = open_output(dir / (stem + "_covariance.csv"));
  f << "context";
  for (Eigen::Index j = 0; j < t.p(); ++j) f << ",v" << j + 1;
  f << '\n';
  for (Eigen::Index i = 0; i < t.k(); ++i)
    for (Eigen::Index row = 0; row < t.p(); ++row) {
      f << i + 1;
      for (Eigen::Index j = 0; j < t.p(); ++j) f << ',' << format_double(t.slice(i)(row, j));
      f << '\n';
    }
}

int cmd_bench(const BenchFlags& b, bool trials_given, const FitFlags& flags, std::ostream& out) {
  if (b.trials < 1) throw InputError("--trials must be at least 1");
  std::vector<Method> methods;
  {
    std::stringstream ss(b.methods);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) methods.push_back(parse_method(item));
  }
  const bool wants_external = std::find(methods.begin(), methods.end(), Method::external) != methods.end();
  if (wants_external && b.external_dir.empty()) throw InputError("method 'external' needs --external-dir");

  std::vector<TrialRecord> records;
  if (b.mode == "accuracy") {
    AccuracyConfig c;
    c.p = b.p;
    c.k = b.k;
    c.r = b.r;
    c.density = b.density;
    c.N = b.N;
    c.n_trials = b.trials;
    c.methods = methods;
    c.seed = b.seed;
    c.noiseless = b.noiseless;
    c.orthonormal = b.orthonormal;
    c.fit = flags.config();
    if (!b.external_dir.empty()) {
      const fs::path dir = b.external_dir;
      c.external = [dir](int trial) -> std::optional<Matrix> {
        const fs::path f = dir / ("trial_" + std::to_string(trial) + ".csv");
        if (!fs::exists(f)) return std::nullopt;
        return read_matrix(f);
      };
    }
    if (!b.export_dir.empty()) {
      const fs::path dir = b.export_dir;
      c.on_trial = [dir](int trial, const PlantedModel& pm, const CovarianceTensor& t) {
        export_trial(dir, trial, pm, t);
      };
    }
    records = run_accuracy_trials(c);
  } else if (b.mode == "sweep") {
    if (wants_external) throw InputError("method 'external' is only supported in accuracy mode");
    if (b.noiseless) throw InputError("--noiseless does not apply to sweep mode");
    SweepConfig c;
    c.p = b.p;
    c.k = b.k;
    c.r = b.r;
    c.density = b.density;
    c.N_grid = parse_index_list(b.N_grid, "N grid");
    c.repetitions = trials_given ? b.trials : 1;
    c.methods = methods;
    c.seed = b.seed;
    c.orthonormal = b.orthonormal;
    c.fit = flags.config();
    records = run_sample_sweep(c);
  } else {
    throw InputError("--mode must be 'accuracy' or 'sweep'");
  }
  auto file = open_output(b.output);
  write_records(file, records);
  out << "wrote " << records.size() << " records to " << b.output << "\n";
  return kExitOk;
}

struct GenerateFlags {
  Eigen::Index p = 20, k = 10, r = 3;
  double density = 0.5;
  Eigen::Index N = 1000;
  std::uint64_t seed = 0;
  bool orthonormal = false;
  bool exact = false;
  bool generic = true;
  std::string output_dir;
};

int cmd_generate(const GenerateFlags& g, std::ostream& out) {
  const PlantedModel pm = g.generic ? generate_generic_planted(g.p, g.k, g.r, g.density, g.orthonormal, g.seed)
                                    : generate_planted(g.p, g.k, g.r, g.density, g.orthonormal, g.seed);
  const ContextDataset d = g.exact ? exact_dataset(pm) : sample_dataset(pm, g.N, derive_seed(g.seed, 1));
  const fs::path root = g.output_dir;
  const fs::path ctx_dir = root / "contexts";
  fs::create_directories(ctx_dir);
  for (Eigen::Index i = 0; i < d.k(); ++i) {
    auto f = open_output(ctx_dir / ("context" + zero_padded(i + 1, d.k()) + ".csv"));
    write_csv(f, d.contexts[static_cast<std::size_t>(i)].data);
  }
  {
    auto f = open_output(root / "A_true.csv");
    write_csv(f, pm.A_true);
  }
  auto f = open_output(root / "B_true.csv");
  write_csv(f, pm.B_true);
  out << "wrote " << d.k() << " contexts to " << ctx_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-context principal component analysis"};
  app.name(args.empty() ? "mcpca" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  // fit
  std::string input, format = "auto", output, report;
  Eigen::Index rank = 0;
  std::optional<Eigen::Index> pca;
  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit an MCPCA model at a given rank");
  fit->add_option("--input", input, "Data directory (one file per context) or long table")->required();
  fit->add_option("--format", format, "auto, long-table or per-context-files")->capture_default_str();
  fit->add_option("--rank", rank, "Number of components r (1 <= r <= p)")->required()->check(CLI::PositiveNumber);
  fit->add_option("--pca-components", pca, "Reduce to this many global principal components first");
  fit->add_option("--output", output, "Model file to write")->required();
  fit->add_option("--report", report, "Fit report file (default: <output>.report.json)");
  fit_flags.add(fit);

  // select-rank
  std::string candidates;
  double threshold = kDefaultStabilityThreshold;
  int pairs = kDefaultSeedPairs;
  auto* sel = app.add_subcommand("select-rank", "Choose the largest seed-stable rank among candidates");
  sel->add_option("--input", input, "Data directory or long table")->required();
  sel->add_option("--format", format, "auto, long-table or per-context-files")->capture_default_str();
  sel->add_option("--candidates", candidates, "Candidate ranks, e.g. 2,3,4,5 or 2-5")->required();
  sel->add_option("--threshold", threshold, "Minimum mean cross-seed Ascore")->capture_default_str();
  sel->add_option("--n-seed-pairs", pairs, "Seed pairs per candidate")->check(CLI::PositiveNumber)->capture_default_str();
  sel->add_option("--pca-components", pca, "Reduce to this many global principal components first");
  sel->add_option("--output", output, "Report file to write")->required();
  fit_flags.add(sel);

  // score
  std::string model_path, data_path;
  bool no_center = false;
  auto* score = app.add_subcommand("score", "Project samples onto the MCPCs with the pseudo-inverse of A");
  score->add_option("--model", model_path, "Model file")->required();
  score->add_option("--data", data_path, "Samples (rows) x variables table")->required();
  score->add_option("--output", output, "Scores table to write")->required();
  score->add_flag("--no-center", no_center, "Data is already centered");

  // diag
  auto* diag = app.add_subcommand("diag", "Per-context diagnostics of a fitted model");
  diag->add_option("--model", model_path, "Model file")->required();
  diag->add_option("--input", input, "Data directory or long table")->required();
  diag->add_option("--format", format, "auto, long-table or per-context-files")->capture_default_str();
  diag->add_option("--output", output, "Diagnostics table to write")->required();

  // bench
  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Synthetic accuracy trials or sample-size sweeps");
  bench->add_option("--mode", bench_flags.mode, "accuracy or sweep")->capture_default_str();
  bench->add_option("--p", bench_flags.p, "Variables")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--k", bench_flags.k, "Contexts")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--r", bench_flags.r, "Rank")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--density", bench_flags.density, "Nonzero density of B")->capture_default_str();
  bench->add_option("--N", bench_flags.N, "Samples per context (accuracy mode)")->capture_default_str();
  bench->add_option("--N-grid", bench_flags.N_grid, "Sample sizes (sweep mode)")->capture_default_str();
  auto* trials_opt = bench->add_option("--trials", bench_flags.trials,
                                       "Trials (accuracy) or repetitions per grid point (sweep)")
                         ->capture_default_str();
  bench->add_option("--methods", bench_flags.methods, "Comma-separated: mcpca, pca_stack, jennrich, external")
      ->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "Master seed (fit seeds are derived from it)")->capture_default_str();
  bench->add_flag("--noiseless", bench_flags.noiseless, "Use exact covariances instead of samples (N recorded as 0)");
  bench->add_flag("--orthonormal", bench_flags.orthonormal, "Plant orthonormal components");
  bench->add_option("--external-dir", bench_flags.external_dir, "Directory of trial_<t>.csv component matrices");
  bench->add_option("--export-dir", bench_flags.export_dir, "Write each trial's planted model and covariances here");
  bench->add_option("--output", bench_flags.output, "Records table to write")->required();
  FitFlags bench_fit;
  bench_fit.add(bench, false);

  // generate
  GenerateFlags gen_flags;
  auto* gen = app.add_subcommand("generate", "Write a planted-model dataset directory");
  gen->add_option("--p", gen_flags.p, "Variables")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--k", gen_flags.k, "Contexts")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--r", gen_flags.r, "Rank")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--density", gen_flags.density, "Nonzero density of B")->capture_default_str();
  gen->add_option("--N", gen_flags.N, "Samples per context")->capture_default_str();
  gen->add_option("--seed", gen_flags.seed, "Seed")->capture_default_str();
  gen->add_flag("--orthonormal", gen_flags.orthonormal, "Plant orthonormal components");
  gen->add_flag("--exact", gen_flags.exact, "Write 2r rows per context whose covariance is exactly A B_i A^T");
  gen->add_flag("!--allow-collinear", gen_flags.generic, "Do not redraw collinear or zero loading columns");
  gen->add_option("--output-dir", gen_flags.output_dir, "Directory to create")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    kernels::configure_threads_from_env();
    if (fit->parsed()) return cmd_fit(input, format, rank, pca, fit_flags, output, report, out);
    if (sel->parsed())
      return cmd_select_rank(input, format, candidates, threshold, pairs, pca, fit_flags, output, out);
    if (score->parsed()) return cmd_score(model_path, data_path, output, !no_center, out);
    if (diag->parsed()) return cmd_diag(model_path, input, format, output, out);
    if (bench->parsed()) return cmd_bench(bench_flags, trials_opt->count() > 0, bench_fit, out);
    if (gen->parsed()) return cmd_generate(gen_flags, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace mcpca::cli
