#include "gcvae/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcvae/errors.hpp"
#include "gcvae/eval.hpp"
#include "gcvae/io.hpp"
#include "gcvae/training.hpp"

namespace gcvae {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  SyntheticSpec spec;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  a.spec.validate();
  const auto syn = generate_synthetic(a.spec);
  write_csv(a.out, to_table(syn.data));
  Json sidecar;
  sidecar["k_true"] = a.spec.k_true;
  sidecar["n"] = a.spec.n;
  sidecar["d_latent_true"] = a.spec.d_latent_true;
  sidecar["d_x"] = a.spec.d_x;
  sidecar["d_y"] = a.spec.d_y;
  sidecar["cluster_separation"] = a.spec.cluster_separation;
  sidecar["distractor_dims"] = a.spec.distractor_dims;
  sidecar["distractor_scale"] = a.spec.distractor_scale;
  sidecar["distractor_rank"] = a.spec.distractor_rank;
  sidecar["y_noise_sd"] = a.spec.y_noise_sd;
  sidecar["seed"] = a.spec.seed;
  sidecar["guide_columns"] = syn.data.guide_names;
  sidecar["label_column"] = syn.data.label_name;
  Json sig = Json::array();
  for (std::size_t k = 0; k < syn.signatures.rows(); ++k) {
    sig.push_back(std::vector<double>(syn.signatures.row(k).begin(), syn.signatures.row(k).end()));
  }
  sidecar["signatures"] = std::move(sig);
  write_text_file(a.out + ".spec.json", sidecar.dump(2) + "\n");
  out << "wrote " << syn.data.rows() << " rows to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOverrides {
  std::optional<std::size_t> K, J, L, epochs_pretrain, epochs_train, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta_train, beta_pretrain, lr_net, lr_gmm, lr_net_pretrain;
  std::optional<std::string> mode;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string guide_cols;
  std::string label_col = "label";
  std::string out;
  bool latent_snapshots = false;
  TrainOverrides over;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_config(a.config);
  const auto& o = a.over;
  if (o.K) c.K = *o.K;
  if (o.J) c.J = *o.J;
  if (o.L) c.L = *o.L;
  if (o.epochs_pretrain) c.epochs_pretrain = *o.epochs_pretrain;
  if (o.epochs_train) c.epochs_train = *o.epochs_train;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.seed) c.seed = *o.seed;
  if (o.beta_train) c.beta_train = *o.beta_train;
  if (o.beta_pretrain) c.beta_pretrain = *o.beta_pretrain;
  if (o.lr_net) c.lr_net = *o.lr_net;
  if (o.lr_gmm) c.lr_gmm = *o.lr_gmm;
  if (o.lr_net_pretrain) c.lr_net_pretrain = *o.lr_net_pretrain;
  if (o.mode) c.mode = train_mode_from_string(*o.mode);
  c.validate();
  return c;
}

void write_latent(const fs::path& path, const Matrix& latent, std::span<const std::size_t> assignments) {
  CsvTable t;
  for (std::size_t j = 0; j < latent.cols(); ++j) t.names.push_back("z" + std::to_string(j));
  t.names.push_back("cluster");
  t.values = Matrix(latent.rows(), latent.cols() + 1);
  for (std::size_t i = 0; i < latent.rows(); ++i) {
    for (std::size_t j = 0; j < latent.cols(); ++j) t.values(i, j) = latent(i, j);
    t.values(i, latent.cols()) = static_cast<double>(assignments[i]);
  }
  write_csv(path, t);
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  using Clock = std::chrono::steady_clock;
  const TrainConfig config = resolve_config(a);
  const auto guides = split_list(a.guide_cols);
  if (guides.empty()) throw ConfigError("--guide-cols: at least one guide column is required");

  const CsvTable table = read_csv(a.data);
  const std::optional<std::string> label =
      table.has_column(a.label_col) ? std::optional<std::string>(a.label_col) : std::nullopt;
  const Dataset data = dataset_from_table(table, guides, label);
  const DataSplit parts = split(data, {0.7, 0.2, 0.1}, config.seed);
  if (parts.train.rows() < config.K) {
    throw DataError("training split has " + std::to_string(parts.train.rows()) + " rows, fewer than K=" +
                    std::to_string(config.K));
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  if (a.latent_snapshots) ensure_dir(dir / "latent");

  RunManifest manifest;
  manifest.config = config;
  manifest.data = fingerprint_file(a.data, table);
  manifest.tool_version = kToolVersion;
  manifest.artifacts = {{"manifest", "manifest.json"}, {"metrics", "metrics.log"}, {"checkpoint", "checkpoint.final"}};
  if (a.latent_snapshots) manifest.artifacts["latent_snapshots"] = "latent/";
  manifest.splits = {{"train", parts.train_idx}, {"val", parts.val_idx}, {"test", parts.test_idx}};
  write_text_file(dir / "manifest.json", manifest_to_json(manifest));

  std::ofstream metrics(dir / "metrics.log", std::ios::binary | std::ios::trunc);
  if (!metrics) throw DataError("cannot write " + (dir / "metrics.log").string());

  TrainingObserver obs;
  obs.on_epoch = [&](const EpochMetrics& m) {
    metrics << metrics_record(m) << '\n';
    metrics.flush();
    out << to_string(m.phase) << " epoch " << m.epoch << "  val total " << format_double(m.val.total);
    if (m.acc) out << "  acc " << format_double(*m.acc);
    out << '\n';
  };
  obs.on_warning = [&](const std::string& w) {
    err << "warning: " << w << '\n';
    manifest.warnings.push_back(w);
  };
  if (a.latent_snapshots) {
    obs.on_latent = [&](const EpochMetrics& m, const Matrix& latent, std::span<const std::size_t> assign) {
      std::ostringstream name;
      name << to_string(m.phase) << "-" << std::setw(4) << std::setfill('0') << m.epoch << ".csv";
      write_latent(dir / "latent" / name.str(), latent, assign);
    };
  }

  const TrainingData td{parts.train, parts.val};
  auto seconds = [](Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); };
  try {
    auto t0 = Clock::now();
    auto pre = pretrain(config, td, obs);
    manifest.timings_s["pretrain"] = seconds(t0);
    t0 = Clock::now();
    GmmParams gmm = init_gmm_from_latent(pre.encoder, model_input(config.mode, td.train), config.K, config.seed,
                                         config.var_floor);
    manifest.timings_s["init_gmm"] = seconds(t0);
    t0 = Clock::now();
    auto result = train(config, td, std::move(pre.encoder), std::move(pre.decoder), std::move(gmm), obs);
    manifest.timings_s["train"] = seconds(t0);
    save_checkpoint(dir / "checkpoint.final", result.checkpoint);
  } catch (const NumericalError& e) {
    manifest.status = std::string("aborted: ") + e.what();
    write_text_file(dir / "manifest.json", manifest_to_json(manifest));
    throw;
  }
  manifest.status = "complete";
  write_text_file(dir / "manifest.json", manifest_to_json(manifest));
  out << "run written to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string assign = "hard";
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
};

Matrix columns_normalized(const CsvTable& table, const std::vector<std::string>& names,
                          const std::vector<ColumnRange>& ranges) {
  Matrix M(table.values.rows(), names.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::size_t src = table.column(names[c]);
    for (std::size_t i = 0; i < M.rows(); ++i) M(i, c) = ranges[c].normalize(table.values(i, src));
  }
  return M;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const CsvTable table = read_csv(a.data);
  std::vector<std::string> expected = ck.schema.feature_names;
  if (ck.config.mode == TrainMode::unguided_joint) {
    expected.insert(expected.end(), ck.schema.guide_names.begin(), ck.schema.guide_names.end());
  }
  std::vector<std::string> missing;
  for (const auto& name : expected)
    if (!table.has_column(name)) missing.push_back(name);
  if (!missing.empty()) {
    throw DataError("feature mismatch: expected columns [" + join(expected) + "], found [" + join(table.names) +
                    "], missing [" + join(missing) + "]");
  }
  Matrix X = columns_normalized(table, ck.schema.feature_names, ck.schema.x_ranges);
  if (ck.config.mode == TrainMode::unguided_joint) {
    X = Matrix::hconcat(X, columns_normalized(table, ck.schema.guide_names, ck.schema.y_ranges));
  }

  const InferenceResult r = infer(ck, X);
  std::vector<std::size_t> assignments = r.assignments;
  if (a.assign == "gumbel") {
    const Matrix s = sample_assignments(r.q, a.tau.value_or(ck.config.tau), a.seed.value_or(ck.config.seed));
    for (std::size_t i = 0; i < s.rows(); ++i) assignments[i] = argmax(s.row(i));
  } else if (a.assign != "hard") {
    throw ConfigError("--assign: expected \"hard\" or \"gumbel\", got \"" + a.assign + "\"");
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  const std::size_t K = r.q.q.cols();
  CsvTable assign_table;
  assign_table.names = {"row", "cluster"};
  for (std::size_t k = 0; k < K; ++k) assign_table.names.push_back("q" + std::to_string(k));
  assign_table.values = Matrix(X.rows(), K + 2);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    assign_table.values(i, 0) = static_cast<double>(i);
    assign_table.values(i, 1) = static_cast<double>(assignments[i]);
    for (std::size_t k = 0; k < K; ++k) assign_table.values(i, k + 2) = r.q.q(i, k);
  }
  write_csv(dir / "assignments.csv", assign_table);
  write_latent(dir / "latent.csv", r.latent, assignments);
  out << "wrote " << X.rows() << " assignments to " << (dir / "assignments.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> assignments;
  std::string data;
  std::optional<std::string> label_col;
  std::string guide_cols;
  std::string out;
};

std::vector<std::size_t> read_assignments(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t col = t.column("cluster");
  std::vector<std::size_t> a(t.values.rows());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = t.values(i, col);
    if (v < 0.0 || v != std::floor(v)) {
      throw DataError(path + " row " + std::to_string(i + 2) + ": cluster ids must be non-negative integers");
    }
    a[i] = static_cast<std::size_t>(v);
  }
  return a;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const CsvTable table = read_csv(a.data);
  std::optional<std::string> label = a.label_col;
  if (label && !table.has_column(*label)) throw DataError("missing column '" + *label + "'");
  if (!label && table.has_column("label")) label = "label";
  const Dataset data = dataset_from_table(table, split_list(a.guide_cols), label);

  const fs::path dir(a.out);
  ensure_dir(dir);
  Json report;
  report["data"] = a.data;
  report["nmi_normalization"] = "arithmetic mean of entropies";
  report["runs"] = Json::array();
  for (std::size_t r = 0; r < a.assignments.size(); ++r) {
    const auto assign = read_assignments(a.assignments[r]);
    if (assign.size() != data.rows()) {
      throw DataError(a.assignments[r] + ": " + std::to_string(assign.size()) + " assignments for " +
                      std::to_string(data.rows()) + " data rows");
    }
    Json run;
    run["assignments"] = a.assignments[r];
    out << a.assignments[r] << ":";
    if (data.labels) {
      const auto table_c = contingency(assign, *data.labels);
      run["acc"] = clustering_accuracy(assign, *data.labels);
      run["nmi"] = nmi(assign, *data.labels);
      Json counts = Json::array();
      for (std::size_t p = 0; p < table_c.counts.rows(); ++p) {
        std::vector<std::size_t> row;
        for (std::size_t t = 0; t < table_c.counts.cols(); ++t) row.push_back(static_cast<std::size_t>(table_c.counts(p, t)));
        counts.push_back(row);
      }
      run["contingency"] = std::move(counts);
      out << " acc " << format_double(run["acc"].get<double>()) << "  nmi " << format_double(run["nmi"].get<double>());
    }
    const auto profile = cluster_profiles(data, assign);
    const std::string stem = "profiles_" + std::to_string(r);
    {
      std::ofstream f(dir / (stem + ".csv"));
      write_profile_csv(f, profile);
      std::ofstream t(dir / (stem + ".txt"));
      write_profile_text(t, profile);
    }
    run["profiles_csv"] = stem + ".csv";
    run["profiles_txt"] = stem + ".txt";
    out << "  profiles " << (dir / (stem + ".txt")).string() << '\n';
    report["runs"].push_back(std::move(run));
  }
  write_text_file(dir / "eval.json", report.dump(2) + "\n");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guided clustering with a Gaussian-mixture VAE", "gcvae"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic guided-clustering CSV");
  g->add_option("--out", gen.out, "Output CSV path")->required();
  g->add_option("--k-true", gen.spec.k_true, "Number of true clusters")->capture_default_str();
  g->add_option("--n", gen.spec.n, "Rows")->capture_default_str();
  g->add_option("--d-latent-true", gen.spec.d_latent_true)->capture_default_str();
  g->add_option("--d-x", gen.spec.d_x, "Feature columns")->capture_default_str();
  g->add_option("--d-y", gen.spec.d_y, "Guide columns")->capture_default_str();
  g->add_option("--cluster-separation", gen.spec.cluster_separation)->capture_default_str();
  g->add_option("--distractor-dims", gen.spec.distractor_dims)->capture_default_str();
  g->add_option("--distractor-scale", gen.spec.distractor_scale)->capture_default_str();
  g->add_option("--distractor-rank", gen.spec.distractor_rank)->capture_default_str();
  g->add_option("--y-noise-sd", gen.spec.y_noise_sd)->capture_default_str();
  g->add_option("--seed", gen.spec.seed)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Pretrain, initialize the mixture prior and train");
  t->add_option("--config", tr.config, "JSON config file (fields absent keep their defaults)");
  t->add_option("--data", tr.data, "Input CSV")->required();
  t->add_option("--guide-cols", tr.guide_cols, "Comma-separated guide columns")->required();
  t->add_option("--label-col", tr.label_col, "Ground-truth column, used for metrics only if present")
      ->capture_default_str();
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_flag("--latent-snapshots", tr.latent_snapshots, "Write validation latent means after every epoch");
  t->add_option("--K", tr.over.K);
  t->add_option("--J", tr.over.J);
  t->add_option("--L", tr.over.L);
  t->add_option("--epochs-pretrain", tr.over.epochs_pretrain);
  t->add_option("--epochs-train", tr.over.epochs_train);
  t->add_option("--batch-size", tr.over.batch_size);
  t->add_option("--seed", tr.over.seed);
  t->add_option("--beta-train", tr.over.beta_train);
  t->add_option("--beta-pretrain", tr.over.beta_pretrain);
  t->add_option("--lr-net", tr.over.lr_net);
  t->add_option("--lr-gmm", tr.over.lr_gmm);
  t->add_option("--lr-net-pretrain", tr.over.lr_net_pretrain);
  t->add_option("--mode", tr.over.mode, "guided | unguided_joint");

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Cluster posteriors and latent means from features only");
  i->add_option("--checkpoint", inf.checkpoint)->required();
  i->add_option("--data", inf.data)->required();
  i->add_option("--out", inf.out, "Output directory")->required();
  i->add_option("--assign", inf.assign, "hard | gumbel")->capture_default_str();
  i->add_option("--tau", inf.tau, "Gumbel-Softmax temperature (default: config tau)");
  i->add_option("--seed", inf.seed, "Gumbel noise seed (default: config seed)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Accuracy, NMI, contingency and cluster profiles");
  e->add_option("--assignments", ev.assignments, "Assignment CSV with a 'cluster' column (repeatable)")->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--label-col", ev.label_col, "Ground-truth column (default: 'label' when present)");
  e->add_option("--guide-cols", ev.guide_cols, "Comma-separated guide columns for the profiles");
  e->add_option("--out", ev.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (i->parsed()) return cmd_infer(inf, out);
    if (e->parsed()) return cmd_eval(ev, out);
  } catch (const ConfigError& x) {
    err << "config error: " << x.what() << '\n';
    return 2;
  } catch (const DataError& x) {
    err << "data error: " << x.what() << '\n';
    return 3;
  } catch (const NumericalError& x) {
    err << "numerical error: " << x.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& x) {
    err << "error: " << x.what() << '\n';
    return 2;
  } catch (const std::exception& x) {
    err << "error: " << x.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace gcvae
