#include "cmit/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cmit/checkpoint.hpp"
#include "cmit/error.hpp"
#include "cmit/log.hpp"
#include "cmit/rng.hpp"
#include "cmit/version.hpp"

namespace cmit {

using json = nlohmann::ordered_json;

namespace {

std::string double_str(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

json cloud_to_json(const CloudNormConfig& c) {
  return json{{"noise_divisor", c.noise_divisor},
              {"train_stochastic", c.train_stochastic},
              {"eval_stochastic", c.eval_stochastic},
              {"epsilon", c.epsilon},
              {"affine", c.affine}};
}

void cloud_from_json(const json& j, CloudNormConfig& c) {
  c.noise_divisor = j.value("noise_divisor", c.noise_divisor);
  c.train_stochastic = j.value("train_stochastic", c.train_stochastic);
  c.eval_stochastic = j.value("eval_stochastic", c.eval_stochastic);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.affine = j.value("affine", c.affine);
}

json model_to_json(const ModelConfig& m) {
  return json{{"lookback", m.lookback},
              {"d_model", m.d_model},
              {"n_heads", m.n_heads},
              {"n_layers", m.n_layers},
              {"ffn_dim", m.ffn_dim},
              {"norm", m.norm == NormKind::layer ? "layer" : "cloud"},
              {"lr", m.lr},
              {"max_epochs", m.max_epochs},
              {"batch_size", m.batch_size},
              {"patience", m.patience},
              {"weight_decay", m.weight_decay},
              {"train_mse_goal", m.train_mse_goal},
              {"seed", m.seed},
              {"cloud", cloud_to_json(m.cloud)}};
}

void model_from_json(const json& j, ModelConfig& m) {
  m.lookback = j.value("lookback", m.lookback);
  m.d_model = j.value("d_model", m.d_model);
  m.n_heads = j.value("n_heads", m.n_heads);
  m.n_layers = j.value("n_layers", m.n_layers);
  m.ffn_dim = j.value("ffn_dim", m.ffn_dim);
  if (j.contains("norm")) {
    const std::string v = j.at("norm").get<std::string>();
    if (v == "layer") {
      m.norm = NormKind::layer;
    } else if (v == "cloud") {
      m.norm = NormKind::cloud;
    } else {
      throw ConfigError("config: norm must be 'layer' or 'cloud', got '" + v + "'");
    }
  }
  m.lr = j.value("lr", m.lr);
  m.max_epochs = j.value("max_epochs", m.max_epochs);
  m.batch_size = j.value("batch_size", m.batch_size);
  m.patience = j.value("patience", m.patience);
  m.weight_decay = j.value("weight_decay", m.weight_decay);
  m.train_mse_goal = j.value("train_mse_goal", m.train_mse_goal);
  m.seed = j.value("seed", m.seed);
  if (j.contains("cloud")) cloud_from_json(j.at("cloud"), m.cloud);
}

json swarm_to_json(const SwarmConfig& s) {
  return json{{"particles", s.particles},
              {"iterations", s.iterations},
              {"omega", s.omega},
              {"c1", s.c1},
              {"c2", s.c2},
              {"r_distribution",
               s.r_distribution == RandomCoefficients::standard_normal ? "standard_normal"
                                                                       : "uniform01"},
              {"position_update",
               s.position_update == PositionUpdate::paper ? "paper" : "standard"},
              {"seed", s.seed}};
}

void swarm_from_json(const json& j, SwarmConfig& s) {
  s.particles = j.value("particles", s.particles);
  s.iterations = j.value("iterations", s.iterations);
  s.omega = j.value("omega", s.omega);
  s.c1 = j.value("c1", s.c1);
  s.c2 = j.value("c2", s.c2);
  if (j.contains("r_distribution")) {
    const std::string v = j.at("r_distribution").get<std::string>();
    if (v == "standard_normal") {
      s.r_distribution = RandomCoefficients::standard_normal;
    } else if (v == "uniform01") {
      s.r_distribution = RandomCoefficients::uniform01;
    } else {
      throw ConfigError("config: unknown r_distribution '" + v + "'");
    }
  }
  if (j.contains("position_update")) {
    const std::string v = j.at("position_update").get<std::string>();
    if (v == "paper") {
      s.position_update = PositionUpdate::paper;
    } else if (v == "standard") {
      s.position_update = PositionUpdate::standard;
    } else {
      throw ConfigError("config: unknown position_update '" + v + "'");
    }
  }
  s.seed = j.value("seed", s.seed);
}

json range_to_json(const DateRange& r) {
  return json::array({format_date(r.first), format_date(r.last)});
}

DateRange range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("config: date range must be [first, last]");
  }
  return {parse_date(j[0].get<std::string>()), parse_date(j[1].get<std::string>())};
}

json split_to_json(const SplitSpec& s) {
  json train = json::array();
  for (const auto& r : s.train) train.push_back(range_to_json(r));
  return json{{"train", train},
              {"validation", range_to_json(s.validation)},
              {"test", range_to_json(s.test)}};
}

void split_from_json(const json& j, SplitSpec& s) {
  if (j.contains("train")) {
    s.train.clear();
    for (const auto& r : j.at("train")) s.train.push_back(range_from_json(r));
  }
  if (j.contains("validation")) s.validation = range_from_json(j.at("validation"));
  if (j.contains("test")) s.test = range_from_json(j.at("test"));
}

std::string norm_selection_name(NormSelection n) {
  switch (n) {
    case NormSelection::layer_only: return "layer";
    case NormSelection::cloud_only: return "cloud";
    default: return "both";
  }
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_paths.empty() && !synthetic) {
    throw ConfigError("config: provide dataset paths or a synthetic spec");
  }
  if (!dataset_paths.empty() && synthetic) {
    throw ConfigError("config: dataset paths and synthetic spec are mutually exclusive");
  }
  if (synthetic && synthetic->clusters == 0) {
    throw ConfigError("config: synthetic.clusters must be >= 1");
  }
  model_f1.validate();
  model_f2.validate();
  swarm.validate();
  if (out_dir.empty()) throw ConfigError("config: output directory required");
}

RunConfig run_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.model_f1.norm = NormKind::layer;
  cfg.model_f2.norm = NormKind::cloud;
  if (j.contains("datasets")) {
    for (const auto& p : j.at("datasets")) {
      cfg.dataset_paths.emplace_back(p.get<std::string>());
    }
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    SyntheticSpec spec;
    spec.clusters = s.value("clusters", spec.clusters);
    spec.days = s.value("days", spec.days);
    if (s.contains("start_date")) spec.start = parse_date(s.at("start_date").get<std::string>());
    cfg.synthetic = spec;
  }
  if (j.contains("split")) split_from_json(j.at("split"), cfg.split);
  if (j.contains("model")) {
    model_from_json(j.at("model"), cfg.model_f1);
    model_from_json(j.at("model"), cfg.model_f2);
  }
  cfg.model_f1.norm = NormKind::layer;
  cfg.model_f2.norm = NormKind::cloud;
  if (j.contains("model_f1")) model_from_json(j.at("model_f1"), cfg.model_f1);
  if (j.contains("model_f2")) model_from_json(j.at("model_f2"), cfg.model_f2);
  if (j.contains("swarm")) swarm_from_json(j.at("swarm"), cfg.swarm);
  if (j.contains("norm")) {
    const std::string v = j.at("norm").get<std::string>();
    if (v == "layer") {
      cfg.norms = NormSelection::layer_only;
    } else if (v == "cloud") {
      cfg.norms = NormSelection::cloud_only;
    } else if (v == "both") {
      cfg.norms = NormSelection::both;
    } else {
      throw ConfigError("config: norm must be layer|cloud|both");
    }
  }
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.workers = j.value("workers", cfg.workers);
  return cfg;
}

RunConfig run_config_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json_string(text);
}

std::string run_config_to_json_string(const RunConfig& cfg) {
  json j;
  if (!cfg.dataset_paths.empty()) {
    json d = json::array();
    for (const auto& p : cfg.dataset_paths) d.push_back(p.string());
    j["datasets"] = d;
  }
  if (cfg.synthetic) {
    j["synthetic"] = json{{"clusters", cfg.synthetic->clusters},
                          {"days", cfg.synthetic->days},
                          {"start_date", format_date(cfg.synthetic->start)}};
  }
  j["split"] = split_to_json(cfg.split);
  j["model_f1"] = model_to_json(cfg.model_f1);
  j["model_f2"] = model_to_json(cfg.model_f2);
  j["swarm"] = swarm_to_json(cfg.swarm);
  j["norm"] = norm_selection_name(cfg.norms);
  j["out"] = cfg.out_dir.string();
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  // The hash identifies the experiment content; where it is written and how
  // many workers ran it cannot change any emitted value.
  RunConfig canonical = cfg;
  canonical.out_dir = "";
  canonical.workers = 0;
  const std::string dump = run_config_to_json_string(canonical);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct DatasetJob {
  TimeSeriesDataset data;
  std::size_t index = 0;
  std::string load_error;  // non-empty when the source could not be read
};

void write_loss_trace(const std::filesystem::path& path, const TrainLog& log,
                      const std::string& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << provenance << '\n';
  out << "epoch,train_mse" << (log.val_loss.empty() ? "" : ",val_mse") << '\n';
  for (std::size_t e = 0; e < log.train_loss.size(); ++e) {
    out << e << ',' << double_str(log.train_loss[e]);
    if (!log.val_loss.empty()) out << ',' << double_str(log.val_loss[e]);
    out << '\n';
  }
}

void write_predictions(const std::filesystem::path& path,
                       const WindowedDataset& windows,
                       const std::vector<std::pair<std::string, const std::vector<double>*>>& cols,
                       const std::string& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << provenance << '\n';
  out << "date,truth";
  for (const auto& [name, _] : cols) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out << format_date(windows.target_dates[i]) << ',' << double_str(windows.raw_targets[i]);
    for (const auto& [_, values] : cols) out << ',' << double_str((*values)[i]);
    out << '\n';
  }
}

}  // namespace

std::vector<std::filesystem::path> generate_datasets(std::size_t clusters, std::size_t days,
                                                     std::uint64_t seed,
                                                     const std::filesystem::path& out_dir) {
  if (clusters == 0) throw ConfigError("generate: need at least 1 cluster");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> paths;
  std::ofstream manifest(out_dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw IoError("cannot write manifest in " + out_dir.string());
  manifest << "# synthetic cluster datasets\n";
  manifest << "# version=" << kVersion << " seed=" << seed << " days=" << days << '\n';
  for (std::size_t c = 0; c < clusters; ++c) {
    const auto profile = default_profile(c, seed);
    char name[32];
    std::snprintf(name, sizeof(name), "cluster_%02zu", c + 1);
    auto ds = generate_synthetic(profile, days, mix_seed(seed, 0xD5ULL + c), name);
    const auto path = out_dir / (std::string(name) + ".csv");
    save_csv(ds, path);
    manifest << path.filename().string() << ' ' << ds.size() << " rows\n";
    paths.push_back(path);
  }
  return paths;
}

RunResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const std::string provenance = "version=" + std::string(kVersion) +
                                 " config_hash=" + hash +
                                 " seed=" + std::to_string(cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::create_directories(cfg.out_dir / "datasets");

  // Resolve inputs up front so failures in loading are per-dataset outcomes.
  std::vector<DatasetJob> jobs;
  if (cfg.synthetic) {
    for (std::size_t c = 0; c < cfg.synthetic->clusters; ++c) {
      const auto profile = default_profile(c, cfg.seed);
      char name[32];
      std::snprintf(name, sizeof(name), "cluster_%02zu", c + 1);
      DatasetJob job;
      job.index = c;
      job.data = generate_synthetic(profile, cfg.synthetic->days,
                                    mix_seed(cfg.seed, 0xD5ULL + c), name,
                                    cfg.synthetic->start);
      jobs.push_back(std::move(job));
    }
  } else {
    for (std::size_t i = 0; i < cfg.dataset_paths.size(); ++i) {
      DatasetJob job;
      job.index = i;
      job.data.id = cfg.dataset_paths[i].stem().string();
      try {
        job.data = load_csv(cfg.dataset_paths[i]);
      } catch (const Error& e) {
        job.load_error = e.what();
      }
      jobs.push_back(std::move(job));
    }
  }

  const std::vector<std::string> model_names = [&] {
    switch (cfg.norms) {
      case NormSelection::layer_only: return std::vector<std::string>{"Transformer"};
      case NormSelection::cloud_only: return std::vector<std::string>{"Cloud Transformer"};
      default:
        return std::vector<std::string>{"Transformer", "Cloud Transformer", "CMIT"};
    }
  }();

  std::vector<DatasetOutcome> outcomes(jobs.size());

  auto process = [&](const DatasetJob& job, DatasetOutcome& out) {
    out.id = job.data.id;
    if (!job.load_error.empty()) {
      out.ok = false;
      out.error = job.load_error;
      return;
    }
    const auto dataset_dir = cfg.out_dir / "datasets" / job.data.id;
    std::filesystem::create_directories(dataset_dir);

    const auto split = split_dataset(job.data, cfg.split);

    std::vector<double> train_loads;
    for (const auto& r : cfg.split.train) {
      for (Date d = r.first; d <= r.last; d += std::chrono::days(1)) {
        train_loads.push_back(job.data.loads[*job.data.index_of(d)]);
      }
    }
    const Scaler scaler = Scaler::fit(train_loads);

    ModelConfig f1_cfg = cfg.model_f1;
    ModelConfig f2_cfg = cfg.model_f2;
    f1_cfg.norm = NormKind::layer;
    f2_cfg.norm = NormKind::cloud;
    f1_cfg.seed = mix_seed(cfg.seed, (job.index << 3) | 1);
    f2_cfg.seed = mix_seed(cfg.seed, (job.index << 3) | 2);

    const auto train_w =
        make_windows(job.data, cfg.split.train, f1_cfg.lookback, scaler);
    const auto val_w =
        make_windows(job.data, {cfg.split.validation}, f1_cfg.lookback, scaler);
    const auto test_w = make_windows(job.data, {cfg.split.test}, f1_cfg.lookback, scaler);
    if (train_w.size() == 0 || val_w.size() == 0 || test_w.size() == 0) {
      throw ArgumentError("dataset " + job.data.id + ": a split produced no windows");
    }
    (void)split;

    const bool want_f1 = cfg.norms != NormSelection::cloud_only;
    const bool want_f2 = cfg.norms != NormSelection::layer_only;
    const bool want_fused = cfg.norms == NormSelection::both;

    std::optional<TrainedModel> f1, f2;
    std::vector<double> f1_test, f2_test, f1_val, f2_val;
    auto checkpoint_meta = [&](const ModelConfig& m) {
      return json{{"version", kVersion}, {"config_hash", hash}, {"model", model_to_json(m)}}
          .dump();
    };
    if (want_f1) {
      f1 = train_forecaster(f1_cfg, scaler, train_w, &val_w);
      save_checkpoint(dataset_dir / "f1.ckpt", f1->parameters, checkpoint_meta(f1_cfg));
      write_loss_trace(dataset_dir / "f1_loss.csv", f1->log, provenance);
      f1_val = predict(*f1, val_w);
      f1_test = predict(*f1, test_w);
    }
    if (want_f2) {
      f2 = train_forecaster(f2_cfg, scaler, train_w, &val_w);
      save_checkpoint(dataset_dir / "f2.ckpt", f2->parameters, checkpoint_meta(f2_cfg));
      write_loss_trace(dataset_dir / "f2_loss.csv", f2->log, provenance);
      f2_val = predict(*f2, val_w);
      f2_test = predict(*f2, test_w);
    }

    out.test_mapes.clear();
    if (want_f1) out.test_mapes.push_back(mape(test_w.raw_targets, f1_test));
    if (want_f2) out.test_mapes.push_back(mape(test_w.raw_targets, f2_test));

    if (want_fused) {
      write_predictions(dataset_dir / "val_predictions.csv", val_w,
                        {{"f1", &f1_val}, {"f2", &f2_val}});
      const auto set = build_ensemble_set(f1_val, f2_val, val_w.raw_targets);
      SwarmConfig swarm = cfg.swarm;
      swarm.seed = mix_seed(cfg.seed, (job.index << 3) | 3);
      const auto fit = pso_fit(set, swarm);
      out.pso_objective = fit.objective;
      out.corner_objectives = {ensemble_objective(set, std::vector<double>{1.0, 0.0}),
                               ensemble_objective(set, std::vector<double>{0.0, 1.0})};

      std::vector<double> fused_test(test_w.size());
      for (std::size_t i = 0; i < test_w.size(); ++i) {
        fused_test[i] = combine(std::vector<double>{f1_test[i], f2_test[i]}, fit.w);
      }
      out.test_mapes.push_back(mape(test_w.raw_targets, fused_test));

      write_predictions(dataset_dir / "test_predictions.csv", test_w,
                        {{"f1", &f1_test}, {"f2", &f2_test}, {"fused", &fused_test}});

      json weights{{"version", kVersion},
                   {"config_hash", hash},
                   {"seed", swarm.seed},
                   {"w", fit.w},
                   {"objective", fit.objective},
                   {"corner_objectives", out.corner_objectives},
                   {"swarm", swarm_to_json(swarm)},
                   {"trace", fit.trace}};
      std::ofstream wout(dataset_dir / "weights.json", std::ios::binary);
      if (!wout) throw IoError("cannot write weights.json for " + job.data.id);
      wout << weights.dump(2) << '\n';
    } else {
      std::vector<std::pair<std::string, const std::vector<double>*>> cols;
      if (want_f1) cols.push_back({"f1", &f1_test});
      if (want_f2) cols.push_back({"f2", &f2_test});
      write_predictions(dataset_dir / "test_predictions.csv", test_w, cols);
    }
    out.ok = true;
  };

  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t width = std::min(cfg.workers == 0 ? hw : cfg.workers, jobs.size());
  if (width <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      try {
        process(jobs[i], outcomes[i]);
      } catch (const std::exception& e) {
        outcomes[i].id = jobs[i].data.id;
        outcomes[i].ok = false;
        outcomes[i].error = e.what();
      }
      log_info("dataset " + outcomes[i].id + (outcomes[i].ok ? " done" : " FAILED"));
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) break;
        try {
          process(jobs[i], outcomes[i]);
        } catch (const std::exception& e) {
          outcomes[i].id = jobs[i].data.id;
          outcomes[i].ok = false;
          outcomes[i].error = e.what();
        }
        log_info("dataset " + outcomes[i].id + (outcomes[i].ok ? " done" : " FAILED"));
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunResult result;
  result.outcomes = outcomes;
  result.table.model_names = model_names;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++result.failures;
      continue;
    }
    result.table.dataset_ids.push_back(o.id);
    result.table.values.push_back(o.test_mapes);
  }

  // Aggregate artifacts.
  {
    std::ofstream cfg_out(cfg.out_dir / "run_config.json", std::ios::binary);
    if (!cfg_out) throw IoError("cannot write run_config.json");
    json meta{{"version", kVersion}, {"config_hash", hash}, {"seed", cfg.seed}};
    cfg_out << meta.dump(2) << '\n' << run_config_to_json_string(cfg) << '\n';
  }
  if (result.failures > 0) {
    std::ofstream f(cfg.out_dir / "failures.txt", std::ios::binary);
    for (const auto& o : outcomes) {
      if (!o.ok) f << o.id << ": " << o.error << '\n';
    }
  }
  if (!result.table.dataset_ids.empty()) {
    result.eval_table_path = cfg.out_dir / "eval_table.csv";
    save_eval_table(result.table, result.eval_table_path,
                    {"version=" + std::string(kVersion), "config_hash=" + hash,
                     "seed=" + std::to_string(cfg.seed)});
    emit_report(result.table, cfg.out_dir / "reports", /*with_svg=*/true,
                {"version=" + std::string(kVersion), "config_hash=" + hash,
                 "seed=" + std::to_string(cfg.seed)});
  }
  return result;
}

}  // namespace cmit
