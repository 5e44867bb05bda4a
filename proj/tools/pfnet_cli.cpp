// pfnet: dataset generation, training, completion, evaluation and diagnostics.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfnet/data/cloud_io.hpp"
#include "pfnet/data/dataset.hpp"
#include "pfnet/diagnostics/bench.hpp"
#include "pfnet/diagnostics/gradcheck.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/eval/metrics.hpp"
#include "pfnet/key_value.hpp"
#include "pfnet/model/pfnet.hpp"
#include "pfnet/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace pfnet;

namespace {

// Effective settings of one subcommand: defaults, then the --config file, then
// explicit flags. The merged map is what run_config.txt records.
class Settings {
 public:
  Settings(CLI::App* app, KeyValues defaults) : app_(app), kv_(std::move(defaults)) {
    app_->add_option("--config", config_path_, "key=value file; flags take precedence");
    app_->add_option("--out", out_, "output directory (default: $PFNET_OUTPUT_ROOT/<command>)");
  }

  void option(const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app_->add_option(flag, values_[key], help);
    options_.emplace_back(key, opt);
  }
  void flag(const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app_->add_flag(flag, help);
    flags_.emplace_back(key, opt);
  }

  void resolve() {
    if (!config_path_.empty()) {
      for (auto& [k, v] : read_key_values(config_path_)) {
        if (k == "command") continue;
        if (!kv_.count(k)) throw ConfigError(config_path_ + ": unknown key '" + k + "'");
        kv_[k] = v;
      }
    }
    for (const auto& [key, opt] : options_)
      if (opt->count() > 0) kv_[key] = values_[key];
    for (const auto& [key, opt] : flags_)
      if (opt->count() > 0) kv_[key] = "1";
  }

  const KeyValues& kv() const { return kv_; }
  KeyValues& kv() { return kv_; }
  const std::string& get(const std::string& key) const { return kv_.at(key); }
  bool on(const std::string& key) const { return kv_uint(kv_, key) != 0; }
  std::uint64_t uint(const std::string& key) const { return kv_uint(kv_, key); }
  double real(const std::string& key) const { return kv_double(kv_, key); }

  bool has_out() const { return !out_.empty(); }
  fs::path out_dir(const std::string& command) const {
    if (!out_.empty()) return out_;
    const char* root = std::getenv("PFNET_OUTPUT_ROOT");
    return fs::path(root != nullptr && *root != '\0' ? root : ".") / command;
  }

  void write_snapshot(const fs::path& dir, const std::string& command) const {
    fs::create_directories(dir);
    KeyValues snapshot = kv_;
    snapshot["command"] = command;
    write_key_values(dir / "run_config.txt", snapshot);
  }

 private:
  CLI::App* app_;
  KeyValues kv_;
  std::string config_path_;
  std::string out_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  std::vector<std::pair<std::string, CLI::Option*>> flags_;
};

const std::vector<std::string> kDatasetKeys{"version",        "n_points",  "missing_ratio",
                                            "n_holes",        "categories", "shapes_per_category",
                                            "train_fraction", "seed"};

int cmd_gen_data(const Settings& s, const fs::path& out) {
  KeyValues spec_kv;
  for (const auto& key : kDatasetKeys) spec_kv[key] = s.get(key);
  data::DatasetSpec spec;
  try {
    spec = data::DatasetSpec::from_key_values(spec_kv);
    spec.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  const auto dataset = s.get("import").empty()
                           ? data::generate_dataset(spec)
                           : data::import_external_clouds(s.get("import"), spec);
  data::write_dataset(dataset, out);
  s.write_snapshot(out, "gen-data");
  std::cout << "wrote " << dataset.entries.size() << " samples (" << spec.n_points << " points, "
            << spec.missing_points() << " missing) to " << out.string() << '\n';
  return 0;
}

int cmd_train(const Settings& s, const fs::path& out) {
  const auto samples = data::load_split(s.get("data"), s.get("split"));
  const std::size_t m = samples.front().missing_gt.size();
  auto config = model::ModelConfig::paper(m);
  config.decoder.m1 = s.uint("model.m1");
  config.decoder.m2 = s.uint("model.m2");
  config = config.scaled_down(s.uint("model.width_divisor"), s.uint("model.disc_width_divisor"));
  config.validate();

  auto tc = training::TrainConfig::from_key_values(s.kv());
  tc.output_dir = out;
  auto weights = training::loss_weights_from_key_values(s.kv());
  if (s.on("vanilla")) weights = training::LossWeights::vanilla(weights.alpha);

  model::PFNet net(config, tc.seed);
  s.write_snapshot(out, "train");
  const auto result = training::train(net, samples, tc, weights);
  const auto& first = result.log.front();
  const auto& last = result.log.back();
  std::cout << "trained " << last.iter << " iterations on " << samples.size() << " samples; "
            << "loss_cd1 " << data::format_double(first.loss_cd1) << " -> "
            << data::format_double(last.loss_cd1) << "; discriminator steps "
            << result.discriminator_steps << "; checkpoint " << result.last_checkpoint.string()
            << '\n';
  return 0;
}

geometry::PointCloud fit_partial(const geometry::PointCloud& partial, std::size_t divisor,
                                 const std::string& fit) {
  if (partial.size() % divisor == 0 || fit == "none") return partial;
  geometry::PointCloud out = partial;
  if (fit == "trim") {
    if (partial.size() < divisor) throw DomainError("partial cloud too small to trim");
    out.points.resize(partial.size() - partial.size() % divisor);
  } else if (fit == "pad") {
    for (std::size_t i = 0; out.size() % divisor != 0; ++i) out.points.push_back(partial[i]);
  } else {
    throw UsageError("fit must be none, pad or trim, got '" + fit + "'");
  }
  return out;
}

int cmd_complete(const Settings& s, const fs::path& out) {
  auto net = model::PFNet::load(s.get("checkpoint"));
  const auto& mc = net.config();
  const auto partial = data::read_cloud(s.get("input"));
  const std::size_t n_points = s.uint("n_points");
  if (n_points != 0 && partial.size() + mc.decoder.m != n_points)
    throw ConfigError("checkpoint predicts M=" + std::to_string(mc.decoder.m) + " points; with a " +
                      std::to_string(partial.size()) + "-point partial the result has " +
                      std::to_string(partial.size() + mc.decoder.m) + " points, not " +
                      std::to_string(n_points));
  std::size_t divisor = 1;
  for (std::size_t i = 1; i < mc.encoder.n_scales; ++i) divisor *= mc.encoder.k;
  const auto stages = net.complete(fit_partial(partial, divisor, s.get("fit")));

  const auto format = data::parse_format(s.get("format"));
  const std::string ext = format == data::CloudFormat::ply ? ".ply" : ".xyz";
  fs::create_directories(out);
  data::write_cloud(stages[2], out / ("missing" + ext), format);
  data::write_cloud(geometry::concatenate(partial, stages[2]), out / ("merged" + ext), format);
  if (s.on("emit_stages")) {
    data::write_cloud(stages[0], out / ("primary" + ext), format);
    data::write_cloud(stages[1], out / ("secondary" + ext), format);
  }
  s.write_snapshot(out, "complete");
  std::cout << "predicted " << stages[2].size() << " points; merged cloud has "
            << partial.size() + stages[2].size() << " points in " << out.string() << '\n';
  return 0;
}

int cmd_eval(const Settings& s, const fs::path& out) {
  const auto samples = data::load_split(s.get("data"), s.get("split"));
  std::vector<eval::EvalMode> modes;
  const std::string& mode = s.get("mode");
  if (mode == "both") modes = {eval::EvalMode::overall, eval::EvalMode::missing};
  else modes = {eval::parse_mode(mode)};

  std::optional<model::PFNet> net;
  eval::Predictor predictor;
  if (s.on("oracle")) {
    predictor = eval::oracle_predictor();
  } else {
    if (s.get("checkpoint").empty()) throw UsageError("eval needs --checkpoint or --oracle");
    net.emplace(model::PFNet::load(s.get("checkpoint")));
    predictor = eval::model_predictor(*net);
  }
  std::vector<eval::MetricReport> reports;
  std::string tables;
  for (auto m : modes) {
    reports.push_back(eval::evaluate(predictor, samples, m));
    tables += eval::format_table(reports.back(), s.on("oracle") ? "Oracle" : "PF-Net") + '\n';
  }
  fs::create_directories(out);
  std::ofstream(out / "report.txt") << tables;
  std::ofstream(out / "report.csv") << eval::format_csv(reports);
  s.write_snapshot(out, "eval");
  std::cout << tables;
  return 0;
}

int cmd_gradcheck(const Settings& s, std::optional<fs::path> out) {
  const auto seed = s.uint("seed");
  auto results = diagnostics::op_gradchecks(seed, s.uint("trials"));
  for (auto& r : diagnostics::model_gradchecks(seed)) results.push_back(std::move(r));
  std::ostringstream report;
  report << "check                  max_rel_error  elements  refined  status\n";
  bool ok = true;
  for (const auto& r : results) {
    char line[200];
    std::snprintf(line, sizeof line, "%-22s %13.3e %9zu %8zu  %s\n", r.name.c_str(),
                  r.max_relative_error, r.n_checked, r.n_refined, r.passed ? "ok" : "FAIL");
    report << line;
    if (!r.passed) {
      ok = false;
      report << "  worst element: " << r.worst_element << '\n';
    }
  }
  std::cout << report.str();
  if (out) {
    fs::create_directories(*out);
    std::ofstream(*out / "gradcheck.txt") << report.str();
    s.write_snapshot(*out, "gradcheck");
  }
  if (!ok) {
    std::cerr << "pfnet: gradcheck failed: relative error above 1e-4\n";
    return 1;
  }
  return 0;
}

int cmd_bench(const Settings& s, std::optional<fs::path> out) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(s.get("sizes"));
  for (std::string item; std::getline(ss, item, ',');) {
    KeyValues tmp{{"size", item}};
    sizes.push_back(kv_uint(tmp, "size"));
  }
  const auto rows = diagnostics::run_bench(sizes, s.uint("seed"), s.uint("repeats"));
  const std::string text = diagnostics::format_bench(rows);
  std::cout << text;
  if (out) {
    fs::create_directories(*out);
    std::ofstream(*out / "bench.txt") << text;
    s.write_snapshot(*out, "bench");
  }
  return 0;
}

KeyValues merged(std::initializer_list<KeyValues> parts) {
  KeyValues kv;
  for (const auto& p : parts) kv.insert(p.begin(), p.end());
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PF-Net point cloud completion"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic completion dataset");
  Settings gen_s(gen, merged({data::DatasetSpec{}.to_key_values(), {{"import", ""}}}));
  gen_s.option("--n-points", "n_points", "points per full shape");
  gen_s.option("--missing-ratio", "missing_ratio", "fraction of points removed");
  gen_s.option("--holes", "n_holes", "number of holes per sample");
  gen_s.option("--categories", "categories", "comma-separated shape families");
  gen_s.option("--shapes-per-category", "shapes_per_category", "shapes per family");
  gen_s.option("--train-fraction", "train_fraction", "share of shapes in the train split");
  gen_s.option("--seed", "seed", "dataset seed");
  gen_s.option("--import", "import", "directory of external clouds <category>/<name>.{xyz,ply}");
  gen->alias("gen_data");

  auto* train = app.add_subcommand("train", "train a network on a dataset directory");
  Settings train_s(train, merged({training::TrainConfig{}.to_key_values(),
                                  training::loss_weights_to_key_values({}),
                                  {{"data", ""},
                                   {"split", "train"},
                                   {"vanilla", "0"},
                                   {"model.m1", "64"},
                                   {"model.m2", "128"},
                                   {"model.width_divisor", "1"},
                                   {"model.disc_width_divisor", "1"}}}));
  train_s.option("--data", "data", "dataset directory");
  train_s.option("--split", "split", "split to train on");
  train_s.option("--seed", "train.seed", "initialization and shuffling seed");
  train_s.option("--lr", "train.learning_rate", "Adam learning rate");
  train_s.option("--batch-size", "train.batch_size", "batch size");
  train_s.option("--epochs", "train.epochs", "epochs");
  train_s.option("--iterations", "train.max_iterations", "stop after this many iterations");
  train_s.option("--d-steps", "train.d_steps_per_g_step", "discriminator steps per generator step");
  train_s.option("--checkpoint-every", "train.checkpoint_every", "checkpoint cadence in iterations");
  train_s.option("--alpha", "loss.alpha", "multi-stage weight alpha");
  train_s.option("--lambda-com", "loss.lambda_com", "completion loss weight");
  train_s.option("--lambda-adv", "loss.lambda_adv", "adversarial loss weight");
  train_s.option("--m1", "model.m1", "primary center count M1");
  train_s.option("--m2", "model.m2", "secondary center count M2");
  train_s.option("--width-divisor", "model.width_divisor",
                 "divide encoder and decoder widths by this");
  train_s.option("--disc-width-divisor", "model.disc_width_divisor",
                 "divide discriminator widths by this");
  train_s.flag("--vanilla", "vanilla", "completion loss only, no discriminator");
  train_s.option("--log-timing", "train.log_timing", "1 to log seconds per iteration, 0 to log 0");

  auto* complete = app.add_subcommand("complete", "predict the missing region of a partial cloud");
  Settings complete_s(complete, {{"checkpoint", ""},
                                 {"input", ""},
                                 {"format", "ply"},
                                 {"emit_stages", "0"},
                                 {"fit", "none"},
                                 {"n_points", "0"}});
  complete_s.option("--checkpoint", "checkpoint", "trained checkpoint");
  complete_s.option("--input", "input", "partial cloud (.xyz or .ply)");
  complete_s.option("--format", "format", "output format: ply or xyz");
  complete_s.flag("--emit-stages", "emit_stages", "also write the primary and secondary centers");
  complete_s.option("--fit", "fit", "none, pad or trim the input to a multiple of k^2");
  complete_s.option("--n-points", "n_points", "expected size of the merged cloud (0: unchecked)");

  auto* evaluate = app.add_subcommand("eval", "evaluate Pred->GT / GT->Pred errors");
  Settings eval_s(evaluate, {{"checkpoint", ""},
                             {"data", ""},
                             {"split", "test"},
                             {"mode", "both"},
                             {"oracle", "0"}});
  eval_s.option("--checkpoint", "checkpoint", "trained checkpoint");
  eval_s.option("--data", "data", "dataset directory");
  eval_s.option("--split", "split", "split to evaluate");
  eval_s.option("--mode", "mode", "overall, missing or both");
  eval_s.flag("--oracle", "oracle", "use the ground-truth missing region as the prediction");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  Settings grad_s(gradcheck, {{"seed", "0"}, {"trials", "20"}});
  grad_s.option("--seed", "seed", "random seed");
  grad_s.option("--trials", "trials", "random instances per operation");

  auto* bench = app.add_subcommand("bench", "time IFPS and Chamfer kernels");
  Settings bench_s(bench, {{"sizes", "512,2048,8192"}, {"seed", "0"}, {"repeats", "3"}});
  bench_s.option("--sizes", "sizes", "comma-separated cloud sizes");
  bench_s.option("--seed", "seed", "random seed");
  bench_s.option("--repeats", "repeats", "timing repetitions (best is kept)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      gen_s.resolve();
      return cmd_gen_data(gen_s, gen_s.out_dir("dataset"));
    }
    if (train->parsed()) {
      train_s.resolve();
      if (train_s.get("data").empty()) throw UsageError("train needs --data");
      return cmd_train(train_s, train_s.out_dir("train"));
    }
    if (complete->parsed()) {
      complete_s.resolve();
      if (complete_s.get("checkpoint").empty() || complete_s.get("input").empty())
        throw UsageError("complete needs --checkpoint and --input");
      return cmd_complete(complete_s, complete_s.out_dir("complete"));
    }
    if (evaluate->parsed()) {
      eval_s.resolve();
      if (eval_s.get("data").empty()) throw UsageError("eval needs --data");
      return cmd_eval(eval_s, eval_s.out_dir("eval"));
    }
    if (gradcheck->parsed()) {
      grad_s.resolve();
      return cmd_gradcheck(grad_s, grad_s.has_out() ? std::optional(grad_s.out_dir("gradcheck"))
                                                    : std::nullopt);
    }
    if (bench->parsed()) {
      bench_s.resolve();
      return cmd_bench(bench_s,
                       bench_s.has_out() ? std::optional(bench_s.out_dir("bench")) : std::nullopt);
    }
  } catch (const pfnet::Error& e) {
    std::cerr << "pfnet: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pfnet: internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
