#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "remul/bench.hpp"
#include "remul/checkpoint.hpp"
#include "remul/config.hpp"
#include "remul/dataset_io.hpp"
#include "remul/equi_metrics.hpp"
#include "remul/errors.hpp"
#include "remul/format.hpp"
#include "remul/loss_surface.hpp"
#include "remul/nbody.hpp"
#include "remul/trainer.hpp"

#ifndef REMUL_VERSION
#define REMUL_VERSION "0.0.0"
#endif

namespace remul::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string version() { return REMUL_VERSION; }

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string fmt(double v) { return format_double(v); }

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw ValidationError(std::string("invalid entry '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(std::string(what) + " is empty");
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ordered_json config_json(const std::string& flat) {
  ordered_json j = ordered_json::object();
  std::istringstream in(flat);
  for (const auto& [key, kv] : parse_key_values(in)) j[key] = kv.value;
  return j;
}

// Accepts either a checkpoint stem or the path of its manifest.
fs::path checkpoint_stem(const std::string& arg) {
  fs::path p(arg);
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  return p;
}

struct LoadedModel {
  ModelConfig config;
  ParamTree params;
};

LoadedModel load_model(const fs::path& stem) {
  Checkpoint ck = load_checkpoint(stem);
  return {model_config_from_meta(ck.meta), std::move(ck.params)};
}

std::map<std::string, std::string> checkpoint_meta(const TrainConfig& c, const std::string& which, std::size_t step) {
  auto meta = model_config_to_meta(c.model);
  meta["mode"] = std::string(to_string(c.mode));
  meta["alpha0"] = fmt(c.alpha0);
  meta["beta0"] = fmt(c.beta0);
  meta["seed"] = std::to_string(c.seed);
  meta["checkpoint"] = which;
  meta["step"] = std::to_string(step);
  meta["tool_version"] = version();
  return meta;
}

std::vector<PointSample> load_data(const std::string& path, const ModelConfig& model) {
  auto data = read_dataset(fs::path(path));
  if (data.empty()) throw ValidationError("dataset " + path + " is empty");
  for (const auto& x : data) {
    if (x.scalar_width != model.scalar_width) {
      throw ValidationError("dataset " + path + " has scalar width " + std::to_string(x.scalar_width) +
                            ", model expects " + std::to_string(model.scalar_width));
    }
  }
  return data;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  ordered_json config = ordered_json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> artifacts;
  std::string started_at = utc_now();

  void write(const fs::path& path) const {
    ordered_json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    if (seed) {
      j["seed"] = *seed;
    } else {
      j["seed"] = nullptr;
    }
    j["artifacts"] = artifacts;
    j["tool_version"] = version();
    j["started_at"] = started_at;
    j["finished_at"] = utc_now();
    write_text(path, j.dump(2) + "\n");
  }
};

struct TrainArtifacts {
  TrainResult result;
  std::vector<std::string> files;
};

// Trains and writes final/best checkpoints, the run log and validation
// history under `dir`.
TrainArtifacts train_into(const TrainConfig& cfg, std::span<const PointSample> data, std::span<const PointSample> val,
                          const fs::path& dir) {
  fs::create_directories(dir);
  TrainArtifacts a;
  a.result = train(cfg, data, val);
  const fs::path final_stem = dir / "final";
  const fs::path best_stem = dir / "best";
  save_checkpoint(final_stem, a.result.params, checkpoint_meta(cfg, "final", cfg.steps));
  auto best_meta = checkpoint_meta(cfg, "best", a.result.best_step);
  best_meta["best_val_mse"] = fmt(a.result.best_val_mse);
  save_checkpoint(best_stem, a.result.best_params, best_meta);

  std::ostringstream log;
  a.result.log.write_csv(log);
  write_text(dir / "run_log.csv", log.str());
  std::ostringstream vh;
  vh << "step,val_mse\n";
  for (const auto& [step, mse] : a.result.val_history) vh << step << ',' << fmt(mse) << '\n';
  write_text(dir / "val_log.csv", vh.str());
  write_text(dir / "config.cfg", format_train_config(cfg));

  for (const auto& stem : {final_stem, best_stem}) {
    a.files.push_back(checkpoint_manifest_path(stem).string());
    a.files.push_back(checkpoint_data_path(stem).string());
  }
  for (const char* f : {"run_log.csv", "val_log.csv", "config.cfg"}) a.files.push_back((dir / f).string());
  return a;
}

double final_val_mse(const TrainArtifacts& a) {
  return a.result.val_history.empty() ? 0.0 : a.result.val_history.back().second;
}

// ---------------------------------------------------------------------------

class Cli {
 public:
  Cli(std::span<const std::string> args, std::ostream& out, std::ostream& err)
      : args_(args.begin(), args.end()), out_(out), err_(err) {
    app_.name("remul");
    app_.description("Training, metrics and benchmarks for learned approximate equivariance");
    app_.set_version_flag("--version", version());
    app_.require_subcommand(1);
    setup_gen_nbody();
    setup_train();
    setup_eval();
    setup_equi_error();
    setup_sweep_beta();
    setup_loss_surface();
    setup_bench();
    setup_ablate();
  }

  int run() {
    try {
      std::vector<std::string> reversed(args_.rbegin(), args_.rend());
      app_.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out_ << app_.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app_.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      out_ << version() << '\n';
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << '\n';
      const CLI::App* sub = active_subcommand();
      err_ << (sub ? sub->help() : app_.help());
      return kExitValidation;
    }

    const CLI::App* sub = active_subcommand();
    manifest_.command = sub->get_name();
    manifest_.argv = args_;
    try {
      handlers_.at(sub->get_name())();
      return kExitOk;
    } catch (const ValidationError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitValidation;
    } catch (const NumericError& e) {
      err_ << "numeric failure: " << e.what() << '\n';
      return kExitRuntime;
    } catch (const std::exception& e) {
      err_ << "failure: " << e.what() << '\n';
      return kExitRuntime;
    }
  }

 private:
  const CLI::App* active_subcommand() const {
    for (const auto* sub : app_.get_subcommands()) return sub;
    return nullptr;
  }

  CLI::App* sub(const std::string& name, const std::string& help) {
    CLI::App* s = app_.add_subcommand(name, help);
    s->add_option("--manifest", manifest_path_, "Where to write the run manifest (default: beside the outputs)");
    return s;
  }

  fs::path manifest_or(const fs::path& fallback) const {
    return manifest_path_.empty() ? fallback : fs::path(manifest_path_);
  }

  void finish(const fs::path& default_manifest) {
    manifest_.write(manifest_or(default_manifest));
  }

  // gen-nbody --------------------------------------------------------------
  struct {
    std::string out;
    NBodyConfig config;
  } gen_;

  void setup_gen_nbody() {
    auto* s = sub("gen-nbody", "Generate a gravitational N-body dataset as JSON Lines");
    s->add_option("--out", gen_.out, "Output JSONL path")->required();
    s->add_option("--n", gen_.config.n_samples, "Number of samples")->required();
    s->add_option("--seed", gen_.config.seed, "Dataset seed")->required();
    s->add_option("--rot-min", gen_.config.rot_min_deg, "Minimum rotation angle (degrees)")->required();
    s->add_option("--rot-max", gen_.config.rot_max_deg, "Maximum rotation angle (degrees)")->required();
    s->add_option("--objects", gen_.config.n_objects, "Bodies per sample")->capture_default_str();
    s->add_option("--steps", gen_.config.steps, "Integration steps")->capture_default_str();
    s->add_option("--dt", gen_.config.dt, "Time step")->capture_default_str();
    s->add_option("--gconst", gen_.config.g_const, "Gravitational constant")->capture_default_str();
    s->add_option("--softening", gen_.config.softening, "Plummer softening length")->capture_default_str();
    handlers_["gen-nbody"] = [this] {
      const NBodyConfig& c = gen_.config;
      c.validate();
      const auto data = generate_dataset(c);
      write_dataset(fs::path(gen_.out), data);
      manifest_.seed = c.seed;
      manifest_.config = {{"n_samples", c.n_samples},       {"n_objects", c.n_objects},
                          {"steps", c.steps},               {"dt", c.dt},
                          {"g_const", c.g_const},           {"softening", c.softening},
                          {"rot_min_deg", c.rot_min_deg},   {"rot_max_deg", c.rot_max_deg},
                          {"center_mass_min", c.center_mass_min}, {"center_mass_max", c.center_mass_max},
                          {"orbit_radius_min", c.orbit_radius_min}, {"orbit_radius_max", c.orbit_radius_max},
                          {"orbit_mass_min", c.orbit_mass_min}, {"orbit_mass_max", c.orbit_mass_max},
                          {"velocity_std", c.velocity_std}, {"seed", c.seed}};
      manifest_.artifacts = {gen_.out};
      out_ << "wrote " << data.size() << " samples to " << gen_.out << '\n';
      finish(gen_.out + ".manifest.json");
    };
  }

  // train ------------------------------------------------------------------
  struct {
    std::string config, data, val, out;
  } train_;

  void setup_train() {
    auto* s = sub("train", "Train a model and write checkpoints plus the run log");
    s->add_option("--config", train_.config, "Training config (key = value)")->required();
    s->add_option("--data", train_.data, "Training JSONL")->required();
    s->add_option("--val", train_.val, "Validation JSONL")->required();
    s->add_option("--out", train_.out, "Output directory")->required();
    handlers_["train"] = [this] {
      const TrainConfig cfg = load_train_config(train_.config);
      const auto data = load_data(train_.data, cfg.model);
      const auto val = load_data(train_.val, cfg.model);
      const auto a = train_into(cfg, data, val, train_.out);
      manifest_.seed = cfg.seed;
      manifest_.config = config_json(format_train_config(cfg));
      manifest_.artifacts = a.files;
      out_ << "best_val_mse=" << fmt(a.result.best_val_mse) << " best_step=" << a.result.best_step
           << " final_val_mse=" << fmt(final_val_mse(a)) << '\n';
      finish(fs::path(train_.out) / "manifest.json");
    };
  }

  // eval -------------------------------------------------------------------
  struct {
    std::string ckpt, data;
  } eval_;

  void setup_eval() {
    auto* s = sub("eval", "Mean squared error of a checkpoint on a dataset");
    s->add_option("--ckpt", eval_.ckpt, "Checkpoint stem (e.g. run/best)")->required();
    s->add_option("--data", eval_.data, "JSONL dataset")->required();
    handlers_["eval"] = [this] {
      const fs::path stem = checkpoint_stem(eval_.ckpt);
      const auto m = load_model(stem);
      const auto data = load_data(eval_.data, m.config);
      const double mse = evaluate(m.config, m.params, data);
      out_ << "metric,value,dataset_size,checkpoint\n"
           << "mse," << fmt(mse) << ',' << data.size() << ',' << stem.string() << '\n';
      manifest_.config = config_json(format_model_config(m.config));
      finish(stem.string() + ".eval.manifest.json");
    };
  }

  // equi-error -------------------------------------------------------------
  struct {
    std::string ckpt, data, metric, out;
    std::size_t M = 100;
    std::uint64_t seed = 0;
  } equi_;

  void setup_equi_error() {
    auto* s = sub("equi-error", "Monte-Carlo equivariance error of a checkpoint");
    s->add_option("--ckpt", equi_.ckpt, "Checkpoint stem")->required();
    s->add_option("--data", equi_.data, "JSONL dataset")->required();
    s->add_option("--metric", equi_.metric, "E or Eprime")->required()->check(CLI::IsMember({"E", "Eprime"}));
    s->add_option("--M", equi_.M, "Group samples per item")->required();
    s->add_option("--seed", equi_.seed, "Sampling seed")->required();
    s->add_option("--out", equi_.out, "Append the row to this CSV as well");
    handlers_["equi-error"] = [this] {
      if (equi_.M == 0) throw ValidationError("--M must be positive");
      const fs::path stem = checkpoint_stem(equi_.ckpt);
      const auto m = load_model(stem);
      const auto data = centered(load_data(equi_.data, m.config));
      const ReprSpec spec = ReprSpec::point_cloud(m.config.scalar_width);
      const EquiMetric kind = parse_equi_metric(equi_.metric);
      const auto f = bind_predictor(m.config, m.params);
      const EquiReport report = kind == EquiMetric::E ? equivariance_error_E(f, data, spec, equi_.M, equi_.seed)
                                                      : equivariance_error_Eprime(f, data, spec, equi_.M, equi_.seed);
      const std::string row = to_csv_row(report, stem.string());
      out_ << equi_report_csv_header() << '\n' << row << '\n';
      manifest_.seed = equi_.seed;
      manifest_.config = {{"metric", equi_.metric}, {"M", equi_.M}, {"checkpoint", stem.string()}};
      if (!equi_.out.empty()) {
        const bool fresh = !fs::exists(equi_.out) || fs::file_size(equi_.out) == 0;
        if (fs::path(equi_.out).has_parent_path()) fs::create_directories(fs::path(equi_.out).parent_path());
        std::ofstream csv(equi_.out, std::ios::app);
        if (!csv) throw ValidationError("cannot write " + equi_.out);
        if (fresh) csv << equi_report_csv_header() << '\n';
        csv << row << '\n';
        manifest_.artifacts = {equi_.out};
        finish(equi_.out + ".manifest.json");
      } else {
        finish(stem.string() + ".equi-error.manifest.json");
      }
    };
  }

  // sweep-beta -------------------------------------------------------------
  struct {
    std::string config, data, val, betas, out;
  } sweep_;

  void setup_sweep_beta() {
    auto* s = sub("sweep-beta", "Train one constant-penalty run per beta and summarize");
    s->add_option("--config", sweep_.config, "Base training config")->required();
    s->add_option("--data", sweep_.data, "Training JSONL")->required();
    s->add_option("--val", sweep_.val, "Validation JSONL")->required();
    s->add_option("--betas", sweep_.betas, "Comma-separated beta values")->required();
    s->add_option("--out", sweep_.out, "Output directory")->required();
    handlers_["sweep-beta"] = [this] {
      const TrainConfig base = load_train_config(sweep_.config);
      const auto tokens = split_tokens(sweep_.betas);
      const auto betas = parse_list<double>(sweep_.betas, "--betas");
      const auto data = load_data(sweep_.data, base.model);
      const auto val = load_data(sweep_.val, base.model);
      const auto val_c = centered(val);
      const ReprSpec spec = ReprSpec::point_cloud(base.model.scalar_width);

      std::ostringstream csv;
      csv << "beta,alpha,seed,steps,best_step,best_val_mse,final_val_mse,E,Eprime,M\n";
      for (std::size_t i = 0; i < betas.size(); ++i) {
        if (betas[i] < 0.0) throw ValidationError("betas must be non-negative");
        TrainConfig cfg = base;
        cfg.mode = TrainMode::constant;
        cfg.beta0 = betas[i];
        const auto a = train_into(cfg, data, val, fs::path(sweep_.out) / ("beta_" + tokens[i]));
        const auto errs = equivariance_errors(bind_predictor(cfg.model, a.result.best_params), val_c, spec, 100,
                                              cfg.seed);
        csv << fmt(cfg.beta0) << ',' << fmt(cfg.alpha0) << ',' << cfg.seed << ',' << cfg.steps << ','
            << a.result.best_step << ',' << fmt(a.result.best_val_mse) << ',' << fmt(final_val_mse(a)) << ','
            << fmt(errs.E) << ',' << fmt(errs.Eprime) << ",100\n";
        manifest_.artifacts.insert(manifest_.artifacts.end(), a.files.begin(), a.files.end());
        out_ << "beta=" << tokens[i] << " best_val_mse=" << fmt(a.result.best_val_mse) << " E=" << fmt(errs.E)
             << '\n';
      }
      const fs::path summary = fs::path(sweep_.out) / "sweep_beta.csv";
      write_text(summary, csv.str());
      manifest_.artifacts.push_back(summary.string());
      manifest_.seed = base.seed;
      manifest_.config = config_json(format_train_config(base));
      manifest_.config["betas"] = sweep_.betas;
      finish(fs::path(sweep_.out) / "manifest.json");
    };
  }

  // loss-surface -----------------------------------------------------------
  struct {
    std::string ckpt, data, out;
    std::size_t grid = kDefaultSurfaceResolution;
    double range = kDefaultSurfaceRange;
    std::uint64_t seed = 0;
  } surface_;

  void setup_loss_surface() {
    auto* s = sub("loss-surface", "2D filter-normalized loss scan around a checkpoint");
    s->add_option("--ckpt", surface_.ckpt, "Checkpoint stem")->required();
    s->add_option("--data", surface_.data, "JSONL dataset")->required();
    s->add_option("--grid", surface_.grid, "Points per axis (odd)")->required();
    s->add_option("--range", surface_.range, "Extent along each direction")->required();
    s->add_option("--seed", surface_.seed, "Direction seed")->required();
    s->add_option("--out", surface_.out, "Output CSV")->required();
    handlers_["loss-surface"] = [this] {
      const fs::path stem = checkpoint_stem(surface_.ckpt);
      const auto m = load_model(stem);
      const auto data = load_data(surface_.data, m.config);
      const auto dirs = sample_directions(m.params, surface_.seed);
      for (const auto& w : dirs.warnings) err_ << "warning: " << w << '\n';
      const SurfaceGrid grid = scan(m.config, m.params, data, dirs.d1, dirs.d2, surface_.grid, surface_.range);
      std::ostringstream csv;
      grid.write_csv(csv);
      write_text(surface_.out, csv.str());
      if (grid.overflow_count() > 0) err_ << "warning: " << grid.overflow_count() << " cells overflowed\n";
      manifest_.seed = surface_.seed;
      manifest_.config = {{"checkpoint", stem.string()}, {"grid", surface_.grid}, {"range", surface_.range}};
      manifest_.artifacts = {surface_.out};
      out_ << "center_loss=" << fmt(grid.at(grid.resolution / 2, grid.resolution / 2)) << '\n';
      finish(surface_.out + ".manifest.json");
    };
  }

  // bench ------------------------------------------------------------------
  struct {
    std::string model_config, batch_sizes, modes, out;
    std::size_t repeats = 10;
  } bench_;

  void setup_bench() {
    auto* s = sub("bench", "Time forward, forward+backward and inference per mode and batch size");
    s->add_option("--model-config", bench_.model_config, "Model config (model.* keys)")->required();
    s->add_option("--batch-sizes", bench_.batch_sizes, "Comma-separated batch sizes")->required();
    s->add_option("--modes", bench_.modes, "Comma-separated modes (standard,constant,gradual,augment)")->required();
    s->add_option("--repeats", bench_.repeats, "Timed repeats per row (>= 5)")->required();
    s->add_option("--out", bench_.out, "Output CSV")->required();
    handlers_["bench"] = [this] {
      BenchConfig bc;
      bc.model = load_model_config(bench_.model_config);
      bc.batch_sizes = parse_list<std::size_t>(bench_.batch_sizes, "--batch-sizes");
      bc.modes.clear();
      for (const auto& m : split_tokens(bench_.modes)) bc.modes.push_back(parse_train_mode(m));
      bc.repeats = bench_.repeats;
      const auto rows = run_bench(bc);
      const char* note = std::getenv("BENCH_HW_NOTE");
      std::ostringstream csv;
      write_bench_csv(csv, rows, note ? note : "", 1);
      write_text(bench_.out, csv.str());
      manifest_.seed = bc.seed;
      manifest_.config = config_json(format_model_config(bc.model));
      manifest_.config["batch_sizes"] = bench_.batch_sizes;
      manifest_.config["modes"] = bench_.modes;
      manifest_.config["repeats"] = bench_.repeats;
      manifest_.config["node_count"] = bc.node_count;
      manifest_.artifacts = {bench_.out};
      out_ << "wrote " << rows.size() << " timing rows to " << bench_.out << '\n';
      finish(bench_.out + ".manifest.json");
    };
  }

  // ablate-group-samples ---------------------------------------------------
  struct {
    std::string config, data, val, samples, out;
  } ablate_;

  void setup_ablate() {
    auto* s = sub("ablate-group-samples", "Compare the penalty and augmentation at matched rotation draws");
    s->add_option("--config", ablate_.config, "Base training config")->required();
    s->add_option("--data", ablate_.data, "Training JSONL")->required();
    s->add_option("--val", ablate_.val, "Validation JSONL")->required();
    s->add_option("--samples", ablate_.samples, "Comma-separated group samples per item")->required();
    s->add_option("--out", ablate_.out, "Output directory")->required();
    handlers_["ablate-group-samples"] = [this] {
      const TrainConfig base = load_train_config(ablate_.config);
      if (base.mode == TrainMode::standard || base.mode == TrainMode::augment) {
        throw ValidationError("ablate-group-samples needs a constant or gradual base config");
      }
      const auto samples = parse_list<std::size_t>(ablate_.samples, "--samples");
      const auto data = load_data(ablate_.data, base.model);
      const auto val = load_data(ablate_.val, base.model);
      const auto val_c = centered(val);
      const ReprSpec spec = ReprSpec::point_cloud(base.model.scalar_width);

      std::ostringstream csv;
      csv << "samples,mode,seed,steps,rotation_draws,best_step,best_val_mse,final_val_mse,E\n";
      for (const std::size_t s : samples) {
        if (s == 0) throw ValidationError("--samples entries must be positive");
        for (const TrainMode mode : {base.mode, TrainMode::augment}) {
          TrainConfig cfg = base;
          cfg.mode = mode;
          cfg.group_samples = s;
          const std::string tag = "s" + std::to_string(s) + "_" + std::string(to_string(mode));
          const auto a = train_into(cfg, data, val, fs::path(ablate_.out) / tag);
          const auto errs =
              equivariance_errors(bind_predictor(cfg.model, a.result.best_params), val_c, spec, 100, cfg.seed);
          csv << s << ',' << to_string(mode) << ',' << cfg.seed << ',' << cfg.steps << ','
              << (cfg.rotation.schedule == "fixed" ? data.size() * s : cfg.steps * cfg.batch_size * s) << ',' << a.result.best_step << ',' << fmt(a.result.best_val_mse)
              << ',' << fmt(final_val_mse(a)) << ',' << fmt(errs.E) << '\n';
          manifest_.artifacts.insert(manifest_.artifacts.end(), a.files.begin(), a.files.end());
          out_ << tag << " best_val_mse=" << fmt(a.result.best_val_mse) << '\n';
        }
      }
      const fs::path summary = fs::path(ablate_.out) / "ablate_group_samples.csv";
      write_text(summary, csv.str());
      manifest_.artifacts.push_back(summary.string());
      manifest_.seed = base.seed;
      manifest_.config = config_json(format_train_config(base));
      manifest_.config["samples"] = ablate_.samples;
      finish(fs::path(ablate_.out) / "manifest.json");
    };
  }

  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_;
  std::map<std::string, std::function<void()>> handlers_;
  Manifest manifest_;
  std::string manifest_path_;
};

}  // namespace

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  Cli cli(args, out, err);
  return cli.run();
}

}  // namespace remul::cli
