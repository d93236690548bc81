// SPDX-License-Identifier: Apache-2.0
//
// tvmerge: batch front end for the task-vector merging toolkit.
//
// Verbs: merge, diagnose, align, select, boost, synth, sweep. Every run is
// driven by one flat configuration that can come from a JSON file
// (--config), from flags (flags win), or both. Each verb writes a
// summary.json echoing the full effective configuration, so any produced
// summary can be fed back through --config to replay the run bit for bit.
//
// Exit codes: 0 success, 1 numerical/module failure, 2 usage or config
// error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tvmerge/checkpoint.hpp"
#include "tvmerge/errors.hpp"
#include "tvmerge/hogsvd.hpp"
#include "tvmerge/merge.hpp"
#include "tvmerge/rank.hpp"
#include "tvmerge/subspace_boost.hpp"
#include "tvmerge/synthetic.hpp"
#include "tvmerge/text.hpp"

namespace {

using nlohmann::ordered_json;
using namespace tvmerge;

// ---------------------------------------------------------------------------
// Run configuration: one flat bag of knobs shared by all verbs. Every field
// is echoed into summary.json; a verb simply ignores what it does not use.

struct RunConfig {
  // Inputs and outputs.
  std::string base;
  std::vector<std::string> experts;
  std::string out;

  // Merge method and scaling.
  std::string method = "ta";  // ta | ties | consensus | hogsvd
  double alpha = 1.0;
  double ties_trim_fraction = 0.2;
  std::size_t consensus_min_tasks = 2;

  // Depth-linear rescaling.
  bool lines_enabled = false;
  double lines_start = 0.5;
  double lines_end = 1.0;

  // Spectrum boosting.
  bool boost_enabled = false;
  double beta = 0.0;
  std::optional<double> beta_fc;
  std::optional<double> beta_attn;

  // Joint decomposition.
  double pi = 1e-2;
  double eps = 1e-12;
  double tol_imag = 1e-6;
  double common_tolerance = 0.1;
  double sigma_scale = 1.0;
  double max_condition = 1e12;

  // Diagnostics.
  std::vector<double> fractions = {0.95, 0.5, 0.3};

  // Expert selection.
  std::size_t k = 0;  // 0: no selection requested
  std::string selection_mode = "greedy";  // greedy | exhaustive

  // Synthetic pool generation.
  std::size_t n_experts = 8;
  std::size_t n_layers = 4;
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t expert_rank = 8;
  double shared_direction_weight = 0.5;
  std::uint64_t seed = 0;

  // Sweep grids and the optional external scoring hook. In the hook command
  // the literal token {checkpoint} is replaced by the cell's output
  // directory; the hook must print a number.
  std::vector<double> alpha_grid = {0.1, 0.2, 0.3, 0.4, 0.5,
                                    0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> beta_grid = {0.0, 0.01, 0.02};
  std::string eval_command;
};

// ---------------------------------------------------------------------------
// JSON <-> RunConfig. Strict on unknown keys so a typo in a config file
// fails loudly instead of silently running defaults.

const char* const kKnownKeys[] = {
    "command",      "report",  // summary bookkeeping, ignored on load
    "base",         "experts",
    "out",          "method",
    "alpha",        "ties_trim_fraction",
    "consensus_min_tasks",     "lines_enabled",
    "lines_start",  "lines_end",
    "boost_enabled",            "beta",
    "beta_fc",      "beta_attn",
    "pi",           "eps",
    "tol_imag",     "common_tolerance",
    "sigma_scale",  "max_condition",
    "fractions",    "k",
    "selection_mode",           "n_experts",
    "n_layers",     "rows",
    "cols",         "expert_rank",
    "shared_direction_weight",  "seed",
    "alpha_grid",   "beta_grid",
    "eval_command",
};

[[noreturn]] void config_error(const std::string& message) {
  throw ParseError("config: " + message);
}

double as_number(const ordered_json& j, const char* key) {
  if (!j.is_number()) config_error(std::string(key) + " must be a number");
  return j.get<double>();
}

std::size_t as_count(const ordered_json& j, const char* key) {
  if (!j.is_number_unsigned())
    config_error(std::string(key) + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

std::string as_string(const ordered_json& j, const char* key) {
  if (!j.is_string()) config_error(std::string(key) + " must be a string");
  return j.get<std::string>();
}

bool as_bool(const ordered_json& j, const char* key) {
  if (!j.is_boolean()) config_error(std::string(key) + " must be a boolean");
  return j.get<bool>();
}

std::vector<double> as_number_array(const ordered_json& j, const char* key) {
  if (!j.is_array()) config_error(std::string(key) + " must be an array");
  std::vector<double> values;
  for (const auto& item : j) values.push_back(as_number(item, key));
  return values;
}

std::optional<double> as_optional_number(const ordered_json& j,
                                         const char* key) {
  if (j.is_null()) return std::nullopt;
  return as_number(j, key);
}

void apply_config_json(RunConfig& cfg, const ordered_json& j,
                       const std::string& command) {
  if (!j.is_object()) config_error("top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || key == k;
    if (!known) config_error("unknown key \"" + key + "\"");
    (void)value;
  }
  // A summary echoes its verb; replaying it under a different verb is almost
  // certainly an accident.
  if (j.contains("command")) {
    const std::string recorded = as_string(j.at("command"), "command");
    if (recorded != command) {
      config_error("file records command \"" + recorded +
                   "\" but verb \"" + command + "\" was requested");
    }
  }

  if (j.contains("base")) cfg.base = as_string(j.at("base"), "base");
  if (j.contains("experts")) {
    if (!j.at("experts").is_array()) config_error("experts must be an array");
    cfg.experts.clear();
    for (const auto& e : j.at("experts"))
      cfg.experts.push_back(as_string(e, "experts"));
  }
  if (j.contains("out")) cfg.out = as_string(j.at("out"), "out");
  if (j.contains("method")) cfg.method = as_string(j.at("method"), "method");
  if (j.contains("alpha")) cfg.alpha = as_number(j.at("alpha"), "alpha");
  if (j.contains("ties_trim_fraction"))
    cfg.ties_trim_fraction =
        as_number(j.at("ties_trim_fraction"), "ties_trim_fraction");
  if (j.contains("consensus_min_tasks"))
    cfg.consensus_min_tasks =
        as_count(j.at("consensus_min_tasks"), "consensus_min_tasks");
  if (j.contains("lines_enabled"))
    cfg.lines_enabled = as_bool(j.at("lines_enabled"), "lines_enabled");
  if (j.contains("lines_start"))
    cfg.lines_start = as_number(j.at("lines_start"), "lines_start");
  if (j.contains("lines_end"))
    cfg.lines_end = as_number(j.at("lines_end"), "lines_end");
  if (j.contains("boost_enabled"))
    cfg.boost_enabled = as_bool(j.at("boost_enabled"), "boost_enabled");
  if (j.contains("beta")) cfg.beta = as_number(j.at("beta"), "beta");
  if (j.contains("beta_fc"))
    cfg.beta_fc = as_optional_number(j.at("beta_fc"), "beta_fc");
  if (j.contains("beta_attn"))
    cfg.beta_attn = as_optional_number(j.at("beta_attn"), "beta_attn");
  if (j.contains("pi")) cfg.pi = as_number(j.at("pi"), "pi");
  if (j.contains("eps")) cfg.eps = as_number(j.at("eps"), "eps");
  if (j.contains("tol_imag"))
    cfg.tol_imag = as_number(j.at("tol_imag"), "tol_imag");
  if (j.contains("common_tolerance"))
    cfg.common_tolerance =
        as_number(j.at("common_tolerance"), "common_tolerance");
  if (j.contains("sigma_scale"))
    cfg.sigma_scale = as_number(j.at("sigma_scale"), "sigma_scale");
  if (j.contains("max_condition"))
    cfg.max_condition = as_number(j.at("max_condition"), "max_condition");
  if (j.contains("fractions"))
    cfg.fractions = as_number_array(j.at("fractions"), "fractions");
  if (j.contains("k")) cfg.k = as_count(j.at("k"), "k");
  if (j.contains("selection_mode"))
    cfg.selection_mode = as_string(j.at("selection_mode"), "selection_mode");
  if (j.contains("n_experts"))
    cfg.n_experts = as_count(j.at("n_experts"), "n_experts");
  if (j.contains("n_layers"))
    cfg.n_layers = as_count(j.at("n_layers"), "n_layers");
  if (j.contains("rows")) cfg.rows = as_count(j.at("rows"), "rows");
  if (j.contains("cols")) cfg.cols = as_count(j.at("cols"), "cols");
  if (j.contains("expert_rank"))
    cfg.expert_rank = as_count(j.at("expert_rank"), "expert_rank");
  if (j.contains("shared_direction_weight"))
    cfg.shared_direction_weight = as_number(j.at("shared_direction_weight"),
                                            "shared_direction_weight");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned())
      config_error("seed must be a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("alpha_grid"))
    cfg.alpha_grid = as_number_array(j.at("alpha_grid"), "alpha_grid");
  if (j.contains("beta_grid"))
    cfg.beta_grid = as_number_array(j.at("beta_grid"), "beta_grid");
  if (j.contains("eval_command"))
    cfg.eval_command = as_string(j.at("eval_command"), "eval_command");
}

ordered_json config_to_json(const RunConfig& cfg, const std::string& command) {
  ordered_json j;
  j["command"] = command;
  j["base"] = cfg.base;
  j["experts"] = cfg.experts;
  j["out"] = cfg.out;
  j["method"] = cfg.method;
  j["alpha"] = cfg.alpha;
  j["ties_trim_fraction"] = cfg.ties_trim_fraction;
  j["consensus_min_tasks"] = cfg.consensus_min_tasks;
  j["lines_enabled"] = cfg.lines_enabled;
  j["lines_start"] = cfg.lines_start;
  j["lines_end"] = cfg.lines_end;
  j["boost_enabled"] = cfg.boost_enabled;
  j["beta"] = cfg.beta;
  j["beta_fc"] = cfg.beta_fc ? ordered_json(*cfg.beta_fc) : ordered_json();
  j["beta_attn"] =
      cfg.beta_attn ? ordered_json(*cfg.beta_attn) : ordered_json();
  j["pi"] = cfg.pi;
  j["eps"] = cfg.eps;
  j["tol_imag"] = cfg.tol_imag;
  j["common_tolerance"] = cfg.common_tolerance;
  j["sigma_scale"] = cfg.sigma_scale;
  j["max_condition"] = cfg.max_condition;
  j["fractions"] = cfg.fractions;
  j["k"] = cfg.k;
  j["selection_mode"] = cfg.selection_mode;
  j["n_experts"] = cfg.n_experts;
  j["n_layers"] = cfg.n_layers;
  j["rows"] = cfg.rows;
  j["cols"] = cfg.cols;
  j["expert_rank"] = cfg.expert_rank;
  j["shared_direction_weight"] = cfg.shared_direction_weight;
  j["seed"] = cfg.seed;
  j["alpha_grid"] = cfg.alpha_grid;
  j["beta_grid"] = cfg.beta_grid;
  j["eval_command"] = cfg.eval_command;
  return j;
}

// ---------------------------------------------------------------------------
// Small shared helpers.

MergeConfig merge_config(const RunConfig& cfg) {
  MergeConfig m;
  m.method = cfg.method;
  m.alpha = cfg.alpha;
  m.ties_trim_fraction = cfg.ties_trim_fraction;
  m.consensus_min_tasks = cfg.consensus_min_tasks;
  m.lines_enabled = cfg.lines_enabled;
  m.lines_start = cfg.lines_start;
  m.lines_end = cfg.lines_end;
  return m;
}

BoostConfig boost_config(const RunConfig& cfg) {
  BoostConfig b;
  b.beta = cfg.beta;
  b.beta_fc = cfg.beta_fc;
  b.beta_attn = cfg.beta_attn;
  return b;
}

HogsvdConfig hogsvd_config(const RunConfig& cfg) {
  HogsvdConfig h;
  h.pi = cfg.pi;
  h.eps = cfg.eps;
  h.tol_imag = cfg.tol_imag;
  h.common_tolerance = cfg.common_tolerance;
  h.sigma_scale = cfg.sigma_scale;
  h.max_condition = cfg.max_condition;
  return h;
}

SyntheticSpec synthetic_spec(const RunConfig& cfg) {
  SyntheticSpec s;
  s.n_experts = cfg.n_experts;
  s.n_layers = cfg.n_layers;
  s.rows = cfg.rows;
  s.cols = cfg.cols;
  s.expert_rank = cfg.expert_rank;
  s.shared_direction_weight = cfg.shared_direction_weight;
  s.seed = cfg.seed;
  return s;
}

SelectionMode selection_mode(const RunConfig& cfg) {
  if (cfg.selection_mode == "greedy") return SelectionMode::kGreedy;
  if (cfg.selection_mode == "exhaustive") return SelectionMode::kExhaustive;
  throw ArgumentError("selection_mode must be \"greedy\" or \"exhaustive\"");
}

void require_base(const RunConfig& cfg) {
  if (cfg.base.empty()) throw ParseError("--base is required");
}

void require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ParseError("--out is required");
}

void require_experts(const RunConfig& cfg, std::size_t at_least) {
  if (cfg.experts.size() < at_least) {
    throw ParseError("need at least " + std::to_string(at_least) +
                     " --expert checkpoint(s), got " +
                     std::to_string(cfg.experts.size()));
  }
}

std::vector<TaskVector> load_expert_deltas(const RunConfig& cfg,
                                           const Checkpoint& base) {
  std::vector<TaskVector> deltas;
  for (const std::string& path : cfg.experts) {
    deltas.push_back(task_vector(load_checkpoint(path), base));
  }
  return deltas;
}

void print_warnings(const WarningList& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

void write_summary(const std::filesystem::path& out, const ordered_json& j) {
  std::filesystem::create_directories(out);
  std::ofstream file(out / "summary.json", std::ios::binary);
  if (!file) throw StorageError("cannot write " + (out / "summary.json").string());
  file << j.dump(2) << "\n";
}

// stable_rank averaged over the non-degenerate rows; null when none exist.
ordered_json mean_stable_rank(const RankReport& report) {
  double total = 0.0;
  std::size_t live = 0;
  for (const RankRow& row : report.rows) {
    if (row.degenerate) continue;
    total += row.stable_rank;
    ++live;
  }
  if (live == 0) return ordered_json();
  return total / static_cast<double>(live);
}

ordered_json rank_rows_json(const RankReport& before,
                            const RankReport& after) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < before.rows.size(); ++i) {
    const RankRow& b = before.rows[i];
    const RankRow& a = after.rows[i];
    ordered_json row;
    row["tensor"] = b.tensor;
    row["layer"] = b.layer;
    row["degenerate"] = b.degenerate;
    row["stable_rank_before"] =
        b.degenerate ? ordered_json() : ordered_json(b.stable_rank);
    row["energy_rank_before"] =
        b.degenerate ? ordered_json() : ordered_json(b.energy_rank);
    row["stable_rank_after"] =
        a.degenerate ? ordered_json() : ordered_json(a.stable_rank);
    row["energy_rank_after"] =
        a.degenerate ? ordered_json() : ordered_json(a.energy_rank);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string zero_padded(std::size_t value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", value);
  return buf;
}

// ---------------------------------------------------------------------------
// Verbs.

int cmd_merge(const RunConfig& cfg) {
  require_base(cfg);
  require_out(cfg);
  require_experts(cfg, 2);

  const Checkpoint base = load_checkpoint(cfg.base);
  const std::vector<TaskVector> deltas = load_expert_deltas(cfg, base);

  WarningList warnings;
  HogsvdMergeDiagnostics diagnostics;
  TaskVector merged;
  if (cfg.method == "hogsvd") {
    // The joint merge boosts internally, so the separate boost stage is
    // skipped even when boost_enabled is set.
    merged = hogsvd_boost_merge(deltas, hogsvd_config(cfg), cfg.beta,
                                &warnings, &diagnostics);
    if (cfg.lines_enabled) {
      merged = lines_scale(merged, cfg.lines_start, cfg.lines_end);
    }
  } else {
    merged = merge_task_vectors(deltas, merge_config(cfg));
  }

  const RankReport before = rank_report(merged);
  if (cfg.boost_enabled && cfg.method != "hogsvd") {
    merged = boost_task_vector(merged, boost_config(cfg), &warnings);
  }
  const RankReport after = rank_report(merged);

  const Checkpoint result = apply_task_vector(base, merged, cfg.alpha);
  const std::filesystem::path out(cfg.out);
  save_checkpoint(result, out / "checkpoint");

  ordered_json summary = config_to_json(cfg, "merge");
  ordered_json report;
  report["components"] = rank_rows_json(before, after);
  report["mean_stable_rank_before"] = mean_stable_rank(before);
  report["mean_stable_rank_after"] = mean_stable_rank(after);
  if (cfg.method == "hogsvd") {
    ordered_json residuals = ordered_json::array();
    for (const auto& [component, residual] :
         diagnostics.procrustes_residuals) {
      residuals.push_back({{"component", component}, {"residual", residual}});
    }
    report["procrustes_residuals"] = std::move(residuals);
  }
  report["warnings"] = warnings;
  summary["report"] = std::move(report);
  write_summary(out, summary);
  print_warnings(warnings);

  std::cout << "merged " << cfg.experts.size() << " experts ("
            << cfg.method << ") -> " << (out / "checkpoint").string() << "\n";
  return 0;
}

int cmd_diagnose(const RunConfig& cfg) {
  require_out(cfg);
  require_experts(cfg, 1);
  if (cfg.experts.size() != 1) {
    throw ParseError("diagnose takes exactly one --expert");
  }
  if (cfg.fractions.empty()) {
    throw ParseError("diagnose needs at least one --fraction");
  }

  // With a base the subject is the task vector; without one the checkpoint's
  // own tensors are analyzed directly.
  const Checkpoint subject = load_checkpoint(cfg.experts[0]);
  TaskVector tv;
  if (!cfg.base.empty()) {
    tv = task_vector(subject, load_checkpoint(cfg.base));
  } else {
    tv.tensors = subject.tensors;
  }

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  ordered_json per_fraction = ordered_json::array();
  for (double fraction : cfg.fractions) {
    const RankReport report = rank_report(tv, fraction);
    const std::string name = "rank_" + format_double(fraction) + ".csv";
    write_rank_report_csv(report, out / name, out / "spectra.csv");
    ordered_json entry;
    entry["fraction"] = fraction;
    entry["csv"] = name;
    entry["rows"] = report.rows.size();
    entry["mean_stable_rank"] = mean_stable_rank(report);
    per_fraction.push_back(std::move(entry));
  }

  ordered_json summary = config_to_json(cfg, "diagnose");
  ordered_json report;
  report["fractions"] = std::move(per_fraction);
  report["spectra_csv"] = "spectra.csv";
  summary["report"] = std::move(report);
  write_summary(out, summary);

  std::cout << "diagnosed " << cfg.experts[0] << " across "
            << cfg.fractions.size() << " fraction(s) -> " << out.string()
            << "\n";
  return 0;
}

// Shared by align and select: decompose the pool and score misalignment.
AlignmentMatrix pool_alignment(const RunConfig& cfg,
                               std::vector<ComponentFactors>* components_out,
                               WarningList* warnings) {
  const Checkpoint base = load_checkpoint(cfg.base);
  const std::vector<TaskVector> deltas = load_expert_deltas(cfg, base);
  std::vector<ComponentFactors> components =
      decompose_task_vectors(deltas, hogsvd_config(cfg), warnings);
  AlignmentMatrix alignment = alignment_from_components(components);
  if (components_out) *components_out = std::move(components);
  return alignment;
}

int cmd_align(const RunConfig& cfg) {
  require_base(cfg);
  require_out(cfg);
  require_experts(cfg, 2);

  WarningList warnings;
  std::vector<ComponentFactors> components;
  const AlignmentMatrix alignment = pool_alignment(cfg, &components, &warnings);

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  write_alignment_csv(alignment, out / "alignment_partials.csv",
                      out / "alignment_mean.csv");
  write_gsv_csv(components, out / "gsv.csv");

  ordered_json summary = config_to_json(cfg, "align");
  ordered_json report;
  report["components"] = alignment.components;
  report["n_experts"] = cfg.experts.size();
  if (cfg.k != 0) {
    const std::vector<std::size_t> selected =
        select_experts(alignment.scores, cfg.k, selection_mode(cfg));
    report["selected"] = selected;
    std::cout << "selected experts:";
    for (std::size_t idx : selected) std::cout << " " << idx;
    std::cout << "\n";
  } else {
    report["selected"] = ordered_json();
  }
  report["warnings"] = warnings;
  summary["report"] = std::move(report);
  write_summary(out, summary);
  print_warnings(warnings);

  std::cout << "aligned " << cfg.experts.size() << " experts over "
            << alignment.components.size() << " component(s) -> "
            << out.string() << "\n";
  return 0;
}

int cmd_select(const RunConfig& cfg) {
  require_base(cfg);
  require_out(cfg);
  require_experts(cfg, 2);
  if (cfg.k == 0) throw ParseError("select needs --k >= 2");

  WarningList warnings;
  const AlignmentMatrix alignment = pool_alignment(cfg, nullptr, &warnings);
  const std::vector<std::size_t> selected =
      select_experts(alignment.scores, cfg.k, selection_mode(cfg));

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  {
    ordered_json chosen;
    chosen["selected"] = selected;
    std::ofstream file(out / "selected.json", std::ios::binary);
    if (!file) {
      throw StorageError("cannot write " + (out / "selected.json").string());
    }
    file << chosen.dump(2) << "\n";
  }

  ordered_json summary = config_to_json(cfg, "select");
  ordered_json report;
  report["selected"] = selected;
  report["warnings"] = warnings;
  summary["report"] = std::move(report);
  write_summary(out, summary);
  print_warnings(warnings);

  std::cout << "selected experts:";
  for (std::size_t idx : selected) std::cout << " " << idx;
  std::cout << "\n";
  return 0;
}

int cmd_boost(const RunConfig& cfg) {
  require_base(cfg);
  require_out(cfg);
  if (cfg.experts.size() != 1) {
    throw ParseError("boost takes exactly one --expert");
  }

  const Checkpoint base = load_checkpoint(cfg.base);
  TaskVector delta = task_vector(load_checkpoint(cfg.experts[0]), base);

  const RankReport before = rank_report(delta);
  WarningList warnings;
  delta = boost_task_vector(delta, boost_config(cfg), &warnings);
  const RankReport after = rank_report(delta);

  const Checkpoint result = apply_task_vector(base, delta, cfg.alpha);
  const std::filesystem::path out(cfg.out);
  save_checkpoint(result, out / "checkpoint");

  ordered_json summary = config_to_json(cfg, "boost");
  ordered_json report;
  report["components"] = rank_rows_json(before, after);
  report["mean_stable_rank_before"] = mean_stable_rank(before);
  report["mean_stable_rank_after"] = mean_stable_rank(after);
  report["warnings"] = warnings;
  summary["report"] = std::move(report);
  write_summary(out, summary);
  print_warnings(warnings);

  std::cout << "boosted " << cfg.experts[0] << " (beta "
            << format_double(cfg.beta) << ") -> "
            << (out / "checkpoint").string() << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  require_out(cfg);
  const SyntheticSpec spec = synthetic_spec(cfg);
  const std::filesystem::path out(cfg.out);

  save_checkpoint(synthetic_base(spec), out / "base");
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    save_checkpoint(synthetic_expert(spec, e),
                    out / ("expert_" + zero_padded(e)));
  }

  ordered_json summary = config_to_json(cfg, "synth");
  ordered_json report;
  report["base"] = "base";
  ordered_json experts = ordered_json::array();
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    experts.push_back("expert_" + zero_padded(e));
  }
  report["experts"] = std::move(experts);
  summary["report"] = std::move(report);
  write_summary(out, summary);

  std::cout << "generated " << spec.n_experts << " experts + base -> "
            << out.string() << "\n";
  return 0;
}

// Runs the scoring hook and extracts the first parseable number it prints.
double run_eval_hook(std::string command,
                     const std::filesystem::path& checkpoint) {
  const std::string token = "{checkpoint}";
  for (std::size_t pos = command.find(token); pos != std::string::npos;
       pos = command.find(token, pos)) {
    command.replace(pos, token.size(), checkpoint.string());
    pos += checkpoint.string().size();
  }

  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) throw StorageError("eval_command failed to start: " + command);
  std::string output;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe)) output += buf;
  const int status = pclose(pipe);
  if (status != 0) {
    throw Error("eval_command exited with status " + std::to_string(status) +
                ": " + command);
  }
  std::istringstream stream(output);
  std::string word;
  while (stream >> word) {
    try {
      std::size_t consumed = 0;
      const double value = std::stod(word, &consumed);
      if (consumed == word.size()) return value;
    } catch (const std::exception&) {
      // not a number; keep scanning
    }
  }
  throw Error("eval_command printed no number: " + command);
}

int cmd_sweep(const RunConfig& cfg) {
  require_base(cfg);
  require_out(cfg);
  require_experts(cfg, 2);
  if (cfg.alpha_grid.empty() || cfg.beta_grid.empty()) {
    throw ParseError("sweep needs non-empty alpha_grid and beta_grid");
  }

  const Checkpoint base = load_checkpoint(cfg.base);
  const std::vector<TaskVector> deltas = load_expert_deltas(cfg, base);
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);

  std::string csv = "alpha,beta,mean_stable_rank_merged,"
                    "mean_stable_rank_boosted,score\n";
  ordered_json cells = ordered_json::array();
  WarningList warnings;

  for (double alpha : cfg.alpha_grid) {
    for (double beta : cfg.beta_grid) {
      TaskVector merged;
      if (cfg.method == "hogsvd") {
        merged = hogsvd_boost_merge(deltas, hogsvd_config(cfg), beta,
                                    &warnings);
      } else {
        MergeConfig mc = merge_config(cfg);
        mc.alpha = alpha;
        merged = merge_task_vectors(deltas, mc);
      }
      const RankReport before = rank_report(merged);
      if (cfg.method != "hogsvd") {
        BoostConfig bc = boost_config(cfg);
        bc.beta = beta;
        merged = boost_task_vector(merged, bc, &warnings);
      }
      const RankReport after = rank_report(merged);

      ordered_json cell;
      cell["alpha"] = alpha;
      cell["beta"] = beta;
      cell["mean_stable_rank_merged"] = mean_stable_rank(before);
      cell["mean_stable_rank_boosted"] = mean_stable_rank(after);

      std::string score_field;
      if (!cfg.eval_command.empty()) {
        const std::filesystem::path cell_dir =
            out / "cells" /
            ("alpha_" + format_double(alpha) + "_beta_" +
             format_double(beta));
        save_checkpoint(apply_task_vector(base, merged, alpha), cell_dir);
        const double score = run_eval_hook(cfg.eval_command, cell_dir);
        score_field = format_double(score);
        cell["score"] = score;
        cell["checkpoint"] = cell_dir.lexically_relative(out).string();
      } else {
        cell["score"] = ordered_json();
      }

      const ordered_json& merged_rank = cell["mean_stable_rank_merged"];
      const ordered_json& boosted_rank = cell["mean_stable_rank_boosted"];
      csv += format_double(alpha) + "," + format_double(beta) + "," +
             (merged_rank.is_null() ? "nan"
                                    : format_double(merged_rank.get<double>())) +
             "," +
             (boosted_rank.is_null()
                  ? "nan"
                  : format_double(boosted_rank.get<double>())) +
             "," + score_field + "\n";
      cells.push_back(std::move(cell));
    }
  }

  {
    std::ofstream file(out / "sweep.csv", std::ios::binary);
    if (!file) throw StorageError("cannot write " + (out / "sweep.csv").string());
    file << csv;
  }
  ordered_json summary = config_to_json(cfg, "sweep");
  ordered_json report;
  report["cells"] = std::move(cells);
  report["warnings"] = warnings;
  summary["report"] = std::move(report);
  write_summary(out, summary);
  print_warnings(warnings);

  std::cout << "swept " << cfg.alpha_grid.size() << " x "
            << cfg.beta_grid.size() << " cells -> "
            << (out / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-vector merging toolkit"};
  app.require_subcommand(1);

  std::string config_path, base, method, lines, out, sel_mode, eval_command;
  std::vector<std::string> experts;
  double alpha = 0, beta = 0, pi = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<double> fractions;

  auto* o_config =
      app.add_option("--config", config_path,
                     "JSON config file; explicit flags override it");
  auto* o_base = app.add_option("--base", base, "base checkpoint directory");
  auto* o_expert = app.add_option(
      "--expert", experts, "expert checkpoint directory (repeatable)");
  auto* o_method =
      app.add_option("--method", method, "ta | ties | consensus | hogsvd");
  auto* o_alpha = app.add_option("--alpha", alpha, "task-vector scale");
  auto* o_beta = app.add_option(
      "--beta", beta, "boost threshold in [0,1); also enables boosting");
  auto* o_lines = app.add_option(
      "--lines", lines, "depth-linear scaling as start,end; enables it");
  auto* o_pi = app.add_option("--pi", pi, "quotient regularization weight");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_seed = app.add_option("--seed", seed, "synthetic generation seed");
  auto* o_fraction = app.add_option(
      "--fraction", fractions, "energy fraction for diagnose (repeatable)");
  auto* o_k = app.add_option("--k", k, "number of experts to select");

  const char* const verbs[] = {"merge", "diagnose", "align", "select",
                               "boost", "synth",    "sweep"};
  const char* const verb_help[] = {
      "merge expert checkpoints onto the base",
      "rank diagnostics for one checkpoint or task vector",
      "export alignment matrices for an expert pool",
      "pick the k best-aligned experts",
      "boost one task vector's spectra",
      "generate a synthetic expert pool",
      "grid-sweep alpha and beta"};
  for (std::size_t i = 0; i < 7; ++i) {
    app.add_subcommand(verbs[i], verb_help[i])->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg;
    if (o_config->count()) {
      std::ifstream file(config_path, std::ios::binary);
      if (!file) throw ParseError("config: cannot read " + config_path);
      ordered_json j;
      try {
        j = ordered_json::parse(file);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: invalid JSON: ") + e.what());
      }
      apply_config_json(cfg, j, command);
    }
    if (o_base->count()) cfg.base = base;
    if (o_expert->count()) cfg.experts = experts;
    if (o_method->count()) cfg.method = method;
    if (o_alpha->count()) cfg.alpha = alpha;
    if (o_beta->count()) {
      cfg.beta = beta;
      cfg.boost_enabled = true;
    }
    if (o_lines->count()) {
      double start = 0, end = 0;
      char tail = 0;
      if (std::sscanf(lines.c_str(), "%lf,%lf%c", &start, &end, &tail) != 2) {
        throw ParseError("--lines expects start,end");
      }
      cfg.lines_enabled = true;
      cfg.lines_start = start;
      cfg.lines_end = end;
    }
    if (o_pi->count()) cfg.pi = pi;
    if (o_out->count()) cfg.out = out;
    if (o_seed->count()) cfg.seed = seed;
    if (o_fraction->count()) cfg.fractions = fractions;
    if (o_k->count()) cfg.k = k;

    if (command == "merge") return cmd_merge(cfg);
    if (command == "diagnose") return cmd_diagnose(cfg);
    if (command == "align") return cmd_align(cfg);
    if (command == "select") return cmd_select(cfg);
    if (command == "boost") return cmd_boost(cfg);
    if (command == "synth") return cmd_synth(cfg);
    if (command == "sweep") return cmd_sweep(cfg);
    throw ParseError("unknown command " + command);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StorageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
