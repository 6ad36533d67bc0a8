#include "retypelab/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>

#include "retypelab/asm_core.hpp"
#include "retypelab/corpus_synth.hpp"
#include "retypelab/dataset.hpp"
#include "retypelab/eval_harness.hpp"
#include "retypelab/kv_config.hpp"
#include "retypelab/model_selection.hpp"
#include "retypelab/parallel.hpp"
#include "retypelab/pipeline.hpp"
#include "retypelab/rule_miner.hpp"

namespace retypelab::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::uint64_t seed = 1;
  int threads = 0;
  bool no_timestamp = false;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

/// Resolved-config echo placed next to every command's primary output.
void write_provenance(const std::string& out_path, const GlobalFlags& flags, KvConfig kv) {
  kv.set("seed", std::to_string(flags.seed));
  kv.set("threads", std::to_string(flags.threads));
  std::string text = kv.render();
  if (!flags.no_timestamp) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    text += "generated_at=" + std::to_string(now) + "\n";
  }
  write_file(out_path, text);
}

KvConfig load_config(const GlobalFlags& flags) {
  std::string path = flags.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("RETYPELAB_CONFIG")) path = env;
  }
  if (path.empty()) return KvConfig{};
  return KvConfig::load(path);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

ml::ModelSpec make_spec(const std::string& algorithm, const std::string& params_text,
                        std::uint64_t seed) {
  ml::ModelSpec spec;
  spec.algorithm = algorithm;
  spec.rng_seed = seed;
  for (const auto& pair : split_list(params_text, ',')) {
    auto eq = pair.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("bad --params entry '" + pair + "', expected key=value");
    }
    spec.params[pair.substr(0, eq)] = pair.substr(eq + 1);
  }
  return spec;
}

struct FeaturizeFlags {
  bool no_ret = false;
  bool no_post = false;
  bool no_advanced = false;
  bool anchor = false;
  int max_chunk_len = 8;
  int pattern_budget = 64;

  data::BuildOptions to_options() const {
    data::BuildOptions opts;
    opts.use_ret = !no_ret;
    opts.use_post = !no_post;
    opts.use_advanced = !no_advanced;
    opts.extract.max_len = max_chunk_len;
    opts.extract.mode = anchor ? extract::ScanMode::Anchor : extract::ScanMode::Window;
    opts.generalize.pattern_budget = pattern_budget;
    return opts;
  }
  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-ret", no_ret, "Drop RET-side features");
    cmd->add_flag("--no-post", no_post, "Drop POST-CALL features");
    cmd->add_flag("--no-advanced", no_advanced, "Drop the advanced discriminator features");
    cmd->add_flag("--anchor", anchor, "Use __RETURN<n>__ labels as hard chunk anchors");
    cmd->add_option("--max-chunk-len", max_chunk_len, "RET chunk length cap")->capture_default_str();
    cmd->add_option("--pattern-budget", pattern_budget, "Per-chunk pattern cap")->capture_default_str();
  }
};

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const eval::Metrics& m, data::Scheme scheme) {
  const auto& classes = data::scheme_classes(scheme);
  std::string text = "class,support,precision,recall,f1\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    text += classes[c] + "," + std::to_string(m.support[c]) + "," + fmt(m.precision[c]) + "," +
            fmt(m.recall[c]) + "," + fmt(m.f1[c]) + "\n";
  }
  text += "macro,," + fmt(m.macro_precision) + "," + fmt(m.macro_recall) + "," + fmt(m.macro_f1) + "\n";
  text += "accuracy,,,," + fmt(m.accuracy) + "\n";
  write_file(path, text);
}

void write_confusion_csv(const std::string& path, const eval::Metrics& m, data::Scheme scheme) {
  const auto& classes = data::scheme_classes(scheme);
  std::string text = "actual\\predicted";
  for (const auto& name : classes) text += "," + name;
  text += "\n";
  for (std::size_t a = 0; a < classes.size(); ++a) {
    text += classes[a];
    for (std::size_t p = 0; p < classes.size(); ++p) {
      text += "," + std::to_string(m.confusion[a][p]);
    }
    text += "\n";
  }
  write_file(path, text);
}

void write_accuracies_csv(const std::string& path, const std::vector<double>& accs) {
  std::string text = "repetition,accuracy\n";
  for (std::size_t i = 0; i < accs.size(); ++i) {
    text += std::to_string(i + 1) + "," + fmt(accs[i]) + "\n";
  }
  write_file(path, text);
}

std::string baselines_block(data::Scheme scheme) {
  std::string text = "decompiler baselines (fixed reference values, not re-measured):\n";
  for (const auto& b : eval::decompiler_baselines(scheme)) {
    text += "  " + std::string(b.name) + ": accuracy=" + fmt(b.accuracy) +
            " precision=" + fmt(b.precision) + " recall=" + fmt(b.recall) + " f1=" + fmt(b.f1) + "\n";
  }
  return text;
}

/// One row for the trained model next to the decompiler reference rows —
/// the layout used for final comparisons.
void write_comparison_csv(const std::string& path, const std::string& algorithm,
                          const eval::RepeatedEval& r, data::Scheme scheme) {
  std::string text = "system,accuracy,ci95_lo,ci95_hi,macro_precision,macro_recall,macro_f1\n";
  text += algorithm + "," + fmt(r.mean) + "," + fmt(r.ci_lo) + "," + fmt(r.ci_hi) + "," +
          fmt(r.aggregate.macro_precision) + "," + fmt(r.aggregate.macro_recall) + "," +
          fmt(r.aggregate.macro_f1) + "\n";
  for (const auto& b : eval::decompiler_baselines(scheme)) {
    text += std::string(b.name) + "," + fmt(b.accuracy) + ",,," + fmt(b.precision) + "," +
            fmt(b.recall) + "," + fmt(b.f1) + "\n";
  }
  write_file(path, text);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_synth(const GlobalFlags& flags, const std::string& out_path) {
  KvConfig kv = load_config(flags);
  synth::SynthConfig cfg = synth::SynthConfig::from_kv(kv);
  cfg.rng_seed = flags.seed;
  synth::SynthCorpus corpus = synth::synthesize_corpus(cfg);
  write_file(out_path, synth::emit_listing(corpus));
  write_provenance(out_path + ".provenance.txt", flags, cfg.to_kv());
  std::cout << "synth: wrote " << corpus.functions.size() << " functions ("
            << corpus.records.size() << " labeled) to " << out_path << "\n";
  return kExitOk;
}

int cmd_build(const GlobalFlags& flags, const std::vector<std::string>& inputs,
              const std::string& scheme_name, const std::string& out_path,
              const FeaturizeFlags& feats, int min_rows, bool strict) {
  auto scheme = data::parse_scheme(scheme_name);
  if (!scheme) throw std::invalid_argument("unknown scheme '" + scheme_name + "'");
  std::vector<asmx::FunctionListing> functions;
  asmx::ParseOptions popts;
  popts.strict_mnemonics = strict;
  for (const auto& input : inputs) {
    auto parsed = asmx::parse_listing(read_file(input), popts);
    functions.insert(functions.end(), parsed.begin(), parsed.end());
  }
  data::BuildDiagnostics diag;
  data::Dataset d = data::build_dataset(functions, *scheme, feats.to_options(), &diag);
  std::vector<std::string> dropped;
  if (min_rows > 0) d = data::prune_rare_features(d, min_rows, &dropped);
  data::write_csv(d, out_path, !flags.no_timestamp);

  KvConfig kv;
  kv.set("inputs", std::to_string(inputs.size()));
  kv.set("scheme", std::string(data::scheme_name(*scheme)));
  kv.set("min_support_rows", std::to_string(min_rows));
  kv.set("pruned_features", std::to_string(dropped.size()));
  kv.set("rows", std::to_string(d.n_rows()));
  kv.set("features", std::to_string(d.n_features()));
  kv.set("unlabeled_functions", std::to_string(diag.unlabeled_functions.size()));
  write_provenance(out_path + ".provenance.txt", flags, kv);

  std::cout << "build: " << d.n_rows() << " rows x " << d.n_features() << " features ("
            << diag.unlabeled_functions.size() << " unlabeled functions skipped, "
            << dropped.size() << " rare features pruned) -> " << out_path << "\n";
  for (const auto& note : diag.notes) std::cout << "build: note: " << note << "\n";
  return kExitOk;
}

std::string selection_csv(const std::vector<msel::SelectionResult>& results,
                          const msel::SelectionResult& winner) {
  std::string text = "method,fold1,fold2,fold3,mean,n_selected,winner,selected\n";
  for (const auto& r : results) {
    text += r.method.name();
    for (int f = 0; f < 3; ++f) {
      text += ",";
      text += f < static_cast<int>(r.fold_accuracies.size()) ? fmt(r.fold_accuracies[static_cast<std::size_t>(f)]) : "";
    }
    text += "," + fmt(r.cv_accuracy) + "," + std::to_string(r.selected.size());
    text += r.method.name() == winner.method.name() ? ",1," : ",0,";
    std::string cols;
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
      if (i) cols += " ";
      cols += std::to_string(r.selected[i]);
    }
    text += "\"" + cols + "\"\n";
  }
  return text;
}

std::vector<int> read_selection_winner(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open selection file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<int> winner;
  while (std::getline(in, line)) {
    auto cols_start = line.find('"');
    if (cols_start == std::string::npos) continue;
    auto fields = split_list(line.substr(0, cols_start), ',');
    if (fields.size() < 7 || fields[6] != "1") continue;
    auto cols_end = line.rfind('"');
    std::istringstream cols(line.substr(cols_start + 1, cols_end - cols_start - 1));
    int c;
    while (cols >> c) winner.push_back(c);
  }
  if (winner.empty()) throw std::invalid_argument(path + ": no winning selection row found");
  return winner;
}

int cmd_select(const GlobalFlags& flags, const std::string& data_path,
               const std::string& algorithm, const std::string& methods_text,
               const std::string& params_text, const std::string& out_path) {
  data::Dataset d = data::read_csv(data_path);
  std::vector<msel::SelectionMethod> methods;
  if (methods_text.empty()) {
    methods = msel::default_selection_methods();
  } else {
    for (const auto& name : split_list(methods_text, ',')) {
      methods.push_back(msel::SelectionMethod::parse(name));
    }
  }
  ml::ModelSpec spec = make_spec(algorithm, params_text, flags.seed);
  std::vector<msel::SelectionResult> all;
  msel::SelectionResult winner = msel::select_features(d, spec, methods, flags.seed, &all);
  write_file(out_path, selection_csv(all, winner));

  KvConfig kv;
  kv.set("data", data_path);
  kv.set("algorithm", algorithm);
  kv.set("winner", winner.method.name());
  kv.set("selected", std::to_string(winner.selected.size()));
  write_provenance(out_path + ".provenance.txt", flags, kv);
  std::cout << "select: " << winner.method.name() << " keeps " << winner.selected.size() << " of "
            << d.n_features() << " features (cv accuracy " << fmt(winner.cv_accuracy) << ") -> "
            << out_path << "\n";
  return kExitOk;
}

int cmd_tune(const GlobalFlags& flags, const std::string& data_path, const std::string& algorithm,
             const std::string& out_path) {
  data::Dataset d = data::read_csv(data_path);
  msel::GridSpec grid = msel::default_grid(algorithm);
  msel::GridResult result = msel::grid_search(d, algorithm, grid, flags.seed);

  std::string text = "point,fold1,fold2,fold3,mean,best\n";
  for (const auto& point : result.table) {
    std::string name;
    for (const auto& [k, v] : point.params) name += (name.empty() ? "" : " ") + k + "=" + v;
    text += "\"" + name + "\"";
    for (double a : point.fold_accuracies) text += "," + fmt(a);
    text += "," + fmt(point.mean_accuracy);
    text += point.params == result.best ? ",1\n" : ",0\n";
  }
  write_file(out_path, text);

  KvConfig kv;
  kv.set("data", data_path);
  kv.set("algorithm", algorithm);
  kv.set("best_accuracy", fmt(result.best_accuracy));
  for (const auto& [k, v] : result.best) kv.set("best." + k, v);
  write_provenance(out_path + ".provenance.txt", flags, kv);
  std::cout << "tune: best accuracy " << fmt(result.best_accuracy) << " -> " << out_path << "\n";
  return kExitOk;
}

int cmd_train(const GlobalFlags& flags, const std::string& data_path, const std::string& algorithm,
              const std::string& params_text, const std::string& selection_path,
              bool tune_first, const std::string& out_path) {
  data::Dataset d = data::read_csv(data_path);
  if (!selection_path.empty()) {
    d = data::select_columns(d, read_selection_winner(selection_path));
  }
  ml::ModelSpec spec = make_spec(algorithm, params_text, flags.seed);
  if (tune_first) {
    msel::GridResult grid = msel::grid_search(d, algorithm, msel::default_grid(algorithm), flags.seed);
    for (const auto& [k, v] : grid.best) {
      if (!spec.params.count(k)) spec.params[k] = v;
    }
  }
  ml::TrainedModel model = ml::train(spec, d);
  ml::save_model(model, out_path);

  KvConfig kv;
  kv.set("data", data_path);
  kv.set("algorithm", algorithm);
  kv.set("rows", std::to_string(d.n_rows()));
  kv.set("features", std::to_string(d.n_features()));
  for (const auto& [k, v] : spec.params) kv.set("param." + k, v);
  write_provenance(out_path + ".provenance.txt", flags, kv);
  std::cout << "train: " << algorithm << " on " << d.n_rows() << " rows -> " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalFlags& flags, int method, const std::string& real_path,
             const std::string& synth_path, const std::string& programs_text,
             const std::string& algorithm, const std::string& params_text, int repetitions,
             const std::string& out_dir) {
  ml::ModelSpec spec = make_spec(algorithm, params_text, flags.seed);
  fs::create_directories(out_dir);

  KvConfig kv;
  kv.set("method", std::to_string(method));
  kv.set("algorithm", algorithm);
  kv.set("repetitions", std::to_string(repetitions));

  std::string summary;
  if (method == 1 || method == 2) {
    if (synth_path.empty()) throw std::invalid_argument("eval: --synth is required for methods 1 and 2");
    data::Dataset synth_set = data::read_csv(synth_path);
    data::Dataset real_set;
    real_set.scheme = synth_set.scheme;
    if (!real_path.empty()) real_set = data::read_csv(real_path);
    kv.set("real", real_path.empty() ? "(none)" : real_path);
    kv.set("synth", synth_path);

    if (method == 1) {
      eval::RepeatedEval r = eval::evaluate_method1(real_set, synth_set, spec, flags.seed, repetitions);
      write_accuracies_csv(out_dir + "/accuracies.csv", r.accuracies);
      write_metrics_csv(out_dir + "/metrics.csv", r.aggregate, synth_set.scheme);
      write_confusion_csv(out_dir + "/confusion.csv", r.aggregate, synth_set.scheme);
      write_comparison_csv(out_dir + "/comparison.csv", algorithm, r, synth_set.scheme);
      summary = "method 1 (mixed 80/20, " + std::to_string(repetitions) + " repetitions)\n";
      summary += "accuracy mean=" + fmt(r.mean) + " sd=" + fmt(r.sd) + " ci95=[" + fmt(r.ci_lo) +
                 ", " + fmt(r.ci_hi) + "]\n";
      summary += "macro f1 (aggregate confusion)=" + fmt(r.aggregate.macro_f1) + "\n\n";
      summary += baselines_block(synth_set.scheme);
    } else {
      if (real_path.empty()) throw std::invalid_argument("eval: --real is required for method 2");
      eval::Method2Result r = eval::evaluate_method2(real_set, synth_set, spec, flags.seed, 10,
                                                     0.01, repetitions);
      std::string trace = "real_percent,accuracy,cov\n";
      for (std::size_t i = 0; i < r.trace.xs.size(); ++i) {
        std::size_t window_fill = r.trace.xs.size() - r.trace.covs.size();
        trace += fmt(r.trace.xs[i]) + "," + fmt(r.trace.accuracies[i]) + ",";
        trace += i >= window_fill ? fmt(r.trace.covs[i - window_fill]) : std::string("");
        trace += "\n";
      }
      write_file(out_dir + "/trace.csv", trace);
      write_accuracies_csv(out_dir + "/accuracies.csv", r.at_stop.accuracies);
      write_metrics_csv(out_dir + "/metrics.csv", r.at_stop.aggregate, synth_set.scheme);
      write_confusion_csv(out_dir + "/confusion.csv", r.at_stop.aggregate, synth_set.scheme);
      write_comparison_csv(out_dir + "/comparison.csv", algorithm, r.at_stop, synth_set.scheme);
      summary = "method 2 (real-fraction sweep, fixed 20% real holdout)\n";
      summary += "stop at " + fmt(r.trace.stop_x) + "% real functions (converged=" +
                 (r.trace.converged ? std::string("yes") : std::string("no")) + ")\n";
      summary += "reference stop fractions: 32% (size_rep), 48% (high_level)\n";
      summary += "accuracy at stop mean=" + fmt(r.at_stop.mean) + " ci95=[" + fmt(r.at_stop.ci_lo) +
                 ", " + fmt(r.at_stop.ci_hi) + "]\n\n";
      summary += baselines_block(synth_set.scheme);
      kv.set("stop_percent", fmt(r.trace.stop_x));
    }
  } else if (method == 3) {
    auto program_paths = split_list(programs_text, ',');
    if (program_paths.size() < 2) {
      throw std::invalid_argument("eval: method 3 needs at least two --programs datasets");
    }
    std::vector<data::Dataset> programs;
    std::vector<std::string> names;
    for (const auto& path : program_paths) {
      programs.push_back(data::read_csv(path));
      names.push_back(fs::path(path).stem().string());
    }
    auto results = eval::evaluate_method3(programs, names, spec, flags.seed);
    summary = "method 3 (leave one program out)\n";
    std::string table = "program,test_rows,accuracy,macro_precision,macro_recall,macro_f1\n";
    for (const auto& r : results) {
      table += r.program + "," + std::to_string(r.test_rows) + "," + fmt(r.metrics.accuracy) + "," +
               fmt(r.metrics.macro_precision) + "," + fmt(r.metrics.macro_recall) + "," +
               fmt(r.metrics.macro_f1) + "\n";
      summary += r.program + ": accuracy=" + fmt(r.metrics.accuracy) + " macro_f1=" +
                 fmt(r.metrics.macro_f1) + "\n";
      write_confusion_csv(out_dir + "/confusion_" + r.program + ".csv", r.metrics,
                          programs[0].scheme);
    }
    write_file(out_dir + "/metrics.csv", table);
    summary += "\n" + baselines_block(programs[0].scheme);
    kv.set("programs", programs_text);
  } else {
    throw std::invalid_argument("eval: --method must be 1, 2 or 3");
  }

  write_file(out_dir + "/summary.txt", summary);
  write_provenance(out_dir + "/config.txt", flags, kv);
  std::cout << summary;
  return kExitOk;
}

int cmd_mine(const GlobalFlags& flags, const std::string& data_path,
             const std::string& selections_text, double min_support, int max_antecedents,
             double min_confidence, const std::string& out_path) {
  data::Dataset d = data::read_csv(data_path);
  bool used_union = false;
  if (!selections_text.empty()) {
    std::vector<std::vector<int>> selections;
    for (const auto& path : split_list(selections_text, ',')) {
      selections.push_back(read_selection_winner(path));
    }
    auto columns = rules::preselect_columns(selections, &used_union);
    d = data::select_columns(d, columns);
    if (used_union) {
      std::cout << "mine: warning: selection intersection was empty, falling back to the union\n";
    }
  }
  rules::MineParams params;
  params.min_support = min_support;
  params.max_antecedents = max_antecedents;
  params.min_confidence = min_confidence;
  auto mined = rules::mine_rules(d, params);

  std::string provenance = "mined from " + data_path + " seed=" + std::to_string(flags.seed) +
                           " min_support=" + fmt(min_support) +
                           " max_antecedents=" + std::to_string(max_antecedents) +
                           " min_confidence=" + fmt(min_confidence);
  write_file(out_path, rules::render_rule_cards(mined, d, provenance));

  KvConfig kv;
  kv.set("data", data_path);
  kv.set("rules", std::to_string(mined.size()));
  kv.set("min_support", fmt(min_support));
  kv.set("max_antecedents", std::to_string(max_antecedents));
  kv.set("min_confidence", fmt(min_confidence));
  kv.set("union_fallback", used_union ? "true" : "false");
  write_provenance(out_path + ".provenance.txt", flags, kv);
  std::cout << "mine: " << mined.size() << " rules -> " << out_path << "\n";
  return kExitOk;
}

int cmd_predict(const GlobalFlags& flags, const std::string& model_path,
                const std::string& listing_path, const FeaturizeFlags& feats,
                const std::string& out_path) {
  ml::TrainedModel model = ml::load_model(model_path);
  auto functions = asmx::parse_listing(read_file(listing_path));
  auto bundle = extract::extract_all(functions, feats.to_options().extract);

  std::string text = "function,predicted_type";
  for (const auto& name : model.classes) text += ",score_" + name;
  text += "\n";

  data::BuildOptions opts = feats.to_options();
  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < model.vocabulary.size(); ++c) column_of[model.vocabulary[c]] = c;
  for (const auto& fn : functions) {
    static const std::vector<extract::PostCallChunk> kNone;
    auto it = bundle.post_chunks.find(fn.name);
    const auto& posts = it == bundle.post_chunks.end() ? kNone : it->second;
    auto names = data::function_feature_names(fn, posts, opts);
    std::vector<std::uint8_t> row(model.vocabulary.size(), 0);
    for (const auto& name : names) {
      auto hit = column_of.find(name);
      if (hit != column_of.end()) row[hit->second] = 1;
    }
    int predicted = model.predict(row);
    text += fn.name + "," + model.classes[static_cast<std::size_t>(predicted)];
    if (model.has_proba()) {
      for (double p : model.predict_proba(row)) text += "," + fmt(p);
    } else {
      auto scores = model.impl->scores(row);
      for (double s : scores) text += "," + fmt(s);
    }
    text += "\n";
  }
  write_file(out_path, text);

  KvConfig kv;
  kv.set("model", model_path);
  kv.set("listing", listing_path);
  kv.set("functions", std::to_string(functions.size()));
  write_provenance(out_path + ".provenance.txt", flags, kv);
  std::cout << "predict: " << functions.size() << " functions -> " << out_path << "\n";
  return kExitOk;
}

int cmd_report(const GlobalFlags& flags, const std::string& dir, const std::string& out_path) {
  std::string text = "retypelab report for " + dir + "\n\n";
  for (const char* name : {"summary.txt", "metrics.csv", "trace.csv"}) {
    fs::path p = fs::path(dir) / name;
    if (fs::exists(p)) {
      text += "== " + std::string(name) + " ==\n" + read_file(p.string()) + "\n";
    }
  }
  if (text.find("==") == std::string::npos) {
    throw std::invalid_argument("report: no report files found under " + dir);
  }
  write_file(out_path, text);
  write_provenance(out_path + ".provenance.txt", flags, KvConfig{});
  std::cout << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  GlobalFlags flags;

  CLI::App app{"retypelab: return-type inference laboratory for 32-bit x86 listings"};
  app.require_subcommand(1);
  app.add_option("--config", flags.config_path, "key=value config file (env RETYPELAB_CONFIG)");
  app.add_option("--seed", flags.seed, "RNG seed; every command is deterministic given it")
      ->capture_default_str();
  app.add_option("--threads", flags.threads, "Worker cap (0 = auto)")->capture_default_str();
  app.add_flag("--no-timestamp", flags.no_timestamp, "Suppress timestamp lines in outputs");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  std::string synth_out = "corpus.lst";
  synth_cmd->add_option("--out", synth_out, "Listing output path")->capture_default_str();

  // build
  auto* build_cmd = app.add_subcommand("build", "Build the occurrence-matrix dataset from listings");
  std::vector<std::string> build_inputs;
  std::string build_scheme = "high_level", build_out = "dataset.csv";
  int build_min_rows = 2;
  bool build_strict = false;
  FeaturizeFlags build_feats;
  build_cmd->add_option("--in", build_inputs, "Input listing file(s)")->required();
  build_cmd->add_option("--scheme", build_scheme, "high_level or size_rep")->capture_default_str();
  build_cmd->add_option("--out", build_out, "Dataset CSV output")->capture_default_str();
  build_cmd->add_option("--min-rows", build_min_rows, "Prune features seen in fewer rows (0 = keep all)")
      ->capture_default_str();
  build_cmd->add_flag("--strict", build_strict, "Reject unknown mnemonics");
  build_feats.add_to(build_cmd);

  // select
  auto* select_cmd = app.add_subcommand("select", "Wrapper feature selection");
  std::string select_data, select_algorithm = "decision_tree", select_methods, select_params,
              select_out = "selection.csv";
  select_cmd->add_option("--data", select_data, "Dataset CSV")->required();
  select_cmd->add_option("--algorithm", select_algorithm, "Wrapped classifier")->capture_default_str();
  select_cmd->add_option("--methods", select_methods,
                         "Comma list of sfm_{rf,et}_{mean,median} / rfe (default: all five)");
  select_cmd->add_option("--params", select_params, "Classifier params key=value[,key=value]");
  select_cmd->add_option("--out", select_out, "Selection report CSV")->capture_default_str();

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Exhaustive grid search with 3-fold stratified CV");
  std::string tune_data, tune_algorithm = "decision_tree", tune_out = "grid.csv";
  tune_cmd->add_option("--data", tune_data, "Dataset CSV")->required();
  tune_cmd->add_option("--algorithm", tune_algorithm, "Algorithm")->capture_default_str();
  tune_cmd->add_option("--out", tune_out, "Grid report CSV")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a classifier and save the model file");
  std::string train_data, train_algorithm = "decision_tree", train_params, train_selection,
              train_out = "model.json";
  bool train_tune = false;
  train_cmd->add_option("--data", train_data, "Dataset CSV")->required();
  train_cmd->add_option("--algorithm", train_algorithm, "Algorithm")->capture_default_str();
  train_cmd->add_option("--params", train_params, "Hyperparameters key=value[,key=value]");
  train_cmd->add_option("--selection", train_selection, "Selection CSV; trains on its winner columns");
  train_cmd->add_flag("--tune", train_tune, "Grid-search hyperparameters first");
  train_cmd->add_option("--out", train_out, "Model file")->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run evaluation method 1, 2 or 3");
  int eval_method = 1, eval_reps = eval::kDefaultRepetitions;
  std::string eval_real, eval_synth, eval_programs, eval_algorithm = "decision_tree", eval_params,
              eval_out_dir = "reports";
  eval_cmd->add_option("--method", eval_method, "1=mixed 80/20, 2=real-fraction sweep, 3=leave-one-program-out")
      ->capture_default_str();
  eval_cmd->add_option("--real", eval_real, "Real dataset CSV");
  eval_cmd->add_option("--synth", eval_synth, "Synthetic dataset CSV");
  eval_cmd->add_option("--programs", eval_programs, "Comma list of per-program dataset CSVs (method 3)");
  eval_cmd->add_option("--algorithm", eval_algorithm, "Algorithm")->capture_default_str();
  eval_cmd->add_option("--params", eval_params, "Hyperparameters");
  eval_cmd->add_option("--reps", eval_reps, "Repetitions")->capture_default_str();
  eval_cmd->add_option("--out-dir", eval_out_dir, "Report directory")->capture_default_str();

  // mine
  auto* mine_cmd = app.add_subcommand("mine", "Mine association rules and render rule cards");
  std::string mine_data, mine_selections, mine_out = "rules.txt";
  double mine_support = 0.01, mine_confidence = 1.0;
  int mine_antecedents = 2;
  mine_cmd->add_option("--data", mine_data, "Dataset CSV")->required();
  mine_cmd->add_option("--selections", mine_selections, "Selection CSVs; mining runs on their intersection");
  mine_cmd->add_option("--min-support", mine_support, "Minimum rule support")->capture_default_str();
  mine_cmd->add_option("--max-antecedents", mine_antecedents, "Antecedent cap")->capture_default_str();
  mine_cmd->add_option("--min-confidence", mine_confidence, "Confidence floor")->capture_default_str();
  mine_cmd->add_option("--out", mine_out, "Rule card document")->capture_default_str();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict return types for an unlabeled listing");
  std::string predict_model, predict_in, predict_out = "predictions.csv";
  FeaturizeFlags predict_feats;
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_cmd->add_option("--in", predict_in, "Listing file")->required();
  predict_cmd->add_option("--out", predict_out, "Predictions CSV")->capture_default_str();
  predict_feats.add_to(predict_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Summarize a report directory");
  std::string report_dir = "reports", report_out = "report.txt";
  report_cmd->add_option("--dir", report_dir, "Report directory")->capture_default_str();
  report_cmd->add_option("--out", report_out, "Summary output")->capture_default_str();

  std::vector<std::string> argv_storage = args;
  std::vector<const char*> argv = {"retypelab"};
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  par::set_max_threads(flags.threads);
  try {
    if (synth_cmd->parsed()) return cmd_synth(flags, synth_out);
    if (build_cmd->parsed()) {
      return cmd_build(flags, build_inputs, build_scheme, build_out, build_feats, build_min_rows,
                       build_strict);
    }
    if (select_cmd->parsed()) {
      return cmd_select(flags, select_data, select_algorithm, select_methods, select_params,
                        select_out);
    }
    if (tune_cmd->parsed()) return cmd_tune(flags, tune_data, tune_algorithm, tune_out);
    if (train_cmd->parsed()) {
      return cmd_train(flags, train_data, train_algorithm, train_params, train_selection,
                       train_tune, train_out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(flags, eval_method, eval_real, eval_synth, eval_programs, eval_algorithm,
                      eval_params, eval_reps, eval_out_dir);
    }
    if (mine_cmd->parsed()) {
      return cmd_mine(flags, mine_data, mine_selections, mine_support, mine_antecedents,
                      mine_confidence, mine_out);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(flags, predict_model, predict_in, predict_feats, predict_out);
    }
    if (report_cmd->parsed()) return cmd_report(flags, report_dir, report_out);
    std::cerr << "error: no subcommand\n";
    return kExitValidation;
  } catch (const asmx::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const data::CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ml::FingerprintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ml::ModelIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace retypelab::cli
