// slotfill: command-line front end for corpus generation, training,
// evaluation, and the experiment harness. All results are CSV files.
//
// Exit codes: 0 success, 1 configuration error, 2 data/input error,
// 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slotfill/experiments.hpp"

using namespace slotfill;

namespace {

// Precedence for the output directory: built-in default < config file <
// SLOTFILL_OUT_DIR environment variable < --out-dir flag.
void resolve_out_dir(ExperimentConfig& cfg, const std::string& flag_value) {
  if (const char* env = std::getenv("SLOTFILL_OUT_DIR"); env && *env)
    cfg.out_dir = env;
  if (!flag_value.empty()) cfg.out_dir = flag_value;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir_flag;
  std::size_t epochs = 0;       // 0: keep config value
  std::uint64_t data_seed = 0;  // 0: keep config value
  std::uint64_t train_seed = 0;
  std::size_t num_seeds = 0;
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config file");
  cmd->add_option("--out-dir", o.out_dir_flag,
                  "output directory (overrides config and SLOTFILL_OUT_DIR)");
  cmd->add_option("--epochs", o.epochs, "training epochs override");
  cmd->add_option("--data-seed", o.data_seed, "corpus generation seed override");
  cmd->add_option("--train-seed", o.train_seed, "training seed override");
  cmd->add_option("--num-seeds", o.num_seeds, "seed replicas per cell");
  cmd->add_flag("--paper-scale", o.paper_scale,
                "use the full published corpus sizes and model dimensions");
}

ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = ExperimentConfig::from_file(o.config_path);
  if (o.paper_scale) cfg.paper_scale();
  if (o.epochs) cfg.train.epochs = o.epochs;
  if (o.data_seed) cfg.data_seed = o.data_seed;
  if (o.train_seed) cfg.train_seed = o.train_seed;
  if (o.num_seeds) cfg.num_seeds = o.num_seeds;
  resolve_out_dir(cfg, o.out_dir_flag);
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> parse_data_args(
    const std::vector<std::string>& specs) {
  std::map<std::string, std::string> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw ConfigError("expected APP=PATH, got: " + s);
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (out.empty()) throw ConfigError("at least one --data APP=PATH is required");
  return out;
}

int cmd_generate_main(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  for (const auto& p : cmd_generate(cfg)) std::cout << p << '\n';
  return 0;
}

int cmd_split_main(const CommonOpts& o, const std::string& input,
                   double train_frac, std::uint64_t seed) {
  ExperimentConfig cfg = load_config(o);
  auto file = load_markup_corpus(input);
  Corpus corpus = parse_markup_corpus(file);
  auto split = split_corpus(corpus, train_frac, seed);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string train_path = cfg.out_dir + "/" + file.app + ".train.conll";
  const std::string test_path = cfg.out_dir + "/" + file.app + ".test.conll";
  save_column_corpus(train_path, split.train);
  save_column_corpus(test_path, split.test);
  std::cout << train_path << " (" << split.train.size() << " sentences)\n"
            << test_path << " (" << split.test.size() << " sentences)\n";
  return 0;
}

int cmd_train_main(const CommonOpts& o, const std::vector<std::string>& data,
                   const std::string& vocab_mode_name,
                   const std::string& model_path) {
  ExperimentConfig cfg = load_config(o);
  const VocabMode vm =
      vocab_mode_name == "open" ? VocabMode::kOpen : VocabMode::kClosed;
  if (vocab_mode_name != "open" && vocab_mode_name != "closed")
    throw ConfigError("--vocab must be open or closed");

  std::map<std::string, Corpus> corpora;
  for (const auto& [app, path] : parse_data_args(data))
    corpora[app] = load_column_corpus(path, app);

  std::map<std::string, std::vector<std::string>> task_labels;
  std::vector<const Corpus*> parts;
  for (const auto& [app, corpus] : corpora) {
    std::set<std::string> types;
    for (const auto& s : corpus)
      for (const auto& c : extract_chunks(s.tags)) types.insert(c.type);
    task_labels[app] = bio_label_set(types);
    parts.push_back(&corpus);
  }

  ModelConfig mc =
      corpora.size() == 1
          ? ModelConfig::single_task(corpora.begin()->first,
                                     task_labels.begin()->second, vm)
          : ModelConfig::multi_task(task_labels, vm);
  if (corpora.size() == 1) {
    if (vm == VocabMode::kClosed) mc.word_dim = cfg.single_word_dim;
    mc.cell_dim = cfg.single_cell;
    mc.proj_dim = cfg.single_proj;
  } else {
    if (vm == VocabMode::kClosed) mc.word_dim = cfg.multi_word_dim;
    mc.cell_dim = cfg.multi_cell;
    mc.proj_dim = cfg.multi_proj;
  }

  Vocab vocab = detail_exp::vocab_from(parts);
  CharVocab cv = detail_exp::char_vocab_from(parts);
  Model m = assemble_model(mc, vocab, cfg.init_seed,
                           vm == VocabMode::kOpen ? &cv : nullptr);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed;
  TrainLog log = corpora.size() == 1
                     ? train_single(m, corpora.begin()->second, tc)
                     : train_multitask(m, corpora, tc);

  std::filesystem::create_directories(
      std::filesystem::path(model_path).parent_path().string().empty()
          ? "."
          : std::filesystem::path(model_path).parent_path().string());
  save_model(model_path, m);
  vocab.save(model_path + ".vocab");
  log.save_csv(model_path + ".trainlog.csv");
  std::cout << "model: " << model_path << '\n'
            << "vocab: " << model_path << ".vocab\n"
            << "log:   " << model_path << ".trainlog.csv\n";
  return 0;
}

int cmd_eval_main(const std::string& model_path, const std::string& vocab_path,
                  const std::vector<std::string>& data,
                  const std::string& csv_path) {
  Vocab vocab = Vocab::load(vocab_path.empty() ? model_path + ".vocab"
                                               : vocab_path);
  Model m = load_model(model_path, vocab);
  for (const auto& [app, path] : parse_data_args(data)) {
    Corpus test = load_column_corpus(path, app);
    SubsetReports reports = evaluate_subsets(m, app, test, vocab);
    print_report(std::cout, app + " (full test set)", reports.full);
    if (reports.oov)
      print_report(std::cout, app + " (OOV-sentence subset)", *reports.oov);
    else
      std::cout << app << ": no OOV sentences in the test set\n";
    if (!csv_path.empty())
      save_report_csv(csv_path, reports.full,
                      reports.oov ? &*reports.oov : nullptr);
  }
  return 0;
}

int cmd_ablate_main(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/ablation.csv";
  save_result_csv(path, run_ablation(cfg));
  std::cout << path << '\n';
  return 0;
}

int cmd_oov_curve_main(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/oov_curve.csv";
  save_oov_curve_csv(path, run_oov_curve(cfg));
  std::cout << path << '\n';
  return 0;
}

int cmd_per_slot_main(const CommonOpts& o, std::size_t min_support) {
  ExperimentConfig cfg = load_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/per_slot.csv";
  save_per_slot_csv(path, run_per_slot(cfg, min_support));
  std::cout << path << '\n';
  return 0;
}

int cmd_report_main(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  std::filesystem::create_directories(cfg.out_dir);
  auto rows = run_open_vs_closed(cfg);
  const std::string path = cfg.out_dir + "/open_vs_closed.csv";
  save_result_csv(path, rows);

  // headline table: app x (closed/open, full/oov)
  std::map<std::string, std::map<std::string, double>> table;
  for (const auto& r : rows) table[r.target][r.vocab + "/" + r.scope] = r.f1;
  char buf[160];
  std::cout << "F1 by app (vocab/scope):\n";
  std::snprintf(buf, sizeof buf, "  %-12s %12s %12s %12s %12s", "app",
                "closed/full", "open/full", "closed/oov", "open/oov");
  std::cout << buf << '\n';
  for (const auto& [app, cells] : table) {
    auto get = [&](const char* k) {
      auto it = cells.find(k);
      return it == cells.end() ? -1.0 : it->second;
    };
    std::snprintf(buf, sizeof buf, "  %-12s %12.2f %12.2f %12.2f %12.2f",
                  app.c_str(), get("closed/full"), get("open/full"),
                  get("closed/oov"), get("open/oov"));
    std::cout << buf << '\n';
  }
  std::cout << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slot-filling toolkit: synthetic corpora, bi-LSTM taggers, "
               "and experiment harness"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* gen = app.add_subcommand("generate",
                                 "write one synthetic markup corpus per app");
  CommonOpts gen_o;
  add_common(gen, gen_o);

  auto* split = app.add_subcommand("split",
                                   "split a markup corpus into train/test "
                                   "column files");
  CommonOpts split_o;
  std::string split_input;
  double split_frac = 0.30;
  std::uint64_t split_seed = 1;
  add_common(split, split_o);
  split->add_option("--input", split_input, "markup corpus file")->required();
  split->add_option("--train-frac", split_frac, "training fraction");
  split->add_option("--seed", split_seed, "shuffle seed");

  auto* train = app.add_subcommand("train",
                                   "train a tagger (single-task with one "
                                   "--data, multi-task with several)");
  CommonOpts train_o;
  std::vector<std::string> train_data;
  std::string train_vocab_mode = "closed";
  std::string train_model = "model.ckpt";
  add_common(train, train_o);
  train->add_option("--data", train_data, "APP=column-corpus-path (repeatable)")
      ->required();
  train->add_option("--vocab", train_vocab_mode, "closed|open");
  train->add_option("--model", train_model, "output checkpoint path");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on test data");
  std::string eval_model, eval_vocab, eval_csv;
  std::vector<std::string> eval_data;
  eval->add_option("--model", eval_model, "checkpoint path")->required();
  eval->add_option("--vocab", eval_vocab,
                   "vocabulary file (default: MODEL.vocab)");
  eval->add_option("--data", eval_data, "APP=column-corpus-path (repeatable)")
      ->required();
  eval->add_option("--csv", eval_csv, "also write the report as CSV");

  auto* ablate = app.add_subcommand("ablate",
                                    "single-task vs multi-task learning curves");
  CommonOpts ablate_o;
  add_common(ablate, ablate_o);

  auto* oov = app.add_subcommand("oov-curve",
                                 "test-token OOV rate vs training size");
  CommonOpts oov_o;
  add_common(oov, oov_o);

  auto* per_slot = app.add_subcommand("per-slot",
                                      "per-slot F1 for closed vs open "
                                      "vocabulary systems");
  CommonOpts per_slot_o;
  std::size_t min_support = 100;
  add_common(per_slot, per_slot_o);
  per_slot->add_option("--min-support", min_support,
                       "minimum gold chunks per reported slot type");

  auto* report = app.add_subcommand("report",
                                    "closed vs open vocabulary comparison "
                                    "on full and OOV test subsets");
  CommonOpts report_o;
  add_common(report, report_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate_main(gen_o);
    if (split->parsed())
      return cmd_split_main(split_o, split_input, split_frac, split_seed);
    if (train->parsed())
      return cmd_train_main(train_o, train_data, train_vocab_mode, train_model);
    if (eval->parsed())
      return cmd_eval_main(eval_model, eval_vocab, eval_data, eval_csv);
    if (ablate->parsed()) return cmd_ablate_main(ablate_o);
    if (oov->parsed()) return cmd_oov_curve_main(oov_o);
    if (per_slot->parsed()) return cmd_per_slot_main(per_slot_o, min_support);
    if (report->parsed()) return cmd_report_main(report_o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
