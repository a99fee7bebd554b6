#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "slotfill/eval.hpp"
#include "slotfill/synth.hpp"
#include "slotfill/train.hpp"

namespace slotfill {

struct ExperimentConfig {
  std::vector<AppSpec> suite = default_suite();
  std::string anchor = "united";
  std::map<std::string, std::size_t> sizes;       // generated sentences per app
  std::vector<std::size_t> ablation_sizes;        // 0 means "full"
  std::vector<std::size_t> oov_grid;              // training sizes for the curve
  std::uint64_t data_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t train_seed = 3;
  std::size_t num_seeds = 1;                      // replicas train_seed+0..k-1
  double train_frac = 0.30;
  std::string out_dir = "out";
  TrainConfig train;

  // Experiment model dimensions. Desk-scale defaults keep the whole
  // ablation in the minutes range; paper_scale() restores the published
  // dimensions and corpus sizes.
  std::size_t single_word_dim = 60, single_cell = 100, single_proj = 70;
  std::size_t multi_word_dim = 100, multi_cell = 100, multi_proj = 70;

  ExperimentConfig() {
    sizes = {{"united", 2000}, {"airbnb", 1600}, {"greyhound", 1600},
             {"opentable", 1600}};
    ablation_sizes = {200, 400, 0};
    oov_grid = {100, 200, 400, 800, 0};
    train.epochs = 6;
    // lr 0.3 without clipping diverges on some synthetic draws; experiment
    // cells clip by default (train --config can still disable it).
    train.grad_clip = 5.0;
  }

  void paper_scale() {
    sizes = {{"united", 20697}, {"airbnb", 4666}, {"greyhound", 4951},
             {"opentable", 3151}};
    ablation_sizes = {200, 400, 800, 0};
    multi_word_dim = 200;
    multi_cell = 250;
    multi_proj = 170;
    train.epochs = 10;
  }

  void validate() const {
    bool anchor_found = false;
    for (const auto& app : suite) anchor_found |= app.name == anchor;
    if (!anchor_found) throw ConfigError("experiments: unknown anchor " + anchor);
    std::size_t prev = 0;
    for (std::size_t s : ablation_sizes) {
      if (s == 0) continue;  // full
      if (s < prev)
        throw ConfigError("experiments: ablation sizes must be nondecreasing");
      prev = s;
    }
    if (num_seeds == 0) throw ConfigError("experiments: num_seeds must be >= 1");
  }

  void apply_json(const nlohmann::json& j) {
    if (j.contains("paper_scale") && j["paper_scale"].get<bool>()) paper_scale();
    if (j.contains("sizes"))
      for (auto& [app, n] : j["sizes"].items()) sizes[app] = n.get<std::size_t>();
    if (j.contains("anchor")) anchor = j["anchor"];
    if (j.contains("ablation_sizes"))
      ablation_sizes = j["ablation_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("oov_grid"))
      oov_grid = j["oov_grid"].get<std::vector<std::size_t>>();
    if (j.contains("data_seed")) data_seed = j["data_seed"];
    if (j.contains("init_seed")) init_seed = j["init_seed"];
    if (j.contains("train_seed")) train_seed = j["train_seed"];
    if (j.contains("num_seeds")) num_seeds = j["num_seeds"];
    if (j.contains("train_frac")) train_frac = j["train_frac"];
    if (j.contains("out_dir")) out_dir = j["out_dir"];
    if (j.contains("epochs")) train.epochs = j["epochs"];
    if (j.contains("batch_size")) train.batch_size = j["batch_size"];
    if (j.contains("dropout_p")) train.dropout_p = j["dropout_p"];
    if (j.contains("lr0")) train.lr0 = j["lr0"];
    if (j.contains("grad_clip")) train.grad_clip = j["grad_clip"];
    if (j.contains("heldout_fraction"))
      for (auto& app : suite) app.heldout_fraction = j["heldout_fraction"];
    if (j.contains("multi_dims")) {
      multi_word_dim = j["multi_dims"].at(0);
      multi_cell = j["multi_dims"].at(1);
      multi_proj = j["multi_dims"].at(2);
    }
    if (j.contains("single_dims")) {
      single_word_dim = j["single_dims"].at(0);
      single_cell = j["single_dims"].at(1);
      single_proj = j["single_dims"].at(2);
    }
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("experiments: cannot open config: " + path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("experiments: bad config JSON: " + std::string(e.what()));
    }
    ExperimentConfig cfg;
    cfg.apply_json(j);
    return cfg;
  }
};

struct ResultRow {
  std::string experiment;
  std::string target;
  std::size_t train_size = 0;
  std::string mode;   // single|multi
  std::string vocab;  // closed|open
  std::string scope;  // full|oov
  double f1 = 0.0;
  std::uint64_t seed = 0;
};

inline void save_result_csv(const std::string& path,
                            const std::vector<ResultRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("results: cannot open for writing: " + path);
  os << "experiment,target,train_size,mode,vocab,scope,f1,seed\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g", r.f1);
    os << r.experiment << ',' << r.target << ',' << r.train_size << ','
       << r.mode << ',' << r.vocab << ',' << r.scope << ',' << buf << ','
       << r.seed << '\n';
  }
}

struct TaskData {
  const AppSpec* spec = nullptr;
  CorpusSplit split;
};

// Generates and splits every app's corpus in memory, deterministically
// from the data seed. Test sets are fixed for all experiment cells.
inline std::map<std::string, TaskData> build_suite_data(
    const ExperimentConfig& cfg) {
  cfg.validate();
  std::map<std::string, TaskData> out;
  std::uint64_t app_index = 0;
  for (const auto& app : cfg.suite) {
    auto it = cfg.sizes.find(app.name);
    if (it == cfg.sizes.end())
      throw ConfigError("experiments: no size configured for app " + app.name);
    const auto lines =
        generate_synthetic(app, it->second, cfg.data_seed * 1000 + app_index);
    Corpus corpus;
    corpus.reserve(lines.size());
    for (const auto& l : lines) corpus.push_back(to_bio(parse_markup(l), app.name));
    TaskData td;
    td.spec = &app;
    td.split = split_corpus(corpus, cfg.train_frac, cfg.data_seed + app_index);
    out.emplace(app.name, std::move(td));
    ++app_index;
  }
  return out;
}

inline Corpus train_subset(const TaskData& td, std::size_t size) {
  if (size == 0 || size >= td.split.train.size()) return td.split.train;
  return Corpus(td.split.train.begin(),
                td.split.train.begin() + static_cast<std::ptrdiff_t>(size));
}

namespace detail_exp {

inline Vocab vocab_from(const std::vector<const Corpus*>& parts) {
  std::vector<std::string> tokens;
  for (const Corpus* c : parts)
    for (const auto& t : normalized_tokens(*c)) tokens.push_back(t);
  return Vocab::build(tokens);
}

inline CharVocab char_vocab_from(const std::vector<const Corpus*>& parts) {
  std::vector<std::string> words;
  for (const Corpus* c : parts)
    for (const auto& t : raw_tokens(*c)) words.push_back(t);
  return CharVocab::from_words(words);
}

// Trains a single-task model on `train` and returns test-set reports.
inline SubsetReports run_single_cell(const ExperimentConfig& cfg,
                                     const TaskData& td, const Corpus& train,
                                     std::uint64_t seed_offset) {
  ModelConfig mc = ModelConfig::single_task(
      td.spec->name, bio_label_set(td.spec->slot_types()));
  mc.word_dim = cfg.single_word_dim;
  mc.cell_dim = cfg.single_cell;
  mc.proj_dim = cfg.single_proj;
  Vocab vocab = vocab_from({&train});
  Model m = assemble_model(mc, vocab, cfg.init_seed + seed_offset);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed + seed_offset;
  train_single(m, train, tc);
  return evaluate_subsets(m, td.spec->name, td.split.test, vocab);
}

// Trains a multi-task model over the given per-task corpora and returns
// test-set reports for the requested target.
inline std::map<std::string, SubsetReports> run_multi_cell(
    const ExperimentConfig& cfg, const std::map<std::string, TaskData>& data,
    const std::map<std::string, Corpus>& train_corpora, VocabMode vocab_mode,
    std::uint64_t seed_offset, const std::vector<std::string>& targets) {
  std::map<std::string, std::vector<std::string>> task_labels;
  std::vector<const Corpus*> parts;
  for (const auto& [task, corpus] : train_corpora) {
    task_labels[task] = bio_label_set(data.at(task).spec->slot_types());
    parts.push_back(&corpus);
  }
  ModelConfig mc = ModelConfig::multi_task(task_labels, vocab_mode);
  mc.word_dim = vocab_mode == VocabMode::kOpen ? 160 : cfg.multi_word_dim;
  mc.cell_dim = cfg.multi_cell;
  mc.proj_dim = cfg.multi_proj;
  Vocab vocab = vocab_from(parts);
  CharVocab cv = char_vocab_from(parts);
  Model m = assemble_model(mc, vocab, cfg.init_seed + seed_offset,
                           vocab_mode == VocabMode::kOpen ? &cv : nullptr);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed + seed_offset;
  train_multitask(m, train_corpora, tc);
  std::map<std::string, SubsetReports> out;
  for (const auto& t : targets)
    out.emplace(t, evaluate_subsets(m, t, data.at(t).split.test, vocab));
  return out;
}

}  // namespace detail_exp

// Writes one markup corpus file per app into out_dir.
inline std::vector<std::string> cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> paths;
  std::uint64_t app_index = 0;
  for (const auto& app : cfg.suite) {
    const auto lines = generate_synthetic(app, cfg.sizes.at(app.name),
                                          cfg.data_seed * 1000 + app_index);
    const std::string path = cfg.out_dir + "/" + app.name + ".corpus";
    save_markup_corpus(path, app.name, lines);
    paths.push_back(path);
    ++app_index;
  }
  return paths;
}

// Single-task vs multi-task learning curve over the target apps. The
// anchor always trains with full data; the target's training subset is a
// nested prefix of its shuffled training split.
inline std::vector<ResultRow> run_ablation(const ExperimentConfig& cfg) {
  auto data = build_suite_data(cfg);
  std::vector<ResultRow> rows;
  for (std::uint64_t rep = 0; rep < cfg.num_seeds; ++rep) {
    for (const auto& [target, td] : data) {
      if (target == cfg.anchor) continue;
      for (std::size_t size : cfg.ablation_sizes) {
        const Corpus subset = train_subset(td, size);
        const std::size_t actual = subset.size();

        const auto single =
            detail_exp::run_single_cell(cfg, td, subset, rep);
        rows.push_back({"ablation", target, actual, "single", "closed", "full",
                        single.full.f1, cfg.train_seed + rep});

        std::map<std::string, Corpus> corpora;
        for (const auto& [task, other] : data)
          corpora[task] = task == target ? subset : other.split.train;
        auto multi = detail_exp::run_multi_cell(cfg, data, corpora,
                                               VocabMode::kClosed, rep, {target});
        rows.push_back({"ablation", target, actual, "multi", "closed", "full",
                        multi.at(target).full.f1, cfg.train_seed + rep});
      }
    }
  }
  return rows;
}

// Closed vs open vocabulary multi-task systems on identical data; reports
// full-set and OOV-subset F1 per app.
inline std::vector<ResultRow> run_open_vs_closed(const ExperimentConfig& cfg) {
  auto data = build_suite_data(cfg);
  std::map<std::string, Corpus> corpora;
  std::vector<std::string> apps;
  for (const auto& [task, td] : data) {
    corpora[task] = td.split.train;
    apps.push_back(task);
  }
  std::vector<ResultRow> rows;
  for (std::uint64_t rep = 0; rep < cfg.num_seeds; ++rep) {
    for (VocabMode vm : {VocabMode::kClosed, VocabMode::kOpen}) {
      const std::string vocab_name = vm == VocabMode::kClosed ? "closed" : "open";
      auto reports =
          detail_exp::run_multi_cell(cfg, data, corpora, vm, rep, apps);
      for (const auto& app : apps) {
        const auto& rep_pair = reports.at(app);
        const std::size_t n = data.at(app).split.train.size();
        rows.push_back({"open_vs_closed", app, n, "multi", vocab_name, "full",
                        rep_pair.full.f1, cfg.train_seed + rep});
        if (rep_pair.oov)
          rows.push_back({"open_vs_closed", app, n, "multi", vocab_name, "oov",
                          rep_pair.oov->f1, cfg.train_seed + rep});
      }
    }
  }
  return rows;
}

struct OovCurveRow {
  std::string app;
  std::size_t train_size = 0;
  double oov_rate = 0.0;
};

inline void save_oov_curve_csv(const std::string& path,
                               const std::vector<OovCurveRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("oov-curve: cannot open for writing: " + path);
  os << "app,train_size,oov_rate\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g", r.oov_rate);
    os << r.app << ',' << r.train_size << ',' << buf << '\n';
  }
}

// Test-token OOV rate against vocabularies built from nested training
// prefixes.
inline std::vector<OovCurveRow> run_oov_curve(const ExperimentConfig& cfg) {
  auto data = build_suite_data(cfg);
  std::vector<OovCurveRow> rows;
  for (const auto& [app, td] : data) {
    for (std::size_t size : cfg.oov_grid) {
      const Corpus subset = train_subset(td, size);
      const Vocab vocab = detail_exp::vocab_from({&subset});
      rows.push_back(
          {app, subset.size(), oov_stats(vocab, td.split.test).token_rate});
    }
  }
  return rows;
}

struct PerSlotRow {
  std::string app;
  std::string slot_type;
  double closed_f1 = 0.0;
  double open_f1 = 0.0;
  std::size_t support = 0;
};

inline void save_per_slot_csv(const std::string& path,
                              const std::vector<PerSlotRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("per-slot: cannot open for writing: " + path);
  os << "app,slot_type,closed_f1,open_f1,support\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g", r.closed_f1, r.open_f1);
    os << r.app << ',' << r.slot_type << ',' << buf << ',' << r.support << '\n';
  }
}

// Per-slot F1 for the closed and open multi-task systems, filtered to
// slots with at least min_support gold chunks in the test set.
inline std::vector<PerSlotRow> run_per_slot(const ExperimentConfig& cfg,
                                            std::size_t min_support = 100) {
  auto data = build_suite_data(cfg);
  std::map<std::string, Corpus> corpora;
  std::vector<std::string> apps;
  for (const auto& [task, td] : data) {
    corpora[task] = td.split.train;
    apps.push_back(task);
  }

  std::map<std::string, std::vector<std::string>> task_labels;
  std::vector<const Corpus*> parts;
  for (const auto& [task, corpus] : corpora) {
    task_labels[task] = bio_label_set(data.at(task).spec->slot_types());
    parts.push_back(&corpus);
  }
  Vocab vocab = detail_exp::vocab_from(parts);
  CharVocab cv = detail_exp::char_vocab_from(parts);

  auto train_one = [&](VocabMode vm) {
    ModelConfig mc = ModelConfig::multi_task(task_labels, vm);
    mc.word_dim = vm == VocabMode::kOpen ? 160 : cfg.multi_word_dim;
    mc.cell_dim = cfg.multi_cell;
    mc.proj_dim = cfg.multi_proj;
    Model m = assemble_model(mc, vocab, cfg.init_seed,
                             vm == VocabMode::kOpen ? &cv : nullptr);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed;
    train_multitask(m, corpora, tc);
    return m;
  };
  Model closed = train_one(VocabMode::kClosed);
  Model open = train_one(VocabMode::kOpen);

  std::vector<PerSlotRow> rows;
  for (const auto& app : apps) {
    const Corpus& test = data.at(app).split.test;
    std::vector<std::vector<std::string>> gold, pred_closed, pred_open;
    for (const auto& s : test) {
      gold.push_back(s.tags);
      pred_closed.push_back(tag_sentence(closed, app, s.tokens));
      pred_open.push_back(tag_sentence(open, app, s.tokens));
    }
    auto closed_scores = per_slot_f1(gold, pred_closed, min_support);
    auto open_scores = per_slot_f1(gold, pred_open, 0);
    for (const auto& [type, cs] : closed_scores) {
      PerSlotRow r{app, type, cs.f1, 0.0, cs.support};
      auto it = open_scores.find(type);
      if (it != open_scores.end()) r.open_f1 = it->second.f1;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace slotfill
