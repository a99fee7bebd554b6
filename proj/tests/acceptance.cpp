// End-to-end acceptance checks for the toolkit. Each criterion prints one
// PASS/FAIL line with the measured quantity and its tolerance; the process
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "slotfill/experiments.hpp"
#include "slotfill/gradcheck.hpp"

using namespace slotfill;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail) {
  std::printf("[%s] criterion %2d: %-28s %s\n", ok ? "PASS" : "FAIL", number,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness: every layer against central finite differences,
//    max relative error < 1e-4 over 20 seeds per layer.

// Central finite differences against the analytic gradient. Tensors up to
// kExhaustive elements are checked coordinate by coordinate; larger ones
// (the character encoder holds ~2*10^5 scalars) are checked on a random
// sample of coordinates so the whole criterion stays inside its runtime
// budget.
double fd_check_params(const std::function<Tape::NodeId(Tape&)>& build,
                       ParamRegistry& reg, std::mt19937_64& sample_rng) {
  constexpr std::size_t kExhaustive = 64;
  constexpr std::size_t kSampled = 10;
  // eps 1e-4 keeps central-difference round-off noise (~1/eps) below the
  // 1e-4 relative budget on near-zero gradient coordinates; truncation
  // error (~eps^2) stays negligible at this scale.
  constexpr double kEps = 1e-4;
  Tape t;
  GradientMap grads = t.backward(build(t));
  double worst = 0.0;
  for (auto& [name, tensor] : reg.entries()) {
    if (!grads.count(tensor)) continue;
    const Tensor& analytic = grads.at(tensor);
    std::vector<std::size_t> coords;
    if (tensor->size() <= kExhaustive) {
      coords.resize(tensor->size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t k = 0; k < kSampled; ++k)
        coords.push_back(sample_rng() % tensor->size());
    }
    for (std::size_t i : coords) {
      const double saved = (*tensor)[i];
      (*tensor)[i] = saved + kEps;
      Tape hi_t;
      const double hi = hi_t.value(build(hi_t))[0];
      (*tensor)[i] = saved - kEps;
      Tape lo_t;
      const double lo = lo_t.value(build(lo_t))[0];
      (*tensor)[i] = saved;
      const double fd = (hi - lo) / (2.0 * kEps);
      worst = std::max(worst, relative_error(analytic[i], fd));
    }
  }
  return worst;
}

bool criterion_gradients(std::string& detail) {
  double worst = 0.0;
  std::string worst_layer;
  auto track = [&](const char* layer, double err) {
    if (err > worst) {
      worst = err;
      worst_layer = layer;
    }
  };

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::mt19937_64 sample_rng(seed ^ 0x5a5a5a5aull);

    {  // affine layer: sum(W x + b)
      Tensor W = Tensor::uniform({3, 4}, 0.8, rng);
      Tensor x = Tensor::uniform({4}, 0.8, rng);
      Tensor b = Tensor::uniform({3}, 0.8, rng);
      ParamRegistry reg;
      reg.add("W", &W);
      reg.add("x", &x);
      reg.add("b", &b);
      track("affine", fd_check_params(
                          [&](Tape& t) {
                            return t.sum(t.add(
                                t.matvec(t.param(&W), t.param(&x)), t.param(&b)));
                          },
                          reg, sample_rng));
    }
    {  // activations: sum(sigmoid(x)) and sum(tanh(x))
      Tensor x = Tensor::uniform({5}, 2.0, rng);
      ParamRegistry reg;
      reg.add("x", &x);
      track("sigmoid", fd_check_params(
                           [&](Tape& t) { return t.sum(t.sigmoid(t.param(&x))); },
                           reg, sample_rng));
      track("tanh", fd_check_params(
                        [&](Tape& t) { return t.sum(t.tanh(t.param(&x))); },
                        reg, sample_rng));
    }
    {  // softmax cross-entropy on 5-way logits
      Tensor logits = Tensor::uniform({5}, 2.0, rng);
      const std::size_t target = seed % 5;
      ParamRegistry reg;
      reg.add("logits", &logits);
      track("softmax_xent",
            fd_check_params(
                [&](Tape& t) { return t.softmax_xent(t.param(&logits), target); },
                reg, sample_rng));
    }
    {  // LSTMP cell unrolled 4 steps
      LstmpParams p = LstmpParams::create(2, 3, 2, rng, 0.5);
      std::vector<Tensor> inputs;
      for (int s = 0; s < 4; ++s) inputs.push_back(Tensor::uniform({2}, 0.5, rng));
      ParamRegistry reg;
      p.register_params(reg, "p");
      track("lstmp_4step",
            fd_check_params(
                [&](Tape& t) {
                  auto nodes = LstmpNodes::bind(t, p);
                  LstmpState state = lstmp_zero_state(t, p);
                  Tape::NodeId total = 0;
                  for (int s = 0; s < 4; ++s) {
                    state = lstmp_step(t, nodes, t.input(inputs[s]), state);
                    total = s == 0 ? t.sum(state.m) : t.add(total, t.sum(state.m));
                  }
                  return total;
                },
                reg, sample_rng));
    }
    {  // character word encoder on a 3-character word
      CharVocab cv = CharVocab::from_words({"abc"});
      CharEncoderParams p = CharEncoderParams::create(cv, rng, 0.5);
      ParamRegistry reg;
      p.register_params(reg, "c");
      track("char_encoder",
            fd_check_params(
                [&](Tape& t) {
                  auto nodes = CharEncoderNodes::bind(t, p);
                  return t.sum(char_word_encode(t, nodes, "abc"));
                },
                reg, sample_rng));
    }
    {  // full tagger loss on a 3-token sentence at toy dimensions
      Corpus corpus;
      corpus.push_back(to_bio(parse_markup("go to <X> omaha </X>"), "t"));
      Vocab v = Vocab::build({"go", "go", "to", "to", "omaha", "omaha"});
      ModelConfig cfg = ModelConfig::single_task("t", bio_label_set({"X"}));
      cfg.word_dim = 4;
      cfg.cell_dim = 3;
      cfg.proj_dim = 2;
      Model m = assemble_model(cfg, v, seed, nullptr, 0.5);
      ParamRegistry reg = m.registry();
      track("tagger_loss",
            fd_check_params(
                [&](Tape& t) {
                  return detail_train::sentence_loss(t, m, corpus[0], {});
                },
                reg, sample_rng));
    }
  }

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max relative error %.3g (worst layer: %s, tolerance 1e-4, "
                "20 seeds)",
                worst, worst_layer.c_str());
  detail = buf;
  return worst < 1e-4;
}

// ---------------------------------------------------------------------------
// 2. Scorer oracle: conll_f1 counts equal an independent brute-force chunk
//    matcher on 100 random corpora.

std::vector<Chunk> brute_chunks(const std::vector<std::string>& tags,
                                std::size_t sentence) {
  std::vector<Chunk> out;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i].rfind("B-", 0) == 0) {
      Chunk c{tags[i].substr(2), sentence, i, i};
      std::size_t j = i + 1;
      while (j < tags.size() && tags[j] == "I-" + c.type) {
        c.end = j;
        ++j;
      }
      out.push_back(c);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<std::string> random_bio(std::mt19937_64& rng, std::size_t len,
                                    const std::vector<std::string>& types) {
  std::vector<std::string> tags(len, "O");
  std::size_t i = 0;
  while (i < len) {
    if (rng() % 3 == 0) {
      const std::string& ty = types[rng() % types.size()];
      tags[i] = "B-" + ty;
      std::size_t span = 1 + rng() % 3;
      for (std::size_t j = 1; j < span && i + j < len; ++j)
        tags[i + j] = "I-" + ty;
      i += span;
    } else {
      ++i;
    }
  }
  return tags;
}

bool criterion_scorer(std::string& detail) {
  std::mt19937_64 rng(101);
  std::size_t mismatches = 0;
  for (int corpus_i = 0; corpus_i < 100; ++corpus_i) {
    std::vector<std::vector<std::string>> gold, pred;
    const std::size_t sentences = 1 + rng() % 10;
    for (std::size_t s = 0; s < sentences; ++s) {
      const std::size_t len = 1 + rng() % 8;
      gold.push_back(random_bio(rng, len, {"A", "B", "C"}));
      pred.push_back(random_bio(rng, len, {"A", "B", "C"}));
    }
    std::vector<Chunk> g, p;
    for (std::size_t s = 0; s < gold.size(); ++s) {
      for (auto& c : brute_chunks(gold[s], s)) g.push_back(c);
      for (auto& c : brute_chunks(pred[s], s)) p.push_back(c);
    }
    std::size_t correct = 0;
    std::vector<bool> used(g.size(), false);
    for (const auto& pc : p)
      for (std::size_t k = 0; k < g.size(); ++k)
        if (!used[k] && g[k] == pc) {
          used[k] = true;
          ++correct;
          break;
        }
    auto rep = conll_f1(gold, pred);
    if (rep.gold_chunks != g.size() || rep.pred_chunks != p.size() ||
        rep.correct_chunks != correct)
      ++mismatches;
  }
  detail = std::to_string(mismatches) + " mismatches on 100 random corpora "
           "(exact agreement required)";
  return mismatches == 0;
}

// ---------------------------------------------------------------------------
// 3. BIO repair on 10^4 random raw tag sequences.

bool criterion_bio_repair(std::string& detail) {
  const std::vector<std::string> pool = {"O",      "B-Loc",  "I-Loc",
                                         "B-Date", "I-Date", "I-Name"};
  std::mt19937_64 rng(77);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<std::string> tags(1 + rng() % 12);
    for (auto& tg : tags) tg = pool[rng() % pool.size()];
    const auto fixed = bio_repair(tags);
    if (!is_valid_bio(fixed)) ++violations;
    if (bio_repair(fixed) != fixed) ++violations;
    if (is_valid_bio(tags) && fixed != tags) ++violations;
  }
  detail = std::to_string(violations) +
           " violations over 10^4 sequences (validity, idempotence, "
           "pass-through)";
  return violations == 0;
}

// ---------------------------------------------------------------------------
// 4. Parameter sharing: default multi-task config, 4 tasks, vocab 2000.

bool criterion_sharing(std::string& detail) {
  std::vector<std::string> words;
  for (int i = 0; i < 1999; ++i) {
    words.push_back("w" + std::to_string(i));
    words.push_back("w" + std::to_string(i));
  }
  Vocab v = Vocab::build(words);
  std::map<std::string, std::vector<std::string>> tasks;
  for (const auto& app : default_suite())
    tasks[app.name] = bio_label_set(app.slot_types());
  Model m = assemble_model(ModelConfig::multi_task(tasks), v, 3);
  auto counts = count_parameters(m);

  // independent shape sum at the published dimensions (200/250/170)
  const std::size_t in = 200, cell = 250, proj = 170;
  const std::size_t per_dir =
      4 * cell * in + 4 * cell * proj + 3 * cell + 4 * cell + proj * cell;
  const std::size_t expect_shared = v.size() * in + 2 * per_dir;
  bool ok = counts.shared == expect_shared;
  std::size_t worst_head = 0;
  for (const auto& [task, labels] : tasks) {
    const std::size_t head = labels.size() * 2 * proj + labels.size();
    ok = ok && counts.per_task.at(task) == head;
    worst_head = std::max(worst_head, head);
  }
  const double expect_fraction =
      double(expect_shared) / double(expect_shared + worst_head);
  ok = ok && std::abs(counts.shared_fraction - expect_fraction) < 1e-12;
  ok = ok && counts.shared_fraction >= 0.99;

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "shared fraction %.4f (>= 0.99 required; shape-sum %s)",
                counts.shared_fraction,
                counts.shared == expect_shared ? "agrees" : "DISAGREES");
  detail = buf;
  return ok;
}

// ---------------------------------------------------------------------------
// 5. Overfit sanity: 50 synthetic sentences, default hyperparameters,
//    training-set F1 >= 95 within 30 epochs.

AppSpec overfit_app() {
  AppSpec app;
  app.name = "easy";
  app.heldout_fraction = 0.0;
  app.max_slots_per_sentence = 1;
  app.slots = {
      SlotSpec{"Loc", {"Bayside", "Oakview", "Riverton"}, {}},
      SlotSpec{"Date", {"monday", "friday"}, {}},
  };
  app.templates = {
      "book a trip to {Loc}",
      "leave on {Date}",
      "show flights to {Loc}",
  };
  return app;
}

bool criterion_overfit(std::string& detail) {
  AppSpec app = overfit_app();
  auto lines = generate_synthetic(app, 50, 8);
  Corpus corpus;
  for (const auto& l : lines) corpus.push_back(to_bio(parse_markup(l), "easy"));
  Vocab v = Vocab::build(normalized_tokens(corpus));
  Model m = assemble_model(
      ModelConfig::single_task("easy", bio_label_set(app.slot_types())), v, 4);
  TrainConfig tc;  // defaults: batch 25, lr 0.3, decay 0.98/100, dropout 0.6
  tc.epochs = 30;
  tc.seed = 4;
  double best = 0.0;
  std::size_t best_epoch = 0;
  train_single(m, corpus, tc, [&](Model& mm, std::size_t epoch) {
    std::vector<std::vector<std::string>> gold, pred;
    for (const auto& s : corpus) {
      gold.push_back(s.tags);
      pred.push_back(tag_sentence(mm, "easy", s.tokens));
    }
    const double f1 = conll_f1(gold, pred).f1;
    if (f1 > best) {
      best = f1;
      best_epoch = epoch;
    }
    return best < 95.0;
  });
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "training-set F1 %.2f at epoch %zu (>= 95 within 30 epochs, "
                "default hyperparameters)",
                best, best_epoch + 1);
  detail = buf;
  return best >= 95.0;
}

// ---------------------------------------------------------------------------
// 6. Multi-task benefit on the desk-scale suite, median over 3 seeds.

bool criterion_multitask(std::string& detail) {
  ExperimentConfig cfg;  // desk scale
  auto data = build_suite_data(cfg);
  std::vector<std::string> targets;
  for (const auto& [task, td] : data)
    if (task != cfg.anchor) targets.push_back(task);

  // per target: F1 vectors over seeds, at size 200 and at full size
  std::map<std::string, std::vector<double>> single200, singlefull, multi200,
      multifull;
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    // one full-data multi-task model serves all targets
    std::map<std::string, Corpus> full_corpora;
    for (const auto& [task, td] : data) full_corpora[task] = td.split.train;
    auto full_multi = detail_exp::run_multi_cell(cfg, data, full_corpora,
                                                 VocabMode::kClosed, rep,
                                                 targets);
    for (const auto& target : targets) {
      const TaskData& td = data.at(target);
      const Corpus subset = train_subset(td, 200);

      single200[target].push_back(
          detail_exp::run_single_cell(cfg, td, subset, rep).full.f1);
      singlefull[target].push_back(
          detail_exp::run_single_cell(cfg, td, td.split.train, rep).full.f1);

      std::map<std::string, Corpus> corpora = full_corpora;
      corpora[target] = subset;
      multi200[target].push_back(
          detail_exp::run_multi_cell(cfg, data, corpora, VocabMode::kClosed,
                                     rep, {target})
              .at(target)
              .full.f1);
      multifull[target].push_back(full_multi.at(target).full.f1);
    }
  }

  bool ok = true;
  std::ostringstream os;
  for (const auto& target : targets) {
    const double s200 = median3(single200[target]);
    const double m200 = median3(multi200[target]);
    const double sfull = median3(singlefull[target]);
    const double mfull = median3(multifull[target]);
    const double gap200 = m200 - s200;
    const double gapfull = mfull - sfull;
    const bool target_ok = m200 >= s200 && gap200 > gapfull;
    ok = ok && target_ok;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%s@200 single %.1f multi %.1f gap %.1f (full gap %.1f)%s",
                  target.c_str(), s200, m200, gap200, gapfull,
                  target_ok ? "" : " <-- VIOLATION");
    os << (target == targets.front() ? "" : "; ") << buf;
  }
  detail = os.str() + " [median of 3 seeds]";
  return ok;
}

// ---------------------------------------------------------------------------
// 7. Open-vocabulary benefit on the OOV subset, median over 3 seeds,
//    open >= closed on at least 2 of 4 apps.

bool criterion_open_vocab(std::string& detail) {
  ExperimentConfig cfg;  // desk scale
  auto data = build_suite_data(cfg);
  std::map<std::string, Corpus> corpora;
  std::vector<std::string> apps;
  for (const auto& [task, td] : data) {
    corpora[task] = td.split.train;
    apps.push_back(task);
  }
  std::map<std::string, std::vector<double>> closed_oov, open_oov;
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    for (VocabMode vm : {VocabMode::kClosed, VocabMode::kOpen}) {
      auto reports =
          detail_exp::run_multi_cell(cfg, data, corpora, vm, rep, apps);
      for (const auto& app : apps) {
        const auto& r = reports.at(app);
        const double f1 = r.oov ? r.oov->f1 : r.full.f1;
        (vm == VocabMode::kClosed ? closed_oov : open_oov)[app].push_back(f1);
      }
    }
  }
  std::size_t wins = 0;
  std::ostringstream os;
  for (const auto& app : apps) {
    const double c = median3(closed_oov[app]);
    const double o = median3(open_oov[app]);
    if (o >= c) ++wins;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s closed %.1f open %.1f", app.c_str(), c, o);
    os << (app == apps.front() ? "" : "; ") << buf;
  }
  detail = os.str() + " [OOV-subset F1, median of 3 seeds; open >= closed on " +
           std::to_string(wins) + "/4 apps, >= 2 required]";
  return wins >= 2;
}

// ---------------------------------------------------------------------------
// 8. OOV curve monotone nonincreasing over {100, 200, 400, 800, full}.

bool criterion_oov_curve(std::string& detail) {
  ExperimentConfig cfg;  // oov_grid is {100, 200, 400, 800, 0}
  auto rows = run_oov_curve(cfg);
  std::size_t violations = 0;
  std::map<std::string, double> prev;
  for (const auto& r : rows) {
    if (prev.count(r.app) && r.oov_rate > prev[r.app] + 1e-12) ++violations;
    prev[r.app] = r.oov_rate;
  }
  detail = std::to_string(violations) +
           " monotonicity violations over grid {100,200,400,800,full} x 4 apps";
  return violations == 0;
}

// ---------------------------------------------------------------------------
// 9. Determinism: reruns with identical seeds produce byte-identical
//    TrainLog and result CSVs.

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool criterion_determinism(std::string& detail) {
  ExperimentConfig cfg;
  cfg.sizes = {{"united", 200}, {"airbnb", 150}, {"greyhound", 150},
               {"opentable", 150}};
  cfg.ablation_sizes = {10, 0};
  cfg.oov_grid = {10, 0};
  cfg.train.epochs = 1;
  cfg.single_word_dim = 10;
  cfg.single_cell = 8;
  cfg.single_proj = 6;
  cfg.multi_word_dim = 12;
  cfg.multi_cell = 8;
  cfg.multi_proj = 6;

  const std::string dir = "acceptance_tmp";
  std::filesystem::create_directories(dir);
  bool ok = true;

  // experiment cell reruns: result CSV bytes
  save_result_csv(dir + "/ablation_a.csv", run_ablation(cfg));
  save_result_csv(dir + "/ablation_b.csv", run_ablation(cfg));
  ok = ok && slurp(dir + "/ablation_a.csv") == slurp(dir + "/ablation_b.csv");

  save_oov_curve_csv(dir + "/oov_a.csv", run_oov_curve(cfg));
  save_oov_curve_csv(dir + "/oov_b.csv", run_oov_curve(cfg));
  ok = ok && slurp(dir + "/oov_a.csv") == slurp(dir + "/oov_b.csv");

  // training log reruns: TrainLog CSV bytes
  auto data = build_suite_data(cfg);
  auto run_log = [&](const std::string& path) {
    const TaskData& td = data.at("airbnb");
    ModelConfig mc = ModelConfig::single_task(
        "airbnb", bio_label_set(td.spec->slot_types()));
    mc.word_dim = 10;
    mc.cell_dim = 8;
    mc.proj_dim = 6;
    Vocab v = Vocab::build(normalized_tokens(td.split.train));
    Model m = assemble_model(mc, v, cfg.init_seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed;
    TrainLog log = train_single(m, td.split.train, tc);
    log.save_csv(path);
  };
  run_log(dir + "/log_a.csv");
  run_log(dir + "/log_b.csv");
  ok = ok && slurp(dir + "/log_a.csv") == slurp(dir + "/log_b.csv");

  std::filesystem::remove_all(dir);
  detail = ok ? "ablation, OOV-curve, and train-log reruns byte-identical"
              : "rerun output differs";
  return ok;
}

// ---------------------------------------------------------------------------
// 10. lr schedule spot values, exact to 1e-12.

bool criterion_lr(std::string& detail) {
  TrainConfig cfg;
  const double e0 = std::abs(lr_schedule(cfg, 0) - 0.3);
  const double e100 = std::abs(lr_schedule(cfg, 100) - 0.294);
  const double e999 = std::abs(lr_schedule(cfg, 999) - 0.3 * std::pow(0.98, 9));
  const double worst = std::max({e0, e100, e999});
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "max deviation %.3g at steps {0, 100, 999} (tolerance 1e-12)",
                worst);
  detail = buf;
  return worst < 1e-12;
}

void run(int number, const std::string& name,
         bool (*fn)(std::string&)) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  char timing[32];
  std::snprintf(timing, sizeof timing, " [%.1fs]", secs);
  report(number, name, ok, detail + timing);
}

}  // namespace

int main() {
  run(1, "gradient correctness", criterion_gradients);
  run(2, "scorer oracle", criterion_scorer);
  run(3, "BIO repair", criterion_bio_repair);
  run(4, "parameter sharing", criterion_sharing);
  run(5, "overfit sanity", criterion_overfit);
  run(6, "multi-task benefit", criterion_multitask);
  run(7, "open-vocabulary benefit", criterion_open_vocab);
  run(8, "OOV curve", criterion_oov_curve);
  run(9, "determinism", criterion_determinism);
  run(10, "lr schedule", criterion_lr);
  if (g_failures == 0)
    std::printf("acceptance: all 10 criteria passed\n");
  else
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
