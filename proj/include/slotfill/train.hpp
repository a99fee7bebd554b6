#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slotfill/model.hpp"

namespace slotfill {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t batch_size = 25;
  double lr0 = 0.3;
  double decay = 0.98;
  std::size_t decay_every = 100;  // minibatches
  double dropout_p = 0.6;
  double init_range = 0.1;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  void validate() const {
    if (decay <= 0.0 || decay > 1.0)
      throw ConfigError("train: decay must be in (0,1]");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw ConfigError("train: dropout_p must be in [0,1)");
  }
};

// lr = lr0 * decay^floor(step / decay_every)
inline double lr_schedule(const TrainConfig& cfg, std::size_t step) {
  return cfg.lr0 *
         std::pow(cfg.decay, static_cast<double>(step / cfg.decay_every));
}

// Standalone inverted dropout (the tape op mirrors this).
inline std::vector<double> apply_dropout(const std::vector<double>& v, double p,
                                         std::mt19937_64& rng, bool training) {
  if (!training || p == 0.0) return v;
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("apply_dropout: p must be in [0,1)");
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(v.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = dist(rng) < p ? 0.0 : v[i] * keep_scale;
  return out;
}

// Seeded shuffle into batches of batch_size indices; the final short batch
// is kept.
inline std::vector<std::vector<std::size_t>> make_minibatches(
    std::size_t corpus_size, std::size_t batch_size, std::mt19937_64& rng) {
  if (corpus_size == 0)
    throw std::invalid_argument("make_minibatches: empty corpus");
  std::vector<std::size_t> order(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < corpus_size; i += batch_size) {
    const std::size_t end = std::min(corpus_size, i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

struct TrainLog {
  struct StepRow {
    std::size_t step;
    std::string task;
    double loss;  // mean per sentence within the batch
    double lr;
  };
  struct EpochRow {
    std::size_t epoch;
    std::string split;
    double f1;
  };
  std::vector<StepRow> steps;
  std::vector<EpochRow> epochs;

  void save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("trainlog: cannot open for writing: " + path);
    char buf[64];
    os << "step,task,loss,lr\n";
    for (const auto& r : steps) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g", r.loss, r.lr);
      os << r.step << ',' << r.task << ',' << buf << '\n';
    }
    os << "epoch,split,f1\n";
    for (const auto& r : epochs) {
      std::snprintf(buf, sizeof buf, "%.12g", r.f1);
      os << r.epoch << ',' << r.split << ',' << buf << '\n';
    }
  }
};

// Invoked after each epoch; return false to stop training early.
using EpochCallback = std::function<bool(Model&, std::size_t epoch)>;

namespace detail_train {

// Sentence loss: sum of per-token cross-entropy divided by token count.
inline Tape::NodeId sentence_loss(Tape& t, Model& m, const TaggedSentence& s,
                                  const DropoutOpts& drop) {
  const TaskHead& h = m.head(s.task_id);
  auto logits = build_logits(t, m, s.task_id, s.tokens, drop);
  Tape::NodeId total = 0;
  bool first = true;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Tape::NodeId xent = t.softmax_xent(logits[i], h.label_index(s.tags[i]));
    total = first ? xent : t.add(total, xent);
    first = false;
  }
  return t.scale(total, 1.0 / static_cast<double>(logits.size()));
}

inline void sgd_update(Model& m, const GradientMap& grads, double lr,
                       double clip) {
  double scale = lr;
  if (clip > 0.0) {
    double sq = 0.0;
    for (const auto& [p, g] : grads)
      for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    const double norm = std::sqrt(sq);
    if (norm > clip) scale = lr * clip / norm;
  }
  for (const auto& [p, g] : grads) {
    Tensor* param = const_cast<Tensor*>(p);
    for (std::size_t i = 0; i < g.size(); ++i) (*param)[i] -= scale * g[i];
  }
}

// One minibatch: per-sentence graphs, gradients summed across the batch,
// a single SGD step. Returns the mean per-sentence loss.
inline double train_batch(Model& m, const Corpus& corpus,
                          const std::vector<std::size_t>& batch,
                          const TrainConfig& cfg, std::size_t step,
                          std::mt19937_64& dropout_rng) {
  GradientMap pooled;
  double loss_sum = 0.0;
  for (std::size_t idx : batch) {
    Tape t;
    DropoutOpts drop{cfg.dropout_p > 0.0, cfg.dropout_p, &dropout_rng};
    const Tape::NodeId loss = sentence_loss(t, m, corpus[idx], drop);
    const double lv = t.value(loss)[0];
    if (!std::isfinite(lv))
      throw NumericError("train: non-finite loss at step " +
                         std::to_string(step) + " (task " +
                         corpus[idx].task_id + ")");
    loss_sum += lv;
    accumulate(pooled, t.backward(loss));
  }
  sgd_update(m, pooled, lr_schedule(cfg, step), cfg.grad_clip);
  return loss_sum / static_cast<double>(batch.size());
}

}  // namespace detail_train

inline TrainLog train_single(Model& m, const Corpus& corpus,
                             const TrainConfig& cfg,
                             const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("train_single: empty corpus");
  for (const auto& s : corpus) m.head(s.task_id);  // validates task coverage
  TrainLog log;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch :
         make_minibatches(corpus.size(), cfg.batch_size, shuffle_rng)) {
      const double lr = lr_schedule(cfg, step);
      const double loss =
          detail_train::train_batch(m, corpus, batch, cfg, step, dropout_rng);
      log.steps.push_back({step, corpus[batch[0]].task_id, loss, lr});
      ++step;
    }
    if (on_epoch && !on_epoch(m, epoch)) break;
  }
  return log;
}

// Round-robin over tasks in sorted id order; each task contributes one
// minibatch per cycle and restarts its own shuffled stream when exhausted.
// Runs for cfg.epochs passes of the largest task.
inline TrainLog train_multitask(Model& m,
                                const std::map<std::string, Corpus>& corpora,
                                const TrainConfig& cfg,
                                const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (corpora.empty())
    throw std::invalid_argument("train_multitask: no corpora");
  for (const auto& [task, corpus] : corpora) {
    m.head(task);
    if (corpus.empty())
      throw std::invalid_argument("train_multitask: empty corpus for " + task);
  }

  struct Stream {
    const Corpus* corpus;
    std::mt19937_64 rng;
    std::vector<std::vector<std::size_t>> batches;
    std::size_t pos = 0;
  };
  std::map<std::string, Stream> streams;
  std::size_t max_batches = 0;
  std::uint64_t salt = 1;
  for (const auto& [task, corpus] : corpora) {
    Stream s{&corpus, std::mt19937_64(cfg.seed + salt++), {}, 0};
    s.batches = make_minibatches(corpus.size(), cfg.batch_size, s.rng);
    max_batches = std::max(max_batches, s.batches.size());
    streams.emplace(task, std::move(s));
  }

  TrainLog log;
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t step = 0;
  const std::size_t total_cycles = cfg.epochs * max_batches;
  for (std::size_t cycle = 0; cycle < total_cycles; ++cycle) {
    for (auto& [task, s] : streams) {
      if (s.pos == s.batches.size()) {
        s.batches = make_minibatches(s.corpus->size(), cfg.batch_size, s.rng);
        s.pos = 0;
      }
      const double lr = lr_schedule(cfg, step);
      const double loss = detail_train::train_batch(m, *s.corpus,
                                                    s.batches[s.pos++], cfg,
                                                    step, dropout_rng);
      log.steps.push_back({step, task, loss, lr});
      ++step;
    }
    if (on_epoch && (cycle + 1) % max_batches == 0 &&
        !on_epoch(m, (cycle + 1) / max_batches - 1))
      break;
  }
  return log;
}

}  // namespace slotfill
