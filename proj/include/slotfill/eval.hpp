#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/model.hpp"

namespace slotfill {

struct Chunk {
  std::string type;
  std::size_t sentence = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // inclusive

  bool operator==(const Chunk&) const = default;
  auto operator<=>(const Chunk&) const = default;
};

// Maximal B-X ... I-X spans of one valid BIO sequence.
inline std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags,
                                         std::size_t sentence = 0) {
  if (!is_valid_bio(tags))
    throw std::logic_error("extract_chunks: invalid BIO sequence (repair first)");
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].rfind("B-", 0) != 0) continue;
    Chunk c{tags[i].substr(2), sentence, i, i};
    while (c.end + 1 < tags.size() && tags[c.end + 1] == "I-" + c.type) ++c.end;
    out.push_back(std::move(c));
  }
  return out;
}

struct TypeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold chunk count
};

struct EvalReport {
  double precision = 0.0;  // percentages
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_chunks = 0;
  std::size_t pred_chunks = 0;
  std::size_t correct_chunks = 0;
  std::map<std::string, TypeScore> per_type;
};

namespace detail_eval {

// Zero-denominator convention: P (or R) is 0 when nothing is predicted
// (or gold); F1 is 0 unless both sides are empty, which scores 100.
inline void fill_prf(double& p, double& r, double& f1, std::size_t correct,
                     std::size_t pred, std::size_t gold) {
  if (pred == 0 && gold == 0) {
    p = r = f1 = 100.0;
    return;
  }
  p = pred ? 100.0 * static_cast<double>(correct) / static_cast<double>(pred)
           : 0.0;
  r = gold ? 100.0 * static_cast<double>(correct) / static_cast<double>(gold)
           : 0.0;
  f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace detail_eval

// Chunk-level micro-averaged precision/recall/F1: a predicted chunk counts
// only on exact type and boundary match.
inline EvalReport conll_f1(const std::vector<std::vector<std::string>>& gold,
                           const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size())
    throw std::logic_error("conll_f1: corpus size mismatch");
  std::vector<Chunk> gold_chunks, pred_chunks;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size())
      throw std::logic_error("conll_f1: token count mismatch in sentence " +
                             std::to_string(s));
    for (auto& c : extract_chunks(gold[s], s)) gold_chunks.push_back(c);
    for (auto& c : extract_chunks(pred[s], s)) pred_chunks.push_back(c);
  }
  std::map<Chunk, std::size_t> gold_multiset;
  for (const auto& c : gold_chunks) ++gold_multiset[c];

  EvalReport rep;
  rep.gold_chunks = gold_chunks.size();
  rep.pred_chunks = pred_chunks.size();
  std::map<std::string, std::size_t> correct_by_type, pred_by_type, gold_by_type;
  for (const auto& c : gold_chunks) ++gold_by_type[c.type];
  for (const auto& c : pred_chunks) {
    ++pred_by_type[c.type];
    auto it = gold_multiset.find(c);
    if (it != gold_multiset.end() && it->second > 0) {
      --it->second;
      ++rep.correct_chunks;
      ++correct_by_type[c.type];
    }
  }
  detail_eval::fill_prf(rep.precision, rep.recall, rep.f1, rep.correct_chunks,
                        rep.pred_chunks, rep.gold_chunks);
  std::set<std::string> types;
  for (const auto& [t, n] : gold_by_type) types.insert(t);
  for (const auto& [t, n] : pred_by_type) types.insert(t);
  for (const auto& t : types) {
    TypeScore ts;
    ts.support = gold_by_type.count(t) ? gold_by_type[t] : 0;
    detail_eval::fill_prf(ts.precision, ts.recall, ts.f1, correct_by_type[t],
                          pred_by_type.count(t) ? pred_by_type[t] : 0,
                          ts.support);
    rep.per_type[t] = ts;
  }
  return rep;
}

// Per-type scores, optionally filtered to support >= min_support.
inline std::map<std::string, TypeScore> per_slot_f1(
    const std::vector<std::vector<std::string>>& gold,
    const std::vector<std::vector<std::string>>& pred,
    std::size_t min_support = 0) {
  auto per_type = conll_f1(gold, pred).per_type;
  if (min_support > 0)
    std::erase_if(per_type, [min_support](const auto& kv) {
      return kv.second.support < min_support;
    });
  return per_type;
}

struct SubsetReports {
  EvalReport full;
  std::optional<EvalReport> oov;  // absent when no test sentence has OOVs
  double oov_token_rate = 0.0;
};

// Tags every test sentence and scores the full set plus the OOV-sentence
// subset determined by the training vocabulary.
inline SubsetReports evaluate_subsets(Model& m, const std::string& task,
                                      const Corpus& test,
                                      const Vocab& train_vocab) {
  std::vector<std::vector<std::string>> gold, pred;
  gold.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& s : test) {
    gold.push_back(s.tags);
    pred.push_back(tag_sentence(m, task, s.tokens));
  }
  SubsetReports out;
  out.full = conll_f1(gold, pred);
  const OovStats stats = oov_stats(train_vocab, test);
  out.oov_token_rate = stats.token_rate;
  if (!stats.oov_sentence_indices.empty()) {
    std::vector<std::vector<std::string>> g2, p2;
    for (std::size_t idx : stats.oov_sentence_indices) {
      g2.push_back(gold[idx]);
      p2.push_back(pred[idx]);
    }
    out.oov = conll_f1(g2, p2);
  }
  return out;
}

// CSV rows: scope, slot_type|ALL, precision, recall, f1, support.
inline void save_report_csv(const std::string& path, const EvalReport& full,
                            const EvalReport* oov = nullptr) {
  std::ofstream os(path);
  if (!os) throw IoError("report: cannot open for writing: " + path);
  os << "scope,slot_type,precision,recall,f1,support\n";
  char buf[128];
  auto emit = [&](const std::string& scope, const EvalReport& r) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g", r.precision, r.recall,
                  r.f1);
    os << scope << ",ALL," << buf << ',' << r.gold_chunks << '\n';
    for (const auto& [type, ts] : r.per_type) {
      std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g", ts.precision, ts.recall,
                    ts.f1);
      os << scope << ',' << type << ',' << buf << ',' << ts.support << '\n';
    }
  };
  emit("full", full);
  if (oov) emit("oov", *oov);
}

inline void print_report(std::ostream& os, const std::string& title,
                         const EvalReport& r) {
  char buf[160];
  os << title << '\n';
  std::snprintf(buf, sizeof buf,
                "  %-20s P %6.2f  R %6.2f  F1 %6.2f  (gold %zu)", "ALL",
                r.precision, r.recall, r.f1, r.gold_chunks);
  os << buf << '\n';
  for (const auto& [type, ts] : r.per_type) {
    std::snprintf(buf, sizeof buf,
                  "  %-20s P %6.2f  R %6.2f  F1 %6.2f  (gold %zu)",
                  type.c_str(), ts.precision, ts.recall, ts.f1, ts.support);
    os << buf << '\n';
  }
}

}  // namespace slotfill
