#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "slotfill/corpus.hpp"
#include "slotfill/recurrent.hpp"
#include "slotfill/vocab.hpp"

namespace slotfill {

enum class ModelMode { kSingle, kMulti };
enum class VocabMode { kClosed, kOpen };

struct ModelConfig {
  ModelMode mode = ModelMode::kSingle;
  VocabMode vocab_mode = VocabMode::kClosed;
  std::size_t word_dim = 60;  // word-table embedding width
  std::size_t cell_dim = 100;
  std::size_t proj_dim = 70;
  bool peepholes = true;
  // task id -> label list in fixed order (O first, then B-/I- per type)
  std::map<std::string, std::vector<std::string>> task_labels;

  std::size_t embed_dim() const {
    return word_dim +
           (vocab_mode == VocabMode::kOpen ? CharEncoderParams::kOutputDim : 0);
  }

  static ModelConfig single_task(std::string task,
                                 std::vector<std::string> labels,
                                 VocabMode vocab_mode = VocabMode::kClosed) {
    ModelConfig c;
    c.mode = ModelMode::kSingle;
    c.vocab_mode = vocab_mode;
    c.word_dim = vocab_mode == VocabMode::kOpen ? 160 : 60;
    c.cell_dim = 100;
    c.proj_dim = 70;
    c.task_labels[std::move(task)] = std::move(labels);
    return c;
  }

  static ModelConfig multi_task(
      std::map<std::string, std::vector<std::string>> task_labels,
      VocabMode vocab_mode = VocabMode::kClosed) {
    ModelConfig c;
    c.mode = ModelMode::kMulti;
    c.vocab_mode = vocab_mode;
    c.word_dim = vocab_mode == VocabMode::kOpen ? 160 : 200;
    c.cell_dim = 250;
    c.proj_dim = 170;
    c.task_labels = std::move(task_labels);
    return c;
  }

  void validate() const {
    if (task_labels.empty()) throw ConfigError("config: no tasks");
    if (mode == ModelMode::kSingle && task_labels.size() != 1)
      throw ConfigError("config: single mode requires exactly one task");
    if (vocab_mode == VocabMode::kOpen && word_dim != 160)
      throw ConfigError("config: open mode requires a 160-dim word table");
    for (const auto& [task, labels] : task_labels) {
      if (labels.empty() ||
          std::find(labels.begin(), labels.end(), "O") == labels.end())
        throw ConfigError("config: task " + task + " label set must include O");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mode"] = mode == ModelMode::kSingle ? "single" : "multi";
    j["vocab"] = vocab_mode == VocabMode::kClosed ? "closed" : "open";
    j["word_dim"] = word_dim;
    j["cell_dim"] = cell_dim;
    j["proj_dim"] = proj_dim;
    j["peepholes"] = peepholes;
    j["task_labels"] = task_labels;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.mode = j.at("mode") == "single" ? ModelMode::kSingle : ModelMode::kMulti;
    c.vocab_mode =
        j.at("vocab") == "closed" ? VocabMode::kClosed : VocabMode::kOpen;
    c.word_dim = j.at("word_dim");
    c.cell_dim = j.at("cell_dim");
    c.proj_dim = j.at("proj_dim");
    c.peepholes = j.at("peepholes");
    c.task_labels =
        j.at("task_labels").get<std::map<std::string, std::vector<std::string>>>();
    return c;
  }
};

// Canonical label order for a slot-type inventory: O, then B-X/I-X per type
// in sorted order.
inline std::vector<std::string> bio_label_set(const std::set<std::string>& types) {
  std::vector<std::string> labels{"O"};
  for (const auto& t : types) {
    labels.push_back("B-" + t);
    labels.push_back("I-" + t);
  }
  return labels;
}

inline std::vector<std::string> labels_from_corpus(const Corpus& corpus) {
  std::set<std::string> types;
  for (const auto& s : corpus)
    for (const auto& tag : s.tags)
      if (tag != "O") types.insert(tag.substr(2));
  return bio_label_set(types);
}

struct TaskHead {
  std::string task_id;
  Tensor W;  // labels x 2*proj_dim
  Tensor b;  // labels
  std::vector<std::string> labels;

  std::size_t label_index(const std::string& tag) const {
    auto it = std::find(labels.begin(), labels.end(), tag);
    if (it == labels.end())
      throw std::out_of_range("head " + task_id + ": unknown label " + tag);
    return static_cast<std::size_t>(it - labels.begin());
  }
};

struct Model {
  ModelConfig cfg;
  Vocab vocab;
  std::uint64_t vocab_hash = 0;
  EmbeddingTable embeddings;
  std::optional<CharEncoderParams> char_encoder;
  BiLstmParams encoder;
  std::map<std::string, TaskHead> heads;

  TaskHead& head(const std::string& task) {
    auto it = heads.find(task);
    if (it == heads.end())
      throw std::out_of_range("model: unknown task: " + task);
    return it->second;
  }
  const TaskHead& head(const std::string& task) const {
    return const_cast<Model*>(this)->head(task);
  }

  ParamRegistry registry() {
    ParamRegistry reg;
    reg.add("embeddings/rows", &embeddings.rows);
    if (char_encoder) char_encoder->register_params(reg, "char");
    encoder.register_params(reg, "encoder");
    for (auto& [task, h] : heads) {
      reg.add("head/" + task + "/W", &h.W);
      reg.add("head/" + task + "/b", &h.b);
    }
    return reg;
  }
};

// All parameters i.i.d. uniform in [-init_range, init_range], drawn from a
// single seeded generator in a fixed order.
inline Model assemble_model(const ModelConfig& cfg, Vocab vocab,
                            std::uint64_t seed,
                            const CharVocab* char_vocab = nullptr,
                            double init_range = 0.1) {
  cfg.validate();
  if (cfg.vocab_mode == VocabMode::kOpen && !char_vocab)
    throw ConfigError("assemble_model: open mode requires a character vocabulary");
  std::mt19937_64 rng(seed);
  Model m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  m.vocab_hash = m.vocab.hash();
  m.embeddings =
      EmbeddingTable::create(m.vocab.size(), cfg.word_dim, rng, init_range);
  if (cfg.vocab_mode == VocabMode::kOpen)
    m.char_encoder = CharEncoderParams::create(*char_vocab, rng, init_range,
                                               cfg.peepholes);
  m.encoder = BiLstmParams::create(cfg.embed_dim(), cfg.cell_dim, cfg.proj_dim,
                                   rng, init_range, cfg.peepholes);
  for (const auto& [task, labels] : cfg.task_labels) {
    TaskHead h;
    h.task_id = task;
    h.labels = labels;
    h.W = Tensor::uniform({labels.size(), 2 * cfg.proj_dim}, init_range, rng);
    h.b = Tensor::uniform({labels.size()}, init_range, rng);
    m.heads[task] = std::move(h);
  }
  return m;
}

// Eager (tape-free) closed-vocabulary embedding lookup.
inline std::vector<double> embed_closed(const Vocab& v, const EmbeddingTable& e,
                                        const Token& t) {
  return e.lookup(v, t);
}

// Eager open-vocabulary embedding: word-table part (UNK row for unseen
// words) concatenated with the character encoding of the raw form.
inline std::vector<double> embed_open(const Vocab& v, const EmbeddingTable& e,
                                      CharEncoderParams& ce, const Token& t) {
  std::vector<double> out = e.lookup(v, t);
  Tape tape;
  auto nodes = CharEncoderNodes::bind(tape, ce);
  const Tape::NodeId enc = char_word_encode(tape, nodes, t.raw);
  const Tensor& cv = tape.value(enc);
  out.insert(out.end(), cv.data(), cv.data() + cv.size());
  return out;
}

struct DropoutOpts {
  bool training = false;
  double p = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Per-token embedding -> shared bi-LSTM -> task head. Returns raw scores.
inline std::vector<Tape::NodeId> build_logits(Tape& t, Model& m,
                                              const std::string& task,
                                              const std::vector<Token>& tokens,
                                              const DropoutOpts& drop = {}) {
  if (tokens.empty()) throw std::logic_error("build_logits: empty sentence");
  TaskHead& h = m.head(task);
  const Tape::NodeId table = t.param(&m.embeddings.rows);
  std::optional<CharEncoderNodes> char_nodes;
  if (m.cfg.vocab_mode == VocabMode::kOpen)
    char_nodes = CharEncoderNodes::bind(t, *m.char_encoder);
  auto enc_nodes = BiLstmNodes::bind(t, m.encoder);
  const Tape::NodeId head_w = t.param(&h.W);
  const Tape::NodeId head_b = t.param(&h.b);

  std::vector<Tape::NodeId> xs;
  xs.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const std::size_t row = m.vocab.id(tok.norm);
    Tape::NodeId x = t.slice(table, row * m.cfg.word_dim, m.cfg.word_dim);
    if (char_nodes) x = t.concat(x, char_word_encode(t, *char_nodes, tok.raw));
    if (drop.training) x = t.dropout(x, drop.p, *drop.rng, true);
    xs.push_back(x);
  }
  auto hs = bilstm_encode(t, enc_nodes, xs);
  std::vector<Tape::NodeId> logits;
  logits.reserve(hs.size());
  for (Tape::NodeId hnode : hs) {
    if (drop.training) hnode = t.dropout(hnode, drop.p, *drop.rng, true);
    logits.push_back(t.add(t.matvec(head_w, hnode), head_b));
  }
  return logits;
}

// Raw per-token label scores for evaluation (no dropout).
inline std::vector<std::vector<double>> tag_logits(
    Model& m, const std::string& task, const std::vector<Token>& tokens) {
  Tape t;
  auto logits = build_logits(t, m, task, tokens);
  std::vector<std::vector<double>> out;
  out.reserve(logits.size());
  for (Tape::NodeId id : logits) {
    const Tensor& v = t.value(id);
    if (!v.all_finite())
      throw std::runtime_error("tag_logits: non-finite scores");
    out.emplace_back(v.data(), v.data() + v.size());
  }
  return out;
}

// Per-position argmax; ties go to the lowest label index.
inline std::vector<std::string> greedy_decode(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::string>& labels) {
  if (scores.empty()) throw std::logic_error("greedy_decode: empty scores");
  std::vector<std::string> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
      if (row[i] > row[best]) best = i;
    out.push_back(labels[best]);
  }
  return out;
}

// Left-to-right scan: any I-X whose post-repair predecessor is not B-X or
// I-X becomes O.
inline std::vector<std::string> bio_repair(std::vector<std::string> tags) {
  std::string prev_chunk;
  for (auto& tag : tags) {
    if (tag.rfind("I-", 0) == 0) {
      if (prev_chunk != tag.substr(2)) tag = "O";
    }
    if (tag == "O")
      prev_chunk.clear();
    else
      prev_chunk = tag.substr(2);
  }
  return tags;
}

// Full tagging pipeline: logits -> greedy argmax -> BIO repair.
inline std::vector<std::string> tag_sentence(Model& m, const std::string& task,
                                             const std::vector<Token>& tokens) {
  return bio_repair(greedy_decode(tag_logits(m, task, tokens),
                                  m.head(task).labels));
}

struct ParamCounts {
  std::size_t shared = 0;
  std::map<std::string, std::size_t> per_task;
  // Shared proportion of the parameters any one task depends on
  // (shared / (shared + that task's head)), minimized over tasks.
  double shared_fraction = 0.0;
};

inline ParamCounts count_parameters(Model& m) {
  ParamCounts out;
  ParamRegistry reg = m.registry();
  for (const auto& [name, t] : reg.entries()) {
    if (name.rfind("head/", 0) == 0) {
      const std::string task = name.substr(5, name.find('/', 5) - 5);
      out.per_task[task] += t->size();
    } else {
      out.shared += t->size();
    }
  }
  double worst = 1.0;
  for (const auto& [task, n] : out.per_task)
    worst = std::min(worst, static_cast<double>(out.shared) /
                                static_cast<double>(out.shared + n));
  out.shared_fraction = worst;
  return out;
}

inline constexpr const char* kModelMetaKeyConfig = "config";

inline void save_model(const std::string& path, Model& m) {
  nlohmann::json meta;
  meta[kModelMetaKeyConfig] = m.cfg.to_json();
  meta["vocab_hash"] = m.vocab_hash;
  if (m.char_encoder) meta["char_vocab"] = m.char_encoder->chars.serialize();
  ParamRegistry reg = m.registry();
  save_checkpoint(path, reg, meta.dump());
}

inline Model load_model(const std::string& path, Vocab vocab) {
  // First pass reads only the header metadata so the model can be shaped.
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("model: cannot open: " + path);
  char magic[4];
  if (!probe.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("model: bad magic in " + path);
  detail::get_u32(probe);  // version
  const std::uint32_t meta_len = detail::get_u32(probe);
  std::string meta_str(meta_len, '\0');
  if (!probe.read(meta_str.data(), meta_len))
    throw IoError("model: truncated metadata in " + path);
  nlohmann::json meta = nlohmann::json::parse(meta_str);
  ModelConfig cfg = ModelConfig::from_json(meta.at(kModelMetaKeyConfig));
  CharVocab cv;
  if (meta.contains("char_vocab"))
    cv = CharVocab::deserialize(meta.at("char_vocab").get<std::string>());
  Model m = assemble_model(cfg, std::move(vocab), 0,
                           cfg.vocab_mode == VocabMode::kOpen ? &cv : nullptr);
  if (meta.at("vocab_hash").get<std::uint64_t>() != m.vocab_hash)
    throw IoError("model: vocabulary hash mismatch for " + path);
  ParamRegistry reg = m.registry();
  load_checkpoint(path, reg);
  return m;
}

}  // namespace slotfill
