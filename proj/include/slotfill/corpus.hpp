#pragma once

#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "slotfill/vocab.hpp"

namespace slotfill {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SlotSpan {
  std::string type;
  std::size_t begin = 0;  // token indices, inclusive
  std::size_t end = 0;

  bool operator==(const SlotSpan&) const = default;
};

struct MarkupSentence {
  std::vector<Token> tokens;
  std::vector<SlotSpan> spans;
};

struct TaggedSentence {
  std::vector<Token> tokens;
  std::vector<std::string> tags;
  std::string task_id;
};

inline bool is_valid_bio(const std::vector<std::string>& tags) {
  std::string prev_chunk;  // slot type continued from the previous token
  for (const auto& tag : tags) {
    if (tag == "O") {
      prev_chunk.clear();
    } else if (tag.rfind("B-", 0) == 0) {
      prev_chunk = tag.substr(2);
    } else if (tag.rfind("I-", 0) == 0) {
      if (prev_chunk != tag.substr(2)) return false;
    } else {
      return false;
    }
  }
  return true;
}

// Parses a line with inline <SlotType> value </SlotType> markup (flat spans
// only). Tag-exterior and tag-interior text go through the standard
// tokenizer.
inline MarkupSentence parse_markup(const std::string& line) {
  MarkupSentence out;
  std::size_t pos = 0;
  std::optional<std::string> open_type;
  std::size_t open_begin = 0;
  auto flush_text = [&](const std::string& text) {
    for (auto& w : tokenize(text)) out.tokens.push_back(make_token(w));
  };
  while (pos < line.size()) {
    const std::size_t lt = line.find('<', pos);
    if (lt == std::string::npos) {
      flush_text(line.substr(pos));
      break;
    }
    flush_text(line.substr(pos, lt - pos));
    const std::size_t gt = line.find('>', lt);
    if (gt == std::string::npos)
      throw ParseError("unclosed tag bracket at position " + std::to_string(lt));
    std::string name = line.substr(lt + 1, gt - lt - 1);
    const bool closing = !name.empty() && name.front() == '/';
    if (closing) name.erase(name.begin());
    if (name.empty())
      throw ParseError("empty tag name at position " + std::to_string(lt));
    if (closing) {
      if (!open_type)
        throw ParseError("close tag </" + name + "> without open tag at position " +
                         std::to_string(lt));
      if (*open_type != name)
        throw ParseError("mismatched close tag </" + name + "> for <" +
                         *open_type + "> at position " + std::to_string(lt));
      if (out.tokens.size() == open_begin)
        throw ParseError("empty slot <" + name + "> at position " +
                         std::to_string(lt));
      out.spans.push_back({name, open_begin, out.tokens.size() - 1});
      open_type.reset();
    } else {
      if (open_type)
        throw ParseError("nested tag <" + name + "> inside <" + *open_type +
                         "> at position " + std::to_string(lt));
      open_type = name;
      open_begin = out.tokens.size();
    }
    pos = gt + 1;
  }
  if (open_type)
    throw ParseError("unclosed tag <" + *open_type + "> at end of line");
  return out;
}

// First token of each span gets B-X, the rest I-X, everything else O.
inline TaggedSentence to_bio(const MarkupSentence& s,
                             const std::string& task_id = "") {
  TaggedSentence out;
  out.tokens = s.tokens;
  out.task_id = task_id;
  out.tags.assign(s.tokens.size(), "O");
  std::vector<bool> covered(s.tokens.size(), false);
  for (const auto& span : s.spans) {
    for (std::size_t i = span.begin; i <= span.end; ++i) {
      if (covered[i])
        throw std::logic_error("to_bio: overlapping spans at token " +
                               std::to_string(i));
      covered[i] = true;
      out.tags[i] = (i == span.begin ? "B-" : "I-") + span.type;
    }
  }
  return out;
}

// Reconstructs the markup line from tokens and tags (raw surface forms).
inline std::string to_markup(const TaggedSentence& s) {
  std::string out;
  std::string open;
  auto close = [&] {
    if (!open.empty()) out += " </" + open + ">";
    open.clear();
  };
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const std::string& tag = s.tags[i];
    if (tag == "O") {
      close();
    } else if (tag.rfind("B-", 0) == 0) {
      close();
      open = tag.substr(2);
      if (!out.empty()) out += ' ';
      out += "<" + open + ">";
    }
    if (!out.empty()) out += ' ';
    out += s.tokens[i].raw;
  }
  close();
  return out;
}

using Corpus = std::vector<TaggedSentence>;

struct CorpusSplit {
  Corpus train;
  Corpus test;
  std::uint64_t seed = 0;
};

// Seeded shuffle, then prefix split with floor rounding.
inline CorpusSplit split_corpus(const Corpus& corpus, double train_frac,
                                std::uint64_t seed) {
  if (train_frac <= 0.0 || train_frac >= 1.0)
    throw std::invalid_argument("split_corpus: train_frac must be in (0,1)");
  if (corpus.size() < 2)
    throw std::invalid_argument("split_corpus: need at least 2 sentences");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train =
      static_cast<std::size_t>(train_frac * static_cast<double>(corpus.size()));
  CorpusSplit out;
  out.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.train : out.test).push_back(corpus[order[i]]);
  return out;
}

struct OovStats {
  double token_rate = 0.0;
  std::vector<std::size_t> oov_sentence_indices;  // into the test corpus
};

inline OovStats oov_stats(const Vocab& train_vocab, const Corpus& test) {
  OovStats out;
  std::size_t total = 0, oov = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    bool has_oov = false;
    for (const auto& tok : test[s].tokens) {
      ++total;
      if (!train_vocab.contains(tok.norm)) {
        ++oov;
        has_oov = true;
      }
    }
    if (has_oov) out.oov_sentence_indices.push_back(s);
  }
  out.token_rate = total ? static_cast<double>(oov) / static_cast<double>(total)
                         : 0.0;
  return out;
}

// Markup corpus file: "#app:<name>" header, one markup sentence per line.
inline void save_markup_corpus(const std::string& path, const std::string& app,
                               const std::vector<std::string>& lines) {
  std::ofstream os(path);
  if (!os) throw IoError("corpus: cannot open for writing: " + path);
  os << "#app:" << app << '\n';
  for (const auto& l : lines) os << l << '\n';
}

struct MarkupCorpusFile {
  std::string app;
  std::vector<std::string> lines;
};

inline MarkupCorpusFile load_markup_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("corpus: cannot open: " + path);
  MarkupCorpusFile out;
  std::string line;
  if (!std::getline(is, line) || line.rfind("#app:", 0) != 0)
    throw ParseError("corpus: missing #app: header in " + path);
  out.app = line.substr(5);
  while (std::getline(is, line))
    if (!line.empty()) out.lines.push_back(line);
  return out;
}

inline Corpus parse_markup_corpus(const MarkupCorpusFile& file) {
  Corpus out;
  out.reserve(file.lines.size());
  for (const auto& l : file.lines) out.push_back(to_bio(parse_markup(l), file.app));
  return out;
}

// Two-column exchange format: token<TAB>tag per line, blank line between
// sentences.
inline void save_column_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path);
  if (!os) throw IoError("corpus: cannot open for writing: " + path);
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      os << s.tokens[i].raw << '\t' << s.tags[i] << '\n';
    os << '\n';
  }
}

inline Corpus load_column_corpus(const std::string& path,
                                 const std::string& task_id = "") {
  std::ifstream is(path);
  if (!is) throw IoError("corpus: cannot open: " + path);
  Corpus out;
  TaggedSentence cur;
  cur.task_id = task_id;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) {
      if (!cur.tokens.empty()) {
        out.push_back(cur);
        cur.tokens.clear();
        cur.tags.clear();
      }
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("corpus: malformed column line: " + line);
    cur.tokens.push_back(make_token(line.substr(0, tab)));
    cur.tags.push_back(line.substr(tab + 1));
  }
  if (!cur.tokens.empty()) out.push_back(cur);
  return out;
}

inline std::vector<std::string> normalized_tokens(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& s : corpus)
    for (const auto& t : s.tokens) out.push_back(t.norm);
  return out;
}

inline std::vector<std::string> raw_tokens(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& s : corpus)
    for (const auto& t : s.tokens) out.push_back(t.raw);
  return out;
}

}  // namespace slotfill
