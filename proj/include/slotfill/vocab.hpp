#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "slotfill/checkpoint.hpp"
#include "slotfill/tensor.hpp"

namespace slotfill {

inline constexpr const char* kUnkToken = "<unk>";

// A token keeps its raw surface form for the character path; the word
// table only ever sees the normalized form.
struct Token {
  std::string raw;
  std::string norm;
};

// Lowercase, then map every decimal digit to '#'. No other rewriting.
inline std::string preprocess_token(const std::string& raw) {
  if (raw.empty())
    throw std::invalid_argument("preprocess_token: empty token");
  std::string out;
  out.reserve(raw.size());
  for (unsigned char ch : raw) {
    if (std::isdigit(ch))
      out.push_back('#');
    else
      out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

inline Token make_token(const std::string& raw) {
  return Token{raw, preprocess_token(raw)};
}

// Whitespace split with leading/trailing punctuation (.,!?;:'"$) detached
// as separate tokens.
inline std::vector<std::string> tokenize(const std::string& text) {
  static const std::string punct = ".,!?;:'\"$";
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string word = text.substr(i, j - i);
    i = j;
    std::vector<std::string> leading, trailing;
    while (word.size() > 1 && punct.find(word.front()) != std::string::npos) {
      leading.push_back(std::string(1, word.front()));
      word.erase(word.begin());
    }
    while (word.size() > 1 && punct.find(word.back()) != std::string::npos) {
      trailing.push_back(std::string(1, word.back()));
      word.pop_back();
    }
    for (auto& p : leading) out.push_back(std::move(p));
    out.push_back(std::move(word));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it)
      out.push_back(std::move(*it));
  }
  return out;
}

// Closed vocabulary over normalized tokens. Tokens below min_count are
// folded into <unk>; ids are assigned by (frequency desc, lexicographic).
class Vocab {
 public:
  static Vocab build(const std::vector<std::string>& corpus_tokens,
                     std::size_t min_count = 2) {
    if (corpus_tokens.empty())
      throw std::invalid_argument("Vocab::build: empty corpus");
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& t : corpus_tokens) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : counts)
      if (n >= min_count) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocab v;
    v.unk_id_ = 0;
    v.ids_[kUnkToken] = 0;
    v.counts_.push_back(0);
    v.tokens_.push_back(kUnkToken);
    for (const auto& [tok, n] : kept) {
      v.ids_[tok] = v.tokens_.size();
      v.tokens_.push_back(tok);
      v.counts_.push_back(n);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t unk_id() const { return unk_id_; }

  std::size_t id(const std::string& norm) const {
    auto it = ids_.find(norm);
    return it == ids_.end() ? unk_id_ : it->second;
  }

  bool contains(const std::string& norm) const { return ids_.count(norm) > 0; }

  const std::string& token(std::size_t id) const { return tokens_[id]; }

  // One line per entry: token<TAB>id<TAB>count.
  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("vocab: cannot open for writing: " + path);
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      os << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  }

  static Vocab load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("vocab: cannot open: " + path);
    Vocab v;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const std::size_t t1 = line.find('\t');
      const std::size_t t2 = line.find('\t', t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos)
        throw IoError("vocab: malformed line: " + line);
      const std::string tok = line.substr(0, t1);
      const std::size_t id = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
      const std::size_t count = std::stoul(line.substr(t2 + 1));
      if (id != v.tokens_.size())
        throw IoError("vocab: non-dense id in " + path);
      v.ids_[tok] = id;
      v.tokens_.push_back(tok);
      v.counts_.push_back(count);
      if (tok == kUnkToken) v.unk_id_ = id;
    }
    if (v.tokens_.empty()) throw IoError("vocab: empty file: " + path);
    return v;
  }

  // Stable content hash, stored in model checkpoints to tie a model to
  // the vocabulary it was trained with.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= 0xff;
      h *= 1099511628211ull;
    };
    for (const auto& t : tokens_) mix(t);
    return h;
  }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::size_t unk_id_ = 0;
};

// Row-per-token embedding table over a closed vocabulary.
struct EmbeddingTable {
  Tensor rows;  // vocab size x dim
  std::size_t dim = 0;

  static EmbeddingTable create(std::size_t vocab_size, std::size_t dim,
                               std::mt19937_64& rng, double init_range = 0.1) {
    EmbeddingTable e;
    e.dim = dim;
    e.rows = Tensor::uniform({vocab_size, dim}, init_range, rng);
    return e;
  }

  std::vector<double> lookup(const Vocab& v, const Token& t) const {
    const std::size_t r = v.id(t.norm);
    const double* src = rows.data() + r * dim;
    return std::vector<double>(src, src + dim);
  }
};

}  // namespace slotfill
