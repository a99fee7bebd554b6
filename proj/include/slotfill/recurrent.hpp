#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "slotfill/autodiff.hpp"
#include "slotfill/checkpoint.hpp"

namespace slotfill {

// Projected LSTM cell (gates with peepholes and an output
// projection). When proj_dim == 0 the projection is the identity and the
// exposed state is o * tanh(c) of size cell_dim.
struct LstmpParams {
  std::size_t input_dim = 0;
  std::size_t cell_dim = 0;
  std::size_t proj_dim = 0;  // 0 means no projection layer
  bool peepholes = true;

  Tensor W_ix, W_fx, W_cx, W_ox;  // cell_dim x input_dim
  Tensor W_im, W_fm, W_cm, W_om;  // cell_dim x output_dim()
  Tensor w_ic, w_fc, w_oc;        // cell_dim
  Tensor b_i, b_f, b_c, b_o;      // cell_dim
  Tensor W_proj;                  // proj_dim x cell_dim (when projected)

  std::size_t output_dim() const { return proj_dim ? proj_dim : cell_dim; }

  static LstmpParams create(std::size_t input_dim, std::size_t cell_dim,
                            std::size_t proj_dim, std::mt19937_64& rng,
                            double init_range = 0.1, bool peepholes = true) {
    LstmpParams p;
    p.input_dim = input_dim;
    p.cell_dim = cell_dim;
    p.proj_dim = proj_dim;
    p.peepholes = peepholes;
    auto mat = [&](std::size_t r, std::size_t c) {
      return Tensor::uniform({r, c}, init_range, rng);
    };
    auto vec = [&](std::size_t n) { return Tensor::uniform({n}, init_range, rng); };
    const std::size_t out = p.output_dim();
    p.W_ix = mat(cell_dim, input_dim);
    p.W_fx = mat(cell_dim, input_dim);
    p.W_cx = mat(cell_dim, input_dim);
    p.W_ox = mat(cell_dim, input_dim);
    p.W_im = mat(cell_dim, out);
    p.W_fm = mat(cell_dim, out);
    p.W_cm = mat(cell_dim, out);
    p.W_om = mat(cell_dim, out);
    p.w_ic = vec(cell_dim);
    p.w_fc = vec(cell_dim);
    p.w_oc = vec(cell_dim);
    p.b_i = vec(cell_dim);
    p.b_f = vec(cell_dim);
    p.b_c = vec(cell_dim);
    p.b_o = vec(cell_dim);
    if (proj_dim) p.W_proj = mat(proj_dim, cell_dim);
    return p;
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + "/W_ix", &W_ix);
    reg.add(prefix + "/W_fx", &W_fx);
    reg.add(prefix + "/W_cx", &W_cx);
    reg.add(prefix + "/W_ox", &W_ox);
    reg.add(prefix + "/W_im", &W_im);
    reg.add(prefix + "/W_fm", &W_fm);
    reg.add(prefix + "/W_cm", &W_cm);
    reg.add(prefix + "/W_om", &W_om);
    if (peepholes) {
      reg.add(prefix + "/w_ic", &w_ic);
      reg.add(prefix + "/w_fc", &w_fc);
      reg.add(prefix + "/w_oc", &w_oc);
    }
    reg.add(prefix + "/b_i", &b_i);
    reg.add(prefix + "/b_f", &b_f);
    reg.add(prefix + "/b_c", &b_c);
    reg.add(prefix + "/b_o", &b_o);
    if (proj_dim) reg.add(prefix + "/W_proj", &W_proj);
  }
};

struct BiLstmParams {
  LstmpParams forward;
  LstmpParams backward;

  std::size_t output_dim() const {
    return forward.output_dim() + backward.output_dim();
  }

  static BiLstmParams create(std::size_t input_dim, std::size_t cell_dim,
                             std::size_t proj_dim, std::mt19937_64& rng,
                             double init_range = 0.1, bool peepholes = true) {
    BiLstmParams p;
    p.forward = LstmpParams::create(input_dim, cell_dim, proj_dim, rng,
                                    init_range, peepholes);
    p.backward = LstmpParams::create(input_dim, cell_dim, proj_dim, rng,
                                     init_range, peepholes);
    return p;
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    forward.register_params(reg, prefix + "/fwd");
    backward.register_params(reg, prefix + "/bwd");
  }
};

// Parameter leaves bound to one tape. Bind once per sentence graph so each
// parameter appears as a single node and fan-out gradients accumulate there.
struct LstmpNodes {
  const LstmpParams* p;
  Tape::NodeId W_ix, W_fx, W_cx, W_ox;
  Tape::NodeId W_im, W_fm, W_cm, W_om;
  Tape::NodeId w_ic, w_fc, w_oc;
  Tape::NodeId b_i, b_f, b_c, b_o;
  Tape::NodeId W_proj;

  static LstmpNodes bind(Tape& t, LstmpParams& p) {
    LstmpNodes n;
    n.p = &p;
    n.W_ix = t.param(&p.W_ix);
    n.W_fx = t.param(&p.W_fx);
    n.W_cx = t.param(&p.W_cx);
    n.W_ox = t.param(&p.W_ox);
    n.W_im = t.param(&p.W_im);
    n.W_fm = t.param(&p.W_fm);
    n.W_cm = t.param(&p.W_cm);
    n.W_om = t.param(&p.W_om);
    if (p.peepholes) {
      n.w_ic = t.param(&p.w_ic);
      n.w_fc = t.param(&p.w_fc);
      n.w_oc = t.param(&p.w_oc);
    }
    n.b_i = t.param(&p.b_i);
    n.b_f = t.param(&p.b_f);
    n.b_c = t.param(&p.b_c);
    n.b_o = t.param(&p.b_o);
    if (p.proj_dim) n.W_proj = t.param(&p.W_proj);
    return n;
  }
};

struct LstmpState {
  Tape::NodeId m;  // exposed output, size output_dim()
  Tape::NodeId c;  // cell state, size cell_dim
};

inline LstmpState lstmp_zero_state(Tape& t, const LstmpParams& p) {
  return {t.input(Tensor::vector(p.output_dim())),
          t.input(Tensor::vector(p.cell_dim))};
}

// One cell step: peephole gates, cell update, output projection.
inline LstmpState lstmp_step(Tape& t, const LstmpNodes& n, Tape::NodeId x,
                             const LstmpState& prev) {
  const LstmpParams& p = *n.p;
  auto gate_pre = [&](Tape::NodeId Wx, Tape::NodeId Wm, Tape::NodeId b) {
    return t.add(t.add(t.matvec(Wx, x), t.matvec(Wm, prev.m)), b);
  };
  Tape::NodeId i_pre = gate_pre(n.W_ix, n.W_im, n.b_i);
  Tape::NodeId f_pre = gate_pre(n.W_fx, n.W_fm, n.b_f);
  if (p.peepholes) {
    i_pre = t.add(i_pre, t.mul(n.w_ic, prev.c));
    f_pre = t.add(f_pre, t.mul(n.w_fc, prev.c));
  }
  const Tape::NodeId i = t.sigmoid(i_pre);
  const Tape::NodeId f = t.sigmoid(f_pre);
  const Tape::NodeId cand = t.tanh(gate_pre(n.W_cx, n.W_cm, n.b_c));
  const Tape::NodeId c = t.add(t.mul(f, prev.c), t.mul(i, cand));
  Tape::NodeId o_pre = gate_pre(n.W_ox, n.W_om, n.b_o);
  if (p.peepholes) o_pre = t.add(o_pre, t.mul(n.w_oc, c));
  const Tape::NodeId o = t.sigmoid(o_pre);
  const Tape::NodeId gated = t.mul(o, t.tanh(c));
  const Tape::NodeId m = p.proj_dim ? t.matvec(n.W_proj, gated) : gated;
  return {m, c};
}

// Runs one direction over the sequence; returns the exposed state per step.
inline std::vector<Tape::NodeId> lstmp_run(Tape& t, const LstmpNodes& n,
                                           const std::vector<Tape::NodeId>& xs,
                                           bool reversed) {
  std::vector<Tape::NodeId> out(xs.size());
  LstmpState state = lstmp_zero_state(t, *n.p);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const std::size_t i = reversed ? xs.size() - 1 - s : s;
    state = lstmp_step(t, n, xs[i], state);
    out[i] = state.m;
  }
  return out;
}

struct BiLstmNodes {
  LstmpNodes fwd;
  LstmpNodes bwd;

  static BiLstmNodes bind(Tape& t, BiLstmParams& p) {
    return {LstmpNodes::bind(t, p.forward), LstmpNodes::bind(t, p.backward)};
  }
};

// output[t] = concat(forward m_t, backward m_t), both started from zero.
inline std::vector<Tape::NodeId> bilstm_encode(
    Tape& t, const BiLstmNodes& n, const std::vector<Tape::NodeId>& xs) {
  if (xs.empty()) throw std::logic_error("bilstm_encode: empty sequence");
  const auto fwd = lstmp_run(t, n.fwd, xs, false);
  const auto bwd = lstmp_run(t, n.bwd, xs, true);
  std::vector<Tape::NodeId> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = t.concat(fwd[i], bwd[i]);
  return out;
}

// Character inventory observed in training raw tokens, plus an unknown id.
class CharVocab {
 public:
  CharVocab() { ids_['\0'] = 0; }  // id 0 reserved for unknown

  static CharVocab from_words(const std::vector<std::string>& words) {
    CharVocab cv;
    for (const auto& w : words)
      for (char ch : w) cv.ids_.try_emplace(ch, cv.ids_.size());
    return cv;
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t unk_id() const { return 0; }

  std::size_t id(char ch) const {
    auto it = ids_.find(ch);
    return it == ids_.end() ? unk_id() : it->second;
  }

  std::string serialize() const {
    // id 0 is unk; remaining chars listed in id order
    std::string out(ids_.size() - 1, '\0');
    for (const auto& [ch, id] : ids_)
      if (id > 0) out[id - 1] = ch;
    return out;
  }

  static CharVocab deserialize(const std::string& chars) {
    CharVocab cv;
    for (char ch : chars) cv.ids_.try_emplace(ch, cv.ids_.size());
    return cv;
  }

 private:
  std::unordered_map<char, std::size_t> ids_;
};

// Two-layer character bi-LSTM word encoder. The word embedding is the
// concatenation of the last forward and last backward states of layer 2,
// reduced by a linear layer.
struct CharEncoderParams {
  static constexpr std::size_t kCharDim = 15;
  static constexpr std::size_t kLayer1Cell = 40;
  static constexpr std::size_t kLayer1Proj = 20;
  static constexpr std::size_t kLayer2Cell = 130;
  static constexpr std::size_t kOutputDim = 40;

  CharVocab chars;
  Tensor char_table;  // char vocab x 15
  BiLstmParams layer1;
  BiLstmParams layer2;
  Tensor W_reduce;  // 40 x 260
  Tensor b_reduce;  // 40

  static CharEncoderParams create(CharVocab chars, std::mt19937_64& rng,
                                  double init_range = 0.1,
                                  bool peepholes = true) {
    CharEncoderParams p;
    p.chars = std::move(chars);
    p.char_table = Tensor::uniform({p.chars.size(), kCharDim}, init_range, rng);
    p.layer1 = BiLstmParams::create(kCharDim, kLayer1Cell, kLayer1Proj, rng,
                                    init_range, peepholes);
    p.layer2 = BiLstmParams::create(2 * kLayer1Proj, kLayer2Cell, 0, rng,
                                    init_range, peepholes);
    p.W_reduce = Tensor::uniform({kOutputDim, 2 * kLayer2Cell}, init_range, rng);
    p.b_reduce = Tensor::uniform({kOutputDim}, init_range, rng);
    return p;
  }

  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + "/char_table", &char_table);
    layer1.register_params(reg, prefix + "/layer1");
    layer2.register_params(reg, prefix + "/layer2");
    reg.add(prefix + "/W_reduce", &W_reduce);
    reg.add(prefix + "/b_reduce", &b_reduce);
  }
};

struct CharEncoderNodes {
  CharEncoderParams* p;
  Tape::NodeId char_table;
  BiLstmNodes layer1;
  BiLstmNodes layer2;
  Tape::NodeId W_reduce;
  Tape::NodeId b_reduce;

  static CharEncoderNodes bind(Tape& t, CharEncoderParams& p) {
    CharEncoderNodes n;
    n.p = &p;
    n.char_table = t.param(&p.char_table);
    n.layer1 = BiLstmNodes::bind(t, p.layer1);
    n.layer2 = BiLstmNodes::bind(t, p.layer2);
    n.W_reduce = t.param(&p.W_reduce);
    n.b_reduce = t.param(&p.b_reduce);
    return n;
  }
};

// Encodes a raw (un-normalized) word into a 40-dim vector.
inline Tape::NodeId char_word_encode(Tape& t, const CharEncoderNodes& n,
                                     const std::string& raw_word) {
  if (raw_word.empty())
    throw std::logic_error("char_word_encode: empty word");
  const CharEncoderParams& p = *n.p;
  std::vector<Tape::NodeId> xs;
  xs.reserve(raw_word.size());
  for (char ch : raw_word) {
    const std::size_t row = p.chars.id(ch);
    xs.push_back(t.slice(n.char_table, row * CharEncoderParams::kCharDim,
                         CharEncoderParams::kCharDim));
  }
  const auto h1 = bilstm_encode(t, n.layer1, xs);
  const auto fwd = lstmp_run(t, n.layer2.fwd, h1, false);
  const auto bwd = lstmp_run(t, n.layer2.bwd, h1, true);
  const Tape::NodeId last = t.concat(fwd.back(), bwd.front());
  return t.add(t.matvec(n.W_reduce, last), n.b_reduce);
}

}  // namespace slotfill
