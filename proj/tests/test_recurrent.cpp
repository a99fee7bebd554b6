#include <doctest.h>

#include "slotfill/gradcheck.hpp"
#include "slotfill/recurrent.hpp"

using namespace slotfill;

namespace {

void zero_params(LstmpParams& p) {
  ParamRegistry reg;
  p.register_params(reg, "p");
  for (auto& [name, t] : reg.entries()) t->fill(0.0);
}

}  // namespace

TEST_CASE("lstmp step from all zeros stays at zero") {
  std::mt19937_64 rng(1);
  LstmpParams p = LstmpParams::create(3, 4, 2, rng);
  zero_params(p);
  Tape t;
  auto nodes = LstmpNodes::bind(t, p);
  auto state = lstmp_step(t, nodes, t.input(Tensor({3}, {1, 2, 3})),
                          lstmp_zero_state(t, p));
  for (std::size_t i = 0; i < 2; ++i) CHECK(t.value(state.m)[i] == 0.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.value(state.c)[i] == 0.0);
}

TEST_CASE("lstmp step output dimensions at published sizes") {
  std::mt19937_64 rng(2);
  LstmpParams p = LstmpParams::create(200, 250, 170, rng, 0.01);
  Tape t;
  auto nodes = LstmpNodes::bind(t, p);
  auto state = lstmp_step(t, nodes, t.input(Tensor::uniform({200}, 0.1, rng)),
                          lstmp_zero_state(t, p));
  CHECK(t.value(state.m).size() == 170);
  CHECK(t.value(state.c).size() == 250);
}

TEST_CASE("scalar lstmp step matches hand arithmetic") {
  LstmpParams p;
  p.input_dim = p.cell_dim = p.proj_dim = 1;
  auto m1 = [](double v) { return Tensor({1, 1}, {v}); };
  auto v1 = [](double v) { return Tensor({1}, {v}); };
  p.W_ix = m1(0.5); p.W_im = m1(0.25); p.w_ic = v1(0.1); p.b_i = v1(0.05);
  p.W_fx = m1(-0.3); p.W_fm = m1(0.2); p.w_fc = v1(-0.1); p.b_f = v1(0.15);
  p.W_cx = m1(0.7); p.W_cm = m1(-0.4); p.b_c = v1(0.2);
  p.W_ox = m1(0.6); p.W_om = m1(0.3); p.w_oc = v1(0.2); p.b_o = v1(-0.1);
  p.W_proj = m1(1.5);

  const double x = 0.8, m_prev = 0.5, c_prev = -0.3;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(0.5 * x + 0.25 * m_prev + 0.1 * c_prev + 0.05);
  const double f = sig(-0.3 * x + 0.2 * m_prev + -0.1 * c_prev + 0.15);
  const double c = f * c_prev + i * std::tanh(0.7 * x + -0.4 * m_prev + 0.2);
  const double o = sig(0.6 * x + 0.3 * m_prev + 0.2 * c + -0.1);
  const double m = 1.5 * (o * std::tanh(c));

  Tape t;
  auto nodes = LstmpNodes::bind(t, p);
  LstmpState prev{t.input(v1(m_prev)), t.input(v1(c_prev))};
  auto state = lstmp_step(t, nodes, t.input(v1(x)), prev);
  CHECK(t.value(state.c)[0] == doctest::Approx(c).epsilon(1e-12));
  CHECK(t.value(state.m)[0] == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("lstmp gradients through 4 unrolled steps match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    LstmpParams p = LstmpParams::create(2, 3, 2, rng, 0.5);
    std::vector<Tensor> inputs;
    for (int s = 0; s < 4; ++s)
      inputs.push_back(Tensor::uniform({2}, 0.5, rng));

    auto run_loss = [&](Tape& t) {
      auto nodes = LstmpNodes::bind(t, p);
      LstmpState state = lstmp_zero_state(t, p);
      Tape::NodeId total = 0;
      for (int s = 0; s < 4; ++s) {
        state = lstmp_step(t, nodes, t.input(inputs[s]), state);
        total = s == 0 ? t.sum(state.m) : t.add(total, t.sum(state.m));
      }
      return total;
    };

    Tape t;
    auto grads = t.backward(run_loss(t));

    ParamRegistry reg;
    p.register_params(reg, "p");
    for (auto& [name, tensor] : reg.entries()) {
      const Tensor saved = *tensor;
      auto f = [&](const Tensor& candidate) {
        *tensor = candidate;
        Tape t2;
        const double v = t2.value(run_loss(t2))[0];
        *tensor = saved;
        return v;
      };
      const double err = finite_difference_check(f, saved, grads.at(tensor));
      INFO("seed ", seed, " param ", name);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("bilstm single-element sequence and output shape") {
  std::mt19937_64 rng(3);
  BiLstmParams p = BiLstmParams::create(4, 5, 3, rng);
  Tape t;
  auto nodes = BiLstmNodes::bind(t, p);
  auto out = bilstm_encode(t, nodes, {t.input(Tensor::uniform({4}, 0.5, rng))});
  REQUIRE(out.size() == 1);
  CHECK(t.value(out[0]).size() == 6);

  CHECK_THROWS_AS(bilstm_encode(t, nodes, {}), std::logic_error);
}

TEST_CASE("bilstm published dims give 340-wide outputs") {
  std::mt19937_64 rng(4);
  BiLstmParams p = BiLstmParams::create(8, 250, 170, rng, 0.01);
  Tape t;
  auto nodes = BiLstmNodes::bind(t, p);
  std::vector<Tape::NodeId> xs;
  for (int i = 0; i < 5; ++i)
    xs.push_back(t.input(Tensor::uniform({8}, 0.1, rng)));
  auto out = bilstm_encode(t, nodes, xs);
  REQUIRE(out.size() == 5);
  for (auto id : out) CHECK(t.value(id).size() == 340);
}

TEST_CASE("palindromic input with mirrored params is its own reverse") {
  std::mt19937_64 rng(5);
  BiLstmParams p = BiLstmParams::create(2, 3, 2, rng, 0.5);
  p.backward = p.forward;  // identical directional params
  std::vector<Tensor> seq = {Tensor({2}, {0.3, -0.2}), Tensor({2}, {1.0, 0.5}),
                             Tensor({2}, {0.3, -0.2})};
  Tape t;
  auto nodes = BiLstmNodes::bind(t, p);
  std::vector<Tape::NodeId> xs;
  for (const auto& v : seq) xs.push_back(t.input(v));
  auto out = bilstm_encode(t, nodes, xs);
  // output[t] = concat(f_t, b_t); reversal swaps f and b halves
  const Tensor& first = t.value(out[0]);
  const Tensor& last = t.value(out[2]);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(first[i] == doctest::Approx(last[2 + i]).epsilon(1e-12));
    CHECK(first[2 + i] == doctest::Approx(last[i]).epsilon(1e-12));
  }
}

TEST_CASE("char encoder output is 40-dim for any word") {
  std::mt19937_64 rng(6);
  CharVocab cv = CharVocab::from_words({"Burbank", "hello", "x"});
  CharEncoderParams p = CharEncoderParams::create(cv, rng);
  Tape t;
  auto nodes = CharEncoderNodes::bind(t, p);
  CHECK(t.value(char_word_encode(t, nodes, "Burbank")).size() == 40);
  CHECK(t.value(char_word_encode(t, nodes, "x")).size() == 40);
  CHECK(t.value(char_word_encode(t, nodes, "zzz")).size() == 40);  // unk chars
  CHECK_THROWS_AS(char_word_encode(t, nodes, ""), std::logic_error);
}

TEST_CASE("char encoder with zero recurrent params emits zero") {
  std::mt19937_64 rng(7);
  CharVocab cv = CharVocab::from_words({"abc"});
  CharEncoderParams p = CharEncoderParams::create(cv, rng);
  ParamRegistry reg;
  p.register_params(reg, "c");
  for (auto& [name, tensor] : reg.entries()) tensor->fill(0.0);
  Tape t;
  auto nodes = CharEncoderNodes::bind(t, p);
  auto out = char_word_encode(t, nodes, "abc");
  for (std::size_t i = 0; i < 40; ++i) CHECK(t.value(out)[i] == 0.0);
}

TEST_CASE("char encoder is case and digit sensitive") {
  std::mt19937_64 rng(42);
  CharVocab cv = CharVocab::from_words({"Burbank", "burbank", "a1", "a2"});
  CharEncoderParams p = CharEncoderParams::create(cv, rng);
  Tape t;
  auto nodes = CharEncoderNodes::bind(t, p);
  auto a = t.value(char_word_encode(t, nodes, "Burbank"));
  auto b = t.value(char_word_encode(t, nodes, "burbank"));
  auto c = t.value(char_word_encode(t, nodes, "a1"));
  auto d = t.value(char_word_encode(t, nodes, "a2"));
  CHECK(!(a == b));
  CHECK(!(c == d));

  // deterministic given params and input
  Tape t2;
  auto nodes2 = CharEncoderNodes::bind(t2, p);
  CHECK(t2.value(char_word_encode(t2, nodes2, "Burbank")) == a);
}
