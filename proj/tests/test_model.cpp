#include <doctest.h>

#include <cstdio>

#include "slotfill/model.hpp"
#include "slotfill/synth.hpp"

using namespace slotfill;

namespace {

Vocab tiny_vocab() {
  return Vocab::build({"book", "book", "flight", "flight", "to", "to",
                       "burbank", "burbank"});
}

std::map<std::string, std::vector<std::string>> two_tasks() {
  return {{"alpha", bio_label_set({"Loc", "Date"})},
          {"beta", bio_label_set({"Name"})}};
}

}  // namespace

TEST_CASE("assemble_model init range, determinism, head count") {
  Vocab v = tiny_vocab();
  ModelConfig cfg = ModelConfig::multi_task(
      {{"a", bio_label_set({"X"})}, {"b", bio_label_set({"Y"})},
       {"c", bio_label_set({"Z"})}, {"d", bio_label_set({"W"})}});
  cfg.word_dim = 16;
  cfg.cell_dim = 8;
  cfg.proj_dim = 6;
  Model m = assemble_model(cfg, v, 42);
  CHECK(m.heads.size() == 4);

  ParamRegistry reg = m.registry();
  for (const auto& [name, t] : reg.entries())
    for (std::size_t i = 0; i < t->size(); ++i) {
      CHECK((*t)[i] >= -0.1);
      CHECK((*t)[i] <= 0.1);
    }

  Model m2 = assemble_model(cfg, v, 42);
  for (std::size_t i = 0; i < m.registry().entries().size(); ++i)
    CHECK(*m.registry().entries()[i].second ==
          *m2.registry().entries()[i].second);

  Model m3 = assemble_model(cfg, v, 43);
  CHECK(!(m.embeddings.rows == m3.embeddings.rows));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(ModelConfig{}.validate(), ConfigError);
  ModelConfig open = ModelConfig::multi_task(two_tasks(), VocabMode::kOpen);
  CHECK(open.word_dim == 160);
  CHECK(open.embed_dim() == 200);
  open.word_dim = 200;
  CHECK_THROWS_AS(open.validate(), ConfigError);

  ModelConfig no_o = ModelConfig::single_task("t", {"B-X"});
  CHECK_THROWS_AS(no_o.validate(), ConfigError);
}

TEST_CASE("tag_logits shapes and single-task head input dim") {
  Vocab v = tiny_vocab();
  ModelConfig cfg =
      ModelConfig::single_task("united", bio_label_set({"FromLoc", "ToLoc"}));
  Model m = assemble_model(cfg, v, 1);
  CHECK(m.head("united").W.cols() == 140);  // 2 * proj_dim at 60/100/70

  std::vector<Token> sent = {make_token("book"), make_token("flight"),
                             make_token("to"), make_token("burbank")};
  auto scores = tag_logits(m, "united", sent);
  REQUIRE(scores.size() == 4);
  for (const auto& row : scores) CHECK(row.size() == 5);

  CHECK_THROWS_AS(tag_logits(m, "nope", sent), std::out_of_range);
}

TEST_CASE("multi-task heads share identical encoder activations") {
  Vocab v = tiny_vocab();
  ModelConfig cfg = ModelConfig::multi_task(two_tasks());
  cfg.word_dim = 12;
  cfg.cell_dim = 6;
  cfg.proj_dim = 4;
  Model m = assemble_model(cfg, v, 5);

  std::vector<Token> sent = {make_token("book"), make_token("flight")};
  // Recover encoder outputs by solving nothing: score rows are affine in a
  // shared h, so checking both heads against their own W,b applied to the
  // same tape-built encoder output verifies sharing directly.
  Tape t;
  auto logits_a = build_logits(t, m, "alpha", sent);
  Tape t2;
  auto logits_b = build_logits(t2, m, "beta", sent);

  // Mutating beta's head must not change alpha's logits.
  auto before = tag_logits(m, "alpha", sent);
  m.head("beta").W.fill(9.0);
  m.head("beta").b.fill(-9.0);
  auto after = tag_logits(m, "alpha", sent);
  CHECK(before == after);
}

TEST_CASE("greedy_decode argmax, ties, and oracle") {
  std::vector<std::string> labels = {"O", "B-Loc", "I-Loc"};
  CHECK(greedy_decode({{0, 5, 1}, {0, 1, 7}}, labels) ==
        std::vector<std::string>{"B-Loc", "I-Loc"});
  // exact tie goes to the lower label index
  CHECK(greedy_decode({{2, 2, 1}}, labels) == std::vector<std::string>{"O"});

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> scores(6, std::vector<double>(3));
    for (auto& row : scores)
      for (auto& x : row) x = dist(rng);
    auto got = greedy_decode(scores, labels);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 3; ++j)
        if (scores[i][j] > scores[i][best]) best = j;
      CHECK(got[i] == labels[best]);
    }
  }
}

TEST_CASE("bio_repair spec cases") {
  CHECK(bio_repair({"O", "I-Loc"}) == std::vector<std::string>{"O", "O"});
  CHECK(bio_repair({"B-Loc", "I-Date"}) ==
        std::vector<std::string>{"B-Loc", "O"});
  CHECK(bio_repair({"B-Loc", "I-Loc", "I-Loc"}) ==
        std::vector<std::string>{"B-Loc", "I-Loc", "I-Loc"});
  // post-repair predecessor drives the scan
  CHECK(bio_repair({"B-Loc", "I-Date", "I-Date"}) ==
        std::vector<std::string>{"B-Loc", "O", "O"});
}

TEST_CASE("bio_repair properties on random tag soup") {
  std::vector<std::string> pool = {"O",      "B-Loc",  "I-Loc",
                                   "B-Date", "I-Date", "I-Name"};
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> tags(1 + rng() % 10);
    for (auto& t : tags) t = pool[rng() % pool.size()];
    auto fixed = bio_repair(tags);
    CHECK(is_valid_bio(fixed));
    CHECK(bio_repair(fixed) == fixed);
    if (is_valid_bio(tags)) CHECK(fixed == tags);
  }
}

TEST_CASE("count_parameters matches an independent shape sum") {
  Vocab v = tiny_vocab();
  ModelConfig cfg = ModelConfig::multi_task(two_tasks());
  cfg.word_dim = 10;
  cfg.cell_dim = 5;
  cfg.proj_dim = 3;
  Model m = assemble_model(cfg, v, 2);
  auto counts = count_parameters(m);

  // independent sum from declared shapes
  const std::size_t per_dir = 4 * 5 * 10 + 4 * 5 * 3 + 3 * 5 + 4 * 5 + 3 * 5;
  const std::size_t shared = v.size() * 10 + 2 * per_dir;
  CHECK(counts.shared == shared);
  for (const auto& [task, labels] : two_tasks())
    CHECK(counts.per_task.at(task) == labels.size() * 6 + labels.size());

  std::size_t worst_head = 0;
  for (const auto& [task, n] : counts.per_task)
    worst_head = std::max(worst_head, n);
  CHECK(counts.shared_fraction ==
        doctest::Approx(double(shared) / double(shared + worst_head)));
}

TEST_CASE("default multi config with published inventories shares >= 99%") {
  std::vector<std::string> words;
  for (int i = 0; i < 1999; ++i) {
    words.push_back("w" + std::to_string(i));
    words.push_back("w" + std::to_string(i));
  }
  Vocab v = Vocab::build(words);
  REQUIRE(v.size() == 2000);

  std::map<std::string, std::vector<std::string>> tasks;
  for (const auto& app : default_suite())
    tasks[app.name] = bio_label_set(app.slot_types());
  Model m = assemble_model(ModelConfig::multi_task(tasks), v, 3);
  auto counts = count_parameters(m);
  CHECK(counts.shared_fraction >= 0.99);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Vocab v = tiny_vocab();
  ModelConfig cfg = ModelConfig::multi_task(two_tasks(), VocabMode::kOpen);
  cfg.cell_dim = 6;
  cfg.proj_dim = 4;
  CharVocab cv = CharVocab::from_words({"book", "flight", "to", "burbank"});
  Model m = assemble_model(cfg, v, 7, &cv);

  const std::string path = "model_test.ckpt";
  save_model(path, m);
  Model loaded = load_model(path, v);
  CHECK(loaded.cfg.task_labels == m.cfg.task_labels);
  auto a = m.registry();
  auto b = loaded.registry();
  REQUIRE(a.entries().size() == b.entries().size());
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    CHECK(a.entries()[i].first == b.entries()[i].first);
    CHECK(*a.entries()[i].second == *b.entries()[i].second);
  }

  // same raw word must encode identically through the loaded char encoder
  std::vector<Token> sent = {make_token("burbank")};
  CHECK(tag_logits(m, "alpha", sent) == tag_logits(loaded, "alpha", sent));
  std::remove(path.c_str());
}

TEST_CASE("label order is stable across save and load") {
  Vocab v = tiny_vocab();
  ModelConfig cfg = ModelConfig::single_task("t", bio_label_set({"B", "A", "C"}));
  Model m = assemble_model(cfg, v, 9);
  const std::string path = "model_labels.ckpt";
  save_model(path, m);
  Model loaded = load_model(path, v);
  CHECK(loaded.head("t").labels == m.head("t").labels);
  std::remove(path.c_str());
}
