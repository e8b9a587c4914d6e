#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "medner/embedding.hpp"

using namespace medner;

namespace {

AnnotatedDocument doc_from(const std::vector<std::string>& lines, const std::string& id = "d") {
  AnnotatedDocument d;
  d.doc_id = id;
  for (const auto& l : lines) d.lines.push_back(split_whitespace(l));
  return d;
}

std::pair<std::vector<AnnotatedDocument>, std::vector<SentenceMap>> with_maps(
    std::vector<AnnotatedDocument> docs) {
  std::vector<SentenceMap> maps;
  for (const auto& d : docs) maps.push_back(split_sentences(d));
  return {std::move(docs), std::move(maps)};
}

double cosine(const float* a, const float* b, int m) {
  double dot = 0, na = 0, nb = 0;
  for (int j = 0; j < m; ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("build_vocab holds both corpora plus the reserved tokens") {
  auto docs = std::vector<AnnotatedDocument>{doc_from({"a b"})};
  auto vocab = build_vocab(docs, {});
  REQUIRE(vocab.size() == 6);  // 4 reserved + a + b
  REQUIRE(vocab.contains("a"));
  REQUIRE(vocab.id_of(Vocabulary::pad_token()) == Vocabulary::kPad);

  auto empty = build_vocab({}, {});
  REQUIRE(empty.size() == 4);

  auto held_out = doc_from({"a zzz"});
  REQUIRE(vocab.id_or_unk("zzz") == Vocabulary::kUnk);
  (void)held_out;
}

TEST_CASE("windows are one per token and PAD-filled at sentence bounds") {
  auto [docs, maps] = with_maps({doc_from({"a b c"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  REQUIRE(windows.size() == 3);
  const auto& mid = windows[1];
  REQUIRE(mid.center == vocab.id_of("b"));
  int pads = 0, real = 0;
  for (int c : mid.context) (c == Vocabulary::kPad ? pads : real)++;
  REQUIRE(pads == 8);
  REQUIRE(real == 2);
}

TEST_CASE("a one-token sentence gets an all-PAD context") {
  auto [docs, maps] = with_maps({doc_from({"alone"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  REQUIRE(windows.size() == 1);
  for (int c : windows[0].context) REQUIRE(c == Vocabulary::kPad);
}

TEST_CASE("an 11-token sentence centered mid-window has no PAD") {
  auto [docs, maps] = with_maps({doc_from({"t0 t1 t2 t3 t4 t5 t6 t7 t8 t9 t10"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  for (int c : windows[5].context) REQUIRE(c != Vocabulary::kPad);
}

TEST_CASE("windows never cross sentence boundaries") {
  auto [docs, maps] = with_maps({doc_from({"Took aspirin. Then slept"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  REQUIRE(windows.size() == 4);
  // center "aspirin." (index 1): only "took" is in its sentence
  int real = 0;
  for (int c : windows[1].context)
    if (c != Vocabulary::kPad) ++real;
  REQUIRE(real == 1);
}

TEST_CASE("window count equals total token occurrences") {
  Rng rng(12);
  std::vector<AnnotatedDocument> docs;
  std::size_t tokens = 0;
  for (int i = 0; i < 10; ++i) {
    std::vector<std::string> lines;
    for (int l = 0; l < 3; ++l) {
      std::string line;
      const int n = 1 + static_cast<int>(rng.uniform_int(7));
      for (int t = 0; t < n; ++t) line += "w" + std::to_string(rng.uniform_int(30)) + " ";
      lines.push_back(line);
      tokens += static_cast<std::size_t>(n);
    }
    docs.push_back(doc_from(lines, "d" + std::to_string(i)));
  }
  auto [ds, maps] = with_maps(docs);
  auto vocab = build_vocab(ds, {});
  REQUIRE(make_windows(ds, maps, vocab).size() == tokens);
}

TEST_CASE("epochs=0 returns the seeded initialization") {
  auto [docs, maps] = with_maps({doc_from({"a b a b a b"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 0;
  cfg.seed = 3;
  auto e1 = train_cbow(windows, vocab, cfg);
  auto e2 = train_cbow(windows, vocab, cfg);
  REQUIRE(e1.weights.raw() == e2.weights.raw());
  // PAD row is zero from the start
  for (int j = 0; j < cfg.dim; ++j) REQUIRE(e1.row(Vocabulary::kPad)[j] == 0.0f);
  bool any_nonzero = false;
  for (int j = 0; j < cfg.dim; ++j) any_nonzero |= e1.row(vocab.id_of("a"))[j] != 0.0f;
  REQUIRE(any_nonzero);
}

TEST_CASE("training reduces the loss on a repetitive corpus") {
  std::vector<std::string> lines(20, "a b a b a b a b");
  auto [docs, maps] = with_maps({doc_from(lines)});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 5;
  cfg.seed = 3;
  for (auto algo : {EmbedAlgo::Cbow, EmbedAlgo::Csg}) {
    auto E = algo == EmbedAlgo::Cbow ? train_cbow(windows, vocab, cfg)
                                     : train_csg(windows, vocab, cfg);
    REQUIRE(E.epoch_loss.size() == 5);
    REQUIRE(E.epoch_loss.back() < E.epoch_loss.front());
  }
}

TEST_CASE("empty window stream is an error when training") {
  Vocabulary vocab;
  EmbedTrainConfig cfg;
  cfg.epochs = 1;
  REQUIRE_THROWS_AS(train_cbow({}, vocab, cfg), EmptyWindowStream);
}

TEST_CASE("full softmax loss at initialization is log V") {
  auto [docs, maps] = with_maps({doc_from({"a b c"})});
  auto vocab = build_vocab(docs, {});  // V = 7
  auto windows = make_windows(docs, maps, vocab);
  std::vector<ContextWindow> one = {windows[1]};
  EmbedTrainConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 1;
  cfg.negatives = 0;  // full softmax
  cfg.seed = 5;
  auto E = train_cbow(one, vocab, cfg);
  // output weights start at zero, so the first prediction is uniform over V
  REQUIRE(E.epoch_loss[0] == Catch::Approx(std::log(static_cast<double>(vocab.size()))).epsilon(1e-9));

  cfg.epochs = 3;
  auto E3 = train_cbow(one, vocab, cfg);
  REQUIRE(E3.epoch_loss[2] < E3.epoch_loss[0]);
}

TEST_CASE("two-topic corpus separates intra from inter cosine for both algorithms") {
  Rng gen(77);
  std::vector<AnnotatedDocument> docs;
  for (int i = 0; i < 80; ++i) {
    const char topic = i % 2 == 0 ? 'a' : 'b';
    std::string line;
    for (int t = 0; t < 20; ++t)
      line += std::string(1, topic) + std::to_string(gen.uniform_int(15)) + " ";
    docs.push_back(doc_from({line}, "t" + std::to_string(i)));
  }
  auto [ds, maps] = with_maps(docs);
  auto vocab = build_vocab(ds, {});
  auto windows = make_windows(ds, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.seed = 11;

  for (auto algo : {EmbedAlgo::Cbow, EmbedAlgo::Csg}) {
    auto E = algo == EmbedAlgo::Cbow ? train_cbow(windows, vocab, cfg)
                                     : train_csg(windows, vocab, cfg);
    std::vector<int> as, bs;
    for (int i = 0; i < 15; ++i) {
      if (vocab.contains("a" + std::to_string(i))) as.push_back(vocab.id_of("a" + std::to_string(i)));
      if (vocab.contains("b" + std::to_string(i))) bs.push_back(vocab.id_of("b" + std::to_string(i)));
    }
    double intra = 0, inter = 0;
    long ni = 0, nx = 0;
    for (std::size_t i = 0; i < as.size(); ++i)
      for (std::size_t j = i + 1; j < as.size(); ++j)
        intra += cosine(E.row(as[i]), E.row(as[j]), cfg.dim), ++ni;
    for (std::size_t i = 0; i < bs.size(); ++i)
      for (std::size_t j = i + 1; j < bs.size(); ++j)
        intra += cosine(E.row(bs[i]), E.row(bs[j]), cfg.dim), ++ni;
    for (int a : as)
      for (int b : bs) inter += cosine(E.row(a), E.row(b), cfg.dim), ++nx;
    intra /= static_cast<double>(ni);
    inter /= static_cast<double>(nx);
    INFO(embed_algo_name(algo) << " intra " << intra << " inter " << inter);
    REQUIRE(intra > inter);
  }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  auto [docs, maps] = with_maps({doc_from({"x y z x y z x", "y x z"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 12;
  cfg.epochs = 3;
  cfg.seed = 21;
  auto a = train_csg(windows, vocab, cfg);
  auto b = train_csg(windows, vocab, cfg);
  REQUIRE(a.weights.raw() == b.weights.raw());
}

TEST_CASE("PAD row never receives updates") {
  auto [docs, maps] = with_maps({doc_from({"a", "b c d e f g h"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 4;
  cfg.seed = 2;
  for (auto algo : {EmbedAlgo::Cbow, EmbedAlgo::Csg}) {
    auto E = algo == EmbedAlgo::Cbow ? train_cbow(windows, vocab, cfg)
                                     : train_csg(windows, vocab, cfg);
    for (int j = 0; j < cfg.dim; ++j) REQUIRE(E.row(Vocabulary::kPad)[j] == 0.0f);
  }
}

TEST_CASE("embeddings text format round-trips and validates") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "medner_embed_test";
  fs::create_directories(dir);
  auto path = (dir / "emb.txt").string();

  auto [docs, maps] = with_maps({doc_from({"a b c"})});
  auto vocab = build_vocab(docs, {});
  auto windows = make_windows(docs, maps, vocab);
  EmbedTrainConfig cfg;
  cfg.dim = 5;
  cfg.epochs = 1;
  cfg.seed = 8;
  auto E = train_cbow(windows, vocab, cfg);
  save_embeddings(E, vocab, path);

  auto loaded = load_embeddings(path);
  REQUIRE(loaded.matrix.dim == 5);
  REQUIRE(loaded.vocab.size() == vocab.size());
  for (std::int64_t i = 0; i < E.weights.size(); ++i)
    REQUIRE(loaded.matrix.weights[i] == Catch::Approx(E.weights[i]).margin(5e-7));

  // saving the loaded copy reproduces the file byte for byte
  auto path2 = (dir / "emb2.txt").string();
  save_embeddings(loaded.matrix, loaded.vocab, path2);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  REQUIRE(s1 == s2);

  SECTION("header row-count mismatch") {
    std::ofstream os(path);
    os << "5 3\nPAD 0 0 0\n<num> 0 0 0\n<unk> 0 0 0\n<end-of-output> 0 0 0\n";
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(path), MalformedHeader);
  }
  SECTION("empty file") {
    std::ofstream os(path);
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(path), MalformedHeader);
  }
  SECTION("row with wrong dimension") {
    std::ofstream os(path);
    os << "4 3\nPAD 0 0 0\n<num> 0 0\n<unk> 0 0 0\n<end-of-output> 0 0 0\n";
    os.close();
    REQUIRE_THROWS_AS(load_embeddings(path), DimensionMismatch);
  }
  fs::remove_all(dir);
}
