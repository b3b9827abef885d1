#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "dmk/glove.hpp"
#include "dmk/gradcheck.hpp"
#include "dmk/rng.hpp"

using Catch::Approx;
using namespace dmk;

namespace {

// Independent co-occurrence route: walk every ordered position pair once
// instead of adding both directions per unordered pair.
std::map<std::pair<std::size_t, std::size_t>, double> cooccurrence_oracle(
    const std::vector<std::vector<std::string>>& seqs, const Vocabulary& vocab,
    std::size_t window) {
    std::map<std::pair<std::size_t, std::size_t>, double> x;
    for (const auto& seq : seqs) {
        for (std::size_t p = 0; p < seq.size(); ++p) {
            for (std::size_t q = 0; q < seq.size(); ++q) {
                if (p == q) continue;
                std::size_t dist = p < q ? q - p : p - q;
                if (dist > window) continue;
                x[{vocab.index_of(seq[p]), vocab.index_of(seq[q])}] +=
                    1.0 / static_cast<double>(dist);
            }
        }
    }
    return x;
}

}  // namespace

TEST_CASE("co-occurrence counts distance-weighted pairs in both directions", "[cooc]") {
    Vocabulary vocab = build_vocabulary({{"a", "b", "a"}}, 1);
    std::size_t a = vocab.index_of("a"), b = vocab.index_of("b");

    SECTION("adjacent pair") {
        auto m = build_cooccurrence({{"a", "b"}}, vocab, 5);
        CHECK(m.at(a, b) == 1.0);
        CHECK(m.at(b, a) == 1.0);
        CHECK(m.at(a, a) == 0.0);
    }
    SECTION("repeated word accumulates, including the self pair") {
        auto m = build_cooccurrence({{"a", "b", "a"}}, vocab, 5);
        CHECK(m.at(a, b) == 2.0);
        CHECK(m.at(b, a) == 2.0);
        CHECK(m.at(a, a) == 1.0);  // distance 2 seen from both ends
    }
    SECTION("distance weighting is 1/d") {
        auto m = build_cooccurrence({{"a", "x", "b"}}, vocab, 5);
        CHECK(m.at(a, b) == 0.5);
    }
    SECTION("pairs beyond the window do not count") {
        auto m = build_cooccurrence({{"a", "x", "x", "b"}}, vocab, 2);
        CHECK(m.at(a, b) == 0.0);
        CHECK(m.at(b, a) == 0.0);
    }
    SECTION("sequences do not leak into each other") {
        auto m = build_cooccurrence({{"a"}, {"b"}}, vocab, 5);
        CHECK(m.counts.empty());
    }
    SECTION("unknown tokens count under the OOV index") {
        auto m = build_cooccurrence({{"a", "zzz"}}, vocab, 5);
        CHECK(m.at(a, vocab.oov_index()) == 1.0);
    }
    SECTION("window zero is rejected") {
        REQUIRE_THROWS_AS(build_cooccurrence({}, vocab, 0), std::invalid_argument);
    }
}

TEST_CASE("co-occurrence is symmetric and matches the ordered-pair oracle", "[cooc][oracle]") {
    Rng rng(31);
    std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "rare1", "rare2"};
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<std::string>> seqs;
        std::size_t total = 0;
        std::size_t n_seq = 1 + rng.uniform_index(6);
        for (std::size_t s = 0; s < n_seq && total < 500; ++s) {
            std::vector<std::string> seq;
            std::size_t len = rng.uniform_index(80);
            for (std::size_t i = 0; i < len && total < 500; ++i, ++total)
                seq.push_back(pool[rng.uniform_index(pool.size())]);
            seqs.push_back(std::move(seq));
        }
        Vocabulary vocab = build_vocabulary(seqs, 3);  // rare words fall to OOV
        std::size_t window = 1 + rng.uniform_index(8);
        auto m = build_cooccurrence(seqs, vocab, window);
        auto expected = cooccurrence_oracle(seqs, vocab, window);
        REQUIRE(m.counts.size() == expected.size());
        for (const auto& [key, val] : expected)
            CHECK(m.at(key.first, key.second) == Approx(val).margin(1e-12));
        for (const auto& [key, val] : m.counts)
            CHECK(m.at(key.second, key.first) == Approx(val).margin(1e-12));
    }
}

TEST_CASE("co-occurrence weighting function", "[glove]") {
    CHECK(glove_weight(100.0) == 1.0);
    CHECK(glove_weight(150.0) == 1.0);
    CHECK(glove_weight(1.0) == Approx(std::pow(0.01, 0.75)).epsilon(1e-12));  // ~0.0316
    CHECK(glove_weight(50.0) == Approx(std::pow(0.5, 0.75)).epsilon(1e-12));
    CHECK(glove_weight(8.0, 8.0, 0.75) == 1.0);
}

TEST_CASE("objective is zero exactly when every residual vanishes", "[glove]") {
    CooccurrenceMatrix m;
    m.vocab_size = 2;
    m.counts[{0, 1}] = 4.0;
    m.counts[{1, 0}] = 4.0;

    Rng rng(7);
    GloveParams p(2, 3, rng);
    for (auto* q : p.parameters()) q->value = Tensor::zeros(q->value.shape());
    double half_log = 0.5 * std::log(4.0);
    p.main_bias.value[0] = p.main_bias.value[1] = half_log;
    p.context_bias.value[0] = p.context_bias.value[1] = half_log;
    CHECK(glove_objective(p, m) == Approx(0.0).margin(1e-15));

    p.main_bias.value[0] += 0.1;  // perturb one residual
    double f = glove_weight(4.0);
    CHECK(glove_objective(p, m) == Approx(f * 0.01).epsilon(1e-10));
}

TEST_CASE("analytic objective gradient matches finite differences", "[glove][gradcheck]") {
    std::vector<std::vector<std::string>> seqs = {{"a", "b", "c", "a", "b"},
                                                  {"c", "c", "a", "b"}};
    Vocabulary vocab = build_vocabulary(seqs, 1);
    auto m = build_cooccurrence(seqs, vocab, 3);
    Rng rng(99);
    GloveParams p(vocab.size(), 3, rng);
    // Spread the parameters out so residuals are far from zero.
    for (auto* q : p.parameters())
        for (std::size_t i = 0; i < q->value.size(); ++i) q->value[i] += 0.3 * rng.uniform(-1, 1);

    auto result = gradient_check([&] { return glove_objective(p, m); },
                                 [&] { glove_objective_gradients(p, m); }, p.parameters());
    INFO("worst " << result.parameter << "[" << result.entry << "] analytic " << result.analytic
                  << " numeric " << result.numeric);
    CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("training drives the objective down monotonically", "[glove][train]") {
    std::vector<std::vector<std::string>> seqs;
    std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "park",
                                      "river", "quiet", "sunny", "metro", "cozy"};
    Rng rng(11);
    for (int s = 0; s < 12; ++s) {
        std::vector<std::string> seq;
        for (int i = 0; i < 15; ++i) seq.push_back(words[rng.uniform_index(words.size())]);
        seqs.push_back(std::move(seq));
    }
    Vocabulary vocab = build_vocabulary(seqs, 1);
    REQUIRE(vocab.size() >= 10);
    auto m = build_cooccurrence(seqs, vocab, 5);

    GloveTrainResult r = train_glove(m, vocab, 8, 30, 0.05, 123);
    REQUIRE(r.objective_log.size() == 31);
    for (std::size_t e = 1; e < r.objective_log.size(); ++e)
        CHECK(r.objective_log[e] <= r.objective_log[e - 1] + 1e-9);
    CHECK(r.objective_log.back() < r.objective_log.front());

    // Same seed, same corpus: bit-identical embeddings.
    GloveTrainResult again = train_glove(m, vocab, 8, 30, 0.05, 123);
    REQUIRE(again.table.size() == r.table.size());
    for (std::size_t i = 0; i < r.table.size(); ++i) {
        CHECK(again.table.word_at(i) == r.table.word_at(i));
        for (std::size_t j = 0; j < r.table.dim(); ++j)
            CHECK(again.table.vector_at(i)[j] == r.table.vector_at(i)[j]);
    }

    GloveTrainResult other = train_glove(m, vocab, 8, 30, 0.05, 124);
    bool differs = false;
    for (std::size_t j = 0; j < r.table.dim(); ++j)
        if (other.table.vector_at(0)[j] != r.table.vector_at(0)[j]) differs = true;
    CHECK(differs);
}

TEST_CASE("words that share contexts end up closer than words that never meet",
          "[glove][train]") {
    std::vector<std::vector<std::string>> seqs;
    for (int i = 0; i < 40; ++i) {
        seqs.push_back({"park", "green", "park", "green"});
        seqs.push_back({"stove", "kettle", "stove", "kettle"});
    }
    Vocabulary vocab = build_vocabulary(seqs, 1);
    auto m = build_cooccurrence(seqs, vocab, 4);
    GloveTrainResult r = train_glove(m, vocab, 6, 80, 0.05, 5);

    const Tensor& park = r.table.vector_at(static_cast<std::size_t>(r.table.find("park")));
    const Tensor& green = r.table.vector_at(static_cast<std::size_t>(r.table.find("green")));
    const Tensor& stove = r.table.vector_at(static_cast<std::size_t>(r.table.find("stove")));
    CHECK(cosine_similarity(park, green) > cosine_similarity(park, stove));
}

TEST_CASE("trained table exposes real words plus a mean OOV tail", "[glove][train]") {
    std::vector<std::vector<std::string>> seqs = {{"a", "b", "a", "b"}};
    Vocabulary vocab = build_vocabulary(seqs, 1);
    auto m = build_cooccurrence(seqs, vocab, 2);
    GloveTrainResult r = train_glove(m, vocab, 4, 2, 0.05, 1);
    REQUIRE(r.table.size() == 3);
    CHECK(r.table.word_at(2) == Vocabulary::kOovToken);
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0.5 * (r.table.vector_at(0)[j] + r.table.vector_at(1)[j]);
        CHECK(r.table.vector_at(r.table.oov_index())[j] == Approx(mean).margin(1e-15));
    }
    REQUIRE_THROWS_AS(train_glove(CooccurrenceMatrix{}, vocab, 4, 1, 0.05, 1),
                      std::invalid_argument);
}

TEST_CASE("embedding table lookups and validation", "[embeddings]") {
    EmbeddingTable table({"cat", "dog", Vocabulary::kOovToken},
                         {Tensor::vector({1.0, 0.0}), Tensor::vector({0.0, 1.0}),
                          Tensor::vector({0.5, 0.5})});
    CHECK(table.embed("cat")[0] == 1.0);
    CHECK(table.embed("unknown")[0] == 0.5);  // falls back to OOV
    CHECK(table.find("dog") == 1);
    CHECK(table.find("unknown") == -1);
    CHECK(table.oov_index() == 2);

    REQUIRE_THROWS_WITH(
        EmbeddingTable({"cat", "cat"}, {Tensor::vector({1.0}), Tensor::vector({2.0})}),
        Catch::Matchers::ContainsSubstring("cat"));
    REQUIRE_THROWS_AS(
        EmbeddingTable({"a", "b"}, {Tensor::vector({1.0}), Tensor::vector({1.0, 2.0})}),
        std::invalid_argument);
    REQUIRE_THROWS_AS(EmbeddingTable({}, {}), std::invalid_argument);

    EmbeddingTable no_oov({"a", "b"}, {Tensor::vector({2.0, 4.0}), Tensor::vector({4.0, 8.0})});
    REQUIRE_THROWS_AS(no_oov.embed("missing"), std::logic_error);
    no_oov.append_mean_oov();
    CHECK(no_oov.embed("missing")[0] == 3.0);
    CHECK(no_oov.embed("missing")[1] == 6.0);
}

TEST_CASE("min-max scaling maps the table range onto the unit cube", "[scaling]") {
    EmbeddingTable table({"p", "q", "r"},
                         {Tensor::vector({-2.0, 5.0}), Tensor::vector({2.0, 7.0}),
                          Tensor::vector({0.0, 6.0})});
    ScalingParams s = fit_minmax(table);
    CHECK(s.min == std::vector<double>{-2.0, 5.0});
    CHECK(s.max == std::vector<double>{2.0, 7.0});

    Tensor mid = s.scale(Tensor::vector({0.0, 6.0}));
    CHECK(mid[0] == 0.5);
    CHECK(mid[1] == 0.5);
    Tensor lo = s.scale(Tensor::vector({-2.0, 5.0}));
    CHECK(lo[0] == 0.0);
    CHECK(lo[1] == 0.0);
    Tensor hi = s.scale(Tensor::vector({2.0, 7.0}));
    CHECK(hi[0] == 1.0);
    CHECK(hi[1] == 1.0);

    Tensor v = Tensor::vector({1.3, 6.2});
    Tensor back = s.unscale(s.scale(v));
    CHECK(back[0] == Approx(v[0]).margin(1e-12));
    CHECK(back[1] == Approx(v[1]).margin(1e-12));

    REQUIRE_THROWS_AS(s.scale(Tensor::vector({1.0})), std::invalid_argument);
}

TEST_CASE("min-max fitting rejects degenerate tables", "[scaling]") {
    EmbeddingTable constant_dim({"a", "b"},
                                {Tensor::vector({1.0, 3.0}), Tensor::vector({2.0, 3.0})});
    REQUIRE_THROWS_WITH(fit_minmax(constant_dim), Catch::Matchers::ContainsSubstring("1"));
    EmbeddingTable single({"a"}, {Tensor::vector({1.0})});
    REQUIRE_THROWS_AS(fit_minmax(single), std::invalid_argument);
}

TEST_CASE("scaling parameters round trip through json", "[scaling]") {
    ScalingParams s;
    s.min = {-1.0 / 3.0, 0.25};
    s.max = {2.0 / 7.0, 1.75};
    ScalingParams back = ScalingParams::from_json(s.to_json());
    CHECK(back.min == s.min);  // %.17g is bit-exact for doubles
    CHECK(back.max == s.max);

    REQUIRE_THROWS_WITH(ScalingParams::from_json("{\"min\": [0.0], \"max\": [0.0]}"),
                        Catch::Matchers::ContainsSubstring("max <= min"));
    REQUIRE_THROWS_WITH(ScalingParams::from_json("not json"),
                        Catch::Matchers::ContainsSubstring("JSON"));
}

TEST_CASE("nearest word decoding", "[nearest]") {
    EmbeddingTable table({"cat", "dog", Vocabulary::kOovToken},
                         {Tensor::vector({1.0, 0.0}), Tensor::vector({0.0, 1.0}),
                          Tensor::vector({0.9, 0.1})});

    CHECK(nearest_word(Tensor::vector({0.9, 0.1}), table) == "cat");  // OOV excluded even if exact
    CHECK(nearest_word(Tensor::vector({0.0, 1.0}), table) == "dog");
    CHECK(nearest_word(Tensor::vector({0.5, 0.5}), table) == "cat");  // tie -> lower index

    // Cosine ranks by direction, not distance.
    EmbeddingTable dir({"near", "far"},
                       {Tensor::vector({0.0, 1.0}), Tensor::vector({10.0, 10.0})});
    CHECK(nearest_word(Tensor::vector({3.0, 3.1}), dir) == "near");
    CHECK(nearest_word(Tensor::vector({3.0, 3.1}), dir, nullptr, true) == "far");

    REQUIRE_THROWS_AS(nearest_word(Tensor::vector({1.0, 2.0, 3.0}), table),
                      std::invalid_argument);
}

TEST_CASE("nearest word with scaling compares in scaled space", "[nearest]") {
    // Unscaled, (60, 0.9) is closer to "wide"; per-dimension scaling shrinks
    // the first axis by 100x and "tall" wins.
    EmbeddingTable table({"wide", "tall"},
                         {Tensor::vector({100.0, 0.0}), Tensor::vector({0.0, 1.0})});
    ScalingParams s = fit_minmax(table);
    Tensor query_raw = Tensor::vector({60.0, 0.9});
    CHECK(nearest_word(query_raw, table) == "wide");
    CHECK(nearest_word(s.scale(query_raw), table, &s) == "tall");
}

TEST_CASE("every trained word retrieves itself", "[nearest]") {
    Rng rng(4);
    std::vector<std::string> words;
    std::vector<Tensor> vectors;
    for (int i = 0; i < 20; ++i) {
        words.push_back("w" + std::to_string(i));
        vectors.push_back(uniform_tensor({5}, rng, -1.0, 1.0));
    }
    EmbeddingTable table(std::move(words), std::move(vectors));
    table.append_mean_oov();
    ScalingParams s = fit_minmax(table);
    for (std::size_t i = 0; i + 1 < table.size(); ++i) {
        CHECK(nearest_word(table.vector_at(i), table) == table.word_at(i));
        CHECK(nearest_word(s.scale(table.vector_at(i)), table, &s) == table.word_at(i));
    }
}

TEST_CASE("embeddings save and load as plain text", "[embeddings][io]") {
    EmbeddingTable table({"cat", "dog", Vocabulary::kOovToken},
                         {Tensor::vector({1.25, -0.5}), Tensor::vector({1.0 / 3.0, 2e-7}),
                          Tensor::vector({0.1, 0.2})});
    std::ostringstream out;
    save_embeddings(out, table);

    std::istringstream in(out.str());
    EmbeddingTable back = load_embeddings(in);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.word_at(i) == table.word_at(i));
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(back.vector_at(i)[j] ==
                  Approx(table.vector_at(i)[j]).epsilon(1e-8).margin(1e-15));
    }

    SECTION("a file without an OOV line gets a mean OOV on load") {
        std::istringstream plain("cat 2 4\ndog 4 8\n");
        EmbeddingTable t = load_embeddings(plain);
        REQUIRE(t.size() == 3);
        CHECK(t.vector_at(t.oov_index())[0] == 3.0);
        CHECK(t.vector_at(t.oov_index())[1] == 6.0);
    }
    SECTION("dimension mismatches and empty files are errors") {
        std::istringstream bad("cat 1 2\ndog 3\n");
        REQUIRE_THROWS_WITH(load_embeddings(bad), Catch::Matchers::ContainsSubstring("line 2"));
        std::istringstream empty("");
        REQUIRE_THROWS_AS(load_embeddings(empty), std::runtime_error);
        std::istringstream word_only("cat\n");
        REQUIRE_THROWS_AS(load_embeddings(word_only), std::runtime_error);
    }
}

TEST_CASE("cosine similarity basics", "[nearest]") {
    CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({1, 0})) == Approx(1.0));
    CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})) ==
          Approx(0.0).margin(1e-15));
    CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({-2, 0})) == Approx(-1.0));
    CHECK(cosine_similarity(Tensor::vector({0, 0}), Tensor::vector({1, 0})) == 0.0);
    REQUIRE_THROWS_AS(cosine_similarity(Tensor::vector({1}), Tensor::vector({1, 2})),
                      std::invalid_argument);
}
