#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "dmk/classifier.hpp"
#include "dmk/gradcheck.hpp"

using Catch::Approx;
using namespace dmk;

namespace {

const double kLn3 = std::log(3.0);

EmbeddingTable toy_table() {
    return EmbeddingTable({"cat", "dog", Vocabulary::kOovToken},
                          {Tensor::vector({1.0, 0.0}), Tensor::vector({0.0, 1.0}),
                           Tensor::vector({0.5, 0.5})});
}

// Random embeddings over the corpus vocabulary; enough for the classifier,
// which only needs distinguishable vectors, not trained ones.
EmbeddingTable random_table(const std::vector<LabeledRecord>& records, std::size_t dim,
                            std::uint64_t seed) {
    std::vector<std::vector<std::string>> seqs;
    for (const auto& lr : records) seqs.push_back(tokenize(lr.record.description));
    Vocabulary vocab = build_vocabulary(seqs, 1);
    Rng rng(seed);
    std::vector<std::string> words;
    std::vector<Tensor> vectors;
    for (std::size_t i = 0; i + 1 < vocab.size(); ++i) {
        words.push_back(vocab.token_at(i));
        vectors.push_back(uniform_tensor({dim}, rng, -0.5, 0.5));
    }
    EmbeddingTable table(std::move(words), std::move(vectors));
    table.append_mean_oov();
    return table;
}

std::vector<LabeledRecord> labeled_synthetic(std::size_t n, std::uint64_t seed) {
    auto records = generate_synthetic_corpus(SyntheticSpec::standard(), n, seed);
    return stratify(records).records;
}

}  // namespace

TEST_CASE("encode_description pads and truncates to the slot count", "[encode]") {
    EmbeddingTable table = toy_table();

    EncodedSequence seq = encode_description({"cat", "dog", "zzz"}, table, 5);
    REQUIRE(seq.slots.size() == 5);
    CHECK(seq.length == 3);
    CHECK(seq.slots[0][0] == 1.0);
    CHECK(seq.slots[1][1] == 1.0);
    CHECK(seq.slots[2][0] == 0.5);  // unknown token -> OOV vector
    CHECK(seq.slots[3][0] == 0.0);
    CHECK(seq.slots[4][1] == 0.0);

    EncodedSequence cut = encode_description({"cat", "dog", "cat"}, table, 2);
    CHECK(cut.length == 2);
    CHECK(cut.slots.size() == 2);

    EncodedSequence empty = encode_description({}, table, 3);
    CHECK(empty.length == 0);
    CHECK(empty.slots.size() == 3);
}

TEST_CASE("forward pass emits one logit vector per real step", "[forward]") {
    ClassifierConfig cfg;
    cfg.embedding_dim = 2;
    cfg.hidden_size = 4;
    cfg.max_seq_len = 6;
    Rng rng(3);
    ClassifierModel model(cfg, rng);
    EmbeddingTable table = toy_table();

    EncodedSequence seq = encode_description({"cat", "dog", "cat"}, table, cfg.max_seq_len);
    Tape t;
    auto logits = classifier_forward(t, seq, model);
    REQUIRE(logits.size() == 3);
    for (const Var& l : logits) {
        REQUIRE(l.value().size() == 3);
        // Zero-initialized head: logits are identically zero before training.
        for (std::size_t i = 0; i < 3; ++i) CHECK(l.value()[i] == 0.0);
    }

    EncodedSequence empty = encode_description({}, table, cfg.max_seq_len);
    Tape t2;
    REQUIRE_THROWS_AS(classifier_forward(t2, empty, model), std::invalid_argument);
}

TEST_CASE("loss at the zero-initialized head is the uniform baseline", "[loss]") {
    ClassifierConfig cfg;
    cfg.embedding_dim = 2;
    cfg.hidden_size = 4;
    Rng rng(3);
    ClassifierModel model(cfg, rng);
    EncodedSequence seq = encode_description({"cat", "dog"}, toy_table(), 4);

    for (std::size_t target = 0; target < 3; ++target) {
        Tape t;
        auto logits = classifier_forward(t, seq, model);
        CHECK(classifier_loss(t, logits, target, true).value().item() ==
              Approx(kLn3).margin(1e-12));
        CHECK(classifier_loss(t, logits, target, false).value().item() ==
              Approx(kLn3).margin(1e-12));
    }
}

TEST_CASE("recurrent relu placement changes the logits", "[forward]") {
    ClassifierConfig cfg;
    cfg.embedding_dim = 2;
    cfg.hidden_size = 5;
    Rng rng_a(17), rng_b(17);
    ClassifierConfig cfg_out = cfg;
    cfg_out.recurrent_relu = false;
    ClassifierModel recurrent(cfg, rng_a);
    ClassifierModel on_output(cfg_out, rng_b);
    // Same seed -> identical LSTM weights; give both the same nonzero head.
    Rng head_rng(23);
    Tensor w = uniform_tensor({3, cfg.hidden_size}, head_rng, -1.0, 1.0);
    recurrent.w_out.value = w;
    on_output.w_out.value = w;

    EncodedSequence seq = encode_description({"cat", "dog", "cat", "dog"}, toy_table(), 6);
    auto a = classifier_logits(seq, recurrent);
    auto b = classifier_logits(seq, on_output);
    bool differs = false;
    for (std::size_t s = 0; s < a.size(); ++s)
        for (std::size_t i = 0; i < 3; ++i)
            if (a[s][i] != b[s][i]) differs = true;
    CHECK(differs);
}

TEST_CASE("prediction rules", "[predict]") {
    std::vector<Tensor> steps = {Tensor::vector({2.0, 0.0, 0.0}), Tensor::vector({2.0, 0.0, 0.0}),
                                 Tensor::vector({0.0, 0.0, 3.0})};

    SECTION("ensemble averages per-step log-probabilities") {
        CHECK(ensemble_predict(steps) == 0);  // two confident steps outvote one
        CHECK(final_state_predict(steps) == 2);
        CHECK(majority_vote_predict(steps) == 0);
    }
    SECTION("single step: all rules agree") {
        std::vector<Tensor> one = {Tensor::vector({0.1, 2.0, 0.3})};
        CHECK(ensemble_predict(one) == 1);
        CHECK(final_state_predict(one) == 1);
        CHECK(majority_vote_predict(one) == 1);
    }
    SECTION("uniform logits tie toward class zero") {
        std::vector<Tensor> flat = {Tensor::vector({0.0, 0.0, 0.0}),
                                    Tensor::vector({1.0, 1.0, 1.0})};
        CHECK(ensemble_predict(flat) == 0);
        CHECK(final_state_predict(flat) == 0);
        CHECK(majority_vote_predict(flat) == 0);
    }
    SECTION("per-step shifts cancel in the ensemble") {
        std::vector<Tensor> shifted = steps;
        for (std::size_t i = 0; i < 3; ++i) shifted[1][i] += 7.5;
        CHECK(ensemble_predict(shifted) == ensemble_predict(steps));
    }
    SECTION("vote ties go to the lowest class") {
        std::vector<Tensor> split = {Tensor::vector({0.0, 5.0, 0.0}),
                                     Tensor::vector({0.0, 0.0, 5.0})};
        CHECK(majority_vote_predict(split) == 1);
    }
    SECTION("empty step lists are errors") {
        REQUIRE_THROWS_AS(ensemble_predict({}), std::invalid_argument);
        REQUIRE_THROWS_AS(final_state_predict({}), std::invalid_argument);
        REQUIRE_THROWS_AS(majority_vote_predict({}), std::invalid_argument);
    }
}

TEST_CASE("full classifier gradient matches finite differences", "[classifier][gradcheck]") {
    ClassifierConfig cfg;
    cfg.embedding_dim = 3;
    cfg.hidden_size = 4;
    cfg.max_seq_len = 3;
    Rng rng(41);
    ClassifierModel model(cfg, rng);
    model.w_out.value = uniform_tensor({3, cfg.hidden_size}, rng, -0.5, 0.5);
    model.b_out.value = uniform_tensor({3}, rng, -0.1, 0.1);

    EncodedSequence seq;
    seq.length = 2;
    seq.slots = {uniform_tensor({3}, rng, -1, 1), uniform_tensor({3}, rng, -1, 1),
                 Tensor::zeros({3})};

    for (bool ensemble : {true, false}) {
        auto result = gradient_check(
            [&](Tape& t) {
                return classifier_loss(t, classifier_forward(t, seq, model), 1, ensemble);
            },
            model.parameters());
        INFO("ensemble=" << ensemble << " worst " << result.parameter << "[" << result.entry
                         << "]");
        CHECK(result.max_rel_error < 1e-4);
    }
}

TEST_CASE("encode_records drops empty descriptions with a warning", "[encode]") {
    std::vector<LabeledRecord> records(3);
    records[0].record.id = "ok";
    records[0].record.description = "cat dog";
    records[0].label = PopularityLabel::High;
    records[1].record.id = "blank";
    records[1].record.description = "  !!  ";
    records[1].label = PopularityLabel::Low;
    records[2].record.id = "ok2";
    records[2].record.description = "dog";
    records[2].label = PopularityLabel::Medium;

    std::ostringstream warnings;
    ClassifierDataset ds = encode_records(records, toy_table(), 4, &warnings);
    REQUIRE(ds.sequences.size() == 2);
    CHECK(ds.skipped_empty == 1);
    CHECK(ds.labels == std::vector<std::size_t>{0, 1});
    CHECK(warnings.str().find("blank") != std::string::npos);
}

TEST_CASE("training is deterministic and frozen at zero learning rate", "[train]") {
    auto data = labeled_synthetic(24, 6);
    EmbeddingTable table = random_table(data, 6, 8);
    SplitDataset split = train_test_split(data, 0.75, 9);

    ClassifierConfig cfg;
    cfg.embedding_dim = 6;
    cfg.hidden_size = 6;
    cfg.max_seq_len = 10;
    cfg.epochs = 2;
    cfg.seed = 100;

    SECTION("same seed reproduces every metric bit for bit") {
        auto a = train_classifier(split, table, cfg);
        auto b = train_classifier(split, table, cfg);
        REQUIRE(a.metrics.size() == 2);
        for (std::size_t e = 0; e < a.metrics.size(); ++e) {
            CHECK(a.metrics[e].train_loss == b.metrics[e].train_loss);
            CHECK(a.metrics[e].train_acc == b.metrics[e].train_acc);
            CHECK(a.metrics[e].test_acc == b.metrics[e].test_acc);
        }
        ClassifierConfig other = cfg;
        other.seed = 101;
        auto c = train_classifier(split, table, other);
        CHECK(c.metrics[1].train_loss != a.metrics[1].train_loss);
    }
    SECTION("zero learning rate pins every pre-update loss at the baseline") {
        ClassifierConfig frozen = cfg;
        frozen.lr = 0.0;
        auto r = train_classifier(split, table, frozen);
        for (const EpochMetrics& m : r.metrics)
            CHECK(m.train_loss == Approx(kLn3).margin(1e-12));
    }
    SECTION("first-epoch mean pre-update loss stays near the baseline") {
        auto r = train_classifier(split, table, cfg);
        CHECK(r.metrics[0].train_loss == Approx(kLn3).epsilon(0.02));
    }
}

TEST_CASE("training reduces the loss on separable data", "[train]") {
    auto data = labeled_synthetic(30, 12);
    EmbeddingTable table = random_table(data, 6, 14);
    SplitDataset split = train_test_split(data, 0.8, 2);

    ClassifierConfig cfg;
    cfg.embedding_dim = 6;
    cfg.hidden_size = 8;
    cfg.max_seq_len = 12;
    cfg.epochs = 5;
    cfg.lr = 0.01;
    cfg.seed = 4;
    auto r = train_classifier(split, table, cfg);
    REQUIRE(r.metrics.size() == 5);
    CHECK(r.metrics.back().train_loss < r.metrics.front().train_loss);
}

TEST_CASE("classifier training input validation", "[train]") {
    auto data = labeled_synthetic(6, 20);
    EmbeddingTable table = random_table(data, 6, 8);
    ClassifierConfig cfg;
    cfg.embedding_dim = 6;

    SplitDataset empty;
    empty.test = data;
    REQUIRE_THROWS_AS(train_classifier(empty, table, cfg), std::invalid_argument);

    SplitDataset split = train_test_split(data, 0.5, 1);
    ClassifierConfig wrong_dim = cfg;
    wrong_dim.embedding_dim = 50;
    REQUIRE_THROWS_WITH(train_classifier(split, table, wrong_dim),
                        Catch::Matchers::ContainsSubstring("dimension"));
}

TEST_CASE("metrics serialize to the four-column csv", "[train][io]") {
    std::vector<EpochMetrics> metrics = {{1, 1.0986, 0.33, 0.30}, {2, 0.9, 0.5, 0.45}};
    std::ostringstream out;
    write_metrics_csv(out, metrics);
    std::istringstream in(out.str());
    auto rows = csv::parse(in);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"epoch", "train_loss", "train_acc", "test_acc"});
    CHECK(rows[1][0] == "1");
    CHECK(rows[2][1] == "0.9");
}
