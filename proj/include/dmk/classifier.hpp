#pragma once

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmk/adam.hpp"
#include "dmk/corpus.hpp"
#include "dmk/csv.hpp"
#include "dmk/glove.hpp"
#include "dmk/lstm.hpp"
#include "dmk/rng.hpp"
#include "dmk/tape.hpp"

namespace dmk {

struct ClassifierConfig {
    static constexpr std::size_t kClasses = 3;

    std::size_t hidden_size = 16;
    std::size_t embedding_dim = 50;
    std::size_t max_seq_len = 50;  // tokens kept per description
    bool ensemble = true;          // per-step losses and mean-log-prob prediction
    bool majority_vote = false;    // alternative ensembling: per-step argmax votes
    // The recurrent hidden state is passed through ReLU before entering the
    // next step; logits always come from the raw hidden state. Turning this
    // off moves the ReLU to just before the output projection instead.
    bool recurrent_relu = true;
    std::size_t epochs = 10;
    double lr = 1e-3;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
};

inline void validate(const ClassifierConfig& c) {
    if (c.hidden_size < 1) throw std::invalid_argument("classifier: hidden_size must be >= 1");
    if (c.embedding_dim < 1) throw std::invalid_argument("classifier: embedding_dim must be >= 1");
    if (c.max_seq_len < 1) throw std::invalid_argument("classifier: max_seq_len must be >= 1");
}

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

// Fixed-length slot sequence: the first max_seq_len token embeddings, zero-
// padded, with the pre-padding length kept alongside.
struct EncodedSequence {
    std::vector<Tensor> slots;
    std::size_t length = 0;
};

inline EncodedSequence encode_description(const std::vector<std::string>& tokens,
                                          const EmbeddingTable& table, std::size_t max_seq_len) {
    EncodedSequence seq;
    seq.length = std::min(tokens.size(), max_seq_len);
    seq.slots.reserve(max_seq_len);
    for (std::size_t t = 0; t < seq.length; ++t) seq.slots.push_back(table.embed(tokens[t]));
    for (std::size_t t = seq.length; t < max_seq_len; ++t)
        seq.slots.push_back(Tensor::zeros({table.dim()}));
    return seq;
}

// LSTM over the true sequence length with a shared linear head per step.
// The output head starts at zero so the initial logits are all equal and the
// first-epoch loss sits at the uniform baseline ln 3.
struct ClassifierModel {
    ClassifierConfig config;
    LstmWeights lstm;
    Parameter w_out, b_out;

    explicit ClassifierModel(const ClassifierConfig& cfg, Rng& rng)
        : config(cfg),
          lstm(cfg.embedding_dim, cfg.hidden_size, rng, cfg.init_scale, "classifier.lstm"),
          w_out("classifier.w_out",
                Tensor::zeros({ClassifierConfig::kClasses, cfg.hidden_size})),
          b_out("classifier.b_out", Tensor::zeros({ClassifierConfig::kClasses})) {
        validate(cfg);
    }

    std::vector<Parameter*> parameters() {
        auto out = lstm.parameters();
        out.push_back(&w_out);
        out.push_back(&b_out);
        return out;
    }
};

// One logit vector per real step (padding positions are never run).
inline std::vector<Var> classifier_forward(Tape& t, const EncodedSequence& seq,
                                           ClassifierModel& model) {
    if (seq.length == 0)
        throw std::invalid_argument("classifier_forward: zero-length sequence");
    Var w = t.param(model.w_out);
    Var b = t.param(model.b_out);
    LstmState state = lstm_initial_state(t, model.config.hidden_size);
    std::vector<Var> logits;
    logits.reserve(seq.length);
    for (std::size_t step = 0; step < seq.length; ++step) {
        Var x = t.constant(seq.slots[step]);
        state = lstm_cell(t, x, state, model.lstm);
        Var head_in = model.config.recurrent_relu ? state.h : t.relu(state.h);
        logits.push_back(t.linear(w, b, head_in));
        if (model.config.recurrent_relu) state.h = t.relu(state.h);
    }
    return logits;
}

// Mean over steps of the per-step cross-entropy (ensembling on), or the
// final step's cross-entropy alone (ensembling off).
inline Var classifier_loss(Tape& t, const std::vector<Var>& logits, std::size_t target,
                           bool ensemble) {
    if (logits.empty()) throw std::invalid_argument("classifier_loss: no steps");
    if (!ensemble) return t.cross_entropy(logits.back(), target);
    Var total = t.cross_entropy(logits[0], target);
    for (std::size_t s = 1; s < logits.size(); ++s)
        total = t.add(total, t.cross_entropy(logits[s], target));
    return t.scale(total, 1.0 / static_cast<double>(logits.size()));
}

inline std::vector<Tensor> classifier_logits(const EncodedSequence& seq, ClassifierModel& model) {
    Tape t;
    std::vector<Tensor> out;
    for (Var v : classifier_forward(t, seq, model)) out.push_back(v.value());
    return out;
}

namespace detail {

inline std::size_t argmax_low_tie(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace detail

// argmax over classes of the mean per-step log-softmax; ties go to the
// lowest class index.
inline std::size_t ensemble_predict(const std::vector<Tensor>& per_step_logits) {
    if (per_step_logits.empty()) throw std::invalid_argument("ensemble_predict: no steps");
    Tensor acc = log_softmax(per_step_logits[0]);
    for (std::size_t s = 1; s < per_step_logits.size(); ++s) {
        Tensor lp = log_softmax(per_step_logits[s]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += lp[i];
    }
    return detail::argmax_low_tie(acc);
}

inline std::size_t final_state_predict(const std::vector<Tensor>& per_step_logits) {
    if (per_step_logits.empty()) throw std::invalid_argument("final_state_predict: no steps");
    return detail::argmax_low_tie(per_step_logits.back());
}

// Most frequent per-step argmax; ties go to the lowest class index.
inline std::size_t majority_vote_predict(const std::vector<Tensor>& per_step_logits) {
    if (per_step_logits.empty()) throw std::invalid_argument("majority_vote_predict: no steps");
    std::vector<std::size_t> votes(per_step_logits[0].size(), 0);
    for (const Tensor& l : per_step_logits) ++votes[detail::argmax_low_tie(l)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < votes.size(); ++i)
        if (votes[i] > votes[best]) best = i;
    return best;
}

inline std::size_t predict_class(const EncodedSequence& seq, ClassifierModel& model) {
    std::vector<Tensor> logits = classifier_logits(seq, model);
    if (!model.config.ensemble) return final_state_predict(logits);
    if (model.config.majority_vote) return majority_vote_predict(logits);
    return ensemble_predict(logits);
}

// ---------------------------------------------------------------------------
// Training.

struct ClassifierDataset {
    std::vector<EncodedSequence> sequences;
    std::vector<std::size_t> labels;
    std::size_t skipped_empty = 0;
};

inline ClassifierDataset encode_records(const std::vector<LabeledRecord>& records,
                                        const EmbeddingTable& table, std::size_t max_seq_len,
                                        std::ostream* warnings = nullptr) {
    ClassifierDataset ds;
    for (const LabeledRecord& lr : records) {
        EncodedSequence seq = encode_description(tokenize(lr.record.description), table,
                                                 max_seq_len);
        if (seq.length == 0) {
            ++ds.skipped_empty;
            if (warnings)
                *warnings << "warning: skipping record '" << lr.record.id
                          << "' with empty description\n";
            continue;
        }
        ds.sequences.push_back(std::move(seq));
        ds.labels.push_back(static_cast<std::size_t>(lr.label));
    }
    return ds;
}

inline double classifier_accuracy(const ClassifierDataset& ds, ClassifierModel& model) {
    if (ds.sequences.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.sequences.size(); ++i)
        if (predict_class(ds.sequences[i], model) == ds.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.sequences.size());
}

struct ClassifierTrainResult {
    ClassifierModel model;
    std::vector<EpochMetrics> metrics;
};

// Per-record Adam updates in a seeded shuffled order each epoch. train_loss
// is the mean of the losses observed before each update; accuracies are
// measured with the epoch's final parameters.
inline ClassifierTrainResult train_classifier(const SplitDataset& split,
                                              const EmbeddingTable& table,
                                              const ClassifierConfig& config,
                                              std::ostream* warnings = nullptr) {
    validate(config);
    if (split.train.empty()) throw std::invalid_argument("train_classifier: empty train set");
    if (table.dim() != config.embedding_dim)
        throw std::invalid_argument("train_classifier: table dimension " +
                                    std::to_string(table.dim()) + " does not match config " +
                                    std::to_string(config.embedding_dim));

    ClassifierDataset train = encode_records(split.train, table, config.max_seq_len, warnings);
    ClassifierDataset test = encode_records(split.test, table, config.max_seq_len, warnings);
    if (train.sequences.empty())
        throw std::invalid_argument("train_classifier: every train record has an empty description");

    Rng init_rng = Rng(config.seed).substream("init");
    ClassifierTrainResult result{ClassifierModel(config, init_rng), {}};
    ClassifierModel& model = result.model;
    Adam optimizer(model.parameters(), AdamConfig{config.lr, 0.9, 0.999, 1e-8});

    Rng order_rng = Rng(config.seed).substream("order");
    std::vector<std::size_t> order(train.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            Tape t;
            std::vector<Var> logits = classifier_forward(t, train.sequences[idx], model);
            Var loss = classifier_loss(t, logits, train.labels[idx], config.ensemble);
            loss_sum += loss.value().item();
            t.backward(loss);
            optimizer.step();
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(order.size());
        m.train_acc = classifier_accuracy(train, model);
        m.test_acc = classifier_accuracy(test, model);
        result.metrics.push_back(m);
    }
    return result;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics) {
    csv::write_row(out, {"epoch", "train_loss", "train_acc", "test_acc"});
    for (const EpochMetrics& m : metrics) {
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            return std::string(buf);
        };
        csv::write_row(out, {std::to_string(m.epoch), num(m.train_loss), num(m.train_acc),
                             num(m.test_acc)});
    }
}

}  // namespace dmk
