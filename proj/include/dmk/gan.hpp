#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmk/adam.hpp"
#include "dmk/classifier.hpp"
#include "dmk/corpus.hpp"
#include "dmk/csv.hpp"
#include "dmk/glove.hpp"
#include "dmk/rng.hpp"
#include "dmk/tape.hpp"

namespace dmk {

struct GanConfig {
    double gamma = 0.00045;
    std::size_t seq_len = 12;        // word slots T in the generator output
    std::size_t embedding_dim = 50;  // d
    std::size_t noise_dim = 64;      // Z
    std::size_t gen_hidden = 128;
    std::size_t disc_hidden = 128;
    std::size_t disc_steps = 2000;
    std::size_t gen_steps = 50;
    std::size_t cycles = 3;
    double lr = 1e-3;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
    // Drops the generator's final sigmoid and clamps into (0,1) instead.
    bool paper_literal_generator = false;
    // Computes the attention term against raw rather than min-max-scaled
    // keyword embeddings.
    bool raw_keyword_space = false;
    // Restricts the real-sample pool to High-popularity records.
    bool high_only = true;

    std::size_t output_dim() const { return seq_len * embedding_dim; }
};

inline void validate(const GanConfig& c) {
    if (c.gamma < 0.0) throw std::invalid_argument("gan: gamma must be >= 0");
    if (c.seq_len < 1) throw std::invalid_argument("gan: seq_len must be >= 1");
    if (c.embedding_dim < 1) throw std::invalid_argument("gan: embedding_dim must be >= 1");
    if (c.noise_dim < 1) throw std::invalid_argument("gan: noise_dim must be >= 1");
    if (c.gen_hidden < 1 || c.disc_hidden < 1)
        throw std::invalid_argument("gan: hidden widths must be >= 1");
    if (c.lr <= 0.0) throw std::invalid_argument("gan: lr must be > 0");
}

struct KeywordSet {
    std::vector<std::string> words;
};

// Keyword embeddings, min-max scaled into the generator's output space
// unless raw space is requested. Every keyword must resolve to a real
// (non-OOV) table entry.
inline std::vector<Tensor> resolve_keywords(const KeywordSet& keywords,
                                            const EmbeddingTable& table,
                                            const ScalingParams* scaling) {
    std::vector<Tensor> out;
    out.reserve(keywords.words.size());
    for (const std::string& word : keywords.words) {
        long idx = table.find(word);
        if (idx < 0 || (table.has_oov() && static_cast<std::size_t>(idx) == table.oov_index()))
            throw std::runtime_error("keyword '" + word + "' is not in the vocabulary");
        const Tensor& e = table.vector_at(static_cast<std::size_t>(idx));
        out.push_back(scaling ? scaling->scale(e) : e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Three-layer feedforward blocks.

struct FeedForward {
    std::size_t input_dim, hidden_dim, output_dim;
    Parameter w1, b1, w2, b2, w3, b3;

    FeedForward(const std::string& prefix, std::size_t input, std::size_t hidden,
                std::size_t output, Rng& rng, double init_scale)
        : input_dim(input),
          hidden_dim(hidden),
          output_dim(output),
          w1(prefix + ".w1", uniform_tensor({hidden, input}, rng, -init_scale, init_scale)),
          b1(prefix + ".b1", Tensor::zeros({hidden})),
          w2(prefix + ".w2", uniform_tensor({hidden, hidden}, rng, -init_scale, init_scale)),
          b2(prefix + ".b2", Tensor::zeros({hidden})),
          w3(prefix + ".w3", uniform_tensor({output, hidden}, rng, -init_scale, init_scale)),
          b3(prefix + ".b3", Tensor::zeros({output})) {}

    std::vector<Parameter*> parameters() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
};

namespace detail {

// Frozen parameters enter the tape as constants, so no gradient can reach
// them by construction.
inline Var ff_leaf(Tape& t, Parameter& p, bool frozen) {
    return frozen ? t.constant(p.value) : t.param(p);
}

}  // namespace detail

// linear -> ELU -> linear -> sigmoid -> linear -> sigmoid. The closing
// sigmoid keeps every output in (0,1); the paper-literal variant leaves the
// last layer bare and clamps into the open interval instead.
inline Var generator_forward(Tape& t, Var z, FeedForward& gen, const GanConfig& cfg,
                             bool frozen = false) {
    auto leaf = [&](Parameter& p) { return detail::ff_leaf(t, p, frozen); };
    Var h1 = t.elu(t.linear(leaf(gen.w1), leaf(gen.b1), z));
    Var h2 = t.sigmoid(t.linear(leaf(gen.w2), leaf(gen.b2), h1));
    Var out = t.linear(leaf(gen.w3), leaf(gen.b3), h2);
    if (cfg.paper_literal_generator) return t.clamp(out, kProbClampEps, 1.0 - kProbClampEps);
    return t.sigmoid(out);
}

// linear -> ELU -> linear -> ELU -> linear -> sigmoid, to a scalar
// probability that the input came from real data.
inline Var discriminator_forward(Tape& t, Var x, FeedForward& disc, bool frozen = false) {
    auto leaf = [&](Parameter& p) { return detail::ff_leaf(t, p, frozen); };
    Var h1 = t.elu(t.linear(leaf(disc.w1), leaf(disc.b1), x));
    Var h2 = t.elu(t.linear(leaf(disc.w2), leaf(disc.b2), h1));
    return t.sigmoid(t.linear(leaf(disc.w3), leaf(disc.b3), h2));
}

// ---------------------------------------------------------------------------
// DMK loss: BCE(x,y) - gamma * delta(g,k), where delta is the total dot-
// product attention sum_i sum_j g_j . e(k_i) between every generated word
// slot and every keyword embedding.

// delta as a single dot product of g with the keyword sum tiled across all
// slots; its gradient with respect to every slot g_j is sum_i e(k_i).
inline Var delta_attention(Tape& t, Var g, const std::vector<Tensor>& keyword_vectors) {
    if (keyword_vectors.empty())
        throw std::invalid_argument("delta_attention: empty keyword set");
    const Tensor& gv = g.value();
    std::size_t d = keyword_vectors[0].size();
    if (gv.rank() != 1 || gv.size() % d != 0)
        throw std::invalid_argument("delta_attention: output shape " + gv.shape_string() +
                                    " is not a whole number of " + std::to_string(d) +
                                    "-dimensional slots");
    Tensor ksum = Tensor::zeros({d});
    for (const Tensor& k : keyword_vectors) {
        if (k.size() != d)
            throw std::invalid_argument("delta_attention: keyword dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) ksum[j] += k[j];
    }
    Tensor tiled = Tensor::zeros({gv.size()});
    for (std::size_t j = 0; j < gv.size(); ++j) tiled[j] = ksum[j % d];
    return t.dot(g, t.constant(std::move(tiled)));
}

// Plain-value counterpart for logging and tests.
inline double delta_attention_value(const Tensor& g, const std::vector<Tensor>& keyword_vectors) {
    Tape t;
    return delta_attention(t, t.constant(g), keyword_vectors).value().item();
}

inline Var dmk_loss(Tape& t, Var pred, double label, Var g,
                    const std::vector<Tensor>& keyword_vectors, double gamma) {
    Var bce = t.bce_loss(pred, label);
    if (keyword_vectors.empty()) {
        if (gamma != 0.0)
            throw std::invalid_argument("dmk_loss: keywords required when gamma > 0");
        return bce;
    }
    Var delta = delta_attention(t, g, keyword_vectors);
    return t.sub(bce, t.scale(delta, gamma));
}

// ---------------------------------------------------------------------------
// Real samples.

inline std::vector<const ListingRecord*> real_pool(const std::vector<LabeledRecord>& dataset,
                                                   bool high_only) {
    std::vector<const ListingRecord*> pool;
    for (const LabeledRecord& lr : dataset)
        if (!high_only || lr.label == PopularityLabel::High) pool.push_back(&lr.record);
    return pool;
}

// One real sample: a uniformly drawn record's first T token embeddings,
// min-max scaled and flattened; short descriptions are padded with the
// scaled OOV vector.
inline Tensor real_batch(const std::vector<const ListingRecord*>& pool,
                         const EmbeddingTable& table, const ScalingParams& scaling,
                         std::size_t seq_len, Rng& rng) {
    if (pool.empty()) throw std::runtime_error("real_batch: no records to sample");
    const ListingRecord& rec = *pool[rng.uniform_index(pool.size())];
    std::vector<std::string> tokens = tokenize(rec.description);
    Tensor out = Tensor::zeros({seq_len * table.dim()});
    Tensor pad = scaling.scale(table.vector_at(table.oov_index()));
    for (std::size_t slot = 0; slot < seq_len; ++slot) {
        Tensor v = slot < tokens.size() ? scaling.scale(table.embed(tokens[slot])) : pad;
        for (std::size_t j = 0; j < table.dim(); ++j) out[slot * table.dim() + j] = v[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training.

struct StepLogRow {
    std::size_t cycle = 0;
    std::string phase;  // "disc" or "gen"
    std::size_t step = 0;
    std::optional<double> loss_d;
    std::optional<double> loss_g;
    std::optional<double> delta;
    double gamma = 0.0;
};

inline void write_step_log_csv(std::ostream& out, const std::vector<StepLogRow>& log) {
    csv::write_row(out, {"cycle", "phase", "step", "loss_d", "loss_g", "delta", "gamma"});
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (const StepLogRow& r : log)
        csv::write_row(out, {std::to_string(r.cycle), r.phase, std::to_string(r.step),
                             opt(r.loss_d), opt(r.loss_g), opt(r.delta), num(r.gamma)});
}

struct GanModel {
    FeedForward generator;
    FeedForward discriminator;

    GanModel(const GanConfig& cfg, Rng& rng)
        : generator("generator", cfg.noise_dim, cfg.gen_hidden, cfg.output_dim(), rng,
                    cfg.init_scale),
          discriminator("discriminator", cfg.output_dim(), cfg.disc_hidden, 1, rng,
                        cfg.init_scale) {}

    std::vector<Parameter*> parameters() {
        auto out = generator.parameters();
        for (Parameter* p : discriminator.parameters()) out.push_back(p);
        return out;
    }
};

struct GanTrainResult {
    GanModel model;
    std::vector<StepLogRow> log;
};

inline Tensor draw_noise(const GanConfig& cfg, Rng& rng) {
    return uniform_tensor({cfg.noise_dim}, rng, 0.0, 1.0);
}

// Alternating schedule, per cycle: disc_steps discriminator updates (one
// real sample labeled 1 plus one generated sample labeled 0, generator
// frozen), then gen_steps generator updates (DMK with label 1 on the
// discriminator's verdict, discriminator frozen). Adam on both sides.
inline GanTrainResult train_gan(const GanConfig& cfg, const std::vector<LabeledRecord>& dataset,
                                const EmbeddingTable& table, const ScalingParams& scaling,
                                const KeywordSet& keywords) {
    validate(cfg);
    if (table.dim() != cfg.embedding_dim)
        throw std::invalid_argument("train_gan: table dimension " + std::to_string(table.dim()) +
                                    " does not match config " +
                                    std::to_string(cfg.embedding_dim));
    if (cfg.gamma > 0.0 && keywords.words.empty())
        throw std::invalid_argument("train_gan: keywords required when gamma > 0");
    std::vector<Tensor> keyword_vectors =
        resolve_keywords(keywords, table, cfg.raw_keyword_space ? nullptr : &scaling);

    std::vector<const ListingRecord*> pool = real_pool(dataset, cfg.high_only);
    if (pool.empty())
        throw std::runtime_error(cfg.high_only ? "train_gan: no High-popularity records"
                                               : "train_gan: empty dataset");

    Rng init_rng = Rng(cfg.seed).substream("init");
    GanTrainResult result{GanModel(cfg, init_rng), {}};
    GanModel& model = result.model;
    Adam opt_gen(model.generator.parameters(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    Adam opt_disc(model.discriminator.parameters(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    Rng noise_rng = Rng(cfg.seed).substream("noise");

    result.log.reserve(cfg.cycles * (cfg.disc_steps + cfg.gen_steps));
    for (std::size_t cycle = 1; cycle <= cfg.cycles; ++cycle) {
        for (std::size_t step = 1; step <= cfg.disc_steps; ++step) {
            try {
                Tape t;
                Var real = t.constant(real_batch(pool, table, scaling, cfg.seq_len, noise_rng));
                Var loss_real = t.bce_loss(discriminator_forward(t, real, model.discriminator), 1.0);
                Var z = t.constant(draw_noise(cfg, noise_rng));
                Var fake = generator_forward(t, z, model.generator, cfg, /*frozen=*/true);
                Var loss_fake = t.bce_loss(discriminator_forward(t, fake, model.discriminator), 0.0);
                Var loss = t.scale(t.add(loss_real, loss_fake), 0.5);
                t.backward(loss);
                opt_disc.step();
                StepLogRow row;
                row.cycle = cycle;
                row.phase = "disc";
                row.step = step;
                row.loss_d = loss.value().item();
                row.gamma = cfg.gamma;
                result.log.push_back(std::move(row));
            } catch (const std::exception& e) {
                throw std::runtime_error("train_gan: aborted at cycle " + std::to_string(cycle) +
                                         ", discriminator step " + std::to_string(step) + ": " +
                                         e.what());
            }
        }
        for (std::size_t step = 1; step <= cfg.gen_steps; ++step) {
            try {
                Tape t;
                Var z = t.constant(draw_noise(cfg, noise_rng));
                Var fake = generator_forward(t, z, model.generator, cfg, /*frozen=*/false);
                Var pred = discriminator_forward(t, fake, model.discriminator, /*frozen=*/true);
                StepLogRow row;
                row.cycle = cycle;
                row.phase = "gen";
                row.step = step;
                row.gamma = cfg.gamma;
                Var loss = t.bce_loss(pred, 1.0);
                if (!keyword_vectors.empty()) {
                    Var delta = delta_attention(t, fake, keyword_vectors);
                    loss = t.sub(loss, t.scale(delta, cfg.gamma));
                    row.delta = delta.value().item();
                }
                row.loss_g = loss.value().item();
                t.backward(loss);
                opt_gen.step();
                result.log.push_back(std::move(row));
            } catch (const std::exception& e) {
                throw std::runtime_error("train_gan: aborted at cycle " + std::to_string(cycle) +
                                         ", generator step " + std::to_string(step) + ": " +
                                         e.what());
            }
        }
    }
    return result;
}

// Held-out real-vs-fake accuracy: n fresh real samples scored against n
// fresh generated ones, correct = real above 0.5 / fake below 0.5.
inline double evaluate_discriminator(GanModel& model, const GanConfig& cfg,
                                     const std::vector<const ListingRecord*>& pool,
                                     const EmbeddingTable& table, const ScalingParams& scaling,
                                     Rng& rng, std::size_t n) {
    if (n == 0) throw std::invalid_argument("evaluate_discriminator: n must be >= 1");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Tape t;
        Var real = t.constant(real_batch(pool, table, scaling, cfg.seq_len, rng));
        if (discriminator_forward(t, real, model.discriminator, true).value().item() > 0.5)
            ++correct;
        Var z = t.constant(draw_noise(cfg, rng));
        Var fake = generator_forward(t, z, model.generator, cfg, true);
        if (discriminator_forward(t, fake, model.discriminator, true).value().item() < 0.5)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(2 * n);
}

// ---------------------------------------------------------------------------
// Decoding and generation.

// Nearest vocabulary word per d-dimensional slot, in scaled space.
inline std::vector<std::string> decode_sequence(const Tensor& g, const EmbeddingTable& table,
                                                const ScalingParams& scaling,
                                                bool use_cosine = false) {
    std::size_t d = table.dim();
    if (g.rank() != 1 || g.size() % d != 0)
        throw std::invalid_argument("decode_sequence: output shape " + g.shape_string() +
                                    " is not a whole number of " + std::to_string(d) +
                                    "-dimensional slots");
    std::vector<std::string> words;
    words.reserve(g.size() / d);
    Tensor slot = Tensor::zeros({d});
    for (std::size_t s = 0; s < g.size() / d; ++s) {
        for (std::size_t j = 0; j < d; ++j) slot[j] = g[s * d + j];
        words.push_back(nearest_word(slot, table, &scaling, use_cosine));
    }
    return words;
}

inline std::vector<std::string> generate_samples(GanModel& model, const GanConfig& cfg,
                                                 const EmbeddingTable& table,
                                                 const ScalingParams& scaling, Rng& rng,
                                                 std::size_t count, bool use_cosine = false) {
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tape t;
        Var z = t.constant(draw_noise(cfg, rng));
        Var g = generator_forward(t, z, model.generator, cfg, true);
        std::vector<std::string> words = decode_sequence(g.value(), table, scaling, use_cosine);
        std::string line;
        for (std::size_t w = 0; w < words.size(); ++w) {
            if (w) line += ' ';
            line += words[w];
        }
        out.push_back(std::move(line));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gamma sweep.

struct SweepRun {
    double gamma = 0.0;
    std::uint64_t seed = 0;
    std::map<std::string, double> mean_keyword_count;  // per keyword, per sample
    std::vector<std::string> samples;
};

struct SweepReport {
    std::vector<double> gammas;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> keywords;
    std::size_t samples_per_run = 20;
    std::vector<SweepRun> runs;  // in (gamma-major, seed-minor) input order
};

inline double mean_keyword_count(const std::vector<std::string>& samples,
                                 const std::string& keyword) {
    if (samples.empty()) return 0.0;
    long total = 0;
    for (const std::string& s : samples)
        for (const std::string& tok : tokenize(s))
            if (tok == keyword) ++total;
    return static_cast<double>(total) / static_cast<double>(samples.size());
}

// Trains one model per (gamma, seed) pair and summarizes how often each
// keyword appears in the decoded samples.
inline SweepReport gamma_sweep(const std::vector<double>& gammas,
                               const std::vector<std::uint64_t>& seeds, const GanConfig& base,
                               const std::vector<LabeledRecord>& dataset,
                               const EmbeddingTable& table, const ScalingParams& scaling,
                               const KeywordSet& keywords, std::size_t samples_per_run = 20,
                               std::ostream* progress = nullptr) {
    if (gammas.empty()) throw std::invalid_argument("gamma_sweep: no gamma values");
    if (!std::is_sorted(gammas.begin(), gammas.end()))
        throw std::invalid_argument("gamma_sweep: gamma values must be sorted ascending");
    if (seeds.empty()) throw std::invalid_argument("gamma_sweep: no seeds");
    if (keywords.words.empty()) throw std::invalid_argument("gamma_sweep: no keywords");

    SweepReport report;
    report.gammas = gammas;
    report.seeds = seeds;
    report.keywords = keywords.words;
    report.samples_per_run = samples_per_run;
    for (double gamma : gammas) {
        for (std::uint64_t seed : seeds) {
            GanConfig cfg = base;
            cfg.gamma = gamma;
            cfg.seed = seed;
            if (progress)
                *progress << "sweep: gamma=" << gamma << " seed=" << seed << "\n" << std::flush;
            GanTrainResult trained = train_gan(cfg, dataset, table, scaling, keywords);
            // Distinct substream name, so sampling draws are disjoint from
            // the training noise stream.
            Rng sample_rng = Rng(seed).substream("sample");
            SweepRun run;
            run.gamma = gamma;
            run.seed = seed;
            run.samples = generate_samples(trained.model, cfg, table, scaling, sample_rng,
                                           samples_per_run);
            for (const std::string& kw : keywords.words)
                run.mean_keyword_count[kw] = mean_keyword_count(run.samples, kw);
            report.runs.push_back(std::move(run));
        }
    }
    return report;
}

// Median over seeds of the per-run mean count, for one gamma and keyword.
inline double median_keyword_count(const SweepReport& report, double gamma,
                                   const std::string& keyword) {
    std::vector<double> values;
    for (const SweepRun& run : report.runs)
        if (run.gamma == gamma) values.push_back(run.mean_keyword_count.at(keyword));
    if (values.empty())
        throw std::invalid_argument("median_keyword_count: no runs for requested gamma");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline std::string sweep_report_json(const SweepReport& report) {
    std::ostringstream out;
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    out << "[\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        const SweepRun& run = report.runs[i];
        out << "  {\"gamma\": " << num(run.gamma) << ", \"seed\": " << run.seed
            << ", \"mean_keyword_count\": {";
        bool first = true;
        for (const auto& [kw, count] : run.mean_keyword_count) {
            if (!first) out << ", ";
            first = false;
            out << "\"" << kw << "\": " << num(count);
        }
        out << "}, \"samples\": [";
        for (std::size_t s = 0; s < run.samples.size(); ++s) {
            if (s) out << ", ";
            out << nlohmann::json(run.samples[s]).dump();
        }
        out << "]}" << (i + 1 < report.runs.size() ? "," : "") << "\n";
    }
    out << "]\n";
    return out.str();
}

// Text table: per gamma, the median-over-seeds mean count of each keyword,
// then the per-run samples.
inline std::string sweep_report_text(const SweepReport& report) {
    std::ostringstream out;
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    out << "gamma";
    for (const std::string& kw : report.keywords) out << "  median mean(" << kw << ")";
    out << "\n";
    for (double gamma : report.gammas) {
        out << num(gamma);
        for (const std::string& kw : report.keywords)
            out << "  " << num(median_keyword_count(report, gamma, kw));
        out << "\n";
    }
    out << "\n";
    for (const SweepRun& run : report.runs) {
        out << "--- gamma " << num(run.gamma) << ", seed " << run.seed << " ---\n";
        for (const std::string& s : run.samples) out << s << "\n";
    }
    return out.str();
}

}  // namespace dmk
