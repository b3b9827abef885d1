#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmk/corpus.hpp"
#include "dmk/rng.hpp"
#include "dmk/tape.hpp"
#include "dmk/tensor.hpp"

namespace dmk {

// ---------------------------------------------------------------------------
// Co-occurrence accumulation.

// Sparse symmetric word-word co-occurrence counts. Both orders of every pair
// are stored, so iteration covers each directed entry once.
struct CooccurrenceMatrix {
    std::map<std::pair<std::size_t, std::size_t>, double> counts;
    std::size_t window = 5;
    std::size_t vocab_size = 0;  // includes the OOV slot

    double at(std::size_t i, std::size_t j) const {
        auto it = counts.find({i, j});
        return it == counts.end() ? 0.0 : it->second;
    }
};

// For each position p and each q in (p, p+window] within one sequence, adds
// 1/(q-p) to both X[w_p][w_q] and X[w_q][w_p]. Out-of-vocabulary tokens
// count under the OOV index.
inline CooccurrenceMatrix build_cooccurrence(
    const std::vector<std::vector<std::string>>& token_sequences, const Vocabulary& vocab,
    std::size_t window) {
    if (window < 1) throw std::invalid_argument("build_cooccurrence: window must be >= 1");
    CooccurrenceMatrix m;
    m.window = window;
    m.vocab_size = vocab.size();
    for (const auto& seq : token_sequences) {
        std::vector<std::size_t> ids;
        ids.reserve(seq.size());
        for (const auto& tok : seq) ids.push_back(vocab.index_of(tok));
        for (std::size_t p = 0; p < ids.size(); ++p) {
            std::size_t limit = std::min(ids.size(), p + window + 1);
            for (std::size_t q = p + 1; q < limit; ++q) {
                double w = 1.0 / static_cast<double>(q - p);
                m.counts[{ids[p], ids[q]}] += w;
                m.counts[{ids[q], ids[p]}] += w;
            }
        }
    }
    return m;
}

// f(x) = (x/x_max)^alpha, clamped at 1.
inline double glove_weight(double x, double x_max = 100.0, double alpha = 0.75) {
    if (x >= x_max) return 1.0;
    return std::pow(x / x_max, alpha);
}

// ---------------------------------------------------------------------------
// Embedding table and min-max scaling.

class EmbeddingTable {
public:
    EmbeddingTable() = default;

    EmbeddingTable(std::vector<std::string> words, std::vector<Tensor> vectors) {
        if (words.size() != vectors.size())
            throw std::invalid_argument("EmbeddingTable: " + std::to_string(words.size()) +
                                        " words but " + std::to_string(vectors.size()) +
                                        " vectors");
        if (words.empty()) throw std::invalid_argument("EmbeddingTable: empty table");
        dim_ = vectors[0].size();
        for (const Tensor& v : vectors) {
            if (v.rank() != 1 || v.size() != dim_)
                throw std::invalid_argument("EmbeddingTable: vector shape " + v.shape_string() +
                                            " does not match dimension " + std::to_string(dim_));
            if (!v.all_finite())
                throw std::invalid_argument("EmbeddingTable: non-finite vector entry");
        }
        words_ = std::move(words);
        vectors_ = std::move(vectors);
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (!index_.emplace(words_[i], i).second)
                throw std::invalid_argument("EmbeddingTable: duplicate word '" + words_[i] + "'");
        }
        oov_ = lookup(Vocabulary::kOovToken);
    }

    std::size_t size() const { return words_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& words() const { return words_; }
    const std::string& word_at(std::size_t i) const { return words_.at(i); }
    const Tensor& vector_at(std::size_t i) const { return vectors_.at(i); }

    bool has_oov() const { return oov_ >= 0; }
    std::size_t oov_index() const {
        if (oov_ < 0) throw std::logic_error("EmbeddingTable: no OOV entry");
        return static_cast<std::size_t>(oov_);
    }

    // Embedding of a word; unknown words map to the OOV vector.
    const Tensor& embed(const std::string& word) const {
        auto it = index_.find(word);
        if (it != index_.end()) return vectors_[it->second];
        return vectors_[oov_index()];
    }

    bool contains(const std::string& word) const { return index_.count(word) > 0; }

    long find(const std::string& word) const { return lookup(word); }

    // Appends an OOV entry equal to the mean of the existing vectors.
    void append_mean_oov() {
        if (oov_ >= 0) throw std::logic_error("EmbeddingTable: OOV entry already present");
        Tensor mean = Tensor::zeros({dim_});
        for (const Tensor& v : vectors_)
            for (std::size_t j = 0; j < dim_; ++j) mean[j] += v[j];
        for (std::size_t j = 0; j < dim_; ++j) mean[j] /= static_cast<double>(vectors_.size());
        index_[Vocabulary::kOovToken] = words_.size();
        oov_ = static_cast<long>(words_.size());
        words_.push_back(Vocabulary::kOovToken);
        vectors_.push_back(std::move(mean));
    }

private:
    long lookup(const std::string& word) const {
        auto it = index_.find(word);
        return it == index_.end() ? -1 : static_cast<long>(it->second);
    }

    std::vector<std::string> words_;
    std::vector<Tensor> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
    long oov_ = -1;
};

// Per-dimension affine map of the table's range onto [0,1].
struct ScalingParams {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t dim() const { return min.size(); }

    Tensor scale(const Tensor& v) const {
        check(v);
        Tensor out = v;
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = (out[j] - min[j]) / (max[j] - min[j]);
        return out;
    }

    Tensor unscale(const Tensor& u) const {
        check(u);
        Tensor out = u;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = min[j] + out[j] * (max[j] - min[j]);
        return out;
    }

    std::string to_json() const {
        std::ostringstream out;
        auto list = [&](const std::vector<double>& v) {
            out << "[";
            for (std::size_t j = 0; j < v.size(); ++j) {
                if (j) out << ", ";
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
                out << buf;
            }
            out << "]";
        };
        out << "{\"min\": ";
        list(min);
        out << ", \"max\": ";
        list(max);
        out << "}\n";
        return out.str();
    }

    static ScalingParams from_json(const std::string& text) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(std::string("scaling: invalid JSON: ") + e.what());
        }
        ScalingParams p;
        p.min = doc.at("min").get<std::vector<double>>();
        p.max = doc.at("max").get<std::vector<double>>();
        if (p.min.size() != p.max.size() || p.min.empty())
            throw std::runtime_error("scaling: min/max dimension mismatch");
        for (std::size_t j = 0; j < p.min.size(); ++j)
            if (!(p.max[j] > p.min[j]))
                throw std::runtime_error("scaling: dimension " + std::to_string(j) +
                                         " has max <= min");
        return p;
    }

private:
    void check(const Tensor& v) const {
        if (v.rank() != 1 || v.size() != min.size())
            throw std::invalid_argument("scaling: vector shape " + v.shape_string() +
                                        " does not match dimension " + std::to_string(min.size()));
    }
};

inline ScalingParams fit_minmax(const EmbeddingTable& table) {
    if (table.size() < 2) throw std::invalid_argument("fit_minmax: need at least 2 words");
    ScalingParams p;
    p.min.assign(table.dim(), std::numeric_limits<double>::infinity());
    p.max.assign(table.dim(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < table.size(); ++i) {
        const Tensor& v = table.vector_at(i);
        for (std::size_t j = 0; j < table.dim(); ++j) {
            p.min[j] = std::min(p.min[j], v[j]);
            p.max[j] = std::max(p.max[j], v[j]);
        }
    }
    for (std::size_t j = 0; j < table.dim(); ++j)
        if (!(p.max[j] > p.min[j]))
            throw std::runtime_error("fit_minmax: dimension " + std::to_string(j) +
                                     " is constant across the table");
    return p;
}

// ---------------------------------------------------------------------------
// Training. Four flat parameter blocks so the analytic gradient of the
// objective can be checked against finite differences.

struct GloveParams {
    std::size_t vocab_size;
    std::size_t dim;
    Parameter main_vectors;     // [V, d]
    Parameter context_vectors;  // [V, d]
    Parameter main_bias;        // [V]
    Parameter context_bias;     // [V]

    GloveParams(std::size_t vocab_size_, std::size_t dim_, Rng& rng)
        : vocab_size(vocab_size_),
          dim(dim_),
          main_vectors("glove.w", uniform_tensor({vocab_size_, dim_}, rng, -0.5 / dim_, 0.5 / dim_)),
          context_vectors("glove.w_ctx",
                          uniform_tensor({vocab_size_, dim_}, rng, -0.5 / dim_, 0.5 / dim_)),
          main_bias("glove.b", uniform_tensor({vocab_size_}, rng, -0.5 / dim_, 0.5 / dim_)),
          context_bias("glove.b_ctx", uniform_tensor({vocab_size_}, rng, -0.5 / dim_, 0.5 / dim_)) {}

    std::vector<Parameter*> parameters() {
        return {&main_vectors, &context_vectors, &main_bias, &context_bias};
    }
};

namespace detail {

// Residual w_i . w~_j + b_i + b~_j - log X_ij of one directed entry.
inline double glove_residual(const GloveParams& p, std::size_t i, std::size_t j, double x) {
    double s = p.main_bias.value[i] + p.context_bias.value[j];
    const double* wi = p.main_vectors.value.data() + i * p.dim;
    const double* cj = p.context_vectors.value.data() + j * p.dim;
    for (std::size_t t = 0; t < p.dim; ++t) s += wi[t] * cj[t];
    return s - std::log(x);
}

}  // namespace detail

// J = sum over stored entries of f(X_ij) * residual^2.
inline double glove_objective(const GloveParams& p, const CooccurrenceMatrix& m,
                              double x_max = 100.0, double alpha = 0.75) {
    double total = 0.0;
    for (const auto& [key, x] : m.counts) {
        double r = detail::glove_residual(p, key.first, key.second, x);
        total += glove_weight(x, x_max, alpha) * r * r;
    }
    return total;
}

// Full-batch analytic gradient of glove_objective, accumulated into grads.
inline void glove_objective_gradients(GloveParams& p, const CooccurrenceMatrix& m,
                                      double x_max = 100.0, double alpha = 0.75) {
    for (const auto& [key, x] : m.counts) {
        auto [i, j] = key;
        double r = detail::glove_residual(p, i, j, x);
        double common = 2.0 * glove_weight(x, x_max, alpha) * r;
        const double* wi = p.main_vectors.value.data() + i * p.dim;
        const double* cj = p.context_vectors.value.data() + j * p.dim;
        double* gwi = p.main_vectors.grad.data() + i * p.dim;
        double* gcj = p.context_vectors.grad.data() + j * p.dim;
        for (std::size_t t = 0; t < p.dim; ++t) {
            gwi[t] += common * cj[t];
            gcj[t] += common * wi[t];
        }
        p.main_bias.grad[i] += common;
        p.context_bias.grad[j] += common;
    }
}

struct GloveTrainResult {
    EmbeddingTable table;
    std::vector<double> objective_log;  // entry 0 = before training, then one per epoch
};

// AdaGrad over the stored entries in deterministic key order: each step
// divides by the square root of the running squared-gradient accumulator
// (initialized to 1.0) and then folds in the new gradient. The two sides of
// an entry are updated from values snapshotted before either moves.
inline GloveTrainResult train_glove(const CooccurrenceMatrix& m, const Vocabulary& vocab,
                                    std::size_t d, std::size_t epochs, double lr,
                                    std::uint64_t seed, double x_max = 100.0,
                                    double alpha = 0.75) {
    if (m.counts.empty()) throw std::invalid_argument("train_glove: empty co-occurrence matrix");
    if (d < 1) throw std::invalid_argument("train_glove: dimension must be >= 1");
    if (vocab.size() != m.vocab_size)
        throw std::invalid_argument("train_glove: vocabulary size " +
                                    std::to_string(vocab.size()) +
                                    " does not match matrix vocab size " +
                                    std::to_string(m.vocab_size));

    Rng rng = Rng(seed).substream("init");
    GloveParams p(vocab.size(), d, rng);

    Tensor acc_w = Tensor::full({vocab.size(), d}, 1.0);
    Tensor acc_c = Tensor::full({vocab.size(), d}, 1.0);
    Tensor acc_bw = Tensor::full({vocab.size()}, 1.0);
    Tensor acc_bc = Tensor::full({vocab.size()}, 1.0);

    GloveTrainResult result;
    result.objective_log.push_back(glove_objective(p, m, x_max, alpha));
    std::vector<double> wi_snap(d), cj_snap(d);
    for (std::size_t e = 0; e < epochs; ++e) {
        for (const auto& [key, x] : m.counts) {
            auto [i, j] = key;
            double r = detail::glove_residual(p, i, j, x);
            double common = 2.0 * glove_weight(x, x_max, alpha) * r;
            double* wi = p.main_vectors.value.data() + i * d;
            double* cj = p.context_vectors.value.data() + j * d;
            std::copy(wi, wi + d, wi_snap.begin());
            std::copy(cj, cj + d, cj_snap.begin());
            for (std::size_t t = 0; t < d; ++t) {
                double gw = common * cj_snap[t];
                double gc = common * wi_snap[t];
                wi[t] -= lr * gw / std::sqrt(acc_w.at(i, t));
                cj[t] -= lr * gc / std::sqrt(acc_c.at(j, t));
                acc_w.at(i, t) += gw * gw;
                acc_c.at(j, t) += gc * gc;
            }
            p.main_bias.value[i] -= lr * common / std::sqrt(acc_bw[i]);
            p.context_bias.value[j] -= lr * common / std::sqrt(acc_bc[j]);
            acc_bw[i] += common * common;
            acc_bc[j] += common * common;
        }
        result.objective_log.push_back(glove_objective(p, m, x_max, alpha));
    }

    // Final embeddings e = w + w~ for real words; the OOV slot is replaced by
    // the mean of the trained vectors and never decoded to.
    std::vector<std::string> words;
    std::vector<Tensor> vectors;
    for (std::size_t i = 0; i + 1 < vocab.size(); ++i) {
        Tensor e = Tensor::zeros({d});
        for (std::size_t t = 0; t < d; ++t)
            e[t] = p.main_vectors.value.at(i, t) + p.context_vectors.value.at(i, t);
        words.push_back(vocab.token_at(i));
        vectors.push_back(std::move(e));
    }
    if (words.empty()) throw std::runtime_error("train_glove: vocabulary has no real words");
    EmbeddingTable table(std::move(words), std::move(vectors));
    table.append_mean_oov();
    result.table = std::move(table);
    return result;
}

// ---------------------------------------------------------------------------
// Decoding.

inline double cosine_similarity(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("cosine_similarity: shape mismatch between " +
                                    a.shape_string() + " and " + b.shape_string());
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    double denom = std::sqrt(aa) * std::sqrt(bb);
    return denom == 0.0 ? 0.0 : ab / denom;
}

// Closest vocabulary word to v, excluding the OOV slot. With scaling, the
// comparison runs in scaled space (v is assumed already scaled). Euclidean
// by default; ties break toward the lower index.
inline std::size_t nearest_word_index(const Tensor& v, const EmbeddingTable& table,
                                      const ScalingParams* scaling = nullptr,
                                      bool use_cosine = false) {
    bool found = false;
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.has_oov() && i == table.oov_index()) continue;
        Tensor cand = scaling ? scaling->scale(table.vector_at(i)) : table.vector_at(i);
        double score;
        if (use_cosine) {
            score = -cosine_similarity(v, cand);  // lower is better
        } else {
            if (!v.same_shape(cand))
                throw std::invalid_argument("nearest_word: query shape " + v.shape_string() +
                                            " does not match table dimension " +
                                            std::to_string(table.dim()));
            double s = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                double dj = v[j] - cand[j];
                s += dj * dj;
            }
            score = s;
        }
        if (!found || score < best_score) {
            found = true;
            best = i;
            best_score = score;
        }
    }
    if (!found) throw std::runtime_error("nearest_word: table has no decodable words");
    return best;
}

inline const std::string& nearest_word(const Tensor& v, const EmbeddingTable& table,
                                       const ScalingParams* scaling = nullptr,
                                       bool use_cosine = false) {
    return table.word_at(nearest_word_index(v, table, scaling, use_cosine));
}

// ---------------------------------------------------------------------------
// Text export: one line per word, `word v_1 ... v_d`, 9 significant digits.

inline void save_embeddings(std::ostream& out, const EmbeddingTable& table) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.word_at(i);
        const Tensor& v = table.vector_at(i);
        for (std::size_t j = 0; j < v.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g", v[j]);
            out << ' ' << buf;
        }
        out << '\n';
    }
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("embeddings: cannot open '" + path + "' for writing");
    save_embeddings(f, table);
    if (!f) throw std::runtime_error("embeddings: write to '" + path + "' failed");
}

// Loads the text format back. Tables without an OOV line get a mean-vector
// OOV appended so lookups of unknown words always resolve.
inline EmbeddingTable load_embeddings(std::istream& in) {
    std::vector<std::string> words;
    std::vector<Tensor> vectors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (word.empty() || vals.empty())
            throw std::runtime_error("embeddings: malformed line " + std::to_string(line_no));
        if (!vectors.empty() && vals.size() != vectors[0].size())
            throw std::runtime_error("embeddings: line " + std::to_string(line_no) + " has " +
                                     std::to_string(vals.size()) + " values, expected " +
                                     std::to_string(vectors[0].size()));
        words.push_back(word);
        vectors.push_back(Tensor::vector(std::move(vals)));
    }
    if (words.empty()) throw std::runtime_error("embeddings: file is empty");
    EmbeddingTable table(std::move(words), std::move(vectors));
    if (!table.has_oov()) table.append_mean_oov();
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("embeddings: cannot open '" + path + "'");
    return load_embeddings(f);
}

}  // namespace dmk
