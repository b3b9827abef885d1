// dmkgen: listing-popularity pipeline driver.
//
//   synth     write a synthetic listing corpus CSV
//   ingest    label a raw corpus by popularity tercile within price bins
//   glove     train word embeddings on the corpus
//   classify  train the LSTM popularity classifier
//   gan       train the generator/discriminator pair
//   generate  decode samples from a trained generator checkpoint
//   sweep     train across a gamma grid and summarize keyword usage
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
// Outputs are built in memory and written only after a command succeeds,
// so a failed run leaves no partial files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dmk/checkpoint.hpp"
#include "dmk/classifier.hpp"
#include "dmk/corpus.hpp"
#include "dmk/gan.hpp"
#include "dmk/glove.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

void require_input_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("input file '" + path + "' does not exist");
}

// Per-command JSON config. Precedence: flags > config file > DMK_SEED (seed
// only) > built-in defaults. Keys are the long option names with dashes
// replaced by underscores.
class ConfigFile {
public:
    void load(const std::string& path) {
        if (path.empty()) return;
        require_input_file(path);
        try {
            doc_ = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("config '" + path + "' is not valid JSON: " + e.what());
        }
        if (!doc_.is_object()) throw std::runtime_error("config '" + path + "' must be a JSON object");
    }

    template <class T>
    void apply(const CLI::App* cmd, const std::string& option, T& target) const {
        const CLI::Option* opt = cmd->get_option(option);
        if (opt->count() > 0) return;
        std::string key = option.substr(2);
        for (char& c : key)
            if (c == '-') c = '_';
        if (!doc_.contains(key)) return;
        try {
            target = doc_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("config key '" + key + "': " + e.what());
        }
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    template <class T>
    T get(const std::string& key) const {
        return doc_.at(key).get<T>();
    }

private:
    nlohmann::json doc_ = nlohmann::json::object();
};

std::uint64_t parse_seed(const std::string& text) {
    std::size_t pos = 0;
    unsigned long long v;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("seed '" + text + "' is not an unsigned integer");
    }
    if (pos != text.size()) throw std::runtime_error("seed '" + text + "' is not an unsigned integer");
    return static_cast<std::uint64_t>(v);
}

std::uint64_t resolve_seed(const CLI::App* cmd, const ConfigFile& cfg, std::uint64_t parsed) {
    if (cmd->get_option("--seed")->count() > 0) return parsed;
    if (cfg.has("seed")) return cfg.get<std::uint64_t>("seed");
    if (const char* env = std::getenv("DMK_SEED")) return parse_seed(env);
    return parsed;
}

std::vector<dmk::LabeledRecord> read_labeled_file(const std::string& path) {
    require_input_file(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return dmk::read_labeled_csv(in);
}

// The corpus for embedding training may be raw or already labeled.
std::vector<dmk::ListingRecord> read_corpus_file(const std::string& path) {
    require_input_file(path);
    std::string text = read_file(path);
    {
        std::istringstream head(text);
        std::string first_line;
        std::getline(head, first_line);
        if (first_line.find("label") != std::string::npos) {
            std::istringstream in(text);
            std::vector<dmk::ListingRecord> records;
            for (auto& lr : dmk::read_labeled_csv(in)) records.push_back(std::move(lr.record));
            return records;
        }
    }
    std::istringstream in(text);
    dmk::ParseReport report;
    std::vector<dmk::ListingRecord> records = dmk::parse_listings(in, report);
    if (report.rows_rejected > 0)
        std::cerr << "dmkgen: note: " << report.rows_rejected << " of " << report.rows_read
                  << " rows rejected while reading '" << path << "'\n";
    return records;
}

dmk::Vocabulary corpus_vocabulary(const std::vector<dmk::ListingRecord>& records, int min_count,
                                  std::vector<std::vector<std::string>>* docs_out) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(records.size());
    for (const auto& r : records) docs.push_back(dmk::tokenize(r.description));
    dmk::Vocabulary vocab = dmk::build_vocabulary(docs, min_count);
    if (docs_out) *docs_out = std::move(docs);
    return vocab;
}

// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string config, output;
    std::size_t count = 300;
    std::uint64_t seed = 0;
};

int cmd_synth(CLI::App* cmd, SynthOpts& o) {
    std::vector<dmk::ListingRecord> records;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        cfg.apply(cmd, "--count", o.count);
        o.seed = resolve_seed(cmd, cfg, o.seed);
        records = dmk::generate_synthetic_corpus(dmk::SyntheticSpec::standard(), o.count, o.seed);
    } catch (const std::exception& e) {
        std::cerr << "dmkgen synth: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        std::ostringstream out;
        dmk::write_listings_csv(out, records);
        write_file(o.output, out.str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen synth: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct IngestOpts {
    std::string config, input, output, report;
    double bin_width = 30.0;
};

int cmd_ingest(CLI::App* cmd, IngestOpts& o) {
    std::vector<dmk::ListingRecord> records;
    dmk::ParseReport report;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        cfg.apply(cmd, "--bin-width", o.bin_width);
        if (o.bin_width <= 0.0) throw std::runtime_error("--bin-width must be positive");
        require_input_file(o.input);
        std::ifstream in(o.input, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open '" + o.input + "'");
        records = dmk::parse_listings(in, report);
        if (records.empty()) throw std::runtime_error("'" + o.input + "' has no valid records");
    } catch (const std::exception& e) {
        std::cerr << "dmkgen ingest: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        dmk::StratifiedDataset strat = dmk::stratify(records, o.bin_width);
        std::ostringstream out;
        dmk::write_labeled_csv(out, strat.records);
        write_file(o.output, out.str());
        std::string report_path = o.report.empty() ? o.output + ".report.json" : o.report;
        write_file(report_path, report.to_json());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen ingest: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct GloveOpts {
    std::string config, input, embeddings_out, scaling_out;
    std::size_t dim = 50;
    std::size_t window = 5;
    int min_count = 2;
    std::size_t epochs = 25;
    double lr = 0.05;
    std::uint64_t seed = 0;
};

int cmd_glove(CLI::App* cmd, GloveOpts& o) {
    std::vector<dmk::ListingRecord> records;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        cfg.apply(cmd, "--dim", o.dim);
        cfg.apply(cmd, "--window", o.window);
        cfg.apply(cmd, "--min-count", o.min_count);
        cfg.apply(cmd, "--epochs", o.epochs);
        cfg.apply(cmd, "--lr", o.lr);
        o.seed = resolve_seed(cmd, cfg, o.seed);
        if (o.dim < 1 || o.window < 1 || o.min_count < 1)
            throw std::runtime_error("--dim, --window, and --min-count must be >= 1");
        records = read_corpus_file(o.input);
        if (records.empty()) throw std::runtime_error("'" + o.input + "' has no records");
    } catch (const std::exception& e) {
        std::cerr << "dmkgen glove: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        std::vector<std::vector<std::string>> docs;
        dmk::Vocabulary vocab = corpus_vocabulary(records, o.min_count, &docs);
        if (vocab.size() <= 1) {
            std::cerr << "dmkgen glove: vocabulary is empty at --min-count " << o.min_count << "\n";
            return kExitUsage;
        }
        dmk::CooccurrenceMatrix matrix = dmk::build_cooccurrence(docs, vocab, o.window);
        dmk::GloveTrainResult trained =
            dmk::train_glove(matrix, vocab, o.dim, o.epochs, o.lr, o.seed);
        for (std::size_t e = 0; e < trained.objective_log.size(); ++e)
            std::cerr << "glove: epoch " << e << " objective " << trained.objective_log[e] << "\n";
        dmk::ScalingParams scaling = dmk::fit_minmax(trained.table);
        std::ostringstream emb;
        dmk::save_embeddings(emb, trained.table);
        write_file(o.embeddings_out, emb.str());
        write_file(o.scaling_out, scaling.to_json());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen glove: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct ClassifyOpts {
    std::string config, input, embeddings, metrics_out, checkpoint_out;
    double ratio = 0.7;
    std::size_t epochs = 10;
    double lr = 1e-3;
    std::size_t hidden = 16;
    std::size_t max_seq_len = 50;
    bool ensemble = true;
    bool majority_vote = false;
    bool relu_on_output = false;
    std::uint64_t seed = 0;
};

int cmd_classify(CLI::App* cmd, ClassifyOpts& o) {
    std::vector<dmk::LabeledRecord> records;
    dmk::EmbeddingTable table;
    dmk::ClassifierConfig cc;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        cfg.apply(cmd, "--ratio", o.ratio);
        cfg.apply(cmd, "--epochs", o.epochs);
        cfg.apply(cmd, "--lr", o.lr);
        cfg.apply(cmd, "--hidden", o.hidden);
        cfg.apply(cmd, "--max-seq-len", o.max_seq_len);
        cfg.apply(cmd, "--ensemble", o.ensemble);
        cfg.apply(cmd, "--majority-vote", o.majority_vote);
        cfg.apply(cmd, "--relu-on-output", o.relu_on_output);
        o.seed = resolve_seed(cmd, cfg, o.seed);
        records = read_labeled_file(o.input);
        require_input_file(o.embeddings);
        table = dmk::load_embeddings(o.embeddings);
        cc.hidden_size = o.hidden;
        cc.embedding_dim = table.dim();
        cc.max_seq_len = o.max_seq_len;
        cc.ensemble = o.ensemble;
        cc.majority_vote = o.majority_vote;
        cc.recurrent_relu = !o.relu_on_output;
        cc.epochs = o.epochs;
        cc.lr = o.lr;
        cc.seed = o.seed;
        dmk::validate(cc);
        if (o.ratio <= 0.0 || o.ratio >= 1.0) throw std::runtime_error("--ratio must be in (0,1)");
    } catch (const std::exception& e) {
        std::cerr << "dmkgen classify: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        dmk::SplitDataset split = dmk::train_test_split(records, o.ratio, o.seed);
        dmk::ClassifierTrainResult trained = dmk::train_classifier(split, table, cc, &std::cerr);
        std::ostringstream metrics;
        dmk::write_metrics_csv(metrics, trained.metrics);
        write_file(o.metrics_out, metrics.str());
        write_file(o.checkpoint_out, dmk::checkpoint_to_json(trained.model.parameters()));
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen classify: " << e.what() << "\n";
        return kExitRuntime;
    }
}

void add_gan_options(CLI::App* cmd, dmk::GanConfig& gc, std::vector<std::string>& keywords) {
    cmd->add_option("--gamma", gc.gamma, "Keyword-attention weight in the generator loss")
        ->capture_default_str();
    cmd->add_option("--seq-len", gc.seq_len, "Generated word slots per sample")
        ->capture_default_str();
    cmd->add_option("--noise-dim", gc.noise_dim, "Generator noise input dimension")
        ->capture_default_str();
    cmd->add_option("--gen-hidden", gc.gen_hidden, "Generator hidden width")->capture_default_str();
    cmd->add_option("--disc-hidden", gc.disc_hidden, "Discriminator hidden width")
        ->capture_default_str();
    cmd->add_option("--disc-steps", gc.disc_steps, "Discriminator updates per cycle")
        ->capture_default_str();
    cmd->add_option("--gen-steps", gc.gen_steps, "Generator updates per cycle")
        ->capture_default_str();
    cmd->add_option("--cycles", gc.cycles, "Alternating training cycles")->capture_default_str();
    cmd->add_option("--lr", gc.lr, "Adam learning rate for both sides")->capture_default_str();
    cmd->add_option("--keywords", keywords, "Keywords the generator is biased toward (comma separated)")
        ->delimiter(',');
    cmd->add_flag("--paper-literal-generator", gc.paper_literal_generator,
                  "Drop the generator's final sigmoid and clamp outputs into (0,1)");
    cmd->add_flag("--raw-keyword-space", gc.raw_keyword_space,
                  "Compute keyword attention against unscaled embeddings");
    cmd->add_flag("--include-all",
                  "Sample real data from all records, not only High-popularity ones");
}

void apply_gan_config(const CLI::App* cmd, const ConfigFile& cfg, dmk::GanConfig& gc,
                      std::vector<std::string>& keywords) {
    cfg.apply(cmd, "--gamma", gc.gamma);
    cfg.apply(cmd, "--seq-len", gc.seq_len);
    cfg.apply(cmd, "--noise-dim", gc.noise_dim);
    cfg.apply(cmd, "--gen-hidden", gc.gen_hidden);
    cfg.apply(cmd, "--disc-hidden", gc.disc_hidden);
    cfg.apply(cmd, "--disc-steps", gc.disc_steps);
    cfg.apply(cmd, "--gen-steps", gc.gen_steps);
    cfg.apply(cmd, "--cycles", gc.cycles);
    cfg.apply(cmd, "--lr", gc.lr);
    cfg.apply(cmd, "--keywords", keywords);
    cfg.apply(cmd, "--paper-literal-generator", gc.paper_literal_generator);
    cfg.apply(cmd, "--raw-keyword-space", gc.raw_keyword_space);
    if (cmd->get_option("--include-all")->count() > 0)
        gc.high_only = false;
    else if (cfg.has("include_all"))
        gc.high_only = !cfg.get<bool>("include_all");
}

struct GanOpts {
    std::string config, input, embeddings, scaling, checkpoint_out, step_log_out;
    dmk::GanConfig gc;
    std::vector<std::string> keywords;
    std::uint64_t seed = 0;
};

int cmd_gan(CLI::App* cmd, GanOpts& o) {
    std::vector<dmk::LabeledRecord> records;
    dmk::EmbeddingTable table;
    dmk::ScalingParams scaling;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        apply_gan_config(cmd, cfg, o.gc, o.keywords);
        o.gc.seed = resolve_seed(cmd, cfg, o.seed);
        records = read_labeled_file(o.input);
        require_input_file(o.embeddings);
        table = dmk::load_embeddings(o.embeddings);
        require_input_file(o.scaling);
        scaling = dmk::ScalingParams::from_json(read_file(o.scaling));
        o.gc.embedding_dim = table.dim();
        dmk::validate(o.gc);
        if (o.gc.gamma > 0.0 && o.keywords.empty())
            throw std::runtime_error("--keywords is required when --gamma > 0");
        dmk::resolve_keywords(dmk::KeywordSet{o.keywords}, table,
                              o.gc.raw_keyword_space ? nullptr : &scaling);
    } catch (const std::exception& e) {
        std::cerr << "dmkgen gan: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        dmk::GanTrainResult trained =
            dmk::train_gan(o.gc, records, table, scaling, dmk::KeywordSet{o.keywords});
        write_file(o.checkpoint_out, dmk::checkpoint_to_json(trained.model.parameters()));
        std::ostringstream log;
        dmk::write_step_log_csv(log, trained.log);
        write_file(o.step_log_out, log.str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen gan: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct GenerateOpts {
    std::string config, checkpoint, embeddings, scaling;
    std::size_t samples = 20;
    bool cosine = false;
    bool paper_literal = false;
    std::uint64_t seed = 0;
};

// Network dimensions are reconstructed from the checkpoint's tensor shapes,
// so the checkpoint plus the embedding/scaling files fully determine output.
int cmd_generate(CLI::App* cmd, GenerateOpts& o) {
    dmk::EmbeddingTable table;
    dmk::ScalingParams scaling;
    dmk::GanConfig gc;
    nlohmann::json ckpt;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        cfg.apply(cmd, "--samples", o.samples);
        cfg.apply(cmd, "--cosine", o.cosine);
        cfg.apply(cmd, "--paper-literal-generator", o.paper_literal);
        o.seed = resolve_seed(cmd, cfg, o.seed);
        require_input_file(o.checkpoint);
        require_input_file(o.embeddings);
        require_input_file(o.scaling);
        table = dmk::load_embeddings(o.embeddings);
        scaling = dmk::ScalingParams::from_json(read_file(o.scaling));
        ckpt = nlohmann::json::parse(read_file(o.checkpoint));
        auto shape_of = [&](const char* name) {
            if (!ckpt.contains(name))
                throw std::runtime_error(std::string("checkpoint is missing '") + name + "'");
            return ckpt.at(name).at("shape").get<std::vector<std::size_t>>();
        };
        std::vector<std::size_t> g1 = shape_of("generator.w1");
        std::vector<std::size_t> g3 = shape_of("generator.w3");
        std::vector<std::size_t> d1 = shape_of("discriminator.w1");
        gc.noise_dim = g1.at(1);
        gc.gen_hidden = g1.at(0);
        gc.disc_hidden = d1.at(0);
        gc.embedding_dim = table.dim();
        if (g3.at(0) % table.dim() != 0)
            throw std::runtime_error("generator output dimension " + std::to_string(g3.at(0)) +
                                     " is not a multiple of the embedding dimension " +
                                     std::to_string(table.dim()));
        gc.seq_len = g3.at(0) / table.dim();
        gc.paper_literal_generator = o.paper_literal;
        gc.seed = o.seed;
        dmk::validate(gc);
    } catch (const std::exception& e) {
        std::cerr << "dmkgen generate: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        dmk::Rng init_rng(0);
        dmk::GanModel model(gc, init_rng);
        dmk::load_checkpoint(o.checkpoint, model.parameters());
        dmk::Rng sample_rng = dmk::Rng(o.seed).substream("sample");
        for (const std::string& line :
             dmk::generate_samples(model, gc, table, scaling, sample_rng, o.samples, o.cosine))
            std::cout << line << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen generate: " << e.what() << "\n";
        return kExitRuntime;
    }
}

struct SweepOpts {
    std::string config, input, embeddings, scaling, report_out, table_out;
    std::vector<double> gammas = {0.0002, 0.00045, 0.0007};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t samples = 20;
    dmk::GanConfig gc;
    std::vector<std::string> keywords;
};

int cmd_sweep(CLI::App* cmd, SweepOpts& o) {
    std::vector<dmk::LabeledRecord> records;
    dmk::EmbeddingTable table;
    dmk::ScalingParams scaling;
    try {
        ConfigFile cfg;
        cfg.load(o.config);
        apply_gan_config(cmd, cfg, o.gc, o.keywords);
        cfg.apply(cmd, "--gammas", o.gammas);
        cfg.apply(cmd, "--seeds", o.seeds);
        cfg.apply(cmd, "--samples", o.samples);
        records = read_labeled_file(o.input);
        require_input_file(o.embeddings);
        table = dmk::load_embeddings(o.embeddings);
        require_input_file(o.scaling);
        scaling = dmk::ScalingParams::from_json(read_file(o.scaling));
        o.gc.embedding_dim = table.dim();
        dmk::validate(o.gc);
        if (o.keywords.empty()) throw std::runtime_error("--keywords is required");
        if (o.gammas.empty()) throw std::runtime_error("--gammas must be non-empty");
        if (!std::is_sorted(o.gammas.begin(), o.gammas.end()))
            throw std::runtime_error("--gammas must be sorted ascending");
        dmk::resolve_keywords(dmk::KeywordSet{o.keywords}, table,
                              o.gc.raw_keyword_space ? nullptr : &scaling);
    } catch (const std::exception& e) {
        std::cerr << "dmkgen sweep: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        dmk::SweepReport report =
            dmk::gamma_sweep(o.gammas, o.seeds, o.gc, records, table, scaling,
                             dmk::KeywordSet{o.keywords}, o.samples, &std::cerr);
        if (!o.report_out.empty()) write_file(o.report_out, dmk::sweep_report_json(report));
        std::string text = dmk::sweep_report_text(report);
        if (o.table_out.empty())
            std::cout << text;
        else
            write_file(o.table_out, text);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "dmkgen sweep: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Listing-popularity pipeline: stratification, embeddings, classification, and keyword-biased text generation"};
    app.require_subcommand(1);

    auto add_common = [](CLI::App* cmd, std::string& config, std::uint64_t& seed) {
        cmd->add_option("--config", config, "JSON config file (flags take precedence)");
        cmd->add_option("--seed", seed,
                        "Root seed for all randomness (falls back to DMK_SEED, then 0)")
            ->capture_default_str();
    };

    SynthOpts synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic listing corpus CSV");
    add_common(synth_cmd, synth.config, synth.seed);
    synth_cmd->add_option("--out", synth.output, "Output corpus CSV")->required();
    synth_cmd->add_option("--count", synth.count, "Number of records")->capture_default_str();

    IngestOpts ingest;
    CLI::App* ingest_cmd =
        app.add_subcommand("ingest", "Label a corpus by popularity tercile within price bins");
    ingest_cmd->add_option("--config", ingest.config, "JSON config file (flags take precedence)");
    ingest_cmd->add_option("--input", ingest.input, "Raw corpus CSV")->required();
    ingest_cmd->add_option("--output", ingest.output, "Labeled corpus CSV")->required();
    ingest_cmd->add_option("--report", ingest.report,
                           "Parse report JSON (default: <output>.report.json)");
    ingest_cmd->add_option("--bin-width", ingest.bin_width, "Price-per-bedroom bin width")
        ->capture_default_str();

    GloveOpts glove;
    CLI::App* glove_cmd = app.add_subcommand("glove", "Train word embeddings on the corpus");
    add_common(glove_cmd, glove.config, glove.seed);
    glove_cmd->add_option("--input", glove.input, "Corpus CSV (raw or labeled)")->required();
    glove_cmd->add_option("--embeddings-out", glove.embeddings_out, "Embedding text file")
        ->required();
    glove_cmd->add_option("--scaling-out", glove.scaling_out, "Min-max scaling JSON")->required();
    glove_cmd->add_option("--dim", glove.dim, "Embedding dimension")->capture_default_str();
    glove_cmd->add_option("--window", glove.window, "Co-occurrence window")->capture_default_str();
    glove_cmd->add_option("--min-count", glove.min_count, "Minimum token count for the vocabulary")
        ->capture_default_str();
    glove_cmd->add_option("--epochs", glove.epochs, "Training epochs")->capture_default_str();
    glove_cmd->add_option("--lr", glove.lr, "AdaGrad learning rate")->capture_default_str();

    ClassifyOpts classify;
    CLI::App* classify_cmd =
        app.add_subcommand("classify", "Train the LSTM popularity classifier");
    add_common(classify_cmd, classify.config, classify.seed);
    classify_cmd->add_option("--input", classify.input, "Labeled corpus CSV")->required();
    classify_cmd->add_option("--embeddings", classify.embeddings, "Embedding text file")
        ->required();
    classify_cmd->add_option("--metrics-out", classify.metrics_out, "Per-epoch metrics CSV")
        ->required();
    classify_cmd->add_option("--checkpoint-out", classify.checkpoint_out, "Model checkpoint JSON")
        ->required();
    classify_cmd->add_option("--ratio", classify.ratio, "Train fraction of the split")
        ->capture_default_str();
    classify_cmd->add_option("--epochs", classify.epochs, "Training epochs")
        ->capture_default_str();
    classify_cmd->add_option("--lr", classify.lr, "Adam learning rate")->capture_default_str();
    classify_cmd->add_option("--hidden", classify.hidden, "LSTM hidden units")
        ->capture_default_str();
    classify_cmd->add_option("--max-seq-len", classify.max_seq_len, "Tokens kept per description")
        ->capture_default_str();
    classify_cmd->add_flag("--ensemble,!--no-ensemble", classify.ensemble,
                           "Per-step losses and mean-log-prob prediction (default on)");
    classify_cmd->add_flag("--majority-vote", classify.majority_vote,
                           "Ensemble by per-step argmax votes instead of mean log-probs");
    classify_cmd->add_flag("--relu-on-output", classify.relu_on_output,
                           "Apply ReLU before the output head instead of on the recurrent state");

    GanOpts gan;
    CLI::App* gan_cmd = app.add_subcommand("gan", "Train the generator/discriminator pair");
    add_common(gan_cmd, gan.config, gan.seed);
    gan_cmd->add_option("--input", gan.input, "Labeled corpus CSV")->required();
    gan_cmd->add_option("--embeddings", gan.embeddings, "Embedding text file")->required();
    gan_cmd->add_option("--scaling", gan.scaling, "Min-max scaling JSON")->required();
    gan_cmd->add_option("--checkpoint-out", gan.checkpoint_out, "Checkpoint JSON for both networks")
        ->required();
    gan_cmd->add_option("--step-log-out", gan.step_log_out, "Per-step loss log CSV")->required();
    add_gan_options(gan_cmd, gan.gc, gan.keywords);

    GenerateOpts generate;
    CLI::App* generate_cmd =
        app.add_subcommand("generate", "Decode samples from a trained generator checkpoint");
    add_common(generate_cmd, generate.config, generate.seed);
    generate_cmd->add_option("--checkpoint", generate.checkpoint, "Checkpoint JSON from 'gan'")
        ->required();
    generate_cmd->add_option("--embeddings", generate.embeddings, "Embedding text file")
        ->required();
    generate_cmd->add_option("--scaling", generate.scaling, "Min-max scaling JSON")->required();
    generate_cmd->add_option("--samples", generate.samples, "Samples to print")
        ->capture_default_str();
    generate_cmd->add_flag("--cosine", generate.cosine,
                           "Decode by cosine similarity instead of Euclidean distance");
    generate_cmd->add_flag("--paper-literal-generator", generate.paper_literal,
                           "Match a checkpoint trained with --paper-literal-generator");

    SweepOpts sweep;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Train across a gamma grid and summarize keyword usage");
    sweep_cmd->add_option("--config", sweep.config, "JSON config file (flags take precedence)");
    sweep_cmd->add_option("--input", sweep.input, "Labeled corpus CSV")->required();
    sweep_cmd->add_option("--embeddings", sweep.embeddings, "Embedding text file")->required();
    sweep_cmd->add_option("--scaling", sweep.scaling, "Min-max scaling JSON")->required();
    sweep_cmd->add_option("--report-out", sweep.report_out, "Sweep report JSON");
    sweep_cmd->add_option("--table-out", sweep.table_out,
                          "Summary text file (default: print to stdout)");
    sweep_cmd->add_option("--gammas", sweep.gammas, "Gamma values, sorted ascending")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--seeds", sweep.seeds, "One training run per (gamma, seed)")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--samples", sweep.samples, "Decoded samples per run")
        ->capture_default_str();
    add_gan_options(sweep_cmd, sweep.gc, sweep.keywords);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (synth_cmd->parsed()) return cmd_synth(synth_cmd, synth);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest_cmd, ingest);
    if (glove_cmd->parsed()) return cmd_glove(glove_cmd, glove);
    if (classify_cmd->parsed()) return cmd_classify(classify_cmd, classify);
    if (gan_cmd->parsed()) return cmd_gan(gan_cmd, gan);
    if (generate_cmd->parsed()) return cmd_generate(generate_cmd, generate);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_cmd, sweep);
    return kExitUsage;
}
