#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmk/csv.hpp"
#include "dmk/rng.hpp"

namespace dmk {

// One marketplace listing.
struct ListingRecord {
    std::string id;
    std::string description;
    double price = 0.0;           // currency units per night
    int bedrooms = 0;
    double bathrooms = 0.0;
    std::string zipcode;
    double occupancy_rate = 0.0;  // fraction of available time booked, in [0,1]
};

enum class PopularityLabel { High = 0, Medium = 1, Low = 2 };

inline const char* to_string(PopularityLabel l) {
    switch (l) {
        case PopularityLabel::High: return "high";
        case PopularityLabel::Medium: return "medium";
        case PopularityLabel::Low: return "low";
    }
    return "?";
}

inline PopularityLabel popularity_from_string(const std::string& s) {
    if (s == "high") return PopularityLabel::High;
    if (s == "medium") return PopularityLabel::Medium;
    if (s == "low") return PopularityLabel::Low;
    throw std::invalid_argument("unknown popularity label '" + s + "'");
}

struct LabeledRecord {
    ListingRecord record;
    PopularityLabel label;
};

// ---------------------------------------------------------------------------
// Tokenization: lowercase, split on whitespace, strip leading/trailing ASCII
// punctuation from each token, drop empties. Interior punctuation stays.

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::size_t lo = start, hi = i;
        while (lo < hi && std::ispunct(static_cast<unsigned char>(text[lo]))) ++lo;
        while (hi > lo && std::ispunct(static_cast<unsigned char>(text[hi - 1]))) --hi;
        if (lo == hi) continue;
        std::string tok = text.substr(lo, hi - lo);
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary: tokens occurring >= min_count, ordered by descending frequency
// then lexicographically, with a reserved out-of-vocabulary slot appended.

class Vocabulary {
public:
    static constexpr const char* kOovToken = "<oov>";

    Vocabulary() { finalize({}); }

    Vocabulary(std::vector<std::string> ordered_tokens, int min_count)
        : min_count_(min_count) {
        finalize(std::move(ordered_tokens));
    }

    std::size_t size() const { return index_to_token_.size(); }  // includes OOV
    std::size_t oov_index() const { return index_to_token_.size() - 1; }
    int min_count() const { return min_count_; }

    std::size_t index_of(const std::string& token) const {
        auto it = token_to_index_.find(token);
        return it == token_to_index_.end() ? oov_index() : it->second;
    }

    bool contains(const std::string& token) const {
        return token_to_index_.find(token) != token_to_index_.end();
    }

    const std::string& token_at(std::size_t index) const { return index_to_token_.at(index); }
    const std::vector<std::string>& tokens() const { return index_to_token_; }

private:
    void finalize(std::vector<std::string> ordered) {
        index_to_token_ = std::move(ordered);
        index_to_token_.push_back(kOovToken);
        for (std::size_t i = 0; i < index_to_token_.size(); ++i)
            token_to_index_[index_to_token_[i]] = i;
    }

    std::vector<std::string> index_to_token_;
    std::unordered_map<std::string, std::size_t> token_to_index_;
    int min_count_ = 1;
};

inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_lists,
                                   int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocabulary: min_count must be >= 1");
    std::map<std::string, long> counts;
    for (const auto& doc : token_lists)
        for (const auto& tok : doc) ++counts[tok];

    std::vector<std::pair<std::string, long>> retained;
    for (const auto& [tok, n] : counts)
        if (n >= min_count) retained.emplace_back(tok, n);
    std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> ordered;
    ordered.reserve(retained.size());
    for (auto& [tok, n] : retained) ordered.push_back(std::move(tok));
    return Vocabulary(std::move(ordered), min_count);
}

// ---------------------------------------------------------------------------
// CSV ingestion.

struct ParseReport {
    long rows_read = 0;
    long rows_rejected = 0;
    std::map<std::string, long> reasons;

    std::string to_json() const {
        nlohmann::json reasons_json = nlohmann::json::object();
        for (const auto& [reason, n] : reasons) reasons_json[reason] = n;
        nlohmann::json doc = {
            {"rows_read", rows_read}, {"rows_rejected", rows_rejected}, {"reasons", reasons_json}};
        return doc.dump(2) + "\n";
    }
};

inline const std::vector<std::string>& listing_csv_header() {
    static const std::vector<std::string> header = {
        "id", "description", "price", "bedrooms", "bathrooms", "zipcode", "occupancy_rate"};
    return header;
}

namespace detail {

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<int> parse_int(const std::string& s) {
    auto d = parse_double(s);
    if (!d || *d != std::floor(*d)) return std::nullopt;
    return static_cast<int>(*d);
}

}  // namespace detail

// One record per valid data row, row order preserved. Malformed rows are
// skipped and counted per reason; a bad row never aborts the parse.
inline std::vector<ListingRecord> parse_listings(std::istream& in, ParseReport& report) {
    auto rows = csv::parse(in);
    if (rows.empty()) throw std::runtime_error("parse_listings: input has no header row");

    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < rows[0].size(); ++i) columns[rows[0][i]] = i;
    for (const auto& field : listing_csv_header())
        if (!columns.count(field))
            throw std::runtime_error("parse_listings: header is missing column '" + field + "'");

    std::vector<ListingRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++report.rows_read;
        auto reject = [&](const std::string& reason) {
            ++report.rows_rejected;
            ++report.reasons[reason];
        };
        if (row.size() != rows[0].size()) {
            reject("wrong field count");
            continue;
        }
        ListingRecord rec;
        rec.id = row[columns["id"]];
        rec.description = row[columns["description"]];
        rec.zipcode = row[columns["zipcode"]];
        auto price = detail::parse_double(row[columns["price"]]);
        auto bedrooms = detail::parse_int(row[columns["bedrooms"]]);
        auto bathrooms = detail::parse_double(row[columns["bathrooms"]]);
        auto occupancy = detail::parse_double(row[columns["occupancy_rate"]]);
        if (!price) { reject("unparseable price"); continue; }
        if (*price < 0) { reject("negative price"); continue; }
        if (!bedrooms || *bedrooms < 0) { reject("invalid bedrooms"); continue; }
        if (!bathrooms || *bathrooms < 0) { reject("invalid bathrooms"); continue; }
        if (!occupancy) { reject("unparseable occupancy_rate"); continue; }
        if (*occupancy < 0.0 || *occupancy > 1.0) { reject("occupancy_rate out of [0,1]"); continue; }
        rec.price = *price;
        rec.bedrooms = *bedrooms;
        rec.bathrooms = *bathrooms;
        rec.occupancy_rate = *occupancy;
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<std::string> listing_to_fields(const ListingRecord& r) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    return {r.id, r.description, num(r.price), std::to_string(r.bedrooms),
            num(r.bathrooms), r.zipcode, num(r.occupancy_rate)};
}

inline void write_listings_csv(std::ostream& out, const std::vector<ListingRecord>& records) {
    csv::write_row(out, listing_csv_header());
    for (const auto& r : records) csv::write_row(out, listing_to_fields(r));
}

inline void write_labeled_csv(std::ostream& out, const std::vector<LabeledRecord>& records) {
    auto header = listing_csv_header();
    header.push_back("label");
    csv::write_row(out, header);
    for (const auto& lr : records) {
        auto fields = listing_to_fields(lr.record);
        fields.push_back(to_string(lr.label));
        csv::write_row(out, fields);
    }
}

inline std::vector<LabeledRecord> read_labeled_csv(std::istream& in) {
    auto rows = csv::parse(in);
    if (rows.empty()) throw std::runtime_error("read_labeled_csv: input has no header row");
    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < rows[0].size(); ++i) columns[rows[0][i]] = i;
    auto expected = listing_csv_header();
    expected.push_back("label");
    for (const auto& field : expected)
        if (!columns.count(field))
            throw std::runtime_error("read_labeled_csv: header is missing column '" + field + "'");

    std::vector<LabeledRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != rows[0].size())
            throw std::runtime_error("read_labeled_csv: row " + std::to_string(r) +
                                     " has wrong field count");
        LabeledRecord lr;
        lr.record.id = row[columns["id"]];
        lr.record.description = row[columns["description"]];
        lr.record.price = std::stod(row[columns["price"]]);
        lr.record.bedrooms = std::stoi(row[columns["bedrooms"]]);
        lr.record.bathrooms = std::stod(row[columns["bathrooms"]]);
        lr.record.zipcode = row[columns["zipcode"]];
        lr.record.occupancy_rate = std::stod(row[columns["occupancy_rate"]]);
        lr.label = popularity_from_string(row[columns["label"]]);
        out.push_back(std::move(lr));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Popularity stratification.

inline double price_per_bedroom(const ListingRecord& r) {
    // Studios (0 bedrooms) count as one sleeping space.
    return r.price / static_cast<double>(std::max(r.bedrooms, 1));
}

struct BinSummary {
    long bin_index = 0;
    std::size_t count = 0;
    std::size_t high_cut = 0;    // first index labeled Medium
    std::size_t medium_cut = 0;  // first index labeled Low
    double high_floor = 0.0;     // lowest occupancy labeled High
    double medium_floor = 0.0;   // lowest occupancy labeled Medium (or High's if empty)
};

struct StratifiedDataset {
    std::vector<LabeledRecord> records;
    double bin_width = 30.0;
    std::vector<BinSummary> bins;
};

// Bins records by floor(price_per_bedroom / bin_width); within each bin sorts
// by occupancy descending (ties by id ascending) and labels the top ceil(n/3)
// High, through ceil(2n/3) Medium, the rest Low. Bins are concatenated in
// ascending bin order.
inline StratifiedDataset stratify(const std::vector<ListingRecord>& records,
                                  double bin_width = 30.0) {
    if (records.empty()) throw std::invalid_argument("stratify: no records");
    if (bin_width <= 0.0) throw std::invalid_argument("stratify: bin_width must be positive");

    std::map<long, std::vector<const ListingRecord*>> bins;
    for (const auto& r : records) {
        long bin = static_cast<long>(std::floor(price_per_bedroom(r) / bin_width));
        bins[bin].push_back(&r);
    }

    StratifiedDataset out;
    out.bin_width = bin_width;
    for (auto& [bin_index, members] : bins) {
        std::sort(members.begin(), members.end(),
                  [](const ListingRecord* a, const ListingRecord* b) {
                      if (a->occupancy_rate != b->occupancy_rate)
                          return a->occupancy_rate > b->occupancy_rate;
                      return a->id < b->id;
                  });
        std::size_t n = members.size();
        std::size_t cut1 = (n + 2) / 3;          // ceil(n/3)
        std::size_t cut2 = (2 * n + 2) / 3;      // ceil(2n/3)
        for (std::size_t i = 0; i < n; ++i) {
            PopularityLabel label = i < cut1   ? PopularityLabel::High
                                    : i < cut2 ? PopularityLabel::Medium
                                               : PopularityLabel::Low;
            out.records.push_back({*members[i], label});
        }
        BinSummary summary;
        summary.bin_index = bin_index;
        summary.count = n;
        summary.high_cut = cut1;
        summary.medium_cut = cut2;
        summary.high_floor = members[cut1 - 1]->occupancy_rate;
        summary.medium_floor = members[cut2 - 1]->occupancy_rate;
        out.bins.push_back(summary);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Train/test split.

struct SplitDataset {
    std::vector<LabeledRecord> train;
    std::vector<LabeledRecord> test;
    std::uint64_t seed = 0;
    double ratio = 0.7;
};

inline SplitDataset train_test_split(const std::vector<LabeledRecord>& records, double ratio,
                                     std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("train_test_split: ratio must be in (0,1)");
    if (records.size() < 2)
        throw std::invalid_argument("train_test_split: need at least 2 records");

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng(seed).substream("split");
    rng.shuffle(order);

    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(records.size())));
    SplitDataset out;
    out.seed = seed;
    out.ratio = ratio;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? out.train : out.test).push_back(records[order[i]]);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus. Each class owns a disjoint marker-word set and a disjoint
// occupancy range; descriptions mix shared filler words with 1..max markers
// of the record's class, so the generating class is recoverable both from
// the text and from the occupancy rate.

struct SyntheticClassProfile {
    std::vector<std::string> markers;
    double occupancy_min = 0.0;
    double occupancy_max = 1.0;
};

struct SyntheticSpec {
    // Indexed by PopularityLabel: High, Medium, Low.
    std::vector<SyntheticClassProfile> classes;
    std::vector<std::string> fillers;
    double price_min = 10.0;
    double price_max = 29.0;  // keeps everything in the first $30 bin
    std::size_t min_tokens = 8;
    std::size_t max_tokens = 16;
    std::size_t max_markers = 3;

    static SyntheticSpec standard() {
        SyntheticSpec s;
        s.classes = {
            {{"stunning", "luxury", "gorgeous", "prime"}, 0.70, 1.00},
            {{"comfortable", "practical", "tidy", "friendly"}, 0.35, 0.65},
            {{"basic", "plain", "budget", "bare"}, 0.00, 0.30},
        };
        s.fillers = {"apartment", "room",  "near",    "subway", "parking", "street",
                     "block",     "quiet", "sunny",   "spacious", "cozy",  "walk",
                     "the",       "a",     "with",    "and",      "in",    "to",
                     "laundry",   "unit",  "entire",  "on",       "for",   "perfect"};
        return s;
    }
};

inline std::vector<ListingRecord> generate_synthetic_corpus(const SyntheticSpec& spec,
                                                            std::size_t n, std::uint64_t seed) {
    if (spec.classes.size() != 3)
        throw std::invalid_argument("generate_synthetic_corpus: spec must define 3 classes");
    if (n < 3) throw std::invalid_argument("generate_synthetic_corpus: n must be >= 3");
    std::set<std::string> seen;
    for (const auto& cls : spec.classes) {
        if (cls.markers.empty())
            throw std::invalid_argument("generate_synthetic_corpus: empty marker set");
        for (const auto& m : cls.markers)
            if (!seen.insert(m).second)
                throw std::invalid_argument(
                    "generate_synthetic_corpus: marker sets overlap on '" + m + "'");
    }

    Rng rng = Rng(seed).substream("corpus");
    std::vector<ListingRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cls = static_cast<std::size_t>(i % 3);
        const auto& profile = spec.classes[cls];

        std::size_t len = spec.min_tokens + rng.uniform_index(spec.max_tokens - spec.min_tokens + 1);
        std::vector<std::string> tokens;
        tokens.reserve(len);
        for (std::size_t t = 0; t < len; ++t)
            tokens.push_back(spec.fillers[rng.uniform_index(spec.fillers.size())]);
        std::size_t n_markers = 1 + rng.uniform_index(spec.max_markers);
        for (std::size_t m = 0; m < n_markers; ++m) {
            const std::string& marker = profile.markers[rng.uniform_index(profile.markers.size())];
            tokens[rng.uniform_index(tokens.size())] = marker;
        }
        // The overwrite above may collide; guarantee at least one marker.
        bool has_marker = false;
        for (const auto& t : tokens)
            for (const auto& m : profile.markers)
                if (t == m) has_marker = true;
        if (!has_marker) tokens[0] = profile.markers[0];

        std::string text;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            if (t) text += ' ';
            text += tokens[t];
        }

        ListingRecord rec;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "syn-%05zu", i);
        rec.id = idbuf;
        rec.description = std::move(text);
        rec.price = rng.uniform(spec.price_min, spec.price_max);
        rec.bedrooms = 1;
        rec.bathrooms = 1.0;
        rec.zipcode = "00000";
        rec.occupancy_rate = rng.uniform(profile.occupancy_min, profile.occupancy_max);
        out.push_back(std::move(rec));
    }
    return out;
}

// Class a synthetic record was generated from (by construction of the ids).
inline PopularityLabel synthetic_class_of(std::size_t index) {
    return static_cast<PopularityLabel>(index % 3);
}

}  // namespace dmk
