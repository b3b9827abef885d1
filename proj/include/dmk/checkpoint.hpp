#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmk/tape.hpp"

namespace dmk {

// Doubles are written with 17 significant digits so a save/load round trip
// reproduces every bit.
inline std::string format_double_exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Flat JSON map: name -> {shape, values}, keys sorted by name.
inline std::string checkpoint_to_json(const std::vector<Parameter*>& params) {
    std::map<std::string, const Parameter*> by_name;
    for (const Parameter* p : params) {
        if (!by_name.emplace(p->name, p).second)
            throw std::invalid_argument("checkpoint: duplicate parameter name '" + p->name + "'");
    }
    std::ostringstream out;
    out << "{\n";
    bool first = true;
    for (const auto& [name, p] : by_name) {
        if (!first) out << ",\n";
        first = false;
        out << "  " << nlohmann::json(name).dump() << ": {\"shape\": [";
        for (std::size_t i = 0; i < p->value.rank(); ++i) {
            if (i) out << ", ";
            out << p->value.dim(i);
        }
        out << "], \"values\": [";
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            if (i) out << ", ";
            out << format_double_exact(p->value[i]);
        }
        out << "]}";
    }
    out << "\n}\n";
    return out.str();
}

inline void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    f << checkpoint_to_json(params);
    if (!f) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

// Loads into an existing parameter set; names and shapes must match exactly.
inline void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw std::runtime_error("checkpoint: top level must be an object");

    std::size_t used = 0;
    for (Parameter* p : params) {
        auto it = doc.find(p->name);
        if (it == doc.end())
            throw std::runtime_error("checkpoint: missing parameter '" + p->name + "'");
        const auto& entry = *it;
        std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
        std::vector<double> values = entry.at("values").get<std::vector<double>>();
        if (shape != p->value.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + p->name + "': file " +
                                     Tensor::shape_string(shape) + " vs model " +
                                     p->value.shape_string());
        p->value = Tensor(std::move(shape), std::move(values));
        p->grad = Tensor::zeros(p->value.shape());
        ++used;
    }
    if (used != doc.size())
        throw std::runtime_error("checkpoint: file has " + std::to_string(doc.size()) +
                                 " entries but the model expects " + std::to_string(used));
}

}  // namespace dmk
