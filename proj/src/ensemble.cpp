// SPDX-License-Identifier: Apache-2.0
#include "volnet/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "volnet/errors.hpp"

namespace volnet {

namespace fs = std::filesystem;

namespace {

std::string list_ids(const std::vector<std::string>& ids) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(ids.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        out += (i ? ", " : "") + ids[i];
    }
    if (ids.size() > shown) {
        out += ", ... (" + std::to_string(ids.size()) + " total)";
    }
    return out;
}

}  // namespace

void PredictionSet::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& [id, p] : rows) {
        if (!seen.insert(id).second) {
            throw DataError(model_id + ": duplicate sample id '" + id + "'");
        }
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DataError(model_id + ": probability for '" + id + "' outside [0, 1]");
        }
    }
}

PredictionSet fuse(std::span<const PredictionSet> sets) {
    if (sets.size() < 2) {
        throw ArgumentError("fuse needs at least 2 prediction sets, got " + std::to_string(sets.size()));
    }
    std::vector<std::unordered_map<std::string, double>> lookup(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
        sets[s].validate();
        for (const auto& [id, p] : sets[s].rows) {
            lookup[s].emplace(id, p);
        }
    }

    // Every id that is missing from at least one set.
    std::vector<std::string> offenders;
    std::unordered_set<std::string> reported;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (const auto& [id, p] : sets[s].rows) {
            for (std::size_t t = 0; t < sets.size(); ++t) {
                if (!lookup[t].contains(id) && reported.insert(id).second) {
                    offenders.push_back(id);
                }
            }
        }
    }
    if (!offenders.empty()) {
        throw AlignmentError("prediction sets disagree on sample ids: " + list_ids(offenders));
    }

    PredictionSet out;
    out.model_id = "ensemble";
    out.rows.reserve(sets[0].rows.size());
    std::vector<double> members(sets.size());
    for (const auto& [id, p0] : sets[0].rows) {
        for (std::size_t s = 0; s < sets.size(); ++s) {
            members[s] = lookup[s].at(id);
        }
        std::sort(members.begin(), members.end());
        double mean = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            mean += (members[k] - mean) / static_cast<double>(k + 1);
        }
        out.rows.emplace_back(id, mean);
    }
    return out;
}

std::vector<int> aligned_labels(const PredictionSet& set, const Manifest& manifest) {
    std::unordered_map<std::string, int> labels;
    for (const auto& e : manifest.entries) {
        labels.emplace(e.path, e.label);
    }
    std::vector<int> out;
    out.reserve(set.rows.size());
    std::vector<std::string> missing;
    std::unordered_set<std::string> predicted;
    for (const auto& [id, p] : set.rows) {
        predicted.insert(id);
        auto it = labels.find(id);
        if (it == labels.end()) {
            missing.push_back(id);
        } else {
            out.push_back(it->second);
        }
    }
    for (const auto& e : manifest.entries) {
        if (!predicted.contains(e.path)) {
            missing.push_back(e.path);
        }
    }
    if (!missing.empty()) {
        throw AlignmentError("predictions and manifest disagree on sample ids: " + list_ids(missing));
    }
    return out;
}

EvalReport evaluate_predictions(const PredictionSet& set, const Manifest& manifest) {
    set.validate();
    const std::vector<int> labels = aligned_labels(set, manifest);
    std::vector<double> scores;
    scores.reserve(set.rows.size());
    for (const auto& [id, p] : set.rows) {
        scores.push_back(p);
    }
    return evaluate(scores, labels);
}

EvalReport fuse_and_evaluate(std::span<const PredictionSet> sets, const Manifest& manifest) {
    return evaluate_predictions(fuse(sets), manifest);
}

PredictionSet parse_predictions(std::istream& in, const std::string& source_name) {
    PredictionSet set;
    set.model_id = source_name;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_csv_line(line);
        if (fields.size() == 1 && fields[0].empty()) {
            continue;
        }
        const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
        if (first_content) {
            first_content = false;
            if (fields.size() >= 2 && fields[0] == "sample_id") {
                continue;
            }
        }
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(where + "expected 'sample_id,probability'");
        }
        std::size_t used = 0;
        double p = 0.0;
        try {
            p = std::stod(fields[1], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != fields[1].size()) {
            throw ParseError(where + "probability '" + fields[1] + "' is not a number");
        }
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ParseError(where + "probability " + fields[1] + " outside [0, 1]");
        }
        set.rows.emplace_back(fields[0], p);
    }
    set.validate();
    return set;
}

PredictionSet read_predictions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open predictions " + path.string());
    }
    return parse_predictions(in, path.string());
}

void write_predictions(std::ostream& out, const PredictionSet& set) {
    out << "sample_id,probability\n";
    char buf[64];
    for (const auto& [id, p] : set.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", p);
        out << id << ',' << buf << '\n';
    }
}

void write_predictions(const fs::path& path, const PredictionSet& set) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    write_predictions(out, set);
}

}  // namespace volnet
