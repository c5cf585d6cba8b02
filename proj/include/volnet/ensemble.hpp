// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volnet/manifest.hpp"
#include "volnet/metrics.hpp"

namespace volnet {

/// One model's probabilities, keyed by sample id.
struct PredictionSet {
    std::string model_id;
    std::vector<std::pair<std::string, double>> rows;

    /// Ids unique, probabilities in [0, 1]. Throws DataError.
    void validate() const;
};

/// Per-sample arithmetic mean over >= 2 sets aligned by sample id. For each
/// sample the member probabilities are sorted ascending and folded with the
/// running mean m += (p - m) / k in double, so the result does not depend on
/// set order, reproduces equal inputs exactly and stays inside [min, max].
/// Output rows follow the first set's order; model_id is "ensemble".
/// Throws AlignmentError listing ids not present in every set.
PredictionSet fuse(std::span<const PredictionSet> sets);

/// Labels in `set` row order, looked up by id. Throws AlignmentError when the
/// id collections differ.
std::vector<int> aligned_labels(const PredictionSet& set, const Manifest& manifest);

EvalReport evaluate_predictions(const PredictionSet& set, const Manifest& manifest);
EvalReport fuse_and_evaluate(std::span<const PredictionSet> sets, const Manifest& manifest);

/// CSV `sample_id,probability` (header optional on read, always written).
PredictionSet parse_predictions(std::istream& in, const std::string& source_name);
PredictionSet read_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const PredictionSet& set);
void write_predictions(const std::filesystem::path& path, const PredictionSet& set);

}  // namespace volnet
