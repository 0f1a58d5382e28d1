#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relevagan/matrix.hpp"

namespace relevagan::data {

enum class Label { normal, bot };

/// The 13 flow features the attacker may perturb.
inline constexpr std::size_t kActionSpaceSize = 13;
extern const std::array<std::string, kActionSpaceSize> kActionFeatureNames;

struct FlowDataset {
    std::vector<std::string> feature_names;
    Matrix X;                  // samples x features
    std::vector<Label> y;      // per-sample class
    bool scaled = false;
    std::string provenance;

    std::size_t count(Label l) const;
    std::vector<std::size_t> indices(Label l) const;
};

struct LoadReport {
    FlowDataset dataset;
    std::size_t n_normal = 0;
    std::size_t n_bot = 0;
    std::size_t dropped_rows = 0;
};

/// Per-feature min/max fitted on a training split.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;
};

struct ActionFeatureMap {
    std::vector<std::string> names;        // length 13
    std::vector<std::size_t> indices;      // columns in the dataset, unique
};

/// Per-action-feature perturbation quantum, all entries strictly positive.
struct DeltaVector {
    std::vector<double> values;  // length 13
};

inline constexpr double kDeltaFallback = 1e-3;

/// Parse a CICFlowMeter-style CSV. Rows with unparseable numerics are
/// dropped and counted. Label strings in bot_labels map to Label::bot,
/// everything else to Label::normal.
LoadReport load_csv(const std::string& path, const std::string& label_column,
                    const std::set<std::string>& bot_labels);

ScalerParams fit_scaler(const FlowDataset& ds);
FlowDataset apply_scaler(const FlowDataset& ds, const ScalerParams& p);
FlowDataset invert_scaler(const FlowDataset& ds, const ScalerParams& p);

void save_scaler(const ScalerParams& p, const std::string& path);
ScalerParams load_scaler(const std::string& path);

/// Resolve the 13 action features against the dataset schema; missing
/// columns are a hard error.
ActionFeatureMap make_action_map(const FlowDataset& ds);

/// Delta rule: per action feature, the minimum strictly-positive value over
/// all rows; kDeltaFallback when a column has no positive value.
DeltaVector compute_deltas(const FlowDataset& ds, const ActionFeatureMap& map);

struct Split {
    FlowDataset train;
    FlowDataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Stratified deterministic split; rejects classes with fewer than 2 samples.
Split split(const FlowDataset& ds, double train_fraction, std::uint64_t seed);

Matrix sample_batch(const FlowDataset& ds, Label cls, std::size_t size,
                    std::uint64_t seed, bool with_replacement);

/// Desk-scale synthetic stand-in: two Gaussian clusters whose means differ
/// by +/- separation per feature, clipped non-negative, with the 13 action
/// feature names first in the schema.
FlowDataset synth_fixture(std::size_t n_normal, std::size_t n_bot,
                          std::size_t n_features, double separation,
                          std::uint64_t seed);

void save_csv(const FlowDataset& ds, const std::string& path,
              const std::string& label_column = "Label");

}  // namespace relevagan::data
