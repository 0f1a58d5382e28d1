#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relevagan/data.hpp"
#include "relevagan/drl.hpp"
#include "relevagan/gan.hpp"

namespace relevagan::harness {

enum class ModelKind { relevagan, evagan, acgan };

std::string to_string(ModelKind m);
ModelKind model_from_string(const std::string& s);

struct ExperimentConfig {
    ModelKind model = ModelKind::relevagan;

    // Either a CSV path or synthetic fixture parameters.
    std::string dataset_path;
    std::size_t fixture_normal = 5000;
    std::size_t fixture_bot = 200;
    std::size_t fixture_features = 16;
    double fixture_separation = 4.0;

    std::string label_column = "Label";
    std::vector<std::string> bot_labels = {"bot", "Virut", "Ares", "Zeus", "Botnet"};

    std::size_t epochs = 150;
    std::size_t batch_size = 256;
    double train_fraction = 0.8;
    std::size_t eval_gen_rows = 256;

    double tol = 0.1;    // detection-metric convergence tolerance
    double tol_v = 0.5;  // gen_validity tolerance

    // Stop the epoch loop once the three detection metrics settle within
    // tol (real_normal_est high, real_bot_eva and fake_bot_eva low).
    bool early_stop_detection = false;

    gan::GanConfig gan;
    drl::DrlConfig drl;

    std::uint64_t seed = 0;
    std::string out_dir = "run";

    // Reports: write a fixed per-epoch seconds value instead of wall clock,
    // so identical runs produce bit-identical files.
    bool deterministic_seconds = false;

    // Debug hook: force the detector seen by the DRL environment to a
    // constant class probability.
    std::optional<double> debug_force_c;

    // Record the Algorithm-1 step sequence per batch.
    bool debug_audit = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double d_loss_real = 0.0;
    double d_loss_fake = 0.0;
    double d_loss_normal = 0.0;
    double g_loss = 0.0;
    double gen_validity = 0.0;
    double fake_bot_eva = 0.0;
    double real_normal_est = 0.0;
    double real_bot_eva = 0.0;
    std::size_t evasions = 0;
    double seconds = 0.0;
};

struct Estimations {
    double gen_validity = 0.0;
    double fake_bot_eva = 0.0;
    double real_normal_est = 0.0;
    double real_bot_eva = 0.0;
};

struct EvasionAudit {
    std::vector<double> seed;
    std::vector<double> evasion;
};

struct RunArtifacts {
    std::vector<EpochRecord> records;
    std::optional<std::size_t> convergence_epoch;
    double total_seconds = 0.0;
    double total_train_seconds = 0.0;
    ExperimentConfig config;
    std::vector<std::vector<int>> step_audit;    // per batch, when debug_audit
    std::vector<EvasionAudit> evasion_audit;     // every evasion with its seed
    data::DeltaVector deltas;                    // perturbation quanta in effect
    data::ActionFeatureMap action_map;
};

/// Four estimation metrics over generated rows and held-out test rows; pure
/// inference, no parameter updates.
Estimations evaluate_estimations(const gan::TwoHeadDiscriminator& d,
                                 gan::Generator& gen, const Matrix& test_normal,
                                 const Matrix& test_bot, std::size_t n_gen,
                                 std::uint64_t seed);

/// Full training run; writes epochs.csv, run.json, scaler and checkpoints
/// under config.out_dir, flushing the epoch log incrementally.
RunArtifacts train(const ExperimentConfig& config);

std::optional<std::size_t> convergence_epoch(const std::vector<EpochRecord>& records,
                                             double tol, double tol_v);

struct RunSummary {
    std::string dir;
    std::string model;
    std::string dataset;
    std::uint64_t seed = 0;
    std::optional<std::size_t> convergence_epoch;
    EpochRecord final_record;
    double total_seconds = 0.0;
};

struct ComparisonReport {
    std::vector<RunSummary> runs;  // ordered by convergence epoch
    std::string text;
};

/// Tabulate completed runs; rejects runs on mismatched datasets.
ComparisonReport compare(const std::vector<std::string>& run_dirs);

// Config file I/O: flat key = value lines, '#' comments.
ExperimentConfig load_config(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value);

// Report I/O.
std::string format_epoch_row(const EpochRecord& r);
extern const char* kEpochsCsvHeader;
void write_run_json(const RunArtifacts& art, const std::string& path);
std::vector<EpochRecord> read_epochs_csv(const std::string& path);
RunSummary read_run_summary(const std::string& dir);

}  // namespace relevagan::harness
