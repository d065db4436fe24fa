#pragma once

// Experiment suites: YAML configuration, task execution, the results store
// (CSV + JSON index + checkpoints + selection records) and embedding export.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skan/bench.hpp"

namespace skan {

enum class TaskKind { Fit, Classify };

struct TaskConfig {
    std::string id;
    /// Fit function key or dataset name.
    std::string target;
    std::vector<std::string> methods;
    Head head = Head::FC;
    bool kan_only = false;
    TrainSchedule schedule;
};

struct SuiteConfig {
    std::string name = "suite";
    TaskKind kind = TaskKind::Fit;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path out_dir = "results";
    std::filesystem::path data_dir = "data";
    std::string pool_name = "default";
    std::vector<BasisDescriptor> pool = default_pool();
    std::size_t n_train = 3000;
    std::size_t n_test = 1000;
    /// Classification: leading items kept from each split, 0 keeps all.
    std::size_t train_subset = 0;
    std::size_t test_subset = 0;
    bool save_checkpoints = true;
    std::vector<TaskConfig> tasks;
};

/// Parses a suite file. Unknown keys are rejected.
SuiteConfig load_suite_config(const std::filesystem::path& path);
SuiteConfig parse_suite_config(const std::string& yaml_text);

/// Reduced budgets: fitting 15 x (8 + 8) cycles inside 400 epochs;
/// classification 1 + 1 epoch cycles, 3 final epochs, 10000 training images.
void apply_desk_scale(SuiteConfig& cfg);

/// FNV-1a 64-bit over a canonical rendering of one run's settings.
std::uint64_t config_hash(const SuiteConfig& suite, const TaskConfig& task, const std::string& method,
                          std::uint64_t seed);

struct ResultRow {
    std::string task;
    std::string target;
    std::string method;
    std::string head;
    std::uint64_t seed = 0;
    std::string metric_name;
    double metric = 0.0;
    std::size_t params = 0;
    double wall_seconds = 0.0;
    std::string config_hash;
    int pretrain_epochs = 0;
    int final_epochs = 0;
    std::string checkpoint;
    std::string selection;
    std::string status = "ok";
    std::string error;
};

struct RunFilter {
    std::optional<std::string> task;
    std::optional<std::string> method;
    std::optional<std::uint64_t> seed;
};

/// Progress messages: detail 0 marks run start/finish, detail 1 is one line
/// per training epoch.
using ProgressFn = std::function<void(int detail, const std::string& message)>;

struct SuiteResult {
    std::vector<ResultRow> rows;
    std::size_t errors() const;
};

/// Runs every (task, method, seed) combination. A failing run is recorded
/// as an error row and the suite carries on. Writes <out_dir>/results.csv,
/// <out_dir>/results.json, checkpoints/ and selections/.
SuiteResult run_suite(const SuiteConfig& cfg, const RunFilter& filter = {}, const ProgressFn& progress = {});
SuiteResult run_suite(const std::filesystem::path& config_path, const RunFilter& filter = {},
                      const ProgressFn& progress = {});

/// Reads results.json back.
std::vector<ResultRow> load_results(const std::filesystem::path& out_dir);

/// Median metric per (task, method) over seeds, as a fixed-width table.
std::string format_report(const std::vector<ResultRow>& rows);

/// Writes one row per sample: the penultimate activations followed by the
/// label, whitespace separated, %.17g. Returns the embedding width.
std::size_t export_embeddings(const Model& model, const Dataset& data, const std::filesystem::path& path,
                              std::size_t batch_size = 256);

struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<int> labels;
};
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

}  // namespace skan
