#pragma once

#include <json.hpp>
#include <string>

#include "fpk/trainer.hpp"

namespace fpk {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
    std::string out_dir = "solver_out";
    int threads = 0;            // 0: hardware concurrency
    bool deterministic = false; // requires a config seed
};

/// Executes a full experiment: training (nominal + refinement loop) plus
/// all artifacts (manifest, run record, metrics, CSV dumps, snapshot).
/// Returns the process exit status; on failure the partial artifacts and
/// an error field in the manifest are still written.
int run_experiment(TrainingConfig config, const RunOptions& options);

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);
RunRecord load_run_record(const std::string& path);

nlohmann::json metrics_to_json(const Metrics& metrics);

/// Side-by-side table of two run records (final entries). Returns the
/// aligned text table; `csv_out`, when non-null, receives the CSV form.
std::string compare_records(const RunRecord& a, const RunRecord& b, std::string* csv_out);
std::string compare_record_files(const std::string& path_a, const std::string& path_b,
                                 std::string* csv_out);

/// FNV-1a 64-bit content hash, hex-encoded; used in the manifest.
std::string file_hash_hex(const std::string& path);

}  // namespace fpk
