#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinal/codec.hpp"
#include "spinal/protocol.hpp"

namespace spinal {

struct ExperimentConfig {
    std::vector<double> snr_list;
    uint32_t blocks_per_snr = 100;

    // Code geometry (paper-experiment defaults).
    uint32_t n = 1024;
    uint32_t k = 4;
    uint32_t c = 6;
    uint32_t beam_width = 256;
    double beta_trunc = 4.0;
    uint32_t v = 32;
    uint32_t w = 32;

    uint32_t lambda = 32;
    uint32_t i_max = 50;
    double v_a = 1.0;
    uint64_t master_seed = 1;
    /// Derive parameters at snr + snr_offset while generating data at snr
    /// (estimated-vs-true SNR mismatch).
    double snr_offset = 0.0;
    /// Zero-noise override: z = 0 with the exact raw-data realization, so
    /// the difference algebra round-trips bit-exactly.
    bool zero_noise = false;

    enum class Mode { kInProcess, kListen, kConnect };
    Mode mode = Mode::kInProcess;
    std::string addr = "127.0.0.1:7160";

    std::string out_csv;
    std::string out_json;
    uint32_t threads = 0;  ///< worker pool size; 0 = hardware concurrency

    /// Called with the bound port in listen mode (ephemeral ports).
    std::function<void(uint16_t)> on_listening;

    void validate() const;  ///< throws std::invalid_argument
};

struct BlockRecord {
    uint32_t snr_index = 0;
    uint32_t block_index = 0;
    double snr = 0.0;  ///< true channel SNR
    uint64_t seed = 0;
    OutcomeRecord outcome;
};

struct SnrAggregate {
    double snr = 0.0;
    uint32_t blocks = 0;
    double beta_mean = 0.0, beta_min = 0.0, beta_max = 0.0, beta_median = 0.0;
    double fer = 0.0;
    double iters_mean = 0.0;
    double l_mean = 0.0;
    double wall_millis = 0.0;
    std::optional<double> table1_proposed;  ///< reference column when the SNR
    std::optional<double> table1_ref18;     ///< matches a published row
};

struct AggregateReport {
    std::vector<SnrAggregate> rows;
};

/// Per-block seed: every (snr point, block) pair gets an independent stream.
uint64_t block_seed(uint64_t master_seed, uint32_t snr_index, uint32_t block_index);

/// Groups records by snr_index and reduces them: FER over all blocks, beta
/// statistics over successful blocks only, iteration/pass means over all.
/// Throws std::invalid_argument on an empty record set.
AggregateReport aggregate(std::span<const BlockRecord> records);

/// Reference efficiencies (percent) published for this SNR, if any.
std::optional<std::pair<double, double>> table1_reference(double snr);

/// Runs the full grid, writes one JSON line per block plus aggregate lines
/// (out_json) and the aggregate CSV (out_csv). Output paths are opened
/// before any simulation starts. Deterministic for a fixed master_seed in
/// in-process mode (timing fields excepted).
AggregateReport run_experiment(const ExperimentConfig& config);

/// Writes the CSV (header snr,beta_mean,fer,iters_mean,L_mean,blocks) and,
/// when json_path is non-empty, config echo + block + aggregate JSON lines.
void emit_outputs(const AggregateReport& report, std::span<const BlockRecord> records,
                  const ExperimentConfig& config, const std::string& csv_path,
                  const std::string& json_path);

/// Canonical JSON echo of a config and its CRC-32 (reproducibility stamp).
std::string config_echo_json(const ExperimentConfig& config);
uint32_t config_hash(const ExperimentConfig& config);

}  // namespace spinal
