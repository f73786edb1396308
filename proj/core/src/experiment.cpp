#include "spinal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "spinal/channel.hpp"
#include "spinal/errors.hpp"
#include "spinal/hash.hpp"
#include "spinal/transport.hpp"

namespace spinal {

using ordered_json = nlohmann::ordered_json;

void ExperimentConfig::validate() const {
    if (snr_list.empty())
        throw std::invalid_argument("ExperimentConfig: snr_list is empty");
    for (double snr : snr_list) {
        if (!(snr > 0.0))
            throw std::invalid_argument("ExperimentConfig: snr values must be positive");
        if (!(snr + snr_offset > 0.0))
            throw std::invalid_argument(
                "ExperimentConfig: snr + snr_offset must stay positive");
    }
    if (blocks_per_snr < 1)
        throw std::invalid_argument("ExperimentConfig: blocks_per_snr must be >= 1");
    if (!(v_a > 0.0))
        throw std::invalid_argument("ExperimentConfig: v_a must be positive");
    CodecConfig codec;
    codec.n = n;
    codec.k = k;
    codec.c = c;
    codec.beam_width = beam_width;
    codec.beta_trunc = beta_trunc;
    codec.v = v;
    codec.w = w;
    codec.validate();
}

uint64_t block_seed(uint64_t master_seed, uint32_t snr_index, uint32_t block_index) {
    return splitmix64(master_seed ^
                      splitmix64((uint64_t(snr_index) << 32) | block_index));
}

std::optional<std::pair<double, double>> table1_reference(double snr) {
    // Published comparison rows: SNR, proposed scheme %, Ref.[18] %.
    static constexpr struct {
        double snr, proposed, ref18;
    } kRows[] = {
        {0.0277, 96.89, 96.40}, {0.0280, 97.16, 96.38}, {0.0286, 96.62, 96.36},
        {0.0299, 96.68, 96.46}, {0.0306, 96.59, 96.59}, {0.0314, 96.85, 96.40},
        {0.0690, 95.16, 95.16}, {0.0710, 95.58, 95.39}, {0.0730, 95.18, 95.43},
        {0.0770, 95.94, 95.68}, {0.0790, 96.13, 95.36}, {0.0810, 95.76, 95.22},
        {0.1430, 93.29, 93.35}, {0.1480, 95.23, 93.41}, {0.1530, 95.19, 93.48},
        {0.1630, 95.50, 93.64}, {0.1690, 94.92, 93.22}, {0.1760, 94.60, 93.21},
    };
    for (const auto& row : kRows)
        if (std::fabs(row.snr - snr) <= 1e-9)
            return std::make_pair(row.proposed, row.ref18);
    return std::nullopt;
}

AggregateReport aggregate(std::span<const BlockRecord> records) {
    if (records.empty())
        throw std::invalid_argument("aggregate: no records");

    std::map<uint32_t, std::vector<const BlockRecord*>> buckets;
    for (const BlockRecord& rec : records)
        buckets[rec.snr_index].push_back(&rec);

    AggregateReport report;
    for (auto& [snr_index, bucket] : buckets) {
        SnrAggregate agg;
        agg.snr = bucket.front()->snr;
        agg.blocks = uint32_t(bucket.size());

        std::vector<double> betas;
        uint32_t failed = 0;
        double iters = 0.0, passes = 0.0, wall = 0.0;
        for (const BlockRecord* rec : bucket) {
            const OutcomeRecord& o = rec->outcome;
            if (o.success)
                betas.push_back(o.beta_eff);
            else
                failed += 1;
            iters += o.iterations;
            passes += o.passes_used;
            wall += o.millis;
        }
        agg.fer = double(failed) / double(bucket.size());
        agg.iters_mean = iters / double(bucket.size());
        agg.l_mean = passes / double(bucket.size());
        agg.wall_millis = wall;
        if (!betas.empty()) {
            std::sort(betas.begin(), betas.end());
            agg.beta_min = betas.front();
            agg.beta_max = betas.back();
            double sum = 0.0;
            for (double b : betas) sum += b;
            agg.beta_mean = sum / double(betas.size());
            const size_t mid = betas.size() / 2;
            agg.beta_median = (betas.size() % 2) ? betas[mid]
                                                 : 0.5 * (betas[mid - 1] + betas[mid]);
        }
        if (auto ref = table1_reference(agg.snr)) {
            agg.table1_proposed = ref->first;
            agg.table1_ref18 = ref->second;
        }
        report.rows.push_back(agg);
    }
    return report;
}

namespace {

const char* mode_name(ExperimentConfig::Mode mode) {
    switch (mode) {
        case ExperimentConfig::Mode::kInProcess: return "inprocess";
        case ExperimentConfig::Mode::kListen: return "listen";
        case ExperimentConfig::Mode::kConnect: return "connect";
    }
    return "?";
}

ordered_json config_json(const ExperimentConfig& c) {
    ordered_json j;
    j["snr_list"] = c.snr_list;
    j["blocks_per_snr"] = c.blocks_per_snr;
    j["n"] = c.n;
    j["k"] = c.k;
    j["c"] = c.c;
    j["B"] = c.beam_width;
    j["beta_trunc"] = c.beta_trunc;
    j["v"] = c.v;
    j["w"] = c.w;
    j["lambda"] = c.lambda;
    j["i_max"] = c.i_max;
    j["v_a"] = c.v_a;
    j["master_seed"] = c.master_seed;
    j["snr_offset"] = c.snr_offset;
    j["zero_noise"] = c.zero_noise;
    j["mode"] = mode_name(c.mode);
    return j;
}

ordered_json block_json(const BlockRecord& rec) {
    ordered_json j;
    j["type"] = "block";
    j["snr_index"] = rec.snr_index;
    j["block_index"] = rec.block_index;
    j["snr"] = rec.snr;
    j["seed"] = rec.seed;
    j["success"] = rec.outcome.success;
    j["L"] = rec.outcome.passes_used;
    j["iterations"] = rec.outcome.iterations;
    j["R"] = rec.outcome.code_rate;
    j["beta"] = rec.outcome.beta_eff;
    j["leaked_bits"] = rec.outcome.leaked_bits;
    j["millis"] = rec.outcome.millis;
    if (rec.outcome.aborted)
        j["aborted"] = true;
    return j;
}

ordered_json aggregate_json(const SnrAggregate& agg) {
    ordered_json j;
    j["type"] = "aggregate";
    j["snr"] = agg.snr;
    j["blocks"] = agg.blocks;
    j["beta_mean"] = agg.beta_mean;
    j["beta_median"] = agg.beta_median;
    j["beta_min"] = agg.beta_min;
    j["beta_max"] = agg.beta_max;
    j["fer"] = agg.fer;
    j["iters_mean"] = agg.iters_mean;
    j["L_mean"] = agg.l_mean;
    j["wall_millis"] = agg.wall_millis;
    if (agg.table1_proposed) {
        j["table1_proposed"] = *agg.table1_proposed;
        j["table1_ref18"] = *agg.table1_ref18;
    }
    return j;
}

struct BlockTask {
    uint32_t snr_index;
    uint32_t block_index;
    double snr;
};

// One in-process block: loopback pipe, Alice on a helper thread, Bob inline.
BlockRecord run_block_inprocess(const ExperimentConfig& cfg, const CodecConfig& base,
                                const ProtocolParams& params, const BlockTask& task) {
    const uint64_t seed = block_seed(cfg.master_seed, task.snr_index, task.block_index);
    const uint64_t raw_seed = splitmix64(seed ^ 1);
    const uint64_t key_seed = splitmix64(seed ^ 2);
    const uint32_t s0 = uint32_t(splitmix64(seed ^ 3));
    const uint32_t t_seed = uint32_t(splitmix64(seed ^ 4));

    const size_t budget =
        size_t(base.spine_count()) * (params.l_min + params.i_max - 1);
    const RawDataBlock raw =
        cfg.zero_noise ? generate_noiseless(budget, cfg.v_a, task.snr, raw_seed)
                       : generate_correlated(budget, cfg.v_a, task.snr, raw_seed);

    const CodecConfig codec = session_codec(base, params, s0, t_seed);

    auto [alice_end, bob_end] = make_loopback();
    OutcomeRecord alice_rec;
    std::thread alice_thread([&] {
        alice_rec = run_session(Role::kAlice, *alice_end, params, codec, raw.x, 0,
                                task.snr);
    });
    run_session(Role::kBob, *bob_end, params, codec, raw.y, key_seed, task.snr);
    alice_thread.join();

    BlockRecord rec;
    rec.snr_index = task.snr_index;
    rec.block_index = task.block_index;
    rec.snr = task.snr;
    rec.seed = seed;
    rec.outcome = alice_rec;
    return rec;
}

// Two-process block over a live stream.
BlockRecord run_block_stream(const ExperimentConfig& cfg, const CodecConfig& base,
                             const ProtocolParams& params, const BlockTask& task,
                             ByteStream& stream) {
    const uint64_t seed = block_seed(cfg.master_seed, task.snr_index, task.block_index);
    const uint64_t raw_seed = splitmix64(seed ^ 1);
    const uint64_t key_seed = splitmix64(seed ^ 2);
    const uint32_t s0 = uint32_t(splitmix64(seed ^ 3));
    const uint32_t t_seed = uint32_t(splitmix64(seed ^ 4));

    const size_t budget =
        size_t(base.spine_count()) * (params.l_min + params.i_max - 1);
    const RawDataBlock raw =
        cfg.zero_noise ? generate_noiseless(budget, cfg.v_a, task.snr, raw_seed)
                       : generate_correlated(budget, cfg.v_a, task.snr, raw_seed);

    const CodecConfig codec = session_codec(base, params, s0, t_seed);

    BlockRecord rec;
    rec.snr_index = task.snr_index;
    rec.block_index = task.block_index;
    rec.snr = task.snr;
    rec.seed = seed;
    if (cfg.mode == ExperimentConfig::Mode::kConnect)
        rec.outcome = run_session(Role::kBob, stream, params, codec, raw.y, key_seed,
                                  task.snr);
    else
        rec.outcome = run_session(Role::kAlice, stream, params, codec, raw.x, 0,
                                  task.snr);
    return rec;
}

std::pair<std::string, uint16_t> split_addr(const std::string& addr) {
    const size_t colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("addr must be host:port");
    const std::string host = addr.substr(0, colon);
    const int port = std::stoi(addr.substr(colon + 1));
    if (port < 0 || port > 65535)
        throw std::invalid_argument("addr port out of range");
    return {host, uint16_t(port)};
}

}  // namespace

std::string config_echo_json(const ExperimentConfig& config) {
    return config_json(config).dump();
}

uint32_t config_hash(const ExperimentConfig& config) {
    const std::string echo = config_echo_json(config);
    return crc32({reinterpret_cast<const uint8_t*>(echo.data()), echo.size()});
}

void emit_outputs(const AggregateReport& report, std::span<const BlockRecord> records,
                  const ExperimentConfig& config, const std::string& csv_path,
                  const std::string& json_path) {
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv)
            throw io_error("cannot write CSV: " + csv_path);
        csv << "snr,beta_mean,fer,iters_mean,L_mean,blocks\n";
        char line[256];
        for (const SnrAggregate& row : report.rows) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%u\n",
                          row.snr, row.beta_mean, row.fer, row.iters_mean, row.l_mean,
                          row.blocks);
            csv << line;
        }
        if (!csv.good())
            throw io_error("write failed: " + csv_path);
    }
    if (!json_path.empty()) {
        std::ofstream out(json_path, std::ios::trunc);
        if (!out)
            throw io_error("cannot write JSON: " + json_path);
        ordered_json cfg_line;
        cfg_line["type"] = "config";
        cfg_line["config"] = config_json(config);
        char hash[16];
        std::snprintf(hash, sizeof hash, "%08x", config_hash(config));
        cfg_line["config_hash"] = hash;
        out << cfg_line.dump() << '\n';
        for (const BlockRecord& rec : records)
            out << block_json(rec).dump() << '\n';
        for (const SnrAggregate& row : report.rows)
            out << aggregate_json(row).dump() << '\n';
        if (!out.good())
            throw io_error("write failed: " + json_path);
    }
}

AggregateReport run_experiment(const ExperimentConfig& config) {
    config.validate();

    // Fail on unwritable outputs before any simulation starts.
    for (const std::string& path : {config.out_csv, config.out_json}) {
        if (path.empty())
            continue;
        std::ofstream probe(path, std::ios::trunc);
        if (!probe)
            throw io_error("cannot open output path: " + path);
    }

    CodecConfig base;
    base.n = config.n;
    base.k = config.k;
    base.c = config.c;
    base.beam_width = config.beam_width;
    base.beta_trunc = config.beta_trunc;
    base.v = config.v;
    base.w = config.w;

    std::vector<BlockRecord> records(size_t(config.snr_list.size()) *
                                     config.blocks_per_snr);
    std::vector<double> snr_wall(config.snr_list.size(), 0.0);

    if (config.mode == ExperimentConfig::Mode::kInProcess) {
        const uint32_t pool = config.threads
                                  ? config.threads
                                  : std::max(1u, std::thread::hardware_concurrency());
        for (uint32_t si = 0; si < config.snr_list.size(); ++si) {
            const double snr = config.snr_list[si];
            const ProtocolParams params = derive_params(
                snr + config.snr_offset, config.v_a, base, config.lambda, config.i_max);
            const auto t0 = std::chrono::steady_clock::now();
            std::atomic<uint32_t> next{0};
            auto worker = [&] {
                for (;;) {
                    const uint32_t bi = next.fetch_add(1);
                    if (bi >= config.blocks_per_snr)
                        return;
                    records[size_t(si) * config.blocks_per_snr + bi] =
                        run_block_inprocess(config, base, params, {si, bi, snr});
                }
            };
            if (pool <= 1) {
                worker();
            } else {
                std::vector<std::thread> threads;
                for (uint32_t t = 0; t < pool; ++t) threads.emplace_back(worker);
                for (auto& t : threads) t.join();
            }
            snr_wall[si] = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        }
    } else {
        // One session per connection, blocks in (snr, block) order.
        auto [host, port] = split_addr(config.addr);
        std::unique_ptr<TcpListener> listener;
        if (config.mode == ExperimentConfig::Mode::kListen) {
            listener = std::make_unique<TcpListener>(host, port);
            if (config.on_listening)
                config.on_listening(listener->port());
        }
        for (uint32_t si = 0; si < config.snr_list.size(); ++si) {
            const double snr = config.snr_list[si];
            const ProtocolParams params = derive_params(
                snr + config.snr_offset, config.v_a, base, config.lambda, config.i_max);
            const auto t0 = std::chrono::steady_clock::now();
            for (uint32_t bi = 0; bi < config.blocks_per_snr; ++bi) {
                std::unique_ptr<ByteStream> stream;
                if (listener) {
                    stream = listener->accept_one();
                } else {
                    // The listener may still be starting up; retry briefly.
                    for (int tries = 0;; ++tries) {
                        try {
                            stream = tcp_connect(host, port);
                            break;
                        } catch (const io_error&) {
                            if (tries >= 100)
                                throw;
                            std::this_thread::sleep_for(std::chrono::milliseconds(50));
                        }
                    }
                }
                records[size_t(si) * config.blocks_per_snr + bi] =
                    run_block_stream(config, base, params, {si, bi, snr}, *stream);
            }
            snr_wall[si] = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        }
    }

    AggregateReport report = aggregate(records);
    for (size_t i = 0; i < report.rows.size() && i < snr_wall.size(); ++i)
        report.rows[i].wall_millis = snr_wall[i];

    emit_outputs(report, records, config, config.out_csv, config.out_json);
    return report;
}

}  // namespace spinal
