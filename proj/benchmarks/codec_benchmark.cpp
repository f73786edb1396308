#include <benchmark/benchmark.h>

#include <cmath>

#include "spinal/bits.hpp"
#include "spinal/codec.hpp"
#include "spinal/hash.hpp"
#include "spinal/philox.hpp"
#include "spinal/protocol.hpp"

namespace {

spinal::CodecConfig paper_codec(double snr) {
    spinal::CodecConfig cfg;
    cfg.beta_trunc = 4.0;
    const spinal::ProtocolParams params = spinal::derive_params(snr, 1.0, cfg);
    cfg.p_star = params.p_star;
    return cfg;
}

void bm_oaat_hash(benchmark::State& state) {
    uint32_t h = 0x12345678;
    for (auto _ : state) {
        h = spinal::oaat_final(spinal::oaat_word(spinal::oaat_word(0, h), 42));
        benchmark::DoNotOptimize(h);
    }
}
BENCHMARK(bm_oaat_hash);

void bm_encode_pass(benchmark::State& state) {
    const spinal::CodecConfig cfg = paper_codec(0.143);
    const spinal::BitVec msg = spinal::random_bits(cfg.n, 7);
    for (auto _ : state) {
        auto passes = spinal::encode_passes(msg, 1, 1, cfg);
        benchmark::DoNotOptimize(passes);
    }
    state.SetItemsProcessed(state.iterations() * cfg.spine_count());
}
BENCHMARK(bm_encode_pass);

void bm_bubble_decode(benchmark::State& state) {
    const double snr = 0.143;
    spinal::CodecConfig cfg = paper_codec(snr);
    const spinal::ProtocolParams params = spinal::derive_params(snr, 1.0, cfg);
    const spinal::BitVec msg = spinal::random_bits(cfg.n, 11);
    auto passes = spinal::encode_passes(msg, 1, params.l_min + 1, cfg);

    // Virtual-channel noise on every symbol.
    spinal::GaussianStream noise(99, 0);
    uint64_t j = 0;
    const double sz = std::sqrt(params.v_z);
    for (auto& p : passes)
        for (double& y : p.symbols) y -= sz * noise.at(j++);

    for (auto _ : state) {
        auto result = spinal::bubble_decode(passes, cfg);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(state.iterations() * cfg.n);
}
BENCHMARK(bm_bubble_decode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
