#include "spinal/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

#include "spinal/hash.hpp"
#include "spinal/normal.hpp"

namespace spinal {

void CodecConfig::validate() const {
    if (k < 1 || k > 8)
        throw std::invalid_argument("CodecConfig: k must be in [1,8]");
    if (n == 0 || n % k != 0)
        throw std::invalid_argument("CodecConfig: n must be a positive multiple of k");
    if (c < 1 || c > 16)
        throw std::invalid_argument("CodecConfig: c must be in [1,16]");
    if (v != 32)
        throw std::invalid_argument("CodecConfig: only v=32 spine states are supported");
    if (w != 32)
        throw std::invalid_argument("CodecConfig: only w=32 pass indices are supported");
    if (beam_width < 1 || beam_width > 65535)
        throw std::invalid_argument("CodecConfig: beam_width must be in [1,65535]");
    if (!(p_star > 0.0))
        throw std::invalid_argument("CodecConfig: p_star must be positive");
    if (!(beta_trunc > 0.0))
        throw std::invalid_argument("CodecConfig: beta_trunc must be positive");
}

SymbolMapper::SymbolMapper(uint32_t c, double beta_trunc, double p_star) {
    const double gamma = normal_cdf(-beta_trunc);
    const double scale = std::sqrt(p_star);
    const uint32_t levels = 1u << c;
    table_.resize(levels);
    for (uint32_t b = 0; b < levels; ++b) {
        const double alpha = (2.0 * b + 1.0) / double(2ull << c);
        table_[b] = normal_quantile(gamma + (1.0 - 2.0 * gamma) * alpha) * scale;
    }
    bound_ = beta_trunc * scale;
}

uint32_t hash_state(uint32_t state, uint32_t block, uint32_t k) {
    if (k < 1 || k > 8 || block >= (1u << k))
        throw std::invalid_argument("hash_state: block must fit in k bits (k<=8)");
    return oaat_final(oaat_step(oaat_word(0, state), uint8_t(block)));
}

SpineChain compute_spine(const BitVec& message, const CodecConfig& cfg) {
    cfg.validate();
    if (message.size() != cfg.n)
        throw std::invalid_argument("compute_spine: message length != n");
    SpineChain chain;
    chain.states.resize(cfg.spine_count());
    uint32_t state = cfg.s0;
    for (uint32_t i = 0; i < cfg.spine_count(); ++i) {
        state = oaat_final(oaat_step(oaat_word(0, state), uint8_t(message.block(i, cfg.k))));
        chain.states[i] = state;
    }
    return chain;
}

namespace {

// Stream word t for (spine, pass): one-at-a-time over
// [spine:4B BE | t_seed+pass:4B BE | t:4B BE].
inline uint32_t rng_word(uint32_t spine, uint32_t pass_key, uint32_t t) {
    return oaat_final(oaat_word(oaat_word(oaat_word(0, spine), pass_key), t));
}

// Where pass `pass_index` reads its c symbol bits: bit offset (pass-1)*c of
// the per-pass stream, possibly straddling a word boundary.
struct SymbolSlot {
    uint32_t pass_key;
    uint32_t word0;
    uint32_t shift;  // right shift in the single-word case
    uint32_t n_hi = 0, n_lo = 0;
    bool straddle;
};

SymbolSlot symbol_slot(uint32_t pass_index, const CodecConfig& cfg) {
    SymbolSlot s{};
    s.pass_key = cfg.t_seed + pass_index;  // wraps mod 2^32
    const uint64_t off = uint64_t(pass_index - 1) * cfg.c;
    s.word0 = uint32_t(off >> 5);
    const uint32_t bo = uint32_t(off & 31);
    if (bo + cfg.c <= 32) {
        s.straddle = false;
        s.shift = 32 - bo - cfg.c;
    } else {
        s.straddle = true;
        s.n_hi = 32 - bo;
        s.n_lo = cfg.c - s.n_hi;
    }
    return s;
}

// Symbol index for a given spine state; `spine_pre` is the hash state after
// absorbing the 4 spine bytes (shared across passes).
inline uint32_t symbol_bits(uint32_t spine_pre, const SymbolSlot& s, uint32_t mask) {
    const uint32_t h = oaat_word(spine_pre, s.pass_key);
    const uint32_t wa = oaat_final(oaat_word(h, s.word0));
    if (!s.straddle)
        return (wa >> s.shift) & mask;
    const uint32_t wb = oaat_final(oaat_word(h, s.word0 + 1));
    return (((wa & ((1u << s.n_hi) - 1)) << s.n_lo) | (wb >> (32 - s.n_lo))) & mask;
}

inline uint32_t c_mask(uint32_t c) { return (c == 32) ? 0xFFFFFFFFu : (1u << c) - 1; }

}  // namespace

BitVec rng_bits(uint32_t spine, uint32_t pass_index, uint32_t count,
                const CodecConfig& cfg) {
    cfg.validate();
    if (pass_index < 1)
        throw std::invalid_argument("rng_bits: pass_index must be >= 1");
    if (count < 1)
        throw std::invalid_argument("rng_bits: count must be >= 1");
    const uint32_t pass_key = cfg.t_seed + pass_index;
    BitVec out(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t word = rng_word(spine, pass_key, i >> 5);
        out.set(i, (word >> (31 - (i & 31))) & 1u);
    }
    return out;
}

double map_symbol(uint32_t b, const CodecConfig& cfg) {
    cfg.validate();
    if (b >= (1u << cfg.c))
        throw std::invalid_argument("map_symbol: b must be < 2^c");
    const double gamma = normal_cdf(-cfg.beta_trunc);
    const double alpha = (2.0 * b + 1.0) / double(2ull << cfg.c);
    return normal_quantile(gamma + (1.0 - 2.0 * gamma) * alpha) * std::sqrt(cfg.p_star);
}

std::vector<PassBlock> encode_passes(const BitVec& message, uint32_t first_pass,
                                     uint32_t last_pass, const CodecConfig& cfg) {
    if (first_pass < 1 || first_pass > last_pass)
        throw std::invalid_argument("encode_passes: need 1 <= first_pass <= last_pass");
    const SpineChain chain = compute_spine(message, cfg);  // validates
    const SymbolMapper mapper(cfg.c, cfg.beta_trunc, cfg.p_star);
    const uint32_t mask = c_mask(cfg.c);

    std::vector<PassBlock> passes;
    passes.reserve(last_pass - first_pass + 1);
    for (uint32_t ell = first_pass; ell <= last_pass; ++ell) {
        const SymbolSlot slot = symbol_slot(ell, cfg);
        PassBlock block;
        block.pass_index = ell;
        block.symbols.resize(chain.states.size());
        for (size_t i = 0; i < chain.states.size(); ++i) {
            const uint32_t pre = oaat_word(0, chain.states[i]);
            block.symbols[i] = mapper.map(symbol_bits(pre, slot, mask));
        }
        passes.push_back(std::move(block));
    }
    return passes;
}

namespace {

struct Child {
    double cost;
    uint32_t state;
    uint16_t parent;
    uint16_t parent_rank;
    uint8_t edge;
};

inline bool child_less(const Child& a, const Child& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.parent_rank != b.parent_rank) return a.parent_rank < b.parent_rank;
    return a.edge < b.edge;
}

struct BackRef {
    uint16_t parent;
    uint8_t edge;
};

}  // namespace

DecodeResult bubble_decode(std::span<const PassBlock> received,
                           const CodecConfig& cfg) {
    cfg.validate();
    if (received.empty())
        throw std::invalid_argument("bubble_decode: at least one pass required");
    const uint32_t depth = cfg.spine_count();
    for (const PassBlock& p : received) {
        if (p.pass_index < 1)
            throw std::invalid_argument("bubble_decode: pass_index must be >= 1");
        if (p.symbols.size() != depth)
            throw std::invalid_argument("bubble_decode: every pass needs n/k symbols");
        for (double y : p.symbols)
            if (!std::isfinite(y))
                throw std::invalid_argument("bubble_decode: non-finite received symbol");
    }

    // Canonical pass order: ascending pass_index, so the cost accumulation is
    // independent of the order passes arrived in.
    std::vector<uint32_t> order(received.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return received[a].pass_index < received[b].pass_index;
    });

    struct PassCtx {
        SymbolSlot slot;
        const double* y;
    };
    std::vector<PassCtx> passes;
    passes.reserve(received.size());
    for (uint32_t idx : order)
        passes.push_back({symbol_slot(received[idx].pass_index, cfg),
                          received[idx].symbols.data()});

    const SymbolMapper mapper(cfg.c, cfg.beta_trunc, cfg.p_star);
    const double* table = mapper.table().data();
    const uint32_t mask = c_mask(cfg.c);
    const uint32_t fanout = 1u << cfg.k;
    const uint32_t beam = cfg.beam_width;

    // Surviving nodes of the current level, stored in prefix-lexicographic
    // order, so a node's index is its lex rank and comparing
    // (parent index, edge) compares children by message prefix.
    std::vector<uint32_t> cur_state{cfg.s0};
    std::vector<double> cur_cost{0.0};

    std::vector<std::vector<BackRef>> trail(depth);
    std::vector<Child> children;
    children.reserve(size_t(beam) * fanout);
    std::vector<uint32_t> lex_order;
    uint64_t nodes_visited = 0;

    for (uint32_t level = 0; level < depth; ++level) {
        children.clear();
        const size_t parents = cur_state.size();
        for (size_t j = 0; j < parents; ++j) {
            const uint32_t hp = oaat_word(0, cur_state[j]);
            const double parent_cost = cur_cost[j];
            const uint16_t prank = uint16_t(j);
            for (uint32_t edge = 0; edge < fanout; ++edge) {
                const uint32_t st = oaat_final(oaat_step(hp, uint8_t(edge)));
                const uint32_t pre = oaat_word(0, st);
                double branch = 0.0;
                for (const PassCtx& pc : passes) {
                    const double d = pc.y[level] - table[symbol_bits(pre, pc.slot, mask)];
                    branch += d * d;
                }
                children.push_back(
                    {parent_cost + branch, st, uint16_t(j), prank, uint8_t(edge)});
            }
        }
        nodes_visited += children.size();

        const size_t keep = std::min<size_t>(beam, children.size());
        if (keep < children.size())
            std::nth_element(children.begin(), children.begin() + keep,
                             children.end(), child_less);

        // Lexicographic ranks for the survivors: (parent_rank, edge) sorts
        // children by message prefix because parent ranks already do.
        lex_order.resize(keep);
        std::iota(lex_order.begin(), lex_order.end(), 0u);
        std::sort(lex_order.begin(), lex_order.end(), [&](uint32_t a, uint32_t b) {
            if (children[a].parent_rank != children[b].parent_rank)
                return children[a].parent_rank < children[b].parent_rank;
            return children[a].edge < children[b].edge;
        });

        cur_state.resize(keep);
        cur_cost.resize(keep);
        trail[level].resize(keep);
        for (size_t r = 0; r < keep; ++r) {
            const Child& ch = children[lex_order[r]];
            cur_state[r] = ch.state;
            cur_cost[r] = ch.cost;
            trail[level][r] = {ch.parent, ch.edge};
        }
    }

    // Lowest cost wins; on ties the smaller lex rank (= smaller message).
    size_t best = 0;
    for (size_t j = 1; j < cur_state.size(); ++j)
        if (cur_cost[j] < cur_cost[best]) best = j;

    DecodeResult result;
    result.cost = cur_cost[best];
    result.levels_expanded = depth;
    result.nodes_visited = nodes_visited;
    result.message = BitVec(cfg.n);
    uint32_t node = uint32_t(best);
    for (uint32_t level = depth; level-- > 0;) {
        const BackRef& ref = trail[level][node];
        result.message.set_block(level, cfg.k, ref.edge);
        node = ref.parent;
    }
    return result;
}

}  // namespace spinal
