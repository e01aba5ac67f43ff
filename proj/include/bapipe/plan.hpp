#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bapipe/errors.hpp"
#include "bapipe/profiles.hpp"
#include "bapipe/rational.hpp"

namespace bapipe {

// One pipeline stage: a contiguous layer range [lo, hi] (1-based), with the
// first/last layer possibly owned only fractionally when an intra-layer
// split places the remainder on the neighboring stage.
struct StageAssignment {
    std::string accelerator_id;
    std::int64_t lo = 1;
    std::int64_t hi = 1;
    Rat leading_fraction{1};
    Rat trailing_fraction{1};
};

struct PartitionPlan {
    std::vector<StageAssignment> stages;  // chain order

    std::int64_t n_stages() const { return (std::int64_t)stages.size(); }
};

// Fraction of layer j (1-based) owned by the given stage. Full interior
// layers count 1; a stage reduced to a slice of a single layer owns
// leading + trailing - 1 of it.
inline Rat owned_fraction(const StageAssignment& s, std::int64_t j) {
    if (j < s.lo || j > s.hi) return Rat(0);
    if (s.lo == s.hi) return s.leading_fraction + s.trailing_fraction - Rat(1);
    if (j == s.lo) return s.leading_fraction;
    if (j == s.hi) return s.trailing_fraction;
    return Rat(1);
}

inline void validate_plan(const PartitionPlan& plan, const NetworkProfile& net) {
    if (plan.stages.empty()) throw InvalidPlan("plan has no stages");
    std::int64_t L = net.L();
    std::int64_t prev_hi = 0;
    bool prev_shared = false;
    for (std::size_t n = 0; n < plan.stages.size(); ++n) {
        const StageAssignment& s = plan.stages[n];
        auto where = [&] { return "stage " + std::to_string(n + 1); };
        if (s.lo < 1 || s.hi > L || s.lo > s.hi)
            throw InvalidPlan(where() + ": layer range [" + std::to_string(s.lo) + "," +
                              std::to_string(s.hi) + "] out of bounds");
        Rat zero(0), one(1);
        if (!(s.leading_fraction > zero) || s.leading_fraction > one ||
            !(s.trailing_fraction > zero) || s.trailing_fraction > one)
            throw InvalidPlan(where() + ": fractions must lie in (0, 1]");
        if (n == 0) {
            if (s.lo != 1 || s.leading_fraction != one)
                throw InvalidPlan("stage 1 must start at layer 1 with full ownership");
        } else {
            bool shared = (s.lo == prev_hi);
            if (!shared && s.lo != prev_hi + 1)
                throw InvalidPlan(where() + ": not contiguous with previous stage");
            if (shared && s.leading_fraction == one)
                throw InvalidPlan(where() + ": shared boundary layer must be fractional");
            if (!shared && s.leading_fraction != one)
                throw InvalidPlan(where() + ": fractional lead without shared layer");
            if (prev_shared && plan.stages[n - 1].lo == plan.stages[n - 1].hi) {
                // three-way shares are validated by the coverage sum below
            }
        }
        prev_shared = (n > 0 && s.lo == prev_hi);
        prev_hi = s.hi;
    }
    const StageAssignment& last = plan.stages.back();
    if (last.hi != L || last.trailing_fraction != Rat(1))
        throw InvalidPlan("last stage must end at layer L with full ownership");
    // Every layer fully covered.
    for (std::int64_t j = 1; j <= L; ++j) {
        Rat sum(0);
        for (const StageAssignment& s : plan.stages) sum += owned_fraction(s, j);
        if (sum != Rat(1))
            throw InvalidPlan("layer " + std::to_string(j) + " coverage sums to " +
                              sum.str() + ", expected 1");
    }
}

// ---------------------------------------------------------------------------
// Per-stage quantities derived from a plan against a network and cluster.

inline Rat stage_fp_time(const PartitionPlan& plan, std::size_t n,
                         const NetworkProfile& net, const ClusterSpec& cluster) {
    const StageAssignment& s = plan.stages[n];
    const std::string& type = cluster.accelerators[n].accel_type;
    Rat t(0);
    for (std::int64_t j = s.lo; j <= s.hi; ++j)
        t += owned_fraction(s, j) * Rat(net.layers[j - 1].fp(type));
    return t;
}

inline Rat stage_bp_time(const PartitionPlan& plan, std::size_t n,
                         const NetworkProfile& net, const ClusterSpec& cluster) {
    const StageAssignment& s = plan.stages[n];
    const std::string& type = cluster.accelerators[n].accel_type;
    Rat t(0);
    for (std::int64_t j = s.lo; j <= s.hi; ++j)
        t += owned_fraction(s, j) * Rat(net.layers[j - 1].bp(type));
    return t;
}

inline Rat stage_compute_time(const PartitionPlan& plan, std::size_t n,
                              const NetworkProfile& net, const ClusterSpec& cluster) {
    return stage_fp_time(plan, n, net, cluster) + stage_bp_time(plan, n, net, cluster);
}

inline Rat max_stage_compute_time(const PartitionPlan& plan, const NetworkProfile& net,
                                  const ClusterSpec& cluster) {
    Rat m(0);
    for (std::size_t n = 0; n < plan.stages.size(); ++n) {
        Rat t = stage_compute_time(plan, n, net, cluster);
        if (t > m) m = t;
    }
    return m;
}

inline Rat stage_weight_bytes(const PartitionPlan& plan, std::size_t n,
                              const NetworkProfile& net) {
    const StageAssignment& s = plan.stages[n];
    Rat w(0);
    for (std::int64_t j = s.lo; j <= s.hi; ++j)
        w += owned_fraction(s, j) * Rat(net.layers[j - 1].weight_bytes);
    return w;
}

// Activation bytes crossing the cut between stage k and k+1 (k 1-based,
// 1..N-1): the out_activation of stage k's last (possibly split) layer.
inline std::int64_t cut_activation_bytes(const PartitionPlan& plan, std::size_t k,
                                         const NetworkProfile& net) {
    return net.layers[plan.stages[k - 1].hi - 1].out_activation_bytes;
}

// Activation unit governing stage i's feature buffers: its input cut for
// i >= 2; stage 1 has no modeled input tensor, so its own output cut is
// used (for single-stage plans this is the last layer's activation).
inline std::int64_t stage_activation_bytes(const PartitionPlan& plan, std::size_t i,
                                           const NetworkProfile& net) {
    if (i >= 2) return cut_activation_bytes(plan, i - 1, net);
    return net.layers[plan.stages[0].hi - 1].out_activation_bytes;
}

// Send/receive time of one micro-batch's activation (or error, same size)
// across link k, at the given micro-batch size.
inline std::int64_t link_sr_time(const PartitionPlan& plan, std::size_t k,
                                 const NetworkProfile& net, const ClusterSpec& cluster,
                                 std::int64_t micro_batch_size = 1) {
    std::int64_t a = cut_activation_bytes(plan, k, net) * micro_batch_size;
    if (a == 0) return 0;
    return ceil_div(a, cluster.link_bandwidth[k - 1]);
}

// ---------------------------------------------------------------------------
// Plan file format

inline Rat rat_from_string(const std::string& s) {
    auto pos = s.find('/');
    try {
        if (pos == std::string::npos) return Rat(std::stoll(s));
        return Rat(std::stoll(s.substr(0, pos)), std::stoll(s.substr(pos + 1)));
    } catch (const std::exception&) {
        throw ParseError("bad rational '" + s + "'");
    }
}

inline json plan_to_json(const PartitionPlan& plan) {
    json stages = json::array();
    for (const StageAssignment& s : plan.stages) {
        stages.push_back({{"accelerator", s.accelerator_id},
                          {"layers", {s.lo, s.hi}},
                          {"leading_fraction", s.leading_fraction.str()},
                          {"trailing_fraction", s.trailing_fraction.str()}});
    }
    return {{"stages", stages}};
}

inline PartitionPlan plan_from_json(const json& j, bool lenient = false) {
    using namespace detail;
    check_keys(j, {"stages"}, lenient, "plan");
    if (!j.contains("stages") || !j.at("stages").is_array())
        throw SchemaError("plan: missing 'stages' array");
    PartitionPlan plan;
    std::size_t idx = 0;
    for (const json& sj : j.at("stages")) {
        std::string where = "plan stage " + std::to_string(idx);
        check_keys(sj, {"accelerator", "layers", "leading_fraction", "trailing_fraction"},
                   lenient, where);
        StageAssignment s;
        s.accelerator_id = get_str(sj, "accelerator", where);
        if (!sj.contains("layers") || !sj.at("layers").is_array() ||
            sj.at("layers").size() != 2)
            throw SchemaError(where + ": 'layers' must be [lo, hi]");
        s.lo = sj.at("layers")[0].get<std::int64_t>();
        s.hi = sj.at("layers")[1].get<std::int64_t>();
        if (sj.contains("leading_fraction"))
            s.leading_fraction = rat_from_string(get_str(sj, "leading_fraction", where));
        if (sj.contains("trailing_fraction"))
            s.trailing_fraction = rat_from_string(get_str(sj, "trailing_fraction", where));
        plan.stages.push_back(std::move(s));
        ++idx;
    }
    return plan;
}

inline PartitionPlan load_plan(const std::string& path, bool lenient = false) {
    return plan_from_json(detail::parse_file(path), lenient);
}

}  // namespace bapipe
