#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "bapipe/cost_models.hpp"
#include "bapipe/partition.hpp"
#include "bapipe/plan.hpp"
#include "bapipe/profiles.hpp"
#include "bapipe/simulator.hpp"

namespace bapipe {

inline std::vector<ScheduleKind> feasible_kinds(ExecutionMode mode) {
    if (mode == ExecutionMode::Asynchronous)
        return {ScheduleKind::OneFOneB_AS, ScheduleKind::FBP_AS};
    return {ScheduleKind::OneFOneB_SNO, ScheduleKind::OneFOneB_SO};
}

// Micro-batch counts worth trying for a kind: divisors of the mini-batch
// (or the explicit candidate list), keeping the micro-batch size at or
// above every accelerator's full-utilization minimum.
inline std::vector<std::int64_t> candidate_Ms(const TrainingConfig& cfg,
                                              const ClusterSpec& cluster,
                                              ScheduleKind kind) {
    std::vector<std::int64_t> base;
    if (cfg.micro_batch_candidates) {
        for (std::int64_t m : *cfg.micro_batch_candidates) {
            if (m < 1 || cfg.mini_batch_size % m != 0)
                throw SchemaError("micro-batch candidate " + std::to_string(m) +
                                  " does not divide mini-batch " +
                                  std::to_string(cfg.mini_batch_size));
            base.push_back(m);
        }
    } else {
        for (std::int64_t m = 1; m <= cfg.mini_batch_size; ++m)
            if (cfg.mini_batch_size % m == 0) base.push_back(m);
    }
    std::int64_t min_micro = 1;
    for (const AcceleratorSpec& a : cluster.accelerators)
        min_micro = std::max(min_micro, a.min_micro(kind));
    std::vector<std::int64_t> out;
    for (std::int64_t m : base)
        if (cfg.mini_batch_size / m >= min_micro) out.push_back(m);
    return out;
}

struct Candidate {
    ScheduleKind kind = ScheduleKind::OneFOneB_AS;
    std::int64_t M = 1;
    std::int64_t micro_batch_size = 1;
    PartitionPlan plan;
    Rat simulated_makespan{0};
    CostEstimate est;
    Rat peak_memory{0};        // max over stages, bytes
    Rat max_bandwidth_demand{0};
};

struct Rejection {
    ScheduleKind kind = ScheduleKind::OneFOneB_AS;
    std::int64_t M = 0;
    std::string reason;  // machine-readable: memory | min_micro_batch | partition
    std::string detail;
};

struct ExplorationResult {
    Candidate best;
    std::vector<Candidate> ranked;
    std::vector<Rejection> rejected;
    std::int64_t mini_batch_size = 1;
    // Reported for comparison only; never used in selection.
    std::optional<double> dp_baseline_minibatch_time;
};

// Joint exploration over schedule kind x micro-batch count, each with its
// own balanced partition; candidates scored by simulated makespan.
inline ExplorationResult explore(const NetworkProfile& net, const ClusterSpec& cluster,
                                 const TrainingConfig& cfg) {
    validate_pair(net, cluster);
    if (cfg.mini_batch_size < 1) throw SchemaError("mini_batch_size >= 1 required");
    ExplorationResult res;
    res.mini_batch_size = cfg.mini_batch_size;

    for (ScheduleKind kind : feasible_kinds(cluster.execution_mode)) {
        std::vector<std::int64_t> allowed = candidate_Ms(cfg, cluster, kind);
        // keep the filtered-out counts visible in the rejection list
        std::vector<std::int64_t> base;
        if (cfg.micro_batch_candidates)
            base = *cfg.micro_batch_candidates;
        else
            for (std::int64_t m = 1; m <= cfg.mini_batch_size; ++m)
                if (cfg.mini_batch_size % m == 0) base.push_back(m);
        for (std::int64_t M : base) {
            if (std::find(allowed.begin(), allowed.end(), M) == allowed.end()) {
                res.rejected.push_back({kind, M, "min_micro_batch",
                                        "micro-batch size " +
                                            std::to_string(cfg.mini_batch_size / M) +
                                            " below minimum"});
                continue;
            }
            std::int64_t micro = cfg.mini_batch_size / M;
            Candidate c;
            c.kind = kind;
            c.M = M;
            c.micro_batch_size = micro;
            try {
                c.plan = balance_partition(net, cluster, kind, M, micro);
            } catch (const Infeasible& e) {
                res.rejected.push_back({kind, M, "memory", e.what()});
                continue;
            } catch (const InfeasibleShape& e) {
                res.rejected.push_back({kind, M, "partition", e.what()});
                continue;
            }
            c.est = estimate(kind, c.plan, net, cluster, M, micro);
            if (!c.est.memory_feasible()) {
                res.rejected.push_back({kind, M, "memory", "plan exceeds capacity"});
                continue;
            }
            Timeline t = simulate(kind, c.plan, net, cluster, M, micro);
            c.simulated_makespan = t.makespan;
            for (std::int64_t i = 0; i < c.plan.n_stages(); ++i) {
                Rat mem = c.est.features_mem[i] + c.est.weights_mem[i];
                if (mem > c.peak_memory) c.peak_memory = mem;
            }
            for (const Rat& d : c.est.bandwidth_demand)
                if (d > c.max_bandwidth_demand) c.max_bandwidth_demand = d;
            res.ranked.push_back(std::move(c));
        }
    }

    if (res.ranked.empty()) {
        std::ostringstream why;
        why << "all " << res.rejected.size() << " candidates rejected";
        for (const Rejection& r : res.rejected)
            why << "; " << to_string(r.kind) << " M=" << r.M << ": " << r.reason;
        throw NoFeasiblePlan(why.str());
    }
    std::stable_sort(res.ranked.begin(), res.ranked.end(),
                     [](const Candidate& a, const Candidate& b) {
                         if (a.simulated_makespan != b.simulated_makespan)
                             return a.simulated_makespan < b.simulated_makespan;
                         if (a.peak_memory != b.peak_memory)
                             return a.peak_memory < b.peak_memory;
                         if (a.max_bandwidth_demand != b.max_bandwidth_demand)
                             return a.max_bandwidth_demand < b.max_bandwidth_demand;
                         if (a.M != b.M) return a.M < b.M;
                         return (int)a.kind < (int)b.kind;
                     });
    res.best = res.ranked.front();
    return res;
}

// ---------------------------------------------------------------------------
// Report rendering

inline json exploration_to_json(const ExplorationResult& res) {
    auto cand = [](const Candidate& c) {
        json links = json::array();
        for (const Rat& d : c.est.bandwidth_demand) links.push_back(d.str());
        json mem = json::array();
        for (std::size_t i = 0; i < c.est.features_mem.size(); ++i)
            mem.push_back((c.est.features_mem[i] + c.est.weights_mem[i]).str());
        return json{{"schedule", to_string(c.kind)},
                    {"M", c.M},
                    {"micro_batch_size", c.micro_batch_size},
                    {"simulated_makespan_us", c.simulated_makespan.str()},
                    {"estimate_minibatch_us", c.est.minibatch_time.str()},
                    {"bubble_fraction", c.est.bubble_fraction.str()},
                    {"peak_memory_bytes", c.peak_memory.str()},
                    {"stage_memory_bytes", mem},
                    {"bandwidth_demand_bytes_per_us", links},
                    {"plan", plan_to_json(c.plan)}};
    };
    json ranked = json::array();
    for (const Candidate& c : res.ranked) ranked.push_back(cand(c));
    json rejected = json::array();
    for (const Rejection& r : res.rejected)
        rejected.push_back({{"schedule", to_string(r.kind)},
                            {"M", r.M},
                            {"reason", r.reason},
                            {"detail", r.detail}});
    json out = {{"mini_batch_size", res.mini_batch_size},
                {"best", cand(res.best)},
                {"ranked", ranked},
                {"rejected", rejected}};
    if (res.dp_baseline_minibatch_time)
        out["dp_baseline_minibatch_time_us"] = *res.dp_baseline_minibatch_time;
    return out;
}

inline std::string exploration_table(const ExplorationResult& res) {
    std::ostringstream s;
    s << "schedule   M     makespan_us   bubble      peak_mem_B   max_bw_B/us\n";
    for (const Candidate& c : res.ranked) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-9s %5lld %13s %-11s %12s %12s\n",
                      to_string(c.kind), (long long)c.M, c.simulated_makespan.str().c_str(),
                      c.est.bubble_fraction.str().c_str(), c.peak_memory.str().c_str(),
                      c.max_bandwidth_demand.str().c_str());
        s << line;
    }
    for (const Rejection& r : res.rejected) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-9s %5lld rejected: %s\n", to_string(r.kind),
                      (long long)r.M, r.reason.c_str());
        s << line;
    }
    s << "best: " << to_string(res.best.kind) << " M=" << res.best.M << " makespan "
      << res.best.simulated_makespan.str() << " us\n";
    if (res.dp_baseline_minibatch_time)
        s << "dp baseline (reported only): " << *res.dp_baseline_minibatch_time << " us\n";
    return s.str();
}

}  // namespace bapipe
