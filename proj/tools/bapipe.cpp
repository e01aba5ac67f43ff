// Command-line front end: validate / plan / explore / simulate.
// Exit codes: 0 success, 1 input or usage error, 2 infeasible.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bapipe/explorer.hpp"
#include "bapipe/gantt.hpp"

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw bapipe::ParseError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// FNV-1a 64-bit, hex. Content digest for the run manifest.
std::string digest(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

bapipe::json run_manifest(const std::vector<std::string>& inputs,
                          const std::vector<std::string>& command) {
    bapipe::json digests = bapipe::json::object();
    for (const std::string& p : inputs) digests[p] = digest(slurp(p));
    return {{"tool_version", kToolVersion},
            {"input_digests", digests},
            {"command", command},
            {"seed_free", true}};
}

bapipe::ScheduleKind require_kind(const std::string& s) {
    auto k = bapipe::parse_schedule_kind(s);
    if (!k) throw bapipe::SchemaError("unknown schedule kind '" + s + "'");
    return *k;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw bapipe::Error("cannot write '" + path + "'");
    out << text;
}

struct SimReport {
    bapipe::json to_json(const bapipe::Timeline& t, const bapipe::CostEstimate& est) const {
        bapipe::json feat = bapipe::json::array(), wt = bapipe::json::array(),
                     busy = bapipe::json::array();
        for (const bapipe::Rat& r : t.per_stage_feature_highwater) feat.push_back(r.str());
        for (const bapipe::Rat& r : t.per_stage_weight_static) wt.push_back(r.str());
        for (const bapipe::Rat& r : t.per_link_busy_fraction) busy.push_back(r.str());
        return {{"makespan_us", t.makespan.str()},
                {"bubble_fraction", est.bubble_fraction.str()},
                {"estimate_minibatch_us", est.minibatch_time.str()},
                {"estimate_is_heuristic", est.heuristic},
                {"feature_highwater_bytes", feat},
                {"weight_static_bytes", wt},
                {"link_busy_fraction", busy},
                {"events", (std::int64_t)t.events.size()}};
    }
};

void print_sim_human(const bapipe::Timeline& t, const bapipe::CostEstimate& est) {
    std::cout << "makespan: " << t.makespan.str() << " us\n";
    std::cout << "bubble:   " << est.bubble_fraction.str()
              << (est.heuristic ? " (heuristic)" : "") << "\n";
    for (std::size_t i = 0; i < t.per_stage_feature_highwater.size(); ++i)
        std::cout << "stage " << i + 1 << ": features "
                  << t.per_stage_feature_highwater[i].str() << " B, weights "
                  << t.per_stage_weight_static[i].str() << " B\n";
    for (std::size_t k = 0; k < t.per_link_busy_fraction.size(); ++k)
        std::cout << "link " << k + 1 << ": busy " << t.per_link_busy_fraction[k].str()
                  << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pipeline-parallel training planner"};
    app.require_subcommand(1);
    std::vector<std::string> raw_cmd(argv, argv + argc);

    std::string net_file, cluster_file, plan_file, schedule, format = "human";
    std::string out_file, gantt_file;
    std::int64_t micro = 0, minibatch = 0;
    std::vector<std::int64_t> micro_set;
    double dp_baseline = 0.0;
    bool lenient = false, trace = false;

    auto add_pair = [&](CLI::App* c) {
        c->add_option("net", net_file, "network profile JSON")->required();
        c->add_option("cluster", cluster_file, "cluster spec JSON")->required();
        c->add_flag("--lenient", lenient, "ignore unknown JSON keys");
        c->add_option("--format", format, "human|json")
            ->check(CLI::IsMember({"human", "json"}));
    };

    CLI::App* validate = app.add_subcommand("validate", "schema + invariant check");
    add_pair(validate);

    CLI::App* plan = app.add_subcommand("plan", "balanced partition for one schedule");
    add_pair(plan);
    plan->add_option("--schedule", schedule, "1f1b-as|fbp-as|1f1b-sno|1f1b-so")->required();
    plan->add_option("--micro", micro, "micro-batch count M");
    plan->add_option("--minibatch", minibatch, "mini-batch size");
    plan->add_option("-o,--out", out_file, "plan output file");

    CLI::App* explore = app.add_subcommand("explore", "joint schedule x M exploration");
    add_pair(explore);
    explore->add_option("--minibatch", minibatch, "mini-batch size")->required();
    explore->add_option("--micro-set", micro_set, "explicit micro-batch counts");
    explore->add_option("-o,--out", out_file, "best plan output file");
    explore->add_option("--dp-baseline", dp_baseline,
                        "data-parallel mini-batch time, reported only");

    CLI::App* simulate = app.add_subcommand("simulate", "event-level timeline for a plan");
    add_pair(simulate);
    simulate->add_option("plan", plan_file, "partition plan JSON")->required();
    simulate->add_option("--schedule", schedule, "1f1b-as|fbp-as|1f1b-sno|1f1b-so")
        ->required();
    simulate->add_option("--micro", micro, "micro-batch count M")->required();
    simulate->add_option("--minibatch", minibatch, "mini-batch size (default M)");
    simulate->add_option("--gantt", gantt_file, "timeline export, .csv or .svg");
    simulate->add_flag("--trace", trace, "print the event trace as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        using namespace bapipe;
        NetworkProfile net = load_network(net_file, lenient);
        ClusterSpec cluster = load_cluster(cluster_file, lenient);
        validate_pair(net, cluster);

        if (validate->parsed()) {
            if (format == "json")
                std::cout << dump_canonical(
                    {{"status", "ok"},
                     {"manifest", run_manifest({net_file, cluster_file}, raw_cmd)}});
            else
                std::cout << "ok: network '" << net.name << "' (" << net.L()
                          << " layers), cluster of " << cluster.N() << "\n";
            return 0;
        }

        if (plan->parsed()) {
            ScheduleKind kind = require_kind(schedule);
            if (micro <= 0 && minibatch <= 0)
                throw SchemaError("plan: give --micro and/or --minibatch");
            std::int64_t M = micro > 0 ? micro : minibatch;
            std::int64_t mini = minibatch > 0 ? minibatch : M;
            if (mini % M != 0)
                throw SchemaError("--minibatch must be divisible by --micro");
            std::int64_t mu = mini / M;
            PartitionPlan p = balance_partition(net, cluster, kind, M, mu);
            CostEstimate est = estimate(kind, p, net, cluster, M, mu);
            if (!est.memory_feasible()) throw Infeasible("memory");
            json pj = plan_to_json(p);
            if (!out_file.empty()) save_file(out_file, pj);
            if (format == "json") {
                json mem = json::array(), bw = json::array();
                for (std::size_t i = 0; i < est.features_mem.size(); ++i)
                    mem.push_back((est.features_mem[i] + est.weights_mem[i]).str());
                for (const Rat& d : est.bandwidth_demand) bw.push_back(d.str());
                std::cout << dump_canonical(
                    {{"schedule", to_string(kind)},
                     {"M", M},
                     {"micro_batch_size", mu},
                     {"minibatch_time_us", est.minibatch_time.str()},
                     {"bubble_fraction", est.bubble_fraction.str()},
                     {"estimate_is_heuristic", est.heuristic},
                     {"stage_memory_bytes", mem},
                     {"bandwidth_demand_bytes_per_us", bw},
                     {"plan", pj},
                     {"manifest", run_manifest({net_file, cluster_file}, raw_cmd)}});
            } else {
                std::cout << "schedule " << to_string(kind) << ", M=" << M
                          << ", micro-batch size " << mu << "\n";
                for (std::size_t i = 0; i < p.stages.size(); ++i) {
                    const StageAssignment& s = p.stages[i];
                    std::cout << "stage " << i + 1 << " (" << s.accelerator_id
                              << "): layers [" << s.lo << "," << s.hi << "] lead "
                              << s.leading_fraction.str() << " trail "
                              << s.trailing_fraction.str() << ", mem "
                              << (est.features_mem[i] + est.weights_mem[i]).str() << " B\n";
                }
                std::cout << "estimated mini-batch time " << est.minibatch_time.str()
                          << " us, bubble " << est.bubble_fraction.str()
                          << (est.heuristic ? " (heuristic)" : "") << "\n";
                if (!out_file.empty()) std::cout << "plan written to " << out_file << "\n";
            }
            return 0;
        }

        if (explore->parsed()) {
            TrainingConfig cfg;
            cfg.mini_batch_size = minibatch;
            if (!micro_set.empty()) cfg.micro_batch_candidates = micro_set;
            ExplorationResult res = bapipe::explore(net, cluster, cfg);
            if (dp_baseline > 0.0) res.dp_baseline_minibatch_time = dp_baseline;
            if (!out_file.empty()) save_file(out_file, plan_to_json(res.best.plan));
            if (format == "json") {
                json j = exploration_to_json(res);
                j["manifest"] = run_manifest({net_file, cluster_file}, raw_cmd);
                std::cout << dump_canonical(j);
            } else {
                std::cout << exploration_table(res);
                if (!out_file.empty())
                    std::cout << "best plan written to " << out_file << "\n";
            }
            return 0;
        }

        // simulate
        ScheduleKind kind = require_kind(schedule);
        PartitionPlan p = load_plan(plan_file, lenient);
        std::int64_t mini = minibatch > 0 ? minibatch : micro;
        if (mini % micro != 0)
            throw SchemaError("--minibatch must be divisible by --micro");
        std::int64_t mu = mini / micro;
        Timeline t = bapipe::simulate(kind, p, net, cluster, micro, mu);
        CostEstimate est = estimate(kind, p, net, cluster, micro, mu);
        if (!gantt_file.empty()) {
            bool svg = gantt_file.size() >= 4 &&
                       gantt_file.compare(gantt_file.size() - 4, 4, ".svg") == 0;
            write_text(gantt_file, export_gantt(t, svg ? GanttFormat::Svg : GanttFormat::Csv));
        }
        if (format == "json") {
            json j = SimReport{}.to_json(t, est);
            j["manifest"] = run_manifest({net_file, cluster_file, plan_file}, raw_cmd);
            std::cout << dump_canonical(j);
        } else {
            print_sim_human(t, est);
        }
        if (trace) std::cout << gantt_csv(t);
        return 0;
    } catch (const bapipe::Infeasible& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const bapipe::InfeasibleShape& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const bapipe::NoFeasiblePlan& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
