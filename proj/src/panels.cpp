#include "fedlab/panels.hpp"

#include <filesystem>

#include "fedlab/csv.hpp"
#include "fedlab/rng.hpp"

namespace fedlab::expcli {

std::uint64_t replication_seed(std::uint64_t master_seed, int replication) {
    return rng::mix(rng::mix(master_seed, rng::tag_hash("replication")),
                    static_cast<std::uint64_t>(replication));
}

namespace {

struct PanelContext {
    synthgen::Population pop;
    synthgen::OracleSolution oracle;
};

PanelContext make_context(const ExperimentConfig& cfg) {
    PanelContext ctx;
    ctx.pop = synthgen::generate_population(cfg.population);
    ctx.oracle = synthgen::solve_target_optimum(ctx.pop, cfg.population.ridge);
    return ctx;
}

federation::RunResult run_one(const PanelContext& ctx, const ExperimentConfig& cfg,
                              federation::Method method, int replication) {
    federation::TrainingConfig tc = cfg.training;
    tc.method = method;
    tc.seed = replication_seed(cfg.master_seed, replication);
    return federation::run_training(ctx.pop, cfg.selection, tc, ctx.oracle, cfg.method_config,
                                    cfg.population.ridge);
}

void write_curve_rows(csv::Writer& w, int replication, double sweep_value,
                      const federation::RunResult& run) {
    for (const auto& row : run.metrics) {
        w.field(replication)
            .field(sweep_value)
            .field(row.round)
            .field(row.method)
            .field(row.target_loss)
            .field(row.dist_to_opt)
            .field(row.max_rho_err)
            .field(row.participants);
        w.endrow();
    }
}

const std::string kCurveHeader =
    "replication,sweep_value,round,method,target_loss,dist_to_opt,eps_w_logged,participants";

void panel_a(const ExperimentConfig& cfg, const std::string& out_dir) {
    PanelContext ctx = make_context(cfg);
    csv::Writer w(out_dir + "/panel_a.csv");
    w.header(kCurveHeader);
    for (int rep = 0; rep < cfg.replications; ++rep)
        for (auto method : cfg.methods)
            write_curve_rows(w, rep, 0.0, run_one(ctx, cfg, method, rep));
}

void panel_b(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::vector<double> values = {0.0, 0.5, 1.0, 1.5, 2.0};
    if (cfg.sweep_param == "bias_scale" && !cfg.sweep_values.empty()) values = cfg.sweep_values;
    PanelContext ctx = make_context(cfg);
    csv::Writer w(out_dir + "/panel_b.csv");
    w.header("replication,bias_scale,method,final_target_loss,final_dist_to_opt");
    for (double s : values) {
        ExperimentConfig swept = cfg;
        apply_override(swept, "bias_scale", s);
        for (int rep = 0; rep < cfg.replications; ++rep) {
            for (auto method : cfg.methods) {
                const auto run = run_one(ctx, swept, method, rep);
                const auto& last = run.metrics.back();
                w.field(rep)
                    .field(s)
                    .field(last.method)
                    .field(last.target_loss)
                    .field(last.dist_to_opt);
                w.endrow();
            }
        }
    }
}

void panel_c(const ExperimentConfig& cfg, const std::string& out_dir) {
    ExperimentConfig limited = cfg;
    limited.methods = {federation::Method::RoundOnlyIpw, federation::Method::Calibrated,
                       federation::Method::FedIpw};
    limited.method_config.moment_noise_sigma = 0.0;
    PanelContext ctx = make_context(limited);
    csv::Writer w(out_dir + "/panel_c.csv");
    w.header(kCurveHeader);
    for (int rep = 0; rep < limited.replications; ++rep)
        for (auto method : limited.methods)
            write_curve_rows(w, rep, 0.0, run_one(ctx, limited, method, rep));
}

void panel_d(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::vector<double> sigmas = {0.0, 0.1, 0.3, 1.0};
    if (cfg.sweep_param == "moment_noise_sigma" && !cfg.sweep_values.empty())
        sigmas = cfg.sweep_values;
    PanelContext ctx = make_context(cfg);
    csv::Writer w(out_dir + "/panel_d.csv");
    w.header("replication,moment_noise_sigma,final_dist_to_opt,final_target_loss");
    for (double sigma : sigmas) {
        ExperimentConfig swept = cfg;
        apply_override(swept, "moment_noise_sigma", sigma);
        for (int rep = 0; rep < cfg.replications; ++rep) {
            const auto run = run_one(ctx, swept, federation::Method::Calibrated, rep);
            const auto& last = run.metrics.back();
            w.field(rep).field(sigma).field(last.dist_to_opt).field(last.target_loss);
            w.endrow();
        }
    }
}

}  // namespace

void run_panel(char panel, const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    switch (panel) {
        case 'a': panel_a(cfg, out_dir); return;
        case 'b': panel_b(cfg, out_dir); return;
        case 'c': panel_c(cfg, out_dir); return;
        case 'd': panel_d(cfg, out_dir); return;
        default: throw ConfigError(std::string("unknown panel '") + panel + "'");
    }
}

void run_sweep(const ExperimentConfig& cfg, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir) {
    if (values.empty()) throw ConfigError("run_sweep: empty value list");
    std::filesystem::create_directories(out_dir);
    PanelContext ctx = make_context(cfg);
    csv::Writer w(out_dir + "/sweep_" + param + ".csv");
    w.header("replication,sweep_value,method,final_target_loss,final_dist_to_opt");
    for (double v : values) {
        ExperimentConfig swept = cfg;
        apply_override(swept, param, v);
        // Population-shaping parameters require a fresh context.
        PanelContext local_ctx =
            (param == "num_clients") ? make_context(swept) : ctx;
        for (int rep = 0; rep < cfg.replications; ++rep) {
            for (auto method : cfg.methods) {
                const auto run = run_one(local_ctx, swept, method, rep);
                const auto& last = run.metrics.back();
                w.field(rep)
                    .field(v)
                    .field(last.method)
                    .field(last.target_loss)
                    .field(last.dist_to_opt);
                w.endrow();
            }
        }
    }
}

}  // namespace fedlab::expcli
