// Command-line front end: option pretraining, experiment runs, learned
// affordance sweeps, bound reports, bound certification, oracle checks.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "affopt/bounds.hpp"
#include "affopt/harness.hpp"
#include "affopt/planner.hpp"
#include "affopt/taxi.hpp"

namespace {

std::uint64_t root_seed_from_env(std::uint64_t fallback) {
    if (const char* env = std::getenv("AFFOPT_SEED")) return std::stoull(env);
    return fallback;
}

affopt::ExperimentConfig build_config(const std::string& config_path,
                                      const std::vector<std::string>& sets) {
    std::map<std::string, std::string> overrides;
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw affopt::InvalidArgument("--set expects key=value, got " + kv);
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return config_path.empty() ? affopt::config_from_overrides(overrides)
                               : affopt::load_config(config_path, overrides);
}

void emit_rows(const affopt::ExperimentResult& result, const std::string& out_path) {
    if (out_path.empty()) {
        affopt::write_result_rows(result.rows, std::cout);
    } else {
        std::ofstream out(out_path);
        affopt::write_result_rows(result.rows, out);
        std::cout << "wrote " << result.rows.size() << " rows to " << out_path
                  << "\n";
    }
    for (const affopt::RunStatus& st : result.statuses) {
        if (st.failed)
            std::cout << "seed " << st.seed << " FAILED: " << st.message
                      << (st.diverged ? " (diverged at update " +
                                            std::to_string(st.halted_at_step) + ")"
                                      : "")
                      << "\n";
    }
}

int cmd_pretrain_options(double gamma) {
    affopt::TabularMdp mdp = affopt::taxi::build_taxi_mdp(gamma);
    affopt::OptionSet options = affopt::pretrain_taxi_options(mdp);
    std::cout << affopt::taxi::layout_ascii();
    std::cout << "states: " << mdp.n_states << "\noptions: " << options.size()
              << "\nstate-option pairs: " << mdp.n_states * options.size() << "\n";
    affopt::OptionModel exact = affopt::exact_models(mdp, options, 1e-10);
    affopt::AffordanceSet all =
        affopt::taxi_heuristic_affordances(affopt::TaxiAffordanceKind::kEverything);
    affopt::QviResult plan = affopt::smdp_qvi(exact, all, 100000, 1e-10);
    affopt::OptionPolicy policy =
        affopt::policy_over_options(plan.q, all, mdp.terminal);
    affopt::Rng rng = affopt::make_rng(root_seed_from_env(1));
    const double success =
        affopt::evaluate_success(mdp, policy, options, 1000, 200, rng);
    std::cout << "exact-model plan success rate: " << success << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"option models, affordances, and SMDP planning on tabular MDPs"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_path;
    std::uint64_t seed_flag = 0;
    double gamma = 0.99;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value configuration file");
        cmd->add_option("--set", sets, "override a config key (key=value)");
        cmd->add_option("--out", out_path, "write tables to this file");
        cmd->add_option("--seed", seed_flag,
                        "root seed (also honors AFFOPT_SEED)");
    };

    CLI::App* pretrain = app.add_subcommand(
        "pretrain-options", "build the taxi MDP, pretrain the 75 options and "
                            "verify exact-model planning");
    pretrain->add_option("--gamma", gamma, "discount factor");

    CLI::App* run = app.add_subcommand("run-experiment",
                                       "collect / train / evaluate pipeline");
    add_common(run);

    CLI::App* sweep = app.add_subcommand(
        "learned-affordances", "classifier threshold sweep with per-k set sizes");
    add_common(sweep);
    double sweep_target = 0.9;
    sweep->add_option("--target", sweep_target, "success threshold for crossings");

    CLI::App* bounds_cmd = app.add_subcommand(
        "compute-bounds", "bound report for the taxi instance (exact intents)");
    double b_delta = 0.05, b_eps = 0.5;
    long b_n = 5000;
    bool b_json = false;
    bounds_cmd->add_option("--gamma", gamma, "discount factor");
    bounds_cmd->add_option("--delta", b_delta, "failure probability");
    bounds_cmd->add_option("--epsilon", b_eps, "accuracy target");
    bounds_cmd->add_option("--samples", b_n, "samples per afforded pair");
    bounds_cmd->add_flag("--json", b_json, "emit the machine-readable variant");

    CLI::App* certify = app.add_subcommand(
        "certify-bounds", "empirical inequality certification on random SMDPs");
    int c_trials = 200;
    double c_delta = 0.05;
    long c_samples = 5000;
    double c_eps = 0.5;
    std::string c_failure_dir;
    std::uint64_t c_seed = 1;
    certify->add_option("--trials", c_trials, "number of trials");
    certify->add_option("--delta", c_delta, "failure probability");
    certify->add_option("--samples", c_samples, "samples per pair");
    certify->add_option("--epsilon", c_eps, "sample-complexity accuracy");
    certify->add_option("--failure-dir", c_failure_dir,
                        "directory for failing instances");
    certify->add_option("--seed", c_seed, "root seed (also honors AFFOPT_SEED)");

    CLI::App* verify = app.add_subcommand(
        "verify-oracles", "exact models vs the trajectory enumerator, and "
                          "SMDP-QVI vs plain value iteration");
    int v_instances = 50;
    std::uint64_t v_seed = 1;
    verify->add_option("--instances", v_instances, "random instances per check");
    verify->add_option("--seed", v_seed, "root seed (also honors AFFOPT_SEED)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) return cmd_pretrain_options(gamma);

        if (run->parsed()) {
            affopt::ExperimentConfig config = build_config(config_path, sets);
            if (seed_flag != 0) config.seeds = {root_seed_from_env(seed_flag)};
            emit_rows(affopt::run_experiment(config), out_path);
            return 0;
        }

        if (sweep->parsed()) {
            affopt::ExperimentConfig config = build_config(config_path, sets);
            config.classifier_enabled = true;
            if (config.train_affordances != "classifier" &&
                config.plan_affordances != "classifier") {
                config.train_affordances = "classifier";
                config.plan_affordances = "classifier";
            }
            auto points = affopt::run_learned_affordance_sweep(config, sweep_target);
            std::cout << "k,final_set_size,transitions_to_target\n";
            for (const auto& p : points) {
                std::cout << p.k << ',' << p.final_set_size << ',';
                if (p.transitions_to_target)
                    std::cout << *p.transitions_to_target;
                else
                    std::cout << "none";
                std::cout << '\n';
            }
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                for (const auto& p : points)
                    affopt::write_result_rows(p.result.rows, out);
            }
            return 0;
        }

        if (bounds_cmd->parsed()) {
            affopt::BoundReport rep =
                affopt::taxi_bound_report(gamma, b_n, b_delta, b_eps);
            if (b_json)
                affopt::render_bound_report_json(rep, std::cout);
            else
                affopt::render_bound_report(rep, std::cout);
            return 0;
        }

        if (certify->parsed()) {
            affopt::CertifyConfig config;
            config.trials = c_trials;
            config.delta = c_delta;
            config.n_samples = c_samples;
            config.epsilon = c_eps;
            config.failure_dir = c_failure_dir;
            config.seed = root_seed_from_env(c_seed);
            affopt::CertificationReport rep = affopt::certify_bounds(config);
            affopt::render_certification_report(rep, std::cout);
            const double frac_c3 = static_cast<double>(rep.planning_corollary3_held) /
                                   std::max(1, rep.planning_trials);
            const bool ok = rep.value_corollary1_held == rep.value_trials &&
                            rep.value_theorem1_held == rep.value_trials &&
                            rep.remark1_held == rep.value_trials &&
                            frac_c3 >= 1.0 - config.delta;
            std::cout << (ok ? "CERTIFIED\n" : "CERTIFICATION FAILED\n");
            return ok ? 0 : 1;
        }

        if (verify->parsed()) {
            const std::uint64_t seed = root_seed_from_env(v_seed);
            double max_model_err = 0.0, max_plan_err = 0.0;
            for (int i = 0; i < v_instances; ++i) {
                affopt::Rng rng = affopt::split_rng(seed, i);
                affopt::InstanceConfig ic;
                ic.gamma = 0.5 + 0.2 * affopt::uniform01(rng);
                affopt::SmdpInstance inst = affopt::make_instance(ic, rng);
                for (int s = 0; s < inst.mdp.n_states; ++s) {
                    for (int o = 0; o < inst.options.size(); ++o) {
                        const auto& joint = inst.joint(s, o);
                        std::vector<double> agg =
                            joint.discounted_end_distribution(inst.mdp.discount);
                        std::vector<double> row(inst.mdp.n_states, 0.0);
                        for (const auto& [e, p] : inst.exact.row(s, o)) row[e] = p;
                        for (int e = 0; e < inst.mdp.n_states; ++e)
                            max_model_err =
                                std::max(max_model_err, std::abs(agg[e] - row[e]));
                    }
                }
                // Primitive reduction on a fresh random MDP.
                affopt::TabularMdp mdp = affopt::random_mdp(6, 3, ic.gamma, rng);
                affopt::OptionSet prim = affopt::primitive_wrapper_options(mdp);
                affopt::OptionModel prim_model = affopt::exact_models(mdp, prim, 1e-12);
                affopt::AffordanceSet all = affopt::AffordanceSet::none(
                    mdp.n_states, prim.size(), "everything");
                std::fill(all.member.begin(), all.member.end(), 1);
                affopt::QviResult qvi = affopt::smdp_qvi(prim_model, all, 100000, 1e-13);
                affopt::ValueIterationResult vi = affopt::value_iteration(mdp, 1e-13);
                for (int s = 0; s < mdp.n_states; ++s)
                    for (int a = 0; a < mdp.n_actions; ++a)
                        max_plan_err = std::max(
                            max_plan_err, std::abs(qvi.q.at(s, a) - vi.q.at(s, a)));
            }
            std::cout << "exact model vs enumeration, sup error: " << max_model_err
                      << "\n";
            std::cout << "smdp-qvi vs value iteration, sup error: " << max_plan_err
                      << "\n";
            const bool ok = max_model_err < 1e-6 && max_plan_err < 1e-8;
            std::cout << (ok ? "ORACLES AGREE\n" : "ORACLE MISMATCH\n");
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
