#include "affopt/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "affopt/planner.hpp"

namespace affopt {

namespace {

double max_row_mass(const OptionModel& m) {
    double g = 0.0;
    for (int s = 0; s < m.n_states; ++s) {
        if (m.is_terminal_state(s)) continue;
        for (int o = 0; o < m.n_options; ++o) {
            if (m.entry_status(s, o) == EntryStatus::kMissing) continue;
            g = std::max(g, m.mass(s, o));
        }
    }
    return g;
}

double max_reward(const OptionModel& m) {
    double r = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < m.n_states; ++s) {
        if (m.is_terminal_state(s)) continue;
        for (int o = 0; o < m.n_options; ++o) {
            if (m.entry_status(s, o) == EntryStatus::kMissing) continue;
            r = std::max(r, m.reward_at(s, o));
        }
    }
    return r;
}

AffordanceSet everything(int n_states, int n_options) {
    AffordanceSet set = AffordanceSet::none(n_states, n_options, "everything");
    std::fill(set.member.begin(), set.member.end(), 1);
    return set;
}

}  // namespace

DiscountSummary discount_summary(const OptionModel& models,
                                 const OptionModel& intent_models) {
    DiscountSummary s;
    s.gamma_bar_options = max_row_mass(models);
    s.gamma_bar_intents = max_row_mass(intent_models);
    if (s.gamma_bar_options >= 1.0 || s.gamma_bar_intents >= 1.0)
        throw InvalidArgument("expected discount >= 1; model rows are malformed");
    s.r_max = max_reward(models);
    s.v_max = s.r_max / (1.0 - s.gamma_bar_options);
    return s;
}

DiscountSummary discount_summary(const OptionModel& models) {
    return discount_summary(models, models);
}

Lemma1Constants lemma1_constants(const std::vector<Intent>& intents,
                                 const OptionModel& models, double g_inf) {
    if (intents.empty()) throw InvalidArgument("no intents supplied");
    if (static_cast<int>(intents.size()) != models.n_options)
        throw InvalidArgument("need one intent per option");
    Lemma1Constants c;
    for (int s = 0; s < models.n_states; ++s) {
        if (models.is_terminal_state(s)) continue;
        for (int o = 0; o < models.n_options; ++o) {
            if (models.entry_status(s, o) == EntryStatus::kMissing) continue;
            c.zeta_p = std::max(c.zeta_p,
                                intent_satisfaction_zeta(models, intents[o], s, o));
        }
    }
    c.zeta_r = c.zeta_p * g_inf;
    return c;
}

double value_loss_bound(ValueLossKind kind, const DiscountSummary& summary,
                        double zeta_p, double zeta_r, int n_states, double gamma) {
    if (summary.gamma_bar_options >= 1.0 || summary.gamma_bar_intents >= 1.0)
        throw InvalidArgument("expected discounts must be < 1");
    const double g_opt = summary.gamma_bar_options;
    const double g_int = summary.gamma_bar_intents;
    switch (kind) {
        case ValueLossKind::kTheorem1:
            return zeta_r / (1.0 - g_int) +
                   2.0 * summary.r_max * (gamma / (1.0 - gamma)) * n_states * zeta_p /
                       ((1.0 - g_int) * (1.0 - g_opt));
        case ValueLossKind::kCorollary1:
            return 2.0 * zeta_p * g_opt * summary.r_max /
                   ((1.0 - g_opt) * (1.0 - g_opt));
    }
    throw InvalidArgument("unknown value-loss bound kind");
}

double planning_loss_bound(PlanningLossKind kind, const DiscountSummary& summary,
                           double zeta_p, double zeta_r, int n_states, double gamma,
                           long n_samples, double af_size, double log_pi_size,
                           double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (n_samples < 1) throw InvalidArgument("n must be >= 1");
    const double g_opt = summary.gamma_bar_options;
    const double g_int = summary.gamma_bar_intents;
    const double log_term =
        std::log(2.0) + std::log(af_size) + log_pi_size - std::log(delta);
    const double estimation = std::sqrt(log_term / (2.0 * n_samples));
    switch (kind) {
        case PlanningLossKind::kTheorem2:
            return 5.0 * zeta_r / (1.0 - g_int) +
                   (2.0 * summary.r_max / ((1.0 - g_int) * (1.0 - g_opt))) *
                       (2.0 * (gamma / (1.0 - gamma)) * n_states * zeta_p + estimation);
        case PlanningLossKind::kCorollary3:
            return (2.0 * summary.r_max / ((1.0 - g_opt) * (1.0 - g_opt))) *
                   (2.0 * g_opt * zeta_p + estimation);
    }
    throw InvalidArgument("unknown planning-loss bound kind");
}

double log_policy_class_upper_bound(const AffordanceSet& affordances,
                                    const std::vector<std::uint8_t>& terminal) {
    double log_pi = 0.0;
    for (int s = 0; s < affordances.n_states; ++s) {
        if (!terminal.empty() && terminal[s]) continue;
        const std::size_t menu = affordances.options_at(s).size();
        if (menu > 0) log_pi += std::log(static_cast<double>(menu));
    }
    return log_pi;
}

SampleComplexity sample_complexity(SampleComplexityKind kind, double epsilon,
                                   double delta, double zeta, double gamma_bar,
                                   double count) {
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (!(gamma_bar > 0.0 && gamma_bar < 1.0))
        throw InvalidArgument("gamma_bar must lie in (0,1)");
    const double one_minus = 1.0 - gamma_bar;
    SampleComplexity out;
    out.n_per_pair = static_cast<long>(
        std::ceil(4.0 / (std::pow(one_minus, 4) * epsilon * epsilon) *
                  std::log(2.0 * count / delta)));
    double k = 0.0;
    if (kind == SampleComplexityKind::kTheorem3Partial) {
        const double lower = 2.0 * zeta * gamma_bar / (one_minus * one_minus);
        if (epsilon < lower) throw InfeasibleEpsilonError(lower);
        k = std::log((epsilon * one_minus * one_minus - 2.0 * zeta * gamma_bar) /
                     (2.0 * one_minus)) /
            std::log(gamma_bar);
    } else {
        k = std::log(epsilon * one_minus) / std::log(gamma_bar);
    }
    out.epochs = std::max(1, static_cast<int>(std::ceil(k)));
    return out;
}

ValueLossTrial value_loss_trial(const SmdpInstance& instance, double zeta, Rng& rng) {
    ValueLossTrial trial;
    trial.zeta_requested = zeta;
    const int S = instance.mdp.n_states;
    const int O = instance.options.size();
    const AffordanceSet all = everything(S, O);

    PerturbedIntents intents = perturb_intents(instance, zeta, rng);
    trial.zeta_traj = intents.zeta_traj;
    trial.zeta_mtm = intents.zeta_mtm;

    QviResult star = smdp_qvi(instance.exact, all, 100000, 1e-13);
    std::vector<double> v_star = star.q.state_values(all, instance.mdp.terminal);
    QviResult induced = smdp_qvi(intents.intent_model, all, 100000, 1e-13);
    OptionPolicy pi = policy_over_options(induced.q, all, instance.mdp.terminal);
    std::vector<double> v_pi = smdp_policy_value(instance.exact, pi);

    for (int s = 0; s < S; ++s) {
        trial.measured = std::max(trial.measured, std::abs(v_pi[s] - v_star[s]));
        trial.v_star_sup = std::max(trial.v_star_sup, std::abs(v_star[s]));
    }

    DiscountSummary summary = discount_summary(instance.exact, intents.intent_model);
    const double g_inf =
        [&] {
            double r_prim = 0.0;
            for (double r : instance.mdp.reward) r_prim = std::max(r_prim, r);
            return r_prim / (1.0 - instance.mdp.discount);
        }();
    trial.bound_theorem1 =
        value_loss_bound(ValueLossKind::kTheorem1, summary, trial.zeta_traj,
                         trial.zeta_traj * g_inf, S, instance.mdp.discount);
    trial.bound_corollary1 = value_loss_bound(ValueLossKind::kCorollary1, summary,
                                              trial.zeta_mtm, 0.0, S,
                                              instance.mdp.discount);
    trial.holds_theorem1 = trial.measured <= trial.bound_theorem1 + 1e-9;
    trial.holds_corollary1 = trial.measured <= trial.bound_corollary1 + 1e-9;
    trial.remark1_ceiling = summary.v_max;
    trial.remark1_holds = trial.v_star_sup <= trial.remark1_ceiling + 1e-9;
    return trial;
}

PlanningLossTrial planning_loss_trial(const SmdpInstance& instance, double zeta,
                                      long n_samples, double delta, Rng& rng) {
    PlanningLossTrial trial;
    trial.zeta_requested = zeta;
    trial.n_samples = n_samples;
    const int S = instance.mdp.n_states;
    const int O = instance.options.size();
    const AffordanceSet all = everything(S, O);

    PerturbedIntents intents = perturb_intents(instance, zeta, rng);
    trial.zeta_traj = intents.zeta_traj;
    trial.zeta_mtm = intents.zeta_mtm;

    OptionModel empirical = empirical_from_samples(instance, intents.joints, all,
                                                   static_cast<int>(n_samples), rng);
    QviResult hat = smdp_qvi(empirical, all, 100000, 1e-12);
    OptionPolicy pi = policy_over_options(hat.q, all, instance.mdp.terminal);
    std::vector<double> v_pi = smdp_policy_value(instance.exact, pi);

    QviResult star = smdp_qvi(instance.exact, all, 100000, 1e-13);
    std::vector<double> v_star = star.q.state_values(all, instance.mdp.terminal);
    for (int s = 0; s < S; ++s)
        trial.measured = std::max(trial.measured, std::abs(v_pi[s] - v_star[s]));

    trial.af_size = static_cast<double>(all.count());
    trial.log_pi_size = log_policy_class_upper_bound(all, instance.mdp.terminal);
    DiscountSummary summary = discount_summary(instance.exact, intents.intent_model);
    const double g_inf = [&] {
        double r_prim = 0.0;
        for (double r : instance.mdp.reward) r_prim = std::max(r_prim, r);
        return r_prim / (1.0 - instance.mdp.discount);
    }();
    trial.bound_theorem2 = planning_loss_bound(
        PlanningLossKind::kTheorem2, summary, trial.zeta_traj,
        trial.zeta_traj * g_inf, S, instance.mdp.discount, n_samples, trial.af_size,
        trial.log_pi_size, delta);
    trial.bound_corollary3 = planning_loss_bound(
        PlanningLossKind::kCorollary3, summary, trial.zeta_mtm, 0.0, S,
        instance.mdp.discount, n_samples, trial.af_size, trial.log_pi_size, delta);
    trial.holds_theorem2 = trial.measured <= trial.bound_theorem2 + 1e-9;
    trial.holds_corollary3 = trial.measured <= trial.bound_corollary3 + 1e-9;
    return trial;
}

SampleComplexityTrial sample_complexity_trial(const SmdpInstance& instance,
                                              SampleComplexityKind kind, double zeta,
                                              double epsilon, double delta, Rng& rng) {
    SampleComplexityTrial trial;
    trial.epsilon = epsilon;
    const int S = instance.mdp.n_states;
    const int O = instance.options.size();
    const AffordanceSet all = everything(S, O);

    PerturbedIntents intents = perturb_intents(instance, zeta, rng);
    DiscountSummary summary = discount_summary(instance.exact, intents.intent_model);
    trial.gamma_bar = summary.gamma_bar_options;

    const double count = kind == SampleComplexityKind::kTheorem3Partial
                             ? static_cast<double>(all.count())
                             : static_cast<double>(S) * O;
    SampleComplexity sc =
        sample_complexity(kind, epsilon, delta, zeta, trial.gamma_bar, count);
    trial.n_per_pair = sc.n_per_pair;
    trial.epochs = sc.epochs;

    OptionModel empirical = empirical_from_samples(
        instance, intents.joints, all, static_cast<int>(sc.n_per_pair), rng);
    QviResult approx = smdp_qvi(empirical, all, sc.epochs, 0.0);

    QviResult star = smdp_qvi(instance.exact, all, 100000, 1e-13);
    for (int s = 0; s < S; ++s) {
        if (instance.mdp.is_terminal(s)) continue;
        for (int o = 0; o < O; ++o)
            trial.q_error = std::max(
                trial.q_error, std::abs(approx.q.at(s, o) - star.q.at(s, o)));
    }
    trial.within_epsilon = trial.q_error <= epsilon;
    return trial;
}

CertificationReport certify_bounds(const CertifyConfig& config) {
    if (config.trials < 1) throw InvalidArgument("trials must be >= 1");
    CertificationReport report;
    report.trials = config.trials;
    for (int trial_idx = 0; trial_idx < config.trials; ++trial_idx) {
        Rng rng = split_rng(config.seed, static_cast<std::uint64_t>(trial_idx));
        SmdpInstance instance = make_instance(config.instance, rng);
        const double zeta = config.zetas[trial_idx % config.zetas.size()];

        ValueLossTrial v = value_loss_trial(instance, zeta, rng);
        report.value_trials += 1;
        report.value_theorem1_held += v.holds_theorem1;
        report.value_corollary1_held += v.holds_corollary1;
        report.remark1_held += v.remark1_holds;
        if (zeta == 0.0)
            report.max_zeta0_value_loss =
                std::max(report.max_zeta0_value_loss, v.measured);

        PlanningLossTrial p = planning_loss_trial(instance, zeta, config.n_samples,
                                                  config.delta, rng);
        report.planning_trials += 1;
        report.planning_theorem2_held += p.holds_theorem2;
        report.planning_corollary3_held += p.holds_corollary3;

        // The partial-model schedule is only defined above its epsilon floor;
        // trials whose zeta would make epsilon infeasible run with exact
        // intents instead.
        const double g_bar = discount_summary(instance.exact).gamma_bar_options;
        const double eps_floor =
            2.0 * zeta * g_bar / ((1.0 - g_bar) * (1.0 - g_bar));
        const double zeta_t3 = config.epsilon >= eps_floor ? zeta : 0.0;
        SampleComplexityTrial t3 = sample_complexity_trial(
            instance, SampleComplexityKind::kTheorem3Partial, zeta_t3, config.epsilon,
            config.delta, rng);
        SampleComplexityTrial t4 = sample_complexity_trial(
            instance, SampleComplexityKind::kTheorem4Full, 0.0, config.epsilon,
            config.delta, rng);
        report.sample_trials += 1;
        report.theorem3_within_eps += t3.within_epsilon;
        report.theorem4_within_eps += t4.within_epsilon;

        const bool failed = !v.holds_theorem1 || !v.holds_corollary1 ||
                            !v.remark1_holds;
        if (failed && !config.failure_dir.empty()) {
            std::filesystem::create_directories(config.failure_dir);
            const std::string path = config.failure_dir + "/failure_trial_" +
                                     std::to_string(trial_idx) + ".mdp";
            save_mdp_file(instance.mdp, path);
            report.failures.push_back(path);
        }
    }
    return report;
}

}  // namespace affopt
