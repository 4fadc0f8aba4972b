#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "affopt/generators.hpp"
#include "affopt/intents.hpp"
#include "affopt/option_models.hpp"
#include "affopt/rng.hpp"

namespace affopt {

/// Expected-discount constants of a pair of models: the maxima over (s,o) of
/// each row's total discounted termination mass, the maximum option reward
/// and the induced value ceiling r_max / (1 - gamma_bar_options).
struct DiscountSummary {
    double gamma_bar_options = 0.0;
    double gamma_bar_intents = 0.0;
    double r_max = 0.0;
    double v_max = 0.0;
};

DiscountSummary discount_summary(const OptionModel& models,
                                 const OptionModel& intent_models);
/// Same with the intents equal to the options (gamma bars coincide).
DiscountSummary discount_summary(const OptionModel& models);

/// zeta_P = max over pairs of the degree of satisfaction; zeta_R scales it by
/// the return ceiling g_inf (pass r_primitive_max / (1 - gamma) when no
/// tighter value is known).
struct Lemma1Constants {
    double zeta_p = 0.0;
    double zeta_r = 0.0;
};
Lemma1Constants lemma1_constants(const std::vector<Intent>& intents,
                                 const OptionModel& models, double g_inf);

enum class ValueLossKind { kTheorem1, kCorollary1 };

/// kTheorem1:  zeta_r/(1-gI) + 2 r_max (gamma/(1-gamma)) |S| zeta_p
///             / ((1-gI)(1-gO))
/// kCorollary1: 2 zeta_p gO r_max / (1-gO)^2
double value_loss_bound(ValueLossKind kind, const DiscountSummary& summary,
                        double zeta_p, double zeta_r, int n_states, double gamma);

enum class PlanningLossKind { kTheorem2, kCorollary3 };

/// kTheorem2:  5 zeta_r/(1-gI) + (2 r_max/((1-gI)(1-gO)))
///             * (2 (gamma/(1-gamma)) |S| zeta_p + sqrt(log(2 af pi / delta)/(2n)))
/// kCorollary3: (2 r_max/(1-gO)^2) * (2 gO zeta_p + sqrt(log(2 af pi/delta)/(2n)))
/// The policy-class size enters through its logarithm so product-over-states
/// upper bounds cannot overflow.
double planning_loss_bound(PlanningLossKind kind, const DiscountSummary& summary,
                           double zeta_p, double zeta_r, int n_states, double gamma,
                           long n_samples, double af_size, double log_pi_size,
                           double delta);

/// log of the default policy-class upper bound: product over states of the
/// afforded menu size.
double log_policy_class_upper_bound(const AffordanceSet& affordances,
                                    const std::vector<std::uint8_t>& terminal);

enum class SampleComplexityKind { kTheorem3Partial, kTheorem4Full };

struct SampleComplexity {
    long n_per_pair = 0;
    int epochs = 0;
};

/// N = ceil( 4/((1-g)^4 eps^2) * log(2 count / delta) ), keeping the delta
/// the Hoeffding step introduces. Epochs:
///   kTheorem3Partial: ceil( log( (eps (1-g)^2 - 2 zeta g) / (2(1-g)) ) / log g ),
///     requiring eps >= 2 zeta g / (1-g)^2 (InfeasibleEpsilonError otherwise);
///   kTheorem4Full:    ceil( log( eps (1-g) ) / log g ).
SampleComplexity sample_complexity(SampleComplexityKind kind, double epsilon,
                                   double delta, double zeta, double gamma_bar,
                                   double count);

/// One certification trial against the value-loss bounds: how far the policy
/// that is optimal for the intent-induced SMDP falls short in the true SMDP.
struct ValueLossTrial {
    double zeta_requested = 0.0;
    double zeta_traj = 0.0;
    double zeta_mtm = 0.0;
    double measured = 0.0;
    double bound_theorem1 = 0.0;
    double bound_corollary1 = 0.0;
    bool holds_theorem1 = false;
    bool holds_corollary1 = false;
    double v_star_sup = 0.0;
    double remark1_ceiling = 0.0;
    bool remark1_holds = false;
};
ValueLossTrial value_loss_trial(const SmdpInstance& instance, double zeta, Rng& rng);

/// One certainty-equivalence trial: plan on the empirical model of the
/// intent-induced SMDP (n samples per afforded pair) and deploy in the truth.
struct PlanningLossTrial {
    double zeta_requested = 0.0;
    double zeta_traj = 0.0;
    double zeta_mtm = 0.0;
    long n_samples = 0;
    double af_size = 0.0;
    double log_pi_size = 0.0;
    double measured = 0.0;
    double bound_theorem2 = 0.0;
    double bound_corollary3 = 0.0;
    bool holds_theorem2 = false;
    bool holds_corollary3 = false;
};
PlanningLossTrial planning_loss_trial(const SmdpInstance& instance, double zeta,
                                      long n_samples, double delta, Rng& rng);

/// One sample-complexity trial: N and K from the closed forms, SMDP-QVI on
/// the empirical model, sup-norm distance from the true Q*.
struct SampleComplexityTrial {
    double gamma_bar = 0.0;
    long n_per_pair = 0;
    int epochs = 0;
    double q_error = 0.0;
    double epsilon = 0.0;
    bool within_epsilon = false;
};
SampleComplexityTrial sample_complexity_trial(const SmdpInstance& instance,
                                              SampleComplexityKind kind, double zeta,
                                              double epsilon, double delta, Rng& rng);

struct CertifyConfig {
    int trials = 200;
    std::vector<double> zetas{0.0, 0.05, 0.2};
    double delta = 0.05;
    long n_samples = 5000;   // per afforded pair in planning-loss trials
    double epsilon = 0.5;    // sample-complexity target
    InstanceConfig instance;
    std::uint64_t seed = 1;
    std::string failure_dir;  // non-empty: failing instances are saved there
};

struct CertificationReport {
    int trials = 0;
    // Hard bounds: counts of trials where the inequality held.
    int value_theorem1_held = 0;
    int value_corollary1_held = 0;
    int remark1_held = 0;
    double max_zeta0_value_loss = 0.0;  // measured loss at zeta = 0
    // Statistical bounds.
    int planning_theorem2_held = 0;
    int planning_corollary3_held = 0;
    int theorem3_within_eps = 0;
    int theorem4_within_eps = 0;
    int value_trials = 0;
    int planning_trials = 0;
    int sample_trials = 0;
    std::vector<std::string> failures;  // saved failure instance paths
};

/// Runs the full trial battery; per-trial generators derive from the root
/// seed, so trials are reproducible and order-independent.
CertificationReport certify_bounds(const CertifyConfig& config);

}  // namespace affopt
