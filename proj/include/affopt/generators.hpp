#pragma once

#include <vector>

#include "affopt/intents.hpp"
#include "affopt/mdp.hpp"
#include "affopt/option_models.hpp"
#include "affopt/options.hpp"
#include "affopt/rng.hpp"

namespace affopt {

/// Random MDP with sparse rows (up to max_successors per (s,a)) and uniform
/// rewards in [reward_min, reward_max]. No terminal states.
TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng,
                      double reward_min = 0.0, double reward_max = 1.0,
                      int max_successors = 3);

/// Random option: uniform deterministic intra policy; termination probability
/// 1 with probability p_beta_one, otherwise uniform in [beta_min, 1). With
/// beta_min > 0 every start terminates almost surely.
Option random_option(const TabularMdp& mdp, int id, Rng& rng,
                     double p_beta_one = 0.4, double beta_min = 0.3);

struct InstanceConfig {
    int n_states = 6;
    int n_actions = 3;
    int n_options = 3;
    double gamma = 0.6;
    double reward_min = 0.0;
    double reward_max = 1.0;
    double p_beta_one = 0.4;
    double beta_min = 0.3;
    int horizon = 60;  // enumeration depth for the joint distributions
};

/// Ground MDP + options + exact models + per-pair (end, duration) joints from
/// the enumeration oracle. The joints double as the generative model: they
/// are exact up to the enumerated horizon's residual.
struct SmdpInstance {
    TabularMdp mdp;
    OptionSet options;
    OptionModel exact;
    std::vector<TrajectoryDistribution> joints;  // [s * n_options + o]
    InstanceConfig config;

    const TrajectoryDistribution& joint(int s, int o) const {
        return joints[static_cast<std::size_t>(s) * options.size() + o];
    }
};

SmdpInstance make_instance(const InstanceConfig& config, Rng& rng);

/// Draws one (end, duration) outcome from a pair's joint distribution.
std::pair<int, int> sample_outcome(const TrajectoryDistribution& joint, Rng& rng);

/// Perturbed copies of the instance's joints: per pair, probability delta =
/// zeta/2 is moved between cells of equal duration, carrying the source
/// cells' returns along. The trajectory-level total variation of every pair
/// is exactly zeta, rewards are unchanged, and each row's discounted mass is
/// preserved, so the intent and option expected discounts coincide.
struct PerturbedIntents {
    std::vector<TrajectoryDistribution> joints;       // intent-induced joints
    std::vector<Intent> intents;                      // multi-time rows per option
    OptionModel intent_model;                         // discounted rows, true rewards
    double zeta_traj = 0.0;                           // max over pairs (== zeta)
    double zeta_mtm = 0.0;                            // max multi-time TV over pairs
};
PerturbedIntents perturb_intents(const SmdpInstance& instance, double zeta, Rng& rng);

/// Empirical model from n joint samples per afforded pair; rewards are copied
/// from the exact model (the reward function is treated as known).
OptionModel empirical_from_samples(const SmdpInstance& instance,
                                   const std::vector<TrajectoryDistribution>& joints,
                                   const AffordanceSet& affordances, int n, Rng& rng);

/// Options that wrap each primitive action with termination everywhere.
OptionSet primitive_wrapper_options(const TabularMdp& mdp);

}  // namespace affopt
