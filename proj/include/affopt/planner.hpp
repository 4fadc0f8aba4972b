#pragma once

#include <cstdint>
#include <vector>

#include "affopt/intents.hpp"
#include "affopt/learned_model.hpp"
#include "affopt/option_models.hpp"
#include "affopt/rng.hpp"
#include "affopt/taxi.hpp"

namespace affopt {

/// Q over (state, option), defined only on afforded pairs. Undefined entries
/// carry an explicit marker; reading one throws rather than yielding 0.
struct OptionQFunction {
    int n_states = 0;
    int n_options = 0;
    std::vector<double> value;           // [s * n_options + o]
    std::vector<std::uint8_t> defined;   // [s * n_options + o]

    bool is_defined(int s, int o) const {
        return defined[static_cast<std::size_t>(s) * n_options + o] != 0;
    }
    double at(int s, int o) const;
    /// max over afforded options; terminal states report 0.
    std::vector<double> state_values(const AffordanceSet& affordances,
                                     const std::vector<std::uint8_t>& terminal) const;
};

/// Option choice per state; -1 marks terminal states.
struct OptionPolicy {
    std::vector<int> option;
};

struct QviResult {
    OptionQFunction q;
    int iterations = 0;
    double residual = 0.0;
};

/// Jacobi-style Q-value iteration over option models restricted to afforded
/// pairs: Q_k(s,o) = r(s,o) + <P(.|s,o), V_{k-1}>, V_k(s) = max over the
/// state's afforded options, V fixed at 0 for terminal states. Stops after
/// `epochs` sweeps or when the sup-norm change drops to `tol`, whichever
/// comes first. Missing model entries on afforded pairs and empty menus are
/// rejected up front.
QviResult smdp_qvi(const OptionModel& models, const AffordanceSet& affordances,
                   int epochs, double tol = 1e-10);

/// Same backup driven by a learned model (softmax rows discounted by the
/// duration head).
QviResult smdp_qvi(const LearnedPlanModel& models, const AffordanceSet& affordances,
                   int epochs, double tol = 1e-10);

/// Evaluates a fixed option policy in an option model:
/// V(s) = r(s, pi(s)) + <P(.|s, pi(s)), V>.
std::vector<double> smdp_policy_value(const OptionModel& models,
                                      const OptionPolicy& policy, double tol = 1e-12,
                                      int max_iter = 1000000);

/// Greedy policy over afforded options, lowest-index tie-break. Rejects
/// states with no afforded option.
OptionPolicy policy_over_options(const OptionQFunction& q,
                                 const AffordanceSet& affordances,
                                 const std::vector<std::uint8_t>& terminal);

/// Call-and-return rollouts of the option policy from fresh initial states;
/// success means reaching the delivered (terminal) state within `cap`
/// primitive steps. Timeouts count as failures.
double evaluate_success(const TabularMdp& mdp, const OptionPolicy& policy,
                        const OptionSet& options, int episodes, int cap, Rng& rng);

}  // namespace affopt
