#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "affopt/mdp.hpp"
#include "affopt/options.hpp"

namespace affopt {

/// Per-(state, option) entry health. kMissing entries raise on access rather
/// than decaying to zeros; kNonTerminating marks starts from which the option
/// fails to terminate with positive probability (duration reported +inf).
enum class EntryStatus : std::uint8_t { kOk = 0, kMissing = 1, kNonTerminating = 2 };

/// Multi-time option model. P absorbs discounting over termination times:
/// each row is a sub-probability vector over end states whose total mass is
/// E[gamma^duration] <= gamma. R is the expected discounted reward collected
/// while the option runs, L the expected duration in primitive steps.
struct OptionModel {
    enum class Kind : std::uint8_t { kExact, kEmpirical, kLearned, kIntent };

    Kind kind = Kind::kExact;
    int n_states = 0;
    int n_options = 0;
    double discount = 0.0;
    // Sparse termination rows, each sorted by end state.
    std::vector<std::vector<std::pair<int, double>>> rows;  // [s * n_options + o]
    std::vector<double> reward;                             // [s * n_options + o]
    std::vector<double> length;                             // [s * n_options + o]
    std::vector<EntryStatus> status;                        // [s * n_options + o]
    std::vector<std::uint8_t> terminal;  // per state; empty means none

    static OptionModel empty(Kind kind, int n_states, int n_options, double discount);

    std::size_t idx(int s, int o) const {
        return static_cast<std::size_t>(s) * n_options + o;
    }
    bool is_terminal_state(int s) const {
        return !terminal.empty() && terminal[s] != 0;
    }
    EntryStatus entry_status(int s, int o) const { return status[idx(s, o)]; }

    /// Row access; throws MissingEntryError for kMissing entries.
    const std::vector<std::pair<int, double>>& row(int s, int o) const;
    double reward_at(int s, int o) const;
    double length_at(int s, int o) const;

    /// Total discounted termination mass of a row, E[gamma^T].
    double mass(int s, int o) const;

    /// Delimited-text tables: one (state, option, end_state, p) row per atom,
    /// then one (state, option, reward, length, status) row per entry.
    void save(std::ostream& out) const;
    static OptionModel load(std::istream& in);
};

/// Exact model of a single option by fixed-point iteration of the recursions
///   P(e|s) = sum_x p(x|s,a_s) * gamma * [beta(x) 1{x=e} + (1-beta(x)) P(e|x)]
///   R(s)   = r(s,a_s) + gamma * sum_x p(x|s,a_s) (1-beta(x)) R(x)
///   L(s)   = 1 + sum_x p(x|s,a_s) (1-beta(x)) L(x)
/// where entering a terminal MDP state always terminates the option. The
/// returned model has n_options = 1. States from which termination is not
/// almost sure are flagged kNonTerminating with L = +inf.
OptionModel exact_option_model(const TabularMdp& mdp, const Option& option,
                               double tol = 1e-10, int max_iter = 100000);

/// Exact models for a whole option set, columns indexed by option id.
OptionModel exact_models(const TabularMdp& mdp, const OptionSet& options,
                         double tol = 1e-10, int max_iter = 100000);

/// Distribution over (end state, duration) cells computed by exhaustive
/// forward dynamic programming up to `horizon` steps, together with the
/// probability-weighted return of each cell. The mass that has not yet
/// terminated after `horizon` steps is reported as `residual`.
struct TrajectoryDistribution {
    int n_states = 0;
    int horizon = 0;
    std::vector<double> mass;        // [(t-1) * n_states + s'], t = 1..horizon
    std::vector<double> return_sum;  // probability-weighted return per cell
    double residual = 0.0;
    double residual_return = 0.0;  // weighted return carried by live mass

    double cell_mass(int t, int end) const { return mass[(t - 1) * n_states + end]; }
    double cell_return(int t, int end) const {
        return return_sum[(t - 1) * n_states + end];
    }
    double total_mass() const;

    /// Aggregates: discounted end-state distribution sum_t gamma^t mass(t,.),
    /// expected discounted reward and expected duration of the enumerated part.
    std::vector<double> discounted_end_distribution(double gamma) const;
    double expected_discounted_reward(double gamma) const;
    double expected_duration() const;
};

/// Guarded exhaustive enumeration (n_states <= 64, horizon <= 64). Serves as
/// the independent ground truth for the fixed-point models.
TrajectoryDistribution enumerate_trajectories(const TabularMdp& mdp,
                                              const Option& option, int start,
                                              int horizon);

/// Count-based estimator from logged transitions:
///   P_hat(e|s,o) = (1/N) sum_i 1{end_i = e} gamma^{T_i}
/// over the non-truncated samples of (s,o); R_hat is their mean discounted
/// reward and L_hat the mean duration over all samples (truncated ones enter
/// capped at their logged duration). Pairs with no usable sample are flagged
/// kMissing, never zero-filled.
OptionModel empirical_option_model(const Dataset& dataset, double gamma,
                                   int n_states, int n_options);

}  // namespace affopt
