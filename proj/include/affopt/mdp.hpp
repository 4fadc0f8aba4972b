#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "affopt/errors.hpp"

namespace affopt {

/// Finite MDP with a dense transition tensor P[s][a][s'], per-(s,a) rewards
/// and a discount in [0, 1). Terminal states are absorbing zero-reward
/// self-loops, which keeps episodic tasks inside the stationary formalism.
///
/// Immutable after construction by convention; all solvers below are pure
/// functions of their inputs and safe to call concurrently.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;   // flattened [s][a][s']
    std::vector<double> reward;       // flattened [s][a]
    double discount = 0.0;
    std::vector<std::uint8_t> terminal;  // per state

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const {
        return reward[static_cast<std::size_t>(s) * n_actions + a];
    }
    double& r(int s, int a) {
        return reward[static_cast<std::size_t>(s) * n_actions + a];
    }
    bool is_terminal(int s) const { return terminal[s] != 0; }

    /// Allocates zeroed tables of the right shape.
    static TabularMdp zeros(int n_states, int n_actions, double discount);

    /// Checks row-stochasticity (1e-12), terminal absorption, discount range
    /// and finiteness. Throws InvalidArgument on the first violation.
    void validate() const;
};

struct ValueFunction {
    std::vector<double> values;  // per state
    double operator[](int s) const { return values[s]; }
};

struct QFunction {
    int n_states = 0;
    int n_choices = 0;  // actions or options
    std::vector<double> values;  // flattened [s][choice]
    double at(int s, int c) const {
        return values[static_cast<std::size_t>(s) * n_choices + c];
    }
    double& at(int s, int c) {
        return values[static_cast<std::size_t>(s) * n_choices + c];
    }
};

struct DeterministicPolicy {
    std::vector<int> choice;  // action (or option) index per state
};

struct ValueIterationResult {
    ValueFunction v;
    QFunction q;
    int iterations = 0;
};

/// Value iteration to a sup-norm Bellman residual of at most `tol`.
/// Throws ConvergenceError if `max_iter` sweeps are not enough.
ValueIterationResult value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                                     int max_iter = 100000);

/// Iterative policy evaluation: ||V - (r_pi + gamma P_pi V)||_inf <= tol.
ValueFunction policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy,
                           double tol = 1e-10, int max_iter = 1000000);

/// Row argmax with lowest-index tie-breaking.
DeterministicPolicy greedy_policy(const QFunction& q);

/// Plain-text round-trip format. Header line: n_states n_actions discount;
/// then one line of n_states probabilities per (s, a) in row-major order;
/// then one line of n_actions rewards per state. Terminal flags are not
/// stored; on load a state is marked terminal when it is absorbing with zero
/// reward under every action.
void save_mdp(const TabularMdp& mdp, std::ostream& out);
TabularMdp load_mdp(std::istream& in);
void save_mdp_file(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp_file(const std::string& path);

}  // namespace affopt
