#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace affopt {

// Precondition violations (bad shapes, invalid indices, out-of-range args).
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Iterative solver failed to reach its tolerance; carries the last residual.
struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& what, double res)
        : std::runtime_error(what + " (final residual " + std::to_string(res) + ")"),
          residual(res) {}
};

// A model entry was queried for a (state, option) pair with no data. Missing
// entries are never silently zero-filled.
struct MissingEntryError : std::runtime_error {
    int state;
    int option;
    MissingEntryError(int s, int o)
        : std::runtime_error("no model entry for state " + std::to_string(s) +
                             ", option " + std::to_string(o)),
          state(s), option(o) {}
    MissingEntryError(const std::string& what, int n_missing)
        : std::runtime_error(what), state(-1), option(-n_missing) {}
};

// Requested accuracy is below what the intent approximation permits; carries
// the smallest feasible epsilon.
struct InfeasibleEpsilonError : std::runtime_error {
    double epsilon_lower_bound;
    explicit InfeasibleEpsilonError(double lb)
        : std::runtime_error("epsilon infeasible; must be at least " +
                             std::to_string(lb)),
          epsilon_lower_bound(lb) {}
};

// An affordance set left some non-terminal state with no options.
struct LivenessError : std::runtime_error {
    std::vector<int> states;
    explicit LivenessError(std::vector<int> bad)
        : std::runtime_error("affordance set affords no option in " +
                             std::to_string(bad.size()) + " state(s)"),
          states(std::move(bad)) {}
};

}  // namespace affopt
