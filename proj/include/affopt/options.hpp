#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <string>
#include <vector>

#include "affopt/mdp.hpp"
#include "affopt/rng.hpp"

namespace affopt {

/// Temporally extended action: initiation set, deterministic internal policy
/// and a per-state termination probability. Immutable once built.
struct Option {
    int id = 0;
    std::vector<std::uint8_t> initiation;  // per state
    std::vector<int> intra_policy;         // action per state
    std::vector<double> termination;       // beta in [0,1] per state

    bool can_start(int s) const { return initiation[s] != 0; }
    void validate(const TabularMdp& mdp) const;
};

struct OptionSet {
    std::vector<Option> options;
    int size() const { return static_cast<int>(options.size()); }
    const Option& operator[](int i) const { return options[i]; }
};

/// One logged option execution: (s, o, T, s_end, undiscounted and discounted
/// cumulative reward, truncation flag). Durations are always >= 1: an option
/// started where its termination condition already holds still runs one
/// primitive step, so the per-sample discount gamma^T never degenerates to 1.
struct OptionTransition {
    int start_state = 0;
    int option_id = 0;
    int duration = 0;
    int end_state = 0;
    double reward = 0.0;             // plain sum of step rewards
    double discounted_reward = 0.0;  // sum of gamma^i * reward_i
    bool truncated = false;          // cut by t_max; natural episode end is not truncation
};

/// Append-only transition log with per-(state, option) visit counts.
/// Appends are serialized; readers see a consistent prefix via size().
class Dataset {
  public:
    Dataset(int n_states, int n_options);
    Dataset(Dataset&& other) noexcept;
    Dataset& operator=(Dataset&& other) noexcept;
    Dataset(const Dataset&) = delete;
    Dataset& operator=(const Dataset&) = delete;

    void append(const OptionTransition& t);
    std::size_t size() const;
    OptionTransition at(std::size_t i) const;
    int visits(int state, int option) const;
    int n_states() const { return n_states_; }
    int n_options() const { return n_options_; }

    void save(std::ostream& out) const;
    static Dataset load(std::istream& in, int n_states, int n_options);

  private:
    int n_states_;
    int n_options_;
    mutable std::mutex mu_;
    std::vector<OptionTransition> rows_;
    std::vector<int> counts_;  // flattened [state][option]
};

/// The 75 taxi options: go-to(cell), pickup-at(cell), drop-at(cell) for each
/// of the 25 cells, in that block order. Navigation policies come from value
/// iteration on the movement-only subproblem with the goal cell absorbing.
/// Every option can start anywhere.
OptionSet pretrain_taxi_options(const TabularMdp& mdp);

/// Ids of taxi options by construction: go-to block, then pickup, then drop.
int taxi_goto_option(int row, int col);
int taxi_pickup_option(int row, int col);
int taxi_drop_option(int row, int col);

/// Runs the option from `start` until its termination condition fires, the
/// episode ends, or t_max primitive steps elapse (the last sets `truncated`).
OptionTransition execute_option(const TabularMdp& mdp, int start, const Option& option,
                                int t_max, Rng& rng);

/// Returns the option ids selectable in a state; must be non-empty for every
/// non-terminal state handed to collect_transitions.
using OptionSelector = std::function<std::vector<int>(int state)>;

/// Call-and-return collection of n transitions. Episodes start from the
/// initial distribution and continue from each option's end state; a fresh
/// start is drawn when the episode terminates.
Dataset collect_transitions(const TabularMdp& mdp, const OptionSet& options,
                            const OptionSelector& selector,
                            const std::function<int(Rng&)>& initial_state, int n,
                            int t_max, Rng& rng);

/// Appends n transitions to an existing dataset (used by rollout workers).
void collect_transitions_into(const TabularMdp& mdp, const OptionSet& options,
                              const OptionSelector& selector,
                              const std::function<int(Rng&)>& initial_state, int n,
                              int t_max, Rng& rng, Dataset& dataset);

}  // namespace affopt
