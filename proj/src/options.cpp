#include "affopt/options.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "affopt/taxi.hpp"

namespace affopt {

void Option::validate(const TabularMdp& mdp) const {
    const std::size_t S = static_cast<std::size_t>(mdp.n_states);
    if (initiation.size() != S || intra_policy.size() != S || termination.size() != S)
        throw InvalidArgument("option tables do not match the state space");
    bool any = false;
    for (std::uint8_t b : initiation) any = any || b;
    if (!any) throw InvalidArgument("option has an empty initiation set");
    for (int a : intra_policy)
        if (a < 0 || a >= mdp.n_actions)
            throw InvalidArgument("intra-option policy selects an invalid action");
    for (double b : termination)
        if (!(b >= 0.0 && b <= 1.0))
            throw InvalidArgument("termination probabilities must lie in [0,1]");
}

Dataset::Dataset(int n_states, int n_options)
    : n_states_(n_states), n_options_(n_options),
      counts_(static_cast<std::size_t>(n_states) * n_options, 0) {}

Dataset::Dataset(Dataset&& other) noexcept
    : n_states_(other.n_states_), n_options_(other.n_options_) {
    std::lock_guard<std::mutex> lock(other.mu_);
    rows_ = std::move(other.rows_);
    counts_ = std::move(other.counts_);
}

Dataset& Dataset::operator=(Dataset&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        n_states_ = other.n_states_;
        n_options_ = other.n_options_;
        rows_ = std::move(other.rows_);
        counts_ = std::move(other.counts_);
    }
    return *this;
}

void Dataset::append(const OptionTransition& t) {
    std::lock_guard<std::mutex> lock(mu_);
    rows_.push_back(t);
    counts_[static_cast<std::size_t>(t.start_state) * n_options_ + t.option_id] += 1;
}

std::size_t Dataset::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return rows_.size();
}

OptionTransition Dataset::at(std::size_t i) const {
    std::lock_guard<std::mutex> lock(mu_);
    return rows_.at(i);
}

int Dataset::visits(int state, int option) const {
    std::lock_guard<std::mutex> lock(mu_);
    return counts_[static_cast<std::size_t>(state) * n_options_ + option];
}

void Dataset::save(std::ostream& out) const {
    std::lock_guard<std::mutex> lock(mu_);
    out << "start_state,option_id,duration,end_state,reward,discounted_reward,truncated\n";
    out.precision(17);
    for (const auto& t : rows_) {
        out << t.start_state << ',' << t.option_id << ',' << t.duration << ','
            << t.end_state << ',' << t.reward << ',' << t.discounted_reward << ','
            << (t.truncated ? 1 : 0) << '\n';
    }
}

Dataset Dataset::load(std::istream& in, int n_states, int n_options) {
    Dataset d(n_states, n_options);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("empty dataset file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        OptionTransition t;
        char c;
        int trunc;
        if (!(row >> t.start_state >> c >> t.option_id >> c >> t.duration >> c >>
              t.end_state >> c >> t.reward >> c >> t.discounted_reward >> c >> trunc))
            throw InvalidArgument("malformed dataset row: " + line);
        t.truncated = trunc != 0;
        d.append(t);
    }
    return d;
}

namespace {

using taxi::kGrid;
using taxi::kNumActions;
using taxi::kNumStates;

// Movement-only shortest-path policy toward a goal cell, wall-aware. Solved
// once per cell on the 25-state navigation MDP (goal absorbing, -1 per move).
std::vector<int> navigation_policy(int goal_row, int goal_col) {
    const auto& lay = taxi::layout();
    TabularMdp nav = TabularMdp::zeros(kGrid * kGrid, 4, 0.99);
    for (int row = 0; row < kGrid; ++row) {
        for (int col = 0; col < kGrid; ++col) {
            int cell = row * kGrid + col;
            if (row == goal_row && col == goal_col) {
                nav.terminal[cell] = 1;
                for (int a = 0; a < 4; ++a) nav.p(cell, a, cell) = 1.0;
                continue;
            }
            for (int a = 0; a < 4; ++a) {
                int nr = row, nc = col;
                if (a == taxi::kSouth && row + 1 < kGrid) nr = row + 1;
                if (a == taxi::kNorth && row - 1 >= 0) nr = row - 1;
                if (a == taxi::kEast && col + 1 < kGrid && !lay.blocked(row, col, col + 1))
                    nc = col + 1;
                if (a == taxi::kWest && col - 1 >= 0 && !lay.blocked(row, col, col - 1))
                    nc = col - 1;
                nav.p(cell, a, nr * kGrid + nc) = 1.0;
                nav.r(cell, a) = -1.0;
            }
        }
    }
    auto result = value_iteration(nav, 1e-10, 10000);
    return greedy_policy(result.q).choice;
}

}  // namespace

int taxi_goto_option(int row, int col) { return row * kGrid + col; }
int taxi_pickup_option(int row, int col) { return 25 + row * kGrid + col; }
int taxi_drop_option(int row, int col) { return 50 + row * kGrid + col; }

OptionSet pretrain_taxi_options(const TabularMdp& mdp) {
    if (mdp.n_states != kNumStates || mdp.n_actions != kNumActions)
        throw InvalidArgument("expected the 500-state, 6-action taxi MDP");
    OptionSet set;
    set.options.resize(75);

    std::vector<std::vector<int>> nav(kGrid * kGrid);
    for (int cell = 0; cell < kGrid * kGrid; ++cell)
        nav[cell] = navigation_policy(cell / kGrid, cell % kGrid);

    for (int target = 0; target < kGrid * kGrid; ++target) {
        const int trow = target / kGrid, tcol = target % kGrid;
        for (int kind = 0; kind < 3; ++kind) {  // 0 go-to, 1 pickup, 2 drop
            Option opt;
            opt.id = kind * 25 + target;
            opt.initiation.assign(kNumStates, 1);
            opt.intra_policy.assign(kNumStates, 0);
            opt.termination.assign(kNumStates, 0.0);
            for (int s = 0; s < kNumStates; ++s) {
                taxi::TaxiState ts = taxi::decode_state(s);
                bool at_target = ts.row == trow && ts.col == tcol;
                int nav_action = nav[target][ts.row * kGrid + ts.col];
                switch (kind) {
                    case 0:
                        opt.intra_policy[s] = nav_action;
                        opt.termination[s] = at_target ? 1.0 : 0.0;
                        break;
                    case 1:
                        opt.intra_policy[s] = at_target ? taxi::kPickup : nav_action;
                        opt.termination[s] =
                            ts.passenger_location == taxi::kInTaxi ? 1.0 : 0.0;
                        break;
                    case 2:
                        opt.intra_policy[s] = at_target ? taxi::kDropoff : nav_action;
                        opt.termination[s] =
                            ts.passenger_location != taxi::kInTaxi ? 1.0 : 0.0;
                        break;
                }
            }
            opt.validate(mdp);
            set.options[opt.id] = std::move(opt);
        }
    }
    return set;
}

OptionTransition execute_option(const TabularMdp& mdp, int start, const Option& option,
                                int t_max, Rng& rng) {
    if (!option.can_start(start))
        throw InvalidArgument("option " + std::to_string(option.id) +
                              " cannot start in state " + std::to_string(start));
    if (mdp.is_terminal(start))
        throw InvalidArgument("cannot start an option in a terminal state");
    if (t_max <= 0) throw InvalidArgument("t_max must be positive");

    OptionTransition t;
    t.start_state = start;
    t.option_id = option.id;
    int s = start;
    double discount_pow = 1.0;
    for (int step = 1; step <= t_max; ++step) {
        int a = option.intra_policy[s];
        // Sample the tabular dynamics (deterministic MDPs have a unit atom).
        double u = uniform01(rng);
        int s2 = mdp.n_states - 1;
        double acc = 0.0;
        for (int cand = 0; cand < mdp.n_states; ++cand) {
            acc += mdp.p(s, a, cand);
            if (u < acc) {
                s2 = cand;
                break;
            }
        }
        double r = mdp.r(s, a);
        t.reward += r;
        t.discounted_reward += discount_pow * r;
        discount_pow *= mdp.discount;
        t.duration = step;
        t.end_state = s2;
        s = s2;
        if (mdp.is_terminal(s2)) return t;                       // episode over
        if (bernoulli(rng, option.termination[s2])) return t;    // beta fired
    }
    t.truncated = true;
    return t;
}

void collect_transitions_into(const TabularMdp& mdp, const OptionSet& options,
                              const OptionSelector& selector,
                              const std::function<int(Rng&)>& initial_state, int n,
                              int t_max, Rng& rng, Dataset& dataset) {
    if (n < 0) throw InvalidArgument("n must be nonnegative");
    int produced = 0;
    int s = -1;
    while (produced < n) {
        if (s < 0 || mdp.is_terminal(s)) s = initial_state(rng);
        std::vector<int> menu = selector(s);
        if (menu.empty())
            throw InvalidArgument("option selector returned no options for state " +
                                  std::to_string(s));
        int o = menu[uniform_int(rng, static_cast<int>(menu.size()))];
        OptionTransition t = execute_option(mdp, s, options[o], t_max, rng);
        dataset.append(t);
        ++produced;
        s = t.end_state;
    }
}

Dataset collect_transitions(const TabularMdp& mdp, const OptionSet& options,
                            const OptionSelector& selector,
                            const std::function<int(Rng&)>& initial_state, int n,
                            int t_max, Rng& rng) {
    Dataset d(mdp.n_states, options.size());
    collect_transitions_into(mdp, options, selector, initial_state, n, t_max, rng, d);
    return d;
}

}  // namespace affopt
