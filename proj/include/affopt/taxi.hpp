#pragma once

#include <array>
#include <string>
#include <vector>

#include "affopt/mdp.hpp"
#include "affopt/rng.hpp"

namespace affopt {

// 5x5 taxi gridworld with four depots. Layout, encoding, action order and
// reward semantics follow the standard toy-text implementation so that state
// indices interoperate with datasets produced elsewhere.

namespace taxi {

inline constexpr int kGrid = 5;
inline constexpr int kNumStates = 500;  // 25 cells * 5 passenger slots * 4 goals
inline constexpr int kNumActions = 6;
inline constexpr int kNumDepots = 4;
inline constexpr int kInTaxi = 4;  // passenger_location value for "riding"

// Action order: south, north, east, west, pickup, dropoff.
enum Action : int {
    kSouth = 0,
    kNorth = 1,
    kEast = 2,
    kWest = 3,
    kPickup = 4,
    kDropoff = 5,
};

struct TaxiState {
    int row = 0;                 // 0..4
    int col = 0;                 // 0..4
    int passenger_location = 0;  // 0..3 depot index, 4 = in taxi
    int destination = 0;         // 0..3 depot index

    bool operator==(const TaxiState&) const = default;
};

/// Depot coordinates and the wall set (pairs of horizontally adjacent cells
/// with no passage between them).
struct TaxiLayout {
    // Depot order R, G, Y, B.
    std::array<std::pair<int, int>, kNumDepots> depots{
        {{0, 0}, {0, 4}, {4, 0}, {4, 3}}};
    // Walls given as (row, left column); the wall blocks left|left+1.
    std::vector<std::pair<int, int>> walls{{0, 1}, {1, 1}, {3, 0}, {3, 2}, {4, 0}, {4, 2}};

    bool blocked(int row, int col_from, int col_to) const;
    int depot_at(int row, int col) const;  // depot index or -1
};

const TaxiLayout& layout();

/// The 7-line ASCII map of the grid, depots and walls.
std::string layout_ascii();

int encode_state(const TaxiState& s);
TaxiState decode_state(int index);

struct StepResult {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
};

/// One primitive step. The environment is deterministic; the generator
/// argument exists for interface uniformity with stochastic environments.
/// Stepping a terminal (passenger-delivered) state throws.
StepResult step(int state, int action, Rng& rng);
StepResult step(int state, int action);

/// Full 500-state, 6-action MDP. A successful dropoff moves to the absorbing
/// delivered state with reward +20; illegal pickup/dropoff costs -10 and
/// leaves the state unchanged; every other step costs -1.
TabularMdp build_taxi_mdp(double discount = 0.99);

/// States with the passenger waiting at a depot different from the goal and
/// the taxi anywhere: the uniform initial distribution draws from these.
const std::vector<int>& initial_states();
int sample_initial_state(Rng& rng);

}  // namespace taxi

}  // namespace affopt
