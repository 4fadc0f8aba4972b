#include "affopt/taxi.hpp"

#include <algorithm>
#include <cstdlib>

namespace affopt {
namespace taxi {

bool TaxiLayout::blocked(int row, int col_from, int col_to) const {
    int left = std::min(col_from, col_to);
    if (std::abs(col_from - col_to) != 1) return false;
    for (const auto& [wr, wc] : walls)
        if (wr == row && wc == left) return true;
    return false;
}

int TaxiLayout::depot_at(int row, int col) const {
    for (int d = 0; d < kNumDepots; ++d)
        if (depots[d].first == row && depots[d].second == col) return d;
    return -1;
}

const TaxiLayout& layout() {
    static const TaxiLayout instance;
    return instance;
}

std::string layout_ascii() {
    return "+---------+\n"
           "|R: | : :G|\n"
           "| : | : : |\n"
           "| : : : : |\n"
           "| | : | : |\n"
           "|Y| : |B: |\n"
           "+---------+\n";
}

int encode_state(const TaxiState& s) {
    if (s.row < 0 || s.row >= kGrid || s.col < 0 || s.col >= kGrid ||
        s.passenger_location < 0 || s.passenger_location > kInTaxi ||
        s.destination < 0 || s.destination >= kNumDepots)
        throw InvalidArgument("taxi state component out of range");
    return ((s.row * kGrid + s.col) * (kNumDepots + 1) + s.passenger_location) *
               kNumDepots +
           s.destination;
}

TaxiState decode_state(int index) {
    if (index < 0 || index >= kNumStates)
        throw InvalidArgument("taxi state index out of range");
    TaxiState s;
    s.destination = index % kNumDepots;
    index /= kNumDepots;
    s.passenger_location = index % (kNumDepots + 1);
    index /= (kNumDepots + 1);
    s.col = index % kGrid;
    s.row = index / kGrid;
    return s;
}

namespace {

bool delivered(const TaxiState& s) {
    return s.passenger_location == s.destination;
}

StepResult apply(const TaxiState& cur, int action) {
    const TaxiLayout& lay = layout();
    TaxiState next = cur;
    double reward = -1.0;
    bool done = false;
    switch (action) {
        case kSouth:
            if (cur.row + 1 < kGrid) next.row = cur.row + 1;
            break;
        case kNorth:
            if (cur.row - 1 >= 0) next.row = cur.row - 1;
            break;
        case kEast:
            if (cur.col + 1 < kGrid && !lay.blocked(cur.row, cur.col, cur.col + 1))
                next.col = cur.col + 1;
            break;
        case kWest:
            if (cur.col - 1 >= 0 && !lay.blocked(cur.row, cur.col, cur.col - 1))
                next.col = cur.col - 1;
            break;
        case kPickup: {
            int d = lay.depot_at(cur.row, cur.col);
            if (cur.passenger_location < kInTaxi && d == cur.passenger_location)
                next.passenger_location = kInTaxi;
            else
                reward = -10.0;
            break;
        }
        case kDropoff: {
            int d = lay.depot_at(cur.row, cur.col);
            if (cur.passenger_location == kInTaxi && d == cur.destination) {
                next.passenger_location = cur.destination;
                reward = 20.0;
                done = true;
            } else if (cur.passenger_location == kInTaxi && d >= 0) {
                next.passenger_location = d;  // relocate, regular step cost
            } else {
                reward = -10.0;
            }
            break;
        }
        default:
            throw InvalidArgument("taxi action out of range");
    }
    return {encode_state(next), reward, done};
}

}  // namespace

StepResult step(int state, int action) {
    TaxiState cur = decode_state(state);
    if (delivered(cur))
        throw InvalidArgument("cannot step a terminal taxi state");
    return apply(cur, action);
}

StepResult step(int state, int action, Rng& /*rng*/) { return step(state, action); }

TabularMdp build_taxi_mdp(double discount) {
    TabularMdp mdp = TabularMdp::zeros(kNumStates, kNumActions, discount);
    for (int s = 0; s < kNumStates; ++s) {
        TaxiState cur = decode_state(s);
        if (delivered(cur)) {
            mdp.terminal[s] = 1;
            for (int a = 0; a < kNumActions; ++a) mdp.p(s, a, s) = 1.0;
            continue;
        }
        for (int a = 0; a < kNumActions; ++a) {
            StepResult res = apply(cur, a);
            mdp.p(s, a, res.next_state) = 1.0;
            mdp.r(s, a) = res.reward;
        }
    }
    mdp.validate();
    return mdp;
}

const std::vector<int>& initial_states() {
    static const std::vector<int> states = [] {
        std::vector<int> out;
        for (int row = 0; row < kGrid; ++row)
            for (int col = 0; col < kGrid; ++col)
                for (int pass = 0; pass < kNumDepots; ++pass)
                    for (int dest = 0; dest < kNumDepots; ++dest)
                        if (pass != dest)
                            out.push_back(encode_state({row, col, pass, dest}));
        return out;
    }();
    return states;
}

int sample_initial_state(Rng& rng) {
    const auto& states = initial_states();
    return states[uniform_int(rng, static_cast<int>(states.size()))];
}

}  // namespace taxi
}  // namespace affopt
