#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "affopt/learned_model.hpp"
#include "affopt/option_models.hpp"
#include "affopt/options.hpp"

namespace affopt {

/// Intended outcome of an option: either a target sub-probability over end
/// states per start state (multi-time form) or a boolean completion
/// predicate evaluated on logged transitions.
struct Intent {
    enum class Form : std::uint8_t { kTerminalDistribution, kCompletionPredicate };

    int option_id = -1;  // -1 when the intent applies to several options
    Form form = Form::kTerminalDistribution;
    std::string label;

    // kTerminalDistribution: sparse target rows indexed by start state.
    std::vector<std::vector<std::pair<int, double>>> target;

    // kCompletionPredicate: index into the taxi predicate table below.
    int predicate = -1;
};

/// The eight taxi intents: passenger riding while the taxi is at depot d
/// (pickup-at-d), and passenger delivered to depot d by a transition that
/// started with the passenger aboard (dropped-at-d).
enum class TaxiIntentKind : int {
    kPickupAtR = 0,
    kPickupAtG = 1,
    kPickupAtY = 2,
    kPickupAtB = 3,
    kDroppedAtR = 4,
    kDroppedAtG = 5,
    kDroppedAtY = 6,
    kDroppedAtB = 7,
};

/// Alternative reading for the pickup family: require the taxi at the
/// episode's destination depot instead of the intent's fixed depot.
enum class PickupIntentVariant { kAtDepot, kAtDestination };

std::vector<Intent> taxi_intents();

bool intent_completion(const OptionTransition& transition, const Intent& intent,
                       PickupIntentVariant variant = PickupIntentVariant::kAtDepot);

/// Degree of satisfaction: total variation between the intent's target row
/// and the model's termination row, both in sub-probability form.
double intent_satisfaction_zeta(const OptionModel& model, const Intent& intent, int s,
                                int o);

/// Which (state, option) pairs may enter data collection and planning.
struct AffordanceSet {
    int n_states = 0;
    int n_options = 0;
    std::vector<std::uint8_t> member;  // [s * n_options + o]
    std::string provenance;
    std::vector<int> repaired_states;  // liveness repairs applied at build time

    static AffordanceSet none(int n_states, int n_options, std::string provenance);

    bool contains(int s, int o) const {
        return member[static_cast<std::size_t>(s) * n_options + o] != 0;
    }
    void set(int s, int o, bool value) {
        member[static_cast<std::size_t>(s) * n_options + o] = value ? 1 : 0;
    }
    std::size_t count() const;
    std::vector<int> options_at(int s) const;
    /// True when `other` contains every pair of this set.
    bool subset_of(const AffordanceSet& other) const;

    /// Sorted (state, option) pairs under a provenance header.
    void save(std::ostream& out) const;
    static AffordanceSet load(std::istream& in);
};

/// Throws LivenessError when some non-terminal state has an empty menu.
void check_liveness(const AffordanceSet& set, const std::vector<std::uint8_t>& terminal);

/// Membership by thresholding the degree of satisfaction: (s,o) is afforded
/// iff zeta_{s,o} <= threshold. Intents are given per option (index = option
/// id). States whose menu would be empty get their lowest-zeta option back
/// (recorded in repaired_states); the repair is threshold-independent, so
/// nesting across thresholds is preserved exactly.
AffordanceSet derive_affordances(const std::vector<Intent>& intents,
                                 const OptionModel& models, double zeta_threshold);

enum class TaxiAffordanceKind { kEverything, kPickupDrop, kPickupDropAtGoal };

/// The three hand-built taxi sets: all 75 options everywhere (37,500 pairs),
/// the 50 pickup/drop options everywhere (25,000), or the 8 depot-targeted
/// pickup/drop options everywhere (4,000).
AffordanceSet taxi_heuristic_affordances(TaxiAffordanceKind kind);

/// Linear scores over one-hot (state, option, intent) features plus a shared
/// end-state term, squashed by a sigmoid whose input is shifted by +2 so a
/// fresh classifier outputs 1/(1+e^-2) everywhere.
struct AffordanceClassifier {
    int n_states = 0;
    int n_options = 0;
    int n_intents = 0;
    std::vector<double> theta;       // [s * n_options * n_intents + o * n_intents + i]
    std::vector<double> end_weight;  // [end state]
    long update_count = 0;

    static AffordanceClassifier init(int n_states, int n_options, int n_intents);

    std::size_t idx(int s, int o, int i) const {
        return (static_cast<std::size_t>(s) * n_options + o) * n_intents + i;
    }
    double score(int s, int o, int end, int intent) const;
    double max_score(int s, int o, int end) const;
};

struct ClassifierTrainOptions {
    double learning_rate = 0.05;
    long steps = 1;
    PickupIntentVariant pickup_variant = PickupIntentVariant::kAtDepot;
};

/// Binary cross-entropy per intent against the completion labels, summed over
/// the dataset; one step applies the exact full-batch gradient. Halts with a
/// diagnostic on non-finite loss.
void train_affordance_classifier(AffordanceClassifier& classifier,
                                 const Dataset& dataset,
                                 const std::vector<Intent>& intents,
                                 const ClassifierTrainOptions& opts);

enum class ClassifierSetMode { kArgmaxEnd, kWeightedEnds };

/// (s,o) is afforded iff max_I A(s,o,s',I) > k, with s' the model's most
/// likely end state (kArgmaxEnd) or the score averaged under the model's
/// end-state distribution (kWeightedEnds). Pairs whose model entry is missing
/// are scored at the fresh-classifier end weight of 0. Liveness is repaired
/// with the highest-scoring option, independent of k, so sweeps nest exactly.
AffordanceSet classifier_affordance_set(const AffordanceClassifier& classifier,
                                        const LearnedModel& model, double k,
                                        const std::vector<std::uint8_t>& terminal,
                                        ClassifierSetMode mode =
                                            ClassifierSetMode::kArgmaxEnd);

}  // namespace affopt
