#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affopt/bounds.hpp"
#include "affopt/intents.hpp"
#include "affopt/learned_model.hpp"
#include "affopt/planner.hpp"

namespace affopt {

enum class RunMode { kSequential, kConcurrent };

/// Collect / train / evaluate pipeline settings. Affordance sets are named:
/// "everything", "pickup-drop", "pickup-drop-at-goal", or "classifier" (the
/// thresholded learned set, train side only).
struct ExperimentConfig {
    std::string environment = "taxi";
    std::string train_affordances = "everything";  // collection + loss mask
    std::string plan_affordances = "everything";
    double learning_rate = 1e-4;
    double classifier_learning_rate = 0.05;
    long max_transitions = 600000;       // per-seed environment budget
    int collect_per_round = 500;
    int updates_per_round = 25;          // full-batch gradient steps per round
    int eval_cadence_updates = 500;      // evaluate every this many updates
    int episodes_per_eval = 1000;
    int eval_cap = 200;                  // primitive steps per evaluation episode
    int t_max = 100;                     // option execution cutoff
    double gamma = 0.99;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    bool classifier_enabled = false;
    double classifier_threshold = 0.5;   // k, when the classifier is enabled
    std::vector<double> k_sweep{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    RunMode mode = RunMode::kSequential;
    int workers = 2;                     // rollout workers in concurrent mode
    long buffer_capacity = 2000000;      // backpressure bound on the dataset
    int planner_epochs = 120;
    double planner_tol = 1e-7;
    double stop_at_success = 0.95;       // 0 disables early stopping
    double reward_head_init = -100.0;    // pessimistic prior for unseen pairs
    PickupIntentVariant pickup_variant = PickupIntentVariant::kAtDepot;
    double divergence_threshold = 1e6;

    void validate() const;
};

struct ResultRow {
    std::uint64_t seed = 0;
    long env_transitions = 0;
    long learner_updates = 0;
    double success_rate = 0.0;
    long train_set_size = 0;
    long plan_set_size = 0;
    long learned_set_size = 0;  // 0 when the classifier is disabled
    long wall_ms = 0;
};

struct RunStatus {
    std::uint64_t seed = 0;
    bool failed = false;
    bool diverged = false;
    long halted_at_step = -1;
    std::string message;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<RunStatus> statuses;
};

/// Key=value configuration file with CLI-style overrides applied on top.
ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides);
ExperimentConfig config_from_overrides(
    const std::map<std::string, std::string>& overrides);

/// Rollout / trainer / evaluator pipeline over all configured seeds.
/// Sequential mode interleaves the three stages in rounds and is reproducible
/// per seed; concurrent mode runs them on separate threads communicating via
/// the dataset append channel and parameter snapshots.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// CSV with the pinned header.
void write_result_rows(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> read_result_rows(std::istream& in);
/// Determinism comparison; wall time is the one permitted difference.
bool rows_equal_ignoring_wall(const std::vector<ResultRow>& a,
                              const std::vector<ResultRow>& b);

/// First env_transitions value at which the seed's success rate reached the
/// threshold; nullopt when it never did.
std::optional<long> transitions_to_success(const std::vector<ResultRow>& rows,
                                           std::uint64_t seed, double threshold);

struct SweepPoint {
    double k = 0.0;
    long final_set_size = 0;
    std::optional<long> transitions_to_target;
    ExperimentResult result;
};

/// One experiment per threshold in config.k_sweep with the classifier
/// enabled; reports the final learned-set size per k alongside the runs.
std::vector<SweepPoint> run_learned_affordance_sweep(const ExperimentConfig& config,
                                                     double success_target = 0.9);

/// Everything the bound calculators produce for one configured instance.
struct BoundReport {
    DiscountSummary summary;
    double g_inf = 0.0;
    double zeta_p = 0.0;
    double zeta_r = 0.0;
    int n_states = 0;
    double gamma = 0.0;
    long n_samples = 0;
    double af_size = 0.0;
    double log_pi_size = 0.0;
    double delta = 0.0;
    double theorem1 = 0.0;
    double corollary1 = 0.0;
    double theorem2 = 0.0;
    double corollary3 = 0.0;
    double epsilon = 0.0;
    bool theorem3_feasible = false;
    double theorem3_epsilon_floor = 0.0;
    SampleComplexity theorem3;
    SampleComplexity theorem4;
};

/// Report for the taxi instance with exact-model intents (all zetas zero) or
/// for a random instance at the given zeta.
BoundReport taxi_bound_report(double gamma, long n_samples, double delta,
                              double epsilon);
BoundReport instance_bound_report(const SmdpInstance& instance, double zeta,
                                  long n_samples, double delta, double epsilon,
                                  Rng& rng);

/// One key: value per line with section headers.
void render_bound_report(const BoundReport& report, std::ostream& out);
/// Machine-readable variant (JSON).
void render_bound_report_json(const BoundReport& report, std::ostream& out);
void render_certification_report(const CertificationReport& report, std::ostream& out);

}  // namespace affopt
