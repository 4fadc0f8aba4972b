#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "affopt/option_models.hpp"
#include "affopt/options.hpp"
#include "affopt/rng.hpp"

namespace affopt {

/// Tabular linear model over one-hot (state, option) features: per-pair
/// next-state logits normalized by softmax, a scalar duration head and a
/// scalar reward head — the three predictors of the masked objective.
///
/// Logit rows are stored compressed: ends that have never been observed or
/// touched individually all share one `rest` logit. Gradient descent keeps
/// that group exactly equal (their gradients coincide), so the compressed
/// update reproduces dense gradient descent bit for bit at O(support) cost.
struct LearnedModel {
    struct LogitRow {
        std::vector<std::pair<int, double>> atoms;  // (end, logit), sorted by end
        double rest = 0.0;                          // shared logit of all other ends
    };

    int n_states = 0;
    int n_options = 0;
    double learning_rate = 0.0;
    double reward_init = 0.0;
    long update_count = 0;
    long clamp_count = 0;  // next-state probabilities clamped at the 1e-12 floor

    std::vector<LogitRow> logit_rows;  // [pair]
    std::vector<double> duration;      // [pair], init 1 (durations are >= 1)
    std::vector<double> reward;        // [pair], init reward_init
    std::vector<long> pair_updates;    // gradient steps that touched the pair

    /// reward_init < 0 keeps certainty-equivalence plans away from pairs the
    /// data never covered; 0 matches a plain zero-initialized linear model.
    static LearnedModel init(int n_states, int n_options, double learning_rate,
                             double reward_init = 0.0);

    std::size_t pair(int s, int o) const {
        return static_cast<std::size_t>(s) * n_options + o;
    }
    double logit(int s, int o, int end) const;
    /// Direct logit write; splits `end` out of the shared group if needed.
    void set_logit(int s, int o, int end, double value);
    double prob(int s, int o, int end) const;
    std::vector<double> next_state_distribution(int s, int o) const;
    double duration_at(int s, int o) const { return duration[pair(s, o)]; }
    double reward_at(int s, int o) const { return reward[pair(s, o)]; }

    /// Versioned flat checkpoint (text).
    void save(std::ostream& out) const;
    static LearnedModel load(std::istream& in);
};

/// Per-transition mask weight A(s, o, s'); 0 drops the transition entirely.
using TransitionMask = std::function<double(const OptionTransition&)>;

/// The three-term masked objective summed over a batch:
///   sum_i A_i [ -log P(end_i | s_i, o_i) + (L(s_i,o_i) - T_i)^2
///               + (r(s_i,o_i) - reward_i)^2 ]
/// Probabilities are clamped at 1e-12 before the log; clamps are counted on
/// the model. The reward target is the undiscounted cumulative reward of the
/// transition, matching what the data tuples log.
double masked_loss(LearnedModel& model, const std::vector<OptionTransition>& batch,
                   const TransitionMask& mask);

/// Analytic gradient of masked_loss for every logical parameter the batch
/// touches; mirrors masked_loss exactly and is checked against central
/// finite differences in the tests.
struct MaskedLossGradient {
    struct PairGrad {
        std::size_t pair;
        std::vector<std::pair<int, double>> logit;  // per observed end
        double rest_logit;  // shared gradient of each unobserved end's logit
        double duration;
        double reward;
    };
    std::vector<PairGrad> pairs;
};
MaskedLossGradient masked_loss_gradient(const LearnedModel& model,
                                        const std::vector<OptionTransition>& batch,
                                        const TransitionMask& mask);

/// Per-pair sufficient statistics of the masked objective over a sample set.
/// They determine the exact full-batch gradient and loss, and can be grown
/// incrementally as transitions arrive.
class BatchStats {
  public:
    struct Entry {
        std::vector<std::pair<int, double>> end_weight;  // sorted by end
        double w_model = 0.0;  // weight entering the nll and reward terms
        double wr = 0.0, wr2 = 0.0;
        double w_dur = 0.0;  // weight entering the duration term
        double wt = 0.0, wt2 = 0.0;
    };

    BatchStats(int n_states, int n_options);

    /// Adds one transition with mask weight a (a == 0 is a no-op).
    void add(const OptionTransition& t, double a, bool duration_only_when_truncated);
    void clear();

    const std::vector<std::size_t>& touched() const { return touched_; }
    const Entry& entry(std::size_t pair) const { return entries_[pair]; }
    double total_weight() const { return total_weight_; }

  private:
    int n_options_;
    std::vector<Entry> entries_;
    std::vector<std::size_t> touched_;
    double total_weight_ = 0.0;
};

/// One exact gradient step of the summed masked objective captured by the
/// stats. Returns the mean per-transition loss evaluated before the step.
double apply_masked_gradient_step(LearnedModel& model, const BatchStats& stats,
                                  double learning_rate);

struct TrainOptions {
    double learning_rate = 1e-4;  // default sweep value; 1e-3 is the other
    long steps = 1000;
    // Minibatch size; 0 uses the whole dataset each step, making one step an
    // exact gradient step on the summed objective.
    int batch_size = 0;
    // Truncated transitions carry no end-state or reward information, only a
    // duration capped at t_max; when set they contribute the duration term
    // only, mirroring the empirical estimator's treatment.
    bool duration_only_when_truncated = true;
    // A step whose mean per-transition batch loss exceeds this (or goes
    // non-finite) halts the run as diverged.
    double divergence_threshold = 1e6;
};

struct TrainResult {
    bool diverged = false;
    long halted_at_step = -1;
    double last_loss = 0.0;  // mean per-transition loss of the last step
};

/// Gradient descent on the masked objective over minibatches drawn from the
/// dataset (or the full dataset when batch_size is 0). Masked transitions
/// contribute exactly zero gradient. Divergence is reported, not thrown, so
/// harness runs can record the event.
TrainResult train_partial_model(LearnedModel& model, const Dataset& dataset,
                                const TransitionMask& mask, const TrainOptions& opts,
                                Rng& rng);

/// Fresh model + training in one call.
LearnedModel train_partial_model(const Dataset& dataset, const TransitionMask& mask,
                                 int n_states, int n_options, const TrainOptions& opts,
                                 Rng& rng, TrainResult* result = nullptr);

/// Planning adapter: termination distribution gamma^max(L,1) * softmax(row),
/// reward head as the option reward. The duration head supplies the discount
/// because the model predicts an undiscounted end-state distribution.
struct LearnedPlanModel {
    const LearnedModel* model = nullptr;
    double gamma = 0.0;
    std::vector<std::uint8_t> terminal;  // per state; may be empty

    int n_states() const { return model->n_states; }
    int n_options() const { return model->n_options; }
    bool defined(int, int) const { return true; }
    bool is_terminal_state(int s) const { return !terminal.empty() && terminal[s]; }
    double reward_at(int s, int o) const { return model->reward_at(s, o); }
    /// <gamma^max(L,1) softmax(row), v>, computed in O(atoms) given sum(v).
    double expected_value(int s, int o, const std::vector<double>& v,
                          double v_sum) const;
};

}  // namespace affopt
