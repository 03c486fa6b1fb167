#ifndef MISSMARPLE_TRAINER_HPP
#define MISSMARPLE_TRAINER_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "missmarple/model.hpp"
#include "missmarple/optimizer.hpp"
#include "missmarple/patches.hpp"
#include "missmarple/weights.hpp"

namespace mm {

struct Hyper {
    int epochs = 30;      // hard protocol cap
    int batch_size = 32;
    float lr = 1e-4f;
    float rho = 0.9f;
    float eps = 1e-7f;
    int patience = 5;     // early stop on stalled validation loss

    void validate() const;
    KvFile to_kv() const;
    static Hyper from_kv(const KvFile& kv);
};

// Stops once validation loss has failed to improve for `patience`
// consecutive epochs.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    // Feed each epoch's validation loss; true means stop after this epoch.
    bool update(double val_loss);

private:
    int patience_;
    int stale_ = 0;
    bool seen_ = false;
    double best_ = 0.0;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
    double seconds = 0.0;
};

// One seeded restart.
struct TrainRun {
    int iteration = 0;  // 1-based
    uint64_t seed = 0;
    std::vector<EpochStats> history;
    bool stopped_early = false;
    bool aborted = false;
    std::string abort_reason;
    // Best epoch by validation accuracy (earliest on ties).
    int best_epoch = 0;  // 1-based; 0 when no epoch completed
    double best_val_acc = 0.0, best_val_loss = 0.0;
    double best_train_acc = 0.0, best_train_loss = 0.0;
    WeightStore best_weights;  // snapshot at the best epoch
    double seconds = 0.0;
};

struct TrialSummary {
    std::string model_name;
    std::vector<TrainRun> runs;  // weights retained only on the best run
    int best_iteration = 0;      // 1-based; 0 when every run aborted
    double avg_train_acc = 0.0, avg_train_loss = 0.0;
    double avg_val_acc = 0.0, avg_val_loss = 0.0;
    double seconds = 0.0;

    const TrainRun& best_run() const;
};

using ModelFactory = std::function<BuiltModel(Rng&)>;

// Mean loss/accuracy of a split in inference mode.
std::pair<double, double> evaluate_split(Network& net, const std::vector<PatchSample>& samples,
                                         int patch_size, int batch_size);

// Fresh initialization + up to hyper.epochs of training under one seed.
// A non-finite loss aborts the run (recorded in the result, not thrown).
TrainRun run_iteration(const ModelFactory& factory, const PatchCorpus& corpus,
                       const Hyper& hyper, int iteration, uint64_t seed,
                       std::ostream* log = nullptr);

// Argmax of best_val_acc over completed runs, earliest on ties; 0 if none.
int select_best_iteration(const std::vector<TrainRun>& runs);

// Seeds 1..n_iterations; averages are arithmetic means of per-run bests.
TrialSummary run_trial(const ModelFactory& factory, const PatchCorpus& corpus,
                       const Hyper& hyper, int n_iterations, std::ostream* log = nullptr);

// Exports "<layer_name>/kernel" from the trial's best weights.
WeightStore select_donor(const TrialSummary& trial, const std::string& layer_name);

// Column-aligned rows (one per trial) plus a key-value section. Wall times
// print as "-" unless with_timing is set, keeping reports byte-stable.
// With exactly two trials a comparison line reports which validated higher.
std::string render_trial_report(const std::vector<TrialSummary>& trials, bool with_timing);

} // namespace mm

#endif
