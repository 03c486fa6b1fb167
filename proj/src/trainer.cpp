#include "missmarple/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <sstream>

#include "missmarple/error.hpp"

namespace mm {

namespace {

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

} // namespace

void Hyper::validate() const {
    if (epochs < 1 || epochs > 30)
        throw validation_error("hyper: epochs must be in [1,30], got " + std::to_string(epochs));
    if (batch_size < 1) throw validation_error("hyper: batch size must be >= 1");
    if (!(lr > 0.0f)) throw validation_error("hyper: learning rate must be > 0");
    if (!(rho > 0.0f && rho < 1.0f)) throw validation_error("hyper: rho must be in (0,1)");
    if (!(eps > 0.0f)) throw validation_error("hyper: eps must be > 0");
    if (patience < 1) throw validation_error("hyper: patience must be >= 1");
}

KvFile Hyper::to_kv() const {
    KvFile kv;
    kv.set_int("epochs", epochs);
    kv.set_int("batch_size", batch_size);
    kv.set_float("learning_rate", lr);
    kv.set_float("rmsprop_rho", rho);
    kv.set_float("rmsprop_eps", eps);
    kv.set_int("patience", patience);
    return kv;
}

Hyper Hyper::from_kv(const KvFile& kv) {
    Hyper h;
    h.epochs = static_cast<int>(kv.get_int("epochs", h.epochs));
    h.batch_size = static_cast<int>(kv.get_int("batch_size", h.batch_size));
    h.lr = static_cast<float>(kv.get_float("learning_rate", h.lr));
    h.rho = static_cast<float>(kv.get_float("rmsprop_rho", h.rho));
    h.eps = static_cast<float>(kv.get_float("rmsprop_eps", h.eps));
    h.patience = static_cast<int>(kv.get_int("patience", h.patience));
    h.validate();
    return h;
}

bool EarlyStopper::update(double val_loss) {
    if (!seen_ || val_loss < best_) {
        best_ = val_loss;
        seen_ = true;
        stale_ = 0;
        return false;
    }
    ++stale_;
    return stale_ >= patience_;
}

const TrainRun& TrialSummary::best_run() const {
    for (const auto& r : runs)
        if (r.iteration == best_iteration) return r;
    throw runtime_error("trial has no completed run");
}

std::pair<double, double> evaluate_split(Network& net, const std::vector<PatchSample>& samples,
                                         int patch_size, int batch_size) {
    if (samples.empty()) throw validation_error("cannot evaluate an empty split");
    double loss_sum = 0.0;
    size_t hits = 0;
    Tensor batch;
    std::vector<float> labels;
    std::vector<size_t> indices;
    for (size_t start = 0; start < samples.size(); start += static_cast<size_t>(batch_size)) {
        size_t count = std::min(static_cast<size_t>(batch_size), samples.size() - start);
        indices.resize(count);
        std::iota(indices.begin(), indices.end(), start);
        make_batch(samples, indices, patch_size, batch, labels);
        Tensor probs = net.forward(batch, /*training=*/false, nullptr);
        loss_sum += bce_loss(probs, labels) * static_cast<double>(count);
        for (size_t i = 0; i < count; ++i) {
            bool fake = probs[i] > 0.5f;
            if (fake == (labels[i] > 0.5f)) ++hits;
        }
    }
    return {loss_sum / static_cast<double>(samples.size()),
            static_cast<double>(hits) / static_cast<double>(samples.size())};
}

TrainRun run_iteration(const ModelFactory& factory, const PatchCorpus& corpus,
                       const Hyper& hyper, int iteration, uint64_t seed, std::ostream* log) {
    hyper.validate();
    if (corpus.train.empty() || corpus.val.empty())
        throw validation_error("corpus needs nonempty train and val splits");

    TrainRun run;
    run.iteration = iteration;
    run.seed = seed;
    const double t0 = now_seconds();

    Rng rng(seed, hash_str("iteration"));
    BuiltModel model = factory(rng);
    RmsProp opt(hyper.lr, hyper.rho, hyper.eps);
    EarlyStopper stopper(hyper.patience);

    std::vector<size_t> order(corpus.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<size_t> batch_indices;
    Tensor batch;
    std::vector<float> labels;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const double e0 = now_seconds();
        rng.shuffle(order);
        double loss_sum = 0.0, acc_sum = 0.0;
        try {
            for (size_t start = 0; start < order.size();
                 start += static_cast<size_t>(hyper.batch_size)) {
                size_t count = std::min(static_cast<size_t>(hyper.batch_size),
                                        order.size() - start);
                batch_indices.assign(order.begin() + static_cast<long>(start),
                                     order.begin() + static_cast<long>(start + count));
                make_batch(corpus.train, batch_indices, corpus.patch_size, batch, labels);
                StepResult step = train_step(model.net, opt, batch, labels, rng);
                loss_sum += step.loss * static_cast<double>(count);
                acc_sum += step.accuracy * static_cast<double>(count);
            }
        } catch (const Error& e) {
            run.aborted = true;
            run.abort_reason = e.what();
            break;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_acc = acc_sum / static_cast<double>(order.size());
        auto [val_loss, val_acc] =
            evaluate_split(model.net, corpus.val, corpus.patch_size, hyper.batch_size);
        stats.val_loss = val_loss;
        stats.val_acc = val_acc;
        stats.seconds = now_seconds() - e0;
        run.history.push_back(stats);

        if (run.best_epoch == 0 || val_acc > run.best_val_acc) {
            run.best_epoch = epoch;
            run.best_val_acc = val_acc;
            run.best_val_loss = val_loss;
            run.best_train_acc = stats.train_acc;
            run.best_train_loss = stats.train_loss;
            run.best_weights = WeightStore::from_network(model.net);
        }
        if (log)
            *log << "iteration=" << iteration << " epoch=" << epoch << " train_loss="
                 << format_float(stats.train_loss, 4) << " train_acc="
                 << format_float(stats.train_acc, 4) << " val_loss="
                 << format_float(stats.val_loss, 4) << " val_acc="
                 << format_float(stats.val_acc, 4) << " elapsed="
                 << format_float(stats.seconds, 2) << "s\n";
        if (stopper.update(val_loss)) {
            run.stopped_early = true;
            break;
        }
    }
    run.seconds = now_seconds() - t0;
    if (run.aborted && log)
        *log << "iteration=" << iteration << " aborted: " << run.abort_reason << "\n";
    return run;
}

int select_best_iteration(const std::vector<TrainRun>& runs) {
    int best = 0;
    double best_acc = 0.0;
    for (const auto& r : runs) {
        if (r.aborted || r.best_epoch == 0) continue;
        if (best == 0 || r.best_val_acc > best_acc) {
            best = r.iteration;
            best_acc = r.best_val_acc;
        }
    }
    return best;
}

TrialSummary run_trial(const ModelFactory& factory, const PatchCorpus& corpus,
                       const Hyper& hyper, int n_iterations, std::ostream* log) {
    if (n_iterations < 1) throw validation_error("a trial needs at least one iteration");
    TrialSummary trial;
    const double t0 = now_seconds();
    for (int i = 1; i <= n_iterations; ++i)
        trial.runs.push_back(
            run_iteration(factory, corpus, hyper, i, static_cast<uint64_t>(i), log));

    trial.best_iteration = select_best_iteration(trial.runs);
    if (trial.best_iteration == 0)
        throw runtime_error("every training iteration aborted");

    size_t completed = 0;
    for (auto& r : trial.runs) {
        if (r.aborted || r.best_epoch == 0) continue;
        ++completed;
        trial.avg_train_acc += r.best_train_acc;
        trial.avg_train_loss += r.best_train_loss;
        trial.avg_val_acc += r.best_val_acc;
        trial.avg_val_loss += r.best_val_loss;
        if (r.iteration != trial.best_iteration) r.best_weights = WeightStore();
    }
    trial.avg_train_acc /= static_cast<double>(completed);
    trial.avg_train_loss /= static_cast<double>(completed);
    trial.avg_val_acc /= static_cast<double>(completed);
    trial.avg_val_loss /= static_cast<double>(completed);
    trial.seconds = now_seconds() - t0;
    return trial;
}

WeightStore select_donor(const TrialSummary& trial, const std::string& layer_name) {
    const TrainRun& best = trial.best_run();
    const std::string kernel_name = layer_name + "/kernel";
    const Tensor* kernel = best.best_weights.find(kernel_name);
    if (!kernel)
        throw validation_error("trial weights have no layer '" + layer_name + "'");
    WeightStore donor;
    donor.put(kernel_name, *kernel);
    return donor;
}

std::string render_trial_report(const std::vector<TrialSummary>& trials, bool with_timing) {
    std::ostringstream os;
    os << "model      iters  avg-train-acc  avg-train-loss  avg-val-acc  avg-val-loss  "
          "best-iter  best-val-acc  wall-time\n";
    for (const auto& t : trials) {
        char row[256];
        std::snprintf(row, sizeof(row), "%-9s  %5zu  %13s  %14s  %11s  %12s  %9d  %12s  %s\n",
                      t.model_name.c_str(), t.runs.size(),
                      format_float(t.avg_train_acc, 4).c_str(),
                      format_float(t.avg_train_loss, 4).c_str(),
                      format_float(t.avg_val_acc, 4).c_str(),
                      format_float(t.avg_val_loss, 4).c_str(), t.best_iteration,
                      format_float(t.best_run().best_val_acc, 4).c_str(),
                      with_timing ? (format_float(t.seconds, 1) + "s").c_str() : "-");
        os << row;
    }
    if (trials.size() == 2) {
        const auto& a = trials[0];
        const auto& b = trials[1];
        os << "comparison: " << a.model_name << " avg val acc " << format_float(a.avg_val_acc, 4)
           << " vs " << b.model_name << " " << format_float(b.avg_val_acc, 4) << " -> ";
        if (a.avg_val_acc > b.avg_val_acc)
            os << a.model_name << " higher\n";
        else if (b.avg_val_acc > a.avg_val_acc)
            os << b.model_name << " higher\n";
        else
            os << "tied\n";
    }
    os << "[trials]\n";
    for (const auto& t : trials) {
        std::string p = t.model_name;
        os << p << ".iterations = " << t.runs.size() << "\n"
           << p << ".avg_train_acc = " << format_float(t.avg_train_acc, 6) << "\n"
           << p << ".avg_train_loss = " << format_float(t.avg_train_loss, 6) << "\n"
           << p << ".avg_val_acc = " << format_float(t.avg_val_acc, 6) << "\n"
           << p << ".avg_val_loss = " << format_float(t.avg_val_loss, 6) << "\n"
           << p << ".best_iteration = " << t.best_iteration << "\n"
           << p << ".best_val_acc = " << format_float(t.best_run().best_val_acc, 6) << "\n"
           << p << ".best_epoch = " << t.best_run().best_epoch << "\n";
    }
    return os.str();
}

} // namespace mm
