#include "missmarple/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "missmarple/cost.hpp"
#include "missmarple/error.hpp"
#include "missmarple/evaluator.hpp"
#include "missmarple/localizer.hpp"
#include "missmarple/model.hpp"
#include "missmarple/patches.hpp"
#include "missmarple/synth.hpp"
#include "missmarple/trainer.hpp"

namespace fs = std::filesystem;

namespace mm {

namespace {

constexpr const char* kVersion = "missmarple 1.0.0";

// Every report opens with a config echo so runs can be reproduced exactly.
std::string repro_header(const std::string& command, const KvFile& config) {
    std::ostringstream os;
    os << "# " << kVersion << "\n# command: " << command << "\n";
    for (const auto& e : config.entries()) os << "# config: " << e.first << " = " << e.second << "\n";
    return os.str();
}

void write_report(const std::string& path, const std::string& text) {
    if (path.empty()) return;
    std::ofstream os(path);
    if (!os) throw runtime_error("cannot open report for writing: " + path);
    os << text;
    if (!os) throw runtime_error("write failed: " + path);
}

// Flags > config file > built-in defaults: start from the file (when given),
// then overlay every flag the user actually passed.
ModelConfig model_config_from(const std::string& config_path) {
    ModelConfig config;
    if (!config_path.empty()) config = ModelConfig::from_kv(KvFile::load(config_path));
    return config;
}

Hyper hyper_from(const CLI::App& cmd, const std::string& config_path, int* iterations) {
    Hyper hyper;
    if (!config_path.empty()) {
        KvFile kv = KvFile::load(config_path);
        hyper = Hyper::from_kv(kv);
        if (iterations) *iterations = static_cast<int>(kv.get_int("iterations", *iterations));
    }
    auto overlay_int = [&cmd](const std::string& flag, int& target) {
        if (cmd.count(flag)) target = cmd.get_option(flag)->as<int>();
    };
    auto overlay_float = [&cmd](const std::string& flag, float& target) {
        if (cmd.count(flag)) target = cmd.get_option(flag)->as<float>();
    };
    overlay_int("--epochs", hyper.epochs);
    overlay_int("--batch", hyper.batch_size);
    overlay_float("--lr", hyper.lr);
    overlay_int("--patience", hyper.patience);
    if (iterations && cmd.count("--iterations"))
        *iterations = cmd.get_option("--iterations")->as<int>();
    hyper.validate();
    return hyper;
}

void add_hyper_flags(CLI::App* cmd) {
    cmd->add_option("--epochs", "epochs per iteration (max 30)");
    cmd->add_option("--batch", "batch size");
    cmd->add_option("--lr", "learning rate");
    cmd->add_option("--patience", "early-stop patience (validation loss)");
    cmd->add_option("--iterations", "seeded restarts per trial");
    cmd->add_option("--config", "key=value config file (flags win)");
}

// Model family inferred from the weight names unless forced.
bool weights_look_like_mmva(const WeightStore& w) {
    return w.contains("A_conv2d_1/kernel");
}

BuiltModel rebuild_from_weights(const ModelConfig& config, const WeightStore& weights,
                                const std::string& family) {
    if (!family.empty() && family != "mm-v" && family != "mm-va")
        throw usage_error("unknown model family '" + family + "' (expected mm-v|mm-va)");
    bool mmva = family == "mm-va" || (family.empty() && weights_look_like_mmva(weights));
    Rng rng(0);
    BuiltModel model = mmva ? build_mmva(config, weights, rng) : build_mmv(config, rng);
    weights.apply_to(model.net);
    return model;
}

struct EvalImageRow {
    const CorpusImage* image;
    ImageVerdict verdict;
};

// Scores every listed image once; fractions recycle across threshold probes.
std::vector<std::pair<double, bool>> image_fractions(Network& net,
                                                     const std::vector<CorpusImage>& images,
                                                     bool test_split, int stride,
                                                     std::vector<EvalImageRow>* rows) {
    std::vector<std::pair<double, bool>> out;
    for (const auto& im : images) {
        if (im.test != test_split) continue;
        Image image = read_image(im.image_path);
        PredictionMap map = score_windows(net, image, net.input_shape()[0], stride);
        ImageVerdict v = verdict_from_map(map, 0.0, im.id);
        out.emplace_back(v.fake_fraction, im.role == Role::Spliced);
        if (rows) rows->push_back({&im, v});
    }
    return out;
}

int cmd_gen(CLI::App& cmd, std::ostream& out) {
    SynthConfig config;
    config.count_per_role = cmd.get_option("--count")->as<int>();
    config.image_size = cmd.get_option("--size")->as<int>();
    config.patch_size = cmd.get_option("--patch")->as<int>();
    config.regime = regime_from_string(cmd.get_option("--regime")->as<std::string>());
    config.seed = cmd.get_option("--seed")->as<uint64_t>();
    std::string dir = cmd.get_option("--out")->as<std::string>();
    DatasetManifest manifest = generate_dataset(config, dir);
    out << "wrote " << manifest.entries.size() << " images ("
        << manifest.count(Role::Authentic) << " authentic, " << manifest.count(Role::Spliced)
        << " spliced) under " << dir << "\n"
        << "manifest: " << (fs::path(dir) / "manifest.txt").string() << "\n";
    return 0;
}

int cmd_extract(CLI::App& cmd, std::ostream& out) {
    std::string manifest_path = cmd.get_option("--manifest")->as<std::string>();
    std::string prefix = cmd.get_option("--out")->as<std::string>();
    DatasetManifest manifest = load_manifest(manifest_path);
    manifest.patch_size = cmd.get_option("--patch")->as<int>();
    manifest.overlap_frac = cmd.get_option("--overlap")->as<float>();
    manifest.stride = cmd.get_option("--stride")->as<int>();
    CorpusConfig cc;
    cc.test_image_frac = cmd.get_option("--test-frac")->as<float>();
    cc.train_frac = cmd.get_option("--train-frac")->as<float>();
    uint64_t seed = cmd.get_option("--seed")->as<uint64_t>();
    PatchCorpus corpus = build_corpus(manifest, cc, seed);
    save_corpus(corpus, prefix);
    out << "train: " << corpus.train.size() << " patches (" << corpus.count(corpus.train, 1)
        << " fake / " << corpus.count(corpus.train, 0) << " authentic)\n"
        << "val:   " << corpus.val.size() << " patches (" << corpus.count(corpus.val, 1)
        << " fake / " << corpus.count(corpus.val, 0) << " authentic)\n"
        << "test images held out: " << corpus.test_image_ids().size() << "\n"
        << "corpus: " << prefix << ".{train,val}.mmpc\n";
    return 0;
}

int cmd_train_v(CLI::App& cmd, std::ostream& out) {
    std::string prefix = cmd.get_option("--corpus")->as<std::string>();
    std::string weights_path = cmd.get_option("--out")->as<std::string>();
    std::string donor_path = cmd.get_option("--donor-out")->as<std::string>();
    std::string report_path = cmd.get_option("--report")->as<std::string>();
    std::string config_path = cmd.get_option("--config")->as<std::string>();
    bool timing = cmd.count("--timing") > 0;
    bool quiet = cmd.count("--quiet") > 0;
    int iterations = 10;
    Hyper hyper = hyper_from(cmd, config_path, &iterations);
    ModelConfig mc = model_config_from(config_path);

    PatchCorpus corpus = load_corpus(prefix);
    if (corpus.patch_size != mc.patch_size)
        throw validation_error("corpus patch size " + std::to_string(corpus.patch_size) +
                               " does not match model patch size " +
                               std::to_string(mc.patch_size));
    ModelFactory factory = [&mc](Rng& rng) { return build_mmv(mc, rng); };
    TrialSummary trial = run_trial(factory, corpus, hyper, iterations, quiet ? nullptr : &out);
    trial.model_name = "MM-V";

    trial.best_run().best_weights.save(weights_path);
    ModelConfig stored = mc;
    stored.to_kv().save(weights_path + ".config");
    if (!donor_path.empty()) select_donor(trial, "V_conv2d_3").save(donor_path);

    KvFile echo = mc.to_kv();
    KvFile hk = hyper.to_kv();
    for (const auto& e : hk.entries()) echo.set(e.first, e.second);
    echo.set_int("iterations", iterations);
    echo.set("seeds", "1.." + std::to_string(iterations));
    echo.set("corpus", prefix);
    std::string report = repro_header("train-v", echo) + render_trial_report({trial}, timing);
    out << report;
    write_report(report_path, report);
    return 0;
}

int cmd_train_va(CLI::App& cmd, std::ostream& out) {
    std::string prefix = cmd.get_option("--corpus")->as<std::string>();
    std::string donor_path = cmd.get_option("--donor")->as<std::string>();
    std::string weights_path = cmd.get_option("--out")->as<std::string>();
    std::string report_path = cmd.get_option("--report")->as<std::string>();
    std::string config_path = cmd.get_option("--config")->as<std::string>();
    bool timing = cmd.count("--timing") > 0;
    bool quiet = cmd.count("--quiet") > 0;
    bool skip_baseline = cmd.count("--no-baseline") > 0;
    int iterations = 10;
    Hyper hyper = hyper_from(cmd, config_path, &iterations);
    ModelConfig mc = model_config_from(config_path);

    PatchCorpus corpus = load_corpus(prefix);
    WeightStore donor = WeightStore::load(donor_path);
    ModelFactory va_factory = [&mc, &donor](Rng& rng) { return build_mmva(mc, donor, rng); };
    TrialSummary va_trial = run_trial(va_factory, corpus, hyper, iterations, quiet ? nullptr : &out);
    va_trial.model_name = "MM-V-A";
    va_trial.best_run().best_weights.save(weights_path);
    mc.to_kv().save(weights_path + ".config");

    std::vector<TrialSummary> rows;
    if (!skip_baseline) {
        // The twin without the transfer branch, trained on the same corpus,
        // so the report shows what the donor branch buys.
        ModelFactory v_factory = [&mc](Rng& rng) { return build_mmv(mc, rng); };
        TrialSummary v_trial = run_trial(v_factory, corpus, hyper, iterations,
                                         quiet ? nullptr : &out);
        v_trial.model_name = "MM-V";
        rows.push_back(std::move(v_trial));
    }
    rows.push_back(std::move(va_trial));

    KvFile echo = mc.to_kv();
    KvFile hk = hyper.to_kv();
    for (const auto& e : hk.entries()) echo.set(e.first, e.second);
    echo.set_int("iterations", iterations);
    echo.set("seeds", "1.." + std::to_string(iterations));
    echo.set("corpus", prefix);
    echo.set("donor", donor_path);
    std::string report = repro_header("train-va", echo) + render_trial_report(rows, timing);
    out << report;
    write_report(report_path, report);
    return 0;
}

int cmd_eval(CLI::App& cmd, std::ostream& out) {
    std::string prefix = cmd.get_option("--corpus")->as<std::string>();
    std::string weights_path = cmd.get_option("--weights")->as<std::string>();
    std::string report_path = cmd.get_option("--report")->as<std::string>();
    std::string family = cmd.get_option("--model")->as<std::string>();
    int stride = cmd.get_option("--stride")->as<int>();
    bool have_fixed_t = cmd.count("--threshold") > 0;
    double fixed_t = have_fixed_t ? cmd.get_option("--threshold")->as<double>() : 0.0;

    PatchCorpus corpus = load_corpus(prefix);
    WeightStore weights = WeightStore::load(weights_path);
    ModelConfig mc;
    if (fs::exists(weights_path + ".config"))
        mc = ModelConfig::from_kv(KvFile::load(weights_path + ".config"));
    BuiltModel model = rebuild_from_weights(mc, weights, family);

    double threshold = fixed_t;
    if (!have_fixed_t) {
        auto trainval = image_fractions(model.net, corpus.images, /*test_split=*/false, stride,
                                        nullptr);
        std::vector<double> fractions;
        std::vector<bool> truth;
        for (auto& [f, s] : trainval) {
            fractions.push_back(f);
            truth.push_back(s);
        }
        threshold = search_threshold(fractions, truth, default_threshold_grid());
    }

    std::vector<EvalImageRow> rows;
    image_fractions(model.net, corpus.images, /*test_split=*/true, stride, &rows);
    if (rows.empty()) throw validation_error("corpus has no test images to evaluate");
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (auto& row : rows) {
        bool spliced = row.verdict.fake_fraction >= threshold;
        bool truth = row.image->role == Role::Spliced;
        if (truth && spliced) ++tp;
        else if (truth && !spliced) ++fn;
        else if (!truth && spliced) ++fp;
        else ++tn;
    }
    EvalReport metrics = compute_metrics(tp, tn, fp, fn);
    metrics.threshold = threshold;

    KvFile echo;
    echo.set("corpus", prefix);
    echo.set("weights", weights_path);
    echo.set("model", model.spec.name);
    echo.set_int("stride", stride);
    echo.set(have_fixed_t ? "threshold" : "threshold_searched", format_float(threshold, 2));
    std::ostringstream body;
    body << "model  T     acc     recall  prec    f1      mcc     images\n";
    body << model.spec.name << "  " << format_float(threshold, 2) << "  "
         << format_metric(metrics.accuracy) << "  " << format_metric(metrics.recall) << "  "
         << format_metric(metrics.precision) << "  " << format_metric(metrics.f1) << "  "
         << format_metric(metrics.mcc) << "  " << rows.size() << "\n";
    body << "# image-level threshold rule: spliced iff fake-patch fraction >= T "
            "(patch counts as fake when its score > 0.5)\n";
    body << "[metrics]\n"
         << "tp = " << metrics.tp << "\ntn = " << metrics.tn << "\nfp = " << metrics.fp
         << "\nfn = " << metrics.fn << "\naccuracy = " << format_metric(metrics.accuracy)
         << "\nrecall = " << format_metric(metrics.recall)
         << "\nprecision = " << format_metric(metrics.precision)
         << "\nf1 = " << format_metric(metrics.f1) << "\nmcc = " << format_metric(metrics.mcc)
         << "\nthreshold = " << format_float(threshold, 2) << "\n";
    body << "[images]\n";
    for (auto& row : rows)
        body << row.image->id << "\t" << to_string(row.image->role) << "\t"
             << format_float(row.verdict.fake_fraction, 4) << "\t"
             << (row.verdict.fake_fraction >= threshold ? "spliced" : "authentic") << "\n";
    std::string report = repro_header("eval", echo) + body.str();
    out << report;
    write_report(report_path, report);
    return 0;
}

int cmd_localize(CLI::App& cmd, std::ostream& out) {
    std::string weights_path = cmd.get_option("--weights")->as<std::string>();
    std::string image_path = cmd.get_option("--image")->as<std::string>();
    std::string family = cmd.get_option("--model")->as<std::string>();
    int stride = cmd.get_option("--stride")->as<int>();
    double cutoff = cmd.get_option("--cutoff")->as<double>();

    WeightStore weights = WeightStore::load(weights_path);
    ModelConfig mc;
    if (fs::exists(weights_path + ".config"))
        mc = ModelConfig::from_kv(KvFile::load(weights_path + ".config"));
    BuiltModel model = rebuild_from_weights(mc, weights, family);

    Image image = read_image(image_path);
    PredictionMap map = score_windows(model.net, image, model.net.input_shape()[0], stride);
    std::optional<BBox> box = bounding_box(map, cutoff);

    fs::path p(image_path);
    std::string out_path = (p.parent_path() / (p.stem().string() + ".localized" +
                                               p.extension().string())).string();
    write_image(render_overlay(image, box), out_path);

    out << "windows: " << map.windows.size() << "  above cutoff " << format_float(cutoff, 2)
        << ": " << map.fake_count(cutoff) << "\n";
    if (box)
        out << "box: top=" << box->top << " left=" << box->left << " bottom=" << box->bottom
            << " right=" << box->right << "\n";
    else
        out << "box: none\n";
    out << "wrote " << out_path << "\n";
    return 0;
}

int cmd_cost(CLI::App& cmd, std::ostream& out) {
    std::string preset = cmd.get_option("--preset")->as<std::string>();
    std::string config_path = cmd.get_option("--config")->as<std::string>();
    ModelConfig mc = model_config_from(config_path);

    std::vector<CostReport> reports;
    reports.push_back(model_cost(make_mmv_spec(mc)));
    reports.push_back(model_cost(make_mmva_spec(mc)));

    std::vector<Comparison> comparisons;
    if (preset == "table3") {
        Comparison a = compare(kPublishedTwinTotal, kBaselineConv8Total);
        a.label = "published twin total vs 8-conv 128x128 baseline";
        Comparison b = compare(kPublishedTwinTotal, kBaselineConv52Total);
        b.label = "published twin total vs 52-conv 256x256 baseline";
        comparisons.push_back(a);
        comparisons.push_back(b);
    } else if (!preset.empty()) {
        throw usage_error("unknown preset '" + preset + "' (expected table3)");
    }
    if (preset == "table3")
        out << "# our config totals below are reported alongside the published twin total ("
            << kPublishedTwinTotal << "), which uses unpublished filter sizes\n";
    out << render_cost_report(reports, comparisons);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MissMarple twin-network splicing detection toolkit"};
    app.name("missmarple");
    app.require_subcommand(0, 1);

    auto* gen = app.add_subcommand("gen", "generate a synthetic spliced dataset");
    gen->add_option("--out", "output directory")->required();
    gen->add_option("--regime", "coarse|fine")->default_val("coarse");
    gen->add_option("--count", "images per role")->default_val(10);
    gen->add_option("--size", "image side in pixels")->default_val(128);
    gen->add_option("--patch", "patch side in pixels")->default_val(64);
    gen->add_option("--seed", "generator seed")->default_val(1);

    auto* extract = app.add_subcommand("extract", "build a patch corpus from a manifest");
    extract->add_option("--manifest", "dataset manifest path")->required();
    extract->add_option("--out", "corpus path prefix")->required();
    extract->add_option("--patch", "patch side")->default_val(64);
    extract->add_option("--overlap", "mask overlap fraction for fake patches")->default_val(0.40f);
    extract->add_option("--stride", "extraction stride")->default_val(32);
    extract->add_option("--test-frac", "image share held out for testing")->default_val(0.20f);
    extract->add_option("--train-frac", "patch share assigned to training")->default_val(0.70f);
    extract->add_option("--seed", "split seed")->default_val(1);

    auto* train_v = app.add_subcommand("train-v", "train the village twin");
    train_v->add_option("--corpus", "corpus path prefix")->required();
    train_v->add_option("--out", "weights output path")->required();
    train_v->add_option("--donor-out", "export V_conv2d_3 for transfer")->default_val(std::string());
    train_v->add_option("--report", "trial report path")->default_val(std::string());
    add_hyper_flags(train_v);
    train_v->add_flag("--timing", "print real wall times in reports");
    train_v->add_flag("--quiet", "suppress per-epoch log lines");

    auto* train_va = app.add_subcommand("train-va", "train the transfer twin against a donor");
    train_va->add_option("--corpus", "corpus path prefix")->required();
    train_va->add_option("--donor", "donor weights (from train-v --donor-out)")->required();
    train_va->add_option("--out", "weights output path")->required();
    train_va->add_option("--report", "comparative report path")->default_val(std::string());
    add_hyper_flags(train_va);
    train_va->add_flag("--timing", "print real wall times in reports");
    train_va->add_flag("--quiet", "suppress per-epoch log lines");
    train_va->add_flag("--no-baseline", "skip the MM-V-on-same-corpus comparison row");

    auto* eval = app.add_subcommand("eval", "score held-out test images");
    eval->add_option("--corpus", "corpus path prefix")->required();
    eval->add_option("--weights", "trained weights path")->required();
    eval->add_option("--model", "mm-v|mm-va (default: inferred)")->default_val(std::string());
    eval->add_option("--stride", "evaluation stride")->default_val(32);
    eval->add_option("--threshold", "fixed image threshold T (default: grid search)");
    eval->add_option("--report", "evaluation report path")->default_val(std::string());

    auto* localize = app.add_subcommand("localize", "outline the forged region of one image");
    localize->add_option("--weights", "trained weights path")->required();
    localize->add_option("--image", "image to localize")->required();
    localize->add_option("--model", "mm-v|mm-va (default: inferred)")->default_val(std::string());
    localize->add_option("--stride", "window stride")->default_val(32);
    localize->add_option("--cutoff", "patch score cutoff")->default_val(0.5);

    auto* cost = app.add_subcommand("cost", "convolution multiplication counts");
    cost->add_option("--preset", "named preset (table3)")->default_val(std::string());
    cost->add_option("--config", "model config file")->default_val(std::string());

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(*gen, out);
        if (extract->parsed()) return cmd_extract(*extract, out);
        if (train_v->parsed()) return cmd_train_v(*train_v, out);
        if (train_va->parsed()) return cmd_train_va(*train_va, out);
        if (eval->parsed()) return cmd_eval(*eval, out);
        if (localize->parsed()) return cmd_localize(*localize, out);
        if (cost->parsed()) return cmd_cost(*cost, out);
        err << app.help();
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
}

} // namespace mm
