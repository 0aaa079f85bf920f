#include "crisisfilter/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "crisisfilter/classifier.hpp"
#include "crisisfilter/corpus.hpp"
#include "crisisfilter/dataset.hpp"
#include "crisisfilter/experiments.hpp"
#include "crisisfilter/features.hpp"
#include "crisisfilter/hash_window.hpp"
#include "crisisfilter/metrics.hpp"
#include "crisisfilter/netpbm.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/pipeline.hpp"

namespace crisisfilter {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised for argument combinations CLI11 cannot express; maps to exit 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Writes to `path`, or to `out` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
}

std::string json_text(const json& j)
{
    return j.dump(2) + "\n";
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return json::parse(in);
}

struct TrainFlags {
    int epochs = TrainParams{}.epochs;
    double lambda = TrainParams{}.lambda;
    double learning_rate = TrainParams{}.learning_rate;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--epochs", epochs, "Gradient-descent epochs")->capture_default_str()->check(
            CLI::NonNegativeNumber);
        cmd->add_option("--lambda", lambda, "L2 penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
        cmd->add_option("--lr", learning_rate, "Initial learning rate")->capture_default_str()->check(
            CLI::PositiveNumber);
    }

    TrainParams params(std::uint64_t seed) const
    {
        TrainParams p;
        p.seed = seed;
        p.epochs = epochs;
        p.lambda = lambda;
        p.learning_rate = learning_rate;
        return p;
    }
};

json train_params_json(const TrainParams& p)
{
    return {{"seed", p.seed},
            {"epochs", p.epochs},
            {"lambda", p.lambda},
            {"learning_rate", p.learning_rate},
            {"decay", p.decay},
            {"decay_every", p.decay_every}};
}

struct DedupFlags {
    int threshold = DedupConfig{}.threshold_d;
    std::uint32_t capacity = DedupConfig{}.capacity;
    std::string engine = std::string(to_string(DedupConfig{}.engine));
    std::string snapshot_in;
    std::string snapshot_out;
    CLI::Option* threshold_opt = nullptr;
    CLI::Option* capacity_opt = nullptr;

    void add_to(CLI::App* cmd)
    {
        threshold_opt = cmd->add_option("--threshold", threshold, "Hamming distance threshold d")
                            ->capture_default_str()
                            ->check(CLI::Range(0, 64));
        capacity_opt = cmd->add_option("--capacity", capacity, "Window capacity (distinct hashes)")
                           ->capture_default_str()
                           ->check(CLI::PositiveNumber);
        cmd->add_option("--engine", engine, "Window index: linear or bktree")
            ->capture_default_str()
            ->check(CLI::IsMember({"linear", "bktree"}));
        cmd->add_option("--snapshot-in", snapshot_in, "Restore the window from this snapshot first");
        cmd->add_option("--snapshot-out", snapshot_out, "Save the window here afterwards");
    }

    HashWindow make_window() const
    {
        const auto eng = *parse_engine(engine);
        if (snapshot_in.empty()) {
            DedupConfig cfg;
            cfg.threshold_d = threshold;
            cfg.capacity = capacity;
            cfg.engine = eng;
            return HashWindow(cfg);
        }
        HashWindow w = load_snapshot(snapshot_in, eng);
        if (threshold_opt->count() > 0 && w.config().threshold_d != threshold) {
            throw std::runtime_error("snapshot was written with threshold " +
                                     std::to_string(w.config().threshold_d));
        }
        if (capacity_opt->count() > 0 && w.config().capacity != capacity) {
            throw std::runtime_error("snapshot was written with capacity " + std::to_string(w.config().capacity));
        }
        return w;
    }

    void save(const HashWindow& w) const
    {
        if (!snapshot_out.empty()) {
            save_snapshot(w, snapshot_out);
        }
    }
};

// Records from a JSONL file; malformed lines are reported and skipped.
std::vector<ImageRecord> read_records(const std::string& path, std::ostream& err)
{
    auto res = ingest_file(path);
    if (res.malformed > 0) {
        err << "warning: skipped " << res.malformed << " malformed line(s) in " << path << "\n";
    }
    return std::move(res.records);
}

fs::path base_dir_for(const std::string& input, const std::string& flag)
{
    return flag.empty() ? fs::path(input).parent_path() : fs::path(flag);
}

struct Decoded {
    bool ok = false;
    std::string error;
    Raster image;
};

Decoded fetch_and_decode(const Fetcher& fetcher, const ImageRecord& r)
{
    Decoded d;
    if (!r.payload.empty()) {
        try {
            d.image = decode_netpbm(r.payload);
            d.ok = true;
        } catch (const DecodeError& e) {
            d.error = std::string("decode-error: ") + e.what();
        }
        return d;
    }
    auto fetched = fetcher.fetch(r.url);
    if (!fetched.ok) {
        d.error = "fetch-error: " + fetched.error;
        return d;
    }
    try {
        d.image = decode_netpbm(fetched.bytes);
        d.ok = true;
    } catch (const DecodeError& e) {
        d.error = std::string("decode-error: ") + e.what();
    }
    return d;
}

// Corpus from --spec (generated) or --corpus (manifest on disk).
Corpus corpus_from_flags(const std::string& spec_path, const std::string& manifest)
{
    if (spec_path.empty() == manifest.empty()) {
        throw UsageError("give exactly one of --spec or --corpus");
    }
    if (!spec_path.empty()) {
        return generate_corpus(corpus_spec_from_json(read_json_file(spec_path)));
    }
    return load_corpus(manifest);
}

// ---------------------------------------------------------------- commands

int cmd_hash(const std::vector<std::string>& images, std::ostream& out)
{
    for (const auto& path : images) {
        const auto h = phash(read_netpbm(path));
        out << to_hex(h);
        if (images.size() > 1) {
            out << "  " << path;
        }
        out << "\n";
    }
    return kExitOk;
}

struct DedupRunArgs {
    std::string input;
    std::string base_dir;
    std::string output;
    DedupFlags window;
};

int cmd_dedup_run(const DedupRunArgs& a, std::ostream& out, std::ostream& err)
{
    const auto records = read_records(a.input, err);
    HashWindow window = a.window.make_window();
    const DefaultFetcher fetcher(base_dir_for(a.input, a.base_dir));
    std::ostringstream lines;
    long long distinct = 0, duplicates = 0, errors = 0;
    for (const auto& r : records) {
        json j{{"id", r.id}};
        const auto d = fetch_and_decode(fetcher, r);
        if (!d.ok) {
            j["error"] = d.error;
            ++errors;
        } else {
            const auto h = phash(d.image);
            const auto dec = window.check_and_insert(h, r.id);
            j["hash"] = to_hex(h);
            if (dec.duplicate()) {
                j["verdict"] = "duplicate";
                j["matched_id"] = dec.matched_id;
                j["distance"] = dec.distance;
                ++duplicates;
            } else {
                j["verdict"] = "distinct";
                ++distinct;
            }
        }
        lines << j.dump() << "\n";
    }
    emit(a.output, lines.str(), out);
    a.window.save(window);
    err << records.size() << " records: " << distinct << " distinct, " << duplicates << " duplicate, " << errors
        << " unreadable\n";
    return kExitOk;
}

struct TrainArgs {
    std::string manifest;
    std::string model_out;
    std::string report_out;
    std::uint64_t seed = 42;
    TrainFlags train;
};

int cmd_train(const TrainArgs& a, bool relevancy, std::ostream& out)
{
    const Corpus corpus = load_corpus(a.manifest);
    const CorpusAnalysis analysis = analyze_corpus(corpus);
    const auto data = relevancy ? relevance_samples(corpus, analysis, a.seed) : damage_samples(corpus, analysis);
    const auto& classes = relevancy ? relevance_classes() : damage_classes();
    if (data.empty()) {
        throw std::runtime_error("no usable labeled images in " + a.manifest);
    }
    const auto params = a.train.params(a.seed);
    const auto split = train_split(data, classes, params, a.seed);
    save_model(split.model, a.model_out);

    json counts = json::object();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        counts[classes[c]] = std::count_if(data.begin(), data.end(),
                                           [&](const Sample& s) { return s.label == static_cast<int>(c); });
    }
    const json report{{"task", relevancy ? "relevancy" : "damage"},
                      {"samples", data.size()},
                      {"class_counts", counts},
                      {"split", {{"train", split.sizes[0]}, {"validation", split.sizes[1]}, {"test", split.sizes[2]}}},
                      {"selected_epoch", split.selected_epoch},
                      {"train_params", train_params_json(params)},
                      {"validation", to_json(split.validation)},
                      {"test", to_json(split.test)}};
    emit(a.report_out, json_text(report), out);
    return kExitOk;
}

struct ScoreArgs {
    std::string model;
    std::string input;
    std::string base_dir;
    std::string output;
    double threshold = 0.5;
};

int cmd_score(const ScoreArgs& a, bool relevancy, std::ostream& out, std::ostream& err)
{
    const ClassifierModel model = load_model(a.model);
    const int rel_col = model.class_index("relevant");
    if (relevancy && rel_col < 0) {
        throw std::runtime_error("model has no 'relevant' class");
    }
    const auto records = read_records(a.input, err);
    const DefaultFetcher fetcher(base_dir_for(a.input, a.base_dir));
    std::ostringstream lines;
    for (const auto& r : records) {
        json j{{"id", r.id}};
        const auto d = fetch_and_decode(fetcher, r);
        if (!d.ok) {
            j["error"] = d.error;
        } else {
            const auto p = score(model, extract_features(d.image));
            if (relevancy) {
                j["p_relevant"] = p[rel_col];
                j["relevant"] = p[rel_col] >= a.threshold;
            } else {
                json scores = json::object();
                for (std::size_t c = 0; c < model.classes.size(); ++c) {
                    scores[model.classes[c]] = p[c];
                }
                const auto best = std::max_element(p.begin(), p.end()) - p.begin();
                j["label"] = model.classes[best];
                j["scores"] = scores;
            }
        }
        lines << j.dump() << "\n";
    }
    emit(a.output, lines.str(), out);
    return kExitOk;
}

struct PipelineArgs {
    std::string input;
    std::string model;
    std::string base_dir;
    std::string report_out;
    std::string outcomes_out;
    double relevancy_threshold = 0.5;
    std::size_t workers = PipelineConfig{}.fetch_workers;
    std::size_t queue = PipelineConfig{}.queue_capacity;
    bool dedup_first = false;
    DedupFlags window;
};

int cmd_pipeline_run(const PipelineArgs& a, std::ostream& out, std::ostream& err)
{
    const auto records = read_records(a.input, err);
    std::optional<ClassifierModel> model;
    if (!a.model.empty()) {
        model = load_model(a.model);
    } else {
        err << "note: no --model given, relevancy stage passes every image\n";
    }
    HashWindow window = a.window.make_window();
    const DefaultFetcher fetcher(base_dir_for(a.input, a.base_dir));
    PipelineConfig cfg;
    cfg.fetch_workers = a.workers;
    cfg.queue_capacity = a.queue;
    cfg.relevancy_threshold = a.relevancy_threshold;
    cfg.dedup_first = a.dedup_first;
    const auto result = run_pipeline(records, model ? &*model : nullptr, window, fetcher, cfg);
    if (!a.outcomes_out.empty()) {
        std::ofstream f(a.outcomes_out, std::ios::binary);
        write_outcomes_jsonl(f, result.outcomes);
        if (!f) {
            throw std::runtime_error("cannot write " + a.outcomes_out);
        }
    }
    a.window.save(window);
    emit(a.report_out, json_text(to_json(result.report)), out);
    return kExitOk;
}

struct CorpusArgs {
    std::string spec;
    std::string out_dir;
    std::uint64_t seed = 42;
    CLI::Option* seed_opt = nullptr;
};

int cmd_corpus_generate(const CorpusArgs& a, std::ostream& out)
{
    CorpusSpec spec = a.spec.empty() ? CorpusSpec{} : corpus_spec_from_json(read_json_file(a.spec));
    if (a.seed_opt->count() > 0 || a.spec.empty()) {
        spec.seed = a.seed;
    }
    const Corpus corpus = generate_corpus(spec);
    write_corpus(corpus, a.out_dir);
    json counts = json::object();
    for (const auto& row : expected_retention(corpus)) {
        counts[row.category] = {{"raw", row.raw},
                                {"fetch_failed", row.fetch_failed},
                                {"decode_failed", row.decode_failed},
                                {"after_relevancy", row.after_relevancy},
                                {"after_dedup", row.after_dedup}};
    }
    const json summary{{"records", corpus.records.size()},
                       {"violations", corpus.violations},
                       {"expected_retention", counts},
                       {"spec", to_json(spec)}};
    out << json_text(summary);
    return kExitOk;
}

struct SweepArgs {
    std::string spec;
    std::string corpus;
    int pairs = 1100;
    int max_distance = 20;
    std::uint64_t seed = 42;
    std::string curve_out;
    std::string report_out;
};

int cmd_eval_sweep(const SweepArgs& a, std::ostream& out)
{
    const Corpus corpus = corpus_from_flags(a.spec, a.corpus);
    const CorpusAnalysis analysis = analyze_corpus(corpus);
    const auto res = sweep_threshold_experiment(corpus, analysis, a.pairs, a.seed, a.max_distance);
    if (!a.curve_out.empty()) {
        emit(a.curve_out, curve_csv(res.tune), out);
    }
    auto report = to_json(res);
    report["seed"] = a.seed;
    emit(a.report_out, json_text(report), out);
    return kExitOk;
}

struct BudgetArgs {
    std::string setting = "all";
    std::string spec;
    std::string corpus;
    std::string model;
    int budget = BudgetConfig{}.budget_usd;
    double cost = BudgetConfig{}.cost_per_label;
    int folds = BudgetConfig{}.folds;
    std::uint64_t seed = 42;
    std::string report_out;
    std::string predictions_dir;
    TrainFlags train;
};

int cmd_eval_budget(const BudgetArgs& a, std::ostream& out, std::ostream& err)
{
    std::vector<Setting> settings;
    if (a.setting == "all") {
        settings = {Setting::S1, Setting::S2, Setting::S3, Setting::S4};
    } else {
        settings = {*parse_setting(a.setting)};
    }
    const Corpus corpus = corpus_from_flags(a.spec, a.corpus);
    const CorpusAnalysis analysis = analyze_corpus(corpus);
    BudgetConfig cfg;
    cfg.budget_usd = a.budget;
    cfg.cost_per_label = a.cost;
    cfg.sample_seed = a.seed;
    cfg.folds = a.folds;
    cfg.train = a.train.params(a.seed);

    std::optional<ClassifierModel> relevancy;
    const bool needs_model = std::any_of(settings.begin(), settings.end(),
                                         [](Setting s) { return s == Setting::S3 || s == Setting::S4; });
    if (needs_model) {
        if (!a.model.empty()) {
            relevancy = load_model(a.model);
        } else {
            err << "note: no --model given, training the relevancy filter on the corpus\n";
            relevancy = train_relevancy_model(corpus, analysis, TrainParams{.seed = a.seed}, a.seed);
        }
    }
    json reports = json::array();
    for (auto s : settings) {
        const auto rep = budget_sim(corpus, analysis, cfg, s, relevancy ? &*relevancy : nullptr);
        reports.push_back(to_json(rep));
        if (!a.predictions_dir.empty()) {
            fs::create_directories(a.predictions_dir);
            emit((fs::path(a.predictions_dir) / (std::string(to_string(s)) + ".json")).string(),
                 to_json(rep.predictions).dump() + "\n", out);
        }
    }
    emit(a.report_out, json_text(settings.size() == 1 ? reports[0] : reports), out);
    return kExitOk;
}

struct PermArgs {
    std::string a_path;
    std::string b_path;
    int shuffles = 1000;
    std::uint64_t seed = 42;
    std::string report_out;
};

int cmd_eval_perm(const PermArgs& a, std::ostream& out)
{
    const auto pa = prediction_set_from_json(read_json_file(a.a_path));
    const auto pb = prediction_set_from_json(read_json_file(a.b_path));
    const auto res = permutation_test(pa, pb, a.shuffles, a.seed);
    auto labels = [](const PredictionSet& p, bool truth) {
        std::vector<int> v;
        for (const auto& it : p.items) {
            v.push_back(truth ? it.truth : it.predicted);
        }
        return v;
    };
    const int k = static_cast<int>(pa.classes.size());
    const json report{{"macro_f1_a", macro_f1(labels(pa, true), labels(pa, false), k)},
                      {"macro_f1_b", macro_f1(labels(pb, true), labels(pb, false), k)},
                      {"observed_diff", res.observed_diff},
                      {"p_value", res.p_value},
                      {"n_shuffles", a.shuffles},
                      {"seed", a.seed}};
    emit(a.report_out, json_text(report), out);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Filters crisis-image streams for relevance and near-duplicates and runs the evaluation harness.",
                 "crisisfilter"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // hash
    std::vector<std::string> hash_images;
    auto* hash_cmd = app.add_subcommand("hash", "Print the 64-bit perceptual hash of PGM/PPM images");
    hash_cmd->add_option("images", hash_images, "Image files")->required()->check(CLI::ExistingFile);

    // dedup run
    DedupRunArgs dedup_args;
    auto* dedup_cmd = app.add_subcommand("dedup", "Near-duplicate detection over a record stream");
    dedup_cmd->require_subcommand(1);
    auto* dedup_run = dedup_cmd->add_subcommand("run", "Hash each record and check it against the window");
    dedup_run->add_option("--input", dedup_args.input, "Records JSONL")->required()->check(CLI::ExistingFile);
    dedup_run->add_option("--base-dir", dedup_args.base_dir, "Directory for relative paths (default: input's)");
    dedup_run->add_option("--output", dedup_args.output, "Decisions JSONL (default: stdout)");
    dedup_args.window.add_to(dedup_run);

    // relevancy / damage train|score
    TrainArgs rel_train_args, dmg_train_args;
    ScoreArgs rel_score_args, dmg_score_args;
    auto add_model_cmds = [&](const std::string& name, const std::string& what, TrainArgs& ta, ScoreArgs& sa) {
        auto* cmd = app.add_subcommand(name, what);
        cmd->require_subcommand(1);
        auto* tr = cmd->add_subcommand("train", "Train on a labeled manifest with a 60/20/20 split");
        tr->add_option("--manifest", ta.manifest, "Labeled manifest JSONL")->required()->check(CLI::ExistingFile);
        tr->add_option("--model-out", ta.model_out, "Where to write the model")->required();
        tr->add_option("--report-out", ta.report_out, "Training report JSON (default: stdout)");
        tr->add_option("--seed", ta.seed, "Random seed")->capture_default_str();
        ta.train.add_to(tr);
        auto* sc = cmd->add_subcommand("score", "Score records with a trained model");
        sc->add_option("--model", sa.model, "Model file")->required()->check(CLI::ExistingFile);
        sc->add_option("--input", sa.input, "Records JSONL")->required()->check(CLI::ExistingFile);
        sc->add_option("--base-dir", sa.base_dir, "Directory for relative paths (default: input's)");
        sc->add_option("--output", sa.output, "Scores JSONL (default: stdout)");
        return std::pair{tr, sc};
    };
    auto [rel_train, rel_score] = add_model_cmds("relevancy", "Binary relevant/irrelevant filter", rel_train_args,
                                                 rel_score_args);
    rel_score->add_option("--threshold", rel_score_args.threshold, "Keep when P(relevant) >= threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    auto [dmg_train, dmg_score] =
        add_model_cmds("damage", "Severe/mild/none damage classifier", dmg_train_args, dmg_score_args);

    // pipeline run
    PipelineArgs pipe_args;
    auto* pipe_cmd = app.add_subcommand("pipeline", "Fetch, relevancy and dedup stages over a record stream");
    pipe_cmd->require_subcommand(1);
    auto* pipe_run = pipe_cmd->add_subcommand("run", "Run the filtering pipeline");
    pipe_run->add_option("--input", pipe_args.input, "Records JSONL")->required()->check(CLI::ExistingFile);
    pipe_run->add_option("--model", pipe_args.model, "Relevancy model (omit to pass everything)")
        ->check(CLI::ExistingFile);
    pipe_run->add_option("--base-dir", pipe_args.base_dir, "Directory for relative paths (default: input's)");
    pipe_run->add_option("--report-out", pipe_args.report_out, "Retention report JSON (default: stdout)");
    pipe_run->add_option("--outcomes-out", pipe_args.outcomes_out, "Per-record outcomes JSONL");
    pipe_run->add_option("--relevancy-threshold", pipe_args.relevancy_threshold, "Drop when P(relevant) is below")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    pipe_run->add_option("--workers", pipe_args.workers, "Concurrent fetch workers")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    pipe_run->add_option("--queue", pipe_args.queue, "Records in flight ahead of the consumer")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    pipe_run->add_flag("--dedup-first", pipe_args.dedup_first, "Run dedup before relevancy");
    pipe_args.window.add_to(pipe_run);

    // corpus generate
    CorpusArgs corpus_args;
    auto* corpus_cmd = app.add_subcommand("corpus", "Synthetic corpora with ground truth");
    corpus_cmd->require_subcommand(1);
    auto* corpus_gen = corpus_cmd->add_subcommand("generate", "Write images, manifest.jsonl and spec.json");
    corpus_gen->add_option("--spec", corpus_args.spec, "Corpus spec JSON")->check(CLI::ExistingFile);
    corpus_gen->add_option("--out", corpus_args.out_dir, "Output directory")->required();
    corpus_args.seed_opt =
        corpus_gen->add_option("--seed", corpus_args.seed, "Corpus seed (overrides the spec's)");

    // eval sweep | budget-sim | perm-test
    auto* eval_cmd = app.add_subcommand("eval", "Evaluation experiments");
    eval_cmd->require_subcommand(1);
    SweepArgs sweep_args;
    auto* sweep = eval_cmd->add_subcommand("sweep", "Distance-threshold sweep on labeled pairs");
    sweep->add_option("--spec", sweep_args.spec, "Generate the corpus from this spec")->check(CLI::ExistingFile);
    sweep->add_option("--corpus", sweep_args.corpus, "Use this manifest")->check(CLI::ExistingFile);
    sweep->add_option("--pairs", sweep_args.pairs, "Pairs to sample")->capture_default_str()->check(
        CLI::PositiveNumber);
    sweep->add_option("--max-distance", sweep_args.max_distance, "Largest pair distance and threshold")
        ->capture_default_str()
        ->check(CLI::Range(0, 64));
    sweep->add_option("--seed", sweep_args.seed, "Pair sampling seed")->capture_default_str();
    sweep->add_option("--curve-out", sweep_args.curve_out, "Accuracy curve CSV");
    sweep->add_option("--report-out", sweep_args.report_out, "Sweep report JSON (default: stdout)");

    BudgetArgs budget_args;
    auto* budget = eval_cmd->add_subcommand("budget-sim", "Annotation-budget settings S1..S4");
    budget->add_option("--setting", budget_args.setting, "S1, S2, S3, S4 or all")
        ->capture_default_str()
        ->check(CLI::IsMember({"S1", "S2", "S3", "S4", "all"}));
    budget->add_option("--spec", budget_args.spec, "Generate the corpus from this spec")->check(CLI::ExistingFile);
    budget->add_option("--corpus", budget_args.corpus, "Use this manifest")->check(CLI::ExistingFile);
    budget->add_option("--model", budget_args.model, "Relevancy model for S3/S4 (default: train one)")
        ->check(CLI::ExistingFile);
    budget->add_option("--budget", budget_args.budget, "Budget in USD")->capture_default_str()->check(
        CLI::PositiveNumber);
    budget->add_option("--cost-per-label", budget_args.cost, "USD per label")->capture_default_str()->check(
        CLI::PositiveNumber);
    budget->add_option("--folds", budget_args.folds, "Cross-validation folds")->capture_default_str()->check(
        CLI::Range(2, 100));
    budget->add_option("--seed", budget_args.seed, "Sampling and training seed")->capture_default_str();
    budget->add_option("--report-out", budget_args.report_out, "SettingReport JSON (default: stdout)");
    budget->add_option("--predictions-out", budget_args.predictions_dir,
                       "Directory for pooled predictions, one <setting>.json each");
    budget_args.train.add_to(budget);

    PermArgs perm_args;
    auto* perm = eval_cmd->add_subcommand("perm-test", "Permutation test on the macro-F1 difference");
    perm->add_option("--a", perm_args.a_path, "Prediction set A (JSON)")->required()->check(CLI::ExistingFile);
    perm->add_option("--b", perm_args.b_path, "Prediction set B (JSON)")->required()->check(CLI::ExistingFile);
    perm->add_option("--shuffles", perm_args.shuffles, "Number of shuffles")->capture_default_str()->check(
        CLI::PositiveNumber);
    perm->add_option("--seed", perm_args.seed, "Shuffle seed")->capture_default_str();
    perm->add_option("--report-out", perm_args.report_out, "Result JSON (default: stdout)");

    if (!args.empty() && !args[0].starts_with("-") && app.get_subcommand_no_throw(args[0]) == nullptr) {
        err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
        return kExitUsage;
    }

    std::vector<const char*> argv{"crisisfilter"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        // Usage of the deepest subcommand that was reached.
        const CLI::App* deepest = &app;
        for (bool descended = true; descended;) {
            descended = false;
            for (const auto* sub : deepest->get_subcommands()) {
                deepest = sub;
                descended = true;
                break;
            }
        }
        err << deepest->help();
        return kExitUsage;
    }

    try {
        if (hash_cmd->parsed()) {
            return cmd_hash(hash_images, out);
        }
        if (dedup_run->parsed()) {
            return cmd_dedup_run(dedup_args, out, err);
        }
        if (rel_train->parsed()) {
            return cmd_train(rel_train_args, true, out);
        }
        if (dmg_train->parsed()) {
            return cmd_train(dmg_train_args, false, out);
        }
        if (rel_score->parsed()) {
            return cmd_score(rel_score_args, true, out, err);
        }
        if (dmg_score->parsed()) {
            return cmd_score(dmg_score_args, false, out, err);
        }
        if (pipe_run->parsed()) {
            return cmd_pipeline_run(pipe_args, out, err);
        }
        if (corpus_gen->parsed()) {
            return cmd_corpus_generate(corpus_args, out);
        }
        if (sweep->parsed()) {
            return cmd_eval_sweep(sweep_args, out);
        }
        if (budget->parsed()) {
            return cmd_eval_budget(budget_args, out, err);
        }
        if (perm->parsed()) {
            return cmd_eval_perm(perm_args, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace crisisfilter
