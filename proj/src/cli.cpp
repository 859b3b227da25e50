#include "frames/cli.hpp"

#include <climits>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "frames/annotate.hpp"
#include "frames/app_config.hpp"
#include "frames/corpus.hpp"
#include "frames/error.hpp"
#include "frames/evaluate.hpp"
#include "frames/service.hpp"
#include "frames/train.hpp"

namespace frames {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::string> paragraph_texts(const fs::path& path) {
    std::vector<std::string> texts;
    try {
        for (auto& p : load_paragraphs(path)) texts.push_back(std::move(p.text));
    } catch (const ParseError&) {
        for (auto& r : load_dataset(path).records) texts.push_back(std::move(r.paragraph.text));
    }
    return texts;
}

// Paragraph files and labelled dataset files are both accepted as input.
std::vector<Paragraph> load_any_paragraphs(const fs::path& path) {
    try {
        return load_paragraphs(path);
    } catch (const ParseError&) {
        std::vector<Paragraph> out;
        for (auto& r : load_dataset(path).records) out.push_back(std::move(r.paragraph));
        return out;
    }
}

struct Options {
    std::optional<std::string> config_path;

    // ingest
    std::string ingest_in, ingest_out;
    std::size_t min_chars = kDefaultMinParagraphChars;
    bool translate = false;
    // sample
    std::string sample_in, sample_out;
    std::size_t sample_n = 0;
    std::uint64_t sample_seed = 0;
    // serve
    std::optional<std::string> host, corpus, annotations, model;
    std::optional<int> port;
    // kappa
    std::string kappa_a, kappa_b;
    double ci_level = 0.95;
    // stats
    std::string stats_data;
    // train
    std::optional<std::string> train_config, train_eval, train_encoder;
    std::string train_data, train_out;
    std::optional<std::uint64_t> train_seed;
    // cv
    std::string cv_data, cv_out;
    std::optional<int> cv_k;
    std::optional<std::uint64_t> cv_seed;
    bool cv_stratified = false;
    bool cv_skip_heldout_log = false;
    // evaluate
    std::string eval_model, eval_gold, eval_report;
    // classify
    std::string cls_model, cls_in, cls_out;
    // report
    std::string report_cm;
    bool report_text = false;
    int report_decimals = -1;
    // init-encoder
    std::string enc_texts, enc_out;
    EncoderSpec enc_spec;
};

TrainingConfig training_config_for(const Options& o, const AppConfig& app) {
    TrainingConfig cfg = o.train_config ? load_training_config(*o.train_config) : app.training;
    if (o.train_seed) cfg.seed = o.train_seed;
    if (o.train_encoder) cfg.pretrained_encoder_id = *o.train_encoder;
    return cfg;
}

int cmd_ingest(const Options& o, std::ostream& out) {
    auto docs = load_documents(o.ingest_in);
    IdentityTranslator identity;
    ExtractOptions ex;
    ex.min_paragraph_chars = o.min_chars;
    std::vector<Paragraph> paragraphs;
    for (auto& d : docs) {
        const auto doc = o.translate ? translate_document(d, identity) : d;
        for (auto& p : extract_paragraphs(doc, ex)) paragraphs.push_back(std::move(p));
    }
    save_paragraphs(paragraphs, o.ingest_out);
    out << nlohmann::ordered_json{{"documents", docs.size()}, {"paragraphs", paragraphs.size()}}.dump() << '\n';
    return 0;
}

int cmd_sample(const Options& o, std::ostream& out) {
    const auto docs = load_documents(o.sample_in);
    const auto picked = sample_documents(docs, o.sample_n, o.sample_seed);
    save_documents(picked, o.sample_out);
    out << nlohmann::ordered_json{{"corpus", docs.size()}, {"sampled", picked.size()}, {"seed", o.sample_seed}}.dump()
        << '\n';
    return 0;
}

int cmd_serve(const Options& o, AppConfig app, std::ostream& out) {
    if (o.host) app.host = *o.host;
    if (o.port) app.port = *o.port;
    if (o.corpus) app.corpus = *o.corpus;
    if (o.annotations) app.annotations = *o.annotations;
    if (o.model) app.models = *o.model;
    app.validate();
    app.check_paths();
    std::vector<Paragraph> corpus;
    if (!app.corpus.empty()) corpus = load_any_paragraphs(app.corpus);
    std::unique_ptr<AnnotationStore> store = app.annotations.empty()
                                                 ? std::make_unique<AnnotationStore>()
                                                 : std::make_unique<AnnotationStore>(app.annotations);
    std::shared_ptr<const FramePredictor> model;
    if (!app.models.empty()) model = std::make_shared<Classifier>(Classifier::load(app.models));
    AnnotationService service(std::move(corpus), *store, model);
    out << "serving on http://" << app.host << ':' << app.port << std::endl;
    service.run(app.host, app.port);
    return 0;
}

int cmd_kappa(const Options& o, std::ostream& out) {
    const auto a = load_annotations(o.kappa_a);
    const auto b = load_annotations(o.kappa_b);
    const auto [la, lb] = align_main_frames(a, b);
    const auto report = cohen_kappa(la, lb);
    auto j = to_json(report);
    if (la.size() >= 2) {
        const auto ci = kappa_confidence_interval(report, la, lb, o.ci_level);
        j["ci"] = {{"level", o.ci_level}, {"lower", ci.lower}, {"upper", ci.upper}};
    }
    out << j.dump(2) << '\n';
    return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
    const auto ds = load_dataset(o.stats_data);
    const auto counts = dataset_stats(ds);
    nlohmann::ordered_json j;
    for (auto code : kAllFrames) j[std::string(frame_name(code))] = counts[code];
    j["total"] = counts.total;
    out << j.dump(2) << '\n';
    return 0;
}

int cmd_train(const Options& o, const AppConfig& app, std::ostream& out) {
    auto cfg = training_config_for(o, app);
    cfg.output_dir = o.train_out;
    const auto train = load_dataset(o.train_data);
    const auto eval = o.train_eval ? load_dataset(*o.train_eval) : Dataset{};
    if (!eval.empty()) require_no_leakage(check_split_leakage(train, eval));
    FineTuneHooks hooks;
    hooks.on_log = [&out](const TrainLogEntry& e) { out << to_json(e).dump() << '\n' << std::flush; };
    const auto result = fine_tune(cfg, train, eval, hooks);
    out << nlohmann::ordered_json{{"output_dir", result.artifact.dir.string()},
                                  {"steps", total_training_steps(train.size(), cfg)},
                                  {"log_entries", result.log.size()},
                                  {"config_fingerprint", result.artifact.config_fingerprint}}
               .dump()
        << '\n';
    return 0;
}

int cmd_cv(const Options& o, const AppConfig& app, std::ostream& out) {
    auto cfg = training_config_for(o, app);
    cfg.output_dir = o.cv_out;
    const int k = o.cv_k.value_or(app.cv_k);
    const auto seed = o.cv_seed.value_or(app.cv_seed);
    const bool stratified = o.cv_stratified || app.cv_stratified;
    const auto ds = load_dataset(o.cv_data);
    FineTuneTrainerOptions topts;
    topts.log_heldout_metrics = !o.cv_skip_heldout_log;
    const auto result = cross_validate(ds, k, seed, stratified, fine_tune_trainer(cfg, topts));

    fs::create_directories(o.cv_out);
    save_confusion_csv(fs::path(o.cv_out) / "confusion_matrix.csv", result.pooled);
    write_text(fs::path(o.cv_out) / "report.json", to_json(result.report).dump(2) + "\n");
    std::ofstream preds(fs::path(o.cv_out) / "predictions.jsonl", std::ios::trunc);
    for (const auto& p : result.predictions) {
        nlohmann::ordered_json j;
        j["para_id"] = p.para_id;
        j["fold"] = p.fold;
        j["actual"] = std::string(frame_name(p.actual));
        j["predicted"] = std::string(frame_name(p.prediction.main));
        j["scores"] = to_json(p.prediction.scores);
        preds << j.dump() << '\n';
    }
    nlohmann::ordered_json summary;
    summary["k"] = k;
    summary["seed"] = seed;
    summary["stratified"] = stratified;
    summary["fold_sizes"] = result.plan.fold_sizes();
    summary["report"] = to_json(result.report);
    out << summary.dump(2) << '\n';
    return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    const auto artifact = ModelArtifact::open(o.eval_model);
    const auto gold = load_dataset(o.eval_gold);
    const auto report = evaluate_gold(artifact, gold);
    const auto text = to_json(report).dump(2) + "\n";
    if (!o.eval_report.empty()) write_text(o.eval_report, text);
    out << text;
    return 0;
}

int cmd_classify(const Options& o, std::ostream& out) {
    const auto classifier = Classifier::load(o.cls_model);
    const auto paragraphs = load_any_paragraphs(o.cls_in);
    std::ofstream file(o.cls_out, std::ios::trunc);
    if (!file) throw IoError("cannot write '" + o.cls_out + "'");
    for (const auto& p : paragraphs) {
        auto j = to_json(classifier.predict_one(p.text));
        nlohmann::ordered_json row;
        row["para_id"] = p.para_id;
        row["main"] = j["main"];
        row["scores"] = j["scores"];
        file << row.dump() << '\n';
    }
    out << nlohmann::ordered_json{{"classified", paragraphs.size()}, {"out", o.cls_out}}.dump() << '\n';
    return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
    const auto cm = load_confusion_csv(o.report_cm);
    const auto report = evaluate_matrix(cm);
    if (o.report_text) {
        out << format_report(report);
    } else {
        out << to_json(report, o.report_decimals).dump(2) << '\n';
    }
    return 0;
}

int cmd_init_encoder(const Options& o, std::ostream& out) {
    const auto texts = paragraph_texts(o.enc_texts);
    if (texts.empty()) throw DataError("no texts to build a vocabulary from");
    init_encoder(o.enc_out, texts, o.enc_spec);
    out << nlohmann::ordered_json{{"encoder", o.enc_out}}.dump() << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"News frame annotation, training and evaluation", "frames"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_path, "application config JSON (default: $FRAMES_CONFIG)");

    auto* ingest = app.add_subcommand("ingest", "split documents into paragraph JSONL");
    ingest->add_option("--in", o.ingest_in, "documents (JSONL file or directory)")->required();
    ingest->add_option("--out", o.ingest_out, "paragraph JSONL to write")->required();
    ingest->add_option("--min-chars", o.min_chars, "shortest paragraph kept, in characters");
    ingest->add_flag("--translate", o.translate, "pass non-English documents through the identity translator");

    auto* sample = app.add_subcommand("sample", "draw a random subset of documents");
    sample->add_option("--in", o.sample_in)->required();
    sample->add_option("--out", o.sample_out)->required();
    sample->add_option("--n", o.sample_n)->required();
    sample->add_option("--seed", o.sample_seed)->required();

    auto* serve = app.add_subcommand("serve", "run the annotation and classification HTTP service");
    serve->add_option("--host", o.host);
    serve->add_option("--port", o.port)->check(CLI::Range(1, 65535));
    serve->add_option("--corpus", o.corpus, "paragraphs offered for labelling");
    serve->add_option("--annotations", o.annotations, "annotation store file");
    serve->add_option("--model", o.model, "trained model directory");

    auto* kappa = app.add_subcommand("kappa", "Cohen's kappa between two annotation files");
    kappa->add_option("--a", o.kappa_a)->required();
    kappa->add_option("--b", o.kappa_b)->required();
    kappa->add_option("--level", o.ci_level, "confidence level of the interval")->check(CLI::Range(0.5, 0.999));

    auto* stats = app.add_subcommand("stats", "main-frame counts of a dataset");
    stats->add_option("--data", o.stats_data)->required();

    auto* train = app.add_subcommand("train", "fine-tune a classifier");
    train->add_option("--config", o.train_config, "training config JSON");
    train->add_option("--train", o.train_data)->required();
    train->add_option("--eval", o.train_eval);
    train->add_option("--out", o.train_out)->required();
    train->add_option("--seed", o.train_seed);
    train->add_option("--encoder", o.train_encoder, "pretrained encoder id or directory");

    auto* cv = app.add_subcommand("cv", "k-fold cross-validation with pooled out-of-fold predictions");
    cv->add_option("--config", o.train_config, "training config JSON");
    cv->add_option("--data", o.cv_data)->required();
    cv->add_option("--out", o.cv_out)->required();
    cv->add_option("--k", o.cv_k)->check(CLI::Range(2, INT_MAX));
    cv->add_option("--seed", o.cv_seed);
    cv->add_flag("--stratified", o.cv_stratified);
    cv->add_flag("--no-heldout-log", o.cv_skip_heldout_log, "skip held-out metrics in the training logs");
    cv->add_option("--train-seed", o.train_seed);
    cv->add_option("--encoder", o.train_encoder);

    auto* evaluate = app.add_subcommand("evaluate", "score a trained model on a gold set");
    evaluate->add_option("--model", o.eval_model)->required();
    evaluate->add_option("--gold", o.eval_gold)->required();
    evaluate->add_option("--report", o.eval_report, "where to write the report JSON");

    auto* classify = app.add_subcommand("classify", "predict main frames for paragraphs");
    classify->add_option("--model", o.cls_model)->required();
    classify->add_option("--in", o.cls_in)->required();
    classify->add_option("--out", o.cls_out)->required();

    auto* report = app.add_subcommand("report", "classification report from a confusion matrix CSV");
    report->add_option("--cm", o.report_cm)->required();
    report->add_flag("--text", o.report_text, "fixed-width table instead of JSON");
    report->add_option("--decimals", o.report_decimals, "round JSON values for display")->check(CLI::Range(0, 15));

    auto* init_enc = app.add_subcommand("init-encoder", "create and pretrain a small encoder from unlabeled text");
    init_enc->add_option("--texts", o.enc_texts, "paragraph or dataset JSONL for the vocabulary")->required();
    init_enc->add_option("--out", o.enc_out)->required();
    init_enc->add_option("--hidden", o.enc_spec.hidden_size)->check(CLI::Range(1, 4096));
    init_enc->add_option("--layers", o.enc_spec.num_layers)->check(CLI::Range(1, 48));
    init_enc->add_option("--heads", o.enc_spec.num_heads)->check(CLI::Range(1, 64));
    init_enc->add_option("--intermediate", o.enc_spec.intermediate_size)->check(CLI::Range(1, 16384));
    init_enc->add_option("--max-positions", o.enc_spec.max_position_embeddings)->check(CLI::Range(2, 8192));
    init_enc->add_option("--vocab", o.enc_spec.vocab_limit);
    init_enc->add_option("--seed", o.enc_spec.seed);
    init_enc->add_option("--pretrain-epochs", o.enc_spec.pretrain.epochs, "label-free pretraining passes (0 skips)")
        ->check(CLI::Range(0, 1000));
    init_enc->add_option("--pretrain-lr", o.enc_spec.pretrain.learning_rate)->check(CLI::PositiveNumber);
    init_enc->add_option("--pretrain-batch", o.enc_spec.pretrain.batch_size)->check(CLI::Range(1, 4096));
    init_enc->add_option("--pretrain-seed", o.enc_spec.pretrain.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        std::optional<fs::path> config_path;
        if (o.config_path) config_path = *o.config_path;
        const auto app_config = load_app_config(config_path);
        if (ingest->parsed()) return cmd_ingest(o, out);
        if (sample->parsed()) return cmd_sample(o, out);
        if (serve->parsed()) return cmd_serve(o, app_config, out);
        if (kappa->parsed()) return cmd_kappa(o, out);
        if (stats->parsed()) return cmd_stats(o, out);
        if (train->parsed()) return cmd_train(o, app_config, out);
        if (cv->parsed()) return cmd_cv(o, app_config, out);
        if (evaluate->parsed()) return cmd_evaluate(o, out);
        if (classify->parsed()) return cmd_classify(o, out);
        if (report->parsed()) return cmd_report(o, out);
        if (init_enc->parsed()) return cmd_init_encoder(o, out);
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
    err << "error: usage: no subcommand\n";
    return 2;
}

}  // namespace frames
