#include <algorithm>
#include <set>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"

namespace frames {

CrossValidationResult cross_validate(const Dataset& ds, const FoldPlan& plan, const FoldTrainer& trainer) {
    if (plan.assignments.size() != ds.size()) throw InputError("fold plan does not cover the dataset");
    CrossValidationResult result;
    result.plan = plan;
    result.predictions.resize(ds.size());

    std::vector<int> fold_of(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto it = plan.assignments.find(ds.records[i].paragraph.para_id);
        if (it == plan.assignments.end()) {
            throw InputError("para_id '" + ds.records[i].paragraph.para_id + "' is not in the fold plan");
        }
        fold_of[i] = it->second;
    }

    for (int fold = 0; fold < plan.k; ++fold) {
        std::vector<LabeledParagraph> train, heldout;
        std::vector<std::size_t> heldout_index;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (fold_of[i] == fold) {
                heldout.push_back(ds.records[i]);
                heldout_index.push_back(i);
            } else {
                train.push_back(ds.records[i]);
            }
        }
        if (heldout.empty()) continue;
        const auto train_ds = make_dataset(std::move(train));
        const auto heldout_ds = make_dataset(std::move(heldout));
        const auto predictor = trainer(train_ds, heldout_ds, fold);
        if (!predictor) throw InputError("fold trainer returned no predictor");

        std::vector<std::string> texts;
        texts.reserve(heldout_ds.size());
        for (const auto& r : heldout_ds.records) texts.push_back(r.paragraph.text);
        const auto preds = predictor->predict_batch(texts);
        if (preds.size() != texts.size()) throw InputError("predictor returned the wrong number of predictions");
        for (std::size_t j = 0; j < preds.size(); ++j) {
            const auto i = heldout_index[j];
            auto& out = result.predictions[i];
            out.para_id = ds.records[i].paragraph.para_id;
            out.fold = fold;
            out.actual = ds.records[i].labels.main;
            out.prediction = preds[j];
            ++result.pooled.at(out.actual, out.prediction.main);
        }
    }
    result.report = evaluate_matrix(result.pooled);
    return result;
}

CrossValidationResult cross_validate(const Dataset& ds, int k, std::uint64_t seed, bool stratified,
                                     const FoldTrainer& trainer) {
    return cross_validate(ds, make_folds(ds, k, seed, stratified), trainer);
}

FoldTrainer fine_tune_trainer(const TrainingConfig& base, FineTuneTrainerOptions options) {
    return [base, options](const Dataset& train, const Dataset& heldout, int fold) -> std::unique_ptr<FramePredictor> {
        TrainingConfig config = base;
        config.output_dir = base.output_dir / ("fold-" + std::to_string(fold));
        const auto result = fine_tune(config, train, options.log_heldout_metrics ? heldout : Dataset{});
        return std::make_unique<Classifier>(Classifier::load(result.artifact.dir));
    };
}

EvalReport evaluate_gold(const FramePredictor& predictor, const Dataset& gold,
                         std::span<const std::string> training_doc_ids) {
    if (gold.empty()) throw InputError("gold set is empty");
    if (gold.split != DatasetSplit::gold) throw InputError("evaluation set is not tagged gold");
    const std::set<std::string> trained(training_doc_ids.begin(), training_doc_ids.end());
    LeakageReport leak;
    for (const auto& r : gold.records) {
        if (trained.contains(r.paragraph.doc_id)) leak.shared_doc_ids.push_back(r.paragraph.doc_id);
    }
    std::sort(leak.shared_doc_ids.begin(), leak.shared_doc_ids.end());
    leak.shared_doc_ids.erase(std::unique(leak.shared_doc_ids.begin(), leak.shared_doc_ids.end()),
                              leak.shared_doc_ids.end());
    require_no_leakage(leak);

    std::vector<std::string> texts;
    std::vector<FrameCode> truth;
    for (const auto& r : gold.records) {
        texts.push_back(r.paragraph.text);
        truth.push_back(r.labels.main);
    }
    const auto preds = predictor.predict_batch(texts);
    std::vector<FrameCode> predicted;
    for (const auto& p : preds) predicted.push_back(p.main);
    return evaluate_matrix(confusion(truth, predicted));
}

EvalReport evaluate_gold(const ModelArtifact& artifact, const Dataset& gold) {
    // Leakage is checked before the weights are read.
    if (!gold.empty()) {
        const std::set<std::string> trained(artifact.training_doc_ids.begin(), artifact.training_doc_ids.end());
        for (const auto& r : gold.records) {
            if (trained.contains(r.paragraph.doc_id)) {
                LeakageReport leak;
                leak.shared_doc_ids.push_back(r.paragraph.doc_id);
                require_no_leakage(leak);
            }
        }
    }
    const auto classifier = Classifier::load(artifact.dir);
    return evaluate_gold(classifier, gold, artifact.training_doc_ids);
}

}  // namespace frames
