#include <numeric>

#include "frames/error.hpp"
#include "frames/evaluate.hpp"
#include "frames/rng.hpp"

namespace frames {

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (const auto& [_, fold] : assignments) ++sizes.at(static_cast<std::size_t>(fold));
    return sizes;
}

FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed, bool stratified) {
    if (k < 2) throw InputError("k must be at least 2, got " + std::to_string(k));
    if (static_cast<std::size_t>(k) > ds.size()) {
        throw InputError("k = " + std::to_string(k) + " exceeds the dataset size " + std::to_string(ds.size()));
    }
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.stratified = stratified;
    Rng rng(seed);

    std::size_t position = 0;
    auto deal = [&](std::span<std::size_t> members) {
        rng.shuffle(members);
        for (auto idx : members) {
            const auto& id = ds.records[idx].paragraph.para_id;
            if (!plan.assignments.emplace(id, static_cast<int>(position % static_cast<std::size_t>(k))).second) {
                throw InputError("para_id '" + id + "' appears twice");
            }
            ++position;
        }
    };

    if (!stratified) {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        deal(all);
    } else {
        std::array<std::vector<std::size_t>, kNumFrames> by_class;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            by_class[static_cast<std::size_t>(frame_index(ds.records[i].labels.main))].push_back(i);
        }
        for (auto& members : by_class) deal(members);
    }
    return plan;
}

}  // namespace frames
