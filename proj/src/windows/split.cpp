#include <algorithm>
#include <array>
#include <map>
#include <numeric>

#include "pcgl/substrate/rng.h"
#include "pcgl/windows/windows.h"

namespace pcgl::windows {

namespace {

using substrate::make_rng;

constexpr std::array<double, 3> kRatios{0.6, 0.2, 0.2};

// Floor allocation, remainder to the largest fractional parts; ties resolve
// toward the earlier split (train, then val, then test).
std::array<int, 3> largest_remainder(int n, const std::array<double, 3>& ratios) {
    std::array<int, 3> alloc{};
    std::array<double, 3> frac{};
    int used = 0;
    for (int i = 0; i < 3; ++i) {
        const double ideal = n * ratios[static_cast<std::size_t>(i)];
        alloc[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(ideal));
        frac[static_cast<std::size_t>(i)] = ideal - alloc[static_cast<std::size_t>(i)];
        used += alloc[static_cast<std::size_t>(i)];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
    });
    for (int j = 0; j < n - used; ++j) ++alloc[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    return alloc;
}

}  // namespace

SplitAssignment split_patients(const corpus::Manifest& manifest, std::uint64_t seed) {
    std::map<std::string, int> patient_label;  // positive if any recording positive
    for (const auto& e : manifest.entries) patient_label[e.patient_id] |= e.label;
    const int n = static_cast<int>(patient_label.size());
    PCGL_CHECK(n >= 5, "split: " << n << " patients, need at least 5 to fill each split");

    std::vector<std::string> pos, neg;
    for (const auto& [pid, lab] : patient_label) (lab ? pos : neg).push_back(pid);

    const auto totals = largest_remainder(n, kRatios);
    for (int c : totals) PCGL_CHECK(c >= 1, "split: a split would be empty with " << n
                                                                                  << " patients");

    // Positives allocated proportionally to split sizes, then clipped to
    // capacity; negatives fill the remainder.
    const auto n_pos = static_cast<int>(pos.size());
    std::array<double, 3> pos_ratios{};
    for (int i = 0; i < 3; ++i)
        pos_ratios[static_cast<std::size_t>(i)] =
            static_cast<double>(totals[static_cast<std::size_t>(i)]) / n;
    auto pos_alloc = largest_remainder(n_pos, pos_ratios);
    for (int i = 0; i < 3; ++i) {
        const auto iz = static_cast<std::size_t>(i);
        if (pos_alloc[iz] > totals[iz]) {
            int excess = pos_alloc[iz] - totals[iz];
            pos_alloc[iz] = totals[iz];
            for (int j = 0; j < 3 && excess > 0; ++j) {
                const auto jz = static_cast<std::size_t>(j);
                const int room = totals[jz] - pos_alloc[jz];
                const int move = std::min(room, excess);
                pos_alloc[jz] += move;
                excess -= move;
            }
        }
    }
    std::array<int, 3> neg_alloc{};
    for (int i = 0; i < 3; ++i) {
        const auto iz = static_cast<std::size_t>(i);
        neg_alloc[iz] = totals[iz] - pos_alloc[iz];
        PCGL_CHECK(neg_alloc[iz] >= 0, "split: internal allocation error");
    }

    auto rng_pos = make_rng(seed, "split-pos");
    auto rng_neg = make_rng(seed, "split-neg");
    std::shuffle(pos.begin(), pos.end(), rng_pos);
    std::shuffle(neg.begin(), neg.end(), rng_neg);

    SplitAssignment out;
    auto take = [](std::vector<std::string>& src, int k, std::vector<std::string>& dst) {
        dst.insert(dst.end(), src.begin(), src.begin() + k);
        src.erase(src.begin(), src.begin() + k);
    };
    take(pos, pos_alloc[0], out.train);
    take(pos, pos_alloc[1], out.val);
    take(pos, pos_alloc[2], out.test);
    const auto pos_in_train = static_cast<double>(pos_alloc[0]);
    const auto pos_in_val = static_cast<double>(pos_alloc[1]);
    const auto pos_in_test = static_cast<double>(pos_alloc[2]);
    take(neg, neg_alloc[0], out.train);
    take(neg, neg_alloc[1], out.val);
    take(neg, neg_alloc[2], out.test);

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    out.train_prevalence = pos_in_train / static_cast<double>(out.train.size());
    out.val_prevalence = pos_in_val / static_cast<double>(out.val.size());
    out.test_prevalence = pos_in_test / static_cast<double>(out.test.size());
    return out;
}

std::vector<std::pair<int, views::AugmentationRecipe>> oversample_minority(
    const std::vector<Window>& train_windows, std::uint64_t seed) {
    std::vector<int> pos_idx, neg_idx;
    for (int i = 0; i < static_cast<int>(train_windows.size()); ++i)
        (train_windows[static_cast<std::size_t>(i)].label ? pos_idx : neg_idx).push_back(i);
    PCGL_CHECK(!pos_idx.empty() && !neg_idx.empty(),
               "oversample: training split has a single class");

    const auto& minority = pos_idx.size() < neg_idx.size() ? pos_idx : neg_idx;
    const auto need = static_cast<int>(
        pos_idx.size() < neg_idx.size() ? neg_idx.size() - pos_idx.size()
                                        : pos_idx.size() - neg_idx.size());
    std::vector<std::pair<int, views::AugmentationRecipe>> plan;
    plan.reserve(static_cast<std::size_t>(need));
    auto rng = make_rng(seed, "oversample");
    std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
    for (int k = 0; k < need; ++k)
        plan.emplace_back(minority[pick(rng)], views::sample_recipe(rng));
    return plan;
}

Episode make_episode(const std::vector<std::pair<int, int>>& batch, int k_shot,
                     std::uint64_t seed) {
    PCGL_CHECK(k_shot >= 1, "episode: k_shot " << k_shot);
    std::map<int, std::vector<std::pair<int, int>>> by_class;
    for (const auto& e : batch) by_class[e.second].push_back(e);
    Episode out;
    for (auto& [label, members] : by_class) {
        PCGL_CHECK(members.size() >= 2,
                   "episode: class " << label << " has " << members.size()
                                     << " member(s), need at least 2");
        auto rng = make_rng(seed, "episode", static_cast<std::uint64_t>(label));
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_support = std::min(static_cast<std::size_t>(k_shot), members.size() / 2);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_support ? out.support : out.query).push_back(members[i]);
    }
    return out;
}

}  // namespace pcgl::windows
