#include "sparsevit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "sparsevit/errors.hpp"

namespace sparsevit {

void FeatureSet::push(std::span<const float> features, int label, std::string id) {
    if (dim == 0) dim = int(features.size());
    if (int(features.size()) != dim)
        throw ShapeError("FeatureSet: inconsistent feature dimension");
    data.insert(data.end(), features.begin(), features.end());
    labels.push_back(label);
    ids.push_back(std::move(id));
}

void FeatureSet::validate() const {
    if (data.size() != std::size_t(count()) * dim)
        throw ShapeError("FeatureSet: data size does not match count*dim");
    for (float v : data)
        if (!std::isfinite(v)) throw ValidationError("FeatureSet: non-finite entry");
}

int knn_classify(const FeatureSet& train, std::span<const float> query, int k) {
    if (train.count() == 0) throw ValidationError("knn_classify: empty train set");
    if (int(query.size()) != train.dim)
        throw ShapeError("knn_classify: query dimension mismatch");
    if (k < 1) throw ValidationError("knn_classify: k must be >= 1");
    const int kk = std::min(k, train.count());

    std::vector<std::pair<double, int>> dist(train.count());
    for (int i = 0; i < train.count(); ++i) {
        const auto row = train.row(i);
        double s = 0.0;
        for (int j = 0; j < train.dim; ++j) {
            const double diff = double(row[j]) - double(query[j]);
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());

    std::map<int, int> votes;  // ordered: vote ties resolve to the smallest label
    for (int t = 0; t < kk; ++t) ++votes[train.labels[dist[t].second]];
    int best_label = votes.begin()->first;
    int best_count = votes.begin()->second;
    for (const auto& [label, count] : votes) {
        if (count > best_count) {
            best_label = label;
            best_count = count;
        }
    }
    return best_label;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        int num_classes) {
    if (predictions.size() != labels.size())
        throw ShapeError("compute_metrics: length mismatch");
    if (labels.empty()) throw ValidationError("compute_metrics: empty inputs");
    if (num_classes < 1) throw ValidationError("compute_metrics: num_classes must be >= 1");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 ||
            predictions[i] >= num_classes)
            throw ValidationError("compute_metrics: class out of range");

    std::vector<std::uint64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0),
        support(num_classes, 0);
    std::uint64_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i];
        const int p = predictions[i];
        ++support[t];
        if (t == p) {
            ++tp[t];
            ++correct;
        } else {
            ++fp[p];
            ++fn[t];
        }
    }

    Metrics m;
    m.accuracy = double(correct) / double(labels.size());

    double recall_sum = 0.0;
    int present = 0;
    double f1_weighted = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        if (support[c] == 0) continue;
        ++present;
        const double recall = double(tp[c]) / double(tp[c] + fn[c]);
        recall_sum += recall;
        const double denom_p = double(tp[c] + fp[c]);
        const double precision = denom_p > 0.0 ? double(tp[c]) / denom_p : 0.0;
        const double f1 =
            precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        f1_weighted += double(support[c]) * f1;
    }
    m.balanced_accuracy = recall_sum / double(present);
    m.weighted_f1 = f1_weighted / double(labels.size());
    return m;
}

}  // namespace sparsevit
