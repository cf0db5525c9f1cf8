#pragma once

#include <span>
#include <string>
#include <vector>

namespace sparsevit {

struct FeatureSet {
    int dim = 0;
    std::vector<float> data;  // row-major, count() x dim
    std::vector<int> labels;
    std::vector<std::string> ids;  // optional; not serialized in binary form

    int count() const { return int(labels.size()); }
    std::span<const float> row(int i) const {
        return {data.data() + std::size_t(i) * dim, std::size_t(dim)};
    }
    void push(std::span<const float> features, int label, std::string id = {});
    void validate() const;
};

// Majority vote among the k nearest train rows by Euclidean distance.
// Distance ties keep the lower row index; vote ties pick the smallest
// class label. k is clamped to the train size.
int knn_classify(const FeatureSet& train, std::span<const float> query, int k = 20);

struct Metrics {
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;  // mean recall over classes present in labels
    double weighted_f1 = 0.0;        // support-weighted mean of per-class F1
};

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        int num_classes);

}  // namespace sparsevit
