#pragma once

#include <cstddef>
#include <vector>

#include "intrakd/tensor.hpp"

namespace intrakd {

struct IouResult {
    std::vector<double> per_class;
    /// false for classes absent from both prediction and ground truth; those
    /// are left out of the mean.
    std::vector<bool> included;
    double mean = 0.0;
};

struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Class absent from both prediction and ground truth: scores are 1 by
    /// convention and flagged here.
    bool vacuous = false;
};

/// Pixel counts per class, accumulated over any number of map pairs.
class ConfusionCounts {
public:
    explicit ConfusionCounts(std::size_t n) : tp_(n), fp_(n), fn_(n) {}

    void add(const ClassMap& pred, const ClassMap& gt);

    std::size_t classes() const { return tp_.size(); }
    IouResult iou() const;
    F1Result f1(std::size_t k) const;

private:
    std::vector<std::size_t> tp_, fp_, fn_;
};

IouResult compute_miou(const ClassMap& pred, const ClassMap& gt, std::size_t n);
F1Result compute_f1(const ClassMap& pred, const ClassMap& gt, std::size_t k);

}  // namespace intrakd
