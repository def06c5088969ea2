#include "intrakd/metrics.hpp"

#include <algorithm>

#include "intrakd/errors.hpp"

namespace intrakd {

void ConfusionCounts::add(const ClassMap& pred, const ClassMap& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw ShapeError("metrics: prediction and ground truth extents differ");
    }
    const std::size_t n = classes();
    for (std::size_t p = 0; p < pred.size(); ++p) {
        const std::size_t a = pred.labels()[p], b = gt.labels()[p];
        if (a >= n || b >= n) throw IndexError("metrics: class index out of range");
        if (a == b) {
            ++tp_[a];
        } else {
            ++fp_[a];
            ++fn_[b];
        }
    }
}

IouResult ConfusionCounts::iou() const {
    const std::size_t n = classes();
    IouResult r{std::vector<double>(n, 0.0), std::vector<bool>(n, false), 0.0};
    std::size_t counted = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t uni = tp_[k] + fp_[k] + fn_[k];
        if (uni == 0) continue;
        r.included[k] = true;
        r.per_class[k] = static_cast<double>(tp_[k]) / static_cast<double>(uni);
        r.mean += r.per_class[k];
        ++counted;
    }
    if (counted) r.mean /= static_cast<double>(counted);
    return r;
}

F1Result ConfusionCounts::f1(std::size_t k) const {
    if (k >= classes()) throw IndexError("metrics: class index out of range");
    F1Result r;
    if (tp_[k] + fp_[k] + fn_[k] == 0) {
        r.precision = r.recall = r.f1 = 1.0;
        r.vacuous = true;
        return r;
    }
    if (tp_[k] + fp_[k] > 0) r.precision = static_cast<double>(tp_[k]) / static_cast<double>(tp_[k] + fp_[k]);
    if (tp_[k] + fn_[k] > 0) r.recall = static_cast<double>(tp_[k]) / static_cast<double>(tp_[k] + fn_[k]);
    if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

IouResult compute_miou(const ClassMap& pred, const ClassMap& gt, std::size_t n) {
    ConfusionCounts c(n);
    c.add(pred, gt);
    return c.iou();
}

F1Result compute_f1(const ClassMap& pred, const ClassMap& gt, std::size_t k) {
    ConfusionCounts c(std::max<std::size_t>(k + 1, std::max(pred.max_label(), gt.max_label()) + std::size_t{1}));
    c.add(pred, gt);
    return c.f1(k);
}

}  // namespace intrakd
