#include "star/trainer/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "star/errors.hpp"

namespace star {

namespace {

void check_shapes(const Trajectories& pred, const Trajectories& truth, const Mask& valid, const char* what) {
    const bool ok = pred.x.rows() == pred.y.rows() && pred.x.cols() == pred.y.cols() &&
                    truth.x.rows() == pred.x.rows() && truth.x.cols() == pred.x.cols() &&
                    truth.y.rows() == pred.x.rows() && truth.y.cols() == pred.x.cols() &&
                    valid.rows() == pred.x.rows() && valid.cols() == pred.x.cols();
    if (!ok)
        throw DimensionError(std::string(what) + ": prediction " + std::to_string(pred.x.rows()) + "x" +
                             std::to_string(pred.x.cols()) + ", truth " + std::to_string(truth.x.rows()) + "x" +
                             std::to_string(truth.x.cols()) + ", mask " + std::to_string(valid.rows()) + "x" +
                             std::to_string(valid.cols()));
}

} // namespace

double ade(const Trajectories& pred, const Trajectories& truth, const Mask& valid, bool squared) {
    check_shapes(pred, truth, valid, "ade");
    const Eigen::ArrayXXd dx = pred.x.array() - truth.x.array();
    const Eigen::ArrayXXd dy = pred.y.array() - truth.y.array();
    Eigen::ArrayXXd err = dx.square() + dy.square();
    if (!squared) err = err.sqrt();
    const Index count = valid.count();
    if (count == 0) throw DataError("ade: no valid entries");
    return valid.select(err, 0.0).sum() / static_cast<double>(count);
}

double fde(const Trajectories& pred, const Trajectories& truth, const Mask& valid) {
    check_shapes(pred, truth, valid, "fde");
    if (pred.x.cols() == 0) throw DataError("fde: no steps");
    const Index last = pred.x.cols() - 1;
    double total = 0.0;
    Index count = 0;
    for (Index i = 0; i < pred.x.rows(); ++i) {
        if (!valid(i, last)) continue;
        total += std::hypot(pred.x(i, last) - truth.x(i, last), pred.y(i, last) - truth.y(i, last));
        ++count;
    }
    if (count == 0) throw DataError("fde: no valid pedestrians at the final step");
    return total / static_cast<double>(count);
}

BestOfK best_of_k(std::span<const SampleMetrics> samples, BestOfKPairing pairing) {
    if (samples.empty()) throw ConfigError("best_of_k: need at least one sample");
    BestOfK best{samples[0].ade, samples[0].fde, 0};
    double min_fde = samples[0].fde;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        if (samples[k].ade < best.ade) best = {samples[k].ade, samples[k].fde, k};
        min_fde = std::min(min_fde, samples[k].fde);
    }
    if (pairing == BestOfKPairing::independent) best.fde = min_fde;
    return best;
}

} // namespace star
