#include "pathwatch/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pathwatch {

Metrics classification_metrics(std::span<const int> decisions, std::span<const int> y) {
    if (decisions.size() != y.size()) {
        throw DataError("classification_metrics: length mismatch");
    }
    Metrics m;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (decisions[i] == 1) {
            (y[i] == 1 ? m.counts.tp : m.counts.fp)++;
        } else {
            (y[i] == 1 ? m.counts.fn : m.counts.tn)++;
        }
    }
    const auto& c = m.counts;
    m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    const double n = static_cast<double>(y.size());
    m.accuracy = n > 0 ? static_cast<double>(c.tp + c.tn) / n : 0.0;
    return m;
}

double f1_at_threshold(std::span<const double> probs, std::span<const int> y, double tau) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        bool decision = probs[i] >= tau;
        if (decision && y[i] == 1) ++tp;
        else if (decision) ++fp;
        else if (y[i] == 1) ++fn;
    }
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) /
           static_cast<double>(2 * tp + fp + fn);
}

ThresholdScanResult threshold_scan(std::span<const double> probs,
                                   std::span<const int> y, double grid_step) {
    if (probs.size() != y.size()) throw DataError("threshold_scan: length mismatch");
    if (!(grid_step > 0 && grid_step <= 1)) throw DataError("grid_step must be in (0,1]");
    std::int64_t total_pos = 0;
    for (int label : y) total_pos += label;
    if (total_pos == 0 || total_pos == static_cast<std::int64_t>(y.size())) {
        throw SingleClassError("threshold_scan requires both classes");
    }

    // Sort probabilities descending once; sweep the grid from 1 down to 0 so
    // the predicted-positive set only grows.
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

    // When 1/step is integral, form grid points by division so decimals like
    // 0.35 land on the same double a parsed probability does.
    const double inv = std::round(1.0 / grid_step);
    const bool exact_grid = std::abs(inv * grid_step - 1.0) < 1e-9;
    const auto n_steps = exact_grid
                             ? static_cast<std::int64_t>(inv)
                             : static_cast<std::int64_t>(std::floor(1.0 / grid_step));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n_steps) + 2);
    for (std::int64_t i = 0; i <= n_steps; ++i) {
        grid.push_back(exact_grid ? static_cast<double>(i) / inv
                                  : static_cast<double>(i) * grid_step);
    }
    if (grid.back() < 1.0) grid.push_back(1.0);

    double best_f1 = -1;
    double best_tau = 1.0;
    std::size_t ptr = 0;
    std::int64_t tp = 0, fp = 0;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        const double tau = *it;
        while (ptr < order.size() && probs[order[ptr]] >= tau) {
            (y[order[ptr]] == 1 ? tp : fp)++;
            ++ptr;
        }
        double f1 = tp == 0 ? 0.0
                            : 2.0 * static_cast<double>(tp) /
                                  static_cast<double>(tp + fp + total_pos);
        // >= so that the smallest tau wins on ties (tau decreases over the sweep).
        if (f1 >= best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return {best_tau, best_f1};
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Exact two-sided p-value over all 2^n sign assignments, computed through
// the signed-rank sum distribution. Ranks are doubled so average ranks stay
// integral.
double exact_two_sided_p(const std::vector<double>& ranks, double w_plus) {
    int scaled_total = 0;
    std::vector<int> scaled;
    scaled.reserve(ranks.size());
    for (double r : ranks) {
        int s = static_cast<int>(std::llround(2.0 * r));
        scaled.push_back(s);
        scaled_total += s;
    }
    // dist[s] = number of sign assignments with doubled rank-sum s.
    std::vector<double> dist(static_cast<std::size_t>(scaled_total) + 1, 0.0);
    dist[0] = 1.0;
    int upper = 0;
    for (int s : scaled) {
        upper += s;
        for (int v = upper; v >= s; --v) {
            dist[static_cast<std::size_t>(v)] += dist[static_cast<std::size_t>(v - s)];
        }
    }
    const double mean = static_cast<double>(scaled_total) / 2.0;
    const double observed = std::abs(2.0 * w_plus - mean);
    double count = 0, total = 0;
    for (std::size_t v = 0; v < dist.size(); ++v) {
        total += dist[v];
        if (std::abs(static_cast<double>(v) - mean) >= observed - 1e-9) count += dist[v];
    }
    return count / total;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        throw AllZeroDifferencesError("wilcoxon: all paired differences are zero");
    }
    if (diffs.size() < 5) {
        throw DataError("wilcoxon: need at least 5 nonzero differences");
    }

    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::abs(diffs[x]) < std::abs(diffs[y]);
    });

    // Average ranks for tied absolute differences; collect tie-group sizes
    // for the variance correction.
    std::vector<double> ranks(n, 0.0);
    std::vector<std::size_t> tie_sizes;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
            ++j;
        }
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
        tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }

    double w_plus = 0, w_minus = 0;
    for (std::size_t k = 0; k < n; ++k) {
        (diffs[k] > 0 ? w_plus : w_minus) += ranks[k];
    }

    WilcoxonResult result;
    result.statistic = std::min(w_plus, w_minus);
    result.n = static_cast<int>(n);

    if (n <= 25) {
        result.exact = true;
        result.p_value = exact_two_sided_p(ranks, w_plus);
    } else {
        const double dn = static_cast<double>(n);
        const double mean = dn * (dn + 1.0) / 4.0;
        double tie_term = 0;
        for (std::size_t t : tie_sizes) {
            double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        double variance = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
        if (variance <= 0) {
            result.p_value = 1.0;
            return result;
        }
        // Continuity correction toward the mean; statistic is the min sum.
        double z = (result.statistic - mean + 0.5) / std::sqrt(variance);
        result.p_value = std::min(1.0, 2.0 * normal_cdf(z));
    }
    return result;
}

}  // namespace pathwatch
