#include "pathwatch/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pathwatch {

void SearchSpace::validate() const {
    if (params.empty()) throw EmptySpaceError("search space has no parameters");
    for (const auto& p : params) {
        if (!(p.lo < p.hi)) throw InvalidConfigError(p.name + ": lo must be < hi");
        if (p.kind == ParamSpec::Kind::kQuantized) {
            if (!(p.step > 0)) throw InvalidConfigError(p.name + ": step must be > 0");
            double ratio = (p.hi - p.lo) / p.step;
            if (std::abs(ratio - std::round(ratio)) > 1e-9) {
                throw InvalidConfigError(p.name + ": step must divide (hi - lo)");
            }
        }
    }
}

double SearchSpace::snap(std::size_t param, double value) const {
    const ParamSpec& p = params[param];
    value = std::clamp(value, p.lo, p.hi);
    if (p.kind == ParamSpec::Kind::kQuantized) {
        double k = std::round((value - p.lo) / p.step);
        value = std::clamp(p.lo + k * p.step, p.lo, p.hi);
    }
    return value;
}

bool SearchSpace::contains(const std::vector<double>& point) const {
    if (point.size() != params.size()) return false;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamSpec& p = params[i];
        if (point[i] < p.lo - 1e-12 || point[i] > p.hi + 1e-12) return false;
        if (p.kind == ParamSpec::Kind::kQuantized) {
            double k = (point[i] - p.lo) / p.step;
            if (std::abs(k - std::round(k)) > 1e-6) return false;
        }
    }
    return true;
}

const Trial* TrialHistory::best() const {
    const Trial* best = nullptr;
    for (const auto& t : trials) {
        if (t.ok && (best == nullptr || t.value > best->value)) best = &t;
    }
    return best;
}

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// Acklam's rational approximation of the inverse normal CDF; accurate to
// ~1e-9, plenty for sampling.
double normal_quantile(double p) {
    if (p <= 0) return -std::numeric_limits<double>::infinity();
    if (p >= 1) return std::numeric_limits<double>::infinity();
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r;
    if (p < p_low) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p <= 1 - p_low) {
        q = p - 0.5;
        r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

// Per-parameter kernel density estimate: equally weighted Gaussian kernels
// truncated to [lo, hi].
struct Kde {
    std::vector<double> centers;
    double bandwidth = 1.0;
    double lo = 0;
    double hi = 1;

    static Kde fit(std::vector<double> values, double lo, double hi) {
        Kde kde;
        kde.lo = lo;
        kde.hi = hi;
        kde.centers = std::move(values);
        const double n = static_cast<double>(kde.centers.size());
        double mean = std::accumulate(kde.centers.begin(), kde.centers.end(), 0.0) / n;
        double var = 0;
        for (double v : kde.centers) var += (v - mean) * (v - mean);
        var /= n;
        double sigma = std::sqrt(var);
        // Silverman-style bandwidth, floored so constant sets stay usable.
        kde.bandwidth = 1.06 * sigma * std::pow(n, -0.2);
        kde.bandwidth = std::max(kde.bandwidth, 1e-3 * (hi - lo));
        return kde;
    }

    double log_density(double x) const {
        double acc = 0;
        const double inv = 1.0 / bandwidth;
        for (double mu : centers) {
            double z = (x - mu) * inv;
            double mass =
                normal_cdf((hi - mu) * inv) - normal_cdf((lo - mu) * inv);
            if (mass < 1e-12) mass = 1e-12;
            acc += std::exp(-0.5 * z * z) / mass;
        }
        acc /= (static_cast<double>(centers.size()) * bandwidth * std::sqrt(2.0 * M_PI));
        return std::log(std::max(acc, 1e-300));
    }

    /// Inverse-CDF draw from one kernel truncated to [lo, hi].
    double sample(std::mt19937_64& rng) const {
        std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
        double mu = centers[pick(rng)];
        double a = normal_cdf((lo - mu) / bandwidth);
        double b = normal_cdf((hi - mu) / bandwidth);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double u = a + unit(rng) * (b - a);
        double x = mu + bandwidth * normal_quantile(u);
        return std::clamp(x, lo, hi);
    }
};

std::vector<double> prior_sample(const SearchSpace& space, std::mt19937_64& rng) {
    std::vector<double> point(space.params.size());
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        std::uniform_real_distribution<double> unit(space.params[i].lo,
                                                    space.params[i].hi);
        point[i] = space.snap(i, unit(rng));
    }
    return point;
}

}  // namespace

std::vector<double> suggest(const TrialHistory& history, const SearchSpace& space,
                            std::mt19937_64& rng, const TpeOptions& options) {
    space.validate();
    if (!(options.gamma > 0 && options.gamma < 1)) {
        throw InvalidConfigError("tpe gamma must lie in (0,1)");
    }

    std::vector<const Trial*> successes;
    std::vector<const Trial*> failures;
    for (const auto& t : history.trials) {
        (t.ok ? successes : failures).push_back(&t);
    }
    if (successes.size() < static_cast<std::size_t>(options.n_startup)) {
        return prior_sample(space, rng);
    }

    // Split at the gamma-quantile of objective values (maximizing): the top
    // ceil(gamma * n) successful trials are "good", the rest plus every
    // failed trial are "bad".
    std::vector<const Trial*> ranked = successes;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Trial* a, const Trial* b) { return a->value > b->value; });
    std::size_t n_good = static_cast<std::size_t>(
        std::ceil(options.gamma * static_cast<double>(ranked.size())));
    n_good = std::clamp<std::size_t>(n_good, 1, ranked.size() - 1);
    std::vector<const Trial*> good(ranked.begin(),
                                   ranked.begin() + static_cast<std::ptrdiff_t>(n_good));
    std::vector<const Trial*> bad(ranked.begin() + static_cast<std::ptrdiff_t>(n_good),
                                  ranked.end());
    bad.insert(bad.end(), failures.begin(), failures.end());
    if (bad.empty()) return prior_sample(space, rng);

    const std::size_t dims = space.params.size();
    std::vector<Kde> good_kde, bad_kde;
    good_kde.reserve(dims);
    bad_kde.reserve(dims);
    for (std::size_t i = 0; i < dims; ++i) {
        std::vector<double> good_values, bad_values;
        for (const Trial* t : good) good_values.push_back(t->point[i]);
        for (const Trial* t : bad) bad_values.push_back(t->point[i]);
        good_kde.push_back(
            Kde::fit(std::move(good_values), space.params[i].lo, space.params[i].hi));
        bad_kde.push_back(
            Kde::fit(std::move(bad_values), space.params[i].lo, space.params[i].hi));
    }

    std::vector<double> best_point;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < options.n_candidates; ++c) {
        std::vector<double> candidate(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            candidate[i] = space.snap(i, good_kde[i].sample(rng));
        }
        double score = 0;
        for (std::size_t i = 0; i < dims; ++i) {
            score += good_kde[i].log_density(candidate[i]) -
                     bad_kde[i].log_density(candidate[i]);
        }
        if (score > best_score) {
            best_score = score;
            best_point = std::move(candidate);
        }
    }
    return best_point;
}

OptimizeResult optimize_from(
    const std::function<double(const std::vector<double>&)>& objective,
    const SearchSpace& space, int n_trials, TrialHistory history,
    const TpeOptions& options) {
    if (n_trials < 1) throw InvalidConfigError("optimize: n_trials must be >= 1");
    space.validate();

    std::mt19937_64 rng(history.seed);
    if (!history.rng_state.empty()) {
        std::istringstream in(history.rng_state);
        in >> rng;
        if (!in) throw CorruptEncodingError("trial history: bad RNG state");
    }

    while (history.trials.size() < static_cast<std::size_t>(n_trials)) {
        Trial trial;
        trial.point = suggest(history, space, rng, options);
        try {
            trial.value = objective(trial.point);
            trial.ok = std::isfinite(trial.value);
        } catch (const std::exception&) {
            trial.ok = false;
        }
        if (!trial.ok) trial.value = -std::numeric_limits<double>::infinity();
        history.trials.push_back(std::move(trial));
    }
    std::ostringstream state;
    state << rng;
    history.rng_state = state.str();

    const Trial* best = history.best();
    if (best == nullptr) throw Error("optimize: every trial failed");
    OptimizeResult result;
    result.best_point = best->point;
    result.best_value = best->value;
    result.history = std::move(history);
    return result;
}

OptimizeResult optimize(const std::function<double(const std::vector<double>&)>& objective,
                        const SearchSpace& space, int n_trials, std::uint64_t seed,
                        const TpeOptions& options) {
    TrialHistory fresh;
    fresh.seed = seed;
    return optimize_from(objective, space, n_trials, std::move(fresh), options);
}

SearchSpace meta_search_space() {
    using Kind = ParamSpec::Kind;
    SearchSpace space;
    space.params = {
        {"n_estimators", Kind::kQuantized, 100, 5000, 100},
        {"learning_rate", Kind::kUniform, 0.001, 0.05, 0},
        {"max_leaves", Kind::kQuantized, 10, 80, 2},
        {"max_depth", Kind::kQuantized, 3, 10, 1},
        {"feature_fraction", Kind::kUniform, 0.6, 0.9, 0},
        {"bagging_fraction", Kind::kUniform, 0.6, 0.9, 0},
        {"l1", Kind::kUniform, 0.1, 10.0, 0},
        {"l2", Kind::kUniform, 0.1, 10.0, 0},
    };
    return space;
}

std::string history_to_jsonl(const TrialHistory& history) {
    std::string out;
    for (const auto& t : history.trials) {
        nlohmann::json j;
        j["point"] = t.point;
        j["ok"] = t.ok;
        j["value"] = t.ok ? t.value : 0.0;
        out += j.dump();
        out += '\n';
    }
    nlohmann::json tail;
    tail["seed"] = history.seed;
    tail["rng_state"] = history.rng_state;
    out += tail.dump();
    out += '\n';
    return out;
}

TrialHistory history_from_jsonl(std::string_view text) {
    TrialHistory history;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorruptEncodingError(std::string("trial history: ") + e.what());
        }
        if (j.contains("rng_state")) {
            history.seed = j.at("seed").get<std::uint64_t>();
            history.rng_state = j.at("rng_state").get<std::string>();
            continue;
        }
        Trial t;
        t.point = j.at("point").get<std::vector<double>>();
        t.ok = j.at("ok").get<bool>();
        t.value = t.ok ? j.at("value").get<double>()
                       : -std::numeric_limits<double>::infinity();
        history.trials.push_back(std::move(t));
    }
    return history;
}

}  // namespace pathwatch
