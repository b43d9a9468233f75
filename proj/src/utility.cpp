#include "sshape/utility.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>

namespace sshape {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double PowerUtility::value(double z) const { return z <= 0.0 ? 0.0 : coef * std::pow(z, p); }
double PowerUtility::deriv(double z) const { return z <= 0.0 ? kInf : coef * p * std::pow(z, p - 1.0); }
double PowerUtility::second(double z) const {
    return z <= 0.0 ? -kInf : coef * p * (p - 1.0) * std::pow(z, p - 2.0);
}
double PowerUtility::inverse_deriv(double y) const { return std::pow(y / (coef * p), 1.0 / (p - 1.0)); }
double PowerUtility::conjugate(double y) const {
    const double z = inverse_deriv(y);
    return value(z) - z * y;
}

double LogUtility::value(double z) const { return coef * std::log1p(z); }
double LogUtility::deriv(double z) const { return coef / (1.0 + z); }

double UtilitySpec::u2_value(double z) const {
    return std::visit([z](const auto& u) { return u.value(z); }, u2);
}
double UtilitySpec::u2_deriv(double z) const {
    return std::visit([z](const auto& u) { return u.deriv(z); }, u2);
}
bool UtilitySpec::scalable() const {
    const auto* pw = std::get_if<PowerUtility>(&u2);
    return pw != nullptr && pw->p == u1.p;
}
double UtilitySpec::loss_scale() const {
    return std::visit([](const auto& u) { return u.coef; }, u2);
}
void UtilitySpec::validate() const {
    if (!(u1.p > 0.0 && u1.p < 1.0)) throw std::invalid_argument("utility: u1 exponent must lie in (0,1)");
    if (!(u1.coef > 0.0)) throw std::invalid_argument("utility: u1 coefficient must be > 0");
    if (loss_scale() < 0.0) throw std::invalid_argument("utility: u2 coefficient must be >= 0");
    if (const auto* pw = std::get_if<PowerUtility>(&u2); pw && !(pw->p > 0.0 && pw->p < 1.0))
        throw std::invalid_argument("utility: u2 exponent must lie in (0,1)");
}

UtilitySpec UtilitySpec::power_pair(double p, double K, double coef) {
    return UtilitySpec{PowerUtility{coef, p}, PowerUtility{K, p}};
}
UtilitySpec UtilitySpec::log_pair(double p, double log_coef, double coef) {
    return UtilitySpec{PowerUtility{coef, p}, LogUtility{log_coef}};
}

double s_utility(double z, const UtilitySpec& spec) {
    return z >= 0.0 ? spec.u1.value(z) : -spec.u2_value(-z);
}

double tangency_residual(double eta, double r, const UtilitySpec& spec) {
    const double w = eta - r;
    return spec.u1.value(w) + spec.u2_value(r) - eta * spec.u1.deriv(w);
}

double solve_eta(double r, const UtilitySpec& spec) {
    if (r < 0.0) throw std::invalid_argument("solve_eta: r must be >= 0");
    if (r == 0.0) return 0.0;
    // Residual in the gap w = eta - r runs from -inf (U1'(0+) = inf) to +inf.
    auto f = [&](double w) { return tangency_residual(r + w, r, spec); };
    double lo = 1e-12, hi = 1.0;
    int doublings = 0;
    while (f(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) throw std::runtime_error("solve_eta: no sign change, unsupported utility pair");
    }
    while (f(lo) > 0.0) {
        lo *= 0.5;
        if (lo < 1e-300) throw std::runtime_error("solve_eta: no sign change near zero");
    }
    for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    const double w_lo = lo, w_hi = hi;
    return r + (std::abs(f(w_lo)) < std::abs(f(w_hi)) ? w_lo : w_hi);
}

struct ConcaveEnvelope::EtaCache {
    static constexpr std::size_t kMaxEntries = 1 << 16;
    std::shared_mutex mutex;
    std::unordered_map<double, double> values;
};

ConcaveEnvelope::ConcaveEnvelope(UtilitySpec spec) : spec_(spec), cache_(std::make_shared<EtaCache>()) {
    spec_.validate();
    if (spec_.scalable()) {
        const double c = spec_.u1.coef, K = spec_.loss_scale();
        if (spec_.u1.p == 0.5) {
            // c s + 2 K sqrt(s) - c = 0 in s = (eta - r) / r
            const double root = (-K + std::sqrt(K * K + c * c)) / c;
            scaled_gap_ = root * root;
        } else {
            scaled_gap_ = solve_eta(1.0, spec_) - 1.0;
        }
    }
}

double ConcaveEnvelope::eta(double r) const {
    if (r <= 0.0) return 0.0;
    if (scaled_gap_ >= 0.0) return r * (1.0 + scaled_gap_);
    {
        std::shared_lock lock(cache_->mutex);
        if (auto it = cache_->values.find(r); it != cache_->values.end()) return it->second;
    }
    const double value = solve_eta(r, spec_);
    std::unique_lock lock(cache_->mutex);
    if (cache_->values.size() >= EtaCache::kMaxEntries) cache_->values.clear();
    cache_->values.emplace(r, value);
    return value;
}

double ConcaveEnvelope::slope(double r) const {
    if (r <= 0.0) return kInf;
    return spec_.u1.deriv(eta(r) - r);
}

double ConcaveEnvelope::u_bar(double x, double r) const {
    if (r <= 0.0) return spec_.u1.value(x);
    const double e = eta(r);
    if (x < e) return -spec_.u2_value(r) + x * spec_.u1.deriv(e - r);
    return spec_.u1.value(x - r);
}

double ConcaveEnvelope::u_bar_x(double x, double r) const {
    if (r <= 0.0) return spec_.u1.deriv(x);
    const double e = eta(r);
    return x < e ? spec_.u1.deriv(e - r) : spec_.u1.deriv(x - r);
}

double ConcaveEnvelope::u_bar_xx(double x, double r) const {
    if (r <= 0.0) return spec_.u1.second(x);
    const double e = eta(r);
    return x < e ? 0.0 : spec_.u1.second(x - r);
}

double u_bar(double x, double r, const ConcaveEnvelope& envelope) { return envelope.u_bar(x, r); }

double DualUtility::value(double y, double r) const {
    if (!(y > 0.0)) throw std::invalid_argument("dual_utility: y must be > 0");
    if (y <= threshold(r)) return envelope_.spec().u1.conjugate(y) - r * y;
    return -envelope_.spec().u2_value(r);
}

double DualUtility::dy(double y, double r) const {
    if (!(y > 0.0)) throw std::invalid_argument("dual_utility_dy: y must be > 0");
    if (y <= threshold(r)) return -envelope_.spec().u1.inverse_deriv(y) - r;
    return 0.0;
}

double dual_utility(double y, double r, const DualUtility& dual) { return dual.value(y, r); }
double dual_utility_dy(double y, double r, const DualUtility& dual) { return dual.dy(y, r); }

}  // namespace sshape
