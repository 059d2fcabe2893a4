#include "fedmae/param_vector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedmae/errors.hpp"

namespace fedmae {

void require_same_length(const ParamVector& x, const ParamVector& y, const char* where) {
    if (x.size() == 0 || x.size() != y.size()) {
        throw DimensionError(std::string(where) + ": length mismatch (" +
                             std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    }
}

void require_finite(const ParamVector& x, const std::string& context) {
    for (double v : x.values) {
        if (!std::isfinite(v)) {
            throw NumericError(context + ": non-finite element");
        }
    }
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
    require_same_length(x, y, "axpy");
    ParamVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = a * x[i] + y[i];
    }
    require_finite(out, "axpy");
    return out;
}

ParamVector weighted_mean(std::span<const ParamVector> vs, std::span<const double> ws) {
    if (vs.empty() || vs.size() != ws.size()) {
        throw std::invalid_argument("weighted_mean: need matching non-empty vectors and weights");
    }
    double total = 0.0;
    for (double w : ws) {
        if (!(w >= 0.0)) throw std::invalid_argument("weighted_mean: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weighted_mean: zero total weight");

    const std::size_t n = vs.front().size();
    if (n == 0) throw DimensionError("weighted_mean: empty vector");
    for (const ParamVector& v : vs) {
        require_same_length(vs.front(), v, "weighted_mean");
    }

    ParamVector out(n);
    for (std::size_t k = 0; k < vs.size(); ++k) {
        const double wn = ws[k] / total;
        if (wn == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] += wn * vs[k][i];
        }
    }
    require_finite(out, "weighted_mean");
    return out;
}

ParamVector elementwise(Elementwise op, const ParamVector& x, double c) {
    ParamVector out(x.size());
    switch (op) {
        case Elementwise::Square:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
            break;
        case Elementwise::Sqrt:
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] < 0.0) throw std::domain_error("elementwise: sqrt of negative element");
                out[i] = std::sqrt(x[i]);
            }
            break;
        case Elementwise::AddScalar:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + c;
            break;
    }
    require_finite(out, "elementwise");
    return out;
}

double l2_norm(const ParamVector& x) {
    double s = 0.0;
    for (double v : x.values) s += v * v;
    return std::sqrt(s);
}

double exact_delta(double base, double fin) {
    double d = fin - base;
    if (base + d == fin) return d;
    constexpr double inf = std::numeric_limits<double>::infinity();
    double lo = std::nextafter(d, -inf);
    if (base + lo == fin) return lo;
    double hi = std::nextafter(d, inf);
    if (base + hi == fin) return hi;
    return d;  // no representable delta reapplies exactly; keep the nearest
}

}  // namespace fedmae
