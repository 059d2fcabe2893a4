#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedmae/checksum.hpp"

namespace fedmae {

// Flat vector of model parameters; the unit every node exchanges.
// All arithmetic is double precision and summations run in a fixed
// left-to-right order over node-id-sorted inputs, so a run is reproducible
// regardless of scheduling.
struct ParamVector {
    std::vector<double> values;

    ParamVector() = default;
    explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const ParamVector& a, const ParamVector& b) = default;
};

// Throws DimensionError unless both lengths match and are positive.
void require_same_length(const ParamVector& x, const ParamVector& y, const char* where);

// Throws NumericError if any element is NaN/Inf. `context` lands in the message.
void require_finite(const ParamVector& x, const std::string& context);

// a*x + y, inputs untouched.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

// (sum_i w_i v_i) / (sum_i w_i). Weights are normalized before accumulation,
// which makes the single-entry case return its input bitwise.
ParamVector weighted_mean(std::span<const ParamVector> vs, std::span<const double> ws);

enum class Elementwise { Square, Sqrt, AddScalar };

// Pure element-wise map; `c` only matters for AddScalar.
ParamVector elementwise(Elementwise op, const ParamVector& x, double c = 0.0);

double l2_norm(const ParamVector& x);

inline std::uint64_t checksum(const ParamVector& x) {
    return checksum_doubles(x.values);
}

// The representable delta d closest to fin-base such that base + d == fin in
// double arithmetic. A plain subtraction already reapplies exactly for almost
// every pair; the one-ulp nudge covers the rest, so a client's final local
// parameters are recoverable bitwise from (theta_t, delta).
double exact_delta(double base, double fin);

}  // namespace fedmae
