#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rowperm {

/// Order-insensitive-to-roundoff accumulation: recursive pairwise summation.
/// Deterministic for a fixed input order regardless of thread count.
double pairwise_sum(std::span<const double> values);

/// Quintic smoothstep ramp: 1 for s <= 0, 0 for s >= 1, C^2 across the ends.
double smoothstep_down(double s);
/// Derivative of smoothstep_down (zero outside (0,1)).
double smoothstep_down_deriv(double s);

/// Ordinary least squares for y = a + b x. Returns {intercept, slope, r_squared}.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Small deterministic xorshift generator for sampling-based probes.
/// Fixed algorithm so probe results are reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next() {
        std::uint64_t x = state_;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        state_ = x;
        return x;
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    /// Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

private:
    std::uint64_t state_;
};

/// Runs fn(i) for i in [0, n) over at most `threads` workers.
/// Tasks must write only to their own slots; results are as if sequential.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Global worker-count knob (set once by the CLI, default 1).
void set_thread_count(int threads);
int thread_count();

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

} // namespace rowperm
