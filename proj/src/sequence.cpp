#include "mgsim/sequence.hpp"

#include "mgsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgsim {

AlphaBetaZero clarke(const ThreePhase& s) noexcept {
    return {
        (2.0 / 3.0) * (s.a - 0.5 * s.b - 0.5 * s.c),
        (s.b - s.c) / kSqrt3,
        (s.a + s.b + s.c) / 3.0,
    };
}

ThreePhase inverse_clarke(const AlphaBetaZero& v) noexcept {
    const double half_sqrt3_beta = 0.5 * kSqrt3 * v.beta;
    return {
        v.alpha + v.zero,
        -0.5 * v.alpha + half_sqrt3_beta + v.zero,
        -0.5 * v.alpha - half_sqrt3_beta + v.zero,
    };
}

DqPair park(const AlphaBeta& v, double theta) noexcept {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {v.alpha * c + v.beta * s, -v.alpha * s + v.beta * c};
}

DqPair park(const AlphaBetaZero& v, double theta) noexcept {
    return park(AlphaBeta{v.alpha, v.beta}, theta);
}

AlphaBeta inverse_park(const DqPair& v, double theta) noexcept {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {v.d * c - v.q * s, v.d * s + v.q * c};
}

SequencePhasors fortescue(const PhasorSet& p) noexcept {
    const Complex a = kFortescueA;
    const Complex a2 = a * a;
    return {
        (p.a + a * p.b + a2 * p.c) / 3.0,
        (p.a + a2 * p.b + a * p.c) / 3.0,
        (p.a + p.b + p.c) / 3.0,
    };
}

PhasorSet recompose(const SequencePhasors& s) noexcept {
    const Complex a = kFortescueA;
    const Complex a2 = a * a;
    return {
        s.zero + s.pos + s.neg,
        s.zero + a2 * s.pos + a * s.neg,
        s.zero + a * s.pos + a2 * s.neg,
    };
}

std::size_t samples_per_cycle(double f0, double dt) {
    if (!(f0 > 0.0) || !(dt > 0.0)) {
        throw ConfigError("fundamental frequency and step must be positive");
    }
    const double n = 1.0 / (f0 * dt);
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-6 * rounded) {
        throw ConfigError("step " + std::to_string(dt) + " s does not divide one period of " +
                          std::to_string(f0) + " Hz into an integer number of samples (" +
                          std::to_string(n) + ")");
    }
    return static_cast<std::size_t>(rounded);
}

Complex extract_phasor(std::span<const double> window, double f0, double dt) {
    const std::size_t n = samples_per_cycle(f0, dt);
    if (window.size() != n) {
        throw ConfigError("phasor window holds " + std::to_string(window.size()) +
                          " samples, one period needs " + std::to_string(n));
    }
    Complex acc{};
    for (std::size_t k = 0; k < n; ++k) {
        acc += window[k] * std::polar(1.0, -kTwoPi * static_cast<double>(k) / static_cast<double>(n));
    }
    return acc * (2.0 / static_cast<double>(n));
}

PhasorSet extract_phasors(std::span<const ThreePhase> window, double f0, double dt) {
    std::vector<double> a(window.size()), b(window.size()), c(window.size());
    for (std::size_t k = 0; k < window.size(); ++k) {
        a[k] = window[k].a;
        b[k] = window[k].b;
        c[k] = window[k].c;
    }
    return {extract_phasor(a, f0, dt), extract_phasor(b, f0, dt), extract_phasor(c, f0, dt)};
}

double vuf(const SequencePhasors& s) {
    const double pos = std::abs(s.pos);
    if (!(pos > 0.0)) {
        throw DegenerateInputError("VUF undefined: positive-sequence magnitude is zero");
    }
    return std::hypot(std::abs(s.neg), std::abs(s.zero)) / pos;
}

double puf(double pa, double pb, double pc, double p_rated) {
    if (!(p_rated > 0.0)) {
        throw DegenerateInputError("PUF undefined: rated per-phase power must be positive");
    }
    const double avg = (pa + pb + pc) / 3.0;
    return std::max({std::abs(pa - avg), std::abs(pb - avg), std::abs(pc - avg)}) / p_rated;
}

double rms_window(std::span<const double> window) {
    if (window.empty()) {
        throw DegenerateInputError("RMS of an empty window");
    }
    double acc = 0.0;
    for (double x : window) {
        acc += x * x;
    }
    return std::sqrt(acc / static_cast<double>(window.size()));
}

SlidingPhasor::SlidingPhasor(std::size_t samples_per_cycle)
    : n_(samples_per_cycle), twiddle_(samples_per_cycle), products_(samples_per_cycle),
      squares_(samples_per_cycle, 0.0) {
    if (n_ == 0) {
        throw ConfigError("sliding phasor needs at least one sample per cycle");
    }
    for (std::size_t k = 0; k < n_; ++k) {
        twiddle_[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) / static_cast<double>(n_));
    }
}

void SlidingPhasor::push(double x) {
    const Complex p = x * twiddle_[index_];
    const double sq = x * x;
    sum_ += p - products_[index_];
    sum_sq_ += sq - squares_[index_];
    products_[index_] = p;
    squares_[index_] = sq;
    ++count_;
    index_ = (index_ + 1) % n_;
    if (index_ == 0) {
        sum_ = {};
        sum_sq_ = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            sum_ += products_[k];
            sum_sq_ += squares_[k];
        }
    }
}

Complex SlidingPhasor::phasor() const noexcept {
    return sum_ * (2.0 / static_cast<double>(n_));
}

double SlidingPhasor::rms() const noexcept {
    return std::sqrt(std::max(sum_sq_, 0.0) / static_cast<double>(n_));
}

SlidingMean::SlidingMean(std::size_t n) : buf_(n, 0.0) {
    if (n == 0) {
        throw ConfigError("sliding mean needs a non-empty window");
    }
}

void SlidingMean::push(double x) {
    sum_ += x - buf_[index_];
    buf_[index_] = x;
    ++count_;
    index_ = (index_ + 1) % buf_.size();
    if (index_ == 0) {
        sum_ = 0.0;
        for (double v : buf_) {
            sum_ += v;
        }
    }
}

double SlidingMean::mean() const noexcept {
    return sum_ / static_cast<double>(buf_.size());
}

}  // namespace mgsim
