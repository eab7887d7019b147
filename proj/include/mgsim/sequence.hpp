#pragma once

// Three-phase signal mathematics: Clarke/Park transforms, symmetrical
// components, one-cycle phasor extraction and the unbalance metrics.
//
// Conventions: amplitude-invariant Clarke (2/3 scaling), peak-valued phasors,
// metrics on a 0..1 scale.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace mgsim {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSqrt3 = std::numbers::sqrt3;

struct ThreePhase {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    friend bool operator==(const ThreePhase&, const ThreePhase&) = default;
};

struct AlphaBetaZero {
    double alpha = 0.0;
    double beta = 0.0;
    double zero = 0.0;

    friend bool operator==(const AlphaBetaZero&, const AlphaBetaZero&) = default;
};

struct AlphaBeta {
    double alpha = 0.0;
    double beta = 0.0;
};

struct DqPair {
    double d = 0.0;
    double q = 0.0;
};

struct PhasorSet {
    Complex a;
    Complex b;
    Complex c;
};

struct SequencePhasors {
    Complex pos;
    Complex neg;
    Complex zero;
};

struct UnbalanceMetrics {
    double vuf = 0.0;
    double puf = 0.0;
};

/// Fortescue operator a = e^{j2pi/3}.
inline const Complex kFortescueA = std::polar(1.0, kTwoPi / 3.0);

[[nodiscard]] AlphaBetaZero clarke(const ThreePhase& s) noexcept;
[[nodiscard]] ThreePhase inverse_clarke(const AlphaBetaZero& v) noexcept;

/// Rotation of the alpha-beta pair by -theta. Together with clarke() this is
/// the Clarke-Park matrix T2.
[[nodiscard]] DqPair park(const AlphaBetaZero& v, double theta) noexcept;
[[nodiscard]] DqPair park(const AlphaBeta& v, double theta) noexcept;
[[nodiscard]] AlphaBeta inverse_park(const DqPair& v, double theta) noexcept;

[[nodiscard]] SequencePhasors fortescue(const PhasorSet& p) noexcept;
[[nodiscard]] PhasorSet recompose(const SequencePhasors& s) noexcept;

/// Number of samples in one period of f0 at step dt. Throws ConfigError when
/// 1/(f0*dt) is not an integer.
[[nodiscard]] std::size_t samples_per_cycle(double f0, double dt);

/// Single-bin DFT over exactly one fundamental period. The phase reference is
/// the first sample of the window.
[[nodiscard]] PhasorSet extract_phasors(std::span<const ThreePhase> window, double f0, double dt);
[[nodiscard]] Complex extract_phasor(std::span<const double> window, double f0, double dt);

/// sqrt(|V-|^2 + |V0|^2) / |V+|. Throws DegenerateInputError when |V+| = 0.
[[nodiscard]] double vuf(const SequencePhasors& s);

/// Largest per-phase deviation from the phase average, over the rated
/// per-phase power. Throws DegenerateInputError when p_rated <= 0.
[[nodiscard]] double puf(double pa, double pb, double pc, double p_rated);

[[nodiscard]] double rms_window(std::span<const double> window);

/// Sliding one-cycle single-bin DFT with an absolute time reference: the
/// phasor angle is measured against e^{j 2 pi f0 t} with t = n*dt counted
/// from the first sample ever pushed. Running sums are rebuilt from the
/// buffer once per cycle so rounding does not accumulate.
class SlidingPhasor {
public:
    explicit SlidingPhasor(std::size_t samples_per_cycle);

    void push(double x);

    [[nodiscard]] bool full() const noexcept { return count_ >= n_; }
    [[nodiscard]] Complex phasor() const noexcept;
    /// Root mean square of the buffered cycle.
    [[nodiscard]] double rms() const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_;
    std::vector<Complex> twiddle_;
    std::vector<Complex> products_;
    std::vector<double> squares_;
    std::size_t index_ = 0;
    std::size_t count_ = 0;
    Complex sum_{};
    double sum_sq_ = 0.0;
};

/// Sliding one-cycle mean, used for per-phase average power.
class SlidingMean {
public:
    explicit SlidingMean(std::size_t n);

    void push(double x);
    [[nodiscard]] bool full() const noexcept { return count_ >= buf_.size(); }
    [[nodiscard]] double mean() const noexcept;

private:
    std::vector<double> buf_;
    std::size_t index_ = 0;
    std::size_t count_ = 0;
    double sum_ = 0.0;
};

}  // namespace mgsim
