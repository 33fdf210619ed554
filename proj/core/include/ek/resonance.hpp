#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ek/spectral.hpp"

namespace ek::resonance {

using spectral::Vec3;

// Ω_{s₁s₂}(ξ,η) = H(ξ) + s₁H(η) + s₂H(ξ−η), s = ±1.
struct PhaseSpec {
    int s1 = 1;
    int s2 = 1;
    std::string label() const;
};
PhaseSpec parse_phase(const std::string& label);  // "++", "+-", "-+", "--"

double phase(const PhaseSpec& spec, const Vec3& xi, const Vec3& eta);
Vec3 grad_eta(const PhaseSpec& spec, const Vec3& xi, const Vec3& eta);

// --- scans ---------------------------------------------------------------

enum class ScanMode {
    sphere,  // (ξ,η) ∈ ℝ^{2d} with |ξ|+|η| = radius
    slice,   // |ξ| = radius, η free in the ball |η| ≤ ball_radius
};

struct ScanPoint {
    double value = 0.0;
    Vec3 xi{};
    Vec3 eta{};
};

struct ScanReport {
    double radius = 0.0;
    ScanPoint min_phase;     // min |Ω|
    ScanPoint min_gradient;  // min |∇ηΩ|
    ScanPoint min_joint;     // min max(|Ω|, |∇ηΩ|)
};

struct ScanConfig {
    ScanMode mode = ScanMode::sphere;
    int dim = 3;
    std::size_t samples = 20000;
    double ball_radius = 2.0;
    double eta_min = 0.0;       // slice mode: restrict to the annulus |η| ≥ eta_min
    std::uint64_t seed = 0;     // offset into the low-discrepancy sequence
    std::size_t polish = 16;    // best candidates refined by pattern search
};

ScanReport resonant_scan(const PhaseSpec& spec, double radius, const ScanConfig& cfg);

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};
ScalingFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

// min over samples of Ω₊₊ / ((|ξ|+|η|+|ζ|)(1+|ξ|+|η|+|ζ|)) with |ξ|+|η| ∈ [r_lo, r_hi]
double product_bound_constant(int dim, std::size_t samples, double r_lo, double r_hi, std::uint64_t seed);

struct ParallelCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double relative_error = 0.0;
};
// H(εη) − H(η) + H((ε−1)η) against −3ε|η|³/(2√2)
ParallelCheck parallel_resonance_check(double eps, double eta_mag);
// |εη|² − |η|² + |(1−ε)η|² against −2|η||ξ| with |ξ| = ε|η|
ParallelCheck quadratic_phase_check(double eps, double eta_mag);

// --- five-case decomposition for the +− phase --------------------------

struct CaseThresholds {
    double much = 8.0;       // "≫": ratio ≥ much
    double comparable = 2.0; // "∼": ratio in [1/comparable, comparable]
    double angle = 1.7320508075688772;  // α > √3
    double unit = 1.0;       // |ζ| ≥ 1
};

int classify_case(const Vec3& xi, const Vec3& eta, const CaseThresholds& th = {});

// --- dyadic block norms ------------------------------------------------

struct DyadicBlock {
    double a = 1.0, b = 1.0, c = 1.0;  // |ξ|, |η|, |ξ−η|
    double M() const;
    double m() const;
    double l() const;
};
bool admissible(const DyadicBlock& blk);

enum class SymbolKind { B3_T, B1_X, B2_X };
enum class Region { all, time_nonresonant, space_nonresonant };
enum class Multiplier { bracket_M_squared, normal_form, zero };

struct SymbolUnderTest {
    SymbolKind kind = SymbolKind::B3_T;
    PhaseSpec phase{1, -1};
    Region region = Region::all;
    Multiplier multiplier = Multiplier::bracket_M_squared;
    double alpha = 0.0;  // used by Multiplier::normal_form
    bool constant = false;  // replace the symbol by 1 (volume-scaling probe)
};

std::string kind_label(SymbolKind k);
SymbolKind parse_kind(const std::string& s);
Region parse_region(const std::string& s);

struct NormConfig {
    int dim = 3;
    int xi_samples = 3;
    int radial_pieces = 8;
    int nodes_per_piece = 8;
    double angle_ratio = 1.189207115002721;  // 2^{1/4}, grading of angular pieces
};

// smooth weights w₁…w₅ of the five cases (sum to 1); M is the block maximum
std::array<double, 5> case_weights(const Vec3& xi, const Vec3& eta, double M_block);

// sup over sampled |ξ| ∼ a of ‖𝓑(ξ,·)‖_{Ḣ^s_η}; integer s by finite differences,
// fractional s by log-linear interpolation.
double block_norm(const SymbolUnderTest& sym, const DyadicBlock& blk, double s, const NormConfig& cfg = {});

struct ExponentFit {
    double exponent_l = 0.0, exponent_M = 0.0, exponent_a = 0.0;
    bool fitted_l = false, fitted_M = false, fitted_a = false;
    bool tied = false;  // two varied parameters moved together; they share one exponent
    double residual = 0.0;  // RMS of log residuals
    double stderr_slope = 0.0;
    std::vector<double> norms;
};

ExponentFit fit_exponents(const SymbolUnderTest& sym, const std::vector<DyadicBlock>& ladder, double s,
                          const NormConfig& cfg = {}, int threads = 1);

}  // namespace ek::resonance
