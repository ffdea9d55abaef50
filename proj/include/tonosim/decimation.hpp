#pragma once

// Two-stage fixed-point decimation of the 1-bit modulator stream: a 3rd
// order CIC (sinc^3) decimating by 64 to 2 kS/s, then a 32-tap droop
// compensating FIR decimating by 2 to 12-bit samples at 1 kS/s.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonosim/errors.hpp"
#include "tonosim/modulator.hpp"

namespace tonosim {

inline constexpr int kFirTaps = 32;
inline constexpr int kQ15One = 32768;
// 12-bit signed output; full scale (modulator x = 1) maps to this code.
inline constexpr int kDecimatedFullScale = 2048;

struct CicConfig {
    int order = 3;
    int rate_change = 64;
    int differential_delay = 1;

    void validate() const {
        if (order < 1) throw InvalidSpec("cic: order must be >= 1");
        if (rate_change < 2) throw InvalidSpec("cic: rate_change must be >= 2");
        if (differential_delay < 1) throw InvalidSpec("cic: differential_delay must be >= 1");
        if (bit_growth() + 1 > 62)
            throw InvalidSpec("cic: bit growth exceeds the 64-bit accumulator");
    }
    // N * log2(R*M), the accumulator headroom needed above the input width.
    int bit_growth() const {
        return static_cast<int>(std::ceil(
            order * std::log2(static_cast<double>(rate_change) * differential_delay)));
    }
    int64_t dc_gain() const {
        int64_t g = 1;
        for (int i = 0; i < order; ++i) g *= static_cast<int64_t>(rate_change) * differential_delay;
        return g;
    }
    // Intermediate-rate samples until the impulse response has fully passed.
    int settle_samples() const {
        const int len = order * (rate_change * differential_delay - 1) + 1;
        return (len + rate_change - 1) / rate_change;
    }
    // Group delay in input samples.
    double group_delay_inputs() const {
        return order * (static_cast<double>(rate_change) * differential_delay - 1.0) / 2.0;
    }
};

// Integrator-comb realization. Internal arithmetic is unsigned 64-bit, so
// intermediate wraparound is well defined; results are exact because the
// true output magnitude stays below the accumulator range.
class CicDecimator {
public:
    explicit CicDecimator(const CicConfig& cfg = {})
        : cfg_(cfg),
          integrators_(cfg.order, 0),
          comb_delays_(static_cast<size_t>(cfg.order) * cfg.differential_delay, 0) {
        cfg.validate();
    }

    const CicConfig& config() const { return cfg_; }

    // Feed one input sample; yields an output every rate_change inputs.
    std::optional<int64_t> push(int64_t value) {
        uint64_t v = static_cast<uint64_t>(value);
        for (auto& acc : integrators_) {
            acc += v;
            v = acc;
        }
        if (++phase_ < cfg_.rate_change) return std::nullopt;
        phase_ = 0;
        const int m = cfg_.differential_delay;
        for (int s = 0; s < cfg_.order; ++s) {
            uint64_t* delay = &comb_delays_[static_cast<size_t>(s) * m];
            const uint64_t oldest = delay[comb_pos_];
            delay[comb_pos_] = v;
            v -= oldest;
        }
        comb_pos_ = (comb_pos_ + 1) % m;
        return static_cast<int64_t>(v);
    }

    std::vector<int64_t> process(std::span<const int8_t> bits) {
        std::vector<int64_t> out;
        out.reserve(bits.size() / cfg_.rate_change + 1);
        for (int8_t b : bits)
            if (auto y = push(b)) out.push_back(*y);
        return out;
    }

private:
    CicConfig cfg_;
    std::vector<uint64_t> integrators_;
    std::vector<uint64_t> comb_delays_;  // order x differential_delay
    int comb_pos_ = 0;
    int phase_ = 0;
};

inline std::vector<int64_t> cic_decimate(const BitStream& bits, const CicConfig& cfg = {}) {
    CicDecimator cic(cfg);
    return cic.process(bits.bits);
}

struct FirConfig {
    std::array<int16_t, kFirTaps> taps_q15{};
    int rate_change = 2;
    double cutoff_hz = 500.0;
    // Unquantized design, normalized to unit DC gain; kept for reference
    // convolution and response inspection.
    std::array<double, kFirTaps> ideal_taps{};

    void validate() const {
        if (rate_change < 1) throw InvalidSpec("fir: rate_change must be >= 1");
        if (!(cutoff_hz > 0.0)) throw InvalidSpec("fir: cutoff must be > 0");
    }
};

namespace response {

// CIC magnitude response normalized to 1 at DC, evaluated at the input rate.
inline double cic_droop(double f_hz, const CicConfig& cic, double input_rate_hz) {
    if (f_hz == 0.0) return 1.0;
    const double rm = static_cast<double>(cic.rate_change) * cic.differential_delay;
    const double w = std::numbers::pi * f_hz / input_rate_hz;
    const double num = std::sin(w * rm);
    const double den = rm * std::sin(w);
    if (den == 0.0) return 1.0;
    return std::pow(std::abs(num / den), cic.order);
}

// Zero-phase amplitude of a symmetric FIR (signed; sign flips past nulls).
inline double fir_amplitude(std::span<const double> taps, double f_hz, double rate_hz) {
    const double c = (static_cast<double>(taps.size()) - 1.0) / 2.0;
    double a = 0.0;
    for (size_t k = 0; k < taps.size(); ++k)
        a += taps[k] * std::cos(2.0 * std::numbers::pi * f_hz * (static_cast<double>(k) - c) / rate_hz);
    return a;
}

inline double fir_amplitude_q15(const FirConfig& fir, double f_hz, double rate_hz) {
    std::array<double, kFirTaps> t;
    for (int k = 0; k < kFirTaps; ++k) t[k] = fir.taps_q15[k] / static_cast<double>(kQ15One);
    return fir_amplitude(t, f_hz, rate_hz);
}

// |CIC * FIR| at a frequency in the modulator-rate domain; the FIR argument
// evaluates periodically, so image bands come out folded as they would be.
inline double composite_amplitude(double f_hz, const CicConfig& cic, const FirConfig& fir,
                                  double input_rate_hz) {
    const double fs2 = input_rate_hz / cic.rate_change;
    return cic_droop(f_hz, cic, input_rate_hz) * std::abs(fir_amplitude_q15(fir, f_hz, fs2));
}

inline double to_db(double amplitude) {
    return 20.0 * std::log10(std::max(amplitude, 1e-300));
}

}  // namespace response

namespace detail {

// Dense-grid least squares fit of a 16-coefficient symmetric 32-tap FIR to a
// target amplitude response.
inline std::array<double, kFirTaps> fit_symmetric_fir(std::span<const double> freqs,
                                                      std::span<const double> target,
                                                      double rate_hz) {
    constexpr int half = kFirTaps / 2;
    std::array<std::array<double, half>, half> g{};
    std::array<double, half> rhs{};
    std::vector<std::array<double, half>> basis(freqs.size());
    for (size_t i = 0; i < freqs.size(); ++i)
        for (int j = 0; j < half; ++j)
            basis[i][j] = 2.0 * std::cos(2.0 * std::numbers::pi * freqs[i] *
                                         (15.5 - static_cast<double>(j)) / rate_hz);
    for (size_t i = 0; i < freqs.size(); ++i) {
        for (int j = 0; j < half; ++j) {
            rhs[j] += basis[i][j] * target[i];
            for (int l = j; l < half; ++l) g[j][l] += basis[i][j] * basis[i][l];
        }
    }
    for (int j = 0; j < half; ++j)
        for (int l = 0; l < j; ++l) g[j][l] = g[l][j];

    // Gaussian elimination with partial pivoting.
    std::array<int, half> perm;
    for (int i = 0; i < half; ++i) perm[i] = i;
    for (int col = 0; col < half; ++col) {
        int piv = col;
        for (int r = col + 1; r < half; ++r)
            if (std::abs(g[r][col]) > std::abs(g[piv][col])) piv = r;
        std::swap(g[col], g[piv]);
        std::swap(rhs[col], rhs[piv]);
        if (g[col][col] == 0.0) throw DesignInfeasible("fir design: singular normal equations");
        for (int r = col + 1; r < half; ++r) {
            const double f = g[r][col] / g[col][col];
            for (int c2 = col; c2 < half; ++c2) g[r][c2] -= f * g[col][c2];
            rhs[r] -= f * rhs[col];
        }
    }
    std::array<double, half> coef{};
    for (int r = half - 1; r >= 0; --r) {
        double v = rhs[r];
        for (int c2 = r + 1; c2 < half; ++c2) v -= g[r][c2] * coef[c2];
        coef[r] = v / g[r][r];
    }
    std::array<double, kFirTaps> taps{};
    for (int j = 0; j < half; ++j) {
        taps[j] = coef[j];
        taps[kFirTaps - 1 - j] = coef[j];
    }
    return taps;
}

// Round-half-away-from-zero quantization to Q1.15 with the tap sum pinned to
// exactly 2^15, adjusting symmetric pairs so DC gain stays exactly 1.
inline std::array<int16_t, kFirTaps> quantize_q15_unit_dc(const std::array<double, kFirTaps>& taps) {
    std::array<int16_t, kFirTaps> q{};
    std::array<double, kFirTaps / 2> err{};
    int sum = 0;
    for (int j = 0; j < kFirTaps / 2; ++j) {
        const double scaled = taps[j] * kQ15One;
        int v = static_cast<int>(scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5));
        if (v > 32767 || v < -32768)
            throw DesignInfeasible("fir design: tap " + std::to_string(j) + " overflows Q1.15");
        q[j] = static_cast<int16_t>(v);
        q[kFirTaps - 1 - j] = q[j];
        err[j] = scaled - v;
        sum += 2 * v;
    }
    // Residual is even: the sum is twice the half-tap sum and the target 2^15.
    int residual = kQ15One - sum;
    while (residual != 0) {
        const int dir = residual > 0 ? 1 : -1;
        int best = 0;
        for (int j = 1; j < kFirTaps / 2; ++j)
            if (dir * err[j] > dir * err[best]) best = j;
        q[best] = static_cast<int16_t>(q[best] + dir);
        q[kFirTaps - 1 - best] = q[best];
        err[best] -= dir;
        residual -= 2 * dir;
    }
    return q;
}

}  // namespace detail

// Windowed-sinc (Hamming) lowpass at the cutoff, droop-compensated in the
// frequency domain by the inverse of the CIC's sinc^N passband roll-off,
// refit to 32 symmetric taps and quantized to Q1.15 with exact unit DC gain.
// Composite (CIC+FIR) targets, checked after quantization:
//   ripple <= 0.5 dB up to 0.8*cutoff, -6 +/- 1 dB at the cutoff,
//   >= 60 dB rejection at k*intermediate_rate +/- 0.2*cutoff.
inline FirConfig design_fir(double cutoff_hz = 500.0, double modulator_rate_hz = 128000.0,
                            const CicConfig& cic = {}, int fir_rate_change = 2) {
    cic.validate();
    const double fs2 = modulator_rate_hz / cic.rate_change;
    if (!(cutoff_hz > 0.0) || cutoff_hz >= fs2 / 2.0)
        throw InvalidSpec("fir design: cutoff must lie below the intermediate Nyquist rate (" +
                          std::to_string(fs2 / 2.0) + " Hz)");
    if (fir_rate_change < 1) throw InvalidSpec("fir design: rate_change must be >= 1");

    // Hamming windowed-sinc prototype, even length, symmetric.
    std::array<double, kFirTaps> proto{};
    const double fc_rel = cutoff_hz / fs2;
    for (int k = 0; k < kFirTaps; ++k) {
        const double m = static_cast<double>(k) - (kFirTaps - 1) / 2.0;
        const double xx = 2.0 * fc_rel * m;
        const double sinc = xx == 0.0 ? 1.0 : std::sin(std::numbers::pi * xx) / (std::numbers::pi * xx);
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (kFirTaps - 1));
        proto[k] = 2.0 * fc_rel * sinc * w;
    }

    // Compensated target on a dense grid: prototype response times inverse
    // CIC droop, the compensation held constant past 1.2*cutoff so the
    // stopband is not amplified.
    const double comp_edge = 1.2 * cutoff_hz;
    const double comp_cap = 1.0 / response::cic_droop(comp_edge, cic, modulator_rate_hz);
    constexpr int kGrid = 1024;
    std::vector<double> freqs(kGrid), target(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        const double f = (fs2 / 2.0) * static_cast<double>(i) / (kGrid - 1);
        const double comp =
            f <= comp_edge ? 1.0 / response::cic_droop(f, cic, modulator_rate_hz) : comp_cap;
        freqs[i] = f;
        target[i] = response::fir_amplitude(proto, f, fs2) * comp;
    }

    auto taps = detail::fit_symmetric_fir(freqs, target, fs2);
    double dc = 0.0;
    for (double t : taps) dc += t;
    if (dc == 0.0) throw DesignInfeasible("fir design: zero DC gain");
    for (double& t : taps) t /= dc;

    FirConfig fir;
    fir.rate_change = fir_rate_change;
    fir.cutoff_hz = cutoff_hz;
    fir.ideal_taps = taps;
    fir.taps_q15 = detail::quantize_q15_unit_dc(taps);

    // Validate the quantized composite response; fail loud, never ship a
    // filter that misses the contract.
    const double pass_edge = 0.8 * cutoff_hz;
    double ripple_db = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double f = pass_edge * static_cast<double>(i) / 400.0;
        const double db = response::to_db(response::composite_amplitude(f, cic, fir, modulator_rate_hz));
        ripple_db = std::max(ripple_db, std::abs(db));
    }
    if (ripple_db > 0.5)
        throw DesignInfeasible("fir design: passband ripple " + std::to_string(ripple_db) +
                               " dB exceeds 0.5 dB");
    const double cut_db =
        response::to_db(response::composite_amplitude(cutoff_hz, cic, fir, modulator_rate_hz));
    if (std::abs(cut_db + 6.0) > 1.0)
        throw DesignInfeasible("fir design: cutoff response " + std::to_string(cut_db) +
                               " dB outside -6 +/- 1 dB");
    const double image_probe = 0.2 * cutoff_hz;
    for (int k = 1; k * fs2 + image_probe < modulator_rate_hz / 2.0; ++k) {
        for (double f : {k * fs2 - image_probe, k * fs2 + image_probe}) {
            const double db =
                response::to_db(response::composite_amplitude(f, cic, fir, modulator_rate_hz));
            if (db > -60.0)
                throw DesignInfeasible("fir design: image rejection " + std::to_string(db) +
                                       " dB at " + std::to_string(f) + " Hz (need <= -60)");
        }
    }
    return fir;
}

// Streaming fixed-point FIR decimator. Products accumulate in 64-bit (the
// contract needs >= 40); output is scaled so input_full_scale maps to the
// 12-bit full scale, rounded half away from zero, then saturated.
class FirDecimator {
public:
    FirDecimator(const FirConfig& cfg, int64_t input_full_scale)
        : cfg_(cfg), divisor_(input_full_scale * kQ15One / kDecimatedFullScale) {
        cfg.validate();
        if (divisor_ <= 0) throw InvalidSpec("fir: bad input full scale");
    }

    std::optional<int16_t> push(int64_t v) {
        delay_[pos_] = v;
        pos_ = (pos_ + 1) % kFirTaps;
        if (++phase_ < cfg_.rate_change) return std::nullopt;
        phase_ = 0;
        int64_t acc = 0;
        // delay_[pos_-1] is the newest sample, matching taps_q15[0].
        int idx = pos_;
        for (int k = 0; k < kFirTaps; ++k) {
            idx = idx == 0 ? kFirTaps - 1 : idx - 1;
            acc += static_cast<int64_t>(cfg_.taps_q15[k]) * delay_[idx];
        }
        const int64_t half = divisor_ / 2;
        int64_t code = (acc >= 0 ? acc + half : acc - half) / divisor_;
        if (code > 2047) {
            code = 2047;
            ++saturations_;
        } else if (code < -2048) {
            code = -2048;
            ++saturations_;
        }
        return static_cast<int16_t>(code);
    }

    uint64_t saturation_count() const { return saturations_; }

private:
    FirConfig cfg_;
    int64_t divisor_;
    std::array<int64_t, kFirTaps> delay_{};
    int pos_ = 0;
    int phase_ = 0;
    uint64_t saturations_ = 0;
};

struct DecimatedStream {
    std::vector<int16_t> codes;  // 12-bit signed, saturating
    double rate_hz = 1000.0;
    int element_tag = -1;
    double start_time_s = 0.0;          // time of the first modulator bit
    double first_sample_time_s = 0.0;   // group-delay-compensated time of codes[0]
    size_t invalid_prefix = 0;          // startup transient, flagged not dropped
    uint64_t saturation_count = 0;
    double group_delay_samples = 0.0;   // total chain delay, output-rate units

    size_t valid_count() const {
        return codes.size() > invalid_prefix ? codes.size() - invalid_prefix : 0;
    }
    std::span<const int16_t> valid_codes() const {
        return std::span<const int16_t>(codes).subspan(
            std::min(invalid_prefix, codes.size()));
    }
    double time_of(size_t index) const {
        return first_sample_time_s + static_cast<double>(index) / rate_hz;
    }
};

inline DecimatedStream fir_decimate(std::span<const int64_t> series, const FirConfig& cfg,
                                    double intermediate_rate_hz = 2000.0,
                                    int64_t input_full_scale = 262144) {
    FirDecimator fir(cfg, input_full_scale);
    DecimatedStream out;
    out.rate_hz = intermediate_rate_hz / cfg.rate_change;
    out.codes.reserve(series.size() / cfg.rate_change + 1);
    for (int64_t v : series)
        if (auto code = fir.push(v)) out.codes.push_back(*code);
    out.saturation_count = fir.saturation_count();
    return out;
}

struct DecimationConfig {
    CicConfig cic{};
    FirConfig fir{};

    int total_rate_change() const { return cic.rate_change * fir.rate_change; }
    // Output samples to flag invalid while the filter memories fill.
    int transient_cut() const {
        return (cic.settle_samples() + kFirTaps - 1 + fir.rate_change - 1) / fir.rate_change;
    }
    double group_delay_output_samples() const {
        const double gd_intermediate =
            cic.group_delay_inputs() / cic.rate_change + (kFirTaps - 1) / 2.0;
        return gd_intermediate / fir.rate_change;
    }
};

inline DecimationConfig make_decimation_config(double modulator_rate_hz = 128000.0,
                                               double cutoff_hz = 500.0, int cic_rate = 64,
                                               int fir_rate = 2) {
    DecimationConfig cfg;
    cfg.cic.rate_change = cic_rate;
    cfg.fir = design_fir(cutoff_hz, modulator_rate_hz, cfg.cic, fir_rate);
    return cfg;
}

// Full chain: CIC then FIR, one output per total_rate_change() input bits.
inline DecimatedStream decimate_chain(const BitStream& bits, const DecimationConfig& cfg,
                                      int element_tag = -1, double start_time_s = 0.0) {
    cfg.cic.validate();
    cfg.fir.validate();
    CicDecimator cic(cfg.cic);
    FirDecimator fir(cfg.fir, cfg.cic.dc_gain());
    DecimatedStream out;
    out.rate_hz = bits.sample_rate_hz / cfg.total_rate_change();
    out.element_tag = element_tag;
    out.start_time_s = start_time_s;
    out.invalid_prefix = static_cast<size_t>(cfg.transient_cut());
    out.group_delay_samples = cfg.group_delay_output_samples();
    // codes[0] summarizes the first total_rate_change() bits; its center in
    // source time is that window's end minus the chain group delay.
    out.first_sample_time_s = start_time_s +
        (cfg.total_rate_change() - 1) / bits.sample_rate_hz -
        out.group_delay_samples / out.rate_hz;
    out.codes.reserve(bits.size() / cfg.total_rate_change() + 1);
    for (int8_t b : bits.bits)
        if (auto v = cic.push(b))
            if (auto code = fir.push(*v)) out.codes.push_back(*code);
    out.saturation_count = fir.saturation_count();
    return out;
}

}  // namespace tonosim
