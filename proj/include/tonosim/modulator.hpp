#pragma once

// Switched-capacitor front end: capacitance-to-charge input stage, the
// single-bit second-order sigma-delta modulator, and the time-division
// multiplexed acquisition across the transducer array.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "tonosim/errors.hpp"
#include "tonosim/membrane.hpp"
#include "tonosim/scene.hpp"

namespace tonosim {

// Integrator swing limit in full-scale units; clamping, never wrap-around.
inline constexpr double kIntegratorSaturation = 4.0;

enum class InputMode { capacitive, voltage };

struct ModulatorConfig {
    double sample_rate_hz = 128000.0;
    // Loop coefficients of the cascade-of-integrators feedback realization.
    // b1 = C_in/C_f1 and a1 = C_fb1/C_f1 are the first-stage gain knob.
    double b1 = 0.5;
    double a1 = 0.5;
    double b2 = 0.5;
    double a2 = 0.5;
    double vref_v = 1.0;
    double cref_f = 1.4757e-13;        // reference element, ~rest capacitance
    // Capacitance difference that maps to |x| = 1. Full-scale signal charge
    // is vref * fs_delta_c; x = (cs - cref) / fs_delta_c.
    double fs_delta_c = 2e-15;
    InputMode input_mode = InputMode::capacitive;
    // Input-referred additive white noise (volts RMS). 0 gives the ideal
    // chain; 5.0e-4 V at vref 1 V lands the converter near the mid-72 dB
    // SNDR of the measured part.
    double noise_rms_v = 0.0;
    uint64_t seed = 1;

    void validate() const {
        if (!(sample_rate_hz > 0.0)) throw InvalidSpec("modulator: sample_rate must be > 0");
        if (!(vref_v > 0.0)) throw InvalidSpec("modulator: vref must be > 0");
        if (!(fs_delta_c != 0.0)) throw InvalidSpec("modulator: fs_delta_c must be nonzero");
        if (!(b1 > 0.0 && a1 > 0.0 && b2 > 0.0 && a2 > 0.0))
            throw InvalidSpec("modulator: coefficients must be > 0");
        if (noise_rms_v < 0.0) throw InvalidSpec("modulator: noise_rms must be >= 0");
    }
};

struct ModulatorState {
    double int1 = 0.0;
    double int2 = 0.0;
    int last_bit = 1;  // feedback seen by the first step
};

struct BitStream {
    std::vector<int8_t> bits;  // each +1 or -1
    double sample_rate_hz = 128000.0;

    size_t size() const { return bits.size(); }
};

// Normalized modulator input from a sensor capacitance (capacitive mode).
inline double charge_input(double cs_f, const ModulatorConfig& cfg) {
    if (cfg.input_mode != InputMode::capacitive)
        throw ModeMismatch("charge_input requires capacitive input mode");
    return (cs_f - cfg.cref_f) / cfg.fs_delta_c;
}

namespace detail {

inline double clamp_sat(double v) {
    if (v > kIntegratorSaturation) return kIntegratorSaturation;
    if (v < -kIntegratorSaturation) return -kIntegratorSaturation;
    return v;
}

// Gaussian-ish deviate as a sum of 12 uniforms; avoids libm so the noise
// path is ordered identically on every platform.
inline double irwin_hall_gauss(std::mt19937_64& rng) {
    double acc = 0.0;
    for (int i = 0; i < 12; ++i)
        acc += static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return acc - 6.0;
}

}  // namespace detail

// One modulator clock. Update order, with y the previous output bit:
//   int1 += b1*x - a1*y      (clamped)
//   int2 += b2*int1 - a2*y   (clamped, uses the fresh int1)
//   bit   = int2 >= 0 ? +1 : -1   (tie at exactly 0 resolves to +1)
inline std::pair<ModulatorState, int> step(const ModulatorState& state, double x,
                                           const ModulatorConfig& cfg) {
    ModulatorState s = state;
    const double y = static_cast<double>(s.last_bit);
    s.int1 = detail::clamp_sat(s.int1 + cfg.b1 * x - cfg.a1 * y);
    s.int2 = detail::clamp_sat(s.int2 + cfg.b2 * s.int1 - cfg.a2 * y);
    const int bit = s.int2 >= 0.0 ? 1 : -1;
    s.last_bit = bit;
    return {s, bit};
}

inline BitStream run_modulator(std::span<const double> x_series, const ModulatorConfig& cfg,
                               ModulatorState state = {}) {
    cfg.validate();
    BitStream out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.bits.reserve(x_series.size());
    const double noise_scale = cfg.noise_rms_v / cfg.vref_v;
    std::mt19937_64 rng(cfg.seed);
    for (double x : x_series) {
        if (noise_scale > 0.0) x += noise_scale * detail::irwin_hall_gauss(rng);
        auto [next, bit] = step(state, x, cfg);
        state = next;
        out.bits.push_back(static_cast<int8_t>(bit));
    }
    return out;
}

struct MuxSchedule {
    std::vector<int> element_order = {0, 1, 2, 3};
    int dwell = 12800;    // modulator samples per element
    int blanking = 256;   // samples discarded after each element switch

    void validate() const {
        if (element_order.empty()) throw InvalidSpec("schedule: element_order is empty");
        if (!(dwell > blanking) || blanking < 0)
            throw InvalidSpec("schedule: need dwell > blanking >= 0");
    }
};

struct SensorArrayModel {
    MembraneGeometry geometry;
    MaterialParams material;
    ArrayLayout layout;

    void validate() const {
        geometry.validate();
        material.validate();
        layout.validate();
        if (!(layout.pitch > geometry.side_length))
            throw InvalidSpec("array: pitch must exceed the membrane side length");
    }
};

// One contiguous dwell on a single element.
struct ScanSegment {
    int element = 0;
    uint64_t start_sample = 0;      // modulator sample index of bits[0]
    int blanked = 0;                // leading bits tagged invalid (mux settling)
    std::vector<int8_t> bits;
};

struct ScanResult {
    std::vector<ScanSegment> segments;
    double sample_rate_hz = 128000.0;

    // Valid bits of one element, concatenated across its dwells.
    BitStream element_bits(int element) const {
        BitStream out;
        out.sample_rate_hz = sample_rate_hz;
        for (const auto& seg : segments) {
            if (seg.element != element) continue;
            out.bits.insert(out.bits.end(), seg.bits.begin() + seg.blanked, seg.bits.end());
        }
        return out;
    }
};

namespace detail {

// x series for each element at the scene waveform rate, via the full
// physics chain (pressure -> deflection -> capacitance -> charge input).
inline std::vector<std::vector<double>> element_x_series(const PressureScene& scene,
                                                         const SensorArrayModel& model,
                                                         const ModulatorConfig& cfg,
                                                         double duration_s) {
    const size_t n = static_cast<size_t>(std::llround(duration_s * scene.waveform_rate_hz)) + 1;
    const ElectrodeGrid grid(model.geometry);
    std::vector<std::vector<double>> series(model.layout.count());
    for (int e = 0; e < model.layout.count(); ++e) {
        auto& xs = series[e];
        xs.resize(n);
        for (size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) / scene.waveform_rate_hz;
            const double p = element_pressure(scene, model.layout, e, t);
            try {
                const auto profile = deflect(model.geometry, model.material, p);
                xs[k] = charge_input(capacitance(model.geometry, profile, grid), cfg);
            } catch (const MembraneContact& c) {
                throw MembraneContact(c.what(), e, t);
            }
        }
    }
    return series;
}

inline double lerp_series(const std::vector<double>& xs, double pos) {
    if (pos <= 0.0) return xs.front();
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= xs.size()) return xs.back();
    const double frac = pos - static_cast<double>(i);
    return xs[i] + frac * (xs[i + 1] - xs[i]);
}

}  // namespace detail

// Time-division multiplexed acquisition. The schedule cycles through
// element_order, `dwell` modulator samples per slot. Whenever the active
// element actually changes, the modulator state is reset and the first
// `blanking` bits of the new dwell are tagged invalid; consecutive slots on
// the same element run uninterrupted, so a single-element schedule is
// exactly run_modulator on that element's series.
inline ScanResult scan(const PressureScene& scene, const SensorArrayModel& model,
                       const MuxSchedule& schedule, const ModulatorConfig& cfg,
                       double duration_s) {
    scene.validate();
    model.validate();
    schedule.validate();
    cfg.validate();
    for (int e : schedule.element_order)
        if (e < 0 || e >= model.layout.count())
            throw std::out_of_range("schedule: element " + std::to_string(e) + " out of range");

    const auto series = detail::element_x_series(scene, model, cfg, duration_s);
    const uint64_t total = static_cast<uint64_t>(std::llround(duration_s * cfg.sample_rate_hz));
    const double rate_ratio = scene.waveform_rate_hz / cfg.sample_rate_hz;
    const double noise_scale = cfg.noise_rms_v / cfg.vref_v;
    std::mt19937_64 rng(cfg.seed);

    ScanResult result;
    result.sample_rate_hz = cfg.sample_rate_hz;
    ModulatorState state;
    int current = -1;

    for (uint64_t n = 0; n < total; ++n) {
        const size_t slot = static_cast<size_t>(n / schedule.dwell) % schedule.element_order.size();
        const int element = schedule.element_order[slot];
        if (element != current) {
            current = element;
            state = ModulatorState{};
            result.segments.push_back(ScanSegment{element, n, schedule.blanking, {}});
        }
        double x = detail::lerp_series(series[element], static_cast<double>(n) * rate_ratio);
        if (noise_scale > 0.0) x += noise_scale * detail::irwin_hall_gauss(rng);
        auto [next, bit] = step(state, x, cfg);
        state = next;
        result.segments.back().bits.push_back(static_cast<int8_t>(bit));
    }
    // A dwell shorter than the blanking window yields no valid bits.
    for (auto& seg : result.segments)
        seg.blanked = std::min<int>(seg.blanked, static_cast<int>(seg.bits.size()));
    return result;
}

}  // namespace tonosim
