#pragma once

// Synthetic arterial pressure scenes: a two-Gaussian-per-beat waveform
// generator and a Gaussian spatial coupling of the vessel to each element
// of the transducer array.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "tonosim/errors.hpp"

namespace tonosim {

inline constexpr double kPaPerMmHg = 133.322;

struct ArterialWaveformSpec {
    double heart_rate_bpm = 60.0;
    double systolic_mmhg = 120.0;
    double diastolic_mmhg = 80.0;
    double duration_s = 10.0;
    double sample_rate_hz = 1000.0;
    // 0 disables per-beat morphology jitter; any other value seeds it.
    uint64_t morphology_seed = 0;

    void validate() const {
        if (!(systolic_mmhg > diastolic_mmhg) || !(diastolic_mmhg > 0.0))
            throw InvalidSpec("waveform: need systolic > diastolic > 0");
        if (heart_rate_bpm < 20.0 || heart_rate_bpm > 300.0)
            throw InvalidSpec("waveform: heart_rate must be in [20, 300] bpm");
        if (!(duration_s > 0.0))
            throw InvalidSpec("waveform: duration must be > 0");
        if (!(sample_rate_hz > 2.0 * 20.0 * heart_rate_bpm / 60.0))
            throw InvalidSpec("waveform: sample_rate must cover 20 harmonics of the heart rate");
    }
};

namespace detail {

// Beat morphology on normalized phase tau in [0,1): systolic peak plus a
// dicrotic bump, both periodic Gaussians so consecutive beats join smoothly.
struct BeatShape {
    double t_sys = 0.18;
    double sigma_sys = 0.08;
    double t_dic = 0.42;   // dicrotic bump near 40% of the beat period
    double sigma_dic = 0.07;
    double dic_ratio = 0.3;

    double operator()(double tau) const {
        auto wrapped = [](double x) {
            x = std::abs(x - std::floor(x));
            return x > 0.5 ? 1.0 - x : x;
        };
        const double d1 = wrapped(tau - t_sys);
        const double d2 = wrapped(tau - t_dic);
        return std::exp(-0.5 * d1 * d1 / (sigma_sys * sigma_sys)) +
               dic_ratio * std::exp(-0.5 * d2 * d2 / (sigma_dic * sigma_dic));
    }
};

}  // namespace detail

// Sampled pressure series in mmHg. Each beat is affinely renormalized on its
// own samples, so per-beat max/min hit systolic/diastolic exactly.
inline std::vector<double> synth_abp(const ArterialWaveformSpec& spec) {
    spec.validate();
    const size_t n = static_cast<size_t>(std::llround(spec.duration_s * spec.sample_rate_hz)) + 1;
    const double beat_period = 60.0 / spec.heart_rate_bpm;
    std::vector<double> out(n);

    std::mt19937_64 rng(spec.morphology_seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    size_t i = 0;
    for (int beat = 0; i < n; ++beat) {
        detail::BeatShape shape;
        if (spec.morphology_seed != 0) {
            shape.t_dic += 0.01 * jitter(rng);
            shape.sigma_sys *= 1.0 + 0.05 * jitter(rng);
            shape.sigma_dic *= 1.0 + 0.05 * jitter(rng);
        }
        const size_t beat_begin = i;
        const double t0 = beat * beat_period;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        while (i < n) {
            const double t = static_cast<double>(i) / spec.sample_rate_hz;
            if (t >= t0 + beat_period) break;
            const double s = shape((t - t0) / beat_period);
            out[i] = s;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
            ++i;
        }
        if (i == beat_begin) { ++i; continue; }  // beat shorter than one sample
        const double span = hi - lo;
        const double gain = span > 0.0 ? (spec.systolic_mmhg - spec.diastolic_mmhg) / span : 0.0;
        for (size_t k = beat_begin; k < i; ++k)
            out[k] = spec.diastolic_mmhg + gain * (out[k] - lo);
    }
    return out;
}

struct ArrayLayout {
    int rows = 2;
    int cols = 2;
    double pitch = 150e-6;  // m

    void validate() const {
        if (rows < 1 || cols < 1) throw InvalidSpec("layout: rows and cols must be >= 1");
        if (!(pitch > 0.0)) throw InvalidSpec("layout: pitch must be > 0");
    }
    int count() const { return rows * cols; }
    // Element (r,c) center; element 0 at the origin, index = r*cols + c.
    void element_center(int index, double& x, double& y) const {
        if (index < 0 || index >= count())
            throw std::out_of_range("layout: element index " + std::to_string(index) +
                                    " out of range [0," + std::to_string(count()) + ")");
        x = (index % cols) * pitch;
        y = (index / cols) * pitch;
    }
};

struct PressureScene {
    std::vector<double> waveform;       // mmHg
    double waveform_rate_hz = 1000.0;   // sampling rate of `waveform`
    double vessel_x = 0.0;              // m, in the array plane
    double vessel_y = 0.0;
    double coupling_width = 150e-6;     // m, Gaussian coupling radius
    double contact_bias_pa = 0.0;       // static hold-down pressure
    double backpressure_pa = 0.0;       // membrane bias, constant per run

    void validate() const {
        if (!(coupling_width > 0.0)) throw InvalidSpec("scene: coupling_width must be > 0");
        if (contact_bias_pa < 0.0) throw InvalidSpec("scene: contact_bias must be >= 0");
        if (waveform.empty()) throw InvalidSpec("scene: waveform is empty");
        if (!(waveform_rate_hz > 0.0)) throw InvalidSpec("scene: waveform rate must be > 0");
    }

    // Linear interpolation; clamps to the first/last sample beyond the ends.
    double waveform_at(double t_s) const {
        const double pos = t_s * waveform_rate_hz;
        if (pos <= 0.0) return waveform.front();
        const size_t i = static_cast<size_t>(pos);
        if (i + 1 >= waveform.size()) return waveform.back();
        const double frac = pos - static_cast<double>(i);
        return waveform[i] + frac * (waveform[i + 1] - waveform[i]);
    }
};

inline double coupling_factor(const PressureScene& scene, const ArrayLayout& layout, int element) {
    double ex = 0.0, ey = 0.0;
    layout.element_center(element, ex, ey);
    const double dx = ex - scene.vessel_x;
    const double dy = ey - scene.vessel_y;
    const double d2 = dx * dx + dy * dy;
    return std::exp(-0.5 * d2 / (scene.coupling_width * scene.coupling_width));
}

// Net pressure seen by one element at time t:
//   contact_bias + waveform(t) [Pa] * exp(-d^2 / 2 width^2) - backpressure
inline double element_pressure(const PressureScene& scene, const ArrayLayout& layout,
                               int element, double t_s) {
    scene.validate();
    layout.validate();
    const double g = coupling_factor(scene, layout, element);
    return scene.contact_bias_pa + scene.waveform_at(t_s) * kPaPerMmHg * g -
           scene.backpressure_pa;
}

}  // namespace tonosim
