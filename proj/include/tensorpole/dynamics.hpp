#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rabi_fit.hpp"
#include "readout.hpp"
#include "spectral.hpp"

namespace tensorpole::dynamics {

using model::Axis;
using model::ParamPoint;

enum class Pattern { linear, elliptical };
enum class Transition { sq, dq };

inline std::string pattern_name(Pattern p) { return p == Pattern::linear ? "linear" : "elliptical"; }
inline std::string transition_name(Transition t) { return t == Transition::sq ? "SQ" : "DQ"; }

inline Pattern parse_pattern(std::string_view s) {
    if (s == "linear") return Pattern::linear;
    if (s == "elliptical") return Pattern::elliptical;
    throw ConfigError("unknown modulation pattern '" + std::string(s) + "' (expected linear or elliptical)");
}

inline Transition parse_transition(std::string_view s) {
    if (s == "sq" || s == "SQ") return Transition::sq;
    if (s == "dq" || s == "DQ") return Transition::dq;
    throw ConfigError("unknown transition '" + std::string(s) + "' (expected sq or dq)");
}

inline constexpr double max_amplitude = 0.2;
inline constexpr double default_amplitude = 1.0 / 30.0;
inline constexpr double max_phase_per_step = 0.05;

struct ModulationSpec {
    ParamPoint base;
    std::array<double, 3> amplitude{};  // m_alpha, m_beta, m_phi
    std::array<int, 3> sign{1, 1, 1};
    Pattern pattern = Pattern::linear;
    double omega = 0.0;
};

inline std::vector<int> active_axes(const ModulationSpec& s) {
    std::vector<int> a;
    for (int k = 0; k < 3; ++k)
        if (s.amplitude[k] != 0.0) a.push_back(k);
    return a;
}

inline void validate(const ModulationSpec& s) {
    for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(s.amplitude[k]) || s.amplitude[k] < 0.0 || s.amplitude[k] > max_amplitude)
            throw ConfigError("modulation amplitude must lie in [0, 0.2], got " + std::to_string(s.amplitude[k]));
        if (s.sign[k] != 1 && s.sign[k] != -1) throw ConfigError("modulation sign must be +1 or -1");
    }
    if (!std::isfinite(s.omega) || s.omega < 0.0) throw ConfigError("drive frequency must be finite and >= 0");
    const auto act = active_axes(s);
    if (act.empty()) throw ConfigError("modulation needs at least one nonzero amplitude");
    if (s.pattern == Pattern::elliptical && act.size() != 2)
        throw ConfigError("elliptical modulation needs exactly two nonzero amplitudes");
}

// Parameter offsets at time t: sin on every axis (linear) or cos on the first active axis and -sin on the second.
inline std::array<double, 3> modulation_offsets(const ModulationSpec& s, double t) {
    std::array<double, 3> d{};
    const double c = std::cos(s.omega * t), sn = std::sin(s.omega * t);
    if (s.pattern == Pattern::linear) {
        for (int k = 0; k < 3; ++k) d[k] = s.sign[k] * s.amplitude[k] * sn;
        return d;
    }
    bool first = true;
    for (int k = 0; k < 3; ++k) {
        if (s.amplitude[k] == 0.0) continue;
        d[k] = first ? s.sign[k] * s.amplitude[k] * c : -s.sign[k] * s.amplitude[k] * sn;
        first = false;
    }
    return d;
}

inline Hamiltonian3 modulated_hamiltonian(const ModulationSpec& s, double t) {
    const auto d = modulation_offsets(s, t);
    const auto& p = s.base;
    return model::hamiltonian_at(p.h0(), p.alpha() + d[0], p.beta() + d[1], p.phi() + d[2], p.bz(), p.delta_x());
}

// First-order drive V(t) = cos_part cos(wt) + sin_part sin(wt).
struct FirstOrderDrive {
    Hamiltonian3 cos_part, sin_part;
};

inline FirstOrderDrive first_order_drive(const ModulationSpec& s) {
    FirstOrderDrive v;
    const auto& p = s.base;
    bool first = true;
    for (int k = 0; k < 3; ++k) {
        if (s.amplitude[k] == 0.0) continue;
        const Hamiltonian3 d = model::derivative_at(p.h0(), p.alpha(), p.beta(), p.phi(), model::all_axes[k]);
        const double w = s.sign[k] * s.amplitude[k];
        if (s.pattern == Pattern::linear) {
            v.sin_part = v.sin_part + cplx(w) * d;
        } else if (first) {
            v.cos_part = v.cos_part + cplx(w) * d;
        } else {
            v.sin_part = v.sin_part - cplx(w) * d;
        }
        first = false;
    }
    return v;
}

inline Hamiltonian3 linearized_hamiltonian(const ModulationSpec& s, double t) {
    const auto v = first_order_drive(s);
    return model::build_hamiltonian(s.base) + cplx(std::cos(s.omega * t)) * v.cos_part +
           cplx(std::sin(s.omega * t)) * v.sin_part;
}

// Period average of the exact modulated Hamiltonian (trapezoid rule, spectrally exact for smooth periodic f).
inline Hamiltonian3 averaged_hamiltonian(ModulationSpec s, int samples = 64) {
    if (s.omega <= 0.0) s.omega = 1.0;
    const double period = two_pi / s.omega;
    Hamiltonian3 acc;
    for (int k = 0; k < samples; ++k) acc = acc + modulated_hamiltonian(s, period * k / samples);
    return cplx(1.0 / samples) * acc;
}

// RWA coupling between eigenstates from -> to (to above from): |<to| A + iB |from>| / 2.
inline double rwa_coupling(const ModulationSpec& s, const Vector3c& from, const Vector3c& to) {
    const auto v = first_order_drive(s);
    return 0.5 * std::abs(matrix_element(to, v.cos_part + I * v.sin_part, from));
}

// ---------------------------------------------------------------- drive patterns

struct DrivePattern {
    Axis mu = Axis::alpha;
    std::optional<Axis> nu;
    bool bar = false;  // mu nu-bar: minus sign (linear) or -i (elliptical)
    Pattern kind = Pattern::linear;
};

inline std::string pattern_label(const DrivePattern& d) {
    std::string s(model::axis_name(d.mu));
    if (d.nu) {
        s += d.kind == Pattern::linear ? (d.bar ? "-" : "+") : (d.bar ? "~" : "*");
        s += model::axis_name(*d.nu);
    }
    return s;
}

// Elliptical pairs are stored with mu before nu; swapping the axes flips bar.
inline DrivePattern canonical(DrivePattern d) {
    if (!d.nu) return d;
    if (*d.nu == d.mu) throw ConfigError("drive pattern needs two distinct axes");
    if (static_cast<int>(*d.nu) < static_cast<int>(d.mu)) {
        std::swap(d.mu, *d.nu);
        if (d.kind == Pattern::elliptical) d.bar = !d.bar;
    }
    return d;
}

struct TransitionElement {
    double value = 0.0;
    Transition transition = Transition::dq;
    DrivePattern pattern;
};

inline Hamiltonian3 pattern_operator(const ParamPoint& p, const DrivePattern& d) {
    Hamiltonian3 x = model::param_derivative(p, d.mu);
    if (d.nu) {
        cplx c = d.kind == Pattern::linear ? cplx(1.0) : I;
        if (d.bar) c = -c;
        x = x + c * model::param_derivative(p, *d.nu);
    }
    return x;
}

inline constexpr double gap_floor = 1e-9;

inline spectral::EigenSystem gapped_eigensystem(const ParamPoint& p, const char* where) {
    const Hamiltonian3 h = model::build_hamiltonian(p);
    auto es = spectral::eigensystem(h);
    const double scale = geometry::energy_scale(p, h);
    if (es.degenerate || spectral::min_adjacent_gap(es.energies) <= gap_floor * scale)
        throw DegenerateSpectrumError(std::string(where) + ": spectrum is degenerate at this point");
    return es;
}

inline int target_band(Transition t) { return t == Transition::sq ? 1 : 2; }

inline TransitionElement gamma_direct(const ParamPoint& p, const DrivePattern& d, Transition t) {
    const auto es = gapped_eigensystem(p, "gamma_direct");
    const double v = std::abs(matrix_element(es.states[0], pattern_operator(p, d), es.states[target_band(t)]));
    return {v, t, d};
}

inline ModulationSpec make_spec(const ParamPoint& p, const DrivePattern& d_in, double m, double omega) {
    const DrivePattern d = canonical(d_in);
    ModulationSpec s;
    s.base = p;
    s.pattern = d.nu ? d.kind : Pattern::linear;
    s.omega = omega;
    s.amplitude[static_cast<int>(d.mu)] = m;
    if (d.nu) {
        s.amplitude[static_cast<int>(*d.nu)] = m;
        s.sign[static_cast<int>(*d.nu)] = d.bar ? -1 : 1;
    }
    validate(s);
    return s;
}

// ---------------------------------------------------------------- state preparation

enum class Target { ground, middle };

struct PulseSequence {
    double t_minus = 0.0, delta_minus = 0.0, t_plus = 0.0, delta_plus = 0.0, omega_init = 0.0;
};

struct Preparation {
    Vector3c state;
    PulseSequence pulses;
    double fidelity = 0.0;
    bool pulse_recipe = true;
};

// exp(-i t w (e^{-i delta}|k><0| + h.c.)) with k = 0 (m_s=+1) or 2 (m_s=-1); index 1 is m_s=0.
inline Matrix3c pulse_unitary(int k, double omega, double t, double delta) {
    const double th = omega * t;
    Matrix3c u = Matrix3c::identity();
    u(1, 1) = std::cos(th);
    u(k, k) = std::cos(th);
    u(k, 1) = -I * std::polar(1.0, -delta) * std::sin(th);
    u(1, k) = -I * std::polar(1.0, delta) * std::sin(th);
    return u;
}

inline Matrix3c pulse_sequence_unitary(const PulseSequence& s) {
    return pulse_unitary(0, s.omega_init, s.t_plus, s.delta_plus) *
           pulse_unitary(2, s.omega_init, s.t_minus, s.delta_minus);
}

inline PulseSequence prep_pulses(Target target, const ParamPoint& p, double omega_init) {
    const double a = p.alpha(), w = omega_init;
    PulseSequence s;
    s.omega_init = w;
    if (target == Target::ground) {
        s.t_minus = std::asin(std::sin(a) / std::sqrt(2.0)) / w;
        s.delta_minus = p.phi() + pi / 2;
        s.t_plus = std::asin(std::cos(a) / std::sqrt(2.0 - std::sin(a) * std::sin(a))) / w;
        s.delta_plus = p.beta() + pi / 2;
    } else {
        // first pulse leaves amplitude sin(alpha) on m_s=0, which the second pulse moves to m_s=+1
        s.t_minus = std::asin(std::cos(a)) / w;
        s.delta_minus = p.phi() + pi;
        s.t_plus = pi / (2.0 * w);
        s.delta_plus = p.beta();
    }
    return s;
}

inline double overlap_fidelity(const Vector3c& a, const Vector3c& b) { return std::norm(dot(a, b)); }

inline Preparation prepare_state(Target target, const ParamPoint& p, double omega_init) {
    if (!(omega_init > 0.0) || !std::isfinite(omega_init)) throw ConfigError("omega_init must be > 0");
    if (p.bz() != 0.0 || p.delta_x() != 0.0)
        throw ConfigError("prepare_state: the pulse recipe is defined only at bz = 0 and delta_x = 0");
    const auto es = gapped_eigensystem(p, "prepare_state");
    Preparation r;
    r.pulses = prep_pulses(target, p, omega_init);
    r.state = pulse_sequence_unitary(r.pulses) * Vector3c{{0.0, 1.0, 0.0}};
    r.fidelity = overlap_fidelity(es.states[target == Target::ground ? 0 : 1], r.state);
    if (r.fidelity < 1.0 - 1e-9)
        throw NumericalError("prepare_state: fidelity " + std::to_string(r.fidelity) + " below 1 - 1e-9");
    return r;
}

// Eigenstate by exact unitary; used away from bz = 0 where no pulse recipe is given.
inline Preparation prepare_exact(Target target, const ParamPoint& p) {
    const auto es = gapped_eigensystem(p, "prepare_exact");
    Preparation r;
    r.state = es.states[target == Target::ground ? 0 : 1];
    r.fidelity = 1.0;
    r.pulse_recipe = false;
    return r;
}

inline Preparation prepare(Target target, const ParamPoint& p, double omega_init) {
    if (p.bz() == 0.0 && p.delta_x() == 0.0) return prepare_state(target, p, omega_init);
    return prepare_exact(target, p);
}

// ---------------------------------------------------------------- evolution

enum class Basis { eigen, ms };

inline std::string basis_name(Basis b) { return b == Basis::eigen ? "eigen" : "ms"; }

struct RabiTrace {
    std::vector<double> times;
    std::vector<Populations> populations;  // (n_plus, n_zero, n_minus)
    Basis basis = Basis::eigen;
};

inline Populations populations_in(const Vector3c& psi, Basis basis, const spectral::EigenSystem* frame) {
    if (basis == Basis::ms) return {std::norm(psi[0]), std::norm(psi[1]), std::norm(psi[2])};
    return {std::norm(dot(frame->states[2], psi)), std::norm(dot(frame->states[1], psi)),
            std::norm(dot(frame->states[0], psi))};
}

inline double spectral_norm(const spectral::EigenSystem& es) {
    return std::max(std::abs(es.energies[0]), std::abs(es.energies[2]));
}

// psi + sum_k (e^{-i E_k dt} - 1) <k|psi> |k>; adding only the small increment keeps round-off off the norm
inline Vector3c apply_exponential(const spectral::EigenSystem& es, double dt, const Vector3c& psi) {
    Vector3c out = psi;
    for (int k = 0; k < 3; ++k) {
        const double th = -es.energies[k] * dt, s = std::sin(0.5 * th);
        out = out + cplx(-2.0 * s * s, std::sin(th)) * dot(es.states[k], psi) * es.states[k];
    }
    return out;
}

namespace detail {

inline void check_initial(const Vector3c& psi0, double duration, double dt, int samples) {
    if (std::abs(norm(psi0) - 1.0) > 1e-12) throw ConfigError("evolve: initial state must have unit norm");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("evolve: duration must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("evolve: dt must be > 0");
    if (samples < 1) throw ConfigError("evolve: need at least one sample");
}

// Drift is checked per sample segment, then round-off is removed so long traces do not random-walk.
inline void check_norm(Vector3c& psi, double t) {
    const double n = norm(psi);
    if (std::abs(n - 1.0) > 1e-10)
        throw NumericalError("evolve: norm drifted by " + std::to_string(n - 1.0) + " at t=" + std::to_string(t));
    psi = (1.0 / n) * psi;
}

template <class StepFn>
RabiTrace run(Vector3c psi, double duration, double dt, int samples, Basis basis, const spectral::EigenSystem* frame,
              StepFn&& step) {
    const long per_sample = std::max(1L, static_cast<long>(std::ceil(duration / (samples * dt) - 1e-12)));
    const double h = duration / (static_cast<double>(samples) * per_sample);
    RabiTrace tr;
    tr.basis = basis;
    tr.times.reserve(samples + 1);
    tr.populations.reserve(samples + 1);
    tr.times.push_back(0.0);
    tr.populations.push_back(populations_in(psi, basis, frame));
    long n = 0;
    for (int s = 1; s <= samples; ++s) {
        for (long k = 0; k < per_sample; ++k, ++n) psi = step(psi, n * h, h);
        const double t = duration * s / samples;
        check_norm(psi, t);
        tr.times.push_back(t);
        tr.populations.push_back(populations_in(psi, basis, frame));
    }
    return tr;
}

}  // namespace detail

// Midpoint propagator for the exact modulated Hamiltonian. The eigen basis refers to the unmodulated point.
inline RabiTrace evolve(const ModulationSpec& spec, const Vector3c& psi0, double duration, double dt, int samples = 200,
                        Basis basis = Basis::eigen) {
    validate(spec);
    detail::check_initial(psi0, duration, dt, samples);
    const auto frame = spectral::eigensystem(model::build_hamiltonian(spec.base));
    return detail::run(psi0, duration, dt, samples, basis, &frame, [&](const Vector3c& psi, double t, double h) {
        const auto es = spectral::eigensystem(modulated_hamiltonian(spec, t + 0.5 * h));
        if (h * spectral_norm(es) > max_phase_per_step * (1.0 + 1e-12))
            throw ConfigError("evolve: step-size violation, dt*|H| = " + std::to_string(h * spectral_norm(es)) +
                              " exceeds 0.05");
        return apply_exponential(es, h, psi);
    });
}

inline RabiTrace evolve(const Hamiltonian3& h_static, const Vector3c& psi0, double duration, double dt,
                        int samples = 200, Basis basis = Basis::eigen) {
    detail::check_initial(psi0, duration, dt, samples);
    const auto es = spectral::eigensystem(h_static);
    if (dt * spectral_norm(es) > max_phase_per_step * (1.0 + 1e-12))
        throw ConfigError("evolve: step-size violation, dt*|H| = " + std::to_string(dt * spectral_norm(es)) +
                          " exceeds 0.05");
    return detail::run(psi0, duration, dt, samples, basis, &es,
                       [&](const Vector3c& psi, double, double h) { return apply_exponential(es, h, psi); });
}

// Largest step with margin below the 0.05 phase bound over one drive period.
inline double auto_dt(const ModulationSpec& spec) {
    double hmax = 0.0;
    const double period = spec.omega > 0.0 ? two_pi / spec.omega : 1.0;
    for (int k = 0; k < 64; ++k)
        hmax = std::max(hmax, spectral_norm(spectral::eigensystem(modulated_hamiltonian(spec, period * k / 64))));
    return hmax > 0.0 ? 0.04 / hmax : 1.0;
}

inline void write_trace_csv(std::ostream& os, const RabiTrace& tr) {
    os << "t,n_plus,n_zero,n_minus,basis\n";
    const std::string b = basis_name(tr.basis);
    char buf[160];
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& n = tr.populations[i];
        std::snprintf(buf, sizeof buf, "%.9g,%.12f,%.12f,%.12f,", tr.times[i], n[0], n[1], n[2]);
        os << buf << b << '\n';
    }
}

// ---------------------------------------------------------------- resonance scan

struct ResonanceSpectrum {
    std::vector<double> omega;
    std::vector<double> transfer;
    std::size_t peak_index = 0;
    double peak_omega = 0.0;
    double refined_omega = 0.0;
};

inline double transfer_at(ModulationSpec spec, double omega, const Vector3c& psi0, double duration, int band = 0) {
    spec.omega = omega;
    const auto tr = evolve(spec, psi0, duration, auto_dt(spec), 1, Basis::eigen);
    return 1.0 - tr.populations.back()[2 - band];
}

// Transferred population out of the prepared ground state after a fixed modulation time.
inline ResonanceSpectrum resonance_scan(const ModulationSpec& tmpl, const std::vector<double>& omegas,
                                        double duration, double omega_init = two_pi * 10.0, bool refine = true) {
    if (!(duration > 0.0)) throw ConfigError("resonance_scan: duration must be > 0");
    if (omegas.empty()) throw ConfigError("resonance_scan: empty frequency list");
    const Vector3c psi0 = prepare(Target::ground, tmpl.base, omega_init).state;
    ResonanceSpectrum r;
    r.omega = omegas;
    r.transfer.resize(omegas.size());
    parallel_for(omegas.size(), [&](std::size_t i) { r.transfer[i] = transfer_at(tmpl, omegas[i], psi0, duration); });
    r.peak_index = static_cast<std::size_t>(std::max_element(r.transfer.begin(), r.transfer.end()) - r.transfer.begin());
    r.peak_omega = r.refined_omega = omegas[r.peak_index];
    if (refine && omegas.size() >= 3) {
        const std::size_t i = r.peak_index;
        double a = omegas[i > 0 ? i - 1 : i], b = omegas[i + 1 < omegas.size() ? i + 1 : i];
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        auto f = [&](double w) { return -transfer_at(tmpl, w, psi0, duration); };
        double x1 = b - g * (b - a), x2 = a + g * (b - a), f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 40 && b - a > 1e-9 * std::abs(b); ++it) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2);
            }
        }
        r.refined_omega = 0.5 * (a + b);
    }
    return r;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 2) return {lo};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

// ---------------------------------------------------------------- simulated matrix elements

struct ExperimentOptions {
    double m = default_amplitude;
    double periods = 10.0;
    int samples = 400;
    double omega_init = two_pi * 10.0;
    bool dressed_resonance = true;  // drive at the gap of the period-averaged Hamiltonian
    double max_residual = 0.05;
    double min_coupling = 0.2;  // relative to the energy scale; sets the longest trace
    std::optional<ReadoutModel> readout;
    std::uint64_t seed = 0;
};

enum class Protocol { two_level, ladder_linear, ladder_elliptical };

inline std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::two_level: return "two-level";
        case Protocol::ladder_linear: return "degenerate-SQ from u-";
        case Protocol::ladder_elliptical: return "degenerate-SQ from u0";
    }
    return "?";
}

struct Experiment {
    TransitionElement gamma;
    ModulationSpec spec;
    RabiTrace trace;
    RabiFit fit;
    Protocol protocol = Protocol::two_level;
    double predicted_omega = 0.0;
    bool pulse_prep = true;
};

struct FitError : NumericalError {
    RabiTrace trace;
    FitError(const std::string& what, RabiTrace tr) : NumericalError(what), trace(std::move(tr)) {}
};

inline double drive_frequency(const ModulationSpec& spec, Transition t, bool dressed) {
    const auto e = dressed ? spectral::eigenvalues(averaged_hamiltonian(spec))
                           : spectral::eigenvalues(model::build_hamiltonian(spec.base));
    return t == Transition::sq ? e[1] - e[0] : e[2] - e[0];
}

// Couplings (B1, B2) of u0 to u+ and to u- under the given spec.
inline std::pair<double, double> degenerate_sq_couplings(const ModulationSpec& spec) {
    const auto es = spectral::eigensystem(model::build_hamiltonian(spec.base));
    return {rwa_coupling(spec, es.states[1], es.states[2]), rwa_coupling(spec, es.states[0], es.states[1])};
}

inline Populations degenerate_sq_reference(double b1, double b2, double t) {
    const double w2 = b1 * b1 + b2 * b2;
    if (!(w2 > 0.0)) throw ConfigError("degenerate_sq_reference: couplings must not both vanish");
    const double we = std::sqrt(w2), s2 = std::pow(std::sin(we * t), 2);
    return {b1 * b1 / w2 * s2, std::pow(std::cos(we * t), 2), b2 * b2 / w2 * s2};
}

namespace detail {

// eigen labels (n+, n0, n-) -> m_s populations after the inverse map (u- -> 0, u0 -> -1, u+ -> +1), and back
inline Populations noisy_readout(const Populations& n, const ReadoutModel& model, std::mt19937_64& rng) {
    const Populations ms{n[0], n[2], n[1]};
    const auto s = readout_forward(model, ms, rng);
    const auto r = three_readout_solve(s, model);
    return {r[0], r[2], r[1]};
}

}  // namespace detail

inline Experiment gamma_simulated(const ParamPoint& p, const DrivePattern& d, Transition t,
                                  const ExperimentOptions& opt = {}, std::uint64_t index = 0) {
    const auto es = gapped_eigensystem(p, "gamma_simulated");
    const double scale = geometry::energy_scale(p, model::build_hamiltonian(p));
    Experiment x;
    x.gamma.transition = t;
    x.gamma.pattern = d;
    x.spec = make_spec(p, d, opt.m, 0.0);

    const double d1 = es.energies[1] - es.energies[0], d2 = es.energies[2] - es.energies[1];
    const bool ladder = t == Transition::sq && std::abs(d1 - d2) <= 1e-6 * scale;
    x.protocol = !ladder ? Protocol::two_level
                         : (x.spec.pattern == Pattern::elliptical ? Protocol::ladder_elliptical : Protocol::ladder_linear);

    const double g_lo = rwa_coupling(x.spec, es.states[0], es.states[1]);
    const double g_hi = rwa_coupling(x.spec, es.states[1], es.states[2]);
    const double g_dq = rwa_coupling(x.spec, es.states[0], es.states[2]);
    x.predicted_omega = t == Transition::dq ? 2.0 * g_dq : (ladder ? 2.0 * std::hypot(g_lo, g_hi) : 2.0 * g_lo);

    x.spec.omega = drive_frequency(x.spec, t, opt.dressed_resonance);
    const Target start = x.protocol == Protocol::ladder_elliptical ? Target::middle : Target::ground;
    const Preparation prep = prepare(start, p, opt.omega_init);
    x.pulse_prep = prep.pulse_recipe;

    const double omega_floor = opt.m * opt.min_coupling * scale;
    const double duration = opt.periods * two_pi / std::max(x.predicted_omega, omega_floor);
    x.trace = evolve(x.spec, prep.state, duration, auto_dt(x.spec), opt.samples, Basis::eigen);

    if (opt.readout) {
        std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        std::mt19937_64 rng(seq);
        for (auto& n : x.trace.populations) n = detail::noisy_readout(n, *opt.readout, rng);
    }

    std::vector<double> y(x.trace.times.size());
    double contrast = 1.0;
    double sum_lo = 0.0, sum_all = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto& n = x.trace.populations[i];
        switch (x.protocol) {
            case Protocol::two_level: y[i] = t == Transition::dq ? n[0] : n[1]; break;
            case Protocol::ladder_linear: y[i] = n[1]; break;
            case Protocol::ladder_elliptical:
                y[i] = n[0] + n[2];
                sum_lo += n[2];
                sum_all += n[0] + n[2];
                break;
        }
    }
    if (x.protocol == Protocol::ladder_linear) contrast = 0.5;

    const double span = x.trace.times.back();
    x.fit = fit_sinusoid(x.trace.times, y);
    // small-transfer or sub-period traces carry no usable free sinusoid; fall back to the known contrast
    if (x.fit.omega * span < two_pi || x.fit.amplitude < 0.125 * contrast)
        x.fit = fit_constrained(x.trace.times, y, contrast, 4.0 * two_pi / span);
    if (x.fit.residual_rms > opt.max_residual)
        throw FitError("gamma_simulated: Rabi fit residual " + std::to_string(x.fit.residual_rms) + " for " +
                           pattern_label(d) + " " + transition_name(t),
                       x.trace);

    switch (x.protocol) {
        case Protocol::two_level: x.gamma.value = x.fit.omega / opt.m; break;
        case Protocol::ladder_linear: x.gamma.value = x.fit.omega / (std::sqrt(2.0) * opt.m); break;
        case Protocol::ladder_elliptical: {
            const double r = sum_all > 0.0 ? std::clamp(sum_lo / sum_all, 0.0, 1.0) : 0.0;
            x.gamma.value = x.fit.omega / opt.m * std::sqrt(r);
            break;
        }
    }
    return x;
}

// ---------------------------------------------------------------- reconstruction

inline constexpr std::array<std::pair<Axis, Axis>, 3> axis_pairs{
    {{Axis::alpha, Axis::beta}, {Axis::alpha, Axis::phi}, {Axis::beta, Axis::phi}}};

inline int pair_index(Axis a, Axis b) {
    for (int k = 0; k < 3; ++k)
        if (axis_pairs[k].first == a && axis_pairs[k].second == b) return k;
    throw ConfigError("invalid axis pair");
}

struct GammaSet {
    using Slot = std::optional<double>;
    std::array<std::array<Slot, 2>, 3> single{};                      // [axis][SQ, DQ]
    std::array<std::array<std::array<Slot, 2>, 2>, 3> linear{};       // [pair][plain, bar][SQ, DQ]
    std::array<std::array<std::array<Slot, 2>, 2>, 3> elliptical{};

    void store(const TransitionElement& e) {
        const DrivePattern d = canonical(e.pattern);
        const int t = e.transition == Transition::sq ? 0 : 1;
        if (!d.nu) {
            single[static_cast<int>(d.mu)][t] = e.value;
            return;
        }
        auto& table = d.kind == Pattern::linear ? linear : elliptical;
        table[pair_index(d.mu, *d.nu)][d.bar ? 1 : 0][t] = e.value;
    }
};

inline std::vector<DrivePattern> required_patterns(bool with_curvature = true) {
    std::vector<DrivePattern> v;
    for (Axis a : model::all_axes) v.push_back({a, std::nullopt, false, Pattern::linear});
    for (const auto& [a, b] : axis_pairs)
        for (bool bar : {false, true}) v.push_back({a, b, bar, Pattern::linear});
    if (with_curvature)
        for (const auto& [a, b] : axis_pairs)
            for (bool bar : {false, true}) v.push_back({a, b, bar, Pattern::elliptical});
    return v;
}

inline geometry::QGTensor reconstruct_qgt(const GammaSet& s, const std::array<double, 3>& energies,
                                          bool with_curvature = true) {
    const double gap[2] = {energies[1] - energies[0], energies[2] - energies[0]};
    if (!(gap[0] > 0.0) || !(gap[1] > 0.0)) throw DegenerateSpectrumError("reconstruct_qgt: non-positive gap");
    std::string missing;
    auto need = [&](const GammaSet::Slot& x, const std::string& what) {
        if (!x) missing += (missing.empty() ? "" : ", ") + what;
        return x.value_or(0.0);
    };
    geometry::QGTensor q;
    for (int a = 0; a < 3; ++a)
        for (int t = 0; t < 2; ++t) {
            const double g = need(s.single[a][t], std::string(model::axis_name(model::all_axes[a])) + "/" +
                                                      transition_name(t ? Transition::dq : Transition::sq));
            q.g[a][a] += g * g / (gap[t] * gap[t]);
        }
    for (int k = 0; k < 3; ++k) {
        const int a = static_cast<int>(axis_pairs[k].first), b = static_cast<int>(axis_pairs[k].second);
        const std::string name = std::string(model::axis_name(axis_pairs[k].first)) + "," +
                                 std::string(model::axis_name(axis_pairs[k].second));
        for (int t = 0; t < 2; ++t) {
            const std::string tn = transition_name(t ? Transition::dq : Transition::sq);
            const double lp = need(s.linear[k][0][t], "linear " + name + " " + tn);
            const double lm = need(s.linear[k][1][t], "linear " + name + " bar " + tn);
            q.g[a][b] += (lp * lp - lm * lm) / (4.0 * gap[t] * gap[t]);
            if (with_curvature) {
                const double ep = need(s.elliptical[k][0][t], "elliptical " + name + " " + tn);
                const double em = need(s.elliptical[k][1][t], "elliptical " + name + " bar " + tn);
                q.f[a][b] += (ep * ep - em * em) / (2.0 * gap[t] * gap[t]);
            }
        }
        q.g[b][a] = q.g[a][b];
        q.f[b][a] = -q.f[a][b];
    }
    if (!missing.empty()) throw ConfigError("reconstruct_qgt: incomplete matrix-element set, missing " + missing);
    return q;
}

inline GammaSet gamma_set_direct(const ParamPoint& p, bool with_curvature = true) {
    GammaSet s;
    for (const auto& d : required_patterns(with_curvature))
        for (Transition t : {Transition::sq, Transition::dq}) s.store(gamma_direct(p, d, t));
    return s;
}

struct Emulation {
    GammaSet gammas;
    GammaSet direct;
    std::vector<Experiment> experiments;
    geometry::QGTensor qgt;
};

inline Emulation emulate_qgt(const ParamPoint& p, const ExperimentOptions& opt = {}, bool with_curvature = true,
                             std::uint64_t index_base = 0) {
    const auto patterns = required_patterns(with_curvature);
    std::vector<std::pair<DrivePattern, Transition>> jobs;
    for (const auto& d : patterns)
        for (Transition t : {Transition::sq, Transition::dq}) jobs.emplace_back(d, t);
    Emulation e;
    e.experiments.resize(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        e.experiments[i] = gamma_simulated(p, jobs[i].first, jobs[i].second, opt, index_base + i);
    });
    for (const auto& x : e.experiments) e.gammas.store(x.gamma);
    e.direct = gamma_set_direct(p, with_curvature);
    e.qgt = reconstruct_qgt(e.gammas, gapped_eigensystem(p, "emulate_qgt").energies, with_curvature);
    return e;
}

}  // namespace tensorpole::dynamics
