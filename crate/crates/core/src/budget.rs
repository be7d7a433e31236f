//! Analytic gate-error and coherence formulas, and the assembled error
//! budget report.
//!
//! All inputs and outputs are SI with angular frequencies (rad/s). Infinite
//! coherence times are represented by the explicit `f64::INFINITY` sentinel
//! and handled by branch, never by large finite stand-ins.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::blockade::blockade_shift;
use crate::error::{Error, Result};
use crate::numerics;
use crate::params::{units, ExperimentConfig};

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value <= 0.0 || value.is_nan() {
        return Err(Error::NonPositive { name, value });
    }
    Ok(())
}

/// Optimum excitation Rabi frequency Ω_opt = (7π)^{1/3} B^{2/3} τ^{-1/3}.
pub fn omega_opt(b: f64, tau: f64) -> Result<f64> {
    require_positive("blockade shift B", b)?;
    require_positive("lifetime tau", tau)?;
    Ok((7.0 * PI).cbrt() * b.powf(2.0 / 3.0) / tau.cbrt())
}

/// Minimum intrinsic phase-gate error E_min = 3(7π)^{2/3} / (8 (Bτ)^{2/3}).
pub fn e_min(b: f64, tau: f64) -> Result<f64> {
    require_positive("blockade shift B", b)?;
    require_positive("lifetime tau", tau)?;
    Ok(3.0 * (7.0 * PI).powf(2.0 / 3.0) / (8.0 * (b * tau).powf(2.0 / 3.0)))
}

/// Blockade shift that reproduces a target E_min at the given lifetime.
/// This is how the constant-B anchor in the shipped configs was derived.
pub fn blockade_anchor_from_e_min(e_target: f64, tau: f64) -> Result<f64> {
    require_positive("target error", e_target)?;
    require_positive("lifetime tau", tau)?;
    let b_tau = (3.0 * (7.0 * PI).powf(2.0 / 3.0) / (8.0 * e_target)).powf(1.5);
    Ok(b_tau / tau)
}

/// Full intrinsic error of the blockade phase gate at finite ω_hf:
///
/// E = (7π/4Ωτ)(1 + Ω²/ω_hf² + Ω²/7B²) + (Ω²/8B²)(1 + 6B²/ω_hf²)
///
/// The second product is evaluated in expanded form, Ω²/8B² + (3/4)Ω²/ω_hf²,
/// so that the infinite-B and infinite-ω_hf sentinels reduce it exactly.
pub fn gate_error_full(omega: f64, b: f64, omega_hf: f64, tau: f64) -> Result<f64> {
    require_positive("Rabi frequency", omega)?;
    require_positive("blockade shift B", b)?;
    require_positive("hyperfine splitting", omega_hf)?;
    require_positive("lifetime tau", tau)?;
    let radiative = 7.0 * PI / (4.0 * omega * tau)
        * (1.0 + (omega / omega_hf).powi(2) + (omega / b).powi(2) / 7.0);
    let leakage = (omega / b).powi(2) / 8.0 + 0.75 * (omega / omega_hf).powi(2);
    Ok(radiative + leakage)
}

/// Numerical minimum of [`gate_error_full`] over Ω ∈ (0, ω_hf).
/// In the limit ω_hf → ∞, B/Ω* → ∞ this reproduces [`omega_opt`].
pub fn optimize_rabi(b: f64, omega_hf: f64, tau: f64) -> Result<(f64, f64)> {
    require_positive("blockade shift B", b)?;
    require_positive("hyperfine splitting", omega_hf)?;
    require_positive("lifetime tau", tau)?;
    let hi = if omega_hf.is_finite() {
        0.999 * omega_hf
    } else {
        1e14
    };
    let lo = 1.0;
    numerics::golden_min_log(
        |omega| gate_error_full(omega, b, omega_hf, tau).unwrap_or(f64::INFINITY),
        lo,
        hi,
        250,
    )
}

/// Spontaneous-emission probability of a Rydberg π pulse through the
/// intermediate p level, with equal one-photon Rabi frequencies:
/// P_se = π Ω γ_p / Ω₁².
pub fn spont_emission_prob(omega: f64, omega_1: f64, gamma_p: f64) -> Result<f64> {
    require_positive("Rabi frequency", omega)?;
    require_positive("one-photon Rabi frequency", omega_1)?;
    if gamma_p < 0.0 || gamma_p.is_nan() {
        return Err(Error::NonPositive {
            name: "intermediate decay rate",
            value: gamma_p,
        });
    }
    Ok(PI * omega * gamma_p / (omega_1 * omega_1))
}

/// Reduced form of [`spont_emission_prob`] when Ω = Ω₁²/2Δ:
/// P_se = π γ_p / 2|Δ|.
pub fn spont_emission_prob_from_detuning(gamma_p: f64, delta: f64) -> Result<f64> {
    require_positive("detuning", delta.abs())?;
    if gamma_p < 0.0 || gamma_p.is_nan() {
        return Err(Error::NonPositive {
            name: "intermediate decay rate",
            value: gamma_p,
        });
    }
    Ok(PI * gamma_p / (2.0 * delta.abs()))
}

/// Exact resonant π-pulse transfer probability at detuning ratio x = Δ/Ω:
/// P_π = sin²[(π/2)√(1+x²)] / (1+x²).
pub fn pi_pulse_transfer(x: f64) -> f64 {
    let s = 1.0 + x * x;
    ((PI / 2.0) * s.sqrt()).sin().powi(2) / s
}

/// Rydberg excitation error from Doppler detuning: 1 − ⟨P_π(k·v/Ω)⟩ averaged
/// by quadrature over the 1-D thermal velocity distribution, ⟨v²⟩ = k_B T/m.
pub fn doppler_excitation_error(omega: f64, temperature: f64, mass: f64, k_2nu: f64) -> Result<f64> {
    require_positive("Rabi frequency", omega)?;
    require_positive("mass", mass)?;
    if temperature < 0.0 || temperature.is_nan() {
        return Err(Error::NonPositive {
            name: "temperature",
            value: temperature,
        });
    }
    if temperature == 0.0 || k_2nu == 0.0 {
        return Ok(0.0);
    }
    let sigma_v = (crate::params::constants::K_B * temperature / mass).sqrt();
    let scale = k_2nu * sigma_v / omega;
    let norm = 1.0 / (2.0 * PI).sqrt();
    numerics::integrate(
        |u| norm * (-0.5 * u * u).exp() * (1.0 - pi_pulse_transfer(scale * u)),
        -8.0,
        8.0,
        1e-16,
    )
}

/// Leading-order expansion of the Doppler excitation error,
/// k² k_B T / (m Ω²). Kept as an independent cross-check of the quadrature.
pub fn doppler_excitation_leading(omega: f64, temperature: f64, mass: f64, k_2nu: f64) -> f64 {
    k_2nu * k_2nu * crate::params::constants::K_B * temperature / (mass * omega * omega)
}

/// Magnetic dephasing time T₂,B = 2^{3/2} π ħ / (Δ(g·m) μ_B σ), the 1/e decay
/// time of Gaussian Ramsey fringes. A vanishing Zeeman difference or field
/// noise returns the infinite sentinel.
pub fn t2_magnetic(delta_gm: f64, sigma_b: f64) -> Result<f64> {
    if delta_gm < 0.0 || delta_gm.is_nan() {
        return Err(Error::NonPositive {
            name: "Zeeman difference",
            value: delta_gm,
        });
    }
    if sigma_b < 0.0 || sigma_b.is_nan() {
        return Err(Error::NonPositive {
            name: "field noise sigma",
            value: sigma_b,
        });
    }
    if delta_gm == 0.0 || sigma_b == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2f64.powf(1.5) * PI * crate::params::constants::HBAR
        / (delta_gm * crate::params::constants::MU_B * sigma_b))
}

/// Doppler dephasing time T₂,D = √(2m/k_B T) / k₂ν. Zero temperature or
/// zero two-photon wavenumber returns the infinite sentinel.
pub fn t2_doppler(temperature: f64, mass: f64, k_2nu: f64) -> Result<f64> {
    require_positive("mass", mass)?;
    if temperature < 0.0 || temperature.is_nan() {
        return Err(Error::NonPositive {
            name: "temperature",
            value: temperature,
        });
    }
    if temperature == 0.0 || k_2nu == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((2.0 * mass / (crate::params::constants::K_B * temperature)).sqrt() / k_2nu)
}

/// Combined dephasing time T₂ = T₂,B T₂,D / √(T₂,B² + T₂,D²); with one
/// channel infinite this reduces to the other.
pub fn t2_combined(t2_b: f64, t2_d: f64) -> f64 {
    match (t2_b.is_infinite(), t2_d.is_infinite()) {
        (true, true) => f64::INFINITY,
        (true, false) => t2_d,
        (false, true) => t2_b,
        (false, false) => t2_b * t2_d / (t2_b * t2_b + t2_d * t2_d).sqrt(),
    }
}

/// Bell-state fidelity limit from stochastic dephasing over a gap time t:
/// F = (1 + e^{−t²/T₂²}) / 2.
pub fn fidelity_limit(t: f64, t2: f64) -> f64 {
    if t2.is_infinite() {
        return 1.0;
    }
    0.5 * (1.0 + (-(t / t2).powi(2)).exp())
}

/// Assembled error budget for one configuration.
///
/// Times are seconds and frequencies rad/s internally; the flat and JSON
/// export forms carry lab units in their key names.
#[derive(Debug, Clone)]
pub struct ErrorBudgetReport {
    /// Blockade shift at the configured separation (rad/s).
    pub b: f64,
    /// Configured two-photon Rabi frequency (rad/s).
    pub omega: f64,
    /// Optimum Rabi frequency for this B and τ (rad/s).
    pub omega_opt: f64,
    /// Minimum intrinsic error at Ω_opt (two-term model).
    pub e_min: f64,
    /// Intrinsic error at the configured Ω (full expression).
    pub intrinsic_error: f64,
    /// Spontaneous-emission probability per π pulse.
    pub p_se: f64,
    /// Doppler excitation error.
    pub doppler_excitation: f64,
    /// Magnetic dephasing time (s); may be infinite.
    pub t2_magnetic: f64,
    /// Doppler dephasing time (s); may be infinite.
    pub t2_doppler: f64,
    /// Combined dephasing time (s); may be infinite.
    pub t2_combined: f64,
    /// Minimum gap time 2π/Ω during which the control atom is Rydberg
    /// excited (s).
    pub t_gap: f64,
    /// Gap time used for the dephasing estimate (s).
    pub gap_time: f64,
    /// Bell fidelity limit at the gap time.
    pub fidelity_at_gap: f64,
    /// Config keys that were filled from defaults.
    pub defaulted: Vec<String>,
    /// Regime and validity flags.
    pub flags: Vec<String>,
}

/// Compute every budget quantity for a validated config.
pub fn assemble_budget(config: &ExperimentConfig) -> Result<ErrorBudgetReport> {
    let b = blockade_shift(&config.blockade, config.separation)?;
    let tau = config.level.tau;
    let omega = config.laser.omega;
    let omega_hf = config.species.omega_hf;
    let k_2nu = config.laser.k_2nu();

    let mut flags = Vec::new();
    if b.is_finite() && tau.is_finite() && b * tau < 100.0 {
        flags.push(format!("low_b_tau_product: B*tau = {:.3e} < 100", b * tau));
    }
    if omega >= omega_hf {
        flags.push("rabi_exceeds_hyperfine_splitting".into());
    }
    if b.is_finite() && omega_hf.is_finite() && 6.0 * (b / omega_hf).powi(2) > 1.0 {
        flags.push(format!(
            "strong_blockade_vs_hyperfine: 6(B/omega_hf)^2 = {:.3}",
            6.0 * (b / omega_hf).powi(2)
        ));
    }

    let (omega_opt_v, e_min_v) = if b.is_finite() && tau.is_finite() {
        (omega_opt(b, tau)?, e_min(b, tau)?)
    } else {
        (f64::INFINITY, 0.0)
    };
    let intrinsic = gate_error_full(omega, b, omega_hf, tau)?;
    let p_se = spont_emission_prob(omega, config.laser.omega_1, config.laser.gamma_p)?;
    let eps_d = doppler_excitation_error(
        omega,
        config.environment.temperature,
        config.species.mass,
        k_2nu,
    )?;
    let t2_b = t2_magnetic(config.delta_gm(), config.environment.sigma_b)?;
    let t2_d = t2_doppler(config.environment.temperature, config.species.mass, k_2nu)?;
    let t2 = t2_combined(t2_b, t2_d);
    let t_gap = TAU / omega;
    let gap_time = config.effective_gap_time();
    let fidelity_at_gap = fidelity_limit(gap_time, t2);

    Ok(ErrorBudgetReport {
        b,
        omega,
        omega_opt: omega_opt_v,
        e_min: e_min_v,
        intrinsic_error: intrinsic,
        p_se,
        doppler_excitation: eps_d,
        t2_magnetic: t2_b,
        t2_doppler: t2_d,
        t2_combined: t2,
        t_gap,
        gap_time,
        fidelity_at_gap,
        defaulted: config.defaulted.clone(),
        flags,
    })
}

fn fmt_f(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

impl ErrorBudgetReport {
    /// Flat key/value pairs; every key carries its unit.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("b_over_2pi_mhz", fmt_f(units::rad_to_mhz(self.b))),
            ("omega_over_2pi_mhz", fmt_f(units::rad_to_mhz(self.omega))),
            (
                "omega_opt_over_2pi_mhz",
                fmt_f(units::rad_to_mhz(self.omega_opt)),
            ),
            ("e_min", fmt_f(self.e_min)),
            ("intrinsic_error", fmt_f(self.intrinsic_error)),
            ("p_se", fmt_f(self.p_se)),
            ("doppler_excitation_error", fmt_f(self.doppler_excitation)),
            ("t2_magnetic_us", fmt_f(units::s_to_us(self.t2_magnetic))),
            ("t2_doppler_us", fmt_f(units::s_to_us(self.t2_doppler))),
            ("t2_combined_us", fmt_f(units::s_to_us(self.t2_combined))),
            ("t_gap_us", fmt_f(units::s_to_us(self.t_gap))),
            ("gap_time_us", fmt_f(units::s_to_us(self.gap_time))),
            ("fidelity_at_gap", fmt_f(self.fidelity_at_gap)),
            (
                "dephasing_error_at_gap",
                fmt_f(1.0 - self.fidelity_at_gap),
            ),
        ]
    }

    /// `key = value` lines plus defaulted-input and flag records.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "defaulted = {}", self.defaulted.join(","));
        let _ = writeln!(s, "flags = {}", self.flags.join(","));
        s
    }

    /// Structured machine-readable form. Infinite times serialize as "inf".
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        let pairs = self.to_pairs();
        for (k, v) in &pairs {
            if v == "inf" {
                let _ = writeln!(s, "  \"{k}\": \"inf\",");
            } else {
                let _ = writeln!(s, "  \"{k}\": {v},");
            }
        }
        let quote = |items: &[String]| {
            items
                .iter()
                .map(|x| format!("\"{x}\""))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(s, "  \"defaulted\": [{}],", quote(&self.defaulted));
        let _ = writeln!(s, "  \"flags\": [{}]", quote(&self.flags));
        s.push('}');
        s.push('\n');
        s
    }
}
