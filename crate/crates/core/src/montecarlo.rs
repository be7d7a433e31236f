//! Shot-level stochastic simulation: Ramsey decay, Bell experiments, parity
//! oscillations, fidelity extraction, and loss correction.
//!
//! Noise is quasi-static: velocity and field offset are constant within a
//! shot and resampled across shots, which is what produces the Gaussian
//! exp(−t²/T₂²) envelopes. Every shot gets its own RNG stream derived from
//! the master seed and the shot index, so partial runs merge by count
//! addition independent of order, and identical seeds reproduce bit-identical
//! records.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{bell_prep, BellVariant};
use crate::error::{Error, Result};
use crate::numerics::{fit_parity_oscillation, golden_min_log, splitmix64};
use crate::params::{constants, units, ExperimentConfig};

/// One experimental trial's quasi-static noise realization.
#[derive(Debug, Clone, Copy)]
pub struct ShotSample {
    /// Per-atom velocity component along k₂ν (m/s), control first.
    pub velocity: [f64; 2],
    /// Quasi-static magnetic field offset (T).
    pub field_offset: f64,
    /// Per-atom loss flags for the trap-drop stage.
    pub lost: [bool; 2],
}

fn shot_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Draw one shot's noise realization. Velocities are 1-D thermal with
/// ⟨v²⟩ = k_B T/m; the field offset is Gaussian with the configured σ.
pub fn draw_sample(config: &ExperimentConfig, rng: &mut ChaCha12Rng) -> ShotSample {
    let sigma_v = (constants::K_B * config.environment.temperature / config.species.mass).sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    let zb: f64 = rng.sample(StandardNormal);
    let p = config.environment.loss_probability;
    let lost = [rng.random::<f64>() < p, rng.random::<f64>() < p];
    ShotSample {
        velocity: [sigma_v * z0, sigma_v * z1],
        field_offset: config.environment.sigma_b * zb,
        lost,
    }
}

/// Magnetic phase rate c_B (rad per T·s), calibrated so the shot-averaged
/// envelope of c_B·b·t equals exp(−t²/T₂,B²) with the budget module's
/// printed T₂,B: c_B = √2/(σ·T₂,B) = Δ(g·m)·μ_B/(2πħ).
pub fn magnetic_phase_rate(config: &ExperimentConfig) -> f64 {
    config.delta_gm() * constants::MU_B / (2.0 * PI * constants::HBAR)
}

/// Stochastic phase accumulated over a gap time t: the Doppler term
/// k₂ν·v·t imprinted by the control atom's motion plus the calibrated
/// magnetic term c_B·b·t.
pub fn stochastic_phase(sample: &ShotSample, t: f64, config: &ExperimentConfig) -> f64 {
    let k = config.laser.k_2nu();
    k * sample.velocity[0] * t + magnetic_phase_rate(config) * sample.field_offset * t
}

/// Monte Carlo dephasing envelope |⟨e^{iφ_st}⟩| at one gap time.
pub fn mc_envelope(t: f64, shots: u64, config: &ExperimentConfig, seed: u64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for i in 0..shots {
        let mut rng = shot_rng(seed, i);
        let sample = draw_sample(config, &mut rng);
        let phi = stochastic_phase(&sample, t, config);
        c += phi.cos();
        s += phi.sin();
    }
    (c * c + s * s).sqrt() / shots as f64
}

#[derive(Debug, Clone, Copy)]
pub struct RamseyPoint {
    pub t: f64,
    /// Fringe signal (1 + cos(φ_det + φ_st))/2 averaged over shots.
    pub signal: f64,
    /// Fringe contrast |⟨e^{iφ_st}⟩| at this gap time.
    pub envelope: f64,
}

/// Gaussian-envelope fit A·exp(−t²/T₂²). An essentially undecayed contrast
/// takes the infinite-T₂ sentinel path (t2 and uncertainty infinite).
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeFit {
    pub t2: f64,
    pub amplitude: f64,
    pub residual_norm: f64,
    pub t2_uncertainty: f64,
}

#[derive(Debug, Clone)]
pub struct RamseyOutput {
    pub points: Vec<RamseyPoint>,
    pub fit: std::result::Result<EnvelopeFit, String>,
    pub seed: u64,
    pub shots: u64,
}

fn fit_envelope(ts: &[f64], env: &[f64]) -> std::result::Result<EnvelopeFit, String> {
    let n = ts.len();
    if n < 3 {
        return Err("need at least three envelope points".into());
    }
    let span = ts.iter().cloned().fold(0.0, f64::max);
    if span <= 0.0 {
        return Err("degenerate time grid".into());
    }
    let mean = env.iter().sum::<f64>() / n as f64;
    let flat = env.iter().all(|&e| e > 0.95);

    let ssr_and_amp = |t2: f64| {
        let (mut eg, mut gg) = (0.0, 0.0);
        for (&t, &e) in ts.iter().zip(env) {
            let g = (-(t / t2).powi(2)).exp();
            eg += e * g;
            gg += g * g;
        }
        let a = if gg > 0.0 { eg / gg } else { 0.0 };
        let ssr: f64 = ts
            .iter()
            .zip(env)
            .map(|(&t, &e)| (e - a * (-(t / t2).powi(2)).exp()).powi(2))
            .sum();
        (ssr, a)
    };

    if flat {
        return Ok(EnvelopeFit {
            t2: f64::INFINITY,
            amplitude: mean,
            residual_norm: ssr_and_amp(f64::MAX.sqrt()).0.sqrt(),
            t2_uncertainty: f64::INFINITY,
        });
    }

    let lo = span / 50.0;
    let hi = span * 50.0;
    let best = golden_min_log(|t2| ssr_and_amp(t2).0, lo, hi, 200);
    let (t2, ssr0) = match best {
        Ok(v) => v,
        // minimum pinned at the long-T₂ edge: treat as undecayed
        Err(Error::BracketFailure { .. }) => {
            return Ok(EnvelopeFit {
                t2: f64::INFINITY,
                amplitude: mean,
                residual_norm: 0.0,
                t2_uncertainty: f64::INFINITY,
            });
        }
        Err(e) => return Err(e.to_string()),
    };
    let (_, amplitude) = ssr_and_amp(t2);
    let dof = (n as f64 - 2.0).max(1.0);
    let s2 = ssr0 / dof;
    let h = 0.02 * t2;
    let curv = (ssr_and_amp(t2 + h).0 + ssr_and_amp(t2 - h).0 - 2.0 * ssr0) / (h * h);
    let t2_uncertainty = if curv > 0.0 {
        (2.0 * s2 / curv).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(EnvelopeFit {
        t2,
        amplitude,
        residual_norm: ssr0.sqrt(),
        t2_uncertainty,
    })
}

/// Ramsey fringe experiment over a gap-time grid. Per shot the interference
/// signal is (1 + cos(φ_det + φ_st))/2 with a fringe phase φ_det = ω_f·t
/// chosen to put a few fringes across the scan; the contrast envelope is
/// accumulated from both quadratures and fitted to A·exp(−t²/T₂²).
pub fn ramsey_simulate(
    t_grid: &[f64],
    shots: u64,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<RamseyOutput> {
    if t_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if shots < 100 {
        return Err(Error::NonPositive {
            name: "shots (minimum 100)",
            value: shots as f64,
        });
    }
    let span = t_grid.iter().cloned().fold(0.0, f64::max);
    let omega_fringe = if span > 0.0 { 2.0 * PI * 6.0 / span } else { 0.0 };
    let mut points = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..shots {
            let mut rng = shot_rng(seed, (ti as u64) * shots + i);
            let sample = draw_sample(config, &mut rng);
            let phi = stochastic_phase(&sample, t, config);
            c += phi.cos();
            s += phi.sin();
        }
        let (mc, ms) = (c / shots as f64, s / shots as f64);
        let phi_det = omega_fringe * t;
        points.push(RamseyPoint {
            t,
            signal: 0.5 * (1.0 + phi_det.cos() * mc - phi_det.sin() * ms),
            envelope: (mc * mc + ms * ms).sqrt(),
        });
    }
    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let env: Vec<f64> = points.iter().map(|p| p.envelope).collect();
    let fit = fit_envelope(&ts, &env);
    Ok(RamseyOutput {
        points,
        fit,
        seed,
        shots,
    })
}

// ---------------------------------------------------------------------------
// two-qubit measurement machinery (4-dim computational space)

fn analysis_rotation(phase: f64) -> DMatrix<C64> {
    // π/2 pulse about the equatorial axis at angle `phase`, on both qubits
    let mi = C64::new(0.0, -1.0);
    let e = C64::new(0.0, phase).exp();
    let inv = C64::from(1.0 / 2f64.sqrt());
    let mut r = DMatrix::<C64>::zeros(2, 2);
    r[(0, 0)] = inv;
    r[(1, 1)] = inv;
    r[(0, 1)] = inv * mi * e.conj();
    r[(1, 0)] = inv * mi * e;
    r.kronecker(&r)
}

/// Exact parity ⟨Π⟩ = P₀₀ + P₁₁ − P₀₁ − P₁₀ after π/2 analysis rotations at
/// the given phase on both qubits.
pub fn parity_expectation(rho4: &DMatrix<C64>, phase: f64) -> f64 {
    let u = analysis_rotation(phase);
    let rot = &u * rho4 * u.adjoint();
    rot[(0, 0)].re + rot[(3, 3)].re - rot[(1, 1)].re - rot[(2, 2)].re
}

fn measurement_probs(rho4: &DMatrix<C64>) -> [f64; 4] {
    let mut p = [0.0; 4];
    let mut total = 0.0;
    for k in 0..4 {
        p[k] = rho4[(k, k)].re.max(0.0);
        total += p[k];
    }
    if total > 0.0 {
        for v in &mut p {
            *v /= total;
        }
    } else {
        p = [0.25; 4];
    }
    p
}

fn draw_outcome(p: &[f64; 4], rng: &mut ChaCha12Rng) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    3
}

/// Lost atoms read out as an unbiased coin flip drawn at measurement time,
/// so lost shots contribute uncorrelated outcomes (fidelity 1/4 on average).
fn apply_loss_readout(outcome: usize, lost: [bool; 2], rng: &mut ChaCha12Rng) -> usize {
    let mut control = outcome / 2;
    let mut target = outcome % 2;
    if lost[0] {
        control = rng.random::<bool>() as usize;
    }
    if lost[1] {
        target = rng.random::<bool>() as usize;
    }
    2 * control + target
}

#[derive(Debug, Clone)]
pub struct ParityPoint {
    pub phase: f64,
    pub shots: u64,
    pub counts: [u64; 4],
    pub surviving_counts: [u64; 4],
    pub lost_shots: u64,
}

impl ParityPoint {
    pub fn parity_estimate(&self) -> f64 {
        let n: u64 = self.counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        (self.counts[0] as f64 + self.counts[3] as f64
            - self.counts[1] as f64
            - self.counts[2] as f64)
            / n as f64
    }

    pub fn parity_estimate_surviving(&self) -> Option<f64> {
        let n: u64 = self.surviving_counts.iter().sum();
        if n == 0 {
            return None;
        }
        Some(
            (self.surviving_counts[0] as f64 + self.surviving_counts[3] as f64
                - self.surviving_counts[1] as f64
                - self.surviving_counts[2] as f64)
                / n as f64,
        )
    }
}

/// Shot counts from one Bell experiment: computational-basis counts plus a
/// parity scan, with lost shots tracked separately from outcome counts.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    /// Computational-basis shots.
    pub shots: u64,
    /// Outcome counts over {00, 01, 10, 11}; lost atoms read out randomized,
    /// so these always sum to `shots`.
    pub counts: [u64; 4],
    /// Counts restricted to shots where both atoms survived.
    pub surviving_counts: [u64; 4],
    /// Computational-basis shots with at least one atom lost.
    pub lost_shots: u64,
    /// Parity scan points (analysis phase per point).
    pub parity: Vec<ParityPoint>,
    pub gap_time: f64,
    pub seed: u64,
    /// Population left outside the computational subspace by the simulated
    /// preparation (zero in ideal-dynamics mode).
    pub prep_leakage: f64,
}

impl MeasurementRecord {
    pub fn total_shots(&self) -> u64 {
        self.shots + self.parity.iter().map(|p| p.shots).sum::<u64>()
    }

    pub fn total_survivors(&self) -> u64 {
        let pop = self.shots - self.lost_shots;
        pop + self
            .parity
            .iter()
            .map(|p| p.shots - p.lost_shots)
            .sum::<u64>()
    }

    /// CSV export: one row per scan point (`comp` row uses the gap time as
    /// its abscissa; `parity` rows use the analysis phase).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kind,x,n00,n01,n10,n11,shots,lost,surviving");
        let _ = writeln!(
            s,
            "comp,{},{},{},{},{},{},{},{}",
            units::s_to_us(self.gap_time),
            self.counts[0],
            self.counts[1],
            self.counts[2],
            self.counts[3],
            self.shots,
            self.lost_shots,
            self.shots - self.lost_shots
        );
        for p in &self.parity {
            let _ = writeln!(
                s,
                "parity,{},{},{},{},{},{},{},{}",
                p.phase,
                p.counts[0],
                p.counts[1],
                p.counts[2],
                p.counts[3],
                p.shots,
                p.lost_shots,
                p.shots - p.lost_shots
            );
        }
        s
    }
}

/// Bell-fidelity estimates extracted from a record through the
/// parity-oscillation estimator.
#[derive(Debug, Clone, Copy)]
pub struct LossCorrected {
    pub raw_fidelity: f64,
    pub corrected_fidelity: f64,
    pub surviving_fraction: f64,
}

/// Parity-oscillation lower-bound estimator for the fidelity to the
/// even-parity Bell state: F = (P₀₀ + P₁₁)/2 + A/2 with A = 2|ρ₀₀,₁₁|.
pub fn extract_fidelity(p00: f64, p11: f64, amplitude: f64) -> f64 {
    0.5 * (p00 + p11) + 0.5 * amplitude
}

fn fidelity_from_counts(counts: &[u64; 4], parity: &[(f64, f64)]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::NoSurvivingShots);
    }
    let p00 = counts[0] as f64 / n as f64;
    let p11 = counts[3] as f64 / n as f64;
    let phases: Vec<f64> = parity.iter().map(|(p, _)| *p).collect();
    let values: Vec<f64> = parity.iter().map(|(_, v)| *v).collect();
    let (_, amplitude, _) = fit_parity_oscillation(&phases, &values)?;
    Ok(extract_fidelity(p00, p11, amplitude))
}

/// Raw (all shots, lost shots counted as uncorrelated outcomes) and
/// loss-corrected (surviving-pair subset) fidelity estimates, plus the
/// surviving fraction.
pub fn loss_correct(record: &MeasurementRecord) -> Result<LossCorrected> {
    if record.total_survivors() == 0 {
        return Err(Error::NoSurvivingShots);
    }
    let parity_all: Vec<(f64, f64)> = record
        .parity
        .iter()
        .map(|p| (p.phase, p.parity_estimate()))
        .collect();
    let raw = fidelity_from_counts(&record.counts, &parity_all)?;
    let parity_surv: Vec<(f64, f64)> = record
        .parity
        .iter()
        .filter_map(|p| p.parity_estimate_surviving().map(|v| (p.phase, v)))
        .collect();
    let corrected = fidelity_from_counts(&record.surviving_counts, &parity_surv)?;
    Ok(LossCorrected {
        raw_fidelity: raw,
        corrected_fidelity: corrected,
        surviving_fraction: record.total_survivors() as f64 / record.total_shots() as f64,
    })
}

/// Dynamics source for the Bell experiment: a perfect Bell state, or the
/// state prepared by the simulated CNOT sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellMode {
    Ideal,
    Simulated,
}

fn ideal_bell_block(variant: BellVariant) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    let (a, b) = match variant {
        BellVariant::B1 => (0, 3),
        BellVariant::B2 => (1, 2),
    };
    m[(a, a)] = C64::from(0.5);
    m[(b, b)] = C64::from(0.5);
    m[(a, b)] = C64::from(0.5);
    m[(b, a)] = C64::from(0.5);
    m
}

fn control_branch_phase(rho4: &DMatrix<C64>, phi: f64) -> DMatrix<C64> {
    // the control-atom branch that was Rydberg-excited during the gap
    // acquires the stochastic phase: diag(1, 1, e^{iφ}, e^{iφ})
    let mut d = DMatrix::<C64>::identity(4, 4);
    d[(2, 2)] = C64::new(0.0, phi).exp();
    d[(3, 3)] = C64::new(0.0, phi).exp();
    &d * rho4 * d.adjoint()
}

/// Outcome of one simulated Bell experiment.
#[derive(Debug, Clone)]
pub struct BellOutcome {
    pub record: MeasurementRecord,
    /// Estimator applied to all shots / surviving subset.
    pub fidelity: LossCorrected,
    /// Shot-averaged exact fidelity ⟨B|ρ_shot|B⟩ (no projection noise);
    /// matches the analytic fidelity limit in ideal-dynamics mode.
    pub exact_mean_fidelity: f64,
}

pub const PARITY_POINTS_DEFAULT: usize = 16;

/// Run a Bell experiment: prepare the state, dephase the Rydberg-mediated
/// coherence over the gap time per shot, apply loss, and measure in the
/// computational basis plus a parity scan. `shots` applies to the
/// computational basis and again spread across the parity scan.
pub fn bell_experiment(
    gap_t: f64,
    shots: u64,
    config: &ExperimentConfig,
    seed: u64,
    mode: BellMode,
) -> Result<BellOutcome> {
    bell_experiment_offset(gap_t, shots, config, seed, mode, 0)
}

/// Same as [`bell_experiment`] with the shot-index stream offset exposed:
/// two runs covering disjoint index ranges merge (by count addition) into
/// exactly the record a single combined run produces.
pub fn bell_experiment_offset(
    gap_t: f64,
    shots: u64,
    config: &ExperimentConfig,
    seed: u64,
    mode: BellMode,
    shot_offset: u64,
) -> Result<BellOutcome> {
    if shots < 100 {
        return Err(Error::NonPositive {
            name: "shots (minimum 100)",
            value: shots as f64,
        });
    }
    if gap_t < 0.0 {
        return Err(Error::NonPositive {
            name: "gap time",
            value: gap_t,
        });
    }
    let (base, prep_leakage) = match mode {
        BellMode::Ideal => (ideal_bell_block(BellVariant::B1), 0.0),
        BellMode::Simulated => {
            let (rho, _) = bell_prep(config, BellVariant::B1)?;
            let block = rho.computational_block();
            let tr: f64 = (0..4).map(|k| block[(k, k)].re).sum();
            let leak = 1.0 - tr;
            (block / C64::from(tr.max(1e-300)), leak)
        }
    };

    let mut counts = [0u64; 4];
    let mut surviving_counts = [0u64; 4];
    let mut lost_shots = 0u64;
    let mut exact_sum = 0.0;
    let bell_target = ideal_bell_block(BellVariant::B1);

    for i in 0..shots {
        let mut rng = shot_rng(seed, shot_offset + i);
        let sample = draw_sample(config, &mut rng);
        let phi = stochastic_phase(&sample, gap_t, config);
        let rho = control_branch_phase(&base, phi);
        // exact overlap with the Bell target, before measurement or loss
        exact_sum += (0..4)
            .map(|a| (0..4).map(|b| (bell_target[(b, a)] * rho[(a, b)]).re).sum::<f64>())
            .sum::<f64>();
        let outcome = draw_outcome(&measurement_probs(&rho), &mut rng);
        let lost = sample.lost[0] || sample.lost[1];
        let readout = apply_loss_readout(outcome, sample.lost, &mut rng);
        counts[readout] += 1;
        if lost {
            lost_shots += 1;
        } else {
            surviving_counts[readout] += 1;
        }
    }

    // parity scan with its own stream range
    let n_points = PARITY_POINTS_DEFAULT;
    let per_point = (shots / n_points as u64).max(1);
    let mut parity = Vec::with_capacity(n_points);
    for pi in 0..n_points {
        let phase = PI * pi as f64 / n_points as f64;
        let mut point = ParityPoint {
            phase,
            shots: per_point,
            counts: [0; 4],
            surviving_counts: [0; 4],
            lost_shots: 0,
        };
        for s in 0..per_point {
            let stream = shot_offset + shots + (pi as u64) * per_point + s;
            let mut rng = shot_rng(seed, stream);
            let sample = draw_sample(config, &mut rng);
            let phi = stochastic_phase(&sample, gap_t, config);
            let rho = control_branch_phase(&base, phi);
            let u = analysis_rotation(phase);
            let rotated = &u * &rho * u.adjoint();
            let outcome = draw_outcome(&measurement_probs(&rotated), &mut rng);
            let lost = sample.lost[0] || sample.lost[1];
            let readout = apply_loss_readout(outcome, sample.lost, &mut rng);
            point.counts[readout] += 1;
            if lost {
                point.lost_shots += 1;
            } else {
                point.surviving_counts[readout] += 1;
            }
        }
        parity.push(point);
    }

    let record = MeasurementRecord {
        shots,
        counts,
        surviving_counts,
        lost_shots,
        parity,
        gap_time: gap_t,
        seed,
        prep_leakage,
    };
    let fidelity = loss_correct(&record)?;
    Ok(BellOutcome {
        record,
        fidelity,
        exact_mean_fidelity: exact_sum / shots as f64,
    })
}

/// Sampled computational-basis measurement of a fixed two-qubit state.
pub fn sample_populations(rho4: &DMatrix<C64>, shots: u64, seed: u64) -> [u64; 4] {
    let probs = measurement_probs(rho4);
    let mut counts = [0u64; 4];
    for s in 0..shots {
        let mut rng = shot_rng(seed, (1u64 << 50) | s);
        counts[draw_outcome(&probs, &mut rng)] += 1;
    }
    counts
}

/// Sampled parity scan of a fixed two-qubit state (4×4 computational block).
pub fn parity_scan(
    rho4: &DMatrix<C64>,
    phase_grid: &[f64],
    shots_per_point: u64,
    seed: u64,
) -> Result<Vec<ParityPoint>> {
    if phase_grid.len() < 3 {
        return Err(Error::EmptyGrid);
    }
    let span = phase_grid.iter().cloned().fold(f64::MIN, f64::max)
        - phase_grid.iter().cloned().fold(f64::MAX, f64::min);
    // the two-qubit parity oscillates with period π in the analysis phase
    if span < PI * (phase_grid.len() - 1) as f64 / phase_grid.len() as f64 {
        return Err(Error::FitFailure {
            reason: format!("phase grid spans {span:.3} rad, less than one period"),
        });
    }
    let mut out = Vec::with_capacity(phase_grid.len());
    for (pi, &phase) in phase_grid.iter().enumerate() {
        let u = analysis_rotation(phase);
        let rotated = &u * rho4 * u.adjoint();
        let probs = measurement_probs(&rotated);
        let mut point = ParityPoint {
            phase,
            shots: shots_per_point,
            counts: [0; 4],
            surviving_counts: [0; 4],
            lost_shots: 0,
        };
        for s in 0..shots_per_point {
            let mut rng = shot_rng(seed, (pi as u64) << 40 | s);
            let outcome = draw_outcome(&probs, &mut rng);
            point.counts[outcome] += 1;
            point.surviving_counts[outcome] += 1;
        }
        out.push(point);
    }
    Ok(out)
}

/// Fit Π(φ) samples to offset + A·cos(2φ + φ₀); returns (offset, A, φ₀).
pub fn parity_fit(points: &[ParityPoint]) -> Result<(f64, f64, f64)> {
    let phases: Vec<f64> = points.iter().map(|p| p.phase).collect();
    let values: Vec<f64> = points.iter().map(|p| p.parity_estimate()).collect();
    fit_parity_oscillation(&phases, &values)
}

/// Structured summary with the seed recorded, for the machine-readable
/// export path.
pub fn bell_summary_json(outcome: &BellOutcome) -> String {
    let r = &outcome.record;
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"seed\": {},", r.seed);
    let _ = writeln!(s, "  \"gap_time_us\": {},", units::s_to_us(r.gap_time));
    let _ = writeln!(s, "  \"shots\": {},", r.shots);
    let _ = writeln!(s, "  \"total_shots\": {},", r.total_shots());
    let _ = writeln!(s, "  \"lost_shots\": {},", r.lost_shots);
    let _ = writeln!(
        s,
        "  \"surviving_fraction\": {},",
        outcome.fidelity.surviving_fraction
    );
    let _ = writeln!(s, "  \"fidelity_raw\": {},", outcome.fidelity.raw_fidelity);
    let _ = writeln!(
        s,
        "  \"fidelity_loss_corrected\": {},",
        outcome.fidelity.corrected_fidelity
    );
    let _ = writeln!(
        s,
        "  \"fidelity_exact_mean\": {},",
        outcome.exact_mean_fidelity
    );
    let _ = writeln!(s, "  \"prep_leakage\": {}", r.prep_leakage);
    s.push('}');
    s.push('\n');
    s
}
