//! Full two-atom density-matrix simulation of the blockade pulse protocols:
//! the three-pulse phase gate, both CNOT constructions, Bell-state
//! preparation, and gate/state fidelity metrics.
//!
//! Pulses are piecewise constant, so each segment is propagated by the exact
//! exponential of its fixed Lindblad generator; the step parameter defines
//! the frequency-resolution contract and reported results are independent of
//! it beyond that check. Radiative decay routes |r⟩ entirely to the sink
//! |d⟩ at rate 1/τ on each atom. Deterministic optical phases are tracked
//! explicitly; stochastic dephasing lives in the montecarlo module.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::blockade::blockade_shift;
use crate::density::{
    embed_computational, level_vector, product_index, product_state, state_fidelity, Level,
    TwoAtomDensityMatrix, COMPUTATIONAL, DIM, N_LEVELS,
};
use crate::error::{Error, Result};
use crate::numerics::expm;
use crate::params::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    Control,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseTarget {
    Control,
    Target,
    Both,
}

/// Which qubit state the Rydberg laser addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    ZeroR,
    OneR,
}

impl Transition {
    fn qubit_index(self) -> usize {
        match self {
            Transition::ZeroR => 0,
            Transition::OneR => 1,
        }
    }
}

/// One piecewise-constant Rabi drive. Duration is area/omega.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub target: PulseTarget,
    pub transition: Transition,
    /// Rabi amplitude Ω (rad/s).
    pub omega: f64,
    /// Laser detuning from the addressed transition (rad/s).
    pub detuning: f64,
    /// Optical phase (rad).
    pub phase: f64,
    /// Pulse area (rad).
    pub area: f64,
}

impl Pulse {
    pub fn duration(&self) -> f64 {
        self.area / self.omega
    }
}

/// Sequence element. Rotations and phase shifts are ideal instantaneous
/// single-qubit operations on the 0↔1 transition (single-qubit operation
/// errors are out of scope for this artifact).
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceElement {
    Pulse(Pulse),
    Gap { duration: f64 },
    /// exp(−i(θ/2)(cos φ_a X + sin φ_a Y)) on one atom's qubit subspace.
    Rotation { atom: Atom, theta: f64, axis_phase: f64 },
    /// Virtual Z: diag(1, e^{iφ}) on one atom's qubit subspace.
    PhaseShift { atom: Atom, phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<SequenceElement>,
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for el in &self.elements {
            match el {
                SequenceElement::Pulse(p) => {
                    if p.omega <= 0.0 {
                        return Err(Error::NonPositive {
                            name: "pulse Rabi amplitude",
                            value: p.omega,
                        });
                    }
                    if p.area <= 0.0 {
                        return Err(Error::NonPositive {
                            name: "pulse area",
                            value: p.area,
                        });
                    }
                }
                SequenceElement::Gap { duration } if *duration <= 0.0 => {
                    return Err(Error::NonPositive {
                        name: "gap duration",
                        value: *duration,
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.elements
            .iter()
            .map(|el| match el {
                SequenceElement::Pulse(p) => p.duration(),
                SequenceElement::Gap { duration } => *duration,
                _ => 0.0,
            })
            .sum()
    }

    /// Documented text form, one element per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# pulse sequence: {} elements, total duration {} s",
            self.elements.len(),
            self.total_duration()
        );
        for el in &self.elements {
            match el {
                SequenceElement::Pulse(p) => {
                    let _ = writeln!(
                        s,
                        "pulse atom={} transition={} rabi_rad_s={} detuning_rad_s={} phase_rad={} area_rad={} duration_s={}",
                        match p.target {
                            PulseTarget::Control => "control",
                            PulseTarget::Target => "target",
                            PulseTarget::Both => "both",
                        },
                        match p.transition {
                            Transition::ZeroR => "0r",
                            Transition::OneR => "1r",
                        },
                        p.omega,
                        p.detuning,
                        p.phase,
                        p.area,
                        p.duration()
                    );
                }
                SequenceElement::Gap { duration } => {
                    let _ = writeln!(s, "gap duration_s={duration}");
                }
                SequenceElement::Rotation {
                    atom,
                    theta,
                    axis_phase,
                } => {
                    let _ = writeln!(
                        s,
                        "rotation atom={} theta_rad={} axis_phase_rad={}",
                        if *atom == Atom::Control { "control" } else { "target" },
                        theta,
                        axis_phase
                    );
                }
                SequenceElement::PhaseShift { atom, phi } => {
                    let _ = writeln!(
                        s,
                        "phase_shift atom={} phi_rad={}",
                        if *atom == Atom::Control { "control" } else { "target" },
                        phi
                    );
                }
            }
        }
        s
    }
}

/// Simulation options. The blockade shift entering the Hamiltonian is capped
/// at `b_cap_ratio`·Ω: the blockaded amplitude scales as Ω/B, so beyond
/// B ≫ Ω a larger value only inflates the generator norm. An infinite model
/// shift bypasses the cap and is applied structurally (exact perfect
/// blockade: couplings into |rr⟩ removed).
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub b_cap_ratio: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { b_cap_ratio: 100.0 }
    }
}

/// Assembled two-atom Hamiltonian for one segment, with bookkeeping flags.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub matrix: DMatrix<C64>,
    /// Blockade shift actually applied (rad/s); infinite means structural.
    pub b_applied: f64,
    pub b_capped: bool,
    pub perfect_blockade: bool,
    /// Largest angular frequency scale in the segment (rad/s).
    pub max_frequency: f64,
    /// Qubit-frame bookkeeping: the drive frame gives the spectator level a
    /// static diagonal energy, so after a segment of duration t that level
    /// must be rotated back by e^{+i·rate·t} to return to the co-rotating
    /// qubit frame in which qubit phases are defined. Entries are
    /// (atom, single-atom level, rate in rad/s).
    pub frame_phases: Vec<(Atom, usize, f64)>,
}

fn rr_index() -> usize {
    product_index(Level::Rydberg, Level::Rydberg)
}

/// Single-atom drive block: the addressed transition couples resonantly at
/// Ω/2 e^{iφ}, and the spectator qubit state couples to |r⟩ with the same
/// amplitude at detuning ω_hf (the leakage channel behind the Ω²/ω_hf²
/// error terms). Infinite ω_hf drops the spectator coupling exactly.
fn drive_block(
    omega: f64,
    phase: f64,
    detuning: f64,
    transition: Transition,
    omega_hf: f64,
) -> DMatrix<C64> {
    let mut a = DMatrix::<C64>::zeros(N_LEVELS, N_LEVELS);
    let q = transition.qubit_index();
    let s = 1 - q;
    let r = Level::Rydberg as usize;
    let half = C64::from(omega / 2.0) * C64::new(0.0, phase).exp();
    a[(r, q)] = half;
    a[(q, r)] = half.conj();
    if omega_hf.is_finite() {
        a[(r, s)] = half;
        a[(s, r)] = half.conj();
        // spectator energy in the frame of the addressed transition
        let e_s = if q == 1 { -omega_hf } else { omega_hf };
        a[(s, s)] = C64::from(e_s);
    }
    a[(r, r)] = C64::from(-detuning);
    a
}

fn blockade_for(config: &ExperimentConfig) -> Result<f64> {
    blockade_shift(&config.blockade, config.separation)
}

fn assemble_hamiltonian(
    control_block: Option<&DMatrix<C64>>,
    target_block: Option<&DMatrix<C64>>,
    b_model: f64,
    omega_scale: f64,
    opts: &SimOptions,
) -> HamiltonianSpec {
    let id = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
    let mut h = DMatrix::<C64>::zeros(DIM, DIM);
    if let Some(c) = control_block {
        h += c.kronecker(&id);
    }
    if let Some(t) = target_block {
        h += id.kronecker(t);
    }
    let perfect = b_model.is_infinite();
    let (b_applied, b_capped) = if perfect {
        (f64::INFINITY, false)
    } else {
        let cap = opts.b_cap_ratio * omega_scale;
        if omega_scale > 0.0 && b_model > cap {
            (cap, true)
        } else {
            (b_model, false)
        }
    };
    if perfect {
        let rr = rr_index();
        for k in 0..DIM {
            if k != rr {
                h[(rr, k)] = C64::from(0.0);
                h[(k, rr)] = C64::from(0.0);
            }
        }
    } else {
        let rr = rr_index();
        h[(rr, rr)] += C64::from(b_applied);
    }
    let max_frequency = h
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    HamiltonianSpec {
        matrix: h,
        b_applied,
        b_capped,
        perfect_blockade: perfect,
        max_frequency,
        frame_phases: Vec::new(),
    }
}

/// Two-atom Hamiltonian for one pulse: addressed drive block(s) on the
/// pulsed atom(s), blockade shift B on |rr⟩⟨rr|.
pub fn build_hamiltonian(config: &ExperimentConfig, pulse: &Pulse) -> Result<HamiltonianSpec> {
    build_hamiltonian_opts(config, pulse, &SimOptions::default())
}

pub fn build_hamiltonian_opts(
    config: &ExperimentConfig,
    pulse: &Pulse,
    opts: &SimOptions,
) -> Result<HamiltonianSpec> {
    if pulse.omega <= 0.0 {
        return Err(Error::NonPositive {
            name: "pulse Rabi amplitude",
            value: pulse.omega,
        });
    }
    let block = drive_block(
        pulse.omega,
        pulse.phase,
        pulse.detuning,
        pulse.transition,
        config.species.omega_hf,
    );
    let b = blockade_for(config)?;
    let (cb, tb) = match pulse.target {
        PulseTarget::Control => (Some(&block), None),
        PulseTarget::Target => (None, Some(&block)),
        PulseTarget::Both => (Some(&block), Some(&block)),
    };
    let mut h = assemble_hamiltonian(cb, tb, b, pulse.omega, opts);
    if config.species.omega_hf.is_finite() {
        let q = pulse.transition.qubit_index();
        let s = 1 - q;
        let rate = if q == 1 {
            -config.species.omega_hf
        } else {
            config.species.omega_hf
        };
        let atoms: &[Atom] = match pulse.target {
            PulseTarget::Control => &[Atom::Control],
            PulseTarget::Target => &[Atom::Target],
            PulseTarget::Both => &[Atom::Control, Atom::Target],
        };
        for &atom in atoms {
            h.frame_phases.push((atom, s, rate));
        }
    }
    Ok(h)
}

fn frame_correction(h: &HamiltonianSpec, duration: f64) -> Option<DMatrix<C64>> {
    if h.frame_phases.is_empty() {
        return None;
    }
    let mut u = DMatrix::<C64>::identity(DIM, DIM);
    for &(atom, level, rate) in &h.frame_phases {
        let phase = C64::new(0.0, rate * duration).exp();
        let mut u4 = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
        u4[(level, level)] = phase;
        let id = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
        let u16 = match atom {
            Atom::Control => u4.kronecker(&id),
            Atom::Target => id.kronecker(&u4),
        };
        u = u16 * u;
    }
    Some(u)
}

fn gap_hamiltonian(config: &ExperimentConfig, opts: &SimOptions) -> Result<HamiltonianSpec> {
    let b = blockade_for(config)?;
    // no drive to set a cap scale; apply the model shift as-is when finite
    Ok(assemble_hamiltonian(None, None, b, f64::INFINITY, opts))
}

fn vec_rho(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec_rho(v: &DVector<C64>) -> DMatrix<C64> {
    DMatrix::from_column_slice(DIM, DIM, v.as_slice())
}

/// Lindblad generator in column-major vectorization: coherent part plus one
/// decay channel |r⟩ → |d⟩ at rate γ on each atom.
fn liouvillian(h: &DMatrix<C64>, gamma: f64) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(DIM, DIM);
    let i = C64::new(0.0, 1.0);
    let mut sup = id.kronecker(h) * (-i) + h.transpose().kronecker(&id) * i;
    if gamma > 0.0 {
        let mut l_single = DMatrix::<C64>::zeros(N_LEVELS, N_LEVELS);
        l_single[(Level::Sink as usize, Level::Rydberg as usize)] = C64::from(1.0);
        let id4 = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
        for l in [l_single.kronecker(&id4), id4.kronecker(&l_single)] {
            let ldl = l.adjoint() * &l;
            sup += (l.conjugate().kronecker(&l)
                - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * C64::from(0.5))
                * C64::from(gamma);
        }
    }
    sup
}

fn segment_propagator(h: &HamiltonianSpec, tau: f64, duration: f64) -> DMatrix<C64> {
    let gamma = if tau.is_finite() { 1.0 / tau } else { 0.0 };
    let l = liouvillian(&h.matrix, gamma) * C64::from(duration);
    expm(&l)
}

/// Embed a single-qubit unitary (2×2 on {|0⟩,|1⟩}) into one atom of the
/// product space.
fn embed_qubit_unitary(u2: &DMatrix<C64>, atom: Atom) -> DMatrix<C64> {
    let mut u4 = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
    for i in 0..2 {
        for j in 0..2 {
            u4[(i, j)] = u2[(i, j)];
        }
    }
    let id = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
    match atom {
        Atom::Control => u4.kronecker(&id),
        Atom::Target => id.kronecker(&u4),
    }
}

fn rotation_unitary(theta: f64, axis_phase: f64) -> DMatrix<C64> {
    // exp(−i(θ/2)(cosφ X + sinφ Y))
    let c = C64::from((theta / 2.0).cos());
    let s = (theta / 2.0).sin();
    let m_i = C64::new(0.0, -1.0);
    let e = C64::new(0.0, axis_phase).exp();
    let mut u = DMatrix::<C64>::zeros(2, 2);
    u[(0, 0)] = c;
    u[(1, 1)] = c;
    u[(0, 1)] = m_i * s * e.conj();
    u[(1, 0)] = m_i * s * e;
    u
}

fn phase_unitary(phi: f64) -> DMatrix<C64> {
    let mut u = DMatrix::<C64>::identity(2, 2);
    u[(1, 1)] = C64::new(0.0, phi).exp();
    u
}

/// Run bookkeeping for a propagated sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunInfo {
    pub b_capped: bool,
    pub perfect_blockade: bool,
    pub total_duration: f64,
}

/// Precomposed superoperator for a whole sequence; reuse it to evolve many
/// inputs through the same sequence cheaply.
pub struct SequencePropagator {
    sup: DMatrix<C64>,
    pub info: RunInfo,
}

impl SequencePropagator {
    pub fn new(config: &ExperimentConfig, seq: &PulseSequence) -> Result<Self> {
        Self::with_options(config, seq, &SimOptions::default())
    }

    pub fn with_options(
        config: &ExperimentConfig,
        seq: &PulseSequence,
        opts: &SimOptions,
    ) -> Result<Self> {
        seq.validate()?;
        let mut sup = DMatrix::<C64>::identity(DIM * DIM, DIM * DIM);
        let mut info = RunInfo {
            total_duration: seq.total_duration(),
            ..Default::default()
        };
        for el in &seq.elements {
            let step_sup = match el {
                SequenceElement::Pulse(p) => {
                    let h = build_hamiltonian_opts(config, p, opts)?;
                    info.b_capped |= h.b_capped;
                    info.perfect_blockade |= h.perfect_blockade;
                    let mut sup = segment_propagator(&h, config.level.tau, p.duration());
                    if let Some(u) = frame_correction(&h, p.duration()) {
                        sup = u.conjugate().kronecker(&u) * sup;
                    }
                    sup
                }
                SequenceElement::Gap { duration } => {
                    let h = gap_hamiltonian(config, opts)?;
                    info.perfect_blockade |= h.perfect_blockade;
                    segment_propagator(&h, config.level.tau, *duration)
                }
                SequenceElement::Rotation {
                    atom,
                    theta,
                    axis_phase,
                } => {
                    let u = embed_qubit_unitary(&rotation_unitary(*theta, *axis_phase), *atom);
                    u.conjugate().kronecker(&u)
                }
                SequenceElement::PhaseShift { atom, phi } => {
                    let u = embed_qubit_unitary(&phase_unitary(*phi), *atom);
                    u.conjugate().kronecker(&u)
                }
            };
            sup = step_sup * sup;
        }
        Ok(Self { sup, info })
    }

    pub fn apply(&self, rho: &TwoAtomDensityMatrix) -> TwoAtomDensityMatrix {
        let out = unvec_rho(&(&self.sup * vec_rho(rho.matrix())));
        TwoAtomDensityMatrix::from_matrix(out).expect("dimensions preserved")
    }

    /// Linear action on an arbitrary 16×16 operator (used for map
    /// tomography with matrix units).
    pub fn apply_operator(&self, op: &DMatrix<C64>) -> DMatrix<C64> {
        unvec_rho(&(&self.sup * vec_rho(op)))
    }
}

/// Lindblad evolution of `rho` under a fixed segment Hamiltonian with decay
/// |r⟩→|d⟩ at rate 1/τ per atom. The segment is propagated by the exact
/// generator exponential; `step` must still resolve the fastest frequency.
pub fn evolve(
    rho: &TwoAtomDensityMatrix,
    h: &HamiltonianSpec,
    tau: f64,
    duration: f64,
    step: f64,
) -> Result<TwoAtomDensityMatrix> {
    if duration < 0.0 {
        return Err(Error::NonPositive {
            name: "duration",
            value: duration,
        });
    }
    if step <= 0.0 {
        return Err(Error::NonPositive {
            name: "step",
            value: step,
        });
    }
    if h.max_frequency > 0.0 {
        let required = TAU / (10.0 * h.max_frequency);
        if step > required {
            return Err(Error::StepTooCoarse { step, required });
        }
    }
    let p = segment_propagator(h, tau, duration);
    let mut out = unvec_rho(&(p * vec_rho(rho.matrix())));
    if let Some(u) = frame_correction(h, duration) {
        out = &u * out * u.adjoint();
    }
    TwoAtomDensityMatrix::from_matrix(out)
}

/// Default integration step for a segment: min(2π/(50·f_max), duration/100).
pub fn default_step(h: &HamiltonianSpec, duration: f64) -> f64 {
    let by_freq = if h.max_frequency > 0.0 {
        TAU / (50.0 * h.max_frequency)
    } else {
        f64::INFINITY
    };
    by_freq.min(duration / 100.0)
}

pub fn run_sequence(
    config: &ExperimentConfig,
    seq: &PulseSequence,
    rho0: &TwoAtomDensityMatrix,
) -> Result<(TwoAtomDensityMatrix, RunInfo)> {
    let prop = SequencePropagator::new(config, seq)?;
    Ok((prop.apply(rho0), prop.info))
}

// ---------------------------------------------------------------------------
// protocol sequences

fn qubit_pulse(target: PulseTarget, transition: Transition, omega: f64, area: f64) -> SequenceElement {
    SequenceElement::Pulse(Pulse {
        target,
        transition,
        omega,
        detuning: 0.0,
        phase: 0.0,
        area,
    })
}

/// Three-pulse controlled-phase sequence: π on the control 1↔r, 2π on the
/// target 1↔r, π on the control 1↔r, zero default gaps. In the ideal limit
/// the computational map is diag(1, −1, −1, −1).
pub fn cz_sequence(config: &ExperimentConfig) -> PulseSequence {
    cz_sequence_on(config, Atom::Control)
}

/// Same sequence with the named atom taking the control role; the phase
/// pattern is symmetric under the swap.
pub fn cz_sequence_on(config: &ExperimentConfig, control_role: Atom) -> PulseSequence {
    let omega = config.laser.omega;
    let (first, second) = match control_role {
        Atom::Control => (PulseTarget::Control, PulseTarget::Target),
        Atom::Target => (PulseTarget::Target, PulseTarget::Control),
    };
    PulseSequence {
        elements: vec![
            qubit_pulse(first, Transition::OneR, omega, PI),
            qubit_pulse(second, Transition::OneR, omega, TAU),
            qubit_pulse(first, Transition::OneR, omega, PI),
        ],
    }
}

/// CNOT as the phase gate wrapped in ideal instantaneous target rotations.
/// The wrapper phases (pre R_y(π/2); post Z then R_y(−π/2)) are chosen so
/// the computational map is the textbook CNOT, standard truth table.
pub fn cnot_hadamard_variant(config: &ExperimentConfig) -> PulseSequence {
    let mut elements = vec![SequenceElement::Rotation {
        atom: Atom::Target,
        theta: PI / 2.0,
        axis_phase: PI / 2.0,
    }];
    elements.extend(cz_sequence(config).elements);
    elements.push(SequenceElement::PhaseShift {
        atom: Atom::Target,
        phi: PI,
    });
    elements.push(SequenceElement::Rotation {
        atom: Atom::Target,
        theta: -PI / 2.0,
        axis_phase: PI / 2.0,
    });
    PulseSequence { elements }
}

/// Controlled amplitude swap: π on control 1↔r, then the target triple
/// π(0↔r), π(1↔r), π(0↔r), then π on control 1↔r. A Rydberg-excited
/// control (input |1⟩) blockades the swap, so the target flips when the
/// control is |0⟩; the full deterministic map is −(X ⊕ 1), recorded in
/// [`amplitude_swap_ideal`].
pub fn cnot_amplitude_swap(config: &ExperimentConfig) -> PulseSequence {
    let omega = config.laser.omega;
    PulseSequence {
        elements: vec![
            qubit_pulse(PulseTarget::Control, Transition::OneR, omega, PI),
            qubit_pulse(PulseTarget::Target, Transition::ZeroR, omega, PI),
            qubit_pulse(PulseTarget::Target, Transition::OneR, omega, PI),
            qubit_pulse(PulseTarget::Target, Transition::ZeroR, omega, PI),
            qubit_pulse(PulseTarget::Control, Transition::OneR, omega, PI),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellVariant {
    B1,
    B2,
}

/// Preparation sequence for the Bell experiment: the Hadamard-variant CNOT
/// followed by the documented S† frame correction on the control, which
/// maps the raw output (|00⟩ + i|11⟩)/√2 onto the textbook Bell state.
pub fn bell_prep_sequence(config: &ExperimentConfig) -> PulseSequence {
    let mut seq = cnot_hadamard_variant(config);
    seq.elements.push(SequenceElement::PhaseShift {
        atom: Atom::Control,
        phi: -PI / 2.0,
    });
    seq
}

/// Initial product state for the Bell experiment: control (|0⟩ + i|1⟩)/√2,
/// target |0⟩ (B1) or |1⟩ (B2).
pub fn bell_initial_state(variant: BellVariant) -> TwoAtomDensityMatrix {
    let mut c = DVector::<C64>::zeros(N_LEVELS);
    c[0] = C64::from(1.0 / 2f64.sqrt());
    c[1] = C64::new(0.0, 1.0 / 2f64.sqrt());
    let t = level_vector(match variant {
        BellVariant::B1 => Level::Zero,
        BellVariant::B2 => Level::One,
    });
    TwoAtomDensityMatrix::from_pure(&product_state(&c, &t)).expect("unit-norm product state")
}

/// Prepare a Bell state through the simulated CNOT; returns the final
/// density matrix and run bookkeeping.
pub fn bell_prep(
    config: &ExperimentConfig,
    variant: BellVariant,
) -> Result<(TwoAtomDensityMatrix, RunInfo)> {
    let seq = bell_prep_sequence(config);
    run_sequence(config, &seq, &bell_initial_state(variant))
}

// ---------------------------------------------------------------------------
// ideal computational-subspace gates

pub fn cz_ideal() -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::from(1.0),
        C64::from(-1.0),
        C64::from(-1.0),
        C64::from(-1.0),
    ]))
}

pub fn cnot_ideal() -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    m[(0, 0)] = C64::from(1.0);
    m[(1, 1)] = C64::from(1.0);
    m[(2, 3)] = C64::from(1.0);
    m[(3, 2)] = C64::from(1.0);
    m
}

/// Recorded phase frame of the amplitude swap: a target flip conditioned on
/// the control being |0⟩ (inverted control polarity — a Rydberg-excited
/// control blockades the swap). The pulse phases produce an overall −1,
/// which is a global phase and is fixed away by the anchored convention of
/// [`computational_map`].
pub fn amplitude_swap_ideal() -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    m[(0, 1)] = C64::from(1.0);
    m[(1, 0)] = C64::from(1.0);
    m[(2, 2)] = C64::from(1.0);
    m[(3, 3)] = C64::from(1.0);
    m
}

// ---------------------------------------------------------------------------
// fidelity metrics

/// The eight documented gate-error inputs: the four computational states and
/// the four product superpositions (|0⟩ ± |1⟩)/√2 ⊗ (|0⟩ ± |1⟩)/√2.
fn gate_error_inputs() -> Vec<[C64; 4]> {
    let mut inputs = Vec::with_capacity(8);
    for k in 0..4 {
        let mut a = [C64::from(0.0); 4];
        a[k] = C64::from(1.0);
        inputs.push(a);
    }
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let h = C64::from(0.5);
            inputs.push([h, h * s2, h * s1, h * s1 * s2]);
        }
    }
    inputs
}

fn apply_ideal(ideal: &DMatrix<C64>, amps: &[C64; 4]) -> [C64; 4] {
    let v = DVector::from_column_slice(amps);
    let out = ideal * v;
    [out[0], out[1], out[2], out[3]]
}

/// Mean gate error over the documented input set against an ideal 4×4
/// computational-subspace unitary: E = 1 − mean ⟨ψ_ideal|ρ_out|ψ_ideal⟩.
pub fn gate_error(
    config: &ExperimentConfig,
    seq: &PulseSequence,
    ideal: &DMatrix<C64>,
) -> Result<f64> {
    if ideal.nrows() != 4 || ideal.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: ideal.nrows().max(ideal.ncols()),
        });
    }
    let prop = SequencePropagator::new(config, seq)?;
    gate_error_with(&prop, ideal)
}

pub fn gate_error_with(prop: &SequencePropagator, ideal: &DMatrix<C64>) -> Result<f64> {
    let mut total = 0.0;
    let inputs = gate_error_inputs();
    for amps in &inputs {
        let rho_in = TwoAtomDensityMatrix::from_pure(&embed_computational(amps))?;
        let rho_out = prop.apply(&rho_in);
        let psi_ideal = embed_computational(&apply_ideal(ideal, amps));
        total += state_fidelity(&rho_out, &psi_ideal)?;
    }
    Ok(1.0 - total / inputs.len() as f64)
}

/// Computational-subspace map of a sequence, reconstructed by propagating
/// matrix units |k⟩⟨0| and anchoring the global phase on the largest entry
/// of the first column. For a near-unitary sequence this returns the 4×4
/// gate matrix with the global phase fixed.
pub fn computational_map(prop: &SequencePropagator) -> DMatrix<C64> {
    // first-column magnitudes from the physical evolution of |00⟩⟨00|
    let mut e00 = DMatrix::<C64>::zeros(DIM, DIM);
    e00[(COMPUTATIONAL[0], COMPUTATIONAL[0])] = C64::from(1.0);
    let col0 = prop.apply_operator(&e00);
    let (mut anchor, mut best) = (0usize, -1.0);
    for (m, &km) in COMPUTATIONAL.iter().enumerate() {
        let p = col0[(km, km)].re;
        if p > best {
            best = p;
            anchor = m;
        }
    }
    let ka = COMPUTATIONAL[anchor];
    let scale = best.max(1e-300).sqrt();
    let mut map = DMatrix::<C64>::zeros(4, 4);
    for (k, &kk) in COMPUTATIONAL.iter().enumerate() {
        let mut ek0 = DMatrix::<C64>::zeros(DIM, DIM);
        ek0[(kk, COMPUTATIONAL[0])] = C64::from(1.0);
        let out = prop.apply_operator(&ek0);
        for (j, &kj) in COMPUTATIONAL.iter().enumerate() {
            map[(j, k)] = out[(kj, ka)] / C64::from(scale);
        }
    }
    map
}

pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    }
    if y <= -PI {
        y += TAU;
    }
    y
}

/// Local-frame-invariant conditional phase of a near-diagonal map:
/// arg(M₀₀) + arg(M₁₁) − arg(M₀₁…) … explicitly
/// φ_c = arg(M_00) + arg(M_11·) computed as
/// arg(M[0,0]) + arg(M[3,3]) − arg(M[1,1]) − arg(M[2,2]), wrapped to (−π, π].
pub fn conditional_phase(map: &DMatrix<C64>) -> f64 {
    wrap_angle(map[(0, 0)].arg() + map[(3, 3)].arg() - map[(1, 1)].arg() - map[(2, 2)].arg())
}

/// Gate error with every deterministic diagonal phase calibrated out:
/// compares against diag(e^{i·arg M_kk}), isolating population/leakage
/// errors. This is the comparison the analytic budget's leakage terms
/// describe (they count the oscillation-averaged loss with the known
/// systematic conditional phase removed). Valid for near-diagonal maps.
pub fn gate_error_calibrated(config: &ExperimentConfig, seq: &PulseSequence) -> Result<f64> {
    let prop = SequencePropagator::new(config, seq)?;
    gate_error_calibrated_with(&prop)
}

pub fn gate_error_calibrated_with(prop: &SequencePropagator) -> Result<f64> {
    let map = computational_map(prop);
    let mut ideal = DMatrix::<C64>::zeros(4, 4);
    for k in 0..4 {
        let z = map[(k, k)];
        let phase = if z.norm() > 0.0 {
            z / C64::from(z.norm())
        } else {
            C64::from(1.0)
        };
        ideal[(k, k)] = phase;
    }
    gate_error_with(prop, &ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::units;

    const COMMON: &str = "\
laser.rabi1_ghz = 1.146
laser.intermediate_lifetime_ns = 125
laser.detuning_ghz = 20
laser.lambda_1_nm = 480
laser.lambda_2_nm = 780
laser.geometry = co
env.temperature_uk = 60
env.sigma_t = 2.5e-6
geometry.separation_um = 5
blockade.model = constant
";

    fn config(omega_mhz: f64, b_ghz: f64, whf_ghz: f64, tau_us: f64) -> ExperimentConfig {
        fn f(x: f64) -> String {
            if x.is_infinite() {
                "inf".into()
            } else {
                format!("{x}")
            }
        }
        let text = format!(
            "level.n = 150\nlevel.tau_us = {}\nspecies.omega_hf_ghz = {}\n\
             laser.rabi_mhz = {}\nblockade.b_ghz = {}\n{COMMON}",
            f(tau_us),
            f(whf_ghz),
            f(omega_mhz),
            f(b_ghz),
        );
        ExperimentConfig::from_text(&text).unwrap()
    }

    fn ideal_config() -> ExperimentConfig {
        config(30.0, f64::INFINITY, f64::INFINITY, f64::INFINITY)
    }

    #[test]
    fn control_pulse_leaves_target_sector_undriven() {
        let cfg = ideal_config();
        let p = Pulse {
            target: PulseTarget::Control,
            transition: Transition::OneR,
            omega: cfg.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        assert!((h.matrix.clone() - h.matrix.adjoint()).norm() < 1e-18);
        // every coupling changes the control level; target level is preserved
        for i in 0..DIM {
            for j in 0..DIM {
                if i != j && h.matrix[(i, j)].norm() > 0.0 {
                    assert_eq!(i % N_LEVELS, j % N_LEVELS, "target level changed at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn zero_blockade_hamiltonian_is_separable() {
        let cfg = config(10.0, 1e-30, 6.834682610904, 500.0);
        let p = Pulse {
            target: PulseTarget::Both,
            transition: Transition::OneR,
            omega: cfg.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        let a = drive_block(cfg.laser.omega, 0.0, 0.0, Transition::OneR, cfg.species.omega_hf);
        let id = DMatrix::<C64>::identity(N_LEVELS, N_LEVELS);
        let expected = a.kronecker(&id) + id.kronecker(&a);
        assert!((h.matrix.clone() - expected).norm() < 1e-18);
    }

    #[test]
    fn blockade_shifts_rr_eigenvalue_exactly() {
        let cfg_b = config(30.0, 1.0, f64::INFINITY, f64::INFINITY);
        let cfg_0 = config(30.0, 1e-30, f64::INFINITY, f64::INFINITY);
        let p = Pulse {
            target: PulseTarget::Target,
            transition: Transition::OneR,
            omega: cfg_b.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let hb = build_hamiltonian(&cfg_b, &p).unwrap();
        let h0 = build_hamiltonian(&cfg_0, &p).unwrap();
        let diff = &hb.matrix - &h0.matrix;
        let rr = rr_index();
        for i in 0..DIM {
            for j in 0..DIM {
                let expect = if i == rr && j == rr {
                    units::ghz_to_rad(1.0)
                } else {
                    0.0
                };
                assert!((diff[(i, j)] - C64::from(expect)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn free_evolution_is_identity() {
        let cfg = ideal_config();
        let h = gap_hamiltonian(&cfg, &SimOptions::default()).unwrap();
        let rho = bell_initial_state(BellVariant::B1);
        let out = evolve(&rho, &h, f64::INFINITY, 1e-6, 1e-9).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn rydberg_population_decays_exponentially() {
        let cfg = config(30.0, f64::INFINITY, f64::INFINITY, 500.0);
        let h = gap_hamiltonian(&cfg, &SimOptions::default()).unwrap();
        let rho = TwoAtomDensityMatrix::basis_state(Level::Rydberg, Level::Zero);
        let tau = cfg.level.tau;
        let t = 0.7 * tau;
        let out = evolve(&rho, &h, tau, t, tau / 1e4).unwrap();
        let p_r = out.population(Level::Rydberg, Level::Zero);
        let p_d = out.population(Level::Sink, Level::Zero);
        assert!((p_r - (-t / tau).exp()).abs() < 1e-12);
        assert!((p_d - (1.0 - (-t / tau).exp())).abs() < 1e-12);
        assert!((out.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_pi_pulse_transfers_population() {
        let cfg = ideal_config();
        let p = Pulse {
            target: PulseTarget::Target,
            transition: Transition::OneR,
            omega: cfg.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        let rho = TwoAtomDensityMatrix::basis_state(Level::Zero, Level::One);
        let out = evolve(&rho, &h, f64::INFINITY, p.duration(), default_step(&h, p.duration()))
            .unwrap();
        assert!(out.population(Level::Zero, Level::Rydberg) > 1.0 - 1e-9);
        // -i phase convention of a resonant π pulse
        let psi = {
            let mut v = DVector::<C64>::zeros(DIM);
            v[product_index(Level::Zero, Level::Rydberg)] = C64::new(0.0, -1.0);
            v
        };
        assert!(state_fidelity(&out, &psi).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn step_check_rejects_coarse_steps() {
        let cfg = ideal_config();
        let p = Pulse {
            target: PulseTarget::Target,
            transition: Transition::OneR,
            omega: cfg.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        let rho = TwoAtomDensityMatrix::basis_state(Level::Zero, Level::One);
        let err = evolve(&rho, &h, f64::INFINITY, p.duration(), 1.0);
        assert!(matches!(err, Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn step_halving_leaves_fidelity_unchanged() {
        let cfg = config(30.0, 2.3, 6.834682610904, 860.0);
        let p = Pulse {
            target: PulseTarget::Target,
            transition: Transition::OneR,
            omega: cfg.laser.omega,
            detuning: 0.0,
            phase: 0.0,
            area: TAU,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        let rho = TwoAtomDensityMatrix::basis_state(Level::One, Level::One);
        let step = default_step(&h, p.duration());
        let a = evolve(&rho, &h, cfg.level.tau, p.duration(), step).unwrap();
        let b = evolve(&rho, &h, cfg.level.tau, p.duration(), step / 2.0).unwrap();
        let psi = embed_computational(&[C64::from(0.0); 4]);
        let _ = psi;
        let fa = a.population(Level::One, Level::One);
        let fb = b.population(Level::One, Level::One);
        assert!((fa - fb).abs() < 1e-8);
    }

    #[test]
    fn ideal_cz_map_is_diagonal_phase_gate() {
        let cfg = ideal_config();
        let seq = cz_sequence(&cfg);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        assert!(prop.info.perfect_blockade);
        let map = computational_map(&prop);
        let ideal = cz_ideal();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (map[(i, j)] - ideal[(i, j)]).norm() < 1e-9,
                    "entry ({i},{j}) = {:?}",
                    map[(i, j)]
                );
            }
        }
        assert!(gate_error_with(&prop, &ideal).unwrap() < 1e-9);
    }

    #[test]
    fn cz_is_symmetric_under_role_swap() {
        let cfg = ideal_config();
        let seq = cz_sequence_on(&cfg, Atom::Target);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        let map = computational_map(&prop);
        let ideal = cz_ideal();
        for k in 0..4 {
            assert!((map[(k, k)] - ideal[(k, k)]).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_blockade_gives_no_conditional_phase() {
        // B = 0: the target runs a full 2π regardless of the control, so the
        // map separates into single-atom phase gates and φ_c = 0.
        let cfg = config(30.0, 1e-30, f64::INFINITY, f64::INFINITY);
        let seq = cz_sequence(&cfg);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        let map = computational_map(&prop);
        assert!((conditional_phase(&map)).abs() < 1e-9);
        // |11⟩ branch: −1 from the control round trip times −1 from the
        // target 2π rotation
        assert!((map[(3, 3)] - C64::from(1.0)).norm() < 1e-9);
        assert!((map[(1, 1)] - C64::from(-1.0)).norm() < 1e-9);
        assert!((map[(2, 2)] - C64::from(-1.0)).norm() < 1e-9);
    }

    #[test]
    fn finite_blockade_error_matches_budget_leakage_term() {
        // B snapped to quarter-phase points of the blockaded-return
        // oscillation, where the budget's oscillation-averaged Ω²/8B² is the
        // right comparison; the deterministic conditional phase is
        // calibrated out and separately checked against πΩ/2B.
        let omega_mhz = 10.0;
        let omega = units::mhz_to_rad(omega_mhz);
        for b_over_omega_target in [10.0f64, 20.0] {
            let k = b_over_omega_target.round();
            let quarter = ((k + 0.25).powi(2) - 1.0).sqrt(); // B/Ω at sin² = 1/2
            let b_ghz = units::rad_to_ghz(quarter * omega);
            let cfg = config(omega_mhz, b_ghz, f64::INFINITY, f64::INFINITY);
            let seq = cz_sequence(&cfg);
            let prop = SequencePropagator::new(&cfg, &seq).unwrap();
            let e_cal = gate_error_calibrated_with(&prop).unwrap();
            let budget_term = 1.0 / (8.0 * quarter * quarter);
            assert!(
                (e_cal / budget_term - 1.0).abs() < 0.2,
                "B/Ω = {quarter}: E = {e_cal:e} vs {budget_term:e}"
            );
            let map = computational_map(&prop);
            let delta = wrap_angle(conditional_phase(&map) - PI);
            let predicted = PI / (2.0 * quarter);
            assert!(
                (delta - predicted).abs() < 0.15 * predicted,
                "δ = {delta} vs predicted {predicted}"
            );
        }
    }

    #[test]
    fn cnot_truth_table() {
        let cfg = ideal_config();
        let seq = cnot_hadamard_variant(&cfg);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        let map = computational_map(&prop);
        let ideal = cnot_ideal();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (map[(i, j)] - ideal[(i, j)]).norm() < 1e-9,
                    "entry ({i},{j}) = {:?}",
                    map[(i, j)]
                );
            }
        }
        // population checks straight from the spec table
        for (input, expected) in [(2usize, 3usize), (3, 2), (0, 0), (1, 1)] {
            let mut amps = [C64::from(0.0); 4];
            amps[input] = C64::from(1.0);
            let rho = TwoAtomDensityMatrix::from_pure(&embed_computational(&amps)).unwrap();
            let out = prop.apply(&rho);
            let mut target = [C64::from(0.0); 4];
            target[expected] = C64::from(1.0);
            let f = state_fidelity(&out, &embed_computational(&target)).unwrap();
            assert!(f > 1.0 - 1e-9, "input {input}: fidelity {f}");
        }
    }

    #[test]
    fn cnot_on_superposed_control() {
        let cfg = ideal_config();
        let seq = cnot_hadamard_variant(&cfg);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        let rho = prop.apply(&bell_initial_state(BellVariant::B1));
        let h = C64::from(1.0 / 2f64.sqrt());
        let psi = embed_computational(&[h, C64::from(0.0), C64::from(0.0), h * C64::new(0.0, 1.0)]);
        assert!(state_fidelity(&rho, &psi).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn radiative_error_scale_of_cz_and_cnot() {
        // decay only: the input-averaged integrated Rydberg occupation of
        // the three-pulse sequence gives E ≈ 7π/4Ωτ for both constructions
        let cfg = config(30.0, f64::INFINITY, f64::INFINITY, 860.0);
        let radiative = 7.0 * PI / (4.0 * cfg.laser.omega * cfg.level.tau);
        assert!((radiative - 3.39e-5).abs() < 0.01e-5);
        let e_cz = gate_error(&cfg, &cz_sequence(&cfg), &cz_ideal()).unwrap();
        assert!(e_cz / radiative > 0.5 && e_cz / radiative < 2.0, "E_cz = {e_cz:e}");
        let e_cnot = gate_error(&cfg, &cnot_hadamard_variant(&cfg), &cnot_ideal()).unwrap();
        assert!(e_cnot / radiative > 0.5 && e_cnot / radiative < 2.0, "E_cnot = {e_cnot:e}");
    }

    #[test]
    fn amplitude_swap_map_and_populations() {
        let cfg = ideal_config();
        let seq = cnot_amplitude_swap(&cfg);
        let prop = SequencePropagator::new(&cfg, &seq).unwrap();
        let map = computational_map(&prop);
        let ideal = amplitude_swap_ideal();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (map[(i, j)] - ideal[(i, j)]).norm() < 1e-9,
                    "entry ({i},{j}) = {:?}",
                    map[(i, j)]
                );
            }
        }
        // control |0⟩, target |0⟩ → target ends in |1⟩
        let rho = TwoAtomDensityMatrix::basis_state(Level::Zero, Level::Zero);
        let out = prop.apply(&rho);
        assert!(out.population(Level::Zero, Level::One) > 1.0 - 1e-9);
        // control |1⟩ → blockade freezes the target
        let rho = TwoAtomDensityMatrix::basis_state(Level::One, Level::Zero);
        let out = prop.apply(&rho);
        assert!(out.population(Level::One, Level::Zero) > 1.0 - 1e-9);
    }

    #[test]
    fn bell_preparation_ideal_limit() {
        let cfg = ideal_config();
        let (rho, info) = bell_prep(&cfg, BellVariant::B1).unwrap();
        assert!(state_fidelity(&rho, &crate::density::bell_state_b1()).unwrap() > 1.0 - 1e-9);
        assert!(info.perfect_blockade);
        let (rho, _) = bell_prep(&cfg, BellVariant::B2).unwrap();
        assert!(state_fidelity(&rho, &crate::density::bell_state_b2()).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn sequence_invariants_hold_after_real_parameters() {
        let cfg = config(30.0, 2.3, 6.834682610904, 860.0);
        let seq = cz_sequence(&cfg);
        let rho0 = TwoAtomDensityMatrix::from_pure(&embed_computational(&[C64::from(0.5); 4]))
            .unwrap();
        let (rho, info) = run_sequence(&cfg, &seq, &rho0).unwrap();
        assert!(!info.b_capped); // B/Ω ≈ 77, under the default cap
        assert!((rho.trace() - 1.0).abs() < 1e-9);
        rho.validate().unwrap();
    }

    #[test]
    fn unitary_evolution_preserves_purity() {
        let cfg = config(30.0, 2.3, 6.834682610904, f64::INFINITY);
        let seq = cz_sequence(&cfg);
        let rho0 = TwoAtomDensityMatrix::from_pure(&embed_computational(&[C64::from(0.5); 4]))
            .unwrap();
        let (rho, _) = run_sequence(&cfg, &seq, &rho0).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collective_drive_oscillates_at_enhanced_rate() {
        // both atoms driven under perfect blockade: |11⟩ ↔ symmetric single
        // excitation at √2·Ω
        let cfg = ideal_config();
        let omega = cfg.laser.omega;
        let enhanced = crate::blockade::collective_rabi(2, omega).unwrap();
        let p = Pulse {
            target: PulseTarget::Both,
            transition: Transition::OneR,
            omega,
            detuning: 0.0,
            phase: 0.0,
            area: PI,
        };
        let h = build_hamiltonian(&cfg, &p).unwrap();
        let rho = TwoAtomDensityMatrix::basis_state(Level::One, Level::One);
        let duration = PI / enhanced;
        let out = evolve(&rho, &h, f64::INFINITY, duration, default_step(&h, duration)).unwrap();
        let p_sym = out.population(Level::One, Level::Rydberg)
            + out.population(Level::Rydberg, Level::One);
        assert!(p_sym > 1.0 - 1e-9, "symmetric population {p_sym}");
        assert!(out.population(Level::Rydberg, Level::Rydberg) < 1e-12);
    }

    #[test]
    fn b_cap_applies_and_calibrated_error_is_insensitive() {
        // model B far above the cap: the Hamiltonian uses the capped value
        let cfg = config(30.0, 10.0, f64::INFINITY, 860.0);
        let seq = cz_sequence(&cfg);
        let prop100 =
            SequencePropagator::with_options(&cfg, &seq, &SimOptions { b_cap_ratio: 100.0 })
                .unwrap();
        assert!(prop100.info.b_capped);
        let prop200 =
            SequencePropagator::with_options(&cfg, &seq, &SimOptions { b_cap_ratio: 200.0 })
                .unwrap();
        let e100 = gate_error_calibrated_with(&prop100).unwrap();
        let e200 = gate_error_calibrated_with(&prop200).unwrap();
        assert!(
            (e100 / e200 - 1.0).abs() < 0.05,
            "E(cap 100Ω) = {e100:e}, E(cap 200Ω) = {e200:e}"
        );
    }

    #[test]
    fn simulated_error_minimum_sits_near_omega_opt() {
        // Rabi grid snapped to quarter-phase points of the blockade
        // oscillation so the scan tracks the oscillation-averaged error
        let b_ghz = 0.25f64;
        let tau_us = 340.0;
        let b = units::ghz_to_rad(b_ghz);
        let tau = units::us_to_s(tau_us);
        let w_opt = crate::budget::omega_opt(b, tau).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let n_points = 13;
        for i in 0..n_points {
            let frac = i as f64 / (n_points - 1) as f64;
            let w_target = w_opt / 3.0 * 9f64.powf(frac);
            // snap to √(B²+Ω²)/Ω = k + 1/4
            let ratio = (b / w_target).hypot(1.0);
            let snapped_ratio = ratio.round() + 0.25;
            let w = b / (snapped_ratio.powi(2) - 1.0).sqrt();
            let cfg = config(
                units::rad_to_mhz(w),
                b_ghz,
                f64::INFINITY,
                tau_us,
            );
            let seq = cz_sequence(&cfg);
            let e = gate_error_calibrated(&cfg, &seq).unwrap();
            if e < best.0 {
                best = (e, w);
            }
        }
        assert!(
            (best.1 / w_opt - 1.0).abs() < 0.3,
            "minimum at {} vs Ω_opt {}",
            best.1,
            w_opt
        );
    }

    #[test]
    fn sequence_text_round_trip_fields() {
        let cfg = ideal_config();
        let seq = bell_prep_sequence(&cfg);
        let text = seq.to_text();
        assert!(text.contains("pulse atom=control transition=1r"));
        assert!(text.contains("rotation atom=target"));
        assert!(text.contains("phase_shift atom=control"));
    }
}
