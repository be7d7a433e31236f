//! Command-line front end: error budgets, separation sweeps, Ramsey and Bell
//! simulations, and gate-matrix export, from a config file plus overrides.
//!
//! Every emitted file begins with a header (or, for JSON, a meta object)
//! recording the artifact version, canonical config hash, overrides, and
//! seed, and stochastic commands are byte-reproducible under a fixed seed.
//!
//! Exit codes: 0 success, 2 validation failure, 3 runtime failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use rydsim::blockade::blockade_shift;
use rydsim::budget::{
    assemble_budget, e_min, fidelity_limit, gate_error_full, omega_opt, t2_combined, t2_doppler,
    t2_magnetic,
};
use rydsim::dynamics::{
    amplitude_swap_ideal, bell_prep, cnot_amplitude_swap, cnot_hadamard_variant, cnot_ideal,
    computational_map, cz_ideal, cz_sequence, gate_error_calibrated_with, gate_error_with,
    BellVariant, SequencePropagator,
};
use rydsim::montecarlo::{
    bell_experiment, extract_fidelity, parity_fit, parity_scan, ramsey_simulate,
    sample_populations, BellMode,
};
use rydsim::params::{parse_override, units};
use rydsim::{Error, ExperimentConfig};

const ENV_CONFIG: &str = "RYDSIM_CONFIG";

#[derive(Parser)]
#[command(
    name = "rydsim",
    version,
    about = "Rydberg-blockade gate error budgets and simulations",
    after_help = "When --config is absent the path is read from $RYDSIM_CONFIG."
)]
struct Cli {
    /// Config file path (falls back to $RYDSIM_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override key=value, applied after file load and before
    /// validation (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default: text for budget and simulate-gate, csv
    /// otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GateKind {
    Cz,
    Cnot,
    CnotSwap,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic error-budget report for the configured operating point.
    Budget,
    /// Sweep atom separation: blockade shift, optimum Rabi frequency, and
    /// intrinsic error per point.
    ScanSeparation {
        #[arg(long)]
        r_min_um: f64,
        #[arg(long)]
        r_max_um: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Monte Carlo Ramsey fringe experiment with envelope fit.
    Ramsey {
        #[arg(long, default_value_t = 7.0)]
        t_max_us: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Analytic Bell-fidelity limit curves per dephasing channel.
    FidelityLimit {
        #[arg(long, default_value_t = 10.0)]
        t_max_us: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Simulate one gate sequence and emit its computational map and error
    /// decomposition.
    SimulateGate {
        #[arg(long, value_enum, default_value_t = GateKind::Cz)]
        gate: GateKind,
    },
    /// Shot-level Bell experiment with loss correction.
    SimulateBell {
        /// Gap time (μs); defaults to the configured or minimum gap time.
        #[arg(long)]
        gap_us: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long)]
        seed: u64,
        /// Start from a perfect Bell state instead of the simulated CNOT.
        #[arg(long)]
        ideal_dynamics: bool,
    },
    /// Parity-oscillation scan of the prepared Bell state.
    Parity {
        /// Shots per analysis-phase point.
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        ideal_dynamics: bool,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ConfigIo { .. }
        | Error::ConfigSyntax { .. }
        | Error::UnknownKey { .. }
        | Error::DuplicateKey { .. }
        | Error::BadValue { .. }
        | Error::MissingKey { .. }
        | Error::InvariantViolation { .. }
        | Error::BadOverride { .. }
        | Error::NonPositive { .. }
        | Error::BadAngularMomentum { .. }
        | Error::OutsideTable { .. }
        | Error::BadTable { .. }
        | Error::EmptyGrid => 2,
        _ => 3,
    }
}

fn fnv1a(data: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct Context {
    config: ExperimentConfig,
    config_hash: u64,
    overrides: Vec<(String, String)>,
}

impl Context {
    fn overrides_text(&self) -> String {
        if self.overrides.is_empty() {
            "none".into()
        } else {
            self.overrides
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    fn header(&self, command: &str, seed: Option<u64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# rydsim {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# command: {command}");
        let _ = writeln!(s, "# config_hash: {:#018x}", self.config_hash);
        let _ = writeln!(s, "# overrides: {}", self.overrides_text());
        match seed {
            Some(seed) => {
                let _ = writeln!(s, "# seed: {seed}");
            }
            None => {
                let _ = writeln!(s, "# seed: none");
            }
        }
        s
    }

    fn json_meta(&self, command: &str, seed: Option<u64>) -> String {
        let seed = seed.map_or("null".to_string(), |s| s.to_string());
        format!(
            "  \"meta\": {{\"artifact\": \"rydsim {}\", \"command\": \"{command}\", \
             \"config_hash\": \"{:#018x}\", \"overrides\": \"{}\", \"seed\": {seed}}}",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.overrides_text()
        )
    }
}

fn load_context(cli: &Cli) -> Result<Context, Error> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => match std::env::var_os(ENV_CONFIG) {
            Some(p) => PathBuf::from(p),
            None => {
                return Err(Error::MissingKey {
                    key: format!("--config (or ${ENV_CONFIG})"),
                })
            }
        },
    };
    let overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let config = ExperimentConfig::load_with_overrides(&path, &overrides)?;
    for w in &config.warnings {
        eprintln!("warning: {w}");
    }
    let config_hash = fnv1a(config.to_config_text().as_bytes());
    Ok(Context {
        config,
        config_hash,
        overrides,
    })
}

fn fmt_f(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

struct CmdOutput {
    content: String,
    /// Nonzero when partial output was produced under a runtime failure.
    exit: u8,
}

impl CmdOutput {
    fn ok(content: String) -> Self {
        Self { content, exit: 0 }
    }
}

fn cmd_budget(ctx: &Context, format: Format) -> Result<CmdOutput, Error> {
    let report = assemble_budget(&ctx.config)?;
    let content = match format {
        Format::Text => format!("{}{}", ctx.header("budget", None), report.to_kv_text()),
        Format::Csv => {
            let mut s = ctx.header("budget", None);
            let _ = writeln!(s, "# columns: key,value");
            for (k, v) in report.to_pairs() {
                let _ = writeln!(s, "{k},{v}");
            }
            let _ = writeln!(s, "defaulted,\"{}\"", report.defaulted.join(","));
            let _ = writeln!(s, "flags,\"{}\"", report.flags.join(","));
            s
        }
        Format::Json => format!(
            "{{\n{},\n  \"report\": {}}}\n",
            ctx.json_meta("budget", None),
            report.to_json().replace('\n', "\n  ")
        ),
    };
    Ok(CmdOutput::ok(content))
}

fn cmd_scan_separation(
    ctx: &Context,
    r_min_um: f64,
    r_max_um: f64,
    points: usize,
    format: Format,
) -> Result<CmdOutput, Error> {
    if points == 0 || r_max_um < r_min_um || r_min_um <= 0.0 {
        return Err(Error::EmptyGrid);
    }
    let tau = ctx.config.level.tau;
    let omega_hf = ctx.config.species.omega_hf;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let frac = if points == 1 {
            0.0
        } else {
            i as f64 / (points - 1) as f64
        };
        let r_um = r_min_um + (r_max_um - r_min_um) * frac;
        let b = blockade_shift(&ctx.config.blockade, units::um_to_m(r_um))?;
        let (w_opt, e_two_term, e_full) = if b.is_finite() && tau.is_finite() {
            let w = omega_opt(b, tau)?;
            (w, e_min(b, tau)?, gate_error_full(w, b, omega_hf, tau)?)
        } else {
            (f64::INFINITY, 0.0, 0.0)
        };
        rows.push((r_um, b, w_opt, e_two_term, e_full));
    }
    let content = match format {
        Format::Json => {
            let mut s = format!("{{\n{},\n  \"rows\": [\n", ctx.json_meta("scan-separation", None));
            for (i, (r, b, w, em, ef)) in rows.iter().enumerate() {
                let _ = write!(
                    s,
                    "    {{\"r_um\": {}, \"b_over_2pi_mhz\": {}, \"omega_opt_over_2pi_mhz\": {}, \"e_min\": {}, \"intrinsic_error_at_omega_opt\": {}}}",
                    fmt_f(*r),
                    fmt_f(units::rad_to_mhz(*b)),
                    fmt_f(units::rad_to_mhz(*w)),
                    fmt_f(*em),
                    fmt_f(*ef)
                );
                s.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            s
        }
        _ => {
            let mut s = ctx.header("scan-separation", None);
            let _ = writeln!(
                s,
                "# columns: r_um,b_over_2pi_mhz,omega_opt_over_2pi_mhz,e_min,intrinsic_error_at_omega_opt"
            );
            for (r, b, w, em, ef) in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    fmt_f(*r),
                    fmt_f(units::rad_to_mhz(*b)),
                    fmt_f(units::rad_to_mhz(*w)),
                    fmt_f(*em),
                    fmt_f(*ef)
                );
            }
            s
        }
    };
    Ok(CmdOutput::ok(content))
}

fn cmd_ramsey(
    ctx: &Context,
    t_max_us: f64,
    points: usize,
    shots: u64,
    seed: u64,
    format: Format,
) -> Result<CmdOutput, Error> {
    if points == 0 || t_max_us <= 0.0 {
        return Err(Error::EmptyGrid);
    }
    let t_grid: Vec<f64> = (1..=points)
        .map(|k| units::us_to_s(t_max_us) * k as f64 / points as f64)
        .collect();
    let out = ramsey_simulate(&t_grid, shots, &ctx.config, seed)?;
    let mut exit = 0;
    let fit_line = match &out.fit {
        Ok(fit) => format!(
            "fit: t2_us={} t2_uncertainty_us={} amplitude={} residual_norm={}",
            fmt_f(units::s_to_us(fit.t2)),
            fmt_f(units::s_to_us(fit.t2_uncertainty)),
            fmt_f(fit.amplitude),
            fmt_f(fit.residual_norm)
        ),
        Err(reason) => {
            exit = 3;
            format!("fit: FAILED ({reason})")
        }
    };
    let content = match format {
        Format::Json => {
            let fit_json = match &out.fit {
                Ok(fit) => format!(
                    "{{\"t2_us\": {}, \"t2_uncertainty_us\": {}, \"amplitude\": {}, \"residual_norm\": {}}}",
                    json_f(units::s_to_us(fit.t2)),
                    json_f(units::s_to_us(fit.t2_uncertainty)),
                    json_f(fit.amplitude),
                    json_f(fit.residual_norm)
                ),
                Err(reason) => format!("{{\"error\": \"{reason}\"}}"),
            };
            let mut s = format!(
                "{{\n{},\n  \"shots\": {shots},\n  \"fit\": {fit_json},\n  \"points\": [\n",
                ctx.json_meta("ramsey", Some(seed))
            );
            for (i, p) in out.points.iter().enumerate() {
                let _ = write!(
                    s,
                    "    {{\"t_us\": {}, \"signal\": {}, \"envelope\": {}}}",
                    json_f(units::s_to_us(p.t)),
                    json_f(p.signal),
                    json_f(p.envelope)
                );
                s.push_str(if i + 1 < out.points.len() { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            s
        }
        _ => {
            let mut s = ctx.header("ramsey", Some(seed));
            let _ = writeln!(s, "# shots: {shots}");
            let _ = writeln!(s, "# {fit_line}");
            let _ = writeln!(s, "# columns: t_us,signal,envelope");
            for p in &out.points {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f(units::s_to_us(p.t)),
                    fmt_f(p.signal),
                    fmt_f(p.envelope)
                );
            }
            s
        }
    };
    Ok(CmdOutput { content, exit })
}

fn cmd_fidelity_limit(
    ctx: &Context,
    t_max_us: f64,
    points: usize,
    format: Format,
) -> Result<CmdOutput, Error> {
    if points == 0 || t_max_us <= 0.0 {
        return Err(Error::EmptyGrid);
    }
    let cfg = &ctx.config;
    let t2_b = t2_magnetic(cfg.delta_gm(), cfg.environment.sigma_b)?;
    let t2_d = t2_doppler(cfg.environment.temperature, cfg.species.mass, cfg.laser.k_2nu())?;
    let t2 = t2_combined(t2_b, t2_d);
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let t = units::us_to_s(t_max_us) * i as f64 / (points - 1).max(1) as f64;
        rows.push((
            t,
            fidelity_limit(t, t2_b),
            fidelity_limit(t, t2_d),
            fidelity_limit(t, t2),
        ));
    }
    let content = match format {
        Format::Json => {
            let mut s = format!(
                "{{\n{},\n  \"t2_magnetic_us\": {}, \"t2_doppler_us\": {}, \"t2_combined_us\": {},\n  \"points\": [\n",
                ctx.json_meta("fidelity-limit", None),
                json_f(units::s_to_us(t2_b)),
                json_f(units::s_to_us(t2_d)),
                json_f(units::s_to_us(t2))
            );
            for (i, (t, fb, fd, fc)) in rows.iter().enumerate() {
                let _ = write!(
                    s,
                    "    {{\"t_us\": {}, \"f_magnetic\": {}, \"f_doppler\": {}, \"f_combined\": {}}}",
                    json_f(units::s_to_us(*t)),
                    json_f(*fb),
                    json_f(*fd),
                    json_f(*fc)
                );
                s.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            s
        }
        _ => {
            let mut s = ctx.header("fidelity-limit", None);
            let _ = writeln!(
                s,
                "# t2_magnetic_us: {}, t2_doppler_us: {}, t2_combined_us: {}",
                fmt_f(units::s_to_us(t2_b)),
                fmt_f(units::s_to_us(t2_d)),
                fmt_f(units::s_to_us(t2))
            );
            let _ = writeln!(s, "# columns: t_us,f_magnetic,f_doppler,f_combined");
            for (t, fb, fd, fc) in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    fmt_f(units::s_to_us(*t)),
                    fmt_f(*fb),
                    fmt_f(*fd),
                    fmt_f(*fc)
                );
            }
            s
        }
    };
    Ok(CmdOutput::ok(content))
}

fn cmd_simulate_gate(ctx: &Context, gate: GateKind, format: Format) -> Result<CmdOutput, Error> {
    let cfg = &ctx.config;
    let (name, seq, ideal) = match gate {
        GateKind::Cz => ("cz", cz_sequence(cfg), cz_ideal()),
        GateKind::Cnot => ("cnot", cnot_hadamard_variant(cfg), cnot_ideal()),
        GateKind::CnotSwap => ("cnot-swap", cnot_amplitude_swap(cfg), amplitude_swap_ideal()),
    };
    let prop = SequencePropagator::new(cfg, &seq)?;
    let map = computational_map(&prop);
    let e_raw = gate_error_with(&prop, &ideal)?;
    let e_cal = gate_error_calibrated_with(&prop)?;
    let b = blockade_shift(&cfg.blockade, cfg.separation)?;
    let (radiative, leakage, spectator) = {
        let omega = cfg.laser.omega;
        let tau = cfg.level.tau;
        let whf = cfg.species.omega_hf;
        let rad = if tau.is_finite() {
            7.0 * std::f64::consts::PI / (4.0 * omega * tau)
        } else {
            0.0
        };
        let leak = if b.is_finite() { (omega / b).powi(2) / 8.0 } else { 0.0 };
        let spec = if whf.is_finite() {
            0.75 * (omega / whf).powi(2)
        } else {
            0.0
        };
        (rad, leak, spec)
    };
    let matrix_rows: Vec<String> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| format!("{},{}", map[(i, j)].re, map[(i, j)].im))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let content = match format {
        Format::Json => {
            let mut s = format!(
                "{{\n{},\n  \"gate\": \"{name}\",\n  \"gate_error_raw\": {},\n  \"gate_error_calibrated\": {},\n  \
                 \"budget_terms\": {{\"radiative\": {}, \"blockade_leakage\": {}, \"spectator_leakage\": {}}},\n  \
                 \"b_capped\": {},\n  \"perfect_blockade\": {},\n  \"map_rows_re_im\": [\n",
                ctx.json_meta("simulate-gate", None),
                json_f(e_raw),
                json_f(e_cal),
                json_f(radiative),
                json_f(leakage),
                json_f(spectator),
                prop.info.b_capped,
                prop.info.perfect_blockade
            );
            for (i, row) in matrix_rows.iter().enumerate() {
                let _ = write!(s, "    \"{row}\"");
                s.push_str(if i + 1 < 4 { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            s
        }
        _ => {
            let mut s = ctx.header("simulate-gate", None);
            let _ = writeln!(s, "# gate: {name}");
            let _ = writeln!(s, "# gate_error_raw: {}", fmt_f(e_raw));
            let _ = writeln!(s, "# gate_error_calibrated: {}", fmt_f(e_cal));
            let _ = writeln!(
                s,
                "# budget_terms: radiative={} blockade_leakage={} spectator_leakage={}",
                fmt_f(radiative),
                fmt_f(leakage),
                fmt_f(spectator)
            );
            let _ = writeln!(
                s,
                "# b_capped: {}, perfect_blockade: {}",
                prop.info.b_capped, prop.info.perfect_blockade
            );
            let _ = writeln!(
                s,
                "# computational map, basis 00,01,10,11; 4 rows of 4 row-major re,im pairs"
            );
            for row in &matrix_rows {
                let _ = writeln!(s, "{row}");
            }
            s
        }
    };
    Ok(CmdOutput::ok(content))
}

fn cmd_simulate_bell(
    ctx: &Context,
    gap_us: Option<f64>,
    shots: u64,
    seed: u64,
    ideal: bool,
    format: Format,
) -> Result<CmdOutput, Error> {
    let gap = gap_us.map_or(ctx.config.effective_gap_time(), units::us_to_s);
    let mode = if ideal { BellMode::Ideal } else { BellMode::Simulated };
    let outcome = bell_experiment(gap, shots, &ctx.config, seed, mode)?;
    let t2 = t2_combined(
        t2_magnetic(ctx.config.delta_gm(), ctx.config.environment.sigma_b)?,
        t2_doppler(
            ctx.config.environment.temperature,
            ctx.config.species.mass,
            ctx.config.laser.k_2nu(),
        )?,
    );
    let analytic = fidelity_limit(gap, t2);
    let content = match format {
        Format::Json => format!(
            "{{\n{},\n  \"mode\": \"{}\",\n  \"analytic_fidelity_limit\": {},\n  \"result\": {}}}\n",
            ctx.json_meta("simulate-bell", Some(seed)),
            if ideal { "ideal" } else { "simulated" },
            json_f(analytic),
            rydsim::montecarlo::bell_summary_json(&outcome).replace('\n', "\n  ")
        ),
        _ => {
            let f = &outcome.fidelity;
            let mut s = ctx.header("simulate-bell", Some(seed));
            let _ = writeln!(s, "# mode: {}", if ideal { "ideal" } else { "simulated" });
            let _ = writeln!(s, "# gap_time_us: {}", fmt_f(units::s_to_us(gap)));
            let _ = writeln!(s, "# fidelity_raw: {}", fmt_f(f.raw_fidelity));
            let _ = writeln!(s, "# fidelity_loss_corrected: {}", fmt_f(f.corrected_fidelity));
            let _ = writeln!(s, "# surviving_fraction: {}", fmt_f(f.surviving_fraction));
            let _ = writeln!(s, "# fidelity_exact_mean: {}", fmt_f(outcome.exact_mean_fidelity));
            let _ = writeln!(s, "# analytic_fidelity_limit: {}", fmt_f(analytic));
            let _ = writeln!(s, "# prep_leakage: {}", fmt_f(outcome.record.prep_leakage));
            s.push_str(&outcome.record.to_csv());
            s
        }
    };
    Ok(CmdOutput::ok(content))
}

fn cmd_parity(
    ctx: &Context,
    shots: u64,
    points: usize,
    seed: u64,
    ideal: bool,
    format: Format,
) -> Result<CmdOutput, Error> {
    if points < 3 {
        return Err(Error::EmptyGrid);
    }
    let rho4: DMatrix<C64> = if ideal {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        m[(0, 0)] = C64::from(0.5);
        m[(3, 3)] = C64::from(0.5);
        m[(0, 3)] = C64::from(0.5);
        m[(3, 0)] = C64::from(0.5);
        m
    } else {
        let (rho, _) = bell_prep(&ctx.config, BellVariant::B1)?;
        let block = rho.computational_block();
        let tr: f64 = (0..4).map(|k| block[(k, k)].re).sum();
        block / C64::from(tr.max(1e-300))
    };
    let grid: Vec<f64> = (0..points)
        .map(|k| std::f64::consts::PI * k as f64 / points as f64)
        .collect();
    let scan = parity_scan(&rho4, &grid, shots, seed)?;
    let (offset, amplitude, phase0) = parity_fit(&scan)?;
    let pops = sample_populations(&rho4, shots * 4, seed);
    let n: u64 = pops.iter().sum();
    let p00 = pops[0] as f64 / n as f64;
    let p11 = pops[3] as f64 / n as f64;
    let fidelity = extract_fidelity(p00, p11, amplitude);
    let content = match format {
        Format::Json => {
            let mut s = format!(
                "{{\n{},\n  \"mode\": \"{}\",\n  \"p00\": {}, \"p11\": {},\n  \
                 \"parity_offset\": {}, \"parity_amplitude\": {}, \"parity_phase\": {},\n  \
                 \"fidelity\": {},\n  \"points\": [\n",
                ctx.json_meta("parity", Some(seed)),
                if ideal { "ideal" } else { "simulated" },
                json_f(p00),
                json_f(p11),
                json_f(offset),
                json_f(amplitude),
                json_f(phase0),
                json_f(fidelity)
            );
            for (i, p) in scan.iter().enumerate() {
                let _ = write!(
                    s,
                    "    {{\"phase_rad\": {}, \"parity\": {}}}",
                    json_f(p.phase),
                    json_f(p.parity_estimate())
                );
                s.push_str(if i + 1 < scan.len() { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            s
        }
        _ => {
            let mut s = ctx.header("parity", Some(seed));
            let _ = writeln!(s, "# mode: {}", if ideal { "ideal" } else { "simulated" });
            let _ = writeln!(s, "# p00: {}, p11: {}", fmt_f(p00), fmt_f(p11));
            let _ = writeln!(
                s,
                "# parity fit: offset={} amplitude={} phase={}",
                fmt_f(offset),
                fmt_f(amplitude),
                fmt_f(phase0)
            );
            let _ = writeln!(s, "# fidelity: {}", fmt_f(fidelity));
            let _ = writeln!(s, "# columns: phase_rad,parity,n00,n01,n10,n11,shots");
            for p in &scan {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    fmt_f(p.phase),
                    fmt_f(p.parity_estimate()),
                    p.counts[0],
                    p.counts[1],
                    p.counts[2],
                    p.counts[3],
                    p.shots
                );
            }
            s
        }
    };
    Ok(CmdOutput::ok(content))
}

fn json_f(x: f64) -> String {
    if x.is_infinite() {
        "\"inf\"".into()
    } else {
        format!("{x}")
    }
}

fn run(cli: &Cli) -> Result<CmdOutput, Error> {
    let ctx = load_context(cli)?;
    let default_format = match cli.command {
        Command::Budget | Command::SimulateGate { .. } => Format::Text,
        _ => Format::Csv,
    };
    let format = cli.format.unwrap_or(default_format);
    match &cli.command {
        Command::Budget => cmd_budget(&ctx, format),
        Command::ScanSeparation {
            r_min_um,
            r_max_um,
            points,
        } => cmd_scan_separation(&ctx, *r_min_um, *r_max_um, *points, format),
        Command::Ramsey {
            t_max_us,
            points,
            shots,
            seed,
        } => cmd_ramsey(&ctx, *t_max_us, *points, *shots, *seed, format),
        Command::FidelityLimit { t_max_us, points } => {
            cmd_fidelity_limit(&ctx, *t_max_us, *points, format)
        }
        Command::SimulateGate { gate } => cmd_simulate_gate(&ctx, *gate, format),
        Command::SimulateBell {
            gap_us,
            shots,
            seed,
            ideal_dynamics,
        } => cmd_simulate_bell(&ctx, *gap_us, *shots, *seed, *ideal_dynamics, format),
        Command::Parity {
            shots,
            points,
            seed,
            ideal_dynamics,
        } => cmd_parity(&ctx, *shots, *points, *seed, *ideal_dynamics, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &output.content) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            } else {
                print!("{}", output.content);
            }
            ExitCode::from(output.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
