//! Physical constants, species and Rydberg-level data, laser and environment
//! configuration, unit conventions, and config-file loading/validation.
//!
//! Internal unit convention: SI throughout, with every frequency *angular*
//! (rad/s). All user-facing I/O uses conventional lab units (MHz for Ω/2π,
//! GHz for splittings and detunings, μs, μm, μK, Tesla) and is converted by
//! the exact factors in [`units`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::blockade::BlockadeModel;
use crate::error::{Error, Result};

/// CODATA values. Fixed; never user-editable.
pub mod constants {
    /// Reduced Planck constant (J·s), CODATA 2018.
    pub const HBAR: f64 = 1.054571817e-34;
    /// Boltzmann constant (J/K), exact in SI 2019.
    pub const K_B: f64 = 1.380649e-23;
    /// Bohr magneton (J/T), CODATA 2018.
    pub const MU_B: f64 = 9.2740100783e-24;
    /// Atomic mass unit (kg), CODATA 2018.
    pub const AMU: f64 = 1.66053906660e-27;
}

/// Exact conversions between lab units and the internal SI/angular convention.
pub mod units {
    use std::f64::consts::TAU;

    /// Ω/2π in MHz → Ω in rad/s. The factor is exactly 2π×10⁶.
    pub fn mhz_to_rad(f_mhz: f64) -> f64 {
        f_mhz * TAU * 1e6
    }
    pub fn rad_to_mhz(w: f64) -> f64 {
        w / (TAU * 1e6)
    }
    /// f/2π in GHz → rad/s.
    pub fn ghz_to_rad(f_ghz: f64) -> f64 {
        f_ghz * TAU * 1e9
    }
    pub fn rad_to_ghz(w: f64) -> f64 {
        w / (TAU * 1e9)
    }
    pub fn us_to_s(t_us: f64) -> f64 {
        t_us * 1e-6
    }
    pub fn s_to_us(t_s: f64) -> f64 {
        t_s * 1e6
    }
    pub fn um_to_m(x_um: f64) -> f64 {
        x_um * 1e-6
    }
    pub fn m_to_um(x_m: f64) -> f64 {
        x_m * 1e6
    }
    pub fn uk_to_k(t_uk: f64) -> f64 {
        t_uk * 1e-6
    }
    pub fn k_to_uk(t_k: f64) -> f64 {
        t_k * 1e6
    }
    pub fn nm_to_m(x_nm: f64) -> f64 {
        x_nm * 1e-9
    }
    pub fn ns_to_s(t_ns: f64) -> f64 {
        t_ns * 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub mu_b: f64,
}

impl PhysicalConstants {
    pub fn codata() -> Self {
        Self {
            hbar: constants::HBAR,
            k_b: constants::K_B,
            mu_b: constants::MU_B,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}

/// Ground-state species data. Only ⁸⁷Rb ships built in; the clock state
/// |5s₁/₂, f=2, m_f=0⟩ has g_g·m_fg = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSpecies {
    pub name: String,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Ground hyperfine splitting (rad/s). May be infinite to disable
    /// spectator-state couplings entirely.
    pub omega_hf: f64,
    /// Ground-state Zeeman product g_g·m_fg (dimensionless).
    pub g_m_ground: f64,
}

impl AtomSpecies {
    pub fn rb87() -> Self {
        Self {
            name: "rb87".into(),
            mass: 86.909180531 * constants::AMU,
            omega_hf: units::ghz_to_rad(RB87_OMEGA_HF_GHZ),
            g_m_ground: 0.0,
        }
    }
}

/// ⁸⁷Rb ground hyperfine splitting, ν_hf in GHz.
pub const RB87_OMEGA_HF_GHZ: f64 = 6.834682610904;

/// Landé g-factor for an alkali (s = 1/2) fine-structure level:
/// g = 1 + [j(j+1) + 3/4 − l(l+1)] / [2 j(j+1)].
pub fn lande_g(l: u32, j: f64) -> Result<f64> {
    let lf = l as f64;
    let valid = (j - (lf - 0.5)).abs() < 1e-9 || (j - (lf + 0.5)).abs() < 1e-9;
    if !valid || j <= 0.0 {
        return Err(Error::BadAngularMomentum { l, j });
    }
    Ok(1.0 + (j * (j + 1.0) + 0.75 - lf * (lf + 1.0)) / (2.0 * j * (j + 1.0)))
}

/// Built-in room-temperature radiative lifetimes for Rb ns₁/₂ levels (μs).
/// Any other level requires an explicit lifetime in the config.
pub const NS_LIFETIME_TABLE_US: [(u32, f64); 4] =
    [(75, 180.0), (100, 340.0), (125, 570.0), (150, 860.0)];

pub fn builtin_lifetime(n: u32, l: u32, j: f64) -> Option<f64> {
    if l != 0 || (j - 0.5).abs() > 1e-9 {
        return None;
    }
    NS_LIFETIME_TABLE_US
        .iter()
        .find(|(tn, _)| *tn == n)
        .map(|(_, tau_us)| units::us_to_s(*tau_us))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RydbergLevel {
    pub n: u32,
    pub l: u32,
    /// Total electronic angular momentum.
    pub j: f64,
    pub m_j: f64,
    /// Radiative lifetime (s); infinite disables decay.
    pub tau: f64,
    /// Rydberg Zeeman product g_R·m_jR.
    pub g_m_rydberg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamGeometry {
    CoPropagating,
    CounterPropagating,
}

/// Two-photon excitation wavenumber k₂ν = k₁ ∓ k₂ (m⁻¹).
/// Co-propagating beams subtract; counter-propagating beams add.
pub fn two_photon_wavenumber(lambda_1: f64, lambda_2: f64, geometry: BeamGeometry) -> Result<f64> {
    if lambda_1 <= 0.0 {
        return Err(Error::NonPositive {
            name: "lambda_1",
            value: lambda_1,
        });
    }
    if lambda_2 <= 0.0 {
        return Err(Error::NonPositive {
            name: "lambda_2",
            value: lambda_2,
        });
    }
    let (k1, k2) = (std::f64::consts::TAU / lambda_1, std::f64::consts::TAU / lambda_2);
    Ok(match geometry {
        BeamGeometry::CoPropagating => (k1 - k2).abs(),
        BeamGeometry::CounterPropagating => k1 + k2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserExcitation {
    /// Two-photon Rabi frequency Ω (rad/s).
    pub omega: f64,
    /// One-photon Rabi frequency Ω₁ (rad/s); equal one-photon frequencies
    /// assumed on both legs.
    pub omega_1: f64,
    /// Intermediate-state radiative decay rate γ_p (s⁻¹).
    pub gamma_p: f64,
    /// Intermediate-state detuning Δ (rad/s).
    pub delta: f64,
    /// Excitation wavelengths (m).
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub geometry: BeamGeometry,
}

impl LaserExcitation {
    /// Derived two-photon wavenumber; never stored independently.
    pub fn k_2nu(&self) -> f64 {
        two_photon_wavenumber(self.lambda_1, self.lambda_2, self.geometry)
            .expect("wavelengths validated at load")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// Atom temperature (K).
    pub temperature: f64,
    /// Standard deviation of the quasi-static magnetic field fluctuation (T).
    pub sigma_b: f64,
    /// Ramsey/entanglement gap time (s); `None` defaults to 2π/Ω downstream.
    pub gap_time: Option<f64>,
    /// Per-atom loss probability per trap-drop stage.
    pub loss_probability: f64,
}

/// The single source of physical truth for every module. Immutable after
/// validation; safe to share read-only across concurrent workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub constants: PhysicalConstants,
    pub species: AtomSpecies,
    pub level: RydbergLevel,
    pub laser: LaserExcitation,
    pub environment: Environment,
    /// Atom separation R (m).
    pub separation: f64,
    pub blockade: BlockadeModel,
    /// Keys that were filled from built-in defaults rather than the file.
    pub defaulted: Vec<String>,
    /// Soft validation findings (e.g. |Δ| not ≫ γ_p).
    pub warnings: Vec<String>,
}

const KNOWN_KEYS: &[&str] = &[
    "species.name",
    "species.mass_kg",
    "species.omega_hf_ghz",
    "species.g_m_ground",
    "level.n",
    "level.l",
    "level.j",
    "level.m_j",
    "level.tau_us",
    "level.g_r",
    "laser.rabi_mhz",
    "laser.rabi1_ghz",
    "laser.intermediate_lifetime_ns",
    "laser.detuning_ghz",
    "laser.lambda_1_nm",
    "laser.lambda_2_nm",
    "laser.geometry",
    "env.temperature_uk",
    "env.sigma_t",
    "env.gap_time_us",
    "env.loss_probability",
    "geometry.separation_um",
    "blockade.model",
    "blockade.b_ghz",
    "blockade.c6_ghz_um6",
    "blockade.table",
    "blockade.table_csv",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: i + 1,
            text: raw.trim().to_string(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::UnknownKey { key });
        }
        if pairs.insert(key.clone(), value).is_some() {
            return Err(Error::DuplicateKey { key });
        }
    }
    Ok(pairs)
}

struct KeyReader {
    pairs: BTreeMap<String, String>,
    defaulted: Vec<String>,
}

impl KeyReader {
    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(v) => {
                let x = if v == "inf" {
                    f64::INFINITY
                } else {
                    v.parse::<f64>().map_err(|e| Error::BadValue {
                        key: key.into(),
                        value: v.clone(),
                        reason: e.to_string(),
                    })?
                };
                if x.is_nan() {
                    return Err(Error::BadValue {
                        key: key.into(),
                        value: v.clone(),
                        reason: "NaN is not a physical value".into(),
                    });
                }
                Ok(Some(x))
            }
        }
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::MissingKey { key: key.into() })
    }

    fn f64_def(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.f64_opt(key)? {
            Some(x) => Ok(x),
            None => {
                self.defaulted.push(key.into());
                Ok(default)
            }
        }
    }

    fn u32_req(&mut self, key: &str) -> Result<u32> {
        let v = self
            .pairs
            .get(key)
            .ok_or_else(|| Error::MissingKey { key: key.into() })?;
        v.parse::<u32>().map_err(|e| Error::BadValue {
            key: key.into(),
            value: v.clone(),
            reason: e.to_string(),
        })
    }

    fn u32_def(&mut self, key: &str, default: u32) -> Result<u32> {
        if self.pairs.contains_key(key) {
            self.u32_req(key)
        } else {
            self.defaulted.push(key.into());
            Ok(default)
        }
    }

    fn str_opt(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(|s| s.as_str())
    }
}

fn invariant(key: &str, reason: impl Into<String>) -> Error {
    Error::InvariantViolation {
        key: key.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Load and validate a config file. Relative `blockade.table_csv` paths
    /// resolve against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Load, apply `key=value` overrides (after file load, before
    /// validation), then validate.
    pub fn load_with_overrides(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text_with_overrides(&text, overrides, path.parent())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_text_with_overrides(text, &[], None)
    }

    pub fn from_text_with_overrides(
        text: &str,
        overrides: &[(String, String)],
        base_dir: Option<&Path>,
    ) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        for (key, value) in overrides {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::UnknownKey { key: key.clone() });
            }
            pairs.insert(key.clone(), value.clone());
        }
        Self::build(pairs, base_dir)
    }

    fn build(pairs: BTreeMap<String, String>, base_dir: Option<&Path>) -> Result<Self> {
        let mut r = KeyReader {
            pairs,
            defaulted: Vec::new(),
        };
        let mut warnings = Vec::new();

        // species (defaults to 87Rb)
        let rb = AtomSpecies::rb87();
        let name = match r.str_opt("species.name") {
            Some("rb87") | None => "rb87".to_string(),
            Some(other) => {
                return Err(invariant(
                    "species.name",
                    format!("unknown species `{other}` (only rb87 is built in)"),
                ))
            }
        };
        let mass = r.f64_def("species.mass_kg", rb.mass)?;
        if mass <= 0.0 {
            return Err(invariant("species.mass_kg", "mass must be positive"));
        }
        let omega_hf = units::ghz_to_rad(r.f64_def("species.omega_hf_ghz", RB87_OMEGA_HF_GHZ)?);
        if omega_hf <= 0.0 {
            return Err(invariant("species.omega_hf_ghz", "splitting must be positive"));
        }
        let g_m_ground = r.f64_def("species.g_m_ground", rb.g_m_ground)?;
        let species = AtomSpecies {
            name,
            mass,
            omega_hf,
            g_m_ground,
        };

        // level
        let n = r.u32_req("level.n")?;
        if n < 10 {
            return Err(invariant("level.n", "principal quantum number must be ≥ 10"));
        }
        let l = r.u32_def("level.l", 0)?;
        let j = r.f64_def("level.j", l as f64 + 0.5)?;
        let m_j = r.f64_def("level.m_j", j)?;
        if m_j.abs() > j + 1e-9 {
            return Err(invariant("level.m_j", "|m_j| must not exceed j"));
        }
        let g_lande = lande_g(l, j).map_err(|_| invariant("level.j", "j must be l ± 1/2"))?;
        let g_r = match r.f64_opt("level.g_r")? {
            None => g_lande,
            Some(o) => {
                if (o - g_lande).abs() > 0.01 * g_lande.abs() {
                    return Err(invariant(
                        "level.g_r",
                        format!("override {o} disagrees with the Landé value {g_lande:.6}"),
                    ));
                }
                o
            }
        };
        let tau = match r.f64_opt("level.tau_us")? {
            Some(t) => units::us_to_s(t),
            None => match builtin_lifetime(n, l, j) {
                Some(t) => {
                    r.defaulted.push("level.tau_us".into());
                    t
                }
                None => return Err(Error::MissingKey {
                    key: "level.tau_us".into(),
                }),
            },
        };
        if tau <= 0.0 {
            return Err(invariant("level.tau_us", "lifetime must be positive"));
        }
        let level = RydbergLevel {
            n,
            l,
            j,
            m_j,
            tau,
            g_m_rydberg: g_r * m_j,
        };

        // laser
        let omega = units::mhz_to_rad(r.f64_req("laser.rabi_mhz")?);
        if omega <= 0.0 || !omega.is_finite() {
            return Err(invariant("laser.rabi_mhz", "Rabi frequency must be finite and positive"));
        }
        let omega_1 = units::ghz_to_rad(r.f64_req("laser.rabi1_ghz")?);
        if omega_1 <= 0.0 {
            return Err(invariant("laser.rabi1_ghz", "one-photon Rabi frequency must be positive"));
        }
        let p_lifetime = r.f64_req("laser.intermediate_lifetime_ns")?;
        if p_lifetime <= 0.0 {
            return Err(invariant(
                "laser.intermediate_lifetime_ns",
                "lifetime must be positive",
            ));
        }
        let gamma_p = 1.0 / units::ns_to_s(p_lifetime);
        let delta = units::ghz_to_rad(r.f64_req("laser.detuning_ghz")?);
        if delta.abs() < 100.0 * gamma_p {
            warnings.push(format!(
                "laser.detuning_ghz: |Δ| = {:.3e} rad/s is not ≫ γ_p = {:.3e} s⁻¹",
                delta.abs(),
                gamma_p
            ));
        }
        let lambda_1 = units::nm_to_m(r.f64_req("laser.lambda_1_nm")?);
        let lambda_2 = units::nm_to_m(r.f64_req("laser.lambda_2_nm")?);
        let geometry = match r
            .str_opt("laser.geometry")
            .ok_or_else(|| Error::MissingKey {
                key: "laser.geometry".into(),
            })? {
            "co" => BeamGeometry::CoPropagating,
            "counter" => BeamGeometry::CounterPropagating,
            other => {
                return Err(Error::BadValue {
                    key: "laser.geometry".into(),
                    value: other.into(),
                    reason: "expected `co` or `counter`".into(),
                })
            }
        };
        // validates the wavelengths
        two_photon_wavenumber(lambda_1, lambda_2, geometry).map_err(|e| Error::BadValue {
            key: "laser.lambda_1_nm".into(),
            value: format!("{lambda_1:e}/{lambda_2:e}"),
            reason: e.to_string(),
        })?;
        let laser = LaserExcitation {
            omega,
            omega_1,
            gamma_p,
            delta,
            lambda_1,
            lambda_2,
            geometry,
        };

        // environment
        let temperature = units::uk_to_k(r.f64_req("env.temperature_uk")?);
        if temperature < 0.0 {
            return Err(invariant("env.temperature_uk", "temperature must be ≥ 0"));
        }
        let sigma_b = r.f64_req("env.sigma_t")?;
        if sigma_b < 0.0 {
            return Err(invariant("env.sigma_t", "field-noise sigma must be ≥ 0"));
        }
        let gap_time = match r.f64_opt("env.gap_time_us")? {
            Some(t) if t <= 0.0 => {
                return Err(invariant("env.gap_time_us", "gap time must be positive"))
            }
            Some(t) => Some(units::us_to_s(t)),
            None => {
                r.defaulted.push("env.gap_time_us".into());
                None
            }
        };
        let loss_probability = r.f64_def("env.loss_probability", 0.0)?;
        if !(0.0..1.0).contains(&loss_probability) {
            return Err(invariant("env.loss_probability", "must lie in [0, 1)"));
        }
        let environment = Environment {
            temperature,
            sigma_b,
            gap_time,
            loss_probability,
        };

        let separation = units::um_to_m(r.f64_req("geometry.separation_um")?);
        if separation <= 0.0 {
            return Err(invariant("geometry.separation_um", "separation must be positive"));
        }

        let blockade = Self::build_blockade(&mut r, base_dir)?;

        Ok(ExperimentConfig {
            constants: PhysicalConstants::codata(),
            species,
            level,
            laser,
            environment,
            separation,
            blockade,
            defaulted: r.defaulted,
            warnings,
        })
    }

    fn build_blockade(r: &mut KeyReader, base_dir: Option<&Path>) -> Result<BlockadeModel> {
        let model = r
            .str_opt("blockade.model")
            .ok_or_else(|| Error::MissingKey {
                key: "blockade.model".into(),
            })?
            .to_string();
        let model = match model.as_str() {
            "constant" => {
                let b = units::ghz_to_rad(r.f64_req("blockade.b_ghz")?);
                BlockadeModel::Constant { b }
            }
            "vdw" => {
                let c6_lab = r.f64_req("blockade.c6_ghz_um6")?;
                // C6/2π in GHz·μm⁶ → rad/s·m⁶
                let c6 = units::ghz_to_rad(c6_lab) * 1e-36;
                BlockadeModel::VanDerWaals { c6 }
            }
            "table" => {
                if let Some(inline) = r.str_opt("blockade.table") {
                    BlockadeModel::table_from_inline(inline)?
                } else if let Some(csv) = r.str_opt("blockade.table_csv") {
                    let mut path = PathBuf::from(csv);
                    if path.is_relative() {
                        if let Some(dir) = base_dir {
                            path = dir.join(path);
                        }
                    }
                    BlockadeModel::table_from_csv_path(&path)?
                } else {
                    return Err(Error::MissingKey {
                        key: "blockade.table".into(),
                    });
                }
            }
            other => {
                return Err(Error::BadValue {
                    key: "blockade.model".into(),
                    value: other.into(),
                    reason: "expected `constant`, `vdw`, or `table`".into(),
                })
            }
        };
        model.validate()?;
        Ok(model)
    }

    /// Canonical serialization; reparses to an equal config.
    pub fn to_config_text(&self) -> String {
        fn fmt_f(x: f64) -> String {
            if x.is_infinite() {
                "inf".into()
            } else {
                format!("{x}")
            }
        }
        let mut s = String::new();
        let _ = writeln!(s, "species.name = {}", self.species.name);
        let _ = writeln!(s, "species.mass_kg = {}", fmt_f(self.species.mass));
        let _ = writeln!(
            s,
            "species.omega_hf_ghz = {}",
            fmt_f(units::rad_to_ghz(self.species.omega_hf))
        );
        let _ = writeln!(s, "species.g_m_ground = {}", fmt_f(self.species.g_m_ground));
        let _ = writeln!(s, "level.n = {}", self.level.n);
        let _ = writeln!(s, "level.l = {}", self.level.l);
        let _ = writeln!(s, "level.j = {}", fmt_f(self.level.j));
        let _ = writeln!(s, "level.m_j = {}", fmt_f(self.level.m_j));
        let _ = writeln!(s, "level.tau_us = {}", fmt_f(units::s_to_us(self.level.tau)));
        let _ = writeln!(s, "laser.rabi_mhz = {}", fmt_f(units::rad_to_mhz(self.laser.omega)));
        let _ = writeln!(
            s,
            "laser.rabi1_ghz = {}",
            fmt_f(units::rad_to_ghz(self.laser.omega_1))
        );
        let _ = writeln!(
            s,
            "laser.intermediate_lifetime_ns = {}",
            fmt_f(1e9 / self.laser.gamma_p)
        );
        let _ = writeln!(
            s,
            "laser.detuning_ghz = {}",
            fmt_f(units::rad_to_ghz(self.laser.delta))
        );
        let _ = writeln!(s, "laser.lambda_1_nm = {}", fmt_f(self.laser.lambda_1 * 1e9));
        let _ = writeln!(s, "laser.lambda_2_nm = {}", fmt_f(self.laser.lambda_2 * 1e9));
        let _ = writeln!(
            s,
            "laser.geometry = {}",
            match self.laser.geometry {
                BeamGeometry::CoPropagating => "co",
                BeamGeometry::CounterPropagating => "counter",
            }
        );
        let _ = writeln!(
            s,
            "env.temperature_uk = {}",
            fmt_f(units::k_to_uk(self.environment.temperature))
        );
        let _ = writeln!(s, "env.sigma_t = {}", fmt_f(self.environment.sigma_b));
        if let Some(t) = self.environment.gap_time {
            let _ = writeln!(s, "env.gap_time_us = {}", fmt_f(units::s_to_us(t)));
        }
        let _ = writeln!(
            s,
            "env.loss_probability = {}",
            fmt_f(self.environment.loss_probability)
        );
        let _ = writeln!(
            s,
            "geometry.separation_um = {}",
            fmt_f(units::m_to_um(self.separation))
        );
        match &self.blockade {
            BlockadeModel::Constant { b } => {
                let _ = writeln!(s, "blockade.model = constant");
                let _ = writeln!(s, "blockade.b_ghz = {}", fmt_f(units::rad_to_ghz(*b)));
            }
            BlockadeModel::VanDerWaals { c6 } => {
                let _ = writeln!(s, "blockade.model = vdw");
                let _ = writeln!(
                    s,
                    "blockade.c6_ghz_um6 = {}",
                    fmt_f(units::rad_to_ghz(*c6) * 1e36)
                );
            }
            BlockadeModel::Table { samples } => {
                let _ = writeln!(s, "blockade.model = table");
                let entries: Vec<String> = samples
                    .iter()
                    .map(|(r_m, b)| {
                        format!("{}:{}", units::m_to_um(*r_m), units::rad_to_mhz(*b))
                    })
                    .collect();
                let _ = writeln!(s, "blockade.table = {}", entries.join(";"));
            }
        }
        s
    }

    /// Gap time to use for dephasing estimates: configured value, else the
    /// minimum gap 2π/Ω during which the control atom is Rydberg-excited.
    pub fn effective_gap_time(&self) -> f64 {
        self.environment
            .gap_time
            .unwrap_or(std::f64::consts::TAU / self.laser.omega)
    }

    /// Zeeman-shift difference per unit field, |g_R·m_jR − g_g·m_fg|.
    pub fn delta_gm(&self) -> f64 {
        (self.level.g_m_rydberg - self.species.g_m_ground).abs()
    }
}

/// Parse repeated CLI `key=value` override strings.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text.split_once('=').ok_or_else(|| Error::BadOverride {
        text: text.to_string(),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    pub(crate) const MINIMAL_150S: &str = "\
level.n = 150
laser.rabi_mhz = 30
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
blockade.b_ghz = 2.3
";

    #[test]
    fn lifetime_defaulted_from_table() {
        let cfg = ExperimentConfig::from_text(MINIMAL_150S).unwrap();
        assert!((cfg.level.tau - 860e-6).abs() < 1e-12);
        assert!(cfg.defaulted.iter().any(|k| k == "level.tau_us"));
        // 150s1/2 stretched state: g = 2, m_j = 1/2
        assert!((cfg.level.g_m_rydberg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lifetime_required_off_table() {
        let text = MINIMAL_150S.replace("level.n = 150", "level.n = 97\nlevel.l = 2\nlevel.j = 2.5");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(matches!(err, Error::MissingKey { key } if key == "level.tau_us"));
    }

    #[test]
    fn negative_sigma_names_key() {
        let text = MINIMAL_150S.replace("env.sigma_t = 2.5e-6", "env.sigma_t = -1");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("env.sigma_t"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL_150S}laser.rabi_mzh = 30\n");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(matches!(err, Error::UnknownKey { key } if key == "laser.rabi_mzh"));
    }

    #[test]
    fn counter_propagating_wavenumber() {
        let text = MINIMAL_150S.replace("laser.geometry = co", "laser.geometry = counter");
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        let k = cfg.laser.k_2nu();
        assert!((k - 2.11e7).abs() / 2.11e7 < 5e-3, "k = {k:e}");
    }

    #[test]
    fn two_photon_wavenumber_cases() {
        let co = two_photon_wavenumber(480e-9, 780e-9, BeamGeometry::CoPropagating).unwrap();
        assert!((co - 5.0346036e6).abs() < 1e0);
        let eq = two_photon_wavenumber(480e-9, 480e-9, BeamGeometry::CoPropagating).unwrap();
        assert_eq!(eq, 0.0);
        let counter =
            two_photon_wavenumber(480e-9, 780e-9, BeamGeometry::CounterPropagating).unwrap();
        assert!((counter - 2.1145335e7).abs() < 1e1);
        assert!(two_photon_wavenumber(0.0, 780e-9, BeamGeometry::CoPropagating).is_err());
        assert!(two_photon_wavenumber(480e-9, -1.0, BeamGeometry::CoPropagating).is_err());
    }

    #[test]
    fn lande_values() {
        assert!((lande_g(0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((lande_g(2, 2.5).unwrap() - 1.2).abs() < 1e-15);
        assert!((lande_g(1, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(lande_g(2, 1.0).is_err());
        assert!(lande_g(0, -0.5).is_err());
    }

    #[test]
    fn g_override_validated() {
        let ok = format!("{MINIMAL_150S}level.g_r = 2.001\n");
        assert!(ExperimentConfig::from_text(&ok).is_ok());
        let bad = format!("{MINIMAL_150S}level.g_r = 1.2\n");
        let err = ExperimentConfig::from_text(&bad).unwrap_err();
        assert!(err.to_string().contains("level.g_r"));
    }

    // Unit conversion through lab-unit serialization can move a value by one
    // ulp; round-trip equality is to working precision, not bit identity.
    fn close(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs())
    }

    fn assert_round_trips(cfg: &ExperimentConfig) {
        let reparsed = ExperimentConfig::from_text(&cfg.to_config_text()).unwrap();
        assert_eq!(cfg.species.name, reparsed.species.name);
        assert!(close(cfg.species.mass, reparsed.species.mass));
        assert!(close(cfg.species.omega_hf, reparsed.species.omega_hf));
        assert_eq!(cfg.level.n, reparsed.level.n);
        assert!(close(cfg.level.tau, reparsed.level.tau));
        assert!(close(cfg.level.g_m_rydberg, reparsed.level.g_m_rydberg));
        assert!(close(cfg.laser.omega, reparsed.laser.omega));
        assert!(close(cfg.laser.omega_1, reparsed.laser.omega_1));
        assert!(close(cfg.laser.gamma_p, reparsed.laser.gamma_p));
        assert!(close(cfg.laser.delta, reparsed.laser.delta));
        assert_eq!(cfg.laser.geometry, reparsed.laser.geometry);
        assert!(close(cfg.environment.temperature, reparsed.environment.temperature));
        assert!(close(cfg.environment.sigma_b, reparsed.environment.sigma_b));
        assert!(close(cfg.separation, reparsed.separation));
        match (&cfg.blockade, &reparsed.blockade) {
            (BlockadeModel::Constant { b: x }, BlockadeModel::Constant { b: y }) => {
                assert!(close(*x, *y))
            }
            (BlockadeModel::VanDerWaals { c6: x }, BlockadeModel::VanDerWaals { c6: y }) => {
                assert!(close(*x, *y))
            }
            (BlockadeModel::Table { samples: x }, BlockadeModel::Table { samples: y }) => {
                assert_eq!(x.len(), y.len());
                for (a, b) in x.iter().zip(y) {
                    assert!(close(a.0, b.0) && close(a.1, b.1));
                }
            }
            _ => panic!("blockade model variant changed in round trip"),
        }
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::from_text(MINIMAL_150S).unwrap();
        assert_round_trips(&cfg);

        // with infinities in play
        let ideal = MINIMAL_150S
            .replace("blockade.b_ghz = 2.3", "blockade.b_ghz = inf")
            + "level.tau_us = inf\nspecies.omega_hf_ghz = inf\n";
        let cfg = ExperimentConfig::from_text(&ideal).unwrap();
        assert!(cfg.level.tau.is_infinite());
        assert!(cfg.species.omega_hf.is_infinite());
        assert_round_trips(&cfg);

        // with a table model
        let table = MINIMAL_150S.replace(
            "blockade.model = constant\nblockade.b_ghz = 2.3",
            "blockade.model = table\nblockade.table = 4:100;8:31.7;16:1",
        );
        let cfg = ExperimentConfig::from_text(&table).unwrap();
        assert_round_trips(&cfg);
    }

    #[test]
    fn overrides_apply_before_validation() {
        let cfg = ExperimentConfig::from_text_with_overrides(
            MINIMAL_150S,
            &[("level.n".into(), "100".into())],
            None,
        )
        .unwrap();
        assert_eq!(cfg.level.n, 100);
        assert!((cfg.level.tau - 340e-6).abs() < 1e-12);
    }

    #[test]
    fn blockade_table_csv_resolves_relative_to_config() {
        let dir = std::env::temp_dir().join("rydsim_params_test");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("b.csv"), "# R_um, B_mhz\n4, 100\n16, 1\n").unwrap();
        let text = MINIMAL_150S.replace(
            "blockade.model = constant\nblockade.b_ghz = 2.3",
            "blockade.model = table\nblockade.table_csv = b.csv",
        );
        let path = dir.join("table.conf");
        std::fs::write(&path, &text).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        match &cfg.blockade {
            BlockadeModel::Table { samples } => assert_eq!(samples.len(), 2),
            other => panic!("expected table, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unit_conversions_exact() {
        assert_eq!(units::mhz_to_rad(30.0), 30.0 * TAU * 1e6);
        assert_eq!(units::rad_to_mhz(units::mhz_to_rad(17.5)), 17.5);
        assert_eq!(units::us_to_s(860.0), 8.6e-4);
    }

    #[test]
    fn detuning_warning() {
        let text = MINIMAL_150S.replace("laser.detuning_ghz = 20", "laser.detuning_ghz = 1e-4");
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        assert!(!cfg.warnings.is_empty());
    }

    #[test]
    fn effective_gap_defaults_to_2pi_over_omega() {
        let cfg = ExperimentConfig::from_text(MINIMAL_150S).unwrap();
        let t = cfg.effective_gap_time();
        assert!((t - TAU / cfg.laser.omega).abs() < 1e-20);
        assert!((units::s_to_us(t) - 0.0333333).abs() < 1e-4);
    }
}
