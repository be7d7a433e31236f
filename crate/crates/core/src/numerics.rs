//! Shared numerical machinery: dense complex matrix exponential, scalar
//! minimization, adaptive quadrature, and small least-squares fits.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Matrix 1-norm (max absolute column sum).
fn one_norm(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential by Padé(13) with scaling and squaring
/// (Higham 2005). Exact to machine precision for the sizes used here.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a = a / C64::from(2f64.powi(s as i32));

    let eye = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (&a6 * C64::from(B[13]) + &a4 * C64::from(B[11]) + &a2 * C64::from(B[9]))
        + &a6 * C64::from(B[7])
        + &a4 * C64::from(B[5])
        + &a2 * C64::from(B[3])
        + &eye * C64::from(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * C64::from(B[12]) + &a4 * C64::from(B[10]) + &a2 * C64::from(B[8]))
        + &a6 * C64::from(B[6])
        + &a4 * C64::from(B[4])
        + &a2 * C64::from(B[2])
        + &eye * C64::from(B[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = lhs
        .lu()
        .solve(&rhs)
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Golden-section minimum of a unimodal scalar function on [lo, hi].
/// Runs a fixed iteration count; x-accuracy is limited by the curvature
/// floor ~√ε·x, well below 1e-6 relative for smooth minima.
pub fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: u32) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimize f(ln x) over [lo, hi] in log space; returns (x*, f(x*)).
/// Errors if the minimum sits at either bracket edge.
pub fn golden_min_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: u32) -> Result<(f64, f64)> {
    let g = |u: f64| f(u.exp());
    let (u, fu) = golden_min(g, lo.ln(), hi.ln(), iters);
    let x = u.exp();
    // interior check: an edge minimum means the bracket failed
    let edge = (hi / lo).ln() * 1e-3;
    if (u - lo.ln()).abs() < edge || (hi.ln() - u).abs() < edge {
        return Err(Error::BracketFailure { lo, hi });
    }
    Ok((x, fu))
}

fn simpson_segment(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
    max_depth: u32,
) -> Result<f64> {
    let (left, lm, flm) = simpson_segment(f, a, fa, m, fm);
    let (right, rm, frm) = simpson_segment(f, m, fm, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= max_depth {
        return Err(Error::QuadratureNonConvergence { max_depth });
    }
    let l = simpson_rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth + 1, max_depth)?;
    let r = simpson_rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth + 1, max_depth)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson_segment(&f, a, fa, b, fb);
    simpson_rec(&f, a, fa, b, fb, whole, m, fm, tol, 0, 48)
}

/// Least-squares fit of y ≈ c₀ + c₁·cos(2φ) + c₂·sin(2φ).
/// Returns (offset, amplitude, phase) with amplitude·cos(2φ + phase).
pub fn fit_parity_oscillation(phases: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    assert_eq!(phases.len(), values.len());
    if phases.len() < 3 {
        return Err(Error::FitFailure {
            reason: "need at least three parity points".into(),
        });
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&p, &y) in phases.iter().zip(values) {
        let row = [1.0, (2.0 * p).cos(), (2.0 * p).sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| ata[i][j]);
    let b = nalgebra::Vector3::from_column_slice(&atb);
    let sol = m.lu().solve(&b).ok_or_else(|| Error::FitFailure {
        reason: "singular normal equations (degenerate phase grid)".into(),
    })?;
    let (c0, a_cos, a_sin) = (sol[0], sol[1], sol[2]);
    // c1 cos2φ + c2 sin2φ = A cos(2φ + φ0) with A = √(c1²+c2²), φ0 = atan2(−c2, c1)
    let amp = (a_cos * a_cos + a_sin * a_sin).sqrt();
    let phi0 = (-a_sin).atan2(a_cos);
    Ok((c0, amp, phi0))
}

/// SplitMix64 step, used to derive independent per-shot RNG seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn expm_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 1.0),
            C64::new(-0.5, 0.0),
        ]));
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(1.0f64.cos(), 1.0f64.sin())).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::from((-0.5f64).exp())).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_pauli_rotation() {
        // exp(-i θ σx / 2) = cos(θ/2) I - i sin(θ/2) σx, with large θ to
        // exercise scaling-and-squaring.
        let theta = 2000.0 * PI + PI / 3.0;
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -theta / 2.0),
                C64::new(0.0, -theta / 2.0),
                C64::new(0.0, 0.0),
            ],
        );
        let u = expm(&h);
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        assert!((u[(0, 0)] - C64::from(c)).norm() < 1e-9);
        assert!((u[(0, 1)] - C64::new(0.0, -s)).norm() < 1e-9);
        // unitarity
        let id = &u * u.adjoint();
        assert!((&id - DMatrix::<C64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn golden_finds_quadratic_min() {
        let (x, _) = golden_min(|x| (x - 3.7).powi(2) + 1.0, 0.0, 10.0, 120);
        assert!((x - 3.7).abs() < 1e-7);
    }

    #[test]
    fn golden_log_flags_edge_minimum() {
        assert!(golden_min_log(|x| x, 1.0, 100.0, 120).is_err());
    }

    #[test]
    fn simpson_gaussian() {
        let v = integrate(|x| (-x * x / 2.0).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn simpson_reports_non_convergence() {
        // integrable singularity at the origin defeats the depth budget
        let r = integrate(|x| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 1e-14);
        assert!(matches!(
            r,
            Err(crate::error::Error::QuadratureNonConvergence { .. })
        ));
    }

    #[test]
    fn parity_fit_recovers_components() {
        let phases: Vec<f64> = (0..24).map(|k| PI * k as f64 / 24.0).collect();
        let values: Vec<f64> = phases
            .iter()
            .map(|&p| 0.1 + 0.42 * (2.0 * p + 0.3).cos())
            .collect();
        let (c0, amp, phi0) = fit_parity_oscillation(&phases, &values).unwrap();
        assert!((c0 - 0.1).abs() < 1e-12);
        assert!((amp - 0.42).abs() < 1e-12);
        assert!((phi0 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn splitmix_is_deterministic() {
        assert_eq!(splitmix64(42), splitmix64(42));
        assert_ne!(splitmix64(42), splitmix64(43));
    }
}
