//! Quantitative cross-checks tying the static objects to the dynamics: the
//! two-soliton energy expansion, power-law fits of separation growth, and
//! direct comparison of reduced-ODE and PDE trajectories.

use crate::fourier::l2_norm;
use crate::ground::{self, GroundError, GroundState};
use crate::sim::{self, SimError};
use thiserror::Error;

/// Errors from the diagnostic routines.
#[derive(Debug, Error)]
pub enum DiagError {
    #[error("domain half-length {have} cannot hold separation {needed}")]
    DomainTooSmall { needed: f64, have: f64 },
    #[error("time span covers {ratio:.2}x, need at least {need:.0}x")]
    InsufficientSpan { ratio: f64, need: f64 },
    #[error("no overlapping time window: [{a0:.3}, {a1:.3}] vs [{b0:.3}, {b1:.3}]")]
    WindowMismatch { a0: f64, a1: f64, b0: f64, b1: f64 },
    #[error("input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Power-law fit summary.
///
/// Invariants: `r_squared` lies in `[0, 1]` and `samples_used >= 5`; the
/// model is `value ~ coefficient * x^exponent` with the coefficient carrying
/// the common sign of the samples.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples_used: usize,
}

/// Least squares of `y` on `{x, 1}`; returns (slope, intercept, r_squared).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean = sy / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

/// Log-log power-law fit of same-signed samples `ys` against `xs > 0`.
fn power_fit(xs: &[f64], ys: &[f64]) -> Result<FitReport, DiagError> {
    if xs.len() < 5 {
        return Err(DiagError::BadInput(format!("need at least 5 samples, got {}", xs.len())));
    }
    let sign = ys[0].signum();
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) {
            return Err(DiagError::BadInput(format!("nonpositive abscissa {x}")));
        }
        if y.signum() != sign || y == 0.0 {
            return Err(DiagError::BadInput("samples change sign or vanish".into()));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let (slope, intercept, r2) = linear_fit(&lx, &ly);
    let (lo, hi) = xs.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(FitReport {
        exponent: slope,
        coefficient: sign * intercept.exp(),
        r_squared: r2,
        window: (lo, hi),
        samples_used: xs.len(),
    })
}

/// Minimal separation where the tail expansion is trusted.
const MIN_SEPARATION: f64 = 20.0;

/// Two-soliton interaction energy against separation.
///
/// For each separation the pair `Q(y - d/2) + sigma Q(y + d/2)` is formed and
/// the conserved functional compared to twice the single-soliton value. The
/// difference follows `-sigma (kappa0 int Q^p) / d^2` to leading order, so
/// the fitted exponent should sit near -2 and the coefficient near
/// `-sigma kappa0 int Q^p`. Separations must be at least 20 and fit inside
/// the periodic domain.
pub fn energy_expansion_check(
    gs: &GroundState,
    sigma: f64,
    separations: &[f64],
) -> Result<FitReport, DiagError> {
    if sigma != 1.0 && sigma != -1.0 {
        return Err(DiagError::BadInput(format!("sigma {sigma} must be exactly +-1")));
    }
    if separations.len() < 5 {
        return Err(DiagError::BadInput(format!(
            "need at least 5 separations, got {}",
            separations.len()
        )));
    }
    let l = gs.grid().half_length();
    for &d in separations {
        if !(d >= MIN_SEPARATION) {
            return Err(DiagError::BadInput(format!(
                "separation {d} below the tail regime {MIN_SEPARATION}"
            )));
        }
        if d > l {
            return Err(DiagError::DomainTooSmall { needed: d, have: l });
        }
    }
    let p = gs.p();
    let h_single = ground::h_functional(gs.field(), p);
    let mut deltas = Vec::with_capacity(separations.len());
    for &d in separations {
        let pair =
            sim::make_multisoliton(gs, &[0.5 * d, -0.5 * d], &[0.0, 0.0], &[1.0, sigma], false)?;
        deltas.push(ground::h_functional(&pair, p) - 2.0 * h_single);
    }
    power_fit(separations, &deltas)
}

/// Minimum time span, as a ratio, for a credible growth-law fit.
const MIN_SPAN_RATIO: f64 = 10.0;

/// Fit `gap(t) ~ c + A t^e` on a positive, increasing time series.
///
/// The constant is estimated first by least squares on `{sqrt t, 1}` and
/// removed; the exponent then comes from the log-log fit of the remainder.
/// Requires at least five samples spanning a factor of ten in time.
pub fn separation_law_fit(series: &[(f64, f64)]) -> Result<FitReport, DiagError> {
    if series.len() < 5 {
        return Err(DiagError::BadInput(format!("need at least 5 samples, got {}", series.len())));
    }
    for w in series.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(DiagError::BadInput("times must increase strictly".into()));
        }
    }
    let (t0, t1) = (series[0].0, series[series.len() - 1].0);
    if !(t0 > 0.0) {
        return Err(DiagError::BadInput(format!("times must be positive, got {t0}")));
    }
    if t1 / t0 < MIN_SPAN_RATIO {
        return Err(DiagError::InsufficientSpan { ratio: t1 / t0, need: MIN_SPAN_RATIO });
    }
    let roots: Vec<f64> = series.iter().map(|&(t, _)| t.sqrt()).collect();
    let gaps: Vec<f64> = series.iter().map(|&(_, g)| g).collect();
    let (_, constant, _) = linear_fit(&roots, &gaps);
    let ts: Vec<f64> = series.iter().map(|&(t, _)| t).collect();
    let detrended: Vec<f64> = gaps.iter().map(|g| g - constant).collect();
    if detrended.iter().any(|&g| g <= 0.0) {
        return Err(DiagError::BadInput(
            "separation does not grow above its fitted constant".into(),
        ));
    }
    power_fit(&ts, &detrended)
}

/// Pointwise comparison of two gap-versus-time curves.
#[derive(Debug, Clone)]
pub struct CompareReport {
    /// Largest relative deviation, normalized by the reference gap there.
    pub sup_rel: f64,
    /// Root-mean-square of the relative deviations.
    pub rms_rel: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

/// Compare a test gap series against a reference one on their common time
/// window, interpolating the reference linearly onto the test sample times.
/// Deviations are normalized by the reference gap at the same time.
pub fn ode_pde_compare(
    reference: &[(f64, f64)],
    test: &[(f64, f64)],
) -> Result<CompareReport, DiagError> {
    if reference.len() < 2 || test.len() < 2 {
        return Err(DiagError::BadInput("need at least two samples per series".into()));
    }
    for s in [reference, test] {
        for w in s.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(DiagError::BadInput("times must increase strictly".into()));
            }
        }
    }
    let (a0, a1) = (reference[0].0, reference[reference.len() - 1].0);
    let (b0, b1) = (test[0].0, test[test.len() - 1].0);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi > lo) {
        return Err(DiagError::WindowMismatch { a0, a1, b0, b1 });
    }
    let mut sup = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut used = 0usize;
    let mut seg = 0usize;
    for &(t, g) in test {
        if t < lo || t > hi {
            continue;
        }
        while seg + 2 < reference.len() && reference[seg + 1].0 < t {
            seg += 1;
        }
        let (ta, ga) = reference[seg];
        let (tb, gb) = reference[seg + 1];
        let w = (t - ta) / (tb - ta);
        let gr = ga + w * (gb - ga);
        if !(gr > 0.0) {
            return Err(DiagError::BadInput(format!("reference gap {gr} not positive at t={t}")));
        }
        let rel = (g - gr).abs() / gr;
        sup = sup.max(rel);
        sum_sq += rel * rel;
        used += 1;
    }
    if used < 2 {
        return Err(DiagError::WindowMismatch { a0, a1, b0, b1 });
    }
    Ok(CompareReport {
        sup_rel: sup,
        rms_rel: (sum_sq / used as f64).sqrt(),
        samples: used,
        window: (lo, hi),
    })
}

/// Relative L2 distance between two fields, for snapshot comparisons.
pub fn relative_l2(a: &crate::fourier::RealField, b: &crate::fourier::RealField) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    l2_norm(&d) / l2_norm(b).max(f64::MIN_POSITIVE)
}
