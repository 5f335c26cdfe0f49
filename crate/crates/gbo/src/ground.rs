//! Solitary-wave ground state: solve (|D| + 1) Q = Q^p by stabilized fixed
//! point iteration, extract the algebraic tail coefficients, and provide the
//! derived quantities (integrals, scaling generator, rescaled family) on which
//! the interaction constants and simulations depend.

use crate::fourier::{
    self, apply_multiplier, boundary_window, derivative, forward_transform, frac_dispersion,
    inner_product, integral, l2_norm, FourierError, Grid1D, RealField,
};
use rustfft::num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

/// Iteration cap for the fixed-point solve.
pub const ITERATION_CAP: usize = 500;

/// Default residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GroundError {
    #[error("nonlinearity exponent must exceed 1, got {0}")]
    BadExponent(f64),
    #[error("domain too small: profile tail at the boundary exceeds 1% of the peak (half_length {0})")]
    DomainTooSmall(f64),
    #[error("no convergence after {iterations} iterations, residual {last_residual:.3e}")]
    NoConvergence { iterations: usize, last_residual: f64 },
    #[error("converged profile violates a structural invariant: {0}")]
    InvariantViolation(String),
    #[error("tail fit window too narrow")]
    WindowTooNarrow,
    #[error("tail coefficient not positive ({0:.3e}); ground-state solve suspect")]
    NegativeKappa(f64),
    #[error("rescale factor {0} out of the grid's Nyquist coverage")]
    ScaleOutOfRange(f64),
    #[error("zero field")]
    ZeroField,
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// A converged ground-state profile with its derived quantities.
#[derive(Debug, Clone)]
pub struct GroundState {
    p: f64,
    field: RealField,
    residual: f64,
    iterations: usize,
    residual_history: Vec<f64>,
    kappa0: f64,
    mass: f64,
    int_qp: f64,
    int_q: f64,
    h_value: f64,
    q_lambda_q: f64,
}

impl GroundState {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// The profile Q.
    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        self.field.grid()
    }

    /// L2 residual of (|D|+1)Q - Q^p at convergence.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Residual after each iteration, for convergence diagnostics.
    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// Leading tail coefficient: Q(y) ~ kappa0 / y^2.
    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// Integral of Q^2.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Integral of Q^p.
    pub fn int_qp(&self) -> f64 {
        self.int_qp
    }

    /// Integral of Q.
    pub fn int_q(&self) -> f64 {
        self.int_q
    }

    /// H(Q) where H = M + E is the combined invariant.
    pub fn h_value(&self) -> f64 {
        self.h_value
    }

    /// The pairing (Q, scaling_generator(Q)).
    pub fn q_lambda_q(&self) -> f64 {
        self.q_lambda_q
    }
}

/// The closed-form profile for p = 2: `2 / (1 + y^2)`.
pub fn closed_form_profile_p2(grid: &Arc<Grid1D>) -> RealField {
    RealField::from_fn(grid, |y| 2.0 / (1.0 + y * y))
}

fn symmetrize_even(f: &mut RealField) {
    let r = f.reflected();
    for (a, b) in f.samples_mut().iter_mut().zip(r.samples()) {
        *a = 0.5 * (*a + b);
    }
}

fn equation_residual(q: &RealField, p: f64) -> f64 {
    let mut r = frac_dispersion(q);
    r.add_scaled(1.0, q);
    let qp = q.map(|v| v.abs().powf(p - 1.0) * v);
    r.add_scaled(-1.0, &qp);
    l2_norm(&r)
}

/// Solve (|D| + 1) Q = Q^p on `grid` to residual `tol`.
///
/// Stabilized fixed point: `Q <- m^gamma (|D|+1)^{-1} Q^p` with the energy
/// ratio `m = (Q, (|D|+1)Q) / (Q, Q^p)` and `gamma = p/(p-1)`, symmetrized
/// about the origin each iteration. Initial guess is the p = 2 closed form.
pub fn petviashvili_solve(
    p: f64,
    grid: &Arc<Grid1D>,
    tol: f64,
) -> Result<GroundState, GroundError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(GroundError::BadExponent(p));
    }
    // The initial guess has tail 2/y^2; demand it be below 1% of the peak at
    // the boundary, the stated resolvability floor for the algebraic tail.
    if grid.half_length() < 10.0 {
        return Err(GroundError::DomainTooSmall(grid.half_length()));
    }
    let gamma = p / (p - 1.0);
    let mut q = closed_form_profile_p2(grid);
    let mut history = Vec::new();
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..ITERATION_CAP {
        let qp = q.map(|v| v.abs().powf(p - 1.0) * v);
        let dq = frac_dispersion(&q);
        let num: f64 = q
            .samples()
            .iter()
            .zip(dq.samples().iter().zip(q.samples()))
            .map(|(&a, (&d, &b))| a * (d + b))
            .sum();
        let den: f64 = q.samples().iter().zip(qp.samples()).map(|(&a, &b)| a * b).sum();
        if den == 0.0 || !num.is_finite() {
            return Err(GroundError::NoConvergence { iterations: it, last_residual: res });
        }
        let m = num / den;
        let mut next = apply_multiplier(&qp, |xi| Complex::new(1.0 / (1.0 + xi.abs()), 0.0))?;
        next.scale(m.powf(gamma));
        symmetrize_even(&mut next);
        res = equation_residual(&next, p);
        history.push(res);
        q = next;
        iterations = it + 1;
        if res <= tol {
            break;
        }
    }
    if res > tol {
        return Err(GroundError::NoConvergence { iterations, last_residual: res });
    }

    // Structural gates: positive, peaked at the origin, boundary tail small.
    let n = grid.len();
    let samples = q.samples();
    if samples.iter().any(|&v| v <= 0.0) {
        return Err(GroundError::InvariantViolation("profile not strictly positive".into()));
    }
    let peak_idx = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if peak_idx != n / 2 {
        return Err(GroundError::InvariantViolation(format!(
            "peak at index {peak_idx}, expected center {}",
            n / 2
        )));
    }
    if samples[0] > 0.01 * samples[n / 2] {
        return Err(GroundError::DomainTooSmall(grid.half_length()));
    }

    let mass = inner_product(&q, &q)?;
    let int_qp = integral(&q.map(|v| v.abs().powf(p - 1.0) * v));
    let int_q = integral(&q);
    let h_value = h_functional(&q, p);
    let lam = scaling_generator(&q, p);
    let q_lambda_q = inner_product(&q, &lam)?;

    // Pohozaev-type scaling identity as a solve-quality gate. Pair with the
    // raw y Q' here: the tapered generator differs by an O(L Q(L)^2) boundary
    // term that would dominate the defect on short domains.
    let dq = derivative(&q);
    let y_dq_q: f64 = grid
        .points()
        .iter()
        .zip(dq.samples())
        .zip(q.samples())
        .map(|((&y, &d), &s)| y * d * s)
        .sum::<f64>()
        * grid.spacing();
    let gate_qlq = mass / (p - 1.0) + y_dq_q;
    let expected_qlq = (3.0 - p) / (2.0 * (p - 1.0)) * mass;
    // Tolerance accommodates the O(L^-2) periodization correction the identity
    // picks up on short domains while still rejecting under-resolved solves,
    // whose defect sits at the percent level.
    if (gate_qlq - expected_qlq).abs() > 1e-3 * mass {
        return Err(GroundError::InvariantViolation(format!(
            "scaling identity off: (Q,LambdaQ) = {gate_qlq:.6e}, expected {expected_qlq:.6e}"
        )));
    }

    let mut gs = GroundState {
        p,
        field: q,
        residual: res,
        iterations,
        residual_history: history,
        kappa0: 0.0,
        mass,
        int_qp,
        int_q,
        h_value,
        q_lambda_q,
    };
    let tail = fit_tail_kappa(&gs, default_tail_window(grid))?;
    gs.kappa0 = tail.kappa0;
    Ok(gs)
}

/// Default tail-fit window `[0.25 L, 0.6 L]`.
pub fn default_tail_window(grid: &Arc<Grid1D>) -> (f64, f64) {
    (0.25 * grid.half_length(), 0.6 * grid.half_length())
}

/// Tail-fit result; `kappa0/kappa1` are side-averaged.
#[derive(Debug, Clone, Copy)]
pub struct TailFit {
    pub kappa0: f64,
    pub kappa1: f64,
    /// Per-side fits (left, right) for symmetry diagnostics.
    pub left: (f64, f64),
    pub right: (f64, f64),
}

/// Periodized tail basis: the images of 1/y^2 and 1/y^4 summed over all
/// periods, in closed form. On a periodic domain the bare powers are the
/// wrong basis — distant images contribute at the kappa1 level.
fn lattice_inv2(y: f64, l: f64) -> f64 {
    let a = std::f64::consts::PI / (2.0 * l);
    let s = (a * y).sin();
    a * a / (s * s)
}

fn lattice_inv4(y: f64, l: f64) -> f64 {
    let a = std::f64::consts::PI / (2.0 * l);
    let s = (a * y).sin();
    let c = (a * y).cos();
    let inv2 = 1.0 / (s * s);
    a.powi(4) * ((2.0 / 3.0) * c * c * inv2 * inv2 + (1.0 / 3.0) * inv2 * inv2)
}

/// Fit `Q(y) y^2` against the (periodized) basis {1, 1/y^2} over the window
/// on both sides and average: returns the tail coefficients (kappa0, kappa1)
/// of `Q ~ kappa0/y^2 + kappa1/y^4`.
pub fn fit_tail_kappa(gs: &GroundState, window: (f64, f64)) -> Result<TailFit, GroundError> {
    fit_tail_of_field(gs.field(), window)
}

/// Tail fit on a bare field (used by the solver before the struct exists).
pub fn fit_tail_of_field(q: &RealField, window: (f64, f64)) -> Result<TailFit, GroundError> {
    let grid = q.grid();
    let l = grid.half_length();
    let (lo, hi) = window;
    if !(0.0 < lo && lo < hi && hi <= 0.95 * l) {
        return Err(GroundError::WindowTooNarrow);
    }
    let mut fits = [(0.0, 0.0); 2];
    for (side, fit) in fits.iter_mut().enumerate() {
        // side 0: y < 0, side 1: y > 0
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut count = 0usize;
        for (&y, &v) in grid.points().iter().zip(q.samples()) {
            let t = if side == 0 { -y } else { y };
            if t >= lo && t <= hi {
                let y2 = y * y;
                let a1 = y2 * lattice_inv2(y, l);
                let a2 = y2 * lattice_inv4(y, l);
                let rhs = y2 * v;
                s11 += a1 * a1;
                s12 += a1 * a2;
                s22 += a2 * a2;
                b1 += a1 * rhs;
                b2 += a2 * rhs;
                count += 1;
            }
        }
        if count < 8 {
            return Err(GroundError::WindowTooNarrow);
        }
        let det = s11 * s22 - s12 * s12;
        if det.abs() <= f64::MIN_POSITIVE {
            return Err(GroundError::WindowTooNarrow);
        }
        *fit = ((s22 * b1 - s12 * b2) / det, (s11 * b2 - s12 * b1) / det);
    }
    let kappa0 = 0.5 * (fits[0].0 + fits[1].0);
    let kappa1 = 0.5 * (fits[0].1 + fits[1].1);
    if kappa0 <= 0.0 {
        return Err(GroundError::NegativeKappa(kappa0));
    }
    Ok(TailFit { kappa0, kappa1, left: fits[0], right: fits[1] })
}

/// The soliton family member `Q_c(y) = c^{1/(p-1)} Q(c y)`, evaluated by
/// summing the Fourier series of Q at the dilated points (band-limited
/// interpolation; exact for resolvable `c`).
pub fn rescale(gs: &GroundState, c: f64) -> Result<RealField, GroundError> {
    dilate_field(gs.field(), c, c.powf(1.0 / (gs.p - 1.0)))
}

/// `amplitude * f(c y)` via the Fourier series of `f`.
pub fn dilate_field(f: &RealField, c: f64, amplitude: f64) -> Result<RealField, GroundError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(GroundError::ScaleOutOfRange(c));
    }
    if c == 1.0 {
        // Exact short-circuit; resampling would only drop the Nyquist bin.
        let mut out = f.clone();
        out.scale(amplitude);
        return Ok(out);
    }
    let grid = f.grid();
    let n = grid.len();
    let hat = forward_transform(f);
    let peak = hat.coeffs().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return Ok(RealField::zeros(grid));
    }
    // Dilation by c > 1 maps modes with |xi| > nyquist/c out of the resolvable
    // band; they are dropped below. Require that loss to be negligible.
    if c > 1.0 {
        let cutoff = grid.nyquist() / c;
        let (mut lost, mut total) = (0.0f64, 0.0f64);
        for (j, coeff) in hat.coeffs().iter().enumerate() {
            let e = coeff.norm_sqr();
            total += e;
            if grid.wavenumbers()[j].abs() > cutoff {
                lost += e;
            }
        }
        if lost > 1e-12 * total {
            return Err(GroundError::ScaleOutOfRange(c));
        }
    }
    // Resample in frequency: the dilate's transform is (A/c) uhat(xi/c). The
    // grid coefficients are the line transform at the grid frequencies, so
    // local polynomial interpolation recovers uhat off-grid; stencils stay on
    // the non-negative axis because uhat has a |xi| kink at the origin
    // (algebraic spatial tails). Inverting the resampled coefficients yields
    // the periodization of the dilated profile directly, with no wrap images.
    const STENCIL: usize = 8;
    let half = n / 2;
    let prefactor = amplitude / c;
    let mut ghat = vec![Complex::new(0.0, 0.0); n];
    for k in 0..half {
        let t = k as f64 / c;
        if t > half as f64 {
            continue;
        }
        let s0 = (t.floor() as usize)
            .saturating_sub(STENCIL / 2 - 1)
            .min(half - (STENCIL - 1));
        let mut acc = Complex::new(0.0, 0.0);
        for a in 0..STENCIL {
            let node = s0 + a;
            let mut w = 1.0;
            for b in 0..STENCIL {
                if b != a {
                    let other = s0 + b;
                    w *= (t - other as f64) / (node as f64 - other as f64);
                }
            }
            acc += hat.coeffs()[node] * w;
        }
        ghat[k] = acc * prefactor;
        if k > 0 {
            ghat[n - k] = acc.conj() * prefactor;
        }
    }
    ghat[0].im = 0.0;
    let out = crate::fourier::inverse_transform(&crate::fourier::SpectralField::from_parts(
        grid, ghat,
    )?)?;
    Ok(out)
}

/// The scaling generator `Lambda f = f/(p-1) + y f'`, with the `y`-weight
/// windowed to zero in the outer 10% of the domain (y f' is not periodic).
pub fn scaling_generator(f: &RealField, p: f64) -> RealField {
    let df = derivative(f);
    let w = boundary_window(f.grid());
    let mut out = f.map(|v| v / (p - 1.0));
    for ((o, d), (wv, y)) in out
        .samples_mut()
        .iter_mut()
        .zip(df.samples())
        .zip(w.samples().iter().zip(f.grid().points()))
    {
        *o += wv * y * d;
    }
    out
}

/// Gagliardo-Nirenberg quotient
/// `J(u) = (int ||D|^{1/2}u|^2)^{(p-1)/2} (int u^2) / int |u|^{p+1}`;
/// scale, amplitude, and translation invariant. Q minimizes it.
pub fn gn_quotient(u: &RealField, p: f64) -> Result<f64, GroundError> {
    let l2 = inner_product(u, u)?;
    if l2 == 0.0 {
        return Err(GroundError::ZeroField);
    }
    let kin = fourier::half_dispersion_energy(u);
    let pot = integral(&u.map(|v| v.abs().powf(p + 1.0)));
    Ok(kin.powf((p - 1.0) / 2.0) * l2 / pot)
}

/// The combined invariant `H(u) = M(u) + E(u)
/// = 1/2 int u^2 + 1/2 int ||D|^{1/2}u|^2 - 1/(p+1) int |u|^{p+1}`.
pub fn h_functional(u: &RealField, p: f64) -> f64 {
    let mass = 0.5 * u.samples().iter().map(|v| v * v).sum::<f64>() * u.grid().spacing();
    let kin = 0.5 * fourier::half_dispersion_energy(u);
    let pot = integral(&u.map(|v| v.abs().powf(p + 1.0))) / (p + 1.0);
    mass + kin - pot
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(p: f64, n: usize, l: f64) -> GroundState {
        let grid = Grid1D::new(n, l).unwrap();
        petviashvili_solve(p, &grid, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn p2_matches_closed_form() {
        let gs = solve(2.0, 8192, 400.0);
        let exact = closed_form_profile_p2(gs.grid());
        let mut err = 0.0f64;
        for (a, b) in gs.field().samples().iter().zip(exact.samples()) {
            err = err.max((a - b).abs());
        }
        assert!(err <= 1e-3, "sup deviation {err}");
        assert!(gs.residual() <= DEFAULT_TOL);
    }

    #[test]
    fn residual_monotone_at_the_end() {
        let gs = solve(2.5, 4096, 400.0);
        let h = gs.residual_history();
        let tail = &h[h.len().saturating_sub(10)..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "residual bump {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn p4_profile_structure() {
        let gs = solve(4.0, 2048, 50.0);
        let n = gs.grid().len();
        let s = gs.field().samples();
        // even
        for j in 1..n / 2 {
            assert_relative_eq!(s[n / 2 + j], s[n / 2 - j], max_relative = 1e-10, epsilon = 1e-12);
        }
        // positive, monotone decreasing away from the peak (additive slack for
        // the spectral floor, which exceeds sample-to-sample tail differences)
        let peak = s[n / 2];
        for w in s[n / 2..].windows(2) {
            assert!(w[1] > 0.0 && w[1] <= w[0] + 1e-6 * peak);
        }
    }

    #[test]
    fn bad_exponent_rejected() {
        let grid = Grid1D::new(1024, 100.0).unwrap();
        assert!(matches!(
            petviashvili_solve(1.0, &grid, 1e-10),
            Err(GroundError::BadExponent(_))
        ));
        assert!(matches!(
            petviashvili_solve(0.5, &grid, 1e-10),
            Err(GroundError::BadExponent(_))
        ));
    }

    #[test]
    fn small_domain_rejected() {
        let grid = Grid1D::new(256, 5.0).unwrap();
        assert!(matches!(
            petviashvili_solve(2.0, &grid, 1e-10),
            Err(GroundError::DomainTooSmall(_))
        ));
    }

    #[test]
    fn tail_coefficients_p2() {
        let gs = solve(2.0, 8192, 400.0);
        let fit = fit_tail_kappa(&gs, default_tail_window(gs.grid())).unwrap();
        assert_relative_eq!(fit.kappa0, 2.0, max_relative = 0.02);
        assert_relative_eq!(fit.kappa1, -2.0, max_relative = 0.10);
        // side symmetry
        assert_relative_eq!(fit.left.0, fit.right.0, max_relative = 0.01);
        // window-doubling stability of kappa0
        let half = fit_tail_kappa(&gs, (100.0, 170.0)).unwrap();
        let double = fit_tail_kappa(&gs, (100.0, 240.0)).unwrap();
        assert_relative_eq!(half.kappa0, double.kappa0, max_relative = 0.005);
    }

    #[test]
    fn narrow_window_rejected() {
        let gs = solve(2.0, 1024, 100.0);
        assert!(matches!(
            fit_tail_kappa(&gs, (50.0, 50.2)),
            Err(GroundError::WindowTooNarrow)
        ));
        assert!(matches!(
            fit_tail_kappa(&gs, (90.0, 99.9)),
            Err(GroundError::WindowTooNarrow)
        ));
    }

    #[test]
    fn rescale_identity_and_closed_form() {
        let gs = solve(2.0, 8192, 400.0);
        let same = rescale(&gs, 1.0).unwrap();
        let mut err = 0.0f64;
        for (a, b) in same.samples().iter().zip(gs.field().samples()) {
            err = err.max((a - b).abs());
        }
        assert!(err <= 1e-8, "c=1 deviation {err}");

        let doubled = rescale(&gs, 2.0).unwrap();
        let mut err = 0.0f64;
        for (v, &y) in doubled.samples().iter().zip(gs.grid().points()) {
            err = err.max((v - 4.0 / (1.0 + 4.0 * y * y)).abs());
        }
        assert!(err <= 1e-3, "c=2 closed-form deviation {err}");
    }

    #[test]
    fn rescale_mass_scaling() {
        // Large domain: the mass identity holds for the line profile, and the
        // periodization cross terms scale as 1/L^2.
        let gs = solve(2.5, 65536, 1600.0);
        let c = 1.3;
        let qc = rescale(&gs, c).unwrap();
        let ratio = inner_product(&qc, &qc).unwrap() / gs.mass();
        let expected = c.powf(2.0 / (gs.p() - 1.0) - 1.0);
        assert_relative_eq!(ratio, expected, max_relative = 1e-6);
    }

    #[test]
    fn rescale_out_of_band_rejected() {
        let gs = solve(2.0, 1024, 100.0);
        assert!(matches!(rescale(&gs, -1.0), Err(GroundError::ScaleOutOfRange(_))));
        // Large dilation pushes the band past Nyquist on this coarse grid.
        assert!(matches!(rescale(&gs, 50.0), Err(GroundError::ScaleOutOfRange(_))));
    }

    #[test]
    fn scaling_generator_constant() {
        let grid = Grid1D::new(256, 10.0).unwrap();
        let one = RealField::from_fn(&grid, |_| 1.0);
        let lam = scaling_generator(&one, 2.0);
        for v in lam.samples() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn q_lambda_q_identity_p2() {
        let gs = solve(2.0, 8192, 400.0);
        assert_relative_eq!(gs.q_lambda_q(), std::f64::consts::PI, max_relative = 0.01);
    }

    #[test]
    fn lambda_is_rescale_derivative() {
        let gs = solve(2.0, 4096, 400.0);
        let eps = 1e-3;
        let plus = rescale(&gs, 1.0 + eps).unwrap();
        let minus = rescale(&gs, 1.0 - eps).unwrap();
        let lam = scaling_generator(gs.field(), gs.p());
        let l = gs.grid().half_length();
        let mut err = 0.0f64;
        for ((pv, mv), (lv, &y)) in plus
            .samples()
            .iter()
            .zip(minus.samples())
            .zip(lam.samples().iter().zip(gs.grid().points()))
        {
            if y.abs() <= 0.5 * l {
                err = err.max(((pv - mv) / (2.0 * eps) - lv).abs());
            }
        }
        assert!(err <= 1e-4, "finite-difference mismatch {err}");
    }

    #[test]
    fn gn_quotient_invariances() {
        // Amplitude and translation leave every factor exactly invariant.
        let positive = |y: f64| (-(y * y) / 8.0).exp() * (1.0 + 0.3 * y.cos());
        let grid = Grid1D::new(4096, 240.0).unwrap();
        let u = RealField::from_fn(&grid, positive);
        let p = 2.5;
        let j = gn_quotient(&u, p).unwrap();
        let scaled = u.map(|v| 3.7 * v);
        assert_relative_eq!(gn_quotient(&scaled, p).unwrap(), j, max_relative = 1e-12);
        let shift = 16.0 * grid.spacing();
        let translated = RealField::from_fn(&grid, |y| positive(y - shift));
        assert_relative_eq!(gn_quotient(&translated, p).unwrap(), j, max_relative = 1e-8);

        // Dilation invariance needs all three quadratures at spectral
        // accuracy: a mean-free profile (the |xi| kink at the origin otherwise
        // costs O((pi/L)^2) in the half-dispersion sum) and an even p+1 power
        // (|u|^{p+1} is only C^3 at sign changes for fractional p).
        let odd = |y: f64| (-(y * y) / 8.0).exp() * y.sin() * (1.0 + 0.3 * y.cos());
        let v = RealField::from_fn(&grid, odd);
        let jv = gn_quotient(&v, 3.0).unwrap();
        let dilated = RealField::from_fn(&grid, |y| odd(2.0 * y));
        assert_relative_eq!(gn_quotient(&dilated, 3.0).unwrap(), jv, max_relative = 1e-8);
    }

    #[test]
    fn ground_state_minimizes_gn_quotient() {
        let gs = solve(2.0, 2048, 200.0);
        let jq = gn_quotient(gs.field(), 2.0).unwrap();
        let grid = gs.grid();
        let mut state = 99u64;
        for _ in 0..20 {
            // random smooth decaying test functions
            let (a, b, c) = {
                let mut next = || {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64
                };
                (0.5 + next(), 0.1 + 0.4 * next(), 2.0 + 6.0 * next())
            };
            let u = RealField::from_fn(grid, |y| a * (-(y * y) / (2.0 * c * c)).exp() * (1.0 + b * (y / c).sin()));
            let ju = gn_quotient(&u, 2.0).unwrap();
            assert!(ju >= jq * (1.0 - 1e-9), "J(u) = {ju} < J(Q) = {jq}");
        }
    }

    #[test]
    fn h_functional_basics() {
        let grid = Grid1D::new(1024, 100.0).unwrap();
        let zero = RealField::zeros(&grid);
        assert_eq!(h_functional(&zero, 2.0), 0.0);

        let gs = solve(2.0, 4096, 400.0);
        // translation by whole grid steps permutes samples: H identical
        let shifted = {
            let s = gs.field().samples();
            let n = s.len();
            let mut t = vec![0.0; n];
            for (j, tv) in t.iter_mut().enumerate() {
                *tv = s[(j + n - 500) % n];
            }
            RealField::from_samples(gs.grid(), t).unwrap()
        };
        assert_relative_eq!(
            h_functional(&shifted, 2.0),
            h_functional(gs.field(), 2.0),
            max_relative = 1e-12
        );
        // cross-quadrature: spectral kinetic term vs physical-space identity
        // H = mass/2 + (Q,|D|Q)/2 - int Q^3 / 3, with (Q,|D|Q) = int Q^3 - int Q^2
        let q3 = integral(&gs.field().map(|v| v * v * v));
        let phys = 0.5 * gs.mass() + 0.5 * (q3 - gs.mass()) - q3 / 3.0;
        assert_relative_eq!(gs.h_value(), phys, max_relative = 1e-8);
    }

    #[test]
    fn zero_field_rejected() {
        let grid = Grid1D::new(256, 10.0).unwrap();
        let zero = RealField::zeros(&grid);
        assert!(matches!(gn_quotient(&zero, 2.0), Err(GroundError::ZeroField)));
    }
}
