//! The linearized operator L = |D| + 1 - pQ^{p-1} around the ground state:
//! dense spectral structure (negative direction, kernel, essential floor,
//! supercritical edge pairs of d_y L), inversion on the complement of the
//! kernel, and the interaction profiles entering the multi-soliton ansatz.

use crate::fourier::{
    apply_multiplier, derivative, hilbert_transform, inner_product, l2_norm, Grid1D, RealField,
};
use crate::ground::{scaling_generator, GroundState};
use ndarray::{Array1, Array2};
use ndarray_linalg::eig::Eig;
use ndarray_linalg::eigh::Eigh;
use ndarray_linalg::UPLO;
use rustfft::num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

/// Dense matrices above this size are refused (O(n^2) memory, O(n^3) solves).
pub const DENSE_LIMIT: usize = 4096;

/// Localization score threshold separating discrete modes from continuum
/// artifacts.
pub const LOCALIZATION_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error)]
pub enum LinopError {
    #[error("dense representation unavailable for n = {0} (limit {DENSE_LIMIT})")]
    DenseTooLarge(usize),
    #[error("spectrum anomaly: {0}")]
    SpectrumAnomaly(String),
    #[error("no localized real +/- eigenvalue pair found")]
    NoRealPair,
    #[error("edge eigenpairs require p > 3, got p = {0}")]
    NotSupercritical(f64),
    #[error("degenerate (Z,Y) normalization pairing ({0:.3e})")]
    DegenerateNormalization(f64),
    #[error("right side not orthogonal to the kernel: |(g,Q')| = {0:.3e} relative")]
    NotOrthogonal(f64),
    #[error("linear solve failed: residual {residual:.3e} after {iterations} iterations")]
    SolveFailure { residual: f64, iterations: usize },
    #[error("compatibility pairing (g,Q) = {0:.3e} relative; interaction constant inconsistent")]
    CompatibilityFailure(f64),
    #[error(transparent)]
    Fourier(#[from] crate::fourier::FourierError),
}

/// L at a ground state. The action is always available spectrally; the dense
/// symmetric matrix is materialized only on grids small enough for eigensolves.
pub struct LinearizedOperator {
    ground: GroundState,
    potential: Vec<f64>,
    matrix: Option<Array2<f64>>,
}

/// Circulant matrix of a Fourier multiplier: first column from one inverse
/// DFT of the symbol sampled on the grid frequencies.
fn circulant_kernel(grid: &Arc<Grid1D>, symbol: impl Fn(f64) -> Complex<f64>) -> Vec<f64> {
    let n = grid.len();
    let mut buf: Vec<Complex<f64>> = grid.wavenumbers().iter().map(|&xi| symbol(xi)).collect();
    grid.inverse_fft(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

impl LinearizedOperator {
    pub fn ground(&self) -> &GroundState {
        &self.ground
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        self.ground.grid()
    }

    pub fn p(&self) -> f64 {
        self.ground.p()
    }

    /// The dense symmetric matrix, if the grid admits one.
    pub fn matrix(&self) -> Result<&Array2<f64>, LinopError> {
        self.matrix
            .as_ref()
            .ok_or_else(|| LinopError::DenseTooLarge(self.grid().len()))
    }

    /// Apply L spectrally: |D|f + f - pQ^{p-1} f.
    pub fn apply(&self, f: &RealField) -> Result<RealField, LinopError> {
        let mut out = crate::fourier::frac_dispersion(f);
        for ((o, &v), &w) in out
            .samples_mut()
            .iter_mut()
            .zip(f.samples())
            .zip(&self.potential)
        {
            *o += v - w * v;
        }
        Ok(out)
    }

    /// The dense matrix of A = d_y L (nonsymmetric).
    pub fn advection_matrix(&self) -> Result<Array2<f64>, LinopError> {
        let l = self.matrix()?;
        let grid = self.grid();
        let nyq = grid.nyquist();
        let kd = circulant_kernel(grid, |xi| {
            if xi.abs() >= nyq {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, xi)
            }
        });
        let n = grid.len();
        let mut d = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            for l_idx in 0..n {
                let m = (j + n - l_idx) % n;
                // antisymmetrize: the kernel of an odd imaginary symbol
                let v = 0.5 * (kd[m] - kd[(n - m) % n]);
                d[[j, l_idx]] = v;
            }
        }
        Ok(d.dot(l))
    }
}

/// Assemble the operator; the dense matrix is built when n <= DENSE_LIMIT.
pub fn build_operator(ground: &GroundState) -> LinearizedOperator {
    let p = ground.p();
    let potential: Vec<f64> = ground
        .field()
        .samples()
        .iter()
        .map(|&q| p * q.abs().powf(p - 1.0))
        .collect();
    let grid = ground.grid();
    let n = grid.len();
    let matrix = if n <= DENSE_LIMIT {
        let mut kernel = circulant_kernel(grid, |xi| Complex::new(xi.abs(), 0.0));
        // even symbol: force exact evenness of the kernel
        for m in 1..n / 2 {
            let avg = 0.5 * (kernel[m] + kernel[n - m]);
            kernel[m] = avg;
            kernel[n - m] = avg;
        }
        let mut mat = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            for l in 0..n {
                mat[[j, l]] = kernel[(j + n - l) % n];
            }
            mat[[j, j]] += 1.0 - potential[j];
        }
        Some(mat)
    } else {
        None
    };
    LinearizedOperator { ground: ground.clone(), potential, matrix }
}

/// Fraction of the L2 mass of `v` inside |y| <= half_length/4.
pub fn localization_score(f: &RealField) -> f64 {
    let quarter = f.grid().half_length() / 4.0;
    let (mut inside, mut total) = (0.0, 0.0);
    for (&v, &y) in f.samples().iter().zip(f.grid().points()) {
        let e = v * v;
        total += e;
        if y.abs() <= quarter {
            inside += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

fn column_to_field(grid: &Arc<Grid1D>, col: ndarray::ArrayView1<f64>) -> RealField {
    RealField::from_samples(grid, col.to_vec()).expect("eigenvector samples finite")
}

/// Turn a complex eigenvector into a real field if it is real up to a global
/// phase; `None` for genuinely complex vectors.
fn realize_column(grid: &Arc<Grid1D>, col: ndarray::ArrayView1<Complex<f64>>) -> Option<RealField> {
    let (mut peak, mut peak_idx) = (0.0f64, 0usize);
    for (j, c) in col.iter().enumerate() {
        if c.norm() > peak {
            peak = c.norm();
            peak_idx = j;
        }
    }
    if peak == 0.0 {
        return None;
    }
    let phase = col[peak_idx].conj() / peak;
    let mut out = Vec::with_capacity(col.len());
    let mut imag = 0.0f64;
    for c in col.iter() {
        let w = c * phase;
        imag = imag.max(w.im.abs());
        out.push(w.re);
    }
    if imag > 1e-6 * peak {
        return None;
    }
    RealField::from_samples(grid, out).ok()
}

/// Full symmetric eigendecomposition of L (ascending eigenvalues).
pub struct SymmetricModes {
    grid: Arc<Grid1D>,
    eigenvalues: Vec<f64>,
    vectors: Array2<f64>,
}

impl SymmetricModes {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector i as a unit-L2 field.
    pub fn vector(&self, i: usize) -> RealField {
        let mut f = column_to_field(&self.grid, self.vectors.column(i));
        let norm = l2_norm(&f);
        if norm > 0.0 {
            f.scale(1.0 / norm);
        }
        f
    }

    /// Indices of eigenvalues inside `window`.
    pub fn in_window(&self, window: (f64, f64)) -> Vec<usize> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > window.0 && v < window.1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Smallest eigenvalue whose eigenvector is delocalized: the grid's
    /// realization of the essential-spectrum floor. Localized discrete modes
    /// (negative direction, kernel, internal modes) are excluded.
    pub fn essential_floor(&self) -> Option<f64> {
        for i in 0..self.eigenvalues.len() {
            if localization_score(&self.vector(i)) < LOCALIZATION_THRESHOLD {
                return Some(self.eigenvalues[i]);
            }
        }
        None
    }
}

pub fn symmetric_modes(lop: &LinearizedOperator) -> Result<SymmetricModes, LinopError> {
    let (vals, vecs) = lop
        .matrix()?
        .eigh(UPLO::Lower)
        .map_err(|e| LinopError::SpectrumAnomaly(format!("dense symmetric eigensolve: {e}")))?;
    Ok(SymmetricModes {
        grid: Arc::clone(lop.grid()),
        eigenvalues: vals.to_vec(),
        vectors: vecs,
    })
}

/// The unique negative eigenvalue -kappa and its even positive eigenfunction.
pub fn negative_eigenpair(lop: &LinearizedOperator) -> Result<(f64, RealField), LinopError> {
    let modes = symmetric_modes(lop)?;
    let negatives = modes
        .eigenvalues()
        .iter()
        .take(10)
        .filter(|&&v| v < -1e-6)
        .count();
    if negatives != 1 {
        return Err(LinopError::SpectrumAnomaly(format!(
            "{negatives} negative eigenvalues among the lowest 10"
        )));
    }
    let kappa = -modes.eigenvalues()[0];
    let mut chi0 = modes.vector(0);
    // sign: positive peak
    let peak = chi0
        .samples()
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if peak < 0.0 {
        chi0.scale(-1.0);
    }
    let even_defect = {
        let r = chi0.reflected();
        let mut d = chi0.clone();
        d.add_scaled(-1.0, &r);
        l2_norm(&d)
    };
    if even_defect > 1e-6 {
        return Err(LinopError::SpectrumAnomaly(format!(
            "negative-direction eigenfunction not even (defect {even_defect:.3e})"
        )));
    }
    if chi0.samples().iter().any(|&v| v < -1e-6) {
        return Err(LinopError::SpectrumAnomaly(
            "negative-direction eigenfunction changes sign".into(),
        ));
    }
    Ok((kappa, chi0))
}

/// Edge eigenpairs of A = d_y L for supercritical p: the localized real
/// +/- e0 pair of largest magnitude.
pub struct EdgePairs {
    pub e0: f64,
    pub yplus: RealField,
    pub yminus: RealField,
}

pub fn edge_eigenpairs(lop: &LinearizedOperator) -> Result<EdgePairs, LinopError> {
    if lop.p() <= 3.0 {
        return Err(LinopError::NotSupercritical(lop.p()));
    }
    let a = lop.advection_matrix()?;
    let (vals, vecs) = a
        .eig()
        .map_err(|e| LinopError::SpectrumAnomaly(format!("dense eigensolve of d_y L: {e}")))?;
    let grid = lop.grid();
    let candidates = real_localized_candidates(grid, &vals, &vecs);
    let (e0, mut yplus, mut yminus) = select_edge_pair(&candidates).ok_or(LinopError::NoRealPair)?;

    for y in [&mut yplus, &mut yminus] {
        let norm = l2_norm(y);
        y.scale(1.0 / norm);
    }
    // sign conventions: positive peak for Y+, then reflection pairing for Y-
    let peak = yplus
        .samples()
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if peak < 0.0 {
        yplus.scale(-1.0);
    }
    let pairing = inner_product(&yminus.reflected(), &yplus)?;
    if pairing < 0.0 {
        yminus.scale(-1.0);
    }
    Ok(EdgePairs { e0, yplus, yminus })
}

type Candidate = (f64, RealField);

fn real_localized_candidates(
    grid: &Arc<Grid1D>,
    vals: &Array1<Complex<f64>>,
    vecs: &Array2<Complex<f64>>,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (i, lam) in vals.iter().enumerate() {
        if lam.im.abs() > 1e-8 * (1.0 + lam.re.abs()) {
            continue;
        }
        let Some(v) = realize_column(grid, vecs.column(i)) else {
            continue;
        };
        if localization_score(&v) < LOCALIZATION_THRESHOLD {
            continue;
        }
        out.push((lam.re, v));
    }
    out
}

fn select_edge_pair(candidates: &[Candidate]) -> Option<(f64, RealField, RealField)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, (lp, _)) in candidates.iter().enumerate() {
        if *lp <= 1e-6 {
            continue;
        }
        for (j, (lm, _)) in candidates.iter().enumerate() {
            if *lm >= -1e-6 {
                continue;
            }
            if (lp + lm).abs() <= 1e-6 * lp.abs() + 1e-9 {
                let mag = lp.abs();
                if best.map(|(m, _, _)| mag > m).unwrap_or(true) {
                    best = Some((mag, i, j));
                }
            }
        }
    }
    best.map(|(_, i, j)| {
        (
            0.5 * (candidates[i].0 - candidates[j].0),
            candidates[i].1.clone(),
            candidates[j].1.clone(),
        )
    })
}

/// Dual pairs Z+/-: eigenfunctions of the adjoint problem (equivalently of
/// L d_y), selected at the same +/- e0 and normalized so (Z^s, Y^s) = 1.
/// With that normalization the realized identity is L d_y Z^s = -s e0 Z^s.
pub struct DualPairs {
    pub zplus: RealField,
    pub zminus: RealField,
}

pub fn dual_eigenpairs(
    lop: &LinearizedOperator,
    e0: f64,
    yplus: &RealField,
    yminus: &RealField,
) -> Result<DualPairs, LinopError> {
    let a = lop.advection_matrix()?;
    let at = a.t().to_owned();
    let (vals, vecs) = at
        .eig()
        .map_err(|e| LinopError::SpectrumAnomaly(format!("dense adjoint eigensolve: {e}")))?;
    let grid = lop.grid();
    let candidates = real_localized_candidates(grid, &vals, &vecs);
    let pick = |target: f64| -> Option<RealField> {
        candidates
            .iter()
            .filter(|(lam, _)| (lam - target).abs() <= 1e-6 * target.abs() + 1e-9)
            .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
            .map(|(_, v)| v.clone())
    };
    let mut zplus = pick(e0).ok_or(LinopError::NoRealPair)?;
    let mut zminus = pick(-e0).ok_or(LinopError::NoRealPair)?;
    for (z, y) in [(&mut zplus, yplus), (&mut zminus, yminus)] {
        let s = inner_product(z, y)?;
        if s.abs() < 1e-10 * l2_norm(z) {
            return Err(LinopError::DegenerateNormalization(s));
        }
        z.scale(1.0 / s);
    }
    Ok(DualPairs { zplus, zminus })
}

/// Solve L f = g with both g and f orthogonal to the kernel direction Q',
/// by projected MINRES preconditioned with (|D|+1)^{-1}.
pub fn invert_on_complement(
    lop: &LinearizedOperator,
    g: &RealField,
) -> Result<RealField, LinopError> {
    let grid = lop.grid();
    let qd = derivative(lop.ground().field());
    let qd_norm = l2_norm(&qd);
    let mut qdir = qd;
    qdir.scale(1.0 / qd_norm);

    let gnorm = l2_norm(g);
    if gnorm == 0.0 {
        return Ok(RealField::zeros(grid));
    }
    let pairing = inner_product(g, &qdir)? / gnorm;
    if pairing.abs() > 1e-8 {
        return Err(LinopError::NotOrthogonal(pairing.abs()));
    }

    let project = |f: &mut RealField| {
        let c = inner_product(f, &qdir).expect("same grid");
        f.add_scaled(-c, &qdir);
    };
    let apply_a = |v: &RealField| -> Result<RealField, LinopError> {
        let mut w = v.clone();
        project(&mut w);
        let mut out = lop.apply(&w)?;
        project(&mut out);
        Ok(out)
    };
    let apply_m = |v: &RealField| -> Result<RealField, LinopError> {
        let mut w = v.clone();
        project(&mut w);
        let mut out = apply_multiplier(&w, |xi| Complex::new(1.0 / (1.0 + xi.abs()), 0.0))?;
        project(&mut out);
        Ok(out)
    };

    let mut b = g.clone();
    project(&mut b);

    // Preconditioned MINRES (Paige-Saunders) on the projected system.
    let max_iterations = 400;
    let mut x = RealField::zeros(grid);
    let mut r1 = b.clone();
    let mut y = apply_m(&r1)?;
    let beta1 = inner_product(&r1, &y)?.max(0.0).sqrt();
    if beta1 == 0.0 {
        return Ok(x);
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = RealField::zeros(grid);
    let mut w2 = RealField::zeros(grid);
    let mut iterations = 0;
    for it in 1..=max_iterations {
        iterations = it;
        let mut v = y.clone();
        v.scale(1.0 / beta);
        let mut ynew = apply_a(&v)?;
        if it >= 2 {
            ynew.add_scaled(-beta / oldb, &r1);
        }
        let alfa = inner_product(&v, &ynew)?;
        ynew.add_scaled(-alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, ynew);
        y = apply_m(&r2)?;
        oldb = beta;
        beta = inner_product(&r2, &y)?.max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        let mut wn = v;
        wn.add_scaled(-oldeps, &w1);
        wn.add_scaled(-delta, &w2);
        wn.scale(1.0 / gamma);
        x.add_scaled(phi, &wn);
        w = wn;

        if phibar <= 1e-13 * beta1 {
            break;
        }
    }
    project(&mut x);
    let mut residual = lop.apply(&x)?;
    residual.add_scaled(-1.0, g);
    project(&mut residual);
    let rel = l2_norm(&residual) / gnorm;
    if rel > 1e-8 {
        return Err(LinopError::SolveFailure { residual: rel, iterations });
    }
    Ok(x)
}

/// First interaction profile: solves L A0 = p kappa0 sigma_j Q^{p-1}.
pub fn solve_a0(gs: &GroundState, sigma_j: f64) -> Result<RealField, LinopError> {
    let lop = build_operator(gs);
    let p = gs.p();
    let rhs = gs
        .field()
        .map(|q| p * gs.kappa0() * sigma_j * q.abs().powf(p - 1.0));
    invert_on_complement(&lop, &rhs)
}

/// Second interaction profile B0, built by the cumulative-integral route:
/// (L B0)' = g with g = -[a_ij sigma_i Lambda Q + 2 p kappa0 sigma_j (y Q^{p-1})'],
/// resolved as B0 = f0 - G, G(y) = int_y^L g, L f0 = -H g - p Q^{p-1} G.
/// The left plateau value -a_ij sigma_i (p-2)/(p-1) int Q emerges from the
/// nonzero mean of g; the right plateau is 0 by construction.
pub fn solve_b0(
    gs: &GroundState,
    a_ij: f64,
    sigma_i: f64,
    sigma_j: f64,
) -> Result<RealField, LinopError> {
    let lop = build_operator(gs);
    let p = gs.p();
    let grid = gs.grid();

    let lam = scaling_generator(gs.field(), p);
    let yqp = gs.field().map_with_y(|y, q| y * q.abs().powf(p - 1.0));
    let dyqp = derivative(&yqp);
    let mut g = RealField::zeros(grid);
    g.add_scaled(-a_ij * sigma_i, &lam);
    g.add_scaled(-2.0 * p * gs.kappa0() * sigma_j, &dyqp);

    let compat = inner_product(&g, gs.field())? / (l2_norm(&g) * l2_norm(gs.field()));
    if compat.abs() > 1e-6 {
        return Err(LinopError::CompatibilityFailure(compat));
    }

    // G(y) = int_y^{+L} g, trapezoid accumulated from the right boundary.
    let h = grid.spacing();
    let gs_samples = g.samples();
    let n = grid.len();
    let mut big_g = vec![0.0f64; n];
    for j in (0..n - 1).rev() {
        big_g[j] = big_g[j + 1] + 0.5 * h * (gs_samples[j] + gs_samples[j + 1]);
    }
    let big_g = RealField::from_samples(grid, big_g)?;

    let hg = hilbert_transform(&g);
    let mut rhs = RealField::zeros(grid);
    rhs.add_scaled(-1.0, &hg);
    for ((r, &q), &gg) in rhs
        .samples_mut()
        .iter_mut()
        .zip(gs.field().samples())
        .zip(big_g.samples())
    {
        *r -= p * q.abs().powf(p - 1.0) * gg;
    }

    // In the continuum (rhs, Q') = 0; discretely G, whose norm grows like
    // plateau * sqrt(L), amplifies the small kernel residual of Q' into a
    // kernel-direction component that must be projected out before the solve.
    let qd = derivative(gs.field());
    let qd_norm = l2_norm(&qd);
    let mut qdir = qd;
    qdir.scale(1.0 / qd_norm);
    let c = inner_product(&rhs, &qdir)?;
    rhs.add_scaled(-c, &qdir);

    let f0 = invert_on_complement(&lop, &rhs)?;
    let mut b0 = f0;
    b0.add_scaled(-1.0, &big_g);

    // kernel-direction cleanup
    let c = inner_product(&b0, &qdir)?;
    b0.add_scaled(-c, &qdir);
    Ok(b0)
}

/// Mean of `f` over the plateau window [0.6 L, 0.9 L] on the given side.
pub fn plateau_mean(f: &RealField, left: bool) -> f64 {
    let l = f.grid().half_length();
    let (mut sum, mut count) = (0.0, 0usize);
    for (&v, &y) in f.samples().iter().zip(f.grid().points()) {
        let t = if left { -y } else { y };
        if t >= 0.6 * l && t <= 0.9 * l {
            sum += v;
            count += 1;
        }
    }
    sum / count as f64
}

/// Aggregate spectral data for reporting.
pub struct SpectralData {
    pub kappa: f64,
    pub chi0: RealField,
    pub edge: Option<(EdgePairs, DualPairs)>,
}

pub fn spectral_data(lop: &LinearizedOperator) -> Result<SpectralData, LinopError> {
    let (kappa, chi0) = negative_eigenpair(lop)?;
    let edge = if lop.p() > 3.0 {
        let pairs = edge_eigenpairs(lop)?;
        let duals = dual_eigenpairs(lop, pairs.e0, &pairs.yplus, &pairs.yminus)?;
        Some((pairs, duals))
    } else {
        None
    };
    Ok(SpectralData { kappa, chi0, edge })
}
