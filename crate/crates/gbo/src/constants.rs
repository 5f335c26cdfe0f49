//! Interaction constants and asymptotic velocities: the pairwise coupling
//! matrix built from ground-state integrals, the sign pattern of the soliton
//! train, the algebraic system fixing the velocity coefficients alpha_i, and
//! the mode matrix whose 3/4-eigenvector property certifies the solution.

use crate::ground::GroundState;
use ndarray::{Array1, Array2};
use ndarray_linalg::{eigh::Eigh, solve::Solve, UPLO};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("critical exponent p = 3 excluded: coupling formula is singular there")]
    CriticalExponent,
    #[error("exponent out of range: need p in (2,3) or (3,inf), got {0}")]
    OutOfRange(f64),
    #[error("need at least two solitons, got {0}")]
    BadCount(usize),
    #[error("velocity solve failed: {0}")]
    NoCriticalPoint(String),
}

/// Sign of each soliton in the train: alternating below the critical
/// exponent, all positive above it.
pub fn sign_pattern(p: f64, n: usize) -> Result<Vec<f64>, ConstantsError> {
    if n < 2 {
        return Err(ConstantsError::BadCount(n));
    }
    if p == 3.0 {
        return Err(ConstantsError::CriticalExponent);
    }
    if !(p > 2.0) || !p.is_finite() {
        return Err(ConstantsError::OutOfRange(p));
    }
    Ok((0..n)
        .map(|i| if p > 3.0 || i % 2 == 0 { 1.0 } else { -1.0 })
        .collect())
}

/// Pairwise interaction couplings a_ij together with the ground-state
/// integrals they are built from.
pub struct InteractionConstants {
    p: f64,
    signs: Vec<f64>,
    a: Array2<f64>,
    kappa0: f64,
    int_qp: f64,
    mass: f64,
}

impl InteractionConstants {
    /// Build the coupling matrix from a shared scalar: a_ij = sigma_i sigma_j
    /// times `coupling` off the diagonal. This is exactly the structure the
    /// integral formula produces, so tests can inject synthetic couplings.
    pub fn from_coupling(p: f64, n: usize, coupling: f64) -> Result<Self, ConstantsError> {
        let signs = sign_pattern(p, n)?;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    a[[i, j]] = signs[i] * signs[j] * coupling;
                }
            }
        }
        Ok(Self { p, signs, a, kappa0: f64::NAN, int_qp: f64::NAN, mass: f64::NAN })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn len(&self) -> usize {
        self.signs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
    pub fn coupling_matrix(&self) -> &Array2<f64> {
        &self.a
    }
    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }
    pub fn int_qp(&self) -> f64 {
        self.int_qp
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// Couplings from a converged ground state:
/// a_ij = 4 sigma_i sigma_j kappa0 (p-1) int Q^p / ((p-3) int Q^2).
pub fn compute_a(gs: &GroundState, n: usize) -> Result<InteractionConstants, ConstantsError> {
    let p = gs.p();
    let coupling = 4.0 * gs.kappa0() * (p - 1.0) * gs.int_qp() / ((p - 3.0) * gs.mass());
    let mut c = InteractionConstants::from_coupling(p, n, coupling)?;
    c.kappa0 = gs.kappa0();
    c.int_qp = gs.int_qp();
    c.mass = gs.mass();
    Ok(c)
}

/// Velocity coefficients solving alpha_i / 4 = sum_j a_ij / (alpha_i - alpha_j)^3,
/// strictly decreasing and antisymmetric under i -> n+1-i by construction.
pub struct AlphaSolution {
    alpha: Vec<f64>,
    residual: f64,
}

impl AlphaSolution {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Map from the half-gap parameters theta in R^k (all positive) to the full
/// velocity vector: alpha_i = theta_i + ... + theta_k for i <= k, a zero
/// middle entry for odd n, and mirrored negatives on the other half.
pub(crate) fn theta_map(n: usize) -> Array2<f64> {
    let k = n / 2;
    let mut t = Array2::zeros((n, k));
    for i in 0..k {
        for l in i..k {
            t[[i, l]] = 1.0;
            t[[n - 1 - i, l]] = -1.0;
        }
    }
    t
}

fn alphas_from_theta(n: usize, theta: &[f64]) -> Vec<f64> {
    let k = n / 2;
    let mut alpha = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..k).rev() {
        acc += theta[i];
        alpha[i] = acc;
        alpha[n - 1 - i] = -acc;
    }
    alpha
}

fn objective(a: &Array2<f64>, alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = alpha[i] - alpha[j];
                s -= a[[i, j]] / (d * d);
            }
        }
        s -= 0.5 * alpha[i] * alpha[i];
    }
    s
}

/// Gradient of the objective in the full alpha variables.
fn alpha_gradient(a: &Array2<f64>, alpha: &[f64]) -> Array1<f64> {
    let n = alpha.len();
    Array1::from_shape_fn(n, |i| {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                let d = alpha[i] - alpha[j];
                s += a[[i, j]] / (d * d * d);
            }
        }
        4.0 * s - alpha[i]
    })
}

/// Hessian of the objective in alpha variables: -(I + 4 M(alpha)).
fn alpha_hessian(a: &Array2<f64>, alpha: &[f64]) -> Array2<f64> {
    let m = mode_matrix(a, alpha);
    let n = alpha.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let id = if i == j { 1.0 } else { 0.0 };
        -id - 4.0 * m[[i, j]]
    })
}

fn mode_matrix(a: &Array2<f64>, alpha: &[f64]) -> Array2<f64> {
    let n = alpha.len();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                let d = alpha[i] - alpha[j];
                let v = -3.0 * a[[i, j]] / (d * d * d * d);
                m[[i, j]] = v;
                diag -= v;
            }
        }
        m[[i, i]] = diag;
    }
    m
}

/// Max-norm residual of the velocity system at the given configuration.
pub fn velocity_residual(c: &InteractionConstants, alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                let d = alpha[i] - alpha[j];
                s += c.a[[i, j]] / (d * d * d);
            }
        }
        worst = worst.max((0.25 * alpha[i] - s).abs());
    }
    worst
}

const ASCENT_CAP: usize = 500;
const NEWTON_CAP: usize = 60;
const RESIDUAL_TOL: f64 = 1e-10;

/// Solve the velocity system by maximizing the interaction objective over the
/// positive gap cone, then polishing with Newton on the stationarity system.
pub fn solve_alpha(c: &InteractionConstants) -> Result<AlphaSolution, ConstantsError> {
    let n = c.len();
    let k = n / 2;
    let t = theta_map(n);
    let a = &c.a;

    let amax = a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if amax == 0.0 {
        return Err(ConstantsError::NoCriticalPoint("zero coupling matrix".into()));
    }
    let mut theta = vec![(4.0 * amax).powf(0.25); k];

    // Stage 1: gradient ascent with positivity-respecting backtracking.
    let mut step = 0.1;
    for _ in 0..ASCENT_CAP {
        let alpha = alphas_from_theta(n, &theta);
        let g = t.t().dot(&alpha_gradient(a, &alpha));
        let gnorm = g.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if gnorm <= 1e-3 * (1.0 + amax) {
            break;
        }
        let f0 = objective(a, &alpha);
        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(&th, &gi)| th + s * gi).collect();
            if trial.iter().all(|&v| v > 0.0) {
                let ft = objective(a, &alphas_from_theta(n, &trial));
                if ft > f0 {
                    theta = trial;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (s * 1.5).min(1.0);
    }

    // Stage 2: Newton on the stationarity system in theta.
    for _ in 0..NEWTON_CAP {
        let alpha = alphas_from_theta(n, &theta);
        let g = t.t().dot(&alpha_gradient(a, &alpha));
        let gnorm = g.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if gnorm <= 1e-14 * (1.0 + amax) {
            break;
        }
        let h = t.t().dot(&alpha_hessian(a, &alpha)).dot(&t);
        let rhs = g.mapv(|v| -v);
        let delta = h
            .solve(&rhs)
            .map_err(|e| ConstantsError::NoCriticalPoint(format!("Newton system: {e}")))?;
        let mut s = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> =
                theta.iter().zip(&delta).map(|(&th, &d)| th + s * d).collect();
            if trial.iter().all(|&v| v > 0.0) {
                let gt = t.t().dot(&alpha_gradient(a, &alphas_from_theta(n, &trial)));
                let gtn = gt.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
                if gtn < gnorm {
                    theta = trial;
                    moved = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let alpha = alphas_from_theta(n, &theta);
    for w in alpha.windows(2) {
        if !(w[0] > w[1]) {
            return Err(ConstantsError::NoCriticalPoint(format!(
                "velocities not strictly decreasing: {alpha:?}"
            )));
        }
    }
    let residual = velocity_residual(c, &alpha);
    if residual > RESIDUAL_TOL {
        return Err(ConstantsError::NoCriticalPoint(format!(
            "stationarity residual {residual:.3e} above {RESIDUAL_TOL:.0e}"
        )));
    }
    Ok(AlphaSolution { alpha, residual })
}

/// Mode matrix of the velocity system with its eigendecomposition and the
/// defect of the 3/4-eigenvector identity.
pub struct InteractionMatrix {
    m: Array2<f64>,
    eigenvalues: Vec<f64>,
    alpha_eig_residual: f64,
}

impl InteractionMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn alpha_eig_residual(&self) -> f64 {
        self.alpha_eig_residual
    }
}

/// m_ij = -3 a_ij / (alpha_i - alpha_j)^4 off the diagonal, diagonal chosen so
/// every row sums to zero exactly; the solved velocity vector is then an
/// eigenvector with eigenvalue 3/4.
pub fn build_m(
    c: &InteractionConstants,
    sol: &AlphaSolution,
) -> Result<InteractionMatrix, ConstantsError> {
    let alpha = sol.alpha();
    let m = mode_matrix(&c.a, alpha);
    let (eigs, _) = m
        .eigh(UPLO::Lower)
        .map_err(|e| ConstantsError::NoCriticalPoint(format!("mode matrix eigensolve: {e}")))?;
    let av = Array1::from_vec(alpha.to_vec());
    let defect = &m.dot(&av) - &av.mapv(|v| 0.75 * v);
    let alpha_eig_residual = defect.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(InteractionMatrix { m, eigenvalues: eigs.to_vec(), alpha_eig_residual })
}
