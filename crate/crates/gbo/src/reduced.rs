//! Reduced parameter dynamics: the singular pairwise ODE system for soliton
//! positions and velocity offsets, adaptive integration in either time
//! direction, the square-root-in-time seeding and fitting helpers, and the
//! explicit 2x2 propagators of the linearized shooting analysis.

use crate::constants::InteractionConstants;
use ndarray::{Array1, Array2};
use ndarray_linalg::{solve::Solve, Inverse};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReducedError {
    #[error("gap {gap:.6e} below collision floor {floor:.6e}")]
    CollisionImminent { gap: f64, floor: f64 },
    #[error("adaptive step underflow at t = {t:.6e} (dt = {dt:.3e})")]
    StepFloor { t: f64, dt: f64 },
    #[error("seed time too early: min gap {gap:.3e} below {floor:.3e}")]
    TooEarly { gap: f64, floor: f64 },
    #[error("trajectory spans {decades:.2} decades, need at least 2")]
    InsufficientSpan { decades: f64 },
    #[error("invalid state: {0}")]
    BadState(String),
}

/// Positions and velocity offsets of the soliton train at one time.
#[derive(Clone, Debug)]
pub struct ParamState {
    pub t: f64,
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ParamState {
    pub fn min_gap(&self) -> f64 {
        self.x
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Snapshot record of an adaptive integration run.
pub struct TrajectoryLog {
    states: Vec<ParamState>,
    stats: StepStats,
}

impl TrajectoryLog {
    /// Wrap externally produced snapshots; times must be strictly monotone.
    pub fn from_states(states: Vec<ParamState>) -> Result<Self, ReducedError> {
        if states.len() < 2 {
            return Err(ReducedError::BadState("need at least two snapshots".into()));
        }
        let increasing = states[1].t > states[0].t;
        for w in states.windows(2) {
            let ok = if increasing { w[1].t > w[0].t } else { w[1].t < w[0].t };
            if !ok {
                return Err(ReducedError::BadState("times not strictly monotone".into()));
            }
        }
        Ok(Self { states, stats: StepStats::default() })
    }

    pub fn states(&self) -> &[ParamState] {
        &self.states
    }
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }
    pub fn stats(&self) -> StepStats {
        self.stats
    }
    pub fn first(&self) -> &ParamState {
        &self.states[0]
    }
    pub fn last(&self) -> &ParamState {
        self.states.last().unwrap()
    }
}

/// Right-hand side of the reduced system: dx = mu,
/// dmu_i = -sum_{j != i} a_ij / (x_i - x_j)^3.
pub fn ode_rhs(
    s: &ParamState,
    c: &InteractionConstants,
    gap_floor: f64,
) -> Result<(Vec<f64>, Vec<f64>), ReducedError> {
    let n = s.x.len();
    if n != c.len() || s.mu.len() != n {
        return Err(ReducedError::BadState(format!(
            "state size {n} does not match {} couplings",
            c.len()
        )));
    }
    for w in s.x.windows(2) {
        let gap = w[0] - w[1];
        if !(gap > 0.0) {
            return Err(ReducedError::BadState("positions not strictly decreasing".into()));
        }
        if gap < gap_floor {
            return Err(ReducedError::CollisionImminent { gap, floor: gap_floor });
        }
    }
    let a = c.coupling_matrix();
    let dmu = (0..n)
        .map(|i| {
            let mut f = 0.0;
            for j in 0..n {
                if j != i {
                    let d = s.x[i] - s.x[j];
                    f -= a[[i, j]] / (d * d * d);
                }
            }
            f
        })
        .collect();
    Ok((s.mu.clone(), dmu))
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 2_000_000;

fn eval_rhs(
    t: f64,
    y: &[f64],
    c: &InteractionConstants,
    floor: f64,
) -> Result<Vec<f64>, ReducedError> {
    let n = y.len() / 2;
    let s = ParamState { t, x: y[..n].to_vec(), mu: y[n..].to_vec() };
    let (dx, dmu) = ode_rhs(&s, c, floor)?;
    Ok(dx.into_iter().chain(dmu).collect())
}

/// Adaptive Dormand-Prince integration with a PI step controller; supports
/// backward runs (t_end < t0). The collision floor is 1e-3 of the initial
/// minimum gap.
pub fn integrate(
    s0: &ParamState,
    c: &InteractionConstants,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<TrajectoryLog, ReducedError> {
    if !(s0.t > 0.0) {
        return Err(ReducedError::BadState("start time must be positive".into()));
    }
    if t_end == s0.t {
        return Err(ReducedError::BadState("t_end equals start time".into()));
    }
    let floor = 1e-3 * s0.min_gap();
    let n = s0.x.len();
    let dir = (t_end - s0.t).signum();

    let mut t = s0.t;
    let mut y: Vec<f64> = s0.x.iter().chain(&s0.mu).cloned().collect();
    let mut k1 = eval_rhs(t, &y, c, floor)?;
    let mut dt = dir * (1e-6 * (t_end - s0.t).abs()).max(1e-8);
    let mut err_prev: f64 = 1e-4;
    let mut stats = StepStats::default();
    let mut states = vec![s0.clone()];

    for _ in 0..MAX_STEPS {
        if (t_end - t) * dir <= 0.0 {
            break;
        }
        if dt.abs() > (t_end - t).abs() {
            dt = t_end - t;
        }
        if dt.abs() < 1e-12 * t.abs().max(1.0) {
            return Err(ReducedError::StepFloor { t, dt });
        }

        const C: [f64; 5] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];
        let mut k = vec![k1.clone()];
        let mut failed = false;
        for stage in 0..5 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    for (v, &d) in ys.iter_mut().zip(kj) {
                        *v += dt * a * d;
                    }
                }
            }
            match eval_rhs(t + C[stage] * dt, &ys, c, floor) {
                Ok(ki) => k.push(ki),
                Err(ReducedError::CollisionImminent { .. }) | Err(ReducedError::BadState(_))
                    if stats.accepted + stats.rejected > 0 =>
                {
                    // stage state overshot; retry with a smaller step
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            dt *= 0.25;
            stats.rejected += 1;
            continue;
        }

        // 5th-order solution is stage row 6 (FSAL)
        let y_new: Vec<f64> = {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                let a = A[5][j];
                if a != 0.0 {
                    for (v, &d) in ys.iter_mut().zip(kj) {
                        *v += dt * a * d;
                    }
                }
            }
            ys
        };
        let k7 = match eval_rhs(t + dt, &y_new, c, floor) {
            Ok(v) => v,
            Err(ReducedError::CollisionImminent { .. }) => {
                dt *= 0.25;
                stats.rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        k.push(k7);

        let mut err_sq = 0.0;
        for i in 0..y.len() {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += ERR[j] * kj[i];
            }
            e *= dt;
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / y.len() as f64).sqrt().max(1e-16);

        if err <= 1.0 {
            t += dt;
            y = y_new;
            k1 = k.pop().unwrap();
            stats.accepted += 1;
            states.push(ParamState { t, x: y[..n].to_vec(), mu: y[n..].to_vec() });
            let fac = (0.9 * err.powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
            dt *= fac;
        } else {
            stats.rejected += 1;
            dt *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }

    if (t_end - t) * dir > 0.0 {
        return Err(ReducedError::StepFloor { t, dt });
    }
    Ok(TrajectoryLog { states, stats })
}

/// Minimum admissible seed gap; the reduced system models well-separated
/// trains only.
pub const SEED_GAP_FLOOR: f64 = 1.0;

/// Seed state on the square-root trajectory: x_i = alpha_i sqrt(t),
/// mu_i = alpha_i / (2 sqrt(t)).
pub fn asymptotic_seed(alpha: &[f64], t_in: f64) -> Result<ParamState, ReducedError> {
    if !(t_in > 0.0) {
        return Err(ReducedError::BadState("seed time must be positive".into()));
    }
    let s = t_in.sqrt();
    let x: Vec<f64> = alpha.iter().map(|&a| a * s).collect();
    let mu: Vec<f64> = alpha.iter().map(|&a| a / (2.0 * s)).collect();
    let state = ParamState { t: t_in, x, mu };
    let gap = state.min_gap();
    if gap < SEED_GAP_FLOOR {
        return Err(ReducedError::TooEarly { gap, floor: SEED_GAP_FLOOR });
    }
    Ok(state)
}

/// Per-component least-squares fit of x(t) against sqrt(t), log(t), 1.
pub struct AsymptoticFit {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// standard error of each alpha estimate
    pub alpha_sigma: Vec<f64>,
    /// root-mean-square position residual over all components
    pub rms_residual: f64,
}

/// Fit the whole log; requires at least two decades of time span.
pub fn asymptotic_fit(log: &TrajectoryLog) -> Result<AsymptoticFit, ReducedError> {
    asymptotic_fit_from(log, 0.0)
}

/// Fit restricted to samples with t >= t_min.
pub fn asymptotic_fit_from(log: &TrajectoryLog, t_min: f64) -> Result<AsymptoticFit, ReducedError> {
    let samples: Vec<&ParamState> =
        log.states().iter().filter(|s| s.t >= t_min).collect();
    if samples.len() < 4 {
        return Err(ReducedError::InsufficientSpan { decades: 0.0 });
    }
    let (tmin, tmax) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.t), hi.max(s.t)));
    let decades = (tmax / tmin).log10();
    if decades < 2.0 {
        return Err(ReducedError::InsufficientSpan { decades });
    }

    let m = samples.len();
    let n = samples[0].x.len();
    let design = Array2::from_shape_fn((m, 3), |(r, c)| match c {
        0 => samples[r].t.sqrt(),
        1 => samples[r].t.ln(),
        _ => 1.0,
    });
    let gram = design.t().dot(&design);
    let gram_inv = gram
        .inv()
        .map_err(|e| ReducedError::BadState(format!("singular fit system: {e}")))?;

    let mut fit = AsymptoticFit {
        alpha: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
        alpha_sigma: Vec::with_capacity(n),
        rms_residual: 0.0,
    };
    let mut rss_total = 0.0;
    for i in 0..n {
        let b = Array1::from_shape_fn(m, |r| samples[r].x[i]);
        let rhs = design.t().dot(&b);
        let coef = gram
            .solve(&rhs)
            .map_err(|e| ReducedError::BadState(format!("singular fit system: {e}")))?;
        let resid = &design.dot(&coef) - &b;
        let rss: f64 = resid.iter().map(|v| v * v).sum();
        rss_total += rss;
        let dof = (m.saturating_sub(3)).max(1) as f64;
        fit.alpha.push(coef[0]);
        fit.beta.push(coef[1]);
        fit.gamma.push(coef[2]);
        fit.alpha_sigma.push((rss / dof * gram_inv[[0, 0]]).sqrt());
    }
    fit.rms_residual = (rss_total / (m * n) as f64).sqrt();
    Ok(fit)
}

/// Closed-form 2x2 propagator for the generator [[0, -t], [lambda/t, 0]],
/// whose square is -lambda times the identity.
pub fn propagator(lambda: f64, t: f64) -> [[f64; 2]; 2] {
    if lambda > 0.0 {
        let r = lambda.sqrt();
        [
            [r.cos(), -t * r.sin() / r],
            [r * r.sin() / t, r.cos()],
        ]
    } else if lambda < 0.0 {
        let r = (-lambda).sqrt();
        [
            [r.cosh(), -t * r.sinh() / r],
            [-r * r.sinh() / t, r.cosh()],
        ]
    } else {
        [[1.0, -t], [0.0, 1.0]]
    }
}
