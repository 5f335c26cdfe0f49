//! Pseudo-spectral time integration of the full equation, in the lab frame
//!
//! ```text
//!     u_t = d/dy ( |D|u - |u|^{p-1}u )
//! ```
//!
//! or in the frame moving right at unit speed, where the linear symbol picks
//! up the extra transport term and solitary waves of speed one sit still.
//!
//! The integrator is an integrating-factor RK4: the stiff dispersive part is
//! applied exactly through its diagonal Fourier propagator and classical RK4
//! handles the remaining nonlinear flux. The linear substep is a pure phase,
//! so it neither dissipates nor amplifies any mode, and the stability limit
//! comes from the nonlinear advection alone.

use crate::fourier::{
    self, forward_transform, FourierError, Grid1D, RealField,
};
use crate::ground::{self, GroundError, GroundState};
use crate::linop::{self, LinopError};
use rustfft::num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

/// Errors from configuration, stepping, and tracking.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    BadConfig(String),
    #[error("time step {dt:.3e} exceeds the advective stability budget {max:.3e}")]
    UnstableStep { dt: f64, max: f64 },
    #[error("amplitude {sup:.3e} at t={t:.6} crossed the blow-up trap {cap:.3e}")]
    BlowupDetected { t: f64, sup: f64, cap: f64 },
    #[error("solitons {i} and {j} overlap: gap {gap:.3e} below {min:.3e}")]
    Overlap { i: usize, j: usize, gap: f64, min: f64 },
    #[error("expected {expected} solitons, found {found}")]
    DetectionMiscount { expected: usize, found: usize },
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Linop(#[from] LinopError),
}

/// Reference frame for the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Original variables; a speed-c solitary wave travels at speed c.
    Lab,
    /// Moving at unit speed; the speed-one wave is a steady state.
    Comoving,
}

/// Validated integration setup.
///
/// `amp_hint` is the caller's estimate of the largest amplitude the run will
/// reach. It enters twice: the constructor enforces the advective stability
/// budget `dt <= 2.8 / (p amp^{p-1} xi_max)` (RK4 imaginary-axis limit against
/// the frozen-coefficient transport speed `p |u|^{p-1}`), and the stepper
/// traps amplitudes above `1000 amp_hint` as blow-up.
#[derive(Debug, Clone)]
pub struct SimConfig {
    grid: Arc<Grid1D>,
    p: f64,
    frame: Frame,
    dt: f64,
    amp_hint: f64,
    dealias: bool,
}

impl SimConfig {
    pub fn new(
        grid: &Arc<Grid1D>,
        p: f64,
        frame: Frame,
        dt: f64,
        amp_hint: f64,
    ) -> Result<Self, SimError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(SimError::BadConfig(format!("power p = {p} must exceed 1")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::BadConfig(format!("time step {dt} must be positive")));
        }
        if !(amp_hint > 0.0) || !amp_hint.is_finite() {
            return Err(SimError::BadConfig(format!(
                "amplitude hint {amp_hint} must be positive"
            )));
        }
        let cfg = SimConfig { grid: Arc::clone(grid), p, frame, dt, amp_hint, dealias: true };
        let max = cfg.stability_budget();
        if dt > max {
            return Err(SimError::UnstableStep { dt, max });
        }
        Ok(cfg)
    }

    /// Toggle the 2/3-rule dealiasing filter (on by default).
    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    /// Largest stable step for the declared amplitude.
    pub fn stability_budget(&self) -> f64 {
        let speed = self.p * self.amp_hint.powf(self.p - 1.0);
        2.8 / (speed * self.grid.nyquist())
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn amp_hint(&self) -> f64 {
        self.amp_hint
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }
}

/// Solution snapshot: time plus real samples.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: RealField,
}

/// Pointwise `|v|^{p-1} v` with fast paths for the powers the experiments
/// actually use; `powf` in the inner loop would dominate the FFTs.
#[derive(Debug, Clone, Copy)]
enum FluxPower {
    /// p - 1 a non-negative integer k: |v|^k v.
    Int(i32),
    /// 2(p - 1) an odd integer 2k+1: |v|^k sqrt(|v|) v.
    HalfInt(i32),
    General(f64),
}

impl FluxPower {
    fn for_exponent(p: f64) -> FluxPower {
        let pm1 = p - 1.0;
        let k = pm1.round();
        if (pm1 - k).abs() < 1e-12 {
            return FluxPower::Int(k as i32);
        }
        let k2 = (2.0 * pm1).round();
        if (2.0 * pm1 - k2).abs() < 1e-12 {
            return FluxPower::HalfInt(((k2 as i32) - 1) / 2);
        }
        FluxPower::General(pm1)
    }
}

/// Precomputed propagators and masks for repeated stepping.
///
/// The Nyquist bin is projected out unconditionally: its propagator phase has
/// no real representation, and any resolved field keeps that mode at roundoff.
pub struct Stepper {
    grid: Arc<Grid1D>,
    dt: f64,
    flux: FluxPower,
    /// exp(L dt/2) per mode, L = i xi (|xi| + shift).
    e_half: Vec<Complex<f64>>,
    e_full: Vec<Complex<f64>>,
    keep: Vec<bool>,
    cap: f64,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Stepper {
        let grid = Arc::clone(&cfg.grid);
        let nyq = grid.nyquist();
        let shift = match cfg.frame {
            Frame::Lab => 0.0,
            Frame::Comoving => 1.0,
        };
        let cut = 2.0 / 3.0 * nyq;
        let mut e_half = Vec::with_capacity(grid.len());
        let mut e_full = Vec::with_capacity(grid.len());
        let mut keep = Vec::with_capacity(grid.len());
        for &xi in grid.wavenumbers() {
            let theta = 0.5 * cfg.dt * xi * (xi.abs() + shift);
            e_half.push(Complex::from_polar(1.0, theta));
            e_full.push(Complex::from_polar(1.0, 2.0 * theta));
            keep.push(xi != -nyq && (!cfg.dealias || xi.abs() <= cut + 1e-12));
        }
        Stepper {
            grid,
            dt: cfg.dt,
            flux: FluxPower::for_exponent(cfg.p),
            e_half,
            e_full,
            keep,
            cap: 1e3 * cfg.amp_hint,
        }
    }

    /// Spectral nonlinear flux `-i xi FT(|v|^{p-1} v)` on a raw FFT buffer.
    fn nonlin(&self, vhat: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = self.grid.len();
        let mut buf: Vec<Complex<f64>> = vhat
            .iter()
            .zip(&self.keep)
            .map(|(&c, &k)| if k { c } else { Complex::new(0.0, 0.0) })
            .collect();
        self.grid.inverse_fft(&mut buf);
        let inv_n = 1.0 / n as f64;
        match self.flux {
            FluxPower::Int(k) => {
                for c in buf.iter_mut() {
                    let v = c.re * inv_n;
                    *c = Complex::new(v.abs().powi(k) * v, 0.0);
                }
            }
            FluxPower::HalfInt(k) => {
                for c in buf.iter_mut() {
                    let v = c.re * inv_n;
                    let a = v.abs();
                    *c = Complex::new(a.powi(k) * a.sqrt() * v, 0.0);
                }
            }
            FluxPower::General(pm1) => {
                for c in buf.iter_mut() {
                    let v = c.re * inv_n;
                    *c = Complex::new(v.abs().powf(pm1) * v, 0.0);
                }
            }
        }
        self.grid.forward_fft(&mut buf);
        for ((c, &xi), &k) in buf.iter_mut().zip(self.grid.wavenumbers()).zip(&self.keep) {
            *c = if k {
                Complex::new(xi * c.im, -xi * c.re)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        buf
    }

    /// One integrating-factor RK4 step.
    pub fn advance(&self, state: &SimState) -> Result<SimState, SimError> {
        let n = self.grid.len();
        let dt = self.dt;
        let mut a: Vec<Complex<f64>> =
            state.u.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.grid.forward_fft(&mut a);
        for (c, &k) in a.iter_mut().zip(&self.keep) {
            if !k {
                *c = Complex::new(0.0, 0.0);
            }
        }

        let k1 = self.nonlin(&a);
        let mut b: Vec<Complex<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            b.push(self.e_half[j] * (a[j] + 0.5 * dt * k1[j]));
        }
        let k2 = self.nonlin(&b);
        for j in 0..n {
            b[j] = self.e_half[j] * a[j] + 0.5 * dt * k2[j];
        }
        let k3 = self.nonlin(&b);
        for j in 0..n {
            b[j] = self.e_full[j] * a[j] + dt * self.e_half[j] * k3[j];
        }
        let k4 = self.nonlin(&b);

        for j in 0..n {
            b[j] = self.e_full[j] * (a[j] + dt / 6.0 * k1[j])
                + dt / 6.0 * (2.0 * self.e_half[j] * (k2[j] + k3[j]) + k4[j]);
        }
        self.grid.inverse_fft(&mut b);
        let inv_n = 1.0 / n as f64;
        let samples: Vec<f64> = b.iter().map(|c| c.re * inv_n).collect();

        let t_next = state.t + dt;
        let mut sup = 0.0f64;
        for &v in &samples {
            if !v.is_finite() {
                return Err(SimError::BlowupDetected { t: t_next, sup: f64::INFINITY, cap: self.cap });
            }
            sup = sup.max(v.abs());
        }
        if sup > self.cap {
            return Err(SimError::BlowupDetected { t: t_next, sup, cap: self.cap });
        }
        Ok(SimState {
            t: t_next,
            u: RealField::from_samples(&self.grid, samples)?,
        })
    }
}

/// One step of the scheme; long runs should hold a [`Stepper`] instead.
pub fn step(state: &SimState, cfg: &SimConfig) -> Result<SimState, SimError> {
    Stepper::new(cfg).advance(state)
}

/// Minimal spacing between soliton centers, in grid spacings.
const MIN_GAP_SPACINGS: f64 = 20.0;
/// Velocity-parameter bound for initial data.
const MU_CAP: f64 = 0.5;

/// Superpose rescaled, translated, signed copies of the ground state, with the
/// optional first-order pair correction `A0(y - x_i) / (x_i - x_j)^2`.
///
/// `positions`, `mus`, `signs` run over solitons; signs must be exactly `+-1`
/// and `|mu| <= 0.5`. Any pair closer than 20 grid spacings (periodically) is
/// rejected as an overlap.
pub fn make_multisoliton(
    gs: &GroundState,
    positions: &[f64],
    mus: &[f64],
    signs: &[f64],
    include_a0: bool,
) -> Result<RealField, SimError> {
    let n = positions.len();
    if n == 0 || mus.len() != n || signs.len() != n {
        return Err(SimError::BadConfig(format!(
            "need equal nonzero counts, got {}/{}/{} positions/mus/signs",
            n,
            mus.len(),
            signs.len()
        )));
    }
    for &s in signs {
        if s != 1.0 && s != -1.0 {
            return Err(SimError::BadConfig(format!("sign {s} must be exactly +-1")));
        }
    }
    for &m in mus {
        if !(m.abs() <= MU_CAP) {
            return Err(SimError::BadConfig(format!("|mu| = {} exceeds {MU_CAP}", m.abs())));
        }
    }
    let grid = gs.grid();
    let period = 2.0 * grid.half_length();
    let min = MIN_GAP_SPACINGS * grid.spacing();
    for i in 0..n {
        for j in i + 1..n {
            let d = (positions[i] - positions[j]).abs() % period;
            let gap = d.min(period - d);
            if gap < min {
                return Err(SimError::Overlap { i, j, gap, min });
            }
        }
    }

    let mut out = RealField::zeros(grid);
    for i in 0..n {
        let profile = ground::rescale(gs, 1.0 + mus[i])?;
        let placed = fourier::translate(&profile, positions[i])?;
        out.add_scaled(signs[i], &placed);
    }
    if include_a0 && n > 1 {
        // The pair profile is linear in the partner sign, so one solve serves
        // every ordered pair.
        let a0 = linop::solve_a0(gs, 1.0)?;
        for i in 0..n {
            let placed = fourier::translate(&a0, positions[i])?;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let gap = positions[i] - positions[j];
                out.add_scaled(signs[j] / (gap * gap), &placed);
            }
        }
    }
    Ok(out)
}

/// Discrete mass `1/2 int u^2` and energy `1/2 int ||D|^{1/2}u|^2 -
/// 1/(p+1) int |u|^{p+1}`, both conserved by the flow.
pub fn conserved_quantities(u: &RealField, p: f64) -> (f64, f64) {
    let h = u.grid().spacing();
    let mass = 0.5 * u.samples().iter().map(|v| v * v).sum::<f64>() * h;
    let kinetic = 0.5 * fourier::half_dispersion_energy(u);
    let potential =
        u.samples().iter().map(|v| v.abs().powf(p + 1.0)).sum::<f64>() * h / (p + 1.0);
    (mass, kinetic - potential)
}

/// One tracking readout. Entries with `valid = false` carry the prior
/// position and a NaN amplitude.
#[derive(Debug, Clone)]
pub struct TrackSample {
    pub positions: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Locate soliton centers as local extrema of `|u|`, refined to sub-grid
/// accuracy by a three-point parabola through the signed samples.
///
/// With `prior` positions the extrema are matched per soliton by nearest
/// periodic displacement, and the returned positions are unwrapped: they
/// continue past the domain seam instead of jumping by the period. A soliton
/// with no credible match keeps its prior position and is flagged invalid.
/// Without `prior`, the `n_expected` largest extrema are returned in
/// descending position order.
pub fn track_solitons(
    u: &RealField,
    n_expected: usize,
    prior: Option<&[f64]>,
) -> Result<TrackSample, SimError> {
    if n_expected == 0 {
        return Err(SimError::BadConfig("cannot track zero solitons".into()));
    }
    if let Some(ps) = prior {
        if ps.len() != n_expected {
            return Err(SimError::BadConfig(format!(
                "prior has {} entries for {} solitons",
                ps.len(),
                n_expected
            )));
        }
    }
    let grid = u.grid();
    let n = grid.len();
    let h = grid.spacing();
    let period = 2.0 * grid.half_length();
    let s = u.samples();
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Err(SimError::DetectionMiscount { expected: n_expected, found: 0 });
    }
    let floor = 0.2 * sup;

    // (position, signed amplitude) for every thresholded local max of |u|.
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for j in 0..n {
        let l = s[(j + n - 1) % n];
        let c = s[j];
        let r = s[(j + 1) % n];
        if !(c.abs() >= floor && c.abs() >= l.abs() && c.abs() > r.abs()) {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let delta = if denom.abs() > 1e-14 * sup { 0.5 * (l - r) / denom } else { 0.0 };
        let delta = delta.clamp(-0.6, 0.6);
        let mut pos = grid.points()[j] + delta * h;
        if pos >= grid.half_length() {
            pos -= period;
        }
        let amp = c - 0.25 * (l - r) * delta;
        cands.push((pos, amp));
    }
    // Strongest first, then enforce a minimal spacing so shoulder ripples of a
    // large peak cannot masquerade as solitons.
    cands.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    let mut picked: Vec<(f64, f64)> = Vec::new();
    for &(pos, amp) in &cands {
        let clear = picked.iter().all(|&(q, _)| {
            let d = (pos - q).abs() % period;
            d.min(period - d) > 10.0 * h
        });
        if clear {
            picked.push((pos, amp));
        }
    }

    match prior {
        None => {
            if picked.len() < n_expected {
                return Err(SimError::DetectionMiscount {
                    expected: n_expected,
                    found: picked.len(),
                });
            }
            picked.truncate(n_expected);
            picked.sort_by(|a, b| b.0.total_cmp(&a.0));
            Ok(TrackSample {
                positions: picked.iter().map(|c| c.0).collect(),
                amplitudes: picked.iter().map(|c| c.1).collect(),
                valid: vec![true; n_expected],
            })
        }
        Some(ps) => {
            // Matching window: under half the closest prior gap, so a soliton
            // cannot be claimed by its neighbor's extremum.
            let mut window = 0.25 * period;
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    let d = (ps[i] - ps[j]).abs() % period;
                    window = window.min(0.45 * d.min(period - d));
                }
            }
            let mut positions = Vec::with_capacity(n_expected);
            let mut amplitudes = Vec::with_capacity(n_expected);
            let mut valid = Vec::with_capacity(n_expected);
            let mut claimed = vec![false; picked.len()];
            for &pr in ps {
                let mut best: Option<(usize, f64)> = None;
                for (ci, &(pos, _)) in picked.iter().enumerate() {
                    if claimed[ci] {
                        continue;
                    }
                    let mut d = (pos - pr) % period;
                    if d >= 0.5 * period {
                        d -= period;
                    } else if d < -0.5 * period {
                        d += period;
                    }
                    if d.abs() <= window && best.is_none_or(|(_, bd)| d.abs() < bd.abs()) {
                        best = Some((ci, d));
                    }
                }
                match best {
                    Some((ci, d)) => {
                        claimed[ci] = true;
                        positions.push(pr + d);
                        amplitudes.push(picked[ci].1);
                        valid.push(true);
                    }
                    None => {
                        positions.push(pr);
                        amplitudes.push(f64::NAN);
                        valid.push(false);
                    }
                }
            }
            Ok(TrackSample { positions, amplitudes, valid })
        }
    }
}

/// Soliton trajectories sampled at the recording stride.
///
/// Rows of `positions`, `amplitudes`, `valid_mask` align with `times`;
/// columns are solitons in the initial descending-position order. Positions
/// are unwrapped across the periodic seam.
#[derive(Debug, Clone)]
pub struct SolitonTrack {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub amplitudes: Vec<Vec<f64>>,
    pub valid_mask: Vec<Vec<bool>>,
}

impl SolitonTrack {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_solitons(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn all_valid(&self) -> bool {
        self.valid_mask.iter().all(|row| row.iter().all(|&v| v))
    }

    /// Gap between soliton `i` and `j` at each recorded time.
    pub fn gap_series(&self, i: usize, j: usize) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.positions)
            .map(|(&t, row)| (t, row[i] - row[j]))
            .collect()
    }
}

/// Conserved-quantity readout at one step.
#[derive(Debug, Clone, Copy)]
pub struct ConservationSample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
}

/// Full experiment record: trajectories at the recording stride, conserved
/// quantities at every step, and the final state.
#[derive(Debug)]
pub struct ExperimentLog {
    pub track: SolitonTrack,
    pub conservation: Vec<ConservationSample>,
    pub final_state: SimState,
}

/// Integrate `steps` steps from `initial`, tracking `n_solitons` every
/// `record_stride` steps (plus the first and last) and logging mass and
/// energy at every step.
///
/// Tracking failures flip `valid_mask` entries instead of aborting; blow-up
/// and non-finite samples abort with the error.
pub fn run_experiment(
    cfg: &SimConfig,
    initial: SimState,
    n_solitons: usize,
    steps: usize,
    record_stride: usize,
) -> Result<ExperimentLog, SimError> {
    if steps == 0 || record_stride == 0 {
        return Err(SimError::BadConfig("steps and record_stride must be positive".into()));
    }
    let stepper = Stepper::new(cfg);
    let mut track = SolitonTrack {
        times: Vec::new(),
        positions: Vec::new(),
        amplitudes: Vec::new(),
        valid_mask: Vec::new(),
    };
    let mut conservation = Vec::with_capacity(steps + 1);
    let mut prior: Option<Vec<f64>> = None;

    let mut record =
        |state: &SimState, prior: &mut Option<Vec<f64>>| -> Result<(), SimError> {
            let sample = track_solitons(&state.u, n_solitons, prior.as_deref())?;
            *prior = Some(sample.positions.clone());
            track.times.push(state.t);
            track.positions.push(sample.positions);
            track.amplitudes.push(sample.amplitudes);
            track.valid_mask.push(sample.valid);
            Ok(())
        };

    let (m0, e0) = conserved_quantities(&initial.u, cfg.p);
    conservation.push(ConservationSample { t: initial.t, mass: m0, energy: e0 });
    record(&initial, &mut prior)?;

    let mut state = initial;
    for k in 1..=steps {
        state = stepper.advance(&state)?;
        let (m, e) = conserved_quantities(&state.u, cfg.p);
        conservation.push(ConservationSample { t: state.t, mass: m, energy: e });
        if k % record_stride == 0 || k == steps {
            record(&state, &mut prior)?;
        }
    }
    Ok(ExperimentLog { track, conservation, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{inner_product, l2_norm, translate};
    use crate::ground::petviashvili_solve;
    use approx::assert_relative_eq;

    fn grid(n: usize, l: f64) -> Arc<Grid1D> {
        Grid1D::new(n, l).unwrap()
    }

    fn solve(p: f64, n: usize, l: f64) -> GroundState {
        petviashvili_solve(p, &grid(n, l), 1e-10).unwrap()
    }

    #[test]
    fn config_enforces_stability_budget() {
        let g = grid(1024, 50.0);
        // xi_max ~ 32.2, speed 2*2 = 4: budget ~ 0.0217.
        let r = SimConfig::new(&g, 2.0, Frame::Lab, 0.1, 2.0);
        assert!(matches!(r, Err(SimError::UnstableStep { .. })));
        let cfg = SimConfig::new(&g, 2.0, Frame::Lab, 0.02, 2.0).unwrap();
        assert!(cfg.stability_budget() > 0.02);
        assert!(SimConfig::new(&g, 1.0, Frame::Lab, 0.01, 1.0).is_err());
        assert!(SimConfig::new(&g, 2.0, Frame::Lab, -0.01, 1.0).is_err());
        assert!(SimConfig::new(&g, 2.0, Frame::Lab, 0.01, 0.0).is_err());
    }

    #[test]
    fn zero_field_is_fixed_point() {
        let g = grid(64, 10.0);
        for frame in [Frame::Lab, Frame::Comoving] {
            let cfg = SimConfig::new(&g, 2.0, frame, 0.01, 1.0).unwrap();
            let s0 = SimState { t: 0.0, u: RealField::zeros(&g) };
            let s1 = step(&s0, &cfg).unwrap();
            assert!(s1.u.samples().iter().all(|&v| v == 0.0));
            assert_relative_eq!(s1.t, 0.01, max_relative = 1e-15);
        }
    }

    /// A single low mode at tiny amplitude feels only the linear phase; one
    /// step must rotate its coefficient by exactly exp(i dt xi (|xi| + shift)).
    #[test]
    fn linear_phase_is_exact() {
        let g = grid(256, 8.0);
        let xi0 = 5.0 * std::f64::consts::PI / 8.0;
        let eps = 1e-4;
        let u0 = RealField::from_fn(&g, |y| eps * (xi0 * y).cos());
        let dt = 0.05;
        for (frame, shift) in [(Frame::Lab, 0.0), (Frame::Comoving, 1.0)] {
            let cfg = SimConfig::new(&g, 5.0, frame, dt, eps).unwrap();
            let s1 = step(&SimState { t: 0.0, u: u0.clone() }, &cfg).unwrap();
            let hat0 = forward_transform(&u0);
            let hat1 = forward_transform(&s1.u);
            let ratio = hat1.coeffs()[5] / hat0.coeffs()[5];
            let want = Complex::from_polar(1.0, dt * xi0 * (xi0 + shift));
            assert!((ratio - want).norm() <= 1e-12, "{frame:?}: {ratio} vs {want}");
        }
    }

    /// Halving dt divides the error by ~16 (classical fourth order).
    #[test]
    fn convergence_is_fourth_order() {
        let g = grid(2048, 100.0);
        let gs = solve(2.0, 2048, 100.0);
        let u0 = make_multisoliton(&gs, &[0.0], &[0.2], &[1.0], false).unwrap();
        let t_end = 0.48;
        let run = |dt: f64| {
            let cfg = SimConfig::new(&g, 2.0, Frame::Comoving, dt, 2.5).unwrap();
            let stepper = Stepper::new(&cfg);
            let mut s = SimState { t: 0.0, u: u0.clone() };
            for _ in 0..(t_end / dt).round() as usize {
                s = stepper.advance(&s).unwrap();
            }
            s.u
        };
        let reference = run(0.0006);
        let coarse = run(0.006);
        let fine = run(0.003);
        let err = |u: &RealField| {
            let mut d = u.clone();
            d.add_scaled(-1.0, &reference);
            l2_norm(&d)
        };
        let (e1, e2) = (err(&coarse), err(&fine));
        let ratio = e1 / e2;
        assert!(
            (10.0..=24.0).contains(&ratio),
            "errors {e1:.3e}/{e2:.3e}, ratio {ratio:.2}"
        );
    }

    #[test]
    fn single_soliton_is_exact_translate() {
        let gs = solve(2.0, 1024, 100.0);
        let u = make_multisoliton(&gs, &[17.3], &[0.0], &[1.0], false).unwrap();
        let want = translate(gs.field(), 17.3).unwrap();
        let mut d = u.clone();
        d.add_scaled(-1.0, &want);
        assert!(l2_norm(&d) <= 1e-12 * l2_norm(&want));
    }

    #[test]
    fn multisoliton_input_validation() {
        let gs = solve(2.0, 1024, 100.0);
        let h = gs.grid().spacing();
        let r = make_multisoliton(&gs, &[0.0, 19.0 * h], &[0.0, 0.0], &[1.0, 1.0], false);
        assert!(matches!(r, Err(SimError::Overlap { .. })));
        let r = make_multisoliton(&gs, &[0.0], &[0.7], &[1.0], false);
        assert!(matches!(r, Err(SimError::BadConfig(_))));
        let r = make_multisoliton(&gs, &[0.0], &[0.0], &[2.0], false);
        assert!(matches!(r, Err(SimError::BadConfig(_))));
        let r = make_multisoliton(&gs, &[0.0, 30.0], &[0.0], &[1.0, 1.0], false);
        assert!(matches!(r, Err(SimError::BadConfig(_))));
    }

    /// The pair correction is, by construction, the translated solve of the
    /// first-order profile scaled by the partner sign over the squared gap.
    #[test]
    fn a0_correction_matches_construction() {
        // p = 2.5 halves the spectral decay rate; the mu = 0.1 dilation needs
        // this much headroom above its band cutoff.
        let gs = solve(2.5, 4096, 200.0);
        let (x1, x2) = (25.0, -25.0);
        let signs = [1.0, -1.0];
        let plain = make_multisoliton(&gs, &[x1, x2], &[0.1, -0.1], &signs, false).unwrap();
        let with = make_multisoliton(&gs, &[x1, x2], &[0.1, -0.1], &signs, true).unwrap();
        let a0 = linop::solve_a0(&gs, 1.0).unwrap();
        let gap2 = (x1 - x2) * (x1 - x2);
        let mut want = RealField::zeros(gs.grid());
        want.add_scaled(signs[1] / gap2, &translate(&a0, x1).unwrap());
        want.add_scaled(signs[0] / gap2, &translate(&a0, x2).unwrap());
        let mut d = with.clone();
        d.add_scaled(-1.0, &plain);
        d.add_scaled(-1.0, &want);
        assert!(
            l2_norm(&d) <= 1e-10 * l2_norm(&want),
            "defect {:.3e}",
            l2_norm(&d) / l2_norm(&want)
        );
    }

    #[test]
    fn mass_cross_term_is_bilinear() {
        let gs = solve(2.0, 2048, 200.0);
        let one = |x: f64| make_multisoliton(&gs, &[x], &[0.0], &[1.0], false).unwrap();
        let (u1, u2) = (one(40.0), one(-40.0));
        let both = make_multisoliton(&gs, &[40.0, -40.0], &[0.0, 0.0], &[1.0, 1.0], false).unwrap();
        let (m, _) = conserved_quantities(&both, 2.0);
        let (m1, _) = conserved_quantities(&u1, 2.0);
        let (m2, _) = conserved_quantities(&u2, 2.0);
        let cross = inner_product(&u1, &u2).unwrap();
        assert_relative_eq!(m - m1 - m2, cross, max_relative = 1e-9, epsilon = 1e-12);
        // The cross term itself is a tail effect, far below the soliton masses.
        assert!(cross.abs() < 1e-2 * m1);
    }

    #[test]
    fn conserved_quantities_reference_values() {
        let g = grid(256, 30.0);
        let (m, e) = conserved_quantities(&RealField::zeros(&g), 2.0);
        assert_eq!((m, e), (0.0, 0.0));

        let gs = solve(2.0, 8192, 400.0);
        let (m, _) = conserved_quantities(gs.field(), 2.0);
        assert_relative_eq!(m, std::f64::consts::PI, epsilon = 1e-3);

        let shifted = translate(gs.field(), 12.7).unwrap();
        let (ms, es) = conserved_quantities(&shifted, 2.0);
        let (m0, e0) = conserved_quantities(gs.field(), 2.0);
        assert_relative_eq!(ms, m0, max_relative = 1e-12);
        assert_relative_eq!(es, e0, max_relative = 1e-10, epsilon = 1e-14);
    }

    #[test]
    fn tracking_finds_off_grid_center() {
        let gs = solve(2.0, 1024, 50.0);
        let h = gs.grid().spacing();
        let x = 3.0 + 0.37 * h;
        let u = make_multisoliton(&gs, &[x], &[0.0], &[1.0], false).unwrap();
        let s = track_solitons(&u, 1, None).unwrap();
        assert!(s.valid[0]);
        assert!(
            (s.positions[0] - x).abs() <= 0.05 * h,
            "position error {:.3e} spacings",
            (s.positions[0] - x).abs() / h
        );
        assert_relative_eq!(s.amplitudes[0], 2.0, max_relative = 1e-2);
    }

    #[test]
    fn tracking_handles_alternating_pair() {
        let gs = solve(2.5, 2048, 200.0);
        let u = make_multisoliton(&gs, &[20.0, -20.0], &[0.0, 0.0], &[1.0, -1.0], false).unwrap();
        let s = track_solitons(&u, 2, None).unwrap();
        assert!((s.positions[0] - 20.0).abs() < 0.1);
        assert!((s.positions[1] + 20.0).abs() < 0.1);
        assert!(s.amplitudes[0] > 0.0 && s.amplitudes[1] < 0.0);

        // Prior-guided matching keeps soliton identity and unwraps the seam.
        let v = make_multisoliton(&gs, &[-199.0, -20.0], &[0.0, 0.0], &[1.0, -1.0], false).unwrap();
        let s = track_solitons(&v, 2, Some(&[198.5, -20.0])).unwrap();
        assert!(s.valid[0] && s.valid[1]);
        // -199 is 198.5 + 2.5 across the seam: unwrapped past the boundary.
        assert!((s.positions[0] - 201.0).abs() < 0.1, "unwrapped {}", s.positions[0]);
        assert!((s.positions[1] + 20.0).abs() < 0.1);
    }

    #[test]
    fn tracking_flags_lost_soliton() {
        let gs = solve(2.0, 1024, 50.0);
        let u = make_multisoliton(&gs, &[10.0], &[0.0], &[1.0], false).unwrap();
        let s = track_solitons(&u, 2, Some(&[10.0, -30.0])).unwrap();
        assert!(s.valid[0]);
        assert!(!s.valid[1]);
        assert_relative_eq!(s.positions[1], -30.0);
        assert!(s.amplitudes[1].is_nan());
        assert!(track_solitons(&RealField::zeros(gs.grid()), 1, None).is_err());
    }

    /// The speed-one wave is a steady state of the comoving flow.
    #[test]
    fn comoving_soliton_sits_still() {
        let gs = solve(2.0, 1024, 100.0);
        let g = gs.grid().clone();
        let cfg = SimConfig::new(&g, 2.0, Frame::Comoving, 0.02, 3.0).unwrap();
        let stepper = Stepper::new(&cfg);
        let mut s = SimState { t: 0.0, u: gs.field().clone() };
        for _ in 0..500 {
            s = stepper.advance(&s).unwrap();
        }
        let mut d = s.u.clone();
        d.add_scaled(-1.0, gs.field());
        assert!(
            l2_norm(&d) <= 1e-3 * l2_norm(gs.field()),
            "shape drift {:.3e}",
            l2_norm(&d) / l2_norm(gs.field())
        );
    }

    /// Short version of the lab-frame benchmark: unit speed and conserved
    /// invariants for a single soliton.
    #[test]
    fn lab_soliton_speed_and_conservation() {
        let gs = solve(2.0, 2048, 100.0);
        let g = gs.grid().clone();
        let dt = 0.005;
        let cfg = SimConfig::new(&g, 2.0, Frame::Lab, dt, 3.0).unwrap();
        let u0 = make_multisoliton(&gs, &[-5.0], &[0.0], &[1.0], false).unwrap();
        let log = run_experiment(&cfg, SimState { t: 0.0, u: u0 }, 1, 2000, 100).unwrap();
        assert!(log.track.all_valid());

        // Least-squares slope of position vs time.
        let ts = &log.track.times;
        let xs: Vec<f64> = log.track.positions.iter().map(|r| r[0]).collect();
        let n = ts.len() as f64;
        let (st, sx) = (ts.iter().sum::<f64>(), xs.iter().sum::<f64>());
        let stt = ts.iter().map(|t| t * t).sum::<f64>();
        let stx = ts.iter().zip(&xs).map(|(t, x)| t * x).sum::<f64>();
        let speed = (n * stx - st * sx) / (n * stt - st * st);
        assert!((speed - 1.0).abs() <= 1e-3, "speed {speed}");

        let c0 = log.conservation[0];
        for c in &log.conservation {
            assert!((c.mass - c0.mass).abs() <= 1e-6 * c0.mass.abs());
            assert!((c.energy - c0.energy).abs() <= 1e-6 * c0.energy.abs().max(c0.mass));
        }
    }

    /// Lab and comoving runs of the same data must agree after shifting by t.
    #[test]
    fn frames_agree_on_trajectories() {
        let gs = solve(2.0, 1024, 100.0);
        let g = gs.grid().clone();
        let u0 = make_multisoliton(&gs, &[-20.0], &[0.1], &[1.0], false).unwrap();
        let t_end = 5.0;
        let mut finals = Vec::new();
        for frame in [Frame::Lab, Frame::Comoving] {
            let cfg = SimConfig::new(&g, 2.0, frame, 0.01, 3.0).unwrap();
            let log = run_experiment(&cfg, SimState { t: 0.0, u: u0.clone() }, 1, 500, 500)
                .unwrap();
            finals.push(log.track.positions.last().unwrap()[0]);
        }
        let lab_shifted = finals[0] - t_end;
        let h = g.spacing();
        assert!(
            (lab_shifted - finals[1]).abs() <= 0.1 * h,
            "lab-t {lab_shifted} vs comoving {}",
            finals[1]
        );
    }

    /// For resolved data the dealiasing filter only touches roundoff-level
    /// tail modes; trajectories must not depend on it.
    #[test]
    fn dealias_toggle_barely_moves_trajectories() {
        let gs = solve(2.0, 1024, 100.0);
        let g = gs.grid().clone();
        let u0 = make_multisoliton(&gs, &[-10.0, 20.0], &[0.1, -0.1], &[1.0, 1.0], false).unwrap();
        let mut finals = Vec::new();
        for dealias in [true, false] {
            let cfg = SimConfig::new(&g, 2.0, Frame::Comoving, 0.01, 3.0)
                .unwrap()
                .with_dealias(dealias);
            let log =
                run_experiment(&cfg, SimState { t: 0.0, u: u0.clone() }, 2, 500, 500).unwrap();
            finals.push(log.track.positions.last().unwrap().clone());
        }
        let h = g.spacing();
        for i in 0..2 {
            assert!(
                (finals[0][i] - finals[1][i]).abs() <= 0.1 * h,
                "soliton {i}: {} vs {}",
                finals[0][i],
                finals[1][i]
            );
        }
    }

    /// The flow is equivariant under (u, y, t) -> (-u, -y, -t): running the
    /// negated reflection of a final state forward returns the negated
    /// reflection of the initial state.
    #[test]
    fn reflection_reversal_equivariance() {
        let gs = solve(2.0, 2048, 100.0);
        let g = gs.grid().clone();
        let u0 = make_multisoliton(&gs, &[8.0, -12.0], &[0.2, -0.1], &[1.0, 1.0], false).unwrap();
        // Dealias off: the mask's first application would discard the data's
        // genuine above-cutoff tail, which the mapped comparison retains.
        let cfg = SimConfig::new(&g, 2.0, Frame::Lab, 5e-4, 3.0)
            .unwrap()
            .with_dealias(false);
        let stepper = Stepper::new(&cfg);
        let steps = 2000;
        let mut s = SimState { t: 0.0, u: u0.clone() };
        for _ in 0..steps {
            s = stepper.advance(&s).unwrap();
        }
        let mut back = SimState { t: 0.0, u: s.u.reflected() };
        back.u.scale(-1.0);
        for _ in 0..steps {
            back = stepper.advance(&back).unwrap();
        }
        let mut want = u0.reflected();
        want.scale(-1.0);
        let mut d = back.u.clone();
        d.add_scaled(-1.0, &want);
        assert!(
            d.sup_norm() <= 1e-8 * u0.sup_norm(),
            "symmetry defect {:.3e}",
            d.sup_norm() / u0.sup_norm()
        );
    }

    #[test]
    fn blow_up_trap_fires() {
        let g = grid(256, 30.0);
        let cfg = SimConfig::new(&g, 2.0, Frame::Lab, 1e-3, 1e-3).unwrap();
        let u = RealField::from_fn(&g, |y| 2.0 / (1.0 + y * y));
        let r = step(&SimState { t: 0.0, u }, &cfg);
        assert!(matches!(r, Err(SimError::BlowupDetected { .. })));
    }
}
