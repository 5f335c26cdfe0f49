//! Uniform periodic grid, discrete Fourier transforms, and the nonlocal
//! multiplier operators (|D|, Hilbert transform, spectral derivative) on which
//! every other module is built.
//!
//! Conventions. The domain is `[-half_length, half_length)` sampled at
//! `n` equispaced points, `n` a power of two. Wavenumbers are
//! `xi_k = pi k / half_length` stored in FFT layout (`k = 0..n/2-1` then
//! `-n/2..-1`). Spectral coefficients carry the quadrature weight and the
//! left-endpoint phase, so `coeff[k]` approximates the continuum transform
//! `integral of f(y) exp(-i xi_k y) dy` and Parseval reads
//! `integral f^2 = (1/2L) sum |coeff|^2`.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

/// Errors from grid construction and spectral operations.
#[derive(Debug, Error)]
pub enum FourierError {
    #[error("grid size {0} must be a power of two and at least 16")]
    BadGridSize(usize),
    #[error("half-length must be positive and finite, got {0}")]
    BadHalfLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("multiplier output not real: relative imaginary residue {residue:.3e}")]
    NonRealOutput { residue: f64 },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("malformed field file: {0}")]
    BadFieldFile(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniform periodic grid with cached transform plans.
///
/// Construct through [`Grid1D::new`], which returns an `Arc` so that fields
/// can share the grid (and its FFT plans) cheaply across threads.
pub struct Grid1D {
    n: usize,
    half_length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
    points: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid1D")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid1D {
    /// A periodic grid on `[-half_length, half_length)` with `n` points.
    ///
    /// `n` must be a power of two, at least 16.
    pub fn new(n: usize, half_length: f64) -> Result<Arc<Self>, FourierError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(FourierError::BadGridSize(n));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(FourierError::BadHalfLength(half_length));
        }
        let spacing = 2.0 * half_length / n as f64;
        let wavenumbers = (0..n)
            .map(|j| {
                let k = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                std::f64::consts::PI * k as f64 / half_length
            })
            .collect();
        let points = (0..n).map(|j| -half_length + j as f64 * spacing).collect();
        // A process-wide planner would serialize unrelated grids; a local one
        // still lets rustfft share twiddle tables internally.
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid1D { n, half_length, spacing, wavenumbers, points, fwd, inv }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Wavenumbers in FFT layout; `wavenumbers()[0] == 0`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Sample points `y_j = -half_length + j*spacing`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Largest resolvable wavenumber magnitude (the Nyquist mode).
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * (self.n / 2) as f64 / self.half_length
    }

    /// Index of the grid point closest to `y` (periodically wrapped).
    pub fn index_of(&self, y: f64) -> usize {
        let period = 2.0 * self.half_length;
        let frac = ((y + self.half_length) / period).rem_euclid(1.0);
        ((frac * self.n as f64).round() as usize) % self.n
    }

    /// Raw unnormalized inverse DFT in place (FFT layout, no phase or
    /// quadrature weights); building block for circulant kernels.
    pub fn inverse_fft(&self, buf: &mut [Complex<f64>]) {
        self.inv.process(buf);
    }

    /// Raw forward DFT in place, the counterpart of [`Grid1D::inverse_fft`].
    /// `inverse_fft` after `forward_fft` multiplies by `n`.
    pub fn forward_fft(&self, buf: &mut [Complex<f64>]) {
        self.fwd.process(buf);
    }
}

/// Real-valued samples on a [`Grid1D`]; the universal field carrier.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid1D>,
    samples: Vec<f64>,
}

/// Complex Fourier coefficients of a real field, in FFT layout.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid1D>,
    coeffs: Vec<Complex<f64>>,
}

impl RealField {
    pub fn zeros(grid: &Arc<Grid1D>) -> Self {
        RealField { grid: Arc::clone(grid), samples: vec![0.0; grid.n] }
    }

    pub fn from_samples(grid: &Arc<Grid1D>, samples: Vec<f64>) -> Result<Self, FourierError> {
        if samples.len() != grid.n {
            return Err(FourierError::BadGridSize(samples.len()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FourierError::NonFiniteSample(i));
        }
        Ok(RealField { grid: Arc::clone(grid), samples })
    }

    pub fn from_fn(grid: &Arc<Grid1D>, mut f: impl FnMut(f64) -> f64) -> Self {
        let samples = grid.points.iter().map(|&y| f(y)).collect();
        RealField { grid: Arc::clone(grid), samples }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// `self + c * other`, in place.
    pub fn add_scaled(&mut self, c: f64, other: &RealField) {
        debug_assert!(self.grid == other.grid);
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.samples {
            *a *= c;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: Arc::clone(&self.grid),
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise map receiving the grid coordinate as well.
    pub fn map_with_y(&self, f: impl Fn(f64, f64) -> f64) -> RealField {
        RealField {
            grid: Arc::clone(&self.grid),
            samples: self
                .grid
                .points
                .iter()
                .zip(&self.samples)
                .map(|(&y, &v)| f(y, v))
                .collect(),
        }
    }

    /// Reflection through the origin: sample `j` maps to `(n - j) mod n`.
    pub fn reflected(&self) -> RealField {
        let n = self.grid.n;
        let mut samples = vec![0.0; n];
        for j in 0..n {
            samples[j] = self.samples[(n - j) % n];
        }
        RealField { grid: Arc::clone(&self.grid), samples }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Quadrature inner product `(f, g) = spacing * sum f_j g_j`.
pub fn inner_product(f: &RealField, g: &RealField) -> Result<f64, FourierError> {
    if f.grid != g.grid {
        return Err(FourierError::GridMismatch);
    }
    let s: f64 = f.samples.iter().zip(&g.samples).map(|(a, b)| a * b).sum();
    Ok(f.grid.spacing * s)
}

/// Discrete L2 norm `sqrt((f, f))`.
pub fn l2_norm(f: &RealField) -> f64 {
    let s: f64 = f.samples.iter().map(|a| a * a).sum();
    (f.grid.spacing * s).sqrt()
}

/// Quadrature of `f` over the domain.
pub fn integral(f: &RealField) -> f64 {
    f.grid.spacing * f.samples.iter().sum::<f64>()
}

impl SpectralField {
    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<f64>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<f64>] {
        &mut self.coeffs
    }

    /// Assemble from raw coefficients (FFT layout; length must match the grid).
    pub fn from_parts(
        grid: &Arc<Grid1D>,
        coeffs: Vec<Complex<f64>>,
    ) -> Result<Self, FourierError> {
        if coeffs.len() != grid.n {
            return Err(FourierError::GridMismatch);
        }
        Ok(SpectralField { grid: Arc::clone(grid), coeffs })
    }
}

/// Forward transform with continuum normalization (see module docs).
pub fn forward_transform(f: &RealField) -> SpectralField {
    let grid = &f.grid;
    let mut buf: Vec<Complex<f64>> =
        f.samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    grid.fwd.process(&mut buf);
    // Quadrature weight plus the phase aligning index 0 with y = -half_length:
    // exp(-i xi_k y_j) = (-1)^k exp(-2 pi i jk/n).
    let h = grid.spacing;
    for (j, c) in buf.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { h } else { -h };
        *c *= sign;
    }
    SpectralField { grid: Arc::clone(grid), coeffs: buf }
}

/// Inverse of [`forward_transform`]; checks the imaginary residue of the
/// reconstruction and discards it.
pub fn inverse_transform(f: &SpectralField) -> Result<RealField, FourierError> {
    let grid = &f.grid;
    let mut buf = f.coeffs.clone();
    let inv_h = 1.0 / grid.spacing;
    for (j, c) in buf.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { inv_h } else { -inv_h };
        *c *= sign;
    }
    grid.inv.process(&mut buf);
    let scale = 1.0 / grid.n as f64;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for c in &buf {
        max_re = max_re.max(c.re.abs());
        max_im = max_im.max(c.im.abs());
    }
    let residue = max_im / max_re.max(f64::MIN_POSITIVE);
    if residue > 1e-10 {
        return Err(FourierError::NonRealOutput { residue });
    }
    let samples = buf.iter().map(|c| c.re * scale).collect();
    Ok(RealField { grid: Arc::clone(grid), samples })
}

/// Apply the Fourier multiplier `m(xi)`.
///
/// The symbol must satisfy `m(-xi) = conj(m(xi))` so that real fields map to
/// real fields; the check runs on the sampled symbol values and the result's
/// imaginary residue, failing with [`FourierError::NonRealOutput`].
pub fn apply_multiplier(
    f: &RealField,
    m: impl Fn(f64) -> Complex<f64>,
) -> Result<RealField, FourierError> {
    let grid = &f.grid;
    let n = grid.n;
    let symbol: Vec<Complex<f64>> = grid.wavenumbers.iter().map(|&xi| m(xi)).collect();
    // Hermitian symmetry of the sampled symbol: pair (k, -k); the DC and
    // Nyquist modes are self-paired and must be real.
    let mut asym = symbol[0].im.abs().max(symbol[n / 2].im.abs());
    for j in 1..n / 2 {
        let d = symbol[j] - symbol[n - j].conj();
        asym = asym.max(d.norm());
    }
    let scale = symbol.iter().fold(0.0f64, |s, c| s.max(c.norm()));
    if asym > 1e-12 * scale.max(1.0) {
        return Err(FourierError::NonRealOutput { residue: asym });
    }
    let mut hat = forward_transform(f);
    for (c, s) in hat.coeffs.iter_mut().zip(&symbol) {
        *c *= s;
    }
    inverse_transform(&hat)
}

/// The nonlocal dispersion operator `|D|` (symbol `|xi|`).
pub fn frac_dispersion(f: &RealField) -> RealField {
    apply_multiplier(f, |xi| Complex::new(xi.abs(), 0.0))
        .expect("|xi| is a real even symbol")
}

/// Hilbert transform (symbol `-i sgn(xi)`, zero on the DC and Nyquist modes).
pub fn hilbert_transform(f: &RealField) -> RealField {
    let nyq = f.grid.nyquist();
    apply_multiplier(f, |xi| {
        if xi == 0.0 || xi == -nyq {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(0.0, -xi.signum())
        }
    })
    .expect("discrete Hilbert symbol is Hermitian")
}

/// Spectral derivative (symbol `i xi`, Nyquist mode zeroed).
pub fn derivative(f: &RealField) -> RealField {
    let nyq = f.grid.nyquist();
    apply_multiplier(f, |xi| {
        if xi == -nyq {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(0.0, xi)
        }
    })
    .expect("derivative symbol is Hermitian after Nyquist zeroing")
}

/// Shift `f` right by `shift` (periodically) through the phase `exp(-i xi shift)`.
///
/// The Nyquist mode is self-paired, so only the real part `cos(xi shift)` of
/// its phase survives; shifts by whole grid spacings stay exact.
pub fn translate(f: &RealField, shift: f64) -> Result<RealField, FourierError> {
    let nyq = f.grid.nyquist();
    apply_multiplier(f, |xi| {
        if xi == -nyq {
            Complex::new((xi * shift).cos(), 0.0)
        } else {
            Complex::from_polar(1.0, -xi * shift)
        }
    })
}

/// Squared H^{1/2} norm `sum (1 + |xi|) |f_hat|^2` with Parseval weights.
pub fn sobolev_half_norm(f: &RealField) -> f64 {
    let hat = forward_transform(f);
    let w = 1.0 / (2.0 * f.grid.half_length);
    let s: f64 = hat
        .coeffs
        .iter()
        .zip(&f.grid.wavenumbers)
        .map(|(c, &xi)| (1.0 + xi.abs()) * c.norm_sqr())
        .sum();
    (w * s).sqrt()
}

/// Homogeneous half-norm squared `(f, |D| f)` computed spectrally.
pub fn half_dispersion_energy(f: &RealField) -> f64 {
    let hat = forward_transform(f);
    let w = 1.0 / (2.0 * f.grid.half_length);
    w * hat
        .coeffs
        .iter()
        .zip(&f.grid.wavenumbers)
        .map(|(c, &xi)| xi.abs() * c.norm_sqr())
        .sum::<f64>()
}

/// Write a field as CSV: a `(n_points, half_length)` header block, then the
/// samples in grid order.
pub fn write_field_csv<W: Write>(f: &RealField, out: &mut W) -> Result<(), FourierError> {
    writeln!(out, "n_points,half_length")?;
    writeln!(out, "{},{:.17e}", f.grid.n, f.grid.half_length)?;
    writeln!(out, "y,value")?;
    for (y, v) in f.grid.points.iter().zip(&f.samples) {
        writeln!(out, "{y:.17e},{v:.17e}")?;
    }
    Ok(())
}

/// Read a field written by [`write_field_csv`].
pub fn read_field_csv<R: BufRead>(input: R) -> Result<RealField, FourierError> {
    let mut lines = input.lines();
    let expect = |l: Option<Result<String, std::io::Error>>| -> Result<String, FourierError> {
        l.ok_or_else(|| FourierError::BadFieldFile("truncated file".into()))?
            .map_err(FourierError::Io)
    };
    let header = expect(lines.next())?;
    if header.trim() != "n_points,half_length" {
        return Err(FourierError::BadFieldFile(format!("unexpected header {header:?}")));
    }
    let meta = expect(lines.next())?;
    let mut parts = meta.split(',');
    let n: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| FourierError::BadFieldFile("bad n_points".into()))?;
    let half_length: f64 = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| FourierError::BadFieldFile("bad half_length".into()))?;
    let columns = expect(lines.next())?;
    if columns.trim() != "y,value" {
        return Err(FourierError::BadFieldFile(format!("unexpected columns {columns:?}")));
    }
    let grid = Grid1D::new(n, half_length)?;
    let mut samples = Vec::with_capacity(n);
    for line in lines {
        let line = line.map_err(FourierError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| FourierError::BadFieldFile(format!("bad row {line:?}")))?;
        samples.push(v);
    }
    RealField::from_samples(&grid, samples)
}

/// Shared smooth window: 1 on `|y| <= 0.8 L`, cosine-squared ramp down over
/// `[0.8 L, 0.9 L]`, 0 beyond. Used wherever a `y`-weight must vanish near the
/// periodic seam.
pub fn boundary_window(grid: &Arc<Grid1D>) -> RealField {
    let l = grid.half_length();
    RealField::from_fn(grid, |y| {
        let a = y.abs() / l;
        if a <= 0.8 {
            1.0
        } else if a < 0.9 {
            let t = (a - 0.8) / 0.1;
            (0.5 * std::f64::consts::PI * t).cos().powi(2)
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Deterministic pseudo-random samples for test fields.
    fn lcg_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    /// Band-limited random field: white noise pushed through a spectral decay,
    /// with the Nyquist mode removed (operator identities involving the odd
    /// symbols only hold on Nyquist-free fields).
    fn smooth_random(grid: &Arc<Grid1D>, seed: u64) -> RealField {
        let raw = RealField::from_samples(grid, lcg_samples(grid.len(), seed)).unwrap();
        let nyq = grid.nyquist();
        apply_multiplier(&raw, |xi| {
            if xi == -nyq {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new((-0.3 * xi.abs()).exp(), 0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid1D::new(12, 1.0).is_err());
        assert!(Grid1D::new(1000, 1.0).is_err());
        assert!(Grid1D::new(64, -1.0).is_err());
        assert!(Grid1D::new(64, f64::NAN).is_err());
        assert!(Grid1D::new(64, 1.0).is_ok());
    }

    #[test]
    fn round_trip_identity() {
        let grid = Grid1D::new(256, 10.0).unwrap();
        let f = smooth_random(&grid, 7);
        let back = inverse_transform(&forward_transform(&f)).unwrap();
        let err = f
            .samples()
            .iter()
            .zip(back.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * f.sup_norm().max(1.0), "round trip error {err}");
    }

    #[test]
    fn constant_field_is_pure_dc() {
        let grid = Grid1D::new(64, 5.0).unwrap();
        let f = RealField::from_fn(&grid, |_| 3.25);
        let hat = forward_transform(&f);
        assert_relative_eq!(hat.coeffs()[0].re, 3.25 * 10.0, max_relative = 1e-12);
        for c in &hat.coeffs()[1..] {
            assert!(c.norm() < 1e-10);
        }
    }

    #[test]
    fn single_mode_has_two_coefficients() {
        let grid = Grid1D::new(128, 4.0).unwrap();
        let xi1 = grid.wavenumbers()[3];
        let f = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        let hat = forward_transform(&f);
        for (j, c) in hat.coeffs().iter().enumerate() {
            let expected_nonzero = j == 3 || j == grid.len() - 3;
            if expected_nonzero {
                assert!(c.norm() > 1.0);
            } else {
                assert!(c.norm() < 1e-10, "leak at index {j}: {c}");
            }
        }
    }

    #[test]
    fn derivative_of_sine() {
        let grid = Grid1D::new(128, 4.0).unwrap();
        let xi1 = grid.wavenumbers()[5];
        let f = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        let df = derivative(&f);
        let expect = RealField::from_fn(&grid, |y| xi1 * (xi1 * y).cos());
        for (a, b) in df.samples().iter().zip(expect.samples()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn frac_dispersion_eigenfunction_and_dc() {
        let grid = Grid1D::new(128, 4.0).unwrap();
        let xi1 = grid.wavenumbers()[5];
        let f = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        let g = frac_dispersion(&f);
        for (a, b) in g.samples().iter().zip(f.samples()) {
            assert_relative_eq!(*a, xi1 * b, max_relative = 1e-10, epsilon = 1e-10);
        }
        let c = RealField::from_fn(&grid, |_| 2.0);
        assert!(frac_dispersion(&c).sup_norm() < 1e-12);
    }

    #[test]
    fn closed_form_soliton_identity() {
        // (1 + |D|) f = f^2 for f = 2/(1+y^2), the known p = 2 profile.
        let grid = Grid1D::new(4096, 400.0).unwrap();
        let f = RealField::from_fn(&grid, |y| 2.0 / (1.0 + y * y));
        let mut lhs = frac_dispersion(&f);
        lhs.add_scaled(1.0, &f);
        let mut err = 0.0f64;
        for (l, v) in lhs.samples().iter().zip(f.samples()) {
            err = err.max((l - v * v).abs());
        }
        assert!(err <= 1e-3, "identity residual {err}");
    }

    #[test]
    fn hilbert_shifts_cosine_to_sine() {
        let grid = Grid1D::new(128, 4.0).unwrap();
        let xi1 = grid.wavenumbers()[7];
        let f = RealField::from_fn(&grid, |y| (xi1 * y).cos());
        let hf = hilbert_transform(&f);
        let expect = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        for (a, b) in hf.samples().iter().zip(expect.samples()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn hilbert_squared_negates_mean_free_part() {
        let grid = Grid1D::new(256, 10.0).unwrap();
        let mut f = smooth_random(&grid, 11);
        let mean = integral(&f) / (2.0 * grid.half_length());
        for v in f.samples_mut() {
            *v -= mean;
        }
        let hh = hilbert_transform(&hilbert_transform(&f));
        for (a, b) in hh.samples().iter().zip(f.samples()) {
            assert_relative_eq!(*a, -b, max_relative = 1e-9, epsilon = 1e-11);
        }
    }

    #[test]
    fn derivative_of_hilbert_is_frac_dispersion() {
        let grid = Grid1D::new(256, 10.0).unwrap();
        let f = smooth_random(&grid, 13);
        let a = derivative(&hilbert_transform(&f));
        let b = frac_dispersion(&f);
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_relative_eq!(x, y, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn inner_product_orthogonality_and_mismatch() {
        let grid = Grid1D::new(128, 4.0).unwrap();
        let xi1 = grid.wavenumbers()[3];
        let s = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        let c = RealField::from_fn(&grid, |y| (xi1 * y).cos());
        assert!(inner_product(&s, &c).unwrap().abs() < 1e-12);
        let other = Grid1D::new(128, 5.0).unwrap();
        let g = RealField::zeros(&other);
        assert!(matches!(inner_product(&s, &g), Err(FourierError::GridMismatch)));
    }

    #[test]
    fn soliton_mass_quadrature() {
        let grid = Grid1D::new(8192, 400.0).unwrap();
        let q = RealField::from_fn(&grid, |y| 2.0 / (1.0 + y * y));
        let m = inner_product(&q, &q).unwrap();
        assert_relative_eq!(m, 2.0 * std::f64::consts::PI, epsilon = 1e-3);
    }

    #[test]
    fn sobolev_norm_closed_forms() {
        let grid = Grid1D::new(128, 6.0).unwrap();
        let domain = 2.0 * grid.half_length();
        let c = RealField::from_fn(&grid, |_| 1.7);
        assert_relative_eq!(sobolev_half_norm(&c), 1.7 * domain.sqrt(), max_relative = 1e-12);
        let xi1 = grid.wavenumbers()[4];
        let s = RealField::from_fn(&grid, |y| (xi1 * y).sin());
        assert_relative_eq!(
            sobolev_half_norm(&s),
            ((1.0 + xi1) * domain / 2.0).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn multiplier_matches_dense_operator() {
        // |D| via FFT against the explicit circulant kernel at n = 64.
        let n = 64;
        let grid = Grid1D::new(n, 3.0).unwrap();
        let f = smooth_random(&grid, 17);
        let fast = frac_dispersion(&f);
        // Dense row: d_m = (1/n) sum_k |xi_k| exp(2 pi i k m / n), real by symmetry.
        let mut kernel = vec![0.0f64; n];
        for (m, km) in kernel.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &xi) in grid.wavenumbers().iter().enumerate() {
                let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                acc += xi.abs() * (2.0 * std::f64::consts::PI * k * m as f64 / n as f64).cos();
            }
            *km = acc / n as f64;
        }
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += kernel[(n + j - l) % n] * f.samples()[l];
            }
            assert_relative_eq!(acc, fast.samples()[j], max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn bad_symbol_is_rejected() {
        let grid = Grid1D::new(64, 2.0).unwrap();
        let f = RealField::from_fn(&grid, |y| y.cos());
        // sgn(xi) alone (without the i) is odd and real: not Hermitian.
        let r = apply_multiplier(&f, |xi| Complex::new(xi.signum(), 0.0));
        assert!(matches!(r, Err(FourierError::NonRealOutput { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let grid = Grid1D::new(64, 2.0).unwrap();
        let f = smooth_random(&grid, 23);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let back = read_field_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.grid().len(), 64);
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert_relative_eq!(a, b, max_relative = 1e-15, epsilon = 1e-300);
        }
    }

    #[test]
    fn index_of_wraps() {
        let grid = Grid1D::new(64, 2.0).unwrap();
        assert_eq!(grid.index_of(-2.0), 0);
        assert_eq!(grid.index_of(0.0), 32);
        assert_eq!(grid.index_of(2.0), 0); // right endpoint wraps to the left
        let y5 = grid.points()[5];
        assert_eq!(grid.index_of(y5 + 0.4 * grid.spacing()), 5);
    }

    #[test]
    fn translate_by_grid_multiple_rotates_samples() {
        let grid = Grid1D::new(128, 8.0).unwrap();
        let f = smooth_random(&grid, 31);
        let m = 17usize;
        let shifted = translate(&f, m as f64 * grid.spacing()).unwrap();
        for j in 0..128 {
            let src = (j + 128 - m) % 128;
            assert_relative_eq!(
                shifted.samples()[j],
                f.samples()[src],
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn translate_off_grid_matches_closed_form() {
        let grid = Grid1D::new(512, 20.0).unwrap();
        let f = RealField::from_fn(&grid, |y| (-y * y).exp());
        let s = 0.37; // deliberately not a multiple of the spacing
        let shifted = translate(&f, s).unwrap();
        for (&y, &v) in grid.points().iter().zip(shifted.samples()) {
            let want = (-(y - s) * (y - s)).exp();
            assert!((v - want).abs() <= 1e-10, "at y={y}: {v} vs {want}");
        }
        let back = translate(&shifted, -s).unwrap();
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
