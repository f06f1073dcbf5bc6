//! Convolution quadrature: discrete causal convolution with an operator
//! known only through its Laplace symbol, via a scaled discrete Fourier
//! transform along a circle of radius `lambda < 1`.
//!
//! With `N` steps and samples `g_0..g_N`, outputs `y_1..y_N` come from a
//! length `N` circulant acting on `g_1..g_N`; the contribution of `g_0` is
//! folded into the same transform and corrected with one extra symbol
//! evaluation at `delta(0)/dt`, needed only when `g_0` is not negligible.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{FsiError, Result};
use crate::model::{ComplexFrequency, TimeSignal};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Linear multistep method defining the discrete symbol `delta(z) / dt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    Bdf2,
}

impl Scheme {
    pub fn delta(&self, z: C) -> C {
        match self {
            Scheme::BackwardEuler => 1.0 - z,
            Scheme::Bdf2 => 1.5 - 2.0 * z + 0.5 * z * z,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Scheme::BackwardEuler => 1,
            Scheme::Bdf2 => 2,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bdf2" => Ok(Scheme::Bdf2),
            "euler" | "backward_euler" | "bdf1" => Ok(Scheme::BackwardEuler),
            other => Err(FsiError::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CQGrid {
    dt: f64,
    n: usize,
    scheme: Scheme,
    radius: f64,
}

impl CQGrid {
    /// Aliasing target `lambda^N`.
    pub const DEFAULT_EPSILON: f64 = 1e-10;

    pub fn new(horizon: f64, n: usize, scheme: Scheme) -> Result<Self> {
        Self::with_epsilon(horizon, n, scheme, Self::DEFAULT_EPSILON)
    }

    pub fn with_epsilon(horizon: f64, n: usize, scheme: Scheme, epsilon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FsiError::Grid(format!("horizon must be positive, got {horizon}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(FsiError::Grid(format!("step count must be a power of two >= 2, got {n}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(FsiError::Grid(format!("aliasing target must lie in (0, 1), got {epsilon}")));
        }
        Ok(CQGrid {
            dt: horizon / n as f64,
            n,
            scheme,
            radius: epsilon.powf(1.0 / n as f64),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n
    }
    pub fn horizon(&self) -> f64 {
        self.dt * self.n as f64
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn root(&self, l: usize) -> C {
        C::from_polar(1.0, -2.0 * PI * l as f64 / self.n as f64)
    }

    /// `s_l = delta(lambda zeta^l) / dt` with `zeta = e^{-2 pi i / N}`.
    pub fn frequency(&self, l: usize) -> Result<ComplexFrequency> {
        let s = self.scheme.delta(self.root(l) * self.radius) / self.dt;
        ComplexFrequency::new(s).map_err(|_| FsiError::Grid(format!("frequency {l} = {s} is not in the right half-plane")))
    }

    /// The `N/2 + 1` frequencies that are solved for; the rest are their
    /// conjugates.
    pub fn frequencies(&self) -> Result<Vec<ComplexFrequency>> {
        (0..=self.n / 2).map(|l| self.frequency(l)).collect()
    }

    /// `delta(0) / dt`, the symbol value giving the first weight.
    pub fn start_frequency(&self) -> ComplexFrequency {
        ComplexFrequency::new(self.scheme.delta(ZERO) / self.dt).expect("delta(0) is positive")
    }
}

/// Frequency response acting on data vectors. Implementations must be
/// conjugate symmetric, `F(conj s) conj(d) = conj(F(s) d)`, and safe to call
/// concurrently at distinct frequencies.
pub trait TransferMap: Sync {
    fn input_width(&self) -> usize;
    fn output_width(&self) -> usize;
    fn apply(&self, s: &ComplexFrequency, data: &[C]) -> Result<Vec<C>>;
}

/// Scalar symbol applied to each component.
pub struct ScalarTransfer<F> {
    symbol: F,
    width: usize,
}

impl<F: Fn(C) -> C + Sync> ScalarTransfer<F> {
    pub fn new(width: usize, symbol: F) -> Self {
        ScalarTransfer { symbol, width }
    }
}

impl<F: Fn(C) -> C + Sync> TransferMap for ScalarTransfer<F> {
    fn input_width(&self) -> usize {
        self.width
    }
    fn output_width(&self) -> usize {
        self.width
    }
    fn apply(&self, s: &ComplexFrequency, data: &[C]) -> Result<Vec<C>> {
        let f = (self.symbol)(s.s());
        Ok(data.iter().map(|d| f * d).collect())
    }
}

/// Transformed data at frequencies `l = 0..=N/2`, plus the first sample
/// (or its image) when it is not negligible.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Vec<C>>,
    pub start: Option<Vec<C>>,
}

impl Spectrum {
    pub fn width(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Number of transfer evaluations needed to map this spectrum.
    pub fn evaluations(&self) -> usize {
        self.values.len() + usize::from(self.start.is_some())
    }
}

/// Relative size below which the first sample is treated as zero.
const START_CUTOFF: f64 = 1e-14;

fn check_signal(grid: &CQGrid, g: &TimeSignal) -> Result<()> {
    if g.n_steps() != grid.n_steps() || (g.dt() - grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(FsiError::Grid(format!(
            "signal has {} steps of {}, grid has {} steps of {}",
            g.n_steps(),
            g.dt(),
            grid.n_steps(),
            grid.dt()
        )));
    }
    Ok(())
}

/// Scaled transform of real samples `g_0..g_N`.
pub fn forward(grid: &CQGrid, g: &TimeSignal) -> Result<Spectrum> {
    check_signal(grid, g)?;
    let n = grid.n;
    let width = g.width();
    let lam = grid.radius;
    let first = g.row(0);
    let peak = g.max_abs();
    let has_start = first.iter().any(|v| v.abs() > START_CUTOFF * peak);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut values = vec![vec![ZERO; width]; n / 2 + 1];
    let mut buf = vec![ZERO; n];
    for k in 0..width {
        let mut scale = 1.0;
        for (m, b) in buf.iter_mut().enumerate() {
            *b = C::new(scale * g.row(m + 1)[k], 0.0);
            scale *= lam;
        }
        fft.process(&mut buf);
        for (l, out) in values.iter_mut().enumerate() {
            out[k] = buf[l];
            if has_start {
                out[k] += grid.root(l).conj() * (first[k] / lam);
            }
        }
    }
    Ok(Spectrum {
        values,
        start: has_start.then(|| first.iter().map(|v| C::new(*v, 0.0)).collect()),
    })
}

/// Applies `map` at every frequency (in parallel), attaching the
/// frequency index to failures.
pub fn map_spectrum(grid: &CQGrid, spectrum: &Spectrum, map: &dyn TransferMap) -> Result<Spectrum> {
    let freqs = grid.frequencies()?;
    if spectrum.values.len() != freqs.len() {
        return Err(FsiError::Grid("spectrum does not match the grid".into()));
    }
    if spectrum.width() != map.input_width() {
        return Err(FsiError::Grid(format!(
            "data width {} does not match transfer input width {}",
            spectrum.width(),
            map.input_width()
        )));
    }
    let values = spectrum
        .values
        .par_iter()
        .zip(freqs.par_iter())
        .enumerate()
        .map(|(l, (d, s))| {
            map.apply(s, d).map_err(|e| FsiError::Transfer {
                index: l,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let start = match &spectrum.start {
        Some(g0) => Some(map.apply(&grid.start_frequency(), g0).map_err(|e| FsiError::Transfer {
            index: grid.n,
            source: Box::new(e),
        })?),
        None => None,
    };
    Ok(Spectrum { values, start })
}

/// Inverse of [`forward`] after mapping.
#[derive(Clone, Debug)]
pub struct InverseResult {
    pub signal: TimeSignal,
    /// Largest imaginary part of the inverse transform relative to its
    /// largest real part, taken before the damping is undone.
    pub imaginary_residue: f64,
}

pub fn inverse(grid: &CQGrid, spectrum: &Spectrum) -> Result<InverseResult> {
    let n = grid.n;
    if spectrum.values.len() != n / 2 + 1 {
        return Err(FsiError::Grid("spectrum does not match the grid".into()));
    }
    let width = spectrum.width();
    let lam = grid.radius;
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = TimeSignal::zeros(grid.dt, n, width);
    if let Some(y0) = &spectrum.start {
        for (k, v) in y0.iter().enumerate() {
            out.row_mut(0)[k] = v.re;
        }
    }
    let mut buf = vec![ZERO; n];
    let (mut max_im, mut max_re) = (0.0f64, 0.0f64);
    for k in 0..width {
        for l in 0..=n / 2 {
            let mut v = spectrum.values[l][k];
            if let Some(y0) = &spectrum.start {
                v -= grid.root(l).conj() * (y0[k] / lam);
            }
            buf[l] = v;
            if l > 0 && l < n - l {
                buf[n - l] = v.conj();
            }
        }
        fft.process(&mut buf);
        // The unscaling below is real, so the imaginary part is measured
        // against the scaled output where round-off is uniform in m.
        for b in &buf {
            max_im = max_im.max(b.im.abs());
            max_re = max_re.max(b.re.abs());
        }
        let mut scale = 1.0 / n as f64;
        for (m, b) in buf.iter().enumerate() {
            out.row_mut(m + 1)[k] = b.re * scale;
            scale /= lam;
        }
    }
    Ok(InverseResult {
        imaginary_residue: if max_re > 0.0 { max_im / max_re } else { max_im },
        signal: out,
    })
}

/// `(a * g)(t_n)` for the operator with symbol `map`.
pub fn cq_convolve(map: &dyn TransferMap, g: &TimeSignal, grid: &CQGrid) -> Result<TimeSignal> {
    let spec = forward(grid, g)?;
    Ok(inverse(grid, &map_spectrum(grid, &spec, map)?)?.signal)
}

/// Options for [`contour_invert`].
#[derive(Clone, Copy, Debug)]
pub struct ContourOptions {
    /// Spacing of the trapezoidal rule in `Im s`.
    pub step: f64,
    /// Truncate once `|F|` stays below this fraction of its peak.
    pub tolerance: f64,
    pub max_samples: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions {
            step: 0.1,
            tolerance: 1e-12,
            max_samples: 50_000_000,
        }
    }
}

/// Inverse Laplace transform of a real-valued causal function on the line
/// `Re s = sigma`, trapezoidal in `Im s`. Test oracle only.
pub fn contour_invert(f: impl Fn(C) -> C, sigma: f64, t: f64, opts: ContourOptions) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(FsiError::Inversion(format!("abscissa must be positive, got {sigma}")));
    }
    let h = opts.step;
    let f0 = f(C::new(sigma, 0.0));
    let mut peak = f0.norm();
    let mut sum = 0.5 * f0.re;
    // Stop after a full oscillation period of samples below tolerance.
    let quiet_needed = ((2.0 * PI / (h * t.abs().max(1e-3))).ceil() as usize).max(16);
    let mut quiet = 0;
    for k in 1..opts.max_samples {
        let w = k as f64 * h;
        let v = f(C::new(sigma, w));
        peak = peak.max(v.norm());
        sum += (C::from_polar(1.0, w * t) * v).re;
        if v.norm() < opts.tolerance * peak {
            quiet += 1;
            if quiet >= quiet_needed {
                return Ok((sigma * t).exp() / PI * h * sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(FsiError::Inversion(format!(
        "transform has not decayed to {} of its peak after {} samples",
        opts.tolerance, opts.max_samples
    )))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(FsiError::Fit("need at least two positive samples".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FsiError::Fit("abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pulse;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn sampled(grid: &CQGrid, f: impl Fn(f64) -> f64) -> TimeSignal {
        TimeSignal::from_fn(grid.dt(), grid.n_steps(), 1, |t, out| out[0] = f(t))
    }

    fn max_error(a: &TimeSignal, f: impl Fn(f64) -> f64) -> f64 {
        (0..=a.n_steps()).map(|n| (a.row(n)[0] - f(a.time(n))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn every_frequency_is_in_the_right_half_plane() {
        for scheme in [Scheme::Bdf2, Scheme::BackwardEuler] {
            for n in [2, 8, 64, 1024] {
                let grid = CQGrid::new(3.0, n, scheme).unwrap();
                let f = grid.frequencies().unwrap();
                assert_eq!(f.len(), n / 2 + 1);
                assert!(f.iter().all(|s| s.sigma() > 0.0));
                assert!((grid.radius().powi(n as i32) - 1e-10).abs() < 1e-20);
            }
        }
        assert!(CQGrid::new(1.0, 100, Scheme::Bdf2).is_err());
        assert!(CQGrid::new(-1.0, 64, Scheme::Bdf2).is_err());
    }

    #[test]
    fn identity_is_exact() {
        let grid = CQGrid::new(4.0, 128, Scheme::Bdf2).unwrap();
        let p = Pulse::gaussian_sine(2.0, 0.3, 5.0);
        let g = sampled(&grid, |t| p.value(t));
        let y = cq_convolve(&ScalarTransfer::new(1, |_| C::new(1.0, 0.0)), &g, &grid).unwrap();
        let err = max_error(&y, |t| p.value(t));
        assert!(err <= 1e-10 * g.max_abs(), "{err}");
        // Nonzero first sample exercises the start correction. Content at
        // t = 0 meets the full round-off amplification lambda^-N.
        let g = sampled(&grid, |t| (-t).exp());
        let y = cq_convolve(&ScalarTransfer::new(1, |_| C::new(1.0, 0.0)), &g, &grid).unwrap();
        for n in 0..=grid.n_steps() {
            let floor = 1e-14 * grid.radius().powi(-(n as i32));
            assert!((y.row(n)[0] - (-y.time(n)).exp()).abs() <= floor.max(1e-15), "{n}");
        }
    }

    #[test]
    fn heaviside_integration_is_first_order() {
        // For the unit step the quadrature sums its weights; the generating
        // function dt / delta gives y_n = t_n + dt/2 + O(3^-n dt) for BDF2.
        let grid = CQGrid::new(1.0, 64, Scheme::Bdf2).unwrap();
        let y = cq_convolve(&ScalarTransfer::new(1, |s| 1.0 / s), &sampled(&grid, |_| 1.0), &grid).unwrap();
        let dt = grid.dt();
        for n in 10..=64 {
            let expected = y.time(n) + 0.5 * dt;
            assert!((y.row(n)[0] - expected).abs() < 1e-3 * dt, "{n}");
        }
    }

    #[test]
    fn smooth_data_gives_second_order() {
        let ramp = Pulse::SmoothRamp {
            center: 1.0,
            width: 0.15,
            amplitude: 1.0,
        };
        let integral = |t: f64| {
            // Reference by composite Simpson on a fine grid.
            let m = 4000;
            let h = t / m as f64;
            (0..=m)
                .map(|k| {
                    let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    w * ramp.value(k as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let mut errs = Vec::new();
        for n in [64, 128] {
            let grid = CQGrid::new(3.0, n, Scheme::Bdf2).unwrap();
            let y = cq_convolve(&ScalarTransfer::new(1, |s| 1.0 / s), &sampled(&grid, |t| ramp.value(t)), &grid).unwrap();
            errs.push(max_error(&y, integral));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "{order} {errs:?}");

        let p = Pulse::gaussian_sine(1.5, 0.25, 3.0);
        let mut errs = Vec::new();
        for n in [64, 128] {
            let grid = CQGrid::new(4.0, n, Scheme::Bdf2).unwrap();
            let tau = 8.0 * grid.dt();
            let y = cq_convolve(&ScalarTransfer::new(1, move |s| (-s * tau).exp()), &sampled(&grid, |t| p.value(t)), &grid)
                .unwrap();
            errs.push(max_error(&y, |t| p.value(t - tau)));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "{order} {errs:?}");
    }

    #[test]
    fn backward_euler_is_first_order() {
        let p = Pulse::gaussian_sine(1.5, 0.25, 3.0);
        let mut errs = Vec::new();
        for n in [128, 256] {
            let grid = CQGrid::new(4.0, n, Scheme::BackwardEuler).unwrap();
            let tau = 0.5;
            let y = cq_convolve(&ScalarTransfer::new(1, move |s| (-s * tau).exp()), &sampled(&grid, |t| p.value(t)), &grid)
                .unwrap();
            errs.push(max_error(&y, |t| p.value(t - tau)));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((0.8..1.3).contains(&order), "{order}");
    }

    #[test]
    fn causal_and_economical() {
        struct Counting(AtomicUsize);
        impl TransferMap for Counting {
            fn input_width(&self) -> usize {
                1
            }
            fn output_width(&self) -> usize {
                1
            }
            fn apply(&self, s: &ComplexFrequency, d: &[C]) -> Result<Vec<C>> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(vec![d[0] * (-s.s() * 0.3).exp() / (s.s() + 1.0)])
            }
        }
        let grid = CQGrid::new(4.0, 128, Scheme::Bdf2).unwrap();
        let p = Pulse::gaussian_sine(2.0, 0.2, 4.0);
        let g = sampled(&grid, |t| p.value(t));
        let counter = Counting(AtomicUsize::new(0));
        let y = cq_convolve(&counter, &g, &grid).unwrap();
        assert!(counter.0.load(Ordering::SeqCst) <= grid.n_steps() / 2 + 1);
        let onset = p.onset();
        let peak = y.max_abs();
        for n in 0..=grid.n_steps() {
            if y.time(n) < onset {
                assert!(y.row(n)[0].abs() <= 1e-6 * peak);
            }
        }
    }

    #[test]
    fn transfer_failures_carry_the_frequency_index() {
        struct Failing;
        impl TransferMap for Failing {
            fn input_width(&self) -> usize {
                1
            }
            fn output_width(&self) -> usize {
                1
            }
            fn apply(&self, s: &ComplexFrequency, d: &[C]) -> Result<Vec<C>> {
                if s.s().im.abs() > 10.0 {
                    Err(FsiError::Singular("test".into()))
                } else {
                    Ok(d.to_vec())
                }
            }
        }
        let grid = CQGrid::new(1.0, 64, Scheme::Bdf2).unwrap();
        let g = sampled(&grid, |t| t * t);
        match cq_convolve(&Failing, &g, &grid) {
            Err(FsiError::Transfer { index, .. }) => assert!(grid.frequency(index).unwrap().s().im.abs() > 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contour_inversion_of_known_transforms() {
        let opts = ContourOptions::default();
        for &t in &[0.5, 1.0, 1.5, 2.0] {
            for &sigma in &[0.5, 1.0] {
                let a = contour_invert(|s| 1.0 / (s * s), sigma, t, opts).unwrap();
                assert!((a - t).abs() <= 1e-4 * t, "{a} {t}");
                let b = contour_invert(|s| 1.0 / (s * s + 1.0), sigma, t, opts).unwrap();
                assert!((b - t.sin()).abs() <= 1e-4 * t.sin().abs().max(1e-2), "{b}");
            }
        }
        assert!(matches!(
            contour_invert(|_| C::new(1.0, 0.0), 1.0, 1.0, ContourOptions { max_samples: 1000, ..opts }),
            Err(FsiError::Inversion(_))
        ));
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, shift in 0.5f64..2.0) {
            let grid = CQGrid::new(4.0, 64, Scheme::Bdf2).unwrap();
            let p = Pulse::gaussian_sine(shift, 0.3, 2.0);
            let g1 = sampled(&grid, |t| p.value(t));
            let g2 = sampled(&grid, |t| (t * 0.7).sin() * t * t);
            let map = ScalarTransfer::new(1, |s: C| 1.0 / (s * s + 2.0 * s + 5.0));
            let y1 = cq_convolve(&map, &g1, &grid).unwrap();
            let y2 = cq_convolve(&map, &g2, &grid).unwrap();
            let y = cq_convolve(&map, &g1.scaled(a).axpy(b, &g2), &grid).unwrap();
            let expected = y1.scaled(a).axpy(b, &y2);
            // Round-off model: relative to the input size, amplified by
            // lambda^-n at step n.
            let scale = a.abs() * g1.max_abs() + b.abs() * g2.max_abs();
            for n in 0..=64 {
                let floor = 1e-13 * scale * grid.radius().powi(-(n as i32));
                prop_assert!((y.row(n)[0] - expected.row(n)[0]).abs() <= floor);
            }
        }
    }
}
