//! Woodward auto-ambiguity functions and the `K x K` cross-ambiguity matrix.
//!
//! For sampled waveforms the ambiguity function between `u` and `v` is
//!
//! ```text
//! X(lag, f) = sum_n u[n] conj(v[n - lag]) exp(j 2π f n / f_s) / f_s
//! ```
//!
//! with time measured from the start of the pulse. Delays live on the sample
//! grid; each Doppler bin is evaluated with one FFT correlation.

use std::sync::Arc;

use ndarray::{s, Array2, Array4, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveforms::WaveformSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    Delay,
    Doppler,
    Angle,
}

impl AxisKind {
    pub fn unit(self) -> &'static str {
        match self {
            AxisKind::Delay => "s",
            AxisKind::Doppler => "Hz",
            AxisKind::Angle => "rad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    WoodwardEntry,
    TbAf,
    MimoAf,
    PaAf,
    SquareSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    UnitPeak,
}

/// Real-valued surface sampled over two axes. `values[[i, j]]` belongs to
/// `(axis1[i], axis2[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AfGrid {
    pub axis1: Vec<f64>,
    pub axis1_kind: AxisKind,
    pub axis2: Vec<f64>,
    pub axis2_kind: AxisKind,
    pub values: Array2<f64>,
    pub kind: SurfaceKind,
    pub normalization: Normalization,
}

impl AfGrid {
    pub fn new(
        axis1: Vec<f64>,
        axis1_kind: AxisKind,
        axis2: Vec<f64>,
        axis2_kind: AxisKind,
        values: Array2<f64>,
        kind: SurfaceKind,
    ) -> Result<Self> {
        check_axis(&axis1, "axis1")?;
        check_axis(&axis2, "axis2")?;
        if values.dim() != (axis1.len(), axis2.len()) {
            return Err(Error::param(format!(
                "grid values {:?} do not match axes ({}, {})",
                values.dim(),
                axis1.len(),
                axis2.len()
            )));
        }
        Ok(AfGrid {
            axis1,
            axis1_kind,
            axis2,
            axis2_kind,
            values,
            kind,
            normalization: Normalization::Raw,
        })
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Index of the largest value; ties go to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for ((i, j), &v) in self.values.indexed_iter() {
            if v > best_v {
                best_v = v;
                best = (i, j);
            }
        }
        best
    }

    /// Rescales so that the largest magnitude is exactly one.
    pub fn normalize_unit_peak(&mut self) -> Result<()> {
        let (i, j) = self.argmax();
        let peak = self.values[[i, j]];
        if !(peak > 0.0) {
            return Err(Error::param("cannot normalize a surface without a positive peak"));
        }
        self.values.mapv_inplace(|v| v / peak);
        self.values[[i, j]] = 1.0;
        self.normalization = Normalization::UnitPeak;
        Ok(())
    }

    pub fn unit_peak(mut self) -> Result<Self> {
        self.normalize_unit_peak()?;
        Ok(self)
    }

    pub fn step1(&self) -> f64 {
        axis_step(&self.axis1)
    }

    pub fn step2(&self) -> f64 {
        axis_step(&self.axis2)
    }

    pub fn cell_area(&self) -> f64 {
        self.step1() * self.step2()
    }
}

fn axis_step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

pub(crate) fn check_axis(axis: &[f64], name: &str) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::param(format!("{name} must not be empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(format!("{name} must be finite")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced points covering `[-span, span]`.
pub fn symmetric_axis(span: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
        .collect()
}

/// Integer lags covering `[-span, span]` seconds on the sample grid.
pub fn lag_axis(span: f64, sample_rate: f64) -> Vec<i64> {
    let max = (span * sample_rate).round() as i64;
    (-max..=max).collect()
}

/// `n` Doppler bins spanning one full period `[-f_s/2, f_s/2)`.
pub fn full_period_doppler_axis(sample_rate: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -sample_rate / 2.0 + sample_rate * i as f64 / n as f64)
        .collect()
}

/// Complex-valued grid over sample lags and Doppler bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub lags: Vec<i64>,
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
    pub values: Array2<Complex64>,
}

impl ComplexGrid {
    /// `|X|^2` as a real grid over delay and Doppler.
    pub fn power(&self, kind: SurfaceKind) -> Result<AfGrid> {
        AfGrid::new(
            self.delays.clone(),
            AxisKind::Delay,
            self.dopplers.clone(),
            AxisKind::Doppler,
            self.values.mapv(|z| z.norm_sqr()),
            kind,
        )
    }
}

fn check_lags(lags: &[i64]) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::param("delay axis must not be empty"));
    }
    if lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("delay axis must be strictly increasing"));
    }
    Ok(())
}

struct Correlator {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Correlator {
    fn new(len: usize) -> Self {
        let n = (2 * len).next_power_of_two();
        let mut planner = FftPlanner::new();
        Correlator {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn spectrum(&self, x: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, v) in buf.iter_mut().zip(x) {
            *b = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Writes `sum_n a[n] conj(b[n - lag]) * scale` for every requested lag.
    fn correlate(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        len: usize,
        lags: &[i64],
        scale: f64,
        out: &mut [Complex64],
    ) {
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
        self.inv.process(&mut buf);
        let norm = scale / self.n as f64;
        for (o, &lag) in out.iter_mut().zip(lags) {
            *o = if lag.unsigned_abs() as usize >= len {
                Complex64::new(0.0, 0.0)
            } else {
                buf[lag.rem_euclid(self.n as i64) as usize] * norm
            };
        }
    }
}

fn modulate<'a>(u: ArrayView1<'a, Complex64>, doppler: f64, sample_rate: f64) -> impl Iterator<Item = Complex64> + 'a {
    let w = 2.0 * std::f64::consts::PI * doppler / sample_rate;
    u.into_iter()
        .enumerate()
        .map(move |(n, x)| *x * Complex64::from_polar(1.0, w * n as f64))
}

/// Woodward ambiguity function of a single sampled waveform.
pub fn woodward(
    u: ArrayView1<Complex64>,
    sample_rate: f64,
    lags: &[i64],
    dopplers: &[f64],
) -> Result<ComplexGrid> {
    cross_af(u, u, sample_rate, lags, dopplers)
}

/// Cross-ambiguity function of `u` against `v` (both sampled at `sample_rate`).
pub fn cross_af(
    u: ArrayView1<Complex64>,
    v: ArrayView1<Complex64>,
    sample_rate: f64,
    lags: &[i64],
    dopplers: &[f64],
) -> Result<ComplexGrid> {
    check_lags(lags)?;
    check_axis(dopplers, "Doppler axis")?;
    if u.len() != v.len() {
        return Err(Error::param("waveforms must have equal length"));
    }
    let len = u.len();
    let corr = Correlator::new(len);
    let vs = corr.spectrum(v.iter().copied());
    let columns: Vec<Vec<Complex64>> = dopplers
        .par_iter()
        .map(|&f| {
            let us = corr.spectrum(modulate(u, f, sample_rate));
            let mut col = vec![Complex64::new(0.0, 0.0); lags.len()];
            corr.correlate(&us, &vs, len, lags, 1.0 / sample_rate, &mut col);
            col
        })
        .collect();
    let values = Array2::from_shape_fn((lags.len(), dopplers.len()), |(i, j)| columns[j][i]);
    Ok(ComplexGrid {
        lags: lags.to_vec(),
        delays: lags.iter().map(|&l| l as f64 / sample_rate).collect(),
        dopplers: dopplers.to_vec(),
        values,
    })
}

/// Cross-ambiguity matrices of a waveform set on a shared delay-Doppler grid.
///
/// Entry `(j, k)` correlates waveform `j` (Doppler-modulated) against the
/// delayed waveform `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAfStack {
    pub lags: Vec<i64>,
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
    /// Indexed `[delay, doppler, j, k]`.
    data: Array4<Complex64>,
}

impl CrossAfStack {
    pub fn from_parts(lags: Vec<i64>, dopplers: Vec<f64>, sample_rate: f64, data: Array4<Complex64>) -> Result<Self> {
        let k = data.dim().2;
        if data.dim() != (lags.len(), dopplers.len(), k, k) {
            return Err(Error::param(format!(
                "stack data {:?} does not match {} lags and {} Dopplers",
                data.dim(),
                lags.len(),
                dopplers.len()
            )));
        }
        let delays = lags.iter().map(|&l| l as f64 / sample_rate).collect();
        Ok(CrossAfStack { lags, delays, dopplers, data })
    }

    /// Raw storage indexed `[delay, doppler, j, k]`.
    pub fn data(&self) -> &Array4<Complex64> {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.dim().2
    }

    /// The `K x K` matrix at grid node `(delay index, Doppler index)`.
    pub fn matrix(&self, di: usize, fi: usize) -> ArrayView2<'_, Complex64> {
        self.data.slice(s![di, fi, .., ..])
    }

    /// Entry `(j, k)` over the whole grid.
    pub fn entry(&self, j: usize, k: usize) -> Array2<Complex64> {
        self.data.slice(s![.., .., j, k]).to_owned()
    }

    pub fn entry_grid(&self, j: usize, k: usize) -> ComplexGrid {
        ComplexGrid {
            lags: self.lags.clone(),
            delays: self.delays.clone(),
            dopplers: self.dopplers.clone(),
            values: self.entry(j, k),
        }
    }

    pub fn delay_index(&self, delay: f64) -> Option<usize> {
        node_index(&self.delays, delay)
    }

    pub fn doppler_index(&self, doppler: f64) -> Option<usize> {
        node_index(&self.dopplers, doppler)
    }
}

fn node_index(axis: &[f64], x: f64) -> Option<usize> {
    let tol = 1e-9 * axis_step(axis).abs().max(f64::MIN_POSITIVE);
    axis.iter().position(|&a| (a - x).abs() <= tol)
}

pub fn cross_af_matrix(ws: &WaveformSet, lags: &[i64], dopplers: &[f64]) -> Result<CrossAfStack> {
    check_lags(lags)?;
    check_axis(dopplers, "Doppler axis")?;
    let k = ws.count();
    let len = ws.len();
    let fs = ws.sample_rate();
    let corr = Correlator::new(len);
    let spectra: Vec<Vec<Complex64>> = (0..k)
        .map(|i| corr.spectrum(ws.row(i).iter().copied()))
        .collect();
    let per_doppler: Vec<Vec<Complex64>> = dopplers
        .par_iter()
        .map(|&f| {
            let mut out = vec![Complex64::new(0.0, 0.0); k * k * lags.len()];
            for j in 0..k {
                let mj = corr.spectrum(modulate(ws.row(j), f, fs));
                for kk in 0..k {
                    let start = (j * k + kk) * lags.len();
                    corr.correlate(
                        &mj,
                        &spectra[kk],
                        len,
                        lags,
                        1.0 / fs,
                        &mut out[start..start + lags.len()],
                    );
                }
            }
            out
        })
        .collect();
    let nd = lags.len();
    let data = Array4::from_shape_fn((nd, dopplers.len(), k, k), |(di, fi, j, kk)| {
        per_doppler[fi][(j * k + kk) * nd + di]
    });
    Ok(CrossAfStack {
        lags: lags.to_vec(),
        delays: lags.iter().map(|&l| l as f64 / fs).collect(),
        dopplers: dopplers.to_vec(),
        data,
    })
}

/// Direct evaluation of the `K x K` cross-ambiguity matrix at one lag and
/// Doppler.
pub fn cross_af_point(ws: &WaveformSet, lag: i64, doppler: f64) -> Array2<Complex64> {
    let k = ws.count();
    let len = ws.len() as i64;
    let fs = ws.sample_rate();
    let w = 2.0 * std::f64::consts::PI * doppler / fs;
    let lo = lag.max(0);
    let hi = (len + lag).min(len);
    let phasors: Vec<Complex64> = (lo..hi)
        .map(|n| Complex64::from_polar(1.0, w * n as f64))
        .collect();
    let x = ws.samples();
    Array2::from_shape_fn((k, k), |(j, kk)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, n) in phasors.iter().zip(lo..hi) {
            acc += x[[j, n as usize]] * x[[kk, (n - lag) as usize]].conj() * p;
        }
        acc / fs
    })
}

/// Bilinear interpolation of every stack entry at `(delay, doppler)`.
pub fn eval_at(stack: &CrossAfStack, delay: f64, doppler: f64) -> Result<Array2<Complex64>> {
    let (d0, d1, wd) = bracket(&stack.delays, delay, "delay")?;
    let (f0, f1, wf) = bracket(&stack.dopplers, doppler, "Doppler")?;
    let m00 = stack.matrix(d0, f0);
    let m01 = stack.matrix(d0, f1);
    let m10 = stack.matrix(d1, f0);
    let m11 = stack.matrix(d1, f1);
    Ok(Array2::from_shape_fn(m00.dim(), |ix| {
        m00[ix] * ((1.0 - wd) * (1.0 - wf))
            + m01[ix] * ((1.0 - wd) * wf)
            + m10[ix] * (wd * (1.0 - wf))
            + m11[ix] * (wd * wf)
    }))
}

fn bracket(axis: &[f64], x: f64, name: &str) -> Result<(usize, usize, f64)> {
    if let Some(i) = node_index(axis, x) {
        return Ok((i, i, 0.0));
    }
    let first = axis[0];
    let last = axis[axis.len() - 1];
    if !(x >= first && x <= last) {
        return Err(Error::range(format!(
            "{name} {x} outside the grid [{first}, {last}]"
        )));
    }
    let hi = axis.partition_point(|&a| a <= x).min(axis.len() - 1);
    let lo = hi - 1;
    Ok((lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo])))
}

/// Riemann sum of `|X|^2` over the grid.
pub fn grid_volume(grid: &ComplexGrid) -> f64 {
    let dt = axis_step(&grid.delays);
    let df = axis_step(&grid.dopplers);
    grid.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt * df
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::{gen_gaussian, gen_polyphase};

    /// Straight double loop over samples; no FFT.
    fn brute(u: ArrayView1<Complex64>, v: ArrayView1<Complex64>, fs: f64, lag: i64, f: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..u.len() as i64 {
            let m = n - lag;
            if m < 0 || m >= v.len() as i64 {
                continue;
            }
            let t = n as f64 / fs;
            acc += u[n as usize]
                * v[m as usize].conj()
                * Complex64::new(0.0, 2.0 * std::f64::consts::PI * f * t).exp();
        }
        acc / fs
    }

    #[test]
    fn origin_is_unit_for_unit_energy() {
        let ws = gen_gaussian(1, 100, 1e-5, 3).unwrap();
        let g = woodward(ws.row(0), ws.sample_rate(), &[-1, 0, 1], &[0.0]).unwrap();
        assert!((g.values[[1, 0]] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn magnitude_bounded_by_origin() {
        let ws = gen_polyphase(1, 32, 1e-5, 2).unwrap();
        let lags: Vec<i64> = (-63..=63).collect();
        let dop = symmetric_axis(3e5, 41);
        let g = woodward(ws.row(0), ws.sample_rate(), &lags, &dop).unwrap();
        for z in g.values.iter() {
            assert!(z.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rectangle_autocorrelation_is_a_triangle() {
        let len = 200;
        let tp = 1e-3;
        let samples = Array2::from_elem((1, len), Complex64::new(1.0, 0.0));
        let ws = WaveformSet::normalized(samples, len as f64 / tp, tp, 1e5, 1.0).unwrap();
        let g = woodward(ws.row(0), ws.sample_rate(), &[100], &[0.0]).unwrap();
        assert!((g.values[[0, 0]].norm() - 0.5).abs() < 0.01);
    }

    #[test]
    fn fft_matches_brute_force() {
        let ws = gen_polyphase(2, 64, 1e-5, 1).unwrap();
        let fs = ws.sample_rate();
        let lags: Vec<i64> = (-70..=70).step_by(3).collect();
        let dop = symmetric_axis(4e5, 17);
        let stack = cross_af_matrix(&ws, &lags, &dop).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                for (di, &lag) in lags.iter().enumerate() {
                    for (fi, &f) in dop.iter().enumerate() {
                        let want = brute(ws.row(j), ws.row(k), fs, lag, f);
                        let got = stack.matrix(di, fi)[[j, k]];
                        assert!((got - want).norm() < 1e-9, "({j},{k}) lag {lag} f {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn point_evaluation_matches_brute_force() {
        let ws = gen_gaussian(3, 50, 1e-5, 11).unwrap();
        for (lag, f) in [(0, 0.0), (-7, 1.3e5), (12, -4.4e4), (49, 2e5), (-49, 0.0)] {
            let m = cross_af_point(&ws, lag, f);
            for j in 0..3 {
                for k in 0..3 {
                    let want = brute(ws.row(j), ws.row(k), ws.sample_rate(), lag, f);
                    assert!((m[[j, k]] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_waveform_stack_equals_woodward() {
        let ws = gen_polyphase(1, 16, 1e-6, 2).unwrap();
        let lags: Vec<i64> = (-31..=31).collect();
        let dop = symmetric_axis(2e6, 9);
        let stack = cross_af_matrix(&ws, &lags, &dop).unwrap();
        let w = woodward(ws.row(0), ws.sample_rate(), &lags, &dop).unwrap();
        assert_eq!(stack.entry(0, 0), w.values);
    }

    #[test]
    fn orthonormal_set_is_identity_at_origin() {
        let ws = gen_polyphase(4, 64, 1e-5, 1).unwrap();
        let stack = cross_af_matrix(&ws, &[-1, 0, 1], &[-1e3, 0.0, 1e3]).unwrap();
        let m = eval_at(&stack, 0.0, 0.0).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((m[[j, k]] - Complex64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn eval_at_nodes_is_exact_and_out_of_range_errors() {
        let ws = gen_gaussian(2, 40, 1e-5, 5).unwrap();
        let lags: Vec<i64> = (-5..=5).collect();
        let dop = symmetric_axis(1e5, 5);
        let stack = cross_af_matrix(&ws, &lags, &dop).unwrap();
        let m = eval_at(&stack, stack.delays[7], dop[1]).unwrap();
        assert_eq!(m, stack.matrix(7, 1).to_owned());
        assert!(matches!(eval_at(&stack, 1.0, 0.0), Err(Error::Range(_))));
        assert!(matches!(eval_at(&stack, 0.0, 2e5), Err(Error::Range(_))));
    }

    #[test]
    fn interpolated_midpoint_is_close_to_direct_value() {
        let ws = gen_polyphase(2, 64, 1e-4, 1).unwrap();
        let lags: Vec<i64> = (-4..=4).collect();
        // Doppler spacing much finer than 1/T_p keeps curvature small
        let dop = symmetric_axis(1e3, 21);
        let stack = cross_af_matrix(&ws, &lags, &dop).unwrap();
        let mid = (dop[12] + dop[13]) / 2.0;
        let got = eval_at(&stack, 0.0, mid).unwrap();
        let want = cross_af_point(&ws, 0, mid);
        // bilinear error bound: h^2/8 * max|f''|, with |f''| <= (2π T_p)^2 for unit energy
        let h = dop[1] - dop[0];
        let bound = h * h / 8.0 * (2.0 * std::f64::consts::PI * ws.pulse_width()).powi(2);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).norm() <= bound, "{} > {bound}", (a - b).norm());
        }
    }

    #[test]
    fn delay_beyond_support_is_zero() {
        let ws = gen_gaussian(1, 20, 1e-5, 1).unwrap();
        let g = woodward(ws.row(0), ws.sample_rate(), &[-25, -20, 20, 25], &[0.0]).unwrap();
        assert!(g.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn woodward_volume_over_full_support_is_one() {
        let ws = gen_polyphase(1, 64, 1e-5, 1).unwrap();
        let len = ws.len() as i64;
        let lags: Vec<i64> = (-(len - 1)..len).collect();
        let dop = full_period_doppler_axis(ws.sample_rate(), 128);
        let g = woodward(ws.row(0), ws.sample_rate(), &lags, &dop).unwrap();
        assert!((grid_volume(&g) - 1.0).abs() < 0.02);
    }

    #[test]
    fn magnitude_symmetry() {
        let ws = gen_gaussian(1, 64, 1e-5, 8).unwrap();
        let lags: Vec<i64> = (-20..=20).collect();
        let dop = symmetric_axis(2e5, 11);
        let g = woodward(ws.row(0), ws.sample_rate(), &lags, &dop).unwrap();
        let (nd, nf) = g.values.dim();
        for i in 0..nd {
            for j in 0..nf {
                let a = g.values[[i, j]].norm();
                let b = g.values[[nd - 1 - i, nf - 1 - j]].norm();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
