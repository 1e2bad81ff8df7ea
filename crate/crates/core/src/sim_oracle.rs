//! Brute-force receiver simulation.
//!
//! Every transmit/receive channel is synthesized with its own delay,
//! Doppler and reflection coefficient, passed through a matched-filter bank
//! and coherently summed. Used to check the factored ambiguity function.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::ambiguity::AfGrid;
use crate::error::{Error, Result};
use crate::geometry::{ArrayScenario, TargetParams};
use crate::tb_core::{tb_af_value, TbMatrix};
use crate::waveforms::WaveformSet;
use crate::ambiguity::cross_af_point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub power: f64,
    pub seed: u64,
}

/// Per-channel propagation, indexed `[transmitter, receiver]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub delays: Array2<f64>,
    pub dopplers: Array2<f64>,
    pub alpha: Array2<Complex64>,
    pub noise: Option<Noise>,
}

/// Two-way delays `τ_ref − (u·q_T,m + u·q_R,j)/c` and a common Doppler.
pub fn far_field_delays(
    tx: &[[f64; 3]],
    rx: &[[f64; 3]],
    target: &TargetParams,
    tau_ref: f64,
    speed: f64,
) -> Array2<f64> {
    let u = target.direction;
    let dot = |q: &[f64; 3]| u[0] * q[0] + u[1] * q[1] + u[2] * q[2];
    Array2::from_shape_fn((tx.len(), rx.len()), |(m, j)| {
        tau_ref - (dot(&tx[m]) + dot(&rx[j])) / speed
    })
}

impl ChannelModel {
    pub fn far_field(sc: &ArrayScenario, target: &TargetParams) -> Self {
        let shape = (sc.num_tx(), sc.num_rx());
        ChannelModel {
            delays: far_field_delays(&sc.tx, &sc.rx, target, target.delay, sc.speed),
            dopplers: Array2::from_elem(shape, target.doppler),
            alpha: Array2::from_elem(shape, Complex64::new(1.0, 0.0)),
            noise: None,
        }
    }

    pub fn with_noise(mut self, power: f64, seed: u64) -> Self {
        self.noise = Some(Noise { power, seed });
        self
    }

    fn check(&self, sc: &ArrayScenario) -> Result<()> {
        let shape = (sc.num_tx(), sc.num_rx());
        if self.delays.dim() != shape || self.dopplers.dim() != shape || self.alpha.dim() != shape {
            return Err(Error::param(format!(
                "channel model must be {}x{} (transmitters x receivers)",
                shape.0, shape.1
            )));
        }
        Ok(())
    }
}

fn snap(delay: f64, fs: f64) -> i64 {
    (delay * fs).round() as i64
}

/// Number of record samples needed to hold every delayed pulse.
pub fn required_len(ws: &WaveformSet, ch: &ChannelModel) -> usize {
    let fs = ws.sample_rate();
    let max = ch.delays.iter().map(|&d| snap(d, fs)).max().unwrap_or(0).max(0);
    ws.len() + max as usize
}

/// Baseband records, one row per receive element.
pub fn synthesize_rx(
    sc: &ArrayScenario,
    ws: &WaveformSet,
    c: &TbMatrix,
    ch: &ChannelModel,
    record_len: usize,
) -> Result<Array2<Complex64>> {
    ch.check(sc)?;
    if c.rows() != sc.num_tx() || c.beams() != ws.count() {
        return Err(Error::param("beamspace matrix does not match array and waveforms"));
    }
    let fs = ws.sample_rate();
    let len = ws.len();
    for &d in &ch.delays {
        let s = snap(d, fs);
        if s < 0 || s as usize + len > record_len {
            return Err(Error::param(format!(
                "timeline of {record_len} samples cannot hold a pulse delayed by {d} s"
            )));
        }
    }
    let amp = (ws.energy() / ws.count() as f64).sqrt();
    // transmitted signal of each element: sum_k c_mk φ_k
    let tx = c.c.dot(ws.samples()).mapv(|z| z * amp);
    let fc = sc.carrier;
    let rows: Vec<Vec<Complex64>> = (0..sc.num_rx())
        .into_par_iter()
        .map(|j| {
            let mut r = vec![Complex64::new(0.0, 0.0); record_len];
            for m in 0..sc.num_tx() {
                let tau = ch.delays[[m, j]];
                let f = ch.dopplers[[m, j]];
                let a = ch.alpha[[m, j]];
                let shift = snap(tau, fs) as usize;
                let phase = a * Complex64::from_polar(1.0, -2.0 * PI * tau * (fc + f));
                let w = 2.0 * PI * f / fs;
                for n in 0..len {
                    let t = n + shift;
                    r[t] += phase * tx[[m, n]] * Complex64::from_polar(1.0, w * t as f64);
                }
            }
            r
        })
        .collect();
    let mut out = Array2::from_shape_fn((sc.num_rx(), record_len), |(j, n)| rows[j][n]);
    if let Some(noise) = ch.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let s = (noise.power / 2.0).sqrt();
        for z in out.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(re * s, im * s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankOptions {
    /// Apply the `exp{j2π τ' (f_c + f')}` phase alignment.
    pub coherent: bool,
}

impl Default for BankOptions {
    fn default() -> Self {
        BankOptions { coherent: true }
    }
}

/// Matched-filter outputs `(j, i)` for the hypothesis `Θ'`, filtering
/// waveform `i` at the equivalent phase center of beam `i`.
pub fn matched_bank(
    records: &Array2<Complex64>,
    ws: &WaveformSet,
    sc: &ArrayScenario,
    hypothesis: &TargetParams,
    opts: BankOptions,
) -> Result<Array2<Complex64>> {
    if records.nrows() != sc.num_rx() {
        return Err(Error::param("one record per receive element expected"));
    }
    if sc.num_beams() != ws.count() {
        return Err(Error::param("one equivalent phase center per waveform expected"));
    }
    let fs = ws.sample_rate();
    let dt = 1.0 / fs;
    let len = ws.len();
    let taus = far_field_delays(&sc.phase_centers, &sc.rx, hypothesis, hypothesis.delay, sc.speed);
    let f = hypothesis.doppler;
    let fc = sc.carrier;
    let w = 2.0 * PI * f / fs;
    let out: Vec<Complex64> = (0..sc.num_rx() * ws.count())
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / ws.count(), idx % ws.count());
            let tau = taus[[i, j]];
            let shift = snap(tau, fs);
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..len {
                let t = n as i64 + shift;
                if t < 0 || t as usize >= records.ncols() {
                    continue;
                }
                acc += records[[j, t as usize]]
                    * ws.samples()[[i, n]].conj()
                    * Complex64::from_polar(1.0, -w * t as f64);
            }
            let acc = acc * dt;
            if opts.coherent {
                acc * Complex64::from_polar(1.0, 2.0 * PI * tau * (fc + f))
            } else {
                acc
            }
        })
        .collect();
    Ok(Array2::from_shape_vec((sc.num_rx(), ws.count()), out).expect("bank shape"))
}

/// `|Σ_j Σ_i r_ji|²`.
pub fn af_from_sum(outputs: &Array2<Complex64>) -> f64 {
    outputs.iter().sum::<Complex64>().norm_sqr()
}

#[derive(Debug, Clone, Serialize)]
pub struct OraclePoint {
    pub delay: f64,
    pub doppler: f64,
    pub theta: f64,
    pub factored: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub points: Vec<OraclePoint>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the factored surface with the simulated coherent sum at the
/// given `(lag, Doppler mismatch, hypothesis angle)` points. Relative errors
/// are pointwise, floored at `1e-9 χ(Θ, Θ)` so that exact nulls stay finite.
pub fn compare(
    sc: &ArrayScenario,
    ws: &WaveformSet,
    c: &TbMatrix,
    reference: &TargetParams,
    points: &[(i64, f64, f64)],
    tolerance: f64,
) -> Result<OracleReport> {
    let fs = ws.sample_rate();
    let ch = ChannelModel::far_field(sc, reference);
    let span = points.iter().map(|p| p.0.unsigned_abs() as usize).max().unwrap_or(0);
    let rec = synthesize_rx(sc, ws, c, &ch, required_len(ws, &ch) + span)?;
    let peak = tb_af_value(sc, ws.energy(), c, &cross_af_point(ws, 0, 0.0), reference, reference);
    let rows = points
        .par_iter()
        .map(|&(lag, df, theta)| {
            let delay = lag as f64 / fs;
            let hyp = TargetParams::planar(theta, reference.doppler - df, reference.delay + delay);
            let x = cross_af_point(ws, lag, df);
            let factored = tb_af_value(sc, ws.energy(), c, &x, reference, &hyp);
            let oracle = af_from_sum(&matched_bank(&rec, ws, sc, &hyp, BankOptions::default())?);
            Ok(OraclePoint {
                delay,
                doppler: df,
                theta,
                factored,
                oracle,
                rel_error: (factored - oracle).abs() / factored.max(oracle).max(1e-9 * peak),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = rows.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(OracleReport {
        pass: max_rel_error <= tolerance,
        points: rows,
        max_rel_error,
        tolerance,
    })
}

/// Oracle values over every node of a delay-Doppler surface.
pub fn oracle_surface(
    sc: &ArrayScenario,
    ws: &WaveformSet,
    c: &TbMatrix,
    reference: &TargetParams,
    like: &AfGrid,
) -> Result<Array2<f64>> {
    let fs = ws.sample_rate();
    let ch = ChannelModel::far_field(sc, reference);
    let span = like.axis1.iter().map(|d| (d * fs).round().abs() as usize).max().unwrap_or(0);
    let rec = synthesize_rx(sc, ws, c, &ch, required_len(ws, &ch) + span)?;
    let mut out = Array2::zeros(like.values.dim());
    for (i, &d) in like.axis1.iter().enumerate() {
        for (j, &f) in like.axis2.iter().enumerate() {
            let hyp = TargetParams::planar(reference.theta(), reference.doppler - f, reference.delay + d);
            out[[i, j]] = af_from_sum(&matched_bank(&rec, ws, sc, &hyp, BankOptions::default())?);
        }
    }
    Ok(out)
}

/// Received energy of a noiseless record set, `Σ_j Σ_n |r_j[n]|² / f_s`.
pub fn record_energy(records: &Array2<Complex64>, sample_rate: f64) -> f64 {
    records.iter().map(|z| z.norm_sqr()).sum::<f64>() / sample_rate
}

/// Energy predicted from the transmit Gram matrix, `N (E/K) Σ_m (C G Cᴴ)_mm`
/// weighted by `|α_mj|²` and channel cross terms.
pub fn predicted_energy(sc: &ArrayScenario, ws: &WaveformSet, c: &TbMatrix, ch: &ChannelModel) -> f64 {
    let fs = ws.sample_rate();
    let scale = ws.energy() / ws.count() as f64;
    let tx = c.c.dot(ws.samples());
    let mut total = 0.0;
    for j in 0..sc.num_rx() {
        // every pair of transmitters at receiver j
        for m in 0..sc.num_tx() {
            for p in 0..sc.num_tx() {
                let (sm, sp) = (snap(ch.delays[[m, j]], fs), snap(ch.delays[[p, j]], fs));
                let (fm, fp) = (ch.dopplers[[m, j]], ch.dopplers[[p, j]]);
                let pm = ch.alpha[[m, j]]
                    * Complex64::from_polar(1.0, -2.0 * PI * ch.delays[[m, j]] * (sc.carrier + fm));
                let pp = ch.alpha[[p, j]]
                    * Complex64::from_polar(1.0, -2.0 * PI * ch.delays[[p, j]] * (sc.carrier + fp));
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..ws.len() as i64 {
                    let t = n + sm;
                    let q = t - sp;
                    if q < 0 || q >= ws.len() as i64 {
                        continue;
                    }
                    let dop = Complex64::from_polar(1.0, 2.0 * PI * (fm - fp) * t as f64 / fs);
                    acc += tx[[m, n as usize]] * tx[[p, q as usize]].conj() * dop;
                }
                total += (pm * pp.conj() * acc).re;
            }
        }
    }
    total * scale / fs
}

/// Vector `Σ_i r_ji` for each receiver, exposed for spot checks.
pub fn per_receiver_sum(outputs: &Array2<Complex64>) -> Array1<Complex64> {
    outputs.sum_axis(ndarray::Axis(1))
}
