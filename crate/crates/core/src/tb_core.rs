//! Transmit-beamspace ambiguity function in its far-field factored form
//!
//! ```text
//! χ(Θ, Θ') = (E/K) |a_Rᴴ(Θ) a_R(Θ')|² |a_Tᴴ(Θ) C X(Δτ, Δf) a_TE(Θ')|²
//! ```
//!
//! where `X` is the waveform cross-ambiguity matrix. The phased-array and
//! traditional MIMO surfaces are assembled by their own formulas so that
//! the reductions can be checked against the general form.
//!
//! Sweep conventions: the reference target `Θ` is fixed; a sweep point
//! `(Δτ, Δf)` describes the matched-filter hypothesis `Θ'` with delay
//! `τ(Θ) + Δτ` and Doppler `f(Θ) - Δf`. `Δτ` is the lag argument of `X`.

use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{
    check_axis, cross_af_matrix, cross_af_point, AfGrid, AxisKind, SurfaceKind,
};
use crate::error::{Error, Result};
use crate::geometry::{ArrayScenario, TargetParams};
use crate::waveforms::WaveformSet;

/// Values below this level are clamped in dB output.
pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Identity,
    PaWeight,
    Designed,
    File,
}

/// `M x K` beamspace matrix; column `k` is the transmit beam of waveform `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TbMatrix {
    pub c: Array2<Complex64>,
    pub provenance: Provenance,
}

impl TbMatrix {
    pub fn new(c: Array2<Complex64>, provenance: Provenance) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::param("beamspace matrix must not be empty"));
        }
        if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("beamspace matrix entries must be finite"));
        }
        Ok(TbMatrix { c, provenance })
    }

    pub fn identity(m: usize) -> Self {
        TbMatrix {
            c: Array2::from_shape_fn((m, m), |(i, j)| {
                Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
            }),
            provenance: Provenance::Identity,
        }
    }

    /// Single-beam matrix built from a beamforming weight vector.
    pub fn from_weights(w: &[Complex64]) -> Self {
        TbMatrix {
            c: Array2::from_shape_fn((w.len(), 1), |(i, _)| w[i]),
            provenance: Provenance::PaWeight,
        }
    }

    pub fn rows(&self) -> usize {
        self.c.nrows()
    }

    pub fn beams(&self) -> usize {
        self.c.ncols()
    }

    /// `a_Tᴴ C` for a transmit steering vector `a`.
    pub fn gains(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.c
            .columns()
            .into_iter()
            .map(|col| a.iter().zip(col.iter()).map(|(x, c)| x.conj() * c).sum())
            .collect()
    }
}

pub const TB_FORMAT: &str = "tbaf-beamspace";

/// On-disk beamspace matrix: interleaved `re, im` entries, one array per row.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TbFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub rows: usize,
    pub beams: usize,
    pub entries: Vec<Vec<f64>>,    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,

}

impl From<&TbMatrix> for TbFile {
    fn from(c: &TbMatrix) -> Self {
        TbFile {
            format: TB_FORMAT.to_string(),
            version: 1,
            provenance: c.provenance,
            rows: c.rows(),
            beams: c.beams(),
            config_hash: None,
            entries: c
                .c
                .rows()
                .into_iter()
                .map(|r| r.iter().flat_map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<TbFile> for TbMatrix {
    type Error = Error;

    fn try_from(f: TbFile) -> Result<Self> {
        if f.format != TB_FORMAT || f.version != 1 {
            return Err(Error::param(format!(
                "unsupported beamspace container {} v{}",
                f.format, f.version
            )));
        }
        if f.entries.len() != f.rows || f.entries.iter().any(|r| r.len() != 2 * f.beams) {
            return Err(Error::param("beamspace container shape does not match its header"));
        }
        let c = Array2::from_shape_fn((f.rows, f.beams), |(m, k)| {
            Complex64::new(f.entries[m][2 * k], f.entries[m][2 * k + 1])
        });
        TbMatrix::new(c, f.provenance)
    }
}

impl TbMatrix {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&TbFile::from(self))?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: TbFile = serde_json::from_str(&text)?;
        f.try_into()
    }
}

/// Sweep over the matched-filter hypothesis `Θ'`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Delay lags (in samples) by Doppler mismatches at a fixed angle.
    DelayDoppler {
        theta: f64,
        lags: Vec<i64>,
        dopplers: Vec<f64>,
    },
    /// Angles by Doppler mismatches at a fixed delay lag.
    AngleDoppler {
        angles: Vec<f64>,
        dopplers: Vec<f64>,
        lag: i64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfQuery {
    pub reference: TargetParams,
    pub sweep: Sweep,
}

impl AfQuery {
    pub fn delay_doppler(reference: TargetParams, lags: Vec<i64>, dopplers: Vec<f64>) -> Self {
        AfQuery {
            reference,
            sweep: Sweep::DelayDoppler {
                theta: reference.theta(),
                lags,
                dopplers,
            },
        }
    }

    pub fn angle_doppler(reference: TargetParams, angles: Vec<f64>, dopplers: Vec<f64>) -> Self {
        AfQuery {
            reference,
            sweep: Sweep::AngleDoppler {
                angles,
                dopplers,
                lag: 0,
            },
        }
    }

    fn check(&self) -> Result<()> {
        match &self.sweep {
            Sweep::DelayDoppler { lags, dopplers, .. } => {
                if lags.is_empty() || lags.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::param("sweep delay axis must be nonempty and increasing"));
                }
                check_axis(dopplers, "sweep Doppler axis")
            }
            Sweep::AngleDoppler { angles, dopplers, .. } => {
                check_axis(angles, "sweep angle axis")?;
                check_axis(dopplers, "sweep Doppler axis")
            }
        }
    }

    /// Matched-filter hypothesis for a sweep node.
    pub fn hypothesis(&self, theta: f64, delay: f64, doppler_mismatch: f64) -> TargetParams {
        TargetParams::planar(
            theta,
            self.reference.doppler - doppler_mismatch,
            self.reference.delay + delay,
        )
    }
}

/// Evaluates `f(X, Θ')` over every sweep node. `X` is the cross-ambiguity
/// matrix at the node's lag and Doppler mismatch.
fn sweep_surface<F>(ws: &WaveformSet, q: &AfQuery, kind: SurfaceKind, f: F) -> Result<AfGrid>
where
    F: Fn(&Array2<Complex64>, &TargetParams) -> f64 + Sync,
{
    q.check()?;
    let fs = ws.sample_rate();
    match &q.sweep {
        Sweep::DelayDoppler {
            theta,
            lags,
            dopplers,
        } => {
            let stack = cross_af_matrix(ws, lags, dopplers)?;
            let rows: Vec<Vec<f64>> = (0..lags.len())
                .into_par_iter()
                .map(|di| {
                    (0..dopplers.len())
                        .map(|fi| {
                            let x = stack.matrix(di, fi).to_owned();
                            let hyp = q.hypothesis(*theta, stack.delays[di], dopplers[fi]);
                            f(&x, &hyp)
                        })
                        .collect()
                })
                .collect();
            let values = Array2::from_shape_fn((lags.len(), dopplers.len()), |(i, j)| rows[i][j]);
            AfGrid::new(
                stack.delays,
                AxisKind::Delay,
                dopplers.clone(),
                AxisKind::Doppler,
                values,
                kind,
            )
        }
        Sweep::AngleDoppler {
            angles,
            dopplers,
            lag,
        } => {
            let delay = *lag as f64 / fs;
            let cols: Vec<Vec<f64>> = dopplers
                .par_iter()
                .map(|&df| {
                    let x = cross_af_point(ws, *lag, df);
                    angles
                        .iter()
                        .map(|&th| f(&x, &q.hypothesis(th, delay, df)))
                        .collect()
                })
                .collect();
            let values = Array2::from_shape_fn((angles.len(), dopplers.len()), |(i, j)| cols[j][i]);
            AfGrid::new(
                angles.clone(),
                AxisKind::Angle,
                dopplers.clone(),
                AxisKind::Doppler,
                values,
                kind,
            )
        }
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|a_Rᴴ(Θ) a_R(Θ')|²`.
pub fn receive_factor(sc: &ArrayScenario, theta: &TargetParams, theta2: &TargetParams) -> f64 {
    inner(&sc.steering_rx(theta), &sc.steering_rx(theta2)).norm_sqr()
}

/// Value of the factored TB ambiguity function for one pair of hypotheses
/// given the cross-ambiguity matrix at their delay/Doppler mismatch.
pub fn tb_af_value(
    sc: &ArrayScenario,
    energy: f64,
    c: &TbMatrix,
    x: &Array2<Complex64>,
    theta: &TargetParams,
    theta2: &TargetParams,
) -> f64 {
    let k = c.beams() as f64;
    let gains = Array1::from(c.gains(&sc.steering_tx(theta)));
    let a_te = Array1::from(sc.steering_te(theta2));
    let t = gains.dot(&x.dot(&a_te));
    energy / k * receive_factor(sc, theta, theta2) * t.norm_sqr()
}

fn check_dims(sc: &ArrayScenario, ws: &WaveformSet, c: &TbMatrix) -> Result<()> {
    if c.rows() != sc.num_tx() {
        return Err(Error::param(format!(
            "beamspace matrix has {} rows, array has {} transmit elements",
            c.rows(),
            sc.num_tx()
        )));
    }
    if c.beams() != ws.count() {
        return Err(Error::param(format!(
            "beamspace matrix has {} columns, waveform set has {} waveforms",
            c.beams(),
            ws.count()
        )));
    }
    if sc.num_beams() != ws.count() {
        return Err(Error::param(format!(
            "scenario has {} equivalent phase centers, waveform set has {} waveforms",
            sc.num_beams(),
            ws.count()
        )));
    }
    Ok(())
}

/// TB-based MIMO radar ambiguity surface (raw scale).
pub fn tb_af(sc: &ArrayScenario, ws: &WaveformSet, c: &TbMatrix, q: &AfQuery) -> Result<AfGrid> {
    check_dims(sc, ws, c)?;
    let energy = ws.energy();
    sweep_surface(ws, q, SurfaceKind::TbAf, |x, hyp| {
        tb_af_value(sc, energy, c, x, &q.reference, hyp)
    })
}

/// Traditional MIMO surface: `K = M`, no beamspace mixing, phase centers at
/// the transmit elements.
pub fn mimo_af(sc: &ArrayScenario, ws: &WaveformSet, q: &AfQuery) -> Result<AfGrid> {
    let m = sc.num_tx();
    if ws.count() != m {
        return Err(Error::param(format!(
            "MIMO surface needs one waveform per transmit element ({m}), got {}",
            ws.count()
        )));
    }
    let scale = ws.energy() / m as f64;
    let a_t = Array1::from(sc.steering_tx(&q.reference));
    let a_t_conj = a_t.mapv(|z| z.conj());
    sweep_surface(ws, q, SurfaceKind::MimoAf, |x, hyp| {
        let a2 = Array1::from(sc.steering_tx(hyp));
        let t = a_t_conj.dot(&x.dot(&a2));
        scale * receive_factor(sc, &q.reference, hyp) * t.norm_sqr()
    })
}

/// Phased-array surface for a single waveform and weight vector `w`.
pub fn pa_af(sc: &ArrayScenario, ws: &WaveformSet, w: &[Complex64], q: &AfQuery) -> Result<AfGrid> {
    if ws.count() != 1 {
        return Err(Error::param(format!(
            "phased-array surface needs exactly one waveform, got {}",
            ws.count()
        )));
    }
    if w.len() != sc.num_tx() {
        return Err(Error::param(format!(
            "weight vector has {} entries, array has {} elements",
            w.len(),
            sc.num_tx()
        )));
    }
    let gain = inner(&sc.steering_tx(&q.reference), w);
    let energy = ws.energy();
    sweep_surface(ws, q, SurfaceKind::PaAf, |x, hyp| {
        energy * receive_factor(sc, &q.reference, hyp) * (gain * x[[0, 0]]).norm_sqr()
    })
}

/// Square-summation comparison metric: each waveform leaves its own
/// element, and the squared matched-filter outputs of every
/// (element, filter) pair at every receiver are summed without array phases,
/// `N (E/K) sum_{k,i} |X_ki|²`.
pub fn square_summation_af(sc: &ArrayScenario, ws: &WaveformSet, q: &AfQuery) -> Result<AfGrid> {
    let scale = sc.num_rx() as f64 * ws.energy() / ws.count() as f64;
    sweep_surface(ws, q, SurfaceKind::SquareSum, |x, _| {
        scale * x.iter().map(|z| z.norm_sqr()).sum::<f64>()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutSpec {
    /// Row at zero delay (series over the second axis). Delay grids only.
    ZeroDelay,
    /// Column at zero Doppler (series over the first axis).
    ZeroDoppler,
    /// Row at the given first-axis value.
    Axis1At(f64),
    /// Column at the given second-axis value.
    Axis2At(f64),
}

/// One-dimensional slice of a surface, in dB relative to the surface peak.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub axis: Vec<f64>,
    pub axis_kind: AxisKind,
    pub fixed_kind: AxisKind,
    pub fixed_value: f64,
    pub values: Vec<f64>,
    pub values_db: Vec<f64>,
}

/// `10 log10(value / peak)`, clamped at [`DB_FLOOR`].
pub fn to_db(value: f64, peak: f64) -> f64 {
    if value <= 0.0 || peak <= 0.0 {
        return DB_FLOOR;
    }
    (10.0 * (value / peak).log10()).max(DB_FLOOR)
}

fn locate(axis: &[f64], x: f64, what: &str) -> Result<usize> {
    let step = if axis.len() > 1 {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    } else {
        1.0
    };
    axis.iter()
        .position(|&a| (a - x).abs() <= 1e-9 * step.abs().max(f64::MIN_POSITIVE))
        .ok_or_else(|| Error::range(format!("{what} {x} is not a grid node")))
}

pub fn cut(grid: &AfGrid, which: CutSpec) -> Result<Cut> {
    let peak = grid.peak();
    let (row, fixed) = match which {
        CutSpec::ZeroDelay => {
            if grid.axis1_kind != AxisKind::Delay {
                return Err(Error::range("zero-delay cut needs a delay axis"));
            }
            (true, 0.0)
        }
        CutSpec::ZeroDoppler => (false, 0.0),
        CutSpec::Axis1At(v) => (true, v),
        CutSpec::Axis2At(v) => (false, v),
    };
    let (axis, axis_kind, fixed_kind, values) = if row {
        let i = locate(&grid.axis1, fixed, "first-axis value")?;
        (
            grid.axis2.clone(),
            grid.axis2_kind,
            grid.axis1_kind,
            grid.values.row(i).to_vec(),
        )
    } else {
        let j = locate(&grid.axis2, fixed, "second-axis value")?;
        (
            grid.axis1.clone(),
            grid.axis1_kind,
            grid.axis2_kind,
            grid.values.column(j).to_vec(),
        )
    };
    let values_db = values.iter().map(|&v| to_db(v, peak)).collect();
    Ok(Cut {
        axis,
        axis_kind,
        fixed_kind,
        fixed_value: fixed,
        values,
        values_db,
    })
}

/// Largest value of a cut outside its mainlobe, in dB relative to the cut
/// reference peak, restricted to `[lo, hi]` on the cut axis.
///
/// The mainlobe is the run of samples around the largest value over which
/// the cut decreases monotonically on both sides.
pub fn peak_sidelobe_db(cut: &Cut, lo: f64, hi: f64) -> Option<f64> {
    let n = cut.values.len();
    if n == 0 {
        return None;
    }
    let (imax, _) = cut
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let mut left = imax;
    while left > 0 && cut.values[left - 1] <= cut.values[left] {
        left -= 1;
    }
    let mut right = imax;
    while right + 1 < n && cut.values[right + 1] <= cut.values[right] {
        right += 1;
    }
    (0..n)
        .filter(|&i| (i < left || i > right) && cut.axis[i] >= lo && cut.axis[i] <= hi)
        .map(|i| cut.values_db[i])
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
}
