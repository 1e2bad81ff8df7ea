//! Orthogonal baseband waveform sets.
//!
//! Every waveform is stored as `L` complex samples at rate `f_s` and is
//! normalized so that `sum |x[n]|^2 / f_s = 1`. The total transmit energy `E`
//! travels with the set as metadata and is only applied when an ambiguity
//! function is assembled.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the per-waveform unit-energy invariant.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    samples: Array2<Complex64>,
    sample_rate: f64,
    pulse_width: f64,
    bandwidth: f64,
    energy: f64,
}

impl WaveformSet {
    /// Builds a set from already-normalized samples (`K x L`).
    pub fn new(
        samples: Array2<Complex64>,
        sample_rate: f64,
        pulse_width: f64,
        bandwidth: f64,
        energy: f64,
    ) -> Result<Self> {
        let (k, len) = samples.dim();
        if k == 0 {
            return Err(Error::param("waveform set needs at least one waveform"));
        }
        if len < 2 {
            return Err(Error::param(format!("waveforms need at least 2 samples, got {len}")));
        }
        for (name, v) in [
            ("sample rate", sample_rate),
            ("pulse width", pulse_width),
            ("bandwidth", bandwidth),
            ("energy", energy),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let expected = (pulse_width * sample_rate).round() as usize;
        if expected != len {
            return Err(Error::param(format!(
                "sample count {len} does not match round(T_p * f_s) = {expected}"
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("waveform samples must be finite"));
        }
        let ws = WaveformSet {
            samples,
            sample_rate,
            pulse_width,
            bandwidth,
            energy,
        };
        for k in 0..ws.count() {
            let e = ws.row_energy(k);
            if (e - 1.0).abs() > ENERGY_TOL {
                return Err(Error::param(format!("waveform {k} has energy {e}, expected 1")));
            }
        }
        Ok(ws)
    }

    /// Like [`WaveformSet::new`], but rescales every row to unit energy first.
    pub fn normalized(
        mut samples: Array2<Complex64>,
        sample_rate: f64,
        pulse_width: f64,
        bandwidth: f64,
        energy: f64,
    ) -> Result<Self> {
        let dt = 1.0 / sample_rate;
        for mut row in samples.rows_mut() {
            let e: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::param("cannot normalize a zero-energy waveform"));
            }
            let s = 1.0 / e.sqrt();
            row.mapv_inplace(|z| z * s);
        }
        Self::new(samples, sample_rate, pulse_width, bandwidth, energy)
    }

    pub fn count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &Array2<Complex64> {
        &self.samples
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.samples.row(k)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn pulse_width(&self) -> f64 {
        self.pulse_width
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Returns a copy carrying a different total transmit energy.
    pub fn with_energy(mut self, energy: f64) -> Result<Self> {
        if !(energy.is_finite() && energy > 0.0) {
            return Err(Error::param(format!("energy must be positive, got {energy}")));
        }
        self.energy = energy;
        Ok(self)
    }

    /// Keeps only the first `k` waveforms.
    pub fn take(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.count() {
            return Err(Error::param(format!(
                "cannot take {k} of {} waveforms",
                self.count()
            )));
        }
        let mut out = self.clone();
        out.samples = self.samples.slice(ndarray::s![..k, ..]).to_owned();
        Ok(out)
    }

    fn row_energy(&self, k: usize) -> f64 {
        self.samples.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = WaveformFile::from(self);
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: WaveformFile = serde_json::from_str(&text)?;
        file.try_into()
    }
}

/// On-disk container: shape and timing metadata plus interleaved `re, im`
/// samples, one array per waveform.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformFile {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub len: usize,
    pub sample_rate: f64,
    pub pulse_width: f64,
    pub bandwidth: f64,
    pub energy: f64,
    pub samples: Vec<Vec<f64>>,    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,

}

pub const WAVEFORM_FORMAT: &str = "tbaf-waveforms";

impl From<&WaveformSet> for WaveformFile {
    fn from(ws: &WaveformSet) -> Self {
        let samples = ws
            .samples
            .rows()
            .into_iter()
            .map(|row| row.iter().flat_map(|z| [z.re, z.im]).collect())
            .collect();
        WaveformFile {
            format: WAVEFORM_FORMAT.to_string(),
            version: 1,
            count: ws.count(),
            len: ws.len(),
            sample_rate: ws.sample_rate,
            pulse_width: ws.pulse_width,
            bandwidth: ws.bandwidth,
            energy: ws.energy,
            samples,
            config_hash: None,
        }
    }
}

impl TryFrom<WaveformFile> for WaveformSet {
    type Error = Error;

    fn try_from(f: WaveformFile) -> Result<Self> {
        if f.format != WAVEFORM_FORMAT || f.version != 1 {
            return Err(Error::param(format!(
                "unsupported waveform container {} v{}",
                f.format, f.version
            )));
        }
        if f.samples.len() != f.count || f.samples.iter().any(|r| r.len() != 2 * f.len) {
            return Err(Error::param("waveform container shape does not match its header"));
        }
        let samples = Array2::from_shape_fn((f.count, f.len), |(k, n)| {
            Complex64::new(f.samples[k][2 * n], f.samples[k][2 * n + 1])
        });
        WaveformSet::new(samples, f.sample_rate, f.pulse_width, f.bandwidth, f.energy)
    }
}

/// Timing derived from a target time-bandwidth product.
///
/// `B = BT_p / T_p`, the target sample rate is `2B`, and the chip-level code
/// is oversampled by the nearest integer factor (at least 1) of
/// `2B / (L / T_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyphaseTiming {
    pub bandwidth: f64,
    pub oversample: usize,
}

impl PolyphaseTiming {
    pub fn from_btp(code_len: usize, pulse_width: f64, btp: f64) -> Result<Self> {
        if !(btp.is_finite() && btp > 0.0) {
            return Err(Error::param(format!("time-bandwidth product must be positive, got {btp}")));
        }
        if !(pulse_width.is_finite() && pulse_width > 0.0) || code_len == 0 {
            return Err(Error::param("pulse width and code length must be positive"));
        }
        let bandwidth = btp / pulse_width;
        let chip_rate = code_len as f64 / pulse_width;
        let oversample = ((2.0 * bandwidth / chip_rate).round() as usize).max(1);
        Ok(PolyphaseTiming {
            bandwidth,
            oversample,
        })
    }
}

/// The first `k` code roots coprime to `code_len`.
pub fn polyphase_roots(k: usize, code_len: usize) -> Result<Vec<usize>> {
    let roots: Vec<usize> = (1..code_len.max(2))
        .filter(|&u| gcd(u, code_len) == 1)
        .take(k)
        .collect();
    if roots.len() < k {
        return Err(Error::param(format!(
            "only {} code roots are coprime to length {code_len}, need {k}",
            roots.len()
        )));
    }
    Ok(roots)
}

/// Unit-modulus chirp-like polyphase chip sequence with phase
/// `-pi * u * n (n + 1) / L`.
pub fn polyphase_chips(root: usize, code_len: usize) -> Vec<Complex64> {
    let l = code_len as u128;
    let u = root as u128;
    (0..code_len as u128)
        .map(|n| {
            // reduce the phase index modulo 2L before converting to float
            let idx = (u * n * (n + 1)) % (2 * l);
            Complex64::from_polar(1.0, -std::f64::consts::PI * idx as f64 / l as f64)
        })
        .collect()
}

/// `K` polyphase codes of `code_len` chips spread over `pulse_width`,
/// zero-order-hold oversampled by `oversample`.
///
/// The sample rate is `oversample * code_len / pulse_width`; the stored
/// bandwidth is half of it and the energy metadata defaults to `K`.
pub fn gen_polyphase(
    k: usize,
    code_len: usize,
    pulse_width: f64,
    oversample: usize,
) -> Result<WaveformSet> {
    if k == 0 {
        return Err(Error::param("K must be at least 1"));
    }
    if code_len < k {
        return Err(Error::param(format!("code length {code_len} must be at least K = {k}")));
    }
    if oversample == 0 {
        return Err(Error::param("oversample must be at least 1"));
    }
    if !(pulse_width.is_finite() && pulse_width > 0.0) {
        return Err(Error::param("pulse width must be positive"));
    }
    let roots = polyphase_roots(k, code_len)?;
    let len = code_len * oversample;
    let sample_rate = len as f64 / pulse_width;
    let amp = (sample_rate / len as f64).sqrt();
    let mut samples = Array2::zeros((k, len));
    for (row, &u) in roots.iter().enumerate() {
        for (c, chip) in polyphase_chips(u, code_len).into_iter().enumerate() {
            for s in 0..oversample {
                samples[[row, c * oversample + s]] = chip * amp;
            }
        }
    }
    WaveformSet::normalized(samples, sample_rate, pulse_width, sample_rate / 2.0, k as f64)
}

/// Polyphase set whose sampling follows a time-bandwidth product target.
pub fn gen_polyphase_btp(
    k: usize,
    code_len: usize,
    pulse_width: f64,
    btp: f64,
) -> Result<WaveformSet> {
    let timing = PolyphaseTiming::from_btp(code_len, pulse_width, btp)?;
    let mut ws = gen_polyphase(k, code_len, pulse_width, timing.oversample)?;
    ws.bandwidth = timing.bandwidth;
    Ok(ws)
}

/// `K` rows of seeded complex Gaussian samples, each renormalized to unit
/// energy. Sample rate is `len / pulse_width`.
pub fn gen_gaussian(k: usize, len: usize, pulse_width: f64, seed: u64) -> Result<WaveformSet> {
    if k == 0 || len == 0 {
        return Err(Error::param("K and length must be at least 1"));
    }
    if !(pulse_width.is_finite() && pulse_width > 0.0) {
        return Err(Error::param("pulse width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Array2::zeros((k, len));
    for z in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z = Complex64::new(re, im);
    }
    let sample_rate = len as f64 / pulse_width;
    WaveformSet::normalized(samples, sample_rate, pulse_width, sample_rate / 2.0, k as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveformDiagnostics {
    pub energies: Vec<f64>,
    /// Zero-delay, zero-Doppler Gram matrix, row-major `K x K`.
    pub gram: Vec<Vec<Complex64>>,
    pub max_offdiag: f64,
    pub sample_count: usize,
    pub expected_sample_count: usize,
    pub duration_consistent: bool,
}

pub fn validate(ws: &WaveformSet) -> WaveformDiagnostics {
    let k = ws.count();
    let dt = ws.dt();
    let energies = (0..k).map(|i| ws.row_energy(i)).collect();
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    let mut max_offdiag = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let g: Complex64 = ws
                .row(i)
                .iter()
                .zip(ws.row(j).iter())
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                * dt;
            if i != j {
                max_offdiag = max_offdiag.max(g.norm());
            }
            gram[i][j] = g;
        }
    }
    let expected = (ws.pulse_width * ws.sample_rate).round() as usize;
    WaveformDiagnostics {
        energies,
        gram,
        max_offdiag,
        sample_count: ws.len(),
        expected_sample_count: expected,
        duration_consistent: expected == ws.len(),
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
