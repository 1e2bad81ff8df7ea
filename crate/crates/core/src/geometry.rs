//! Array scenarios, target parameters and steering vectors.
//!
//! Steering vectors follow the phase-delay convention
//! `a_i(Θ) = exp{-j 2π f'(Θ) u(Θ)·q_i / c}` with `f'(Θ) = f_c + f(Θ)`, where
//! `u(Θ)` points from the array toward the target. With this sign the
//! far-field echo at element `i` carries the phase `conj(a_i)`, which is what
//! makes `a_Tᴴ C` the beam gain seen by the target.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Position = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayScenario {
    pub tx: Vec<Position>,
    pub rx: Vec<Position>,
    /// Equivalent transmit phase centers, one per waveform. Empty until set.
    pub phase_centers: Vec<Position>,
    pub carrier: f64,
    pub speed: f64,
}

impl ArrayScenario {
    pub fn new(tx: Vec<Position>, rx: Vec<Position>, carrier: f64) -> Result<Self> {
        let sc = ArrayScenario {
            tx,
            rx,
            phase_centers: Vec::new(),
            carrier,
            speed: SPEED_OF_LIGHT,
        };
        sc.check()?;
        Ok(sc)
    }

    fn check(&self) -> Result<()> {
        if self.tx.is_empty() || self.rx.is_empty() {
            return Err(Error::param("arrays need at least one element"));
        }
        let all = self.tx.iter().chain(&self.rx).chain(&self.phase_centers);
        if all.flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("element positions must be finite"));
        }
        if !(self.carrier.is_finite() && self.carrier > 0.0) {
            return Err(Error::param(format!("carrier must be positive, got {}", self.carrier)));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::param("propagation speed must be positive"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.speed / self.carrier
    }

    pub fn num_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn num_beams(&self) -> usize {
        self.phase_centers.len()
    }

    pub fn steering_tx(&self, target: &TargetParams) -> Vec<Complex64> {
        steering(&self.tx, target, self.carrier, self.speed)
    }

    pub fn steering_rx(&self, target: &TargetParams) -> Vec<Complex64> {
        steering(&self.rx, target, self.carrier, self.speed)
    }

    /// Steering vector over the equivalent transmit phase centers.
    pub fn steering_te(&self, target: &TargetParams) -> Vec<Complex64> {
        steering(&self.phase_centers, target, self.carrier, self.speed)
    }

    pub fn with_phase_centers(mut self, mode: PhaseCenters) -> Result<Self> {
        self.phase_centers = match mode {
            PhaseCenters::ElementPositions => self.tx.clone(),
            PhaseCenters::ReferenceElement => vec![self.tx[0]],
            PhaseCenters::Subarrays(k) => subarray_centers(&self.tx, k)?,
            PhaseCenters::Explicit(centers) => {
                if centers.is_empty() {
                    return Err(Error::param("explicit phase centers must not be empty"));
                }
                centers
            }
        };
        self.check()?;
        Ok(self)
    }
}

/// How the equivalent transmit phase centers are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseCenters {
    /// One center per transmit element (traditional MIMO processing).
    ElementPositions,
    /// A single center at the first transmit element (phased-array mode).
    ReferenceElement,
    /// Centers of `k` contiguous, equally sized subarrays.
    Subarrays(usize),
    Explicit(Vec<Position>),
}

/// Uniform linear arrays on the x-axis, centered at the origin, with
/// half-wavelength spacing.
pub fn ula(m: usize, n: usize, carrier: f64) -> Result<ArrayScenario> {
    if !(carrier.is_finite() && carrier > 0.0) {
        return Err(Error::param(format!("carrier must be positive, got {carrier}")));
    }
    ula_with_spacing(m, n, carrier, SPEED_OF_LIGHT / carrier / 2.0)
}

pub fn ula_with_spacing(m: usize, n: usize, carrier: f64, spacing: f64) -> Result<ArrayScenario> {
    if m == 0 || n == 0 {
        return Err(Error::param("ULA needs at least one element per array"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::param(format!("spacing must be positive, got {spacing}")));
    }
    let line = |count: usize| -> Vec<Position> {
        let mid = (count as f64 - 1.0) / 2.0;
        (0..count)
            .map(|i| [(i as f64 - mid) * spacing, 0.0, 0.0])
            .collect()
    };
    ArrayScenario::new(line(m), line(n), carrier)
}

fn subarray_centers(tx: &[Position], k: usize) -> Result<Vec<Position>> {
    if k == 0 || tx.len() % k != 0 {
        return Err(Error::param(format!(
            "{} transmit elements cannot be split into {k} equal subarrays",
            tx.len()
        )));
    }
    let size = tx.len() / k;
    Ok(tx
        .chunks(size)
        .map(|chunk| {
            let mut c = [0.0; 3];
            for p in chunk {
                for d in 0..3 {
                    c[d] += p[d] / size as f64;
                }
            }
            c
        })
        .collect())
}

/// Per-beam centroid of the transmit elements weighted by `|c_mk|^2`.
///
/// A column with zero norm falls back to the array centroid.
pub fn beam_centroids(c: &Array2<Complex64>, tx: &[Position]) -> Result<Vec<Position>> {
    if c.nrows() != tx.len() {
        return Err(Error::param(format!(
            "beamspace matrix has {} rows but the array has {} elements",
            c.nrows(),
            tx.len()
        )));
    }
    let mut out = Vec::with_capacity(c.ncols());
    for col in c.columns() {
        let weights: Vec<f64> = col.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        let mut center = [0.0; 3];
        for (w, p) in weights.iter().zip(tx) {
            let w = if total > 0.0 { w / total } else { 1.0 / tx.len() as f64 };
            for d in 0..3 {
                center[d] += w * p[d];
            }
        }
        out.push(center);
    }
    Ok(out)
}

/// Target hypothesis: direction, Doppler shift and reference delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    /// Unit vector from the array toward the target.
    pub direction: [f64; 3],
    /// Doppler shift in Hz.
    pub doppler: f64,
    /// Reference two-way delay in seconds.
    pub delay: f64,
}

impl TargetParams {
    /// Target in the x-y plane at angle `theta` (rad) from broadside, where
    /// broadside is the y-axis, perpendicular to the arrays.
    pub fn planar(theta: f64, doppler: f64, delay: f64) -> Self {
        TargetParams {
            direction: [theta.sin(), theta.cos(), 0.0],
            doppler,
            delay,
        }
    }

    pub fn from_direction(direction: [f64; 3], doppler: f64, delay: f64) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) || !doppler.is_finite() || !delay.is_finite() {
            return Err(Error::param("target direction must be nonzero and parameters finite"));
        }
        Ok(TargetParams {
            direction: direction.map(|v| v / norm),
            doppler,
            delay,
        })
    }

    /// Planar angle from broadside, recovered from the direction vector.
    pub fn theta(&self) -> f64 {
        self.direction[0].atan2(self.direction[1])
    }
}

pub fn steering(
    positions: &[Position],
    target: &TargetParams,
    carrier: f64,
    speed: f64,
) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI * (carrier + target.doppler) / speed;
    let u = target.direction;
    positions
        .iter()
        .map(|q| {
            let proj = u[0] * q[0] + u[1] * q[1] + u[2] * q[2];
            Complex64::from_polar(1.0, -k * proj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FC: f64 = 1e9;

    #[test]
    fn ula_spacing_is_half_wavelength() {
        let sc = ula(8, 8, FC).unwrap();
        let lambda = SPEED_OF_LIGHT / FC;
        assert_eq!(sc.num_tx(), 8);
        assert_eq!(sc.num_rx(), 8);
        for w in sc.tx.windows(2) {
            assert!((w[1][0] - w[0][0] - lambda / 2.0).abs() < 1e-15);
        }
        let center: f64 = sc.tx.iter().map(|p| p[0]).sum();
        assert!(center.abs() < 1e-12);
    }

    #[test]
    fn single_elements_sit_at_origin() {
        let sc = ula(1, 1, FC).unwrap();
        assert_eq!(sc.tx, vec![[0.0; 3]]);
        assert_eq!(sc.rx, vec![[0.0; 3]]);
    }

    #[test]
    fn three_elements_are_symmetric() {
        let sc = ula(3, 1, FC).unwrap();
        let h = sc.wavelength() / 2.0;
        let xs: Vec<f64> = sc.tx.iter().map(|p| p[0]).collect();
        for (got, want) in xs.iter().zip([-h, 0.0, h]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_center_modes() {
        let sc = ula(8, 8, FC).unwrap();
        let mimo = sc.clone().with_phase_centers(PhaseCenters::ElementPositions).unwrap();
        assert_eq!(mimo.phase_centers, sc.tx);
        let pa = sc.clone().with_phase_centers(PhaseCenters::ReferenceElement).unwrap();
        assert_eq!(pa.phase_centers, vec![sc.tx[0]]);
        let sub = sc.clone().with_phase_centers(PhaseCenters::Subarrays(4)).unwrap();
        assert_eq!(sub.num_beams(), 4);
        assert!((sub.phase_centers[0][0] - (sc.tx[0][0] + sc.tx[1][0]) / 2.0).abs() < 1e-15);
        assert!(sc.clone().with_phase_centers(PhaseCenters::Subarrays(3)).is_err());
        assert!(sc.with_phase_centers(PhaseCenters::Explicit(vec![])).is_err());
    }

    #[test]
    fn explicit_centroids_are_stored_verbatim() {
        let sc = ula(8, 8, FC).unwrap();
        let mut c = Array2::zeros((8, 4));
        for k in 0..4 {
            c[[2 * k, k]] = Complex64::new(1.0, 0.0);
            c[[2 * k + 1, k]] = Complex64::new(0.0, 3.0);
        }
        let centers = beam_centroids(&c, &sc.tx).unwrap();
        for k in 0..4 {
            let want = (sc.tx[2 * k][0] + 9.0 * sc.tx[2 * k + 1][0]) / 10.0;
            assert!((centers[k][0] - want).abs() < 1e-15);
        }
        let with = sc.with_phase_centers(PhaseCenters::Explicit(centers.clone())).unwrap();
        assert_eq!(with.phase_centers, centers);
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let sc = ula(8, 5, FC).unwrap();
        let t = TargetParams::planar(0.0, 0.0, 0.0);
        for z in sc.steering_tx(&t).into_iter().chain(sc.steering_rx(&t)) {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn endfire_two_element_phases() {
        let sc = ula(2, 1, FC).unwrap();
        let t = TargetParams::planar(PI / 2.0, 0.0, 0.0);
        let a = sc.steering_tx(&t);
        // positions are -λ/4 and +λ/4, so the phases are ±π/2
        for (z, q) in a.iter().zip(&sc.tx) {
            let phase = -2.0 * PI * FC / SPEED_OF_LIGHT * q[0];
            assert!((z - Complex64::from_polar(1.0, phase)).norm() < 1e-12);
            assert!((phase.abs() - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_is_unit_modulus_and_conjugate_symmetric() {
        let sc = ula(8, 8, FC).unwrap();
        for deg in [-70.0f64, -12.5, 3.0, 45.0] {
            let t = TargetParams::planar(deg.to_radians(), 0.0, 0.0);
            let m = TargetParams::planar(-deg.to_radians(), 0.0, 0.0);
            let a = sc.steering_tx(&t);
            let b = sc.steering_tx(&m);
            let power: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            assert!((power - 8.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn te_steering_matches_tx_for_element_centers() {
        let sc = ula(6, 2, FC)
            .unwrap()
            .with_phase_centers(PhaseCenters::ElementPositions)
            .unwrap();
        let t = TargetParams::planar(0.3, 1e3, 0.0);
        assert_eq!(sc.steering_te(&t), sc.steering_tx(&t));
    }

    #[test]
    fn doppler_enters_the_steering_phase() {
        let sc = ula(4, 1, FC).unwrap();
        let a0 = sc.steering_tx(&TargetParams::planar(0.5, 0.0, 0.0));
        let a1 = sc.steering_tx(&TargetParams::planar(0.5, 1e6, 0.0));
        let k1 = 2.0 * PI * (FC + 1e6) / SPEED_OF_LIGHT;
        for ((z0, z1), q) in a0.iter().zip(&a1).zip(&sc.tx) {
            assert!(z0.norm() > 0.0);
            let want = Complex64::from_polar(1.0, -k1 * 0.5f64.sin() * q[0]);
            assert!((z1 - want).norm() < 1e-12);
        }
    }

    #[test]
    fn direction_is_normalized() {
        let t = TargetParams::from_direction([3.0, 4.0, 0.0], 0.0, 0.0).unwrap();
        assert!((t.direction[0] - 0.6).abs() < 1e-15);
        assert!((t.theta() - 0.6f64.atan2(0.8)).abs() < 1e-15);
        assert!(TargetParams::from_direction([0.0; 3], 0.0, 0.0).is_err());
    }
}
