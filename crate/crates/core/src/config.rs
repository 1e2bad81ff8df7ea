//! Declarative scenario configuration (TOML) and the named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tb_design::{AfConstraints, DesignSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformKind {
    Polyphase,
    Gaussian,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformBlock {
    pub kind: WaveformKind,
    #[serde(default = "d_count")]
    pub count: usize,
    #[serde(default = "d_code_len")]
    pub code_len: usize,
    #[serde(default = "d_pulse_width")]
    pub pulse_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub btp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Total transmit energy `E`; defaults to the number of transmit elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseCenterMode {
    /// Magnitude-weighted centroids of the beamspace columns.
    Centroids,
    Elements,
    Reference,
    Subarrays,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayBlock {
    pub tx: usize,
    pub rx: usize,
    #[serde(default = "d_carrier")]
    pub carrier: f64,
    /// Element spacing in wavelengths.
    #[serde(default = "d_spacing")]
    pub spacing: f64,
    #[serde(default = "d_phase_centers")]
    pub phase_centers: PhaseCenterMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TbMode {
    Identity,
    Pa,
    File,
    Spatial,
    Af,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(default = "d_sector")]
    pub sector_deg: [f64; 2],
    #[serde(default = "d_transition")]
    pub transition_deg: f64,
    #[serde(default = "d_sector_points")]
    pub sector_points: usize,
    #[serde(default = "d_out_points")]
    pub out_points: usize,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub doppler_band_hz: Vec<[f64; 2]>,
    #[serde(default = "d_doppler_step")]
    pub doppler_step_hz: f64,
    #[serde(default = "d_zero_list")]
    pub delays_s: Vec<f64>,
    #[serde(default = "d_zero_list")]
    pub angles_deg: Vec<f64>,
    #[serde(default)]
    pub theta0_deg: f64,
    #[serde(default)]
    pub doppler0_hz: f64,
    /// On an infeasible ceiling, re-solve just above the smallest feasible one.
    #[serde(default)]
    pub relax_delta: bool,
}

impl DesignBlock {
    /// Control-band Doppler nodes on multiples of the step.
    pub fn band_dopplers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        if !(self.doppler_step_hz > 0.0) {
            return v;
        }
        for &[lo, hi] in &self.doppler_band_hz {
            let a = (lo / self.doppler_step_hz).ceil() as i64;
            let b = (hi / self.doppler_step_hz).floor() as i64;
            v.extend((a..=b).map(|i| i as f64 * self.doppler_step_hz));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn spec(&self, beams: usize) -> DesignSpec {
        let mut s = DesignSpec::sector(
            self.sector_deg[0].to_radians(),
            self.sector_deg[1].to_radians(),
            self.transition_deg.to_radians(),
            beams,
            self.gamma,
        );
        s.sector_points = self.sector_points;
        s.out_points = self.out_points;
        s
    }

    pub fn af_spec(&self, beams: usize) -> DesignSpec {
        self.spec(beams).with_af(AfConstraints {
            dopplers: self.band_dopplers(),
            delays: self.delays_s.clone(),
            angles: self.angles_deg.iter().map(|a| a.to_radians()).collect(),
            delta: self.delta.unwrap_or(f64::NAN),
            theta0: self.theta0_deg.to_radians(),
            doppler0: self.doppler0_hz,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TbBlock {
    pub mode: TbMode,
    /// Number of waveforms used by the beamspace matrix (the first ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beams: Option<usize>,
    #[serde(default)]
    pub pa_steer_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignBlock>,
}

impl Default for TbBlock {
    fn default() -> Self {
        TbBlock {
            mode: TbMode::Identity,
            beams: None,
            pa_steer_deg: 0.0,
            path: None,
            design: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    DelayDoppler,
    AngleDoppler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub kind: SweepKind,
    #[serde(default)]
    pub theta_deg: f64,
    /// Largest delay lag in samples; defaults to `L - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    #[serde(default = "d_one")]
    pub lag_step: usize,
    /// Half-span of the Doppler axis; defaults to `2 / T_p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_span_hz: Option<f64>,
    #[serde(default = "d_doppler_points")]
    pub doppler_points: usize,
    #[serde(default = "d_angle_span")]
    pub angle_span_deg: f64,
    #[serde(default = "d_angle_points")]
    pub angle_points: usize,
    #[serde(default)]
    pub lag: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceSel {
    Tb,
    Mimo,
    Pa,
    SquareSum,
}

impl SurfaceSel {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceSel::Tb => "tb",
            SurfaceSel::Mimo => "mimo",
            SurfaceSel::Pa => "pa",
            SurfaceSel::SquareSum => "square-sum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationSel {
    UnitPeak,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
    #[serde(default = "d_db_floor")]
    pub db_floor: f64,
    #[serde(default = "d_norm")]
    pub normalization: NormalizationSel,
    #[serde(default = "d_surfaces")]
    pub surfaces: Vec<SurfaceSel>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: d_dir(),
            db_floor: d_db_floor(),
            normalization: d_norm(),
            surfaces: d_surfaces(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub waveforms: WaveformBlock,
    pub array: ArrayBlock,
    #[serde(default)]
    pub tb: TbBlock,
    pub sweep: SweepBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn d_count() -> usize {
    4
}
fn d_code_len() -> usize {
    512
}
fn d_pulse_width() -> f64 {
    60e-6
}
fn d_carrier() -> f64 {
    1e9
}
fn d_spacing() -> f64 {
    0.5
}
fn d_phase_centers() -> PhaseCenterMode {
    PhaseCenterMode::Centroids
}
fn d_sector() -> [f64; 2] {
    [-15.0, 15.0]
}
fn d_transition() -> f64 {
    10.0
}
fn d_sector_points() -> usize {
    crate::tb_design::DEFAULT_SECTOR_POINTS
}
fn d_out_points() -> usize {
    crate::tb_design::DEFAULT_OUT_POINTS
}
fn d_doppler_step() -> f64 {
    500.0
}
fn d_zero_list() -> Vec<f64> {
    vec![0.0]
}
fn d_one() -> usize {
    1
}
fn d_doppler_points() -> usize {
    257
}
fn d_angle_span() -> f64 {
    90.0
}
fn d_angle_points() -> usize {
    181
}
fn d_dir() -> PathBuf {
    PathBuf::from("out")
}
fn d_db_floor() -> f64 {
    crate::tb_core::DB_FLOOR
}
fn d_norm() -> NormalizationSel {
    NormalizationSel::UnitPeak
}
fn d_surfaces() -> Vec<SurfaceSel> {
    vec![SurfaceSel::Tb]
}

impl ScenarioConfig {
    pub fn beams(&self) -> usize {
        self.tb.beams.unwrap_or(match self.tb.mode {
            TbMode::Pa => 1,
            _ => self.waveforms.count,
        })
    }

    pub fn energy(&self) -> f64 {
        self.waveforms.energy.unwrap_or(self.array.tx as f64)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![format!("serialize: {e}")]))
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
    }

    /// Every semantic violation, each prefixed with its key path.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let w = &self.waveforms;
        let mut bad = |key: &str, msg: String| v.push(format!("{key}: {msg}"));
        if w.count == 0 {
            bad("waveforms.count", "must be positive".into());
        }
        if w.code_len < 2 {
            bad("waveforms.code_len", "must be at least 2".into());
        }
        if !(w.pulse_width > 0.0 && w.pulse_width.is_finite()) {
            bad("waveforms.pulse_width", format!("must be positive, got {}", w.pulse_width));
        }
        if w.btp.is_some() && w.oversample.is_some() {
            bad("waveforms.btp", "give either btp or oversample, not both".into());
        }
        if let Some(b) = w.btp {
            if !(b > 0.0 && b.is_finite()) {
                bad("waveforms.btp", format!("must be positive, got {b}"));
            }
        }
        if w.oversample == Some(0) {
            bad("waveforms.oversample", "must be positive".into());
        }
        if w.kind == WaveformKind::File && w.path.is_none() {
            bad("waveforms.path", "required for kind = \"file\"".into());
        }
        if let Some(e) = w.energy {
            if !(e > 0.0 && e.is_finite()) {
                bad("waveforms.energy", format!("must be positive, got {e}"));
            }
        }
        let a = &self.array;
        if a.tx == 0 {
            bad("array.tx", "must be positive".into());
        }
        if a.rx == 0 {
            bad("array.rx", "must be positive".into());
        }
        if !(a.carrier > 0.0 && a.carrier.is_finite()) {
            bad("array.carrier", format!("must be positive, got {}", a.carrier));
        }
        if !(a.spacing > 0.0 && a.spacing.is_finite()) {
            bad("array.spacing", format!("must be positive, got {}", a.spacing));
        }
        let k = self.beams();
        if k == 0 || k > w.count {
            bad("tb.beams", format!("must lie in 1..={}, got {k}", w.count));
        }
        match a.phase_centers {
            PhaseCenterMode::Subarrays if k == 0 || a.tx % k != 0 => {
                bad("array.phase_centers", format!("{} elements do not split into {k} subarrays", a.tx))
            }
            PhaseCenterMode::Explicit if a.positions.len() != k => bad(
                "array.positions",
                format!("expected {k} explicit phase centers, got {}", a.positions.len()),
            ),
            PhaseCenterMode::Reference if k != 1 => {
                bad("array.phase_centers", "reference phase center needs a single beam".into())
            }
            PhaseCenterMode::Elements if k != a.tx => bad(
                "array.phase_centers",
                format!("element phase centers need one beam per element ({}), got {k}", a.tx),
            ),
            PhaseCenterMode::Centroids
                if matches!(self.tb.mode, TbMode::Identity | TbMode::Pa) && k != a.tx && k != 1 =>
            {
                bad("array.phase_centers", "centroids of fixed matrices need K = M or K = 1".into())
            }
            _ => {}
        }
        let t = &self.tb;
        match t.mode {
            TbMode::Identity if k != a.tx => {
                bad("tb.mode", format!("identity needs one beam per element ({}), got {k}", a.tx))
            }
            TbMode::Pa if k != 1 => bad("tb.mode", format!("pa needs exactly one beam, got {k}")),
            TbMode::File if t.path.is_none() => bad("tb.path", "required for mode = \"file\"".into()),
            TbMode::Spatial | TbMode::Af if t.design.is_none() => {
                bad("tb.design", "required for designed matrices".into())
            }
            _ => {}
        }
        if let Some(d) = &t.design {
            let spec = if t.mode == TbMode::Af { d.af_spec(k.max(1)) } else { d.spec(k.max(1)) };
            if let Err(Error::Parameter(msg)) = spec.validate() {
                for m in msg.split("; ") {
                    bad("tb.design", m.to_string());
                }
            }
            if t.mode == TbMode::Af {
                if d.delta.is_none() {
                    bad("tb.design.delta", "required for mode = \"af\"".into());
                }
                if d.doppler_band_hz.iter().any(|[lo, hi]| !(lo <= hi)) {
                    bad("tb.design.doppler_band_hz", "intervals must satisfy lo <= hi".into());
                }
                if !(d.doppler_step_hz > 0.0) {
                    bad("tb.design.doppler_step_hz", "must be positive".into());
                }
                if !d.doppler_band_hz.is_empty() && d.band_dopplers().is_empty() {
                    bad("tb.design.doppler_band_hz", "control band contains no Doppler node".into());
                }
            }
        }
        let s = &self.sweep;
        if s.doppler_points == 0 {
            bad("sweep.doppler_points", "sweep is empty".into());
        }
        if s.lag_step == 0 {
            bad("sweep.lag_step", "must be positive".into());
        }
        if let Some(sp) = s.doppler_span_hz {
            if !(sp >= 0.0 && sp.is_finite()) {
                bad("sweep.doppler_span_hz", format!("must be nonnegative, got {sp}"));
            }
        }
        if s.kind == SweepKind::AngleDoppler {
            if s.angle_points == 0 {
                bad("sweep.angle_points", "sweep is empty".into());
            }
            if !(s.angle_span_deg >= 0.0 && s.angle_span_deg <= 90.0) {
                bad("sweep.angle_span_deg", "must lie in [0, 90]".into());
            }
        }
        if s.doppler_points > 1 && s.doppler_points % 2 == 0 {
            bad("sweep.doppler_points", "must be odd so that zero Doppler is a node".into());
        }
        if s.kind == SweepKind::AngleDoppler && s.angle_points > 1 && s.angle_points % 2 == 0 {
            bad("sweep.angle_points", "must be odd so that broadside is a node".into());
        }
        let o = &self.output;
        if o.surfaces.is_empty() {
            bad("output.surfaces", "nothing to compute".into());
        }
        if o.surfaces.contains(&SurfaceSel::Mimo) && w.count != a.tx {
            bad("output.surfaces", format!("mimo needs one waveform per element ({}), got {}", a.tx, w.count));
        }
        if o.surfaces.contains(&SurfaceSel::Pa) && k != 1 {
            bad("output.surfaces", "pa needs a single beam".into());
        }
        if !(o.db_floor < 0.0) {
            bad("output.db_floor", "must be negative".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    parse_config(&text)
}

pub const PRESETS: [&str; 4] = ["paper-fig1", "paper-fig2", "paper-fig3", "paper-fig4"];

fn preset_waveforms(count: usize) -> WaveformBlock {
    WaveformBlock {
        kind: WaveformKind::Polyphase,
        count,
        code_len: 512,
        pulse_width: 60e-6,
        btp: Some(256.0),
        oversample: None,
        seed: 0,
        energy: Some(8.0),
        path: None,
    }
}

fn preset_array() -> ArrayBlock {
    ArrayBlock {
        tx: 8,
        rx: 8,
        carrier: d_carrier(),
        spacing: 0.5,
        phase_centers: PhaseCenterMode::Centroids,
        positions: Vec::new(),
    }
}

fn preset_design(gamma: f64, delta: Option<f64>) -> DesignBlock {
    DesignBlock {
        sector_deg: [-15.0, 15.0],
        transition_deg: 10.0,
        sector_points: d_sector_points(),
        out_points: d_out_points(),
        gamma,
        delta,
        doppler_band_hz: if delta.is_some() {
            vec![[-30e3, -18e3], [18e3, 30e3]]
        } else {
            Vec::new()
        },
        doppler_step_hz: d_doppler_step(),
        delays_s: vec![0.0],
        angles_deg: vec![0.0],
        theta0_deg: 0.0,
        doppler0_hz: 0.0,
        relax_delta: false,
    }
}

fn sweep(kind: SweepKind, doppler_span: f64, doppler_points: usize) -> SweepBlock {
    SweepBlock {
        kind,
        theta_deg: 0.0,
        max_lag: None,
        lag_step: 1,
        doppler_span_hz: Some(doppler_span),
        doppler_points,
        angle_span_deg: 90.0,
        angle_points: 181,
        lag: 0,
    }
}

/// Built-in scenarios reproducing the four example figures.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let out = |s: Vec<SurfaceSel>| OutputBlock {
        dir: PathBuf::from(name),
        surfaces: s,
        ..OutputBlock::default()
    };
    let cfg = match name {
        "paper-fig1" => {
            let mut design = preset_design(0.1, Some(0.3));
            design.relax_delta = true;
            ScenarioConfig {
                name: Some(name.into()),
                waveforms: preset_waveforms(8),
                array: preset_array(),
                tb: TbBlock {
                    mode: TbMode::Af,
                    beams: Some(4),
                    design: Some(design),
                    ..TbBlock::default()
                },
                sweep: sweep(SweepKind::DelayDoppler, 100e3, 201),
                output: out(vec![SurfaceSel::SquareSum, SurfaceSel::Mimo, SurfaceSel::Tb]),
            }
        }
        "paper-fig2" => ScenarioConfig {
            name: Some(name.into()),
            waveforms: preset_waveforms(4),
            array: preset_array(),
            tb: TbBlock {
                mode: TbMode::Spatial,
                design: Some(preset_design(0.38, None)),
                ..TbBlock::default()
            },
            sweep: sweep(SweepKind::DelayDoppler, 100e3, 201),
            output: out(vec![SurfaceSel::Tb]),
        },
        "paper-fig3" => ScenarioConfig {
            name: Some(name.into()),
            waveforms: preset_waveforms(4),
            array: preset_array(),
            tb: TbBlock {
                mode: TbMode::Spatial,
                design: Some(preset_design(0.2, None)),
                ..TbBlock::default()
            },
            sweep: sweep(SweepKind::AngleDoppler, 100e3, 401),
            output: out(vec![SurfaceSel::Tb]),
        },
        "paper-fig4" => ScenarioConfig {
            name: Some(name.into()),
            waveforms: preset_waveforms(4),
            array: preset_array(),
            tb: TbBlock {
                mode: TbMode::Af,
                design: Some(preset_design(0.1, Some(0.3))),
                ..TbBlock::default()
            },
            sweep: sweep(SweepKind::AngleDoppler, 60e3, 481),
            output: out(vec![SurfaceSel::Tb]),
        },
        other => {
            return Err(Error::Config(vec![format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )]))
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[waveforms]
kind = "polyphase"
count = 2
code_len = 16
pulse_width = 1e-5

[array]
tx = 2
rx = 2

[sweep]
kind = "delay-doppler"
"#;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            preset(p).unwrap().validate().unwrap();
        }
        assert!(preset("paper-fig9").is_err());
    }

    #[test]
    fn fig2_parameters() {
        let c = preset("paper-fig2").unwrap();
        assert_eq!((c.array.tx, c.array.rx, c.beams()), (8, 8, 4));
        assert_eq!(c.energy(), 8.0);
        let d = c.tb.design.unwrap();
        assert_eq!(d.gamma, 0.38);
        assert_eq!(d.sector_deg, [-15.0, 15.0]);
    }

    #[test]
    fn minimal_defaults_expand() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.tb.mode, TbMode::Identity);
        assert_eq!(c.energy(), 2.0);
        assert_eq!(c.sweep.doppler_points, 257);
        assert_eq!(c.output.surfaces, vec![SurfaceSel::Tb]);
        let again = parse_config(MINIMAL).unwrap();
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn round_trip() {
        for p in PRESETS {
            let c = preset(p).unwrap();
            let back = parse_config(&c.to_toml().unwrap()).unwrap();
            assert_eq!(c, back);
        }
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("tx = 2", "tx = 2\ncolour = 1");
        match parse_config(&text) {
            Err(Error::Config(v)) => assert!(v[0].contains("colour"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = MINIMAL.replace("count = 2", "count = \"two\"");
        match parse_config(&text) {
            Err(Error::Config(v)) => assert!(v[0].contains("line"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_reported() {
        let text = MINIMAL
            .replace("count = 2", "count = 0")
            .replace("tx = 2", "tx = 0")
            .replace("kind = \"delay-doppler\"", "kind = \"delay-doppler\"\ndoppler_points = 0");
        match parse_config(&text) {
            Err(Error::Config(v)) => {
                assert!(v.iter().any(|m| m.starts_with("waveforms.count")));
                assert!(v.iter().any(|m| m.starts_with("array.tx")));
                assert!(v.iter().any(|m| m.starts_with("sweep.doppler_points")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn band_nodes() {
        let d = preset_design(0.1, Some(0.3));
        let b = d.band_dopplers();
        assert_eq!(b.len(), 50);
        assert_eq!(b[0], -30e3);
        assert_eq!(b[49], 30e3);
        assert!(b.iter().all(|f| f.abs() >= 18e3));
    }
}
