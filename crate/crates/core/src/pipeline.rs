//! Config-driven pipeline: waveforms, scenario, beamspace matrix, surfaces
//! and file output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambiguity::{cross_af_matrix, symmetric_axis, AfGrid, CrossAfStack};
use crate::config::{
    DesignBlock, NormalizationSel, PhaseCenterMode, ScenarioConfig, SurfaceSel, SweepKind, TbMode,
    WaveformKind,
};
use crate::error::{Error, Result};
use crate::geometry::{beam_centroids, ula_with_spacing, ArrayScenario, PhaseCenters, TargetParams};
use crate::output::{cut_csv, write_grid_csv};
use crate::sim_oracle::{compare, OracleReport};
use crate::tb_core::{
    cut, mimo_af, pa_af, peak_sidelobe_db, square_summation_af, tb_af, AfQuery, Cut, CutSpec,
    Provenance, Sweep, TbFile, TbMatrix,
};
use crate::tb_design::{
    design_af_constrained, design_spatial, min_feasible_delta, Certificate, ConstraintReport,
    DesignResult, DesignStatus,
};
use crate::waveforms::{gen_gaussian, gen_polyphase, gen_polyphase_btp, WaveformFile, WaveformSet};

/// Bisection steps used when diagnosing or relaxing an infeasible ceiling.
pub const DELTA_BISECTION_STEPS: usize = 14;
/// Margin above the smallest feasible ceiling when relaxing.
pub const RELAX_MARGIN: f64 = 1.02;

pub fn build_waveforms(cfg: &ScenarioConfig) -> Result<WaveformSet> {
    let w = &cfg.waveforms;
    let ws = match w.kind {
        WaveformKind::Polyphase => match (w.btp, w.oversample) {
            (Some(b), _) => gen_polyphase_btp(w.count, w.code_len, w.pulse_width, b)?,
            (None, o) => gen_polyphase(w.count, w.code_len, w.pulse_width, o.unwrap_or(1))?,
        },
        WaveformKind::Gaussian => gen_gaussian(w.count, w.code_len, w.pulse_width, w.seed)?,
        WaveformKind::File => {
            let path = w.path.as_ref().ok_or_else(|| Error::Config(vec!["waveforms.path: missing".into()]))?;
            let ws = WaveformSet::read_json(path)?;
            if ws.count() < w.count {
                return Err(Error::param(format!(
                    "{} holds {} waveforms, config asks for {}",
                    path.display(),
                    ws.count(),
                    w.count
                )));
            }
            ws.take(w.count)?
        }
    };
    ws.with_energy(cfg.energy())
}

/// Arrays without equivalent phase centers.
pub fn build_array(cfg: &ScenarioConfig) -> Result<ArrayScenario> {
    let a = &cfg.array;
    let lambda = crate::geometry::SPEED_OF_LIGHT / a.carrier;
    ula_with_spacing(a.tx, a.rx, a.carrier, a.spacing * lambda)
}

fn with_centers(cfg: &ScenarioConfig, sc: &ArrayScenario, c: &TbMatrix) -> Result<ArrayScenario> {
    let mode = match cfg.array.phase_centers {
        PhaseCenterMode::Centroids => PhaseCenters::Explicit(beam_centroids(&c.c, &sc.tx)?),
        PhaseCenterMode::Elements => PhaseCenters::ElementPositions,
        PhaseCenterMode::Reference => PhaseCenters::ReferenceElement,
        PhaseCenterMode::Subarrays => PhaseCenters::Subarrays(c.beams()),
        PhaseCenterMode::Explicit => PhaseCenters::Explicit(cfg.array.positions.clone()),
    };
    sc.clone().with_phase_centers(mode)
}

/// Outcome of a beamspace design, as recorded in the run metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSummary {
    pub status: DesignStatus,
    pub objective: f64,
    pub solver_status: String,
    pub iterations: u32,
    pub delta_requested: Option<f64>,
    pub delta_used: Option<f64>,
    pub min_feasible_delta: Option<f64>,
    pub report: ConstraintReport,
    pub certificate: Option<Certificate>,
}

impl DesignSummary {
    fn new(r: &DesignResult, requested: Option<f64>, used: Option<f64>, min: Option<f64>) -> Self {
        DesignSummary {
            status: r.status,
            objective: r.objective,
            solver_status: r.solver_status.clone(),
            iterations: r.iterations,
            delta_requested: requested,
            delta_used: used,
            min_feasible_delta: min,
            report: r.report.clone(),
            certificate: r.certificate.clone(),
        }
    }
}

/// Everything a surface computation needs.
#[derive(Debug, Clone)]
pub struct Built {
    /// Arrays with phase centers matching the beamspace matrix.
    pub scenario: ArrayScenario,
    /// Full waveform family.
    pub waveforms: WaveformSet,
    /// The first `K` waveforms, carrying the total energy.
    pub beams: WaveformSet,
    pub tb: TbMatrix,
    pub design: Option<DesignSummary>,
}

/// Cross-ambiguity stack covering the control band of an ambiguity design.
pub fn control_stack(d: &DesignBlock, ws: &WaveformSet) -> Result<CrossAfStack> {
    let fs = ws.sample_rate();
    let lo = d.delays_s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.delays_s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = ((lo * fs).floor() as i64, (hi * fs).ceil() as i64);
    let lags: Vec<i64> = (a..=b.max(a)).collect();
    let mut dopplers = d.band_dopplers();
    if dopplers.is_empty() {
        dopplers.push(0.0);
    }
    cross_af_matrix(ws, &lags, &dopplers)
}

fn design(cfg: &ScenarioConfig, base: &ArrayScenario, beams: &WaveformSet) -> Result<(TbMatrix, ArrayScenario, DesignSummary)> {
    let k = cfg.beams();
    let d = cfg
        .tb
        .design
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["tb.design: required for designed matrices".into()]))?;
    let spatial = design_spatial(&d.spec(k), base)?;
    if cfg.tb.mode == TbMode::Spatial {
        let c = spatial.matrix()?.clone();
        let sc = with_centers(cfg, base, &c)?;
        return Ok((c, sc, DesignSummary::new(&spatial, None, None, None)));
    }
    let sc = with_centers(cfg, base, spatial.matrix()?)?;
    let spec = d.af_spec(k);
    let stack = control_stack(d, beams)?;
    let requested = d.delta;
    let r = design_af_constrained(&spec, &sc, &stack);
    let infeasible = match &r {
        Ok(r) => r.status == DesignStatus::Infeasible,
        Err(Error::Infeasible(_)) => true,
        Err(_) => false,
    };
    if !infeasible {
        let r = r?;
        let c = r.matrix()?.clone();
        return Ok((c, sc, DesignSummary::new(&r, requested, requested, None)));
    }
    let lo = requested.unwrap_or(0.0);
    let min = min_feasible_delta(&spec, &sc, &stack, lo, k as f64, DELTA_BISECTION_STEPS)?;
    if d.relax_delta {
        if let Some(m) = min {
            let used = m * RELAX_MARGIN;
            let mut relaxed = spec.clone();
            if let Some(af) = relaxed.af.as_mut() {
                af.delta = used;
            }
            let r = design_af_constrained(&relaxed, &sc, &stack)?;
            let c = r.matrix()?.clone();
            return Ok((c, sc, DesignSummary::new(&r, requested, Some(used), min)));
        }
    }
    let why = match &r {
        Ok(r) => r.matrix().err().map(|e| e.to_string()).unwrap_or_default(),
        Err(e) => e.to_string(),
    };
    Err(Error::Infeasible(format!(
        "ceiling {} cannot be met ({why}); smallest feasible ceiling {}",
        requested.unwrap_or(f64::NAN),
        match min {
            Some(m) => format!("is about {m:.4} ({:.1} dB below the peak)", 20.0 * (k as f64 / m).log10()),
            None => format!("exceeds {k}"),
        }
    )))
}

pub fn build(cfg: &ScenarioConfig) -> Result<Built> {
    cfg.validate()?;
    let waveforms = build_waveforms(cfg).map_err(|e| e.in_stage("waveforms"))?;
    let k = cfg.beams();
    let beams = waveforms
        .take(k)
        .and_then(|w| w.with_energy(cfg.energy()))
        .map_err(|e| e.in_stage("waveforms"))?;
    let base = build_array(cfg).map_err(|e| e.in_stage("scenario"))?;
    let (tb, scenario, summary) = (|| -> Result<_> {
        match cfg.tb.mode {
            TbMode::Identity => {
                let c = TbMatrix::identity(cfg.array.tx);
                Ok((c.clone(), with_centers(cfg, &base, &c)?, None))
            }
            TbMode::Pa => {
                let t = TargetParams::planar(cfg.tb.pa_steer_deg.to_radians(), 0.0, 0.0);
                let c = TbMatrix::from_weights(&base.steering_tx(&t));
                Ok((c.clone(), with_centers(cfg, &base, &c)?, None))
            }
            TbMode::File => {
                let path = cfg.tb.path.as_ref().ok_or_else(|| Error::param("tb.path missing"))?;
                let mut c = TbMatrix::read_json(path)?;
                c.provenance = Provenance::File;
                if c.rows() != cfg.array.tx || c.beams() != k {
                    return Err(Error::param(format!(
                        "{} is {}x{}, expected {}x{k}",
                        path.display(),
                        c.rows(),
                        c.beams(),
                        cfg.array.tx
                    )));
                }
                Ok((c.clone(), with_centers(cfg, &base, &c)?, None))
            }
            TbMode::Spatial | TbMode::Af => {
                let (c, sc, s) = design(cfg, &base, &beams)?;
                Ok((c, sc, Some(s)))
            }
        }
    })()
    .map_err(|e| e.in_stage("beamspace"))?;
    Ok(Built {
        scenario,
        waveforms,
        beams,
        tb,
        design: summary,
    })
}

/// Sweep described by the config around a broadside reference at zero
/// delay and Doppler.
pub fn build_query(cfg: &ScenarioConfig, ws: &WaveformSet) -> AfQuery {
    let s = &cfg.sweep;
    let reference = TargetParams::planar(s.theta_deg.to_radians(), 0.0, 0.0);
    let span = s.doppler_span_hz.unwrap_or(2.0 / ws.pulse_width());
    let dopplers = symmetric_axis(span, s.doppler_points);
    match s.kind {
        SweepKind::DelayDoppler => {
            let max = s.max_lag.unwrap_or(ws.len().saturating_sub(1)) as i64;
            let step = s.lag_step as i64;
            let n = max / step;
            let lags = (-n..=n).map(|i| i * step).collect();
            AfQuery::delay_doppler(reference, lags, dopplers)
        }
        SweepKind::AngleDoppler => {
            let angles = symmetric_axis(s.angle_span_deg.to_radians(), s.angle_points);
            let mut q = AfQuery::angle_doppler(reference, angles, dopplers);
            if let Sweep::AngleDoppler { lag, .. } = &mut q.sweep {
                *lag = s.lag;
            }
            q
        }
    }
}

pub fn surface(built: &Built, cfg: &ScenarioConfig, which: SurfaceSel, q: &AfQuery) -> Result<AfGrid> {
    let g = match which {
        SurfaceSel::Tb => tb_af(&built.scenario, &built.beams, &built.tb, q)?,
        SurfaceSel::Mimo => {
            let sc = built.scenario.clone().with_phase_centers(PhaseCenters::ElementPositions)?;
            mimo_af(&sc, &built.waveforms, q)?
        }
        SurfaceSel::SquareSum => square_summation_af(&built.scenario, &built.waveforms, q)?,
        SurfaceSel::Pa => {
            let w: Vec<Complex64> = built.tb.c.column(0).to_vec();
            pa_af(&built.scenario, &built.beams, &w, q)?
        }
    };
    match cfg.output.normalization {
        NormalizationSel::UnitPeak => g.unit_peak(),
        NormalizationSel::Raw => Ok(g),
    }
}

/// Cuts written for each surface.
pub fn standard_cuts(cfg: &ScenarioConfig) -> Vec<(&'static str, CutSpec)> {
    match cfg.sweep.kind {
        SweepKind::DelayDoppler => vec![
            ("zero-doppler", CutSpec::ZeroDoppler),
            ("zero-delay", CutSpec::ZeroDelay),
        ],
        SweepKind::AngleDoppler => vec![
            ("zero-doppler", CutSpec::ZeroDoppler),
            ("reference-angle", CutSpec::Axis1At(cfg.sweep.theta_deg.to_radians())),
        ],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub surface: SurfaceSel,
    pub file: String,
    pub peak: f64,
    pub shape: [usize; 2],
    pub cuts: Vec<CutSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutSummary {
    pub name: String,
    pub file: String,
    pub peak_sidelobe_db: Option<f64>,
}

/// Deterministic description of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub name: Option<String>,
    pub config_hash: String,
    pub crate_version: String,
    /// Fully expanded configuration, defaults included.
    pub config: ScenarioConfig,
    pub sample_rate: f64,
    pub pulse_width: f64,
    pub bandwidth: f64,
    pub energy: f64,
    pub beams: usize,
    pub design: Option<DesignSummary>,
    pub surfaces: Vec<SurfaceSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub config_hash: String,
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub metadata: Metadata,
    pub timing: Timing,
    pub grids: Vec<(SurfaceSel, AfGrid)>,
    pub cuts: Vec<(SurfaceSel, String, Cut)>,
}

/// Runs the whole pipeline and writes every artifact under `dir` (or the
/// config's output directory).
pub fn run_pipeline(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<RunOutput> {
    let hash = cfg.hash()?;
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    let mut stages = Vec::new();
    let t0 = Instant::now();
    let built = build(cfg)?;
    stages.push(("build".to_string(), t0.elapsed().as_secs_f64()));

    let t1 = Instant::now();
    let mut grids = Vec::new();
    let mut cuts = Vec::new();
    for &sel in &cfg.output.surfaces {
        let ws = if matches!(sel, SurfaceSel::Mimo | SurfaceSel::SquareSum) {
            &built.waveforms
        } else {
            &built.beams
        };
        let q = build_query(cfg, ws);
        let g = surface(&built, cfg, sel, &q).map_err(|e| e.in_stage("surface"))?;
        for (name, spec) in standard_cuts(cfg) {
            let c = cut(&g, spec).map_err(|e| e.in_stage("cuts"))?;
            cuts.push((sel, name.to_string(), c));
        }
        grids.push((sel, g));
    }
    stages.push(("surfaces".to_string(), t1.elapsed().as_secs_f64()));

    let t2 = Instant::now();
    let write = || -> Result<Vec<SurfaceSummary>> {
        std::fs::create_dir_all(&dir)?;
        let cfg_text = format!("# config={hash}\n{}", cfg.to_toml()?);
        std::fs::write(dir.join("config.toml"), cfg_text)?;
        let mut tf = TbFile::from(&built.tb);
        tf.config_hash = Some(hash.clone());
        std::fs::write(dir.join("beamspace.json"), serde_json::to_string_pretty(&tf)?)?;
        let mut wf = WaveformFile::from(&built.waveforms);
        wf.config_hash = Some(hash.clone());
        std::fs::write(dir.join("waveforms.json"), serde_json::to_string(&wf)?)?;
        let mut out = Vec::new();
        for (sel, g) in &grids {
            let file = format!("{}.csv", sel.name());
            write_grid_csv(dir.join(&file), g, &hash)?;
            let mut cs = Vec::new();
            for (s2, name, c) in &cuts {
                if s2 != sel {
                    continue;
                }
                let cf = format!("{}_cut_{name}.csv", sel.name());
                std::fs::write(dir.join(&cf), cut_csv(c, g.kind, cfg.output.db_floor, &hash))?;
                let (lo, hi) = (c.axis[0], c.axis[c.axis.len() - 1]);
                cs.push(CutSummary {
                    name: name.clone(),
                    file: cf,
                    peak_sidelobe_db: peak_sidelobe_db(c, lo, hi),
                });
            }
            out.push(SurfaceSummary {
                surface: *sel,
                file,
                peak: g.peak(),
                shape: [g.axis1.len(), g.axis2.len()],
                cuts: cs,
            });
        }
        Ok(out)
    };
    let surfaces = write().map_err(|e| e.in_stage("output"))?;
    let metadata = Metadata {
        name: cfg.name.clone(),
        config_hash: hash.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        sample_rate: built.beams.sample_rate(),
        pulse_width: built.beams.pulse_width(),
        bandwidth: built.beams.bandwidth(),
        energy: built.beams.energy(),
        beams: built.tb.beams(),
        design: built.design.clone(),
        surfaces,
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&metadata)?)
        .map_err(|e| Error::from(e).in_stage("output"))?;
    stages.push(("output".to_string(), t2.elapsed().as_secs_f64()));
    let timing = Timing {
        config_hash: hash,
        stages,
    };
    std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)
        .map_err(|e| Error::from(e).in_stage("output"))?;
    Ok(RunOutput {
        dir,
        metadata,
        timing,
        grids,
        cuts,
    })
}

/// `n` distinct sweep nodes drawn with a seeded generator, as
/// `(lag, Doppler mismatch, hypothesis angle)`. The match point is always
/// included.
pub fn oracle_points(cfg: &ScenarioConfig, ws: &WaveformSet, n: usize, seed: u64) -> Vec<(i64, f64, f64)> {
    let q = build_query(cfg, ws);
    let theta0 = q.reference.theta();
    let nodes: Vec<(i64, f64, f64)> = match &q.sweep {
        Sweep::DelayDoppler { lags, dopplers, .. } => lags
            .iter()
            .flat_map(|&l| dopplers.iter().map(move |&f| (l, f, theta0)))
            .collect(),
        Sweep::AngleDoppler { angles, dopplers, lag } => angles
            .iter()
            .flat_map(|&a| dopplers.iter().map(move |&f| (*lag, f, a)))
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<(i64, f64, f64)> = vec![(0, 0.0, theta0)];
    let rest: Vec<_> = nodes.into_iter().filter(|p| *p != (0, 0.0, theta0)).collect();
    picked.extend(rest.choose_multiple(&mut rng, n.saturating_sub(1)).cloned());
    picked
}

/// Compares the factored surface against the simulated receiver chain.
pub fn verify_oracle(cfg: &ScenarioConfig, points: usize, tol: f64, seed: u64) -> Result<OracleReport> {
    let built = build(cfg)?;
    let pts = oracle_points(cfg, &built.beams, points, seed);
    let reference = TargetParams::planar(cfg.sweep.theta_deg.to_radians(), 0.0, 0.0);
    compare(&built.scenario, &built.beams, &built.tb, &reference, &pts, tol).map_err(|e| e.in_stage("oracle"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = r#"
name = "small"

[waveforms]
kind = "polyphase"
count = 4
code_len = 16
pulse_width = 1e-5

[array]
tx = 4
rx = 3
phase_centers = "elements"

[sweep]
kind = "delay-doppler"
max_lag = 6
doppler_points = 9

[output]
surfaces = ["tb", "mimo", "square-sum"]
"#;

    #[test]
    fn small_run_writes_everything() {
        let cfg = parse_config(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&cfg, Some(dir.path())).unwrap();
        assert_eq!(out.grids.len(), 3);
        for f in ["tb.csv", "mimo.csv", "square-sum.csv", "tb_cut_zero-doppler.csv", "metadata.json", "timing.json", "beamspace.json", "waveforms.json", "config.toml"] {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.contains(&out.metadata.config_hash), "{f}");
        }
        for (_, g) in &out.grids {
            assert!((g.peak() - 1.0).abs() < 1e-12);
            assert_eq!(g.values.dim(), (13, 9));
        }
    }

    #[test]
    fn identity_tb_equals_mimo() {
        let cfg = parse_config(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&cfg, Some(dir.path())).unwrap();
        let (tb, mimo) = (&out.grids[0].1, &out.grids[1].1);
        for (a, b) in tb.values.iter().zip(mimo.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn default_query_axes() {
        let cfg = parse_config(&SMALL.replace("max_lag = 6\n", "")).unwrap();
        let built = build(&cfg).unwrap();
        let q = build_query(&cfg, &built.beams);
        match q.sweep {
            Sweep::DelayDoppler { lags, dopplers, .. } => {
                assert_eq!(lags.len(), 2 * 16 - 1);
                assert!((dopplers[8] - 2.0 / 1e-5).abs() < 1e-6);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn oracle_agrees_on_small_scenario() {
        let cfg = parse_config(SMALL).unwrap();
        let r = verify_oracle(&cfg, 12, 1e-6, 5).unwrap();
        assert_eq!(r.points.len(), 12);
        assert!(r.pass, "{}", r.max_rel_error);
        let again = verify_oracle(&cfg, 12, 1e-6, 5).unwrap();
        assert_eq!(r.max_rel_error.to_bits(), again.max_rel_error.to_bits());
    }

    #[test]
    fn stage_named_in_errors() {
        let text = SMALL
            .replace("kind = \"polyphase\"", "kind = \"file\"\npath = \"/nonexistent/w.json\"");
        let cfg = parse_config(&text).unwrap();
        let e = build(&cfg).unwrap_err();
        assert!(e.to_string().starts_with("waveforms:"), "{e}");
    }
}
