//! Transmit-beamspace matrix design.
//!
//! Both programs are min-max matching problems in epigraph form,
//!
//! ```text
//! minimize t
//!   subject to ‖Cᴴ a(θ_i) (⊙ a_TE(θ_i)) − d(θ_i)‖ ≤ t    θ_i in the sector
//!              ‖Cᴴ a(θ̄_j)‖ ≤ γ                          θ̄_j outside the sector
//! ```
//!
//! The ambiguity-constrained variant adds a unit-gain equality at the
//! reference target and modulus bounds on the ambiguity response inside
//! delay/Doppler control bands. Complex variables are realified as
//! `x = [t, Re vec(C), Im vec(C)]` and handed to an interior-point conic
//! solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{SecondOrderConeT, ZeroConeT},
};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::ambiguity::{eval_at, CrossAfStack};
use crate::error::{Error, Result};
use crate::geometry::{ArrayScenario, TargetParams};
use crate::tb_core::{Provenance, TbMatrix};

pub const DEFAULT_SECTOR_POINTS: usize = 61;
pub const DEFAULT_OUT_POINTS: usize = 80;
/// Slack below which a re-evaluated constraint counts as violated.
pub const SLACK_TOL: f64 = 1e-6;

/// `d(θ)` with entries `exp{jμ_k(θ)}`, `μ_k(θ) = −(k−1) π sin θ`.
pub fn desired_vector(theta: f64, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|i| Complex64::from_polar(1.0, -(i as f64) * PI * theta.sin()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfConstraints {
    /// Doppler mismatches of the control band (Hz).
    pub dopplers: Vec<f64>,
    /// Delay mismatches of the control band (s).
    pub delays: Vec<f64>,
    /// Hypothesis angles (rad).
    pub angles: Vec<f64>,
    pub delta: f64,
    /// Reference angle (rad).
    pub theta0: f64,
    /// Reference Doppler (Hz).
    pub doppler0: f64,
}

impl AfConstraints {
    pub fn reference(&self) -> TargetParams {
        TargetParams::planar(self.theta0, self.doppler0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// In-sector interval `[θ_lo, θ_hi]` (rad).
    pub sector: (f64, f64),
    pub sector_points: usize,
    pub transition: f64,
    /// Out-of-sector intervals. Empty means everything beyond the
    /// transition bands up to endfire.
    pub out_sector: Vec<(f64, f64)>,
    pub out_points: usize,
    pub beams: usize,
    pub gamma: f64,
    pub af: Option<AfConstraints>,
}

impl DesignSpec {
    pub fn sector(lo: f64, hi: f64, transition: f64, beams: usize, gamma: f64) -> Self {
        DesignSpec {
            sector: (lo, hi),
            sector_points: DEFAULT_SECTOR_POINTS,
            transition,
            out_sector: Vec::new(),
            out_points: DEFAULT_OUT_POINTS,
            beams,
            gamma,
            af: None,
        }
    }

    pub fn with_af(mut self, af: AfConstraints) -> Self {
        self.af = Some(af);
        self
    }

    pub fn out_intervals(&self) -> Vec<(f64, f64)> {
        if !self.out_sector.is_empty() {
            return self.out_sector.clone();
        }
        let (lo, hi) = self.sector;
        let mut v = Vec::new();
        if lo - self.transition > -FRAC_PI_2 {
            v.push((-FRAC_PI_2, lo - self.transition));
        }
        if hi + self.transition < FRAC_PI_2 {
            v.push((hi + self.transition, FRAC_PI_2));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sector;
        let mut errs = Vec::new();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            errs.push(format!("sector bounds must satisfy lo < hi, got [{lo}, {hi}]"));
        }
        if self.sector_points == 0 {
            errs.push("sector grid must be nonempty".into());
        }
        if !(self.transition >= 0.0) {
            errs.push("transition width must be nonnegative".into());
        }
        if self.out_points == 0 {
            errs.push("out-of-sector grid must be nonempty".into());
        }
        if self.beams == 0 {
            errs.push("beam count must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            errs.push(format!("gamma must be positive, got {}", self.gamma));
        }
        let out = self.out_intervals();
        if out.is_empty() {
            errs.push("out-of-sector region is empty".into());
        }
        for &(a, b) in &out {
            if !(a <= b) {
                errs.push(format!("out-of-sector interval [{a}, {b}] is reversed"));
            } else if b >= lo && a <= hi {
                errs.push(format!("out-of-sector interval [{a}, {b}] overlaps the sector"));
            }
        }
        if let Some(af) = &self.af {
            if !(af.delta > 0.0) {
                errs.push(format!("delta must be positive, got {}", af.delta));
            }
            let any = !af.dopplers.is_empty() || !af.delays.is_empty();
            if any && (af.dopplers.is_empty() || af.delays.is_empty() || af.angles.is_empty()) {
                errs.push("control band needs nonempty Doppler, delay and angle sets".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(errs.join("; ")))
        }
    }

    pub fn sector_grid(&self) -> Vec<f64> {
        linspace(self.sector.0, self.sector.1, self.sector_points)
    }

    /// Out-of-sector points shared between intervals in proportion to
    /// their lengths.
    pub fn out_grid(&self) -> Vec<f64> {
        let iv = self.out_intervals();
        let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
        let mut left = self.out_points;
        let mut pts = Vec::with_capacity(self.out_points);
        for (n, &(a, b)) in iv.iter().enumerate() {
            let share = if n + 1 == iv.len() {
                left
            } else if total > 0.0 {
                (((b - a) / total) * self.out_points as f64).round() as usize
            } else {
                self.out_points / iv.len()
            }
            .min(left);
            left -= share;
            pts.extend(linspace(a, b, share));
        }
        pts
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignStatus {
    Optimal,
    NearOptimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfSlack {
    pub delay: f64,
    pub doppler: f64,
    pub theta: f64,
    pub slack: f64,
}

/// Constraint slacks re-evaluated from the returned matrix. Negative
/// entries are violations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub sector: Vec<f64>,
    pub leakage: Vec<f64>,
    pub af: Vec<AfSlack>,
    pub gain_residual: Option<f64>,
    pub min_slack: f64,
}

/// Groups of constraints carrying weight in an infeasibility certificate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub sector: usize,
    pub leakage: usize,
    pub af: usize,
    pub gain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub status: DesignStatus,
    pub c: Option<TbMatrix>,
    /// Max in-sector residual of the returned matrix.
    pub objective: f64,
    pub solver_objective: f64,
    pub solver_status: String,
    pub iterations: u32,
    pub report: ConstraintReport,
    pub certificate: Option<Certificate>,
}

impl DesignResult {
    pub fn matrix(&self) -> Result<&TbMatrix> {
        self.c.as_ref().ok_or_else(|| {
            Error::Infeasible(match &self.certificate {
                Some(c) => format!(
                    "binding constraints: {} sector, {} leakage, {} ambiguity{}",
                    c.sector,
                    c.leakage,
                    c.af,
                    if c.gain { ", gain equality" } else { "" }
                ),
                None => self.solver_status.clone(),
            })
        })
    }
}

/// `vec(C)` as `[Re, Im]`, row-major in `(m, k)`.
pub fn realify(c: &Array2<Complex64>) -> Vec<f64> {
    let re = c.iter().map(|z| z.re);
    let im = c.iter().map(|z| z.im);
    re.chain(im).collect()
}

pub fn complexify(x: &[f64], m: usize, k: usize) -> Result<Array2<Complex64>> {
    if x.len() != 2 * m * k {
        return Err(Error::param(format!(
            "expected {} real entries for a {m}x{k} matrix, got {}",
            2 * m * k,
            x.len()
        )));
    }
    let n = m * k;
    Ok(Array2::from_shape_fn((m, k), |(i, j)| {
        Complex64::new(x[i * k + j], x[n + i * k + j])
    }))
}

/// Real coefficient rows of a complex linear form in `C`.
#[derive(Clone)]
struct Form {
    re: Vec<f64>,
    im: Vec<f64>,
}

struct Layout {
    m: usize,
    k: usize,
}

impl Layout {
    fn n(&self) -> usize {
        1 + 2 * self.m * self.k
    }
    fn cr(&self, m: usize, k: usize) -> usize {
        1 + m * self.k + k
    }
    fn ci(&self, m: usize, k: usize) -> usize {
        1 + self.m * self.k + m * self.k + k
    }
    fn zero(&self) -> Form {
        Form {
            re: vec![0.0; self.n()],
            im: vec![0.0; self.n()],
        }
    }
    /// Adds `c_mk · b`.
    fn add_lin(&self, f: &mut Form, m: usize, k: usize, b: Complex64) {
        let (r, i) = (self.cr(m, k), self.ci(m, k));
        f.re[r] += b.re;
        f.re[i] -= b.im;
        f.im[r] += b.im;
        f.im[i] += b.re;
    }
    /// Adds `conj(c_mk) · a`.
    fn add_conj(&self, f: &mut Form, m: usize, k: usize, a: Complex64) {
        let (r, i) = (self.cr(m, k), self.ci(m, k));
        f.re[r] += a.re;
        f.re[i] += a.im;
        f.im[r] += a.im;
        f.im[i] -= a.re;
    }
    /// `(Cᴴ a)_k · e`.
    fn beam_response(&self, a: &[Complex64], k: usize, e: Complex64) -> Form {
        let mut f = self.zero();
        for (m, &am) in a.iter().enumerate() {
            self.add_conj(&mut f, m, k, am * e);
        }
        f
    }
    /// `a_Tᴴ C v`.
    fn gain(&self, a: &[Complex64], v: &[Complex64]) -> Form {
        let mut f = self.zero();
        for (m, am) in a.iter().enumerate() {
            for (k, &vk) in v.iter().enumerate() {
                self.add_lin(&mut f, m, k, am.conj() * vk);
            }
        }
        f
    }
}

#[derive(Default)]
struct Program {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    tags: Vec<Tag>,
}

#[derive(Clone, Copy, PartialEq)]
enum Tag {
    Gain,
    Sector,
    Leakage,
    Af,
}

impl Program {
    fn push_zero(&mut self, f: &Form, target: Complex64) {
        self.rows.push(f.re.clone());
        self.b.push(target.re);
        self.rows.push(f.im.clone());
        self.b.push(target.im);
        self.cones.push(ZeroConeT(2));
        self.tags.push(Tag::Gain);
    }

    /// `‖(f_i − d_i)_i‖ ≤ t` when `bound` is `None`, else `‖f‖ ≤ bound`.
    fn push_soc(&mut self, n: usize, forms: &[Form], offsets: &[Complex64], bound: Option<f64>, tag: Tag) {
        let mut head = vec![0.0; n];
        match bound {
            None => {
                head[0] = -1.0;
                self.b.push(0.0);
            }
            Some(v) => self.b.push(v),
        }
        self.rows.push(head);
        for (f, d) in forms.iter().zip(offsets) {
            self.rows.push(f.re.iter().map(|v| -v).collect());
            self.b.push(-d.re);
            self.rows.push(f.im.iter().map(|v| -v).collect());
            self.b.push(-d.im);
        }
        self.cones.push(SecondOrderConeT(1 + 2 * forms.len()));
        self.tags.push(tag);
    }

    fn matrix(&self, n: usize) -> CscMatrix<f64> {
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    ii.push(r);
                    jj.push(c);
                    vv.push(v);
                }
            }
        }
        CscMatrix::new_from_triplets(self.rows.len(), n, ii, jj, vv)
    }
}

struct Problem<'a> {
    spec: &'a DesignSpec,
    sc: &'a ArrayScenario,
    /// `(delay, doppler, theta, X a_TE(Θ'))` per control point.
    af_points: Vec<(f64, f64, f64, Vec<Complex64>)>,
    reference: Option<TargetParams>,
}

fn hypothesis(af: &AfConstraints, theta: f64, delay: f64, doppler: f64) -> TargetParams {
    TargetParams::planar(theta, af.doppler0 - doppler, delay)
}

impl Problem<'_> {
    fn uses_te(&self) -> bool {
        self.reference.is_some()
    }

    fn sector_target(&self, theta: f64) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let t = TargetParams::planar(theta, 0.0, 0.0);
        let a = self.sc.steering_tx(&t);
        let e = if self.uses_te() {
            self.sc.steering_te(&t)
        } else {
            vec![Complex64::new(1.0, 0.0); self.spec.beams]
        };
        (a, e, desired_vector(theta, self.spec.beams))
    }

    fn build(&self, delta: Option<f64>) -> Program {
        let lay = Layout {
            m: self.sc.num_tx(),
            k: self.spec.beams,
        };
        let n = lay.n();
        let mut p = Program::default();
        if let Some(r) = &self.reference {
            let a = self.sc.steering_tx(r);
            let e = self.sc.steering_te(r);
            p.push_zero(&lay.gain(&a, &e), Complex64::new(self.spec.beams as f64, 0.0));
        }
        let sector: Vec<(Vec<Form>, Vec<Complex64>)> = self
            .spec
            .sector_grid()
            .par_iter()
            .map(|&th| {
                let (a, e, d) = self.sector_target(th);
                let forms = (0..lay.k).map(|k| lay.beam_response(&a, k, e[k])).collect();
                (forms, d)
            })
            .collect();
        for (forms, d) in &sector {
            p.push_soc(n, forms, d, None, Tag::Sector);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); lay.k];
        let leak: Vec<Vec<Form>> = self
            .spec
            .out_grid()
            .par_iter()
            .map(|&th| {
                let a = self.sc.steering_tx(&TargetParams::planar(th, 0.0, 0.0));
                (0..lay.k)
                    .map(|k| lay.beam_response(&a, k, Complex64::new(1.0, 0.0)))
                    .collect()
            })
            .collect();
        for forms in &leak {
            p.push_soc(n, forms, &zeros, Some(self.spec.gamma), Tag::Leakage);
        }
        if let (Some(r), Some(delta)) = (&self.reference, delta) {
            let a = self.sc.steering_tx(r);
            let forms: Vec<Form> = self
                .af_points
                .par_iter()
                .map(|(_, _, _, v)| lay.gain(&a, v))
                .collect();
            for f in &forms {
                p.push_soc(n, std::slice::from_ref(f), &zeros[..1], Some(delta), Tag::Af);
            }
        }
        p
    }

    /// Slack report against epigraph level `t`, and the max in-sector residual.
    fn report(&self, c: &TbMatrix, t: f64, delta: Option<f64>) -> (ConstraintReport, f64) {
        let residuals: Vec<f64> = self
            .spec
            .sector_grid()
            .iter()
            .map(|&th| {
                let (a, e, d) = self.sector_target(th);
                c.gains(&a)
                    .iter()
                    .zip(e.iter().zip(&d))
                    .map(|(g, (e, d))| (g.conj() * e - d).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let objective = residuals.iter().cloned().fold(0.0, f64::max);
        let sector: Vec<f64> = residuals.iter().map(|r| t - r).collect();
        let leakage: Vec<f64> = self
            .spec
            .out_grid()
            .iter()
            .map(|&th| {
                let a = self.sc.steering_tx(&TargetParams::planar(th, 0.0, 0.0));
                let norm = c.gains(&a).iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
                self.spec.gamma - norm
            })
            .collect();
        let mut af = Vec::new();
        let mut gain_residual = None;
        if let Some(r) = &self.reference {
            let g = Array1::from(c.gains(&self.sc.steering_tx(r)));
            let e = Array1::from(self.sc.steering_te(r));
            gain_residual = Some((g.dot(&e) - self.spec.beams as f64).norm());
            if let Some(delta) = delta {
                for (delay, doppler, theta, v) in &self.af_points {
                    let z = g.dot(&Array1::from(v.clone()));
                    af.push(AfSlack {
                        delay: *delay,
                        doppler: *doppler,
                        theta: *theta,
                        slack: delta - z.norm(),
                    });
                }
            }
        }
        let min_slack = sector
            .iter()
            .chain(&leakage)
            .cloned()
            .chain(af.iter().map(|s| s.slack))
            .chain(gain_residual.map(|g| -g))
            .fold(f64::INFINITY, f64::min);
        let report = ConstraintReport {
            sector,
            leakage,
            af,
            gain_residual,
            min_slack,
        };
        (report, objective)
    }

    fn solve(&self, delta: Option<f64>) -> Result<DesignResult> {
        let m = self.sc.num_tx();
        let k = self.spec.beams;
        let prog = self.build(delta);
        let n = 1 + 2 * m * k;
        let a = prog.matrix(n);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        q[0] = 1.0;
        let settings = DefaultSettings {
            verbose: false,
            max_iter: 200,
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &prog.b, &prog.cones, settings)
            .map_err(|e| Error::param(format!("conic solver rejected the problem: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status_name = format!("{:?}", sol.status);
        let infeasible = matches!(
            sol.status,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible
        );
        if infeasible {
            return Ok(DesignResult {
                status: DesignStatus::Infeasible,
                c: None,
                objective: f64::NAN,
                solver_objective: f64::NAN,
                solver_status: status_name,
                iterations: sol.iterations,
                report: ConstraintReport::default(),
                certificate: Some(certificate(&prog, &sol.z)),
            });
        }
        let c = TbMatrix::new(complexify(&sol.x[1..], m, k)?, Provenance::Designed)?;
        let (report, objective) = self.report(&c, sol.x[0], delta);
        let status = match sol.status {
            SolverStatus::Solved => DesignStatus::Optimal,
            SolverStatus::AlmostSolved => DesignStatus::NearOptimal,
            _ if report.min_slack >= -SLACK_TOL => DesignStatus::NearOptimal,
            _ => {
                return Err(Error::Infeasible(format!(
                    "conic solver stopped with status {status_name}"
                )))
            }
        };
        Ok(DesignResult {
            status,
            c: Some(c),
            objective,
            solver_objective: sol.obj_val,
            solver_status: status_name,
            iterations: sol.iterations,
            report,
            certificate: None,
        })
    }
}

fn certificate(prog: &Program, z: &[f64]) -> Certificate {
    let mut norms = Vec::with_capacity(prog.cones.len());
    let mut at = 0;
    for cone in &prog.cones {
        let d = match cone {
            ZeroConeT(d) | SecondOrderConeT(d) => *d,
            _ => 0,
        };
        norms.push(z[at..at + d].iter().map(|v| v * v).sum::<f64>().sqrt());
        at += d;
    }
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut cert = Certificate::default();
    for (tag, norm) in prog.tags.iter().zip(norms) {
        if norm > 1e-6 * scale {
            match tag {
                Tag::Gain => cert.gain = true,
                Tag::Sector => cert.sector += 1,
                Tag::Leakage => cert.leakage += 1,
                Tag::Af => cert.af += 1,
            }
        }
    }
    cert
}

fn check_scenario(spec: &DesignSpec, sc: &ArrayScenario) -> Result<()> {
    spec.validate()?;
    if sc.num_beams() != spec.beams {
        return Err(Error::param(format!(
            "scenario has {} equivalent phase centers, design asks for {} beams",
            sc.num_beams(),
            spec.beams
        )));
    }
    Ok(())
}

/// Spatial min-max design.
pub fn design_spatial(spec: &DesignSpec, sc: &ArrayScenario) -> Result<DesignResult> {
    if spec.af.is_some() {
        return Err(Error::param("spatial design takes no ambiguity constraints"));
    }
    spec.validate()?;
    Problem {
        spec,
        sc,
        af_points: Vec::new(),
        reference: None,
    }
    .solve(None)
}

fn af_problem<'a>(spec: &'a DesignSpec, sc: &'a ArrayScenario, stack: &CrossAfStack) -> Result<Problem<'a>> {
    check_scenario(spec, sc)?;
    let af = spec
        .af
        .as_ref()
        .ok_or_else(|| Error::param("ambiguity-constrained design needs a control band"))?;
    if stack.count() != spec.beams {
        return Err(Error::param(format!(
            "cross-ambiguity stack has {} waveforms, design asks for {} beams",
            stack.count(),
            spec.beams
        )));
    }
    let mut nodes = Vec::new();
    for &delay in &af.delays {
        for &doppler in &af.dopplers {
            for &theta in &af.angles {
                nodes.push((delay, doppler, theta));
            }
        }
    }
    let af_points = nodes
        .par_iter()
        .map(|&(delay, doppler, theta)| {
            let x = eval_at(stack, delay, doppler)?;
            let e = Array1::from(sc.steering_te(&hypothesis(af, theta, delay, doppler)));
            Ok((delay, doppler, theta, x.dot(&e).to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Problem {
        spec,
        sc,
        af_points,
        reference: Some(af.reference()),
    })
}

/// Min-max design with ambiguity sidelobe ceilings inside the control band
/// and the unit-gain equality `a_Tᴴ C a_TE = K` at the reference target.
pub fn design_af_constrained(
    spec: &DesignSpec,
    sc: &ArrayScenario,
    stack: &CrossAfStack,
) -> Result<DesignResult> {
    let prob = af_problem(spec, sc, stack)?;
    let delta = spec.af.as_ref().map(|a| a.delta);
    prob.solve(delta)
}

/// Smallest feasible ceiling in `[lo, hi]` found by bisection, for
/// diagnosing infeasible control bands.
pub fn min_feasible_delta(
    spec: &DesignSpec,
    sc: &ArrayScenario,
    stack: &CrossAfStack,
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
) -> Result<Option<f64>> {
    let prob = af_problem(spec, sc, stack)?;
    let feasible = |d: f64| match prob.solve(Some(d)) {
        Ok(r) => Ok(r.status != DesignStatus::Infeasible),
        Err(Error::Infeasible(_)) => Ok(false),
        Err(e) => Err(e),
    };
    if !feasible(hi)? {
        return Ok(None);
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if !feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::cross_af_matrix;
    use crate::geometry::{beam_centroids, ula, PhaseCenters};
    use crate::waveforms::gen_polyphase;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FC: f64 = 3e9;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn desired_vector_basics() {
        assert!(desired_vector(0.0, 4).iter().all(|z| (z - 1.0).norm() < 1e-15));
        for th in [-1.2, -0.3, 0.7] {
            assert!(desired_vector(th, 5).iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
        let (t1, t2) = (0.2, -0.1);
        let a = desired_vector(t1, 4);
        let b = desired_vector(t2, 4);
        let ip: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        let w = PI * (t1.sin() - t2.sin());
        let direct: Complex64 = (0..4).map(|k| Complex64::from_polar(1.0, k as f64 * w)).sum();
        assert!((ip - direct).norm() < 1e-12);
    }

    #[test]
    fn realify_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Array2::from_shape_fn((5, 3), |_| Complex64::new(rng.random(), rng.random()));
        assert_eq!(complexify(&realify(&c), 5, 3).unwrap(), c);
        assert!(complexify(&[0.0; 5], 1, 2).is_err());
    }

    #[test]
    fn layout_forms_match_complex_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, k) = (3, 2);
        let c = Array2::from_shape_fn((m, k), |_| Complex64::new(rng.random(), rng.random()));
        let mut x = vec![0.4];
        x.extend(realify(&c));
        let a: Vec<Complex64> = (0..m).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let v: Vec<Complex64> = (0..k).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let lay = Layout { m, k };
        let eval = |f: &Form| {
            Complex64::new(
                f.re.iter().zip(&x).map(|(p, q)| p * q).sum(),
                f.im.iter().zip(&x).map(|(p, q)| p * q).sum(),
            )
        };
        let e = Complex64::new(0.3, -0.8);
        let tm = TbMatrix::new(c.clone(), Provenance::Designed).unwrap();
        let want = tm.gains(&a)[1].conj() * e;
        assert!((eval(&lay.beam_response(&a, 1, e)) - want).norm() < 1e-12);
        let want: Complex64 = tm.gains(&a).iter().zip(&v).map(|(g, v)| g * v).sum();
        assert!((eval(&lay.gain(&a, &v)) - want).norm() < 1e-12);
    }

    #[test]
    fn grids_respect_sector_and_transitions() {
        let s = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), 4, 0.38);
        let inn = s.sector_grid();
        assert_eq!(inn.len(), 61);
        assert!((inn[0] - deg(-15.0)).abs() < 1e-15 && (inn[60] - deg(15.0)).abs() < 1e-15);
        let out = s.out_grid();
        assert_eq!(out.len(), 80);
        assert!(out.iter().all(|t| t.abs() >= deg(25.0) - 1e-12 && t.abs() <= FRAC_PI_2 + 1e-12));
        let mut bad = s.clone();
        bad.out_sector = vec![(deg(10.0), deg(40.0))];
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.gamma = 0.0;
        bad.beams = 0;
        match bad.validate() {
            Err(Error::Parameter(msg)) => assert!(msg.contains("gamma") && msg.contains("beam")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_is_optimal_when_desired_is_steering() {
        // K = M and d(θ) = a(θ) for a half-wavelength ULA with the
        // first element at the origin
        let m = 4;
        let lam = SPEED_OF_LIGHT_TEST / FC;
        let tx: Vec<[f64; 3]> = (0..m).map(|i| [i as f64 * lam / 2.0, 0.0, 0.0]).collect();
        let sc = ArrayScenario::new(tx.clone(), tx, FC).unwrap();
        let a0 = sc.steering_tx(&TargetParams::planar(0.3, 0.0, 0.0));
        let d0 = desired_vector(0.3, m);
        for (x, y) in a0.iter().zip(&d0) {
            assert!((x - y).norm() < 1e-9);
        }
        let spec = DesignSpec::sector(deg(-20.0), deg(20.0), deg(10.0), m, (m as f64).sqrt() + 1e-3);
        let res = design_spatial(&spec, &sc).unwrap();
        assert_eq!(res.status, DesignStatus::Optimal);
        assert!(res.objective <= 1e-6, "objective {}", res.objective);
        assert!(res.report.min_slack >= -SLACK_TOL);
    }

    const SPEED_OF_LIGHT_TEST: f64 = crate::geometry::SPEED_OF_LIGHT;

    fn eight_element_array(k: usize) -> ArrayScenario {
        ula(8, 8, FC).unwrap().with_phase_centers(PhaseCenters::Subarrays(k)).unwrap()
    }

    #[test]
    fn sector_design_is_feasible() {
        let sc = eight_element_array(4);
        let spec = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), 4, 0.38);
        let res = design_spatial(&spec, &sc).unwrap();
        assert_eq!(res.status, DesignStatus::Optimal);
        assert!(res.report.min_slack >= -SLACK_TOL, "{}", res.report.min_slack);
        assert!((res.objective - res.solver_objective).abs() < 1e-5);
    }

    #[test]
    fn tiny_gamma_is_infeasible_with_certificate() {
        // leakage ceiling zero forces C = 0, infeasible with a gain equality
        let sc = eight_element_array(2);
        let ws = gen_polyphase(2, 16, 1e-5, 1).unwrap();
        let stack = cross_af_matrix(&ws, &[0], &[0.0]).unwrap();
        let mut spec = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), 2, 1e-9);
        spec.sector_points = 9;
        spec.out_points = 12;
        let spec = spec.with_af(AfConstraints {
            dopplers: vec![],
            delays: vec![],
            angles: vec![],
            delta: 1.0,
            theta0: 0.0,
            doppler0: 0.0,
        });
        let res = design_af_constrained(&spec, &sc, &stack).unwrap();
        assert_eq!(res.status, DesignStatus::Infeasible);
        let cert = res.certificate.clone().unwrap();
        assert!(cert.gain && cert.leakage > 0);
        assert!(matches!(res.matrix(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn objective_nonincreasing_in_gamma() {
        let sc = eight_element_array(4);
        let mut last = f64::INFINITY;
        for g in [0.15, 0.25, 0.4, 0.8] {
            let mut spec = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), 4, g);
            spec.sector_points = 21;
            spec.out_points = 30;
            let res = design_spatial(&spec, &sc).unwrap();
            assert_ne!(res.status, DesignStatus::Infeasible);
            assert!(res.objective <= last + 1e-6, "gamma {g}: {} > {last}", res.objective);
            last = res.objective;
        }
    }

    fn small_af_setup(delta: f64, band: bool) -> (DesignSpec, ArrayScenario, CrossAfStack) {
        let k = 4;
        let mut spec = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), k, 0.3);
        spec.sector_points = 21;
        spec.out_points = 30;
        let base = design_spatial(&spec, &eight_element_array(k)).unwrap();
        let cents = beam_centroids(&base.matrix().unwrap().c, &eight_element_array(k).tx).unwrap();
        let sc = eight_element_array(k).with_phase_centers(PhaseCenters::Explicit(cents)).unwrap();
        let ws = gen_polyphase(k, 64, 60e-6, 1).unwrap();
        let dops: Vec<f64> = (0..7).map(|i| 18e3 + 2e3 * i as f64).collect();
        let mut all: Vec<f64> = dops.iter().map(|d| -d).rev().collect();
        all.extend(&dops);
        let stack = cross_af_matrix(&ws, &[0], &all).unwrap();
        let spec = spec.with_af(AfConstraints {
            dopplers: if band { all } else { vec![] },
            delays: if band { vec![0.0] } else { vec![] },
            angles: if band { vec![0.0] } else { vec![] },
            delta,
            theta0: 0.0,
            doppler0: 0.0,
        });
        (spec, sc, stack)
    }

    #[test]
    fn af_design_meets_gain_and_ceilings() {
        let (spec, sc, stack) = small_af_setup(0.3, true);
        let res = design_af_constrained(&spec, &sc, &stack).unwrap();
        assert_ne!(res.status, DesignStatus::Infeasible);
        assert!(res.report.gain_residual.unwrap() < 1e-6);
        assert!(res.report.af.iter().all(|s| s.slack >= -SLACK_TOL));
        assert!(res.report.min_slack >= -SLACK_TOL);
        assert_eq!(res.report.af.len(), 14);
    }

    #[test]
    fn loose_ceiling_recovers_unconstrained_objective() {
        let (loose, sc, stack) = small_af_setup(1e6, true);
        let (none, _, _) = small_af_setup(1e6, false);
        let a = design_af_constrained(&loose, &sc, &stack).unwrap();
        let b = design_af_constrained(&none, &sc, &stack).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-5, "{} vs {}", a.objective, b.objective);
    }

    #[test]
    fn spatial_rejects_af_block() {
        let (spec, sc, _) = small_af_setup(0.3, true);
        assert!(design_spatial(&spec, &sc).is_err());
    }

    #[test]
    fn design_is_deterministic() {
        let (spec, sc, stack) = small_af_setup(0.3, true);
        let a = design_af_constrained(&spec, &sc, &stack).unwrap();
        let b = design_af_constrained(&spec, &sc, &stack).unwrap();
        assert_eq!(a.c, b.c);
    }
}
