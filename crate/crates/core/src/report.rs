//! Pipeline orchestration and the serialized `BautinReport`.

use crate::ddesim::{detect_cycles, round15, CycleFindings, DetectOptions, HistoryFn, Integrator, Projector, Trajectory};
use crate::error::{Error, Result};
use crate::manifold::FULL_ORDER;
use crate::normalform::{
    beta_map, check_h2, classify_region, default_fd_step, find_bautin, h1_report, hopf_point,
    hopf_point_from, radial_amplitudes, BautinSearch, BetaCoords, H2Report, HopfPoint, NuCoords,
    PipelineOptions, Region, Stability, REGION_TOL,
};
use crate::spectrum::{CharRoot, H1Report};
use crate::system::{DelaySystem, ParamPoint, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_MAX_ITER: usize = 50;
/// Grid points evaluated per parallel batch before the batch is written out.
const GRID_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Analyze,
    BautinSearch,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotEvaluated,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub t: Option<f64>,
    pub h: Option<f64>,
    /// Initial eigenplane amplitude for `simulate`.
    pub amplitude: Option<f64>,
}

/// `a1min:a1max:n1,a2min:a2max:n2`; points are ordered with `α₂` varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha1: (f64, f64, usize),
    pub alpha2: (f64, f64, usize),
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid spec {text:?}: expected a1min:a1max:n1,a2min:a2max:n2"));
        let axes: Vec<&str> = text.split(',').collect();
        if axes.len() != 2 {
            return Err(bad());
        }
        let axis = |s: &str| -> Result<(f64, f64, usize)> {
            let p: Vec<&str> = s.split(':').collect();
            if p.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = p[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = p[1].trim().parse().map_err(|_| bad())?;
            let n: usize = p[2].trim().parse().map_err(|_| bad())?;
            if n == 0 || !lo.is_finite() || !hi.is_finite() {
                return Err(bad());
            }
            Ok((lo, hi, n))
        };
        Ok(Self { alpha1: axis(axes[0])?, alpha2: axis(axes[1])? })
    }

    fn coord((lo, hi, n): (f64, f64, usize), i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.alpha1.2 * self.alpha2.2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> ParamPoint {
        let n2 = self.alpha2.2;
        ParamPoint::new(Self::coord(self.alpha1, idx / n2), Self::coord(self.alpha2, idx % n2))
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeRequest {
    pub mode: Mode,
    pub system: DelaySystem,
    pub system_file: Option<String>,
    pub alpha: ParamPoint,
    pub grid: Option<GridSpec>,
    pub pipeline: PipelineOptions,
    pub fd_step: Option<f64>,
    pub sim: SimOptions,
    pub max_iter: usize,
}

impl AnalyzeRequest {
    pub fn new(mode: Mode, system: DelaySystem, alpha: ParamPoint) -> Self {
        Self {
            mode,
            system,
            system_file: None,
            alpha,
            grid: None,
            pipeline: PipelineOptions::default(),
            fd_step: None,
            sim: SimOptions::default(),
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    fn echo(&self) -> InputEcho {
        InputEcho {
            system_file: self.system_file.clone(),
            system: self.system.to_config(),
            alpha: [self.alpha.alpha1, self.alpha.alpha2],
            grid: self.grid,
            h1_delta: self.pipeline.delta(self.system.delay()),
            scan_re: self.pipeline.window(self.system.delay()).sigma_max,
            scan_im: self.pipeline.window(self.system.delay()).omega_max,
            fd_step: self.fd_step,
            sim: self.sim,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputEcho {
    pub system_file: Option<String>,
    pub system: SystemConfig,
    pub alpha: [f64; 2],
    pub grid: Option<GridSpec>,
    pub h1_delta: f64,
    pub scan_re: f64,
    pub scan_im: f64,
    pub fd_step: Option<f64>,
    pub sim: SimOptions,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSection {
    pub roots: Vec<CharRoot>,
    pub h1: H1Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GCoeff {
    pub j: usize,
    pub k: usize,
    pub value: [f64; 2],
}

/// Reduction data at one parameter point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfSection {
    pub alpha: [f64; 2],
    pub lambda1: [f64; 2],
    pub mu: f64,
    pub omega: f64,
    pub l1: f64,
    pub l2: Option<f64>,
    pub g: Vec<GCoeff>,
    pub bordered_orders: Vec<[usize; 2]>,
}

impl HopfSection {
    fn from(hp: &HopfPoint) -> Self {
        Self {
            alpha: [hp.alpha.alpha1, hp.alpha.alpha2],
            lambda1: [hp.lambda1.re, hp.lambda1.im],
            mu: hp.mu(),
            omega: hp.omega(),
            l1: hp.l1,
            l2: hp.l2,
            g: hp
                .expansion
                .g
                .iter()
                .filter(|(j, k, _)| j + k >= 2)
                .map(|(j, k, c)| GCoeff { j, k, value: [c.re, c.im] })
                .collect(),
            bordered_orders: hp
                .expansion
                .w
                .values()
                .filter(|c| c.bordered)
                .map(|c| [c.j, c.k])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BautinSection {
    pub found: bool,
    pub search: Option<BautinSearch>,
    pub at_alpha0: Option<HopfSection>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypotheses {
    pub h1: Verdict,
    pub h2: Verdict,
    pub h3: Verdict,
    pub notes: Vec<String>,
}

/// Per-query-point classification; also the line-delimited grid record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub index: Option<usize>,
    pub alpha: [f64; 2],
    pub h1: Verdict,
    pub nu: Option<NuCoords>,
    pub l2: Option<f64>,
    pub beta: Option<BetaCoords>,
    pub region: Option<Region>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    /// Positive roots of `ν₁ + l₁ρ² + l₂ρ⁴` (amplitudes in `|z|` units).
    pub radial_amplitudes: Vec<f64>,
    pub note: Option<String>,
}

impl Classification {
    fn empty(alpha: ParamPoint, h1: Verdict) -> Self {
        Self {
            index: None,
            alpha: [alpha.alpha1, alpha.alpha2],
            h1,
            nu: None,
            l2: None,
            beta: None,
            region: None,
            rho1: None,
            rho2: None,
            radial_amplitudes: Vec::new(),
            note: None,
        }
    }

    fn from_hopf(hp: &HopfPoint) -> Self {
        let mut c = Self::empty(hp.alpha, Verdict::Holds);
        let nu = hp.nu();
        let l2 = hp.l2.expect("full-order reduction");
        c.nu = Some(nu);
        c.l2 = Some(l2);
        c.radial_amplitudes = radial_amplitudes(nu.nu1, nu.nu2, l2);
        match beta_map(nu, l2).and_then(|b| classify_region(b, REGION_TOL).map(|r| (b, r))) {
            Ok((b, r)) => {
                c.beta = Some(b);
                c.region = Some(r.region);
                c.rho1 = r.amplitudes.map(|a| a.rho1);
                c.rho2 = r.amplitudes.map(|a| a.rho2);
            }
            Err(e) => {
                c.beta = beta_map(nu, l2).ok();
                c.note = Some(e.to_string());
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Completed,
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeComparison {
    pub predicted: f64,
    pub observed: f64,
    pub rel_error: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSection {
    pub status: SimStatus,
    pub message: Option<String>,
    pub options: Option<DetectOptions>,
    pub findings: Option<CycleFindings>,
    pub predicted_count: Option<usize>,
    pub observed_count: Option<usize>,
    pub agreement: Option<bool>,
    pub amplitudes: Vec<AmplitudeComparison>,
}

impl SimulationSection {
    fn skipped(message: impl Into<String>) -> Self {
        Self {
            status: SimStatus::Skipped,
            message: Some(message.into()),
            options: None,
            findings: None,
            predicted_count: None,
            observed_count: None,
            agreement: None,
            amplitudes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BautinReport {
    pub version: String,
    pub mode: Mode,
    pub input: InputEcho,
    pub spectrum: Option<SpectrumSection>,
    pub hopf: Option<HopfSection>,
    pub bautin: Option<BautinSection>,
    pub h2: Option<H2Report>,
    pub hypotheses: Hypotheses,
    /// H1, H2 and H3 all hold, so a Bautin bifurcation takes place at `α₀`.
    pub bautin_bifurcation: bool,
    pub classification: Option<Classification>,
    pub simulation: Option<SimulationSection>,
}

impl BautinReport {
    fn new(req: &AnalyzeRequest) -> Self {
        Self {
            version: VERSION.to_string(),
            mode: req.mode,
            input: req.echo(),
            spectrum: None,
            hopf: None,
            bautin: None,
            h2: None,
            hypotheses: Hypotheses {
                h1: Verdict::NotEvaluated,
                h2: Verdict::NotEvaluated,
                h3: Verdict::NotEvaluated,
                notes: Vec::new(),
            },
            bautin_bifurcation: false,
            classification: None,
            simulation: None,
        }
    }

    /// Deterministic JSON with every float rounded to 15 significant digits.
    pub fn to_json(&self) -> String {
        to_canonical_json(self, true)
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| n.is_f64()) {
                if let Some(r) = serde_json::Number::from_f64(round15(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes with floats rounded to 15 significant digits; non-finite floats become `null`.
pub fn to_canonical_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    round_value(&mut v);
    if pretty {
        serde_json::to_string_pretty(&v).expect("value serializes")
    } else {
        serde_json::to_string(&v).expect("value serializes")
    }
}

fn spectrum_section(h1: &H1Report) -> SpectrumSection {
    let mut roots: Vec<CharRoot> = h1.others.clone();
    if let Some(l) = h1.lambda1 {
        roots.push(l);
        let mut c = l;
        c.lambda = l.lambda.conj();
        roots.push(c);
    }
    roots.sort_by(|a, b| {
        (b.lambda.re, a.lambda.im).partial_cmp(&(a.lambda.re, b.lambda.im)).expect("finite roots")
    });
    SpectrumSection { roots, h1: h1.clone() }
}

/// Failures that are verdicts rather than inability to analyze.
fn is_verdict_error(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. } | Error::H1Violated(_) | Error::NoLeadingPair(_) | Error::DegenerateL2(_)
    )
}

pub fn run_spectrum(req: &AnalyzeRequest) -> Result<BautinReport> {
    let mut rep = BautinReport::new(req);
    let h1 = h1_report(&req.system, req.alpha, &req.pipeline)?;
    rep.hypotheses.h1 = Verdict::from_bool(h1.holds);
    if !h1.holds {
        rep.hypotheses.notes.push(format!("H1: {}", h1.reason));
    }
    rep.spectrum = Some(spectrum_section(&h1));
    Ok(rep)
}

/// Bautin point search plus the H2/H3 checks at the point found.
fn bautin_block(req: &AnalyzeRequest, guess: ParamPoint, rep: &mut BautinReport, fatal: bool) -> Result<()> {
    let sys = &req.system;
    let found = match find_bautin(sys, guess, req.max_iter, &req.pipeline) {
        Ok(f) => f,
        Err(e) if !fatal && is_verdict_error(&e) => {
            rep.bautin = Some(BautinSection {
                found: false,
                search: None,
                at_alpha0: None,
                message: Some(e.to_string()),
            });
            rep.hypotheses.h2 = Verdict::Fails;
            rep.hypotheses.h3 = Verdict::Fails;
            rep.hypotheses.notes.push(format!("H2: no point with mu = l1 = 0 found ({e})"));
            rep.hypotheses.notes.push("H3: undefined without a Bautin point".into());
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let hp0 = hopf_point(sys, found.alpha0, &req.pipeline, FULL_ORDER)?;
    let l2 = hp0.l2.expect("full order");
    let h = req.fd_step.unwrap_or_else(|| default_fd_step(found.alpha0));
    let h2 = check_h2(sys, found.alpha0, h, &req.pipeline)?;
    rep.hypotheses.h2 = Verdict::from_bool(h2.holds);
    if !h2.holds {
        rep.hypotheses.notes.push(format!("H2: |det J| = {:e} <= 1e-6", h2.det.abs()));
    }
    rep.hypotheses.h3 = Verdict::from_bool(l2 > 0.0);
    if l2 <= 0.0 {
        rep.hypotheses.notes.push(format!("H3: l2(alpha0) = {l2} is not positive"));
    }
    rep.h2 = Some(h2);
    rep.bautin = Some(BautinSection {
        found: true,
        search: Some(found),
        at_alpha0: Some(HopfSection::from(&hp0)),
        message: None,
    });
    Ok(())
}

fn finish(rep: &mut BautinReport) {
    let h = &rep.hypotheses;
    rep.bautin_bifurcation = [h.h1, h.h2, h.h3].iter().all(|v| *v == Verdict::Holds);
}

/// Spectrum → eigenbasis → manifold → normal form at the query point, plus
/// the Bautin point search and hypothesis checks.
pub fn run_analyze(req: &AnalyzeRequest) -> Result<BautinReport> {
    let (rep, _) = analyze_inner(req)?;
    Ok(rep)
}

fn analyze_inner(req: &AnalyzeRequest) -> Result<(BautinReport, Option<HopfPoint>)> {
    let mut rep = run_spectrum(req)?;
    rep.mode = req.mode;
    let h1 = rep.spectrum.as_ref().expect("spectrum").h1.clone();
    let hp = if h1.holds {
        let hp = hopf_point_from(&req.system, req.alpha, h1, FULL_ORDER)?;
        rep.hopf = Some(HopfSection::from(&hp));
        rep.classification = Some(Classification::from_hopf(&hp));
        Some(hp)
    } else {
        rep.classification = Some(Classification::empty(req.alpha, Verdict::Fails));
        None
    };
    bautin_block(req, req.alpha, &mut rep, false)?;
    finish(&mut rep);
    Ok((rep, hp))
}

pub fn run_bautin_search(req: &AnalyzeRequest) -> Result<BautinReport> {
    let mut rep = BautinReport::new(req);
    bautin_block(req, req.alpha, &mut rep, true)?;
    let alpha0 = rep.bautin.as_ref().and_then(|b| b.search).expect("found").alpha0;
    let h1 = h1_report(&req.system, alpha0, &req.pipeline)?;
    rep.hypotheses.h1 = Verdict::from_bool(h1.holds);
    rep.spectrum = Some(spectrum_section(&h1));
    finish(&mut rep);
    Ok(rep)
}

fn detect_options(req: &AnalyzeRequest, hp: &HopfPoint, predicted: &[f64]) -> DetectOptions {
    let mut o = DetectOptions::defaults(req.system.delay(), hp.mu(), predicted);
    if let Some(t) = req.sim.t {
        o.horizon_converge = t;
        o.horizon_bisect = t;
    }
    if let Some(h) = req.sim.h {
        o.h = h;
    }
    o
}

/// Compares simulated cycles with the predicted region.
pub fn run_verify(req: &AnalyzeRequest) -> Result<BautinReport> {
    let (mut rep, hp) = analyze_inner(req)?;
    let Some(hp) = hp else {
        rep.simulation = Some(SimulationSection::skipped("H1 fails at the query point"));
        return Ok(rep);
    };
    let class = rep.classification.clone().expect("classification");
    let Some(region) = class.region else {
        rep.simulation = Some(SimulationSection::skipped(
            class.note.unwrap_or_else(|| "no region prediction".into()),
        ));
        return Ok(rep);
    };
    let predicted = class.radial_amplitudes.clone();
    let opts = detect_options(req, &hp, &predicted);
    let mut sim = SimulationSection::skipped("");
    sim.options = Some(opts);
    sim.predicted_count = region.cycle_count();
    sim.message = None;
    match detect_cycles(&req.system, req.alpha, hp.basis(), &opts) {
        Ok(findings) => {
            sim.status = SimStatus::Completed;
            sim.observed_count = Some(findings.cycles.len());
            sim.agreement = match region {
                Region::TwoCycles => Some(
                    findings.cycles.len() == 2
                        && findings.cycles[0].stability == Stability::Attracting
                        && findings.cycles[1].stability == Stability::Repelling,
                ),
                Region::NoCycleUnstable => Some(findings.cycles.is_empty() && findings.escape),
                _ => None,
            };
            if findings.cycles.len() == predicted.len() {
                sim.amplitudes = predicted
                    .iter()
                    .zip(&findings.cycles)
                    .map(|(p, c)| AmplitudeComparison {
                        predicted: *p,
                        observed: c.amplitude,
                        rel_error: (c.amplitude - p).abs() / p,
                        stability: c.stability,
                    })
                    .collect();
            }
            sim.findings = Some(findings);
        }
        Err(Error::Inconclusive(msg)) => {
            sim.status = SimStatus::Inconclusive;
            sim.message = Some(msg);
        }
        Err(e) => return Err(e),
    }
    rep.simulation = Some(sim);
    Ok(rep)
}

/// Dispatches on `req.mode`; `simulate` is handled by [`run_simulate`].
pub fn run(req: &AnalyzeRequest) -> Result<BautinReport> {
    match req.mode {
        Mode::Spectrum => run_spectrum(req),
        Mode::Analyze => run_analyze(req),
        Mode::BautinSearch => run_bautin_search(req),
        Mode::Verify => run_verify(req),
        Mode::Simulate => Err(Error::Config("simulate produces a trajectory, not a report".into())),
    }
}

/// Integrates from an eigenplane history at the query point.
pub fn run_simulate(req: &AnalyzeRequest) -> Result<(Trajectory, Projector)> {
    let sys = &req.system;
    let roots = crate::spectrum::find_roots_with(
        &crate::spectrum::Characteristic::new(sys, req.alpha),
        req.pipeline.window(sys.delay()),
    )?;
    let lead = crate::spectrum::leading_pair_of(&roots)?;
    let basis = crate::eigenbasis::EigenBasis::compute(sys, req.alpha, lead.lambda)?;
    let r = sys.delay();
    let t = req.sim.t.unwrap_or(200.0 * r);
    let h = req.sim.h.unwrap_or(r / 100.0);
    let a = req.sim.amplitude.unwrap_or(0.1);
    let mut it = Integrator::new(sys, req.alpha, HistoryFn::eigenplane(&basis, a), h)?;
    let steps = (t / it.trajectory().step() - 1e-9).ceil().max(0.0) as usize;
    for _ in 0..steps {
        if !it.advance() {
            break;
        }
    }
    Ok((it.into_trajectory(), Projector::new(sys, req.alpha, &basis)))
}

fn grid_record(req: &AnalyzeRequest, idx: usize, alpha: ParamPoint) -> Classification {
    let mut rec = match h1_report(&req.system, alpha, &req.pipeline) {
        Err(e) => {
            let mut c = Classification::empty(alpha, Verdict::NotEvaluated);
            c.note = Some(format!("[{}] {e}", e.stage()));
            c
        }
        Ok(h1) if !h1.holds => {
            let mut c = Classification::empty(alpha, Verdict::Fails);
            c.note = Some(format!("H1: {}", h1.reason));
            c
        }
        Ok(h1) => match req.mode {
            Mode::Spectrum => Classification::empty(alpha, Verdict::Holds),
            _ => match hopf_point_from(&req.system, alpha, h1, FULL_ORDER) {
                Ok(hp) => Classification::from_hopf(&hp),
                Err(e) => {
                    let mut c = Classification::empty(alpha, Verdict::Holds);
                    c.note = Some(format!("[{}] {e}", e.stage()));
                    c
                }
            },
        },
    };
    rec.index = Some(idx);
    rec
}

/// Streams one JSON line per grid point, in input order. Points are
/// evaluated in parallel batches so memory stays flat.
pub fn run_grid<W: Write>(req: &AnalyzeRequest, grid: &GridSpec, mut out: W) -> std::io::Result<()> {
    let n = grid.len();
    let mut start = 0;
    while start < n {
        let end = (start + GRID_BATCH).min(n);
        let recs: Vec<Classification> = (start..end)
            .into_par_iter()
            .map(|i| grid_record(req, i, grid.point(i)))
            .collect();
        for r in &recs {
            writeln!(out, "{}", to_canonical_json(r, false))?;
        }
        start = end;
    }
    out.flush()
}
