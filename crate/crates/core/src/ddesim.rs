//! Method-of-steps RK4 integration with cubic Hermite dense output, the
//! `z = (ψ₁, x_t)` projection, and detection of attracting and repelling cycles.

use crate::eigenbasis::{CVector, EigenBasis};
use crate::error::{Error, Result};
use crate::normalform::Stability;
use crate::quadrature::gauss_legendre;
use crate::system::{DelaySystem, ParamPoint, TaylorF};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryFn {
    Constant(Vec<f64>),
    /// `φ(s) = a·2Re(e^{λs}u)`.
    Eigenplane { amplitude: f64, lambda: Complex64, u: CVector },
}

impl HistoryFn {
    pub fn eigenplane(basis: &EigenBasis, amplitude: f64) -> Self {
        HistoryFn::Eigenplane { amplitude, lambda: basis.lambda1, u: basis.u.clone() }
    }

    pub fn eval(&self, s: f64, out: &mut [f64]) {
        match self {
            HistoryFn::Constant(c) => out.copy_from_slice(c),
            HistoryFn::Eigenplane { amplitude, lambda, u } => {
                let e = (lambda * s).exp();
                for (o, ui) in out.iter_mut().zip(u.iter()) {
                    *o = 2.0 * amplitude * (e * ui).re;
                }
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            HistoryFn::Constant(c) => c.len(),
            HistoryFn::Eigenplane { u, .. } => u.len(),
        }
    }
}

/// Right-hand side `A x + B y + f(x, y)` at a fixed parameter point.
#[derive(Debug, Clone)]
struct Rhs {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    f: TaylorF,
    scratch: Vec<f64>,
}

impl Rhs {
    fn eval(&mut self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.f.eval_real(x, y, &mut self.scratch);
        let n = out.len();
        for i in 0..n {
            let mut v = self.scratch[i];
            for j in 0..n {
                v += self.a[(i, j)] * x[j] + self.b[(i, j)] * y[j];
            }
            out[i] = v;
        }
    }
}

/// Grid solution with stored derivatives; `x(t)` for `t ≤ 0` comes from the history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    n: usize,
    r: f64,
    h: f64,
    steps_per_delay: usize,
    history: HistoryFn,
    states: Vec<f64>,
    derivs: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn delay(&self) -> f64 {
        self.r
    }

    /// Number of grid points, including `t = 0`.
    pub fn len(&self) -> usize {
        self.states.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    fn deriv(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.n..(i + 1) * self.n]
    }

    /// Dense output at any `t ≤ end_time()`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        if t <= 0.0 {
            self.history.eval(t, out);
            return;
        }
        let last = self.len() - 1;
        let i = ((t / self.h).floor() as usize).min(last.saturating_sub(1));
        self.hermite(i, t / self.h - i as f64, out);
    }

    /// Cubic Hermite on step `i` at fraction `θ ∈ [0, 1]`.
    fn hermite(&self, i: usize, theta: f64, out: &mut [f64]) {
        let (x0, x1, d0, d1) = (self.state(i), self.state(i + 1), self.deriv(i), self.deriv(i + 1));
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for k in 0..self.n {
            out[k] = h00 * x0[k] + h10 * self.h * d0[k] + h01 * x1[k] + h11 * self.h * d1[k];
        }
    }

    pub fn max_abs_in(&self, t0: f64, t1: f64) -> f64 {
        let i0 = (t0 / self.h).ceil().max(0.0) as usize;
        let i1 = ((t1 / self.h).floor() as usize).min(self.len() - 1);
        (i0..=i1)
            .flat_map(|i| self.state(i).iter().copied())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `t, x1..xn, re_z, im_z` rows, one per `stride` grid points.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        proj: &Projector,
        stride: usize,
    ) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        header.push("re_z".into());
        header.push("im_z".into());
        writeln!(w, "{}", header.join(","))?;
        for i in (0..self.len()).step_by(stride.max(1)) {
            let z = proj.at_grid(self, i);
            let mut row = vec![fmt15(self.time(i))];
            row.extend(self.state(i).iter().map(|v| fmt15(*v)));
            row.push(fmt15(z.re));
            row.push(fmt15(z.im));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal of `x` rounded to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().expect("float formatting round-trips")
}

fn fmt15(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&round15(x)).expect("finite float serializes")
    } else {
        x.to_string()
    }
}

/// Incremental RK4 integrator on a mesh aligned with the delay.
pub struct Integrator {
    rhs: Rhs,
    traj: Trajectory,
    y_buf: [Vec<f64>; 3],
}

impl Integrator {
    /// `h` is reduced to `r/m` with `m = ⌈r/h⌉` so that `t − r` falls on the mesh.
    pub fn new(sys: &DelaySystem, alpha: ParamPoint, history: HistoryFn, h: f64) -> Result<Self> {
        let r = sys.delay();
        if !(h > 0.0 && h <= r / 10.0 * (1.0 + 1e-12)) {
            return Err(Error::StepTooLarge { h, r });
        }
        let n = sys.n();
        if history.dim() != n {
            return Err(Error::Config(format!(
                "history has dimension {} but the system has n = {n}",
                history.dim()
            )));
        }
        let m = (r / h - 1e-9).ceil() as usize;
        let (a, b) = sys.eval_matrices(alpha);
        let mut rhs = Rhs { a, b, f: sys.taylor_f(alpha), scratch: vec![0.0; n] };
        let mut x0 = vec![0.0; n];
        let mut y0 = vec![0.0; n];
        history.eval(0.0, &mut x0);
        history.eval(-r, &mut y0);
        let mut d0 = vec![0.0; n];
        rhs.eval(&x0, &y0, &mut d0);
        let traj = Trajectory {
            n,
            r,
            h: r / m as f64,
            steps_per_delay: m,
            history,
            states: x0,
            derivs: d0,
        };
        Ok(Self { rhs, traj, y_buf: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }

    fn delayed(&self, i: usize, theta: f64, out: &mut [f64]) {
        let tr = &self.traj;
        let m = tr.steps_per_delay;
        if i >= m {
            let j = i - m;
            if theta == 0.0 {
                out.copy_from_slice(tr.state(j));
            } else if theta == 1.0 {
                out.copy_from_slice(tr.state(j + 1));
            } else {
                tr.hermite(j, theta, out);
            }
        } else {
            tr.history.eval((i as f64 + theta) * tr.h - tr.r, out);
        }
    }

    /// One RK4 step; returns `false` when the new state is not finite.
    pub fn advance(&mut self) -> bool {
        let n = self.traj.n;
        let h = self.traj.h;
        let i = self.traj.len() - 1;
        let mut y = std::mem::take(&mut self.y_buf);
        self.delayed(i, 0.0, &mut y[0]);
        self.delayed(i, 0.5, &mut y[1]);
        self.delayed(i, 1.0, &mut y[2]);
        let x: Vec<f64> = self.traj.state(i).to_vec();
        let k1: Vec<f64> = self.traj.deriv(i).to_vec();
        let mut tmp = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        for k in 0..n {
            tmp[k] = x[k] + 0.5 * h * k1[k];
        }
        self.rhs.eval(&tmp, &y[1], &mut k2);
        for k in 0..n {
            tmp[k] = x[k] + 0.5 * h * k2[k];
        }
        self.rhs.eval(&tmp, &y[1], &mut k3);
        for k in 0..n {
            tmp[k] = x[k] + h * k3[k];
        }
        self.rhs.eval(&tmp, &y[2], &mut k4);
        for k in 0..n {
            tmp[k] = x[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        let mut d = vec![0.0; n];
        self.rhs.eval(&tmp, &y[2], &mut d);
        self.y_buf = y;
        let finite = tmp.iter().chain(d.iter()).all(|v| v.is_finite());
        self.traj.states.extend_from_slice(&tmp);
        self.traj.derivs.extend_from_slice(&d);
        finite
    }
}

/// Integrates to `t_end` (rounded up to the mesh). Stops early, without error,
/// if the state stops being finite or its norm exceeds `escape_norm`.
pub fn integrate(
    sys: &DelaySystem,
    alpha: ParamPoint,
    history: HistoryFn,
    t_end: f64,
    h: f64,
    escape_norm: Option<f64>,
) -> Result<Trajectory> {
    let mut it = Integrator::new(sys, alpha, history, h)?;
    let steps = (t_end / it.traj.h - 1e-9).ceil().max(0.0) as usize;
    for _ in 0..steps {
        if !it.advance() {
            break;
        }
        if let Some(lim) = escape_norm {
            let x = it.traj.state(it.traj.len() - 1);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > lim {
                break;
            }
        }
    }
    Ok(it.into_trajectory())
}

fn gl3() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(3))
}

/// Evaluates `z(t) = (ψ₁, x_t) = v·x(t) + ∫_{−r}^0 v e^{−λ(ξ+r)} B x(t+ξ) dξ`.
#[derive(Debug, Clone)]
pub struct Projector {
    v: Vec<Complex64>,
    vb: Vec<Complex64>,
    lambda: Complex64,
    r: f64,
    has_delay: bool,
}

impl Projector {
    pub fn new(sys: &DelaySystem, alpha: ParamPoint, basis: &EigenBasis) -> Self {
        let (_, b) = sys.eval_matrices(alpha);
        let n = sys.n();
        let vb: Vec<Complex64> =
            (0..n).map(|j| (0..n).map(|i| basis.v[i] * b[(i, j)]).sum()).collect();
        Self {
            v: basis.v.iter().copied().collect(),
            has_delay: b.iter().any(|c| *c != 0.0),
            vb,
            lambda: basis.lambda1,
            r: sys.delay(),
        }
    }

    fn dot(a: &[Complex64], x: &[f64]) -> Complex64 {
        a.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `z` at an arbitrary time `t ≥ 0` covered by the trajectory.
    pub fn at(&self, traj: &Trajectory, t: f64) -> Complex64 {
        let mut buf = vec![0.0; traj.n];
        traj.eval(t, &mut buf);
        let head = Self::dot(&self.v, &buf);
        if !self.has_delay {
            return head;
        }
        // pieces split at mesh points and at t = 0 so every piece is one cubic
        let (nodes, weights) = gl3();
        let a = t - self.r;
        let mut cuts = vec![a];
        let first = (a / traj.h).floor() as i64 + 1;
        let last = (t / traj.h).ceil() as i64 - 1;
        for k in first..=last {
            cuts.push(k as f64 * traj.h);
        }
        cuts.push(t);
        let mut tail = Complex64::new(0.0, 0.0);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in nodes.iter().zip(weights.iter()) {
                let s = mid + half * x;
                traj.eval(s, &mut buf);
                let xi = s - t;
                tail += (-self.lambda * (xi + self.r)).exp() * Self::dot(&self.vb, &buf) * (half * wt);
            }
        }
        head + tail
    }

    pub fn at_grid(&self, traj: &Trajectory, i: usize) -> Complex64 {
        self.at(traj, traj.time(i))
    }
}

pub fn project_z(
    traj: &Trajectory,
    basis: &EigenBasis,
    sys: &DelaySystem,
    alpha: ParamPoint,
    t: f64,
) -> Complex64 {
    Projector::new(sys, alpha, basis).at(traj, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub a_min: f64,
    pub a_max: f64,
    pub escape_radius: f64,
    pub horizon_converge: f64,
    pub horizon_bisect: f64,
    pub h: f64,
    /// Relative bracket width at which bisection stops.
    pub bracket_rel: f64,
}

impl DetectOptions {
    /// Defaults from the predicted `|z|` amplitudes (may be empty).
    /// Horizons are at least `200r` and `400r`, stretched to cover
    /// several relaxation times `1/|μ|` near the Hopf point.
    pub fn defaults(r: f64, mu: f64, predicted: &[f64]) -> Self {
        let relax = if mu != 0.0 { 1.0 / mu.abs() } else { 0.0 };
        let big = predicted.iter().copied().fold(0.0, f64::max);
        let small = predicted.iter().copied().fold(f64::INFINITY, f64::min);
        let escape_radius = if big > 0.0 { 10.0 * big } else { 1.0 };
        Self {
            a_min: if small.is_finite() { 0.25 * small } else { 0.01 },
            a_max: if big > 0.0 { 3.0 * big } else { 0.5 * escape_radius },
            escape_radius,
            horizon_converge: (200.0 * r).max(40.0 * relax),
            horizon_bisect: (400.0 * r).max(40.0 * relax),
            h: r / 100.0,
            bracket_rel: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub amplitude: f64,
    pub period: Option<f64>,
    pub stability: Stability,
    /// Bisection bracket `[converging, escaping]` start amplitudes for repelling cycles.
    pub bracket: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleFindings {
    pub cycles: Vec<Cycle>,
    /// The trajectory from the smallest amplitude left the escape radius.
    pub escape: bool,
    /// The trajectory from the smallest amplitude decayed to the equilibrium.
    pub decay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Escapes,
    Converges,
    Undecided,
}

struct Run {
    integ: Integrator,
    proj: Projector,
    stride: usize,
}

impl Run {
    fn start(
        sys: &DelaySystem,
        alpha: ParamPoint,
        basis: &EigenBasis,
        a: f64,
        h: f64,
    ) -> Result<Self> {
        let integ = Integrator::new(sys, alpha, HistoryFn::eigenplane(basis, a), h)?;
        let m = integ.traj.steps_per_delay;
        let period = 2.0 * PI / basis.lambda1.im;
        // about 32 samples per period
        let stride = ((period / 32.0 / integ.traj.h).floor() as usize).clamp(1, m.max(1));
        let proj = Projector::new(sys, alpha, basis);
        Ok(Self { integ, proj, stride })
    }

    /// Advances one sample stride; `None` if the state stopped being finite.
    fn next(&mut self) -> Option<(f64, f64)> {
        for _ in 0..self.stride {
            if !self.integ.advance() {
                return None;
            }
        }
        let tr = &self.integ.traj;
        let i = tr.len() - 1;
        Some((tr.time(i), self.proj.at_grid(tr, i).norm()))
    }
}

/// Sustained-oscillation test over windows of `|z|` means.
struct WindowTracker {
    width: f64,
    start: f64,
    sum: f64,
    count: usize,
    means: Vec<f64>,
}

impl WindowTracker {
    fn new(width: f64) -> Self {
        Self { width, start: 0.0, sum: 0.0, count: 0, means: Vec::new() }
    }

    fn push(&mut self, t: f64, v: f64) -> bool {
        self.sum += v;
        self.count += 1;
        if t - self.start >= self.width {
            self.means.push(self.sum / self.count as f64);
            self.start = t;
            self.sum = 0.0;
            self.count = 0;
            return true;
        }
        false
    }

    /// Extrapolated limit once the remaining geometric tail is below `rel`.
    fn limit(&self, rel: f64) -> Option<f64> {
        let k = self.means.len();
        if k < 4 {
            return None;
        }
        let m = &self.means[k - 4..];
        let d: Vec<f64> = m.windows(2).map(|w| w[1] - w[0]).collect();
        let last = *m.last().unwrap();
        let q1 = if d[1] != 0.0 { d[2] / d[1] } else { 0.0 };
        let q0 = if d[0] != 0.0 { d[1] / d[0] } else { 0.0 };
        let q = q0.max(q1);
        if d[2] == 0.0 {
            return Some(last);
        }
        if !(q.abs() < 0.97) {
            return None;
        }
        let tail = d[2] * q / (1.0 - q);
        let tail = if q > 0.0 { tail } else { 0.0 };
        let changes_small = d[2].abs() <= rel * last && (d[2] * q).abs() <= rel * last;
        (changes_small && tail.abs() <= rel * last.abs()).then_some(last + tail)
    }
}

/// Mean spacing of upward zero crossings of `Re z` after `t0`.
fn crossing_period(proj: &Projector, traj: &Trajectory, t0: f64) -> Option<f64> {
    let stride = (traj.steps_per_delay / 32).max(1);
    let i0 = (t0 / traj.h).ceil() as usize;
    let mut prev: Option<(f64, f64)> = None;
    let mut ups = Vec::new();
    for i in (i0..traj.len()).step_by(stride) {
        let t = traj.time(i);
        let v = proj.at_grid(traj, i).re;
        if let Some((tp, vp)) = prev {
            if vp < 0.0 && v >= 0.0 {
                ups.push(tp + (t - tp) * (-vp) / (v - vp));
            }
        }
        prev = Some((t, v));
    }
    if ups.len() < 3 {
        return None;
    }
    Some((ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64)
}

enum Attractor {
    Cycle { amplitude: f64, period: Option<f64> },
    Equilibrium,
    Escape,
}

fn find_attractor(
    sys: &DelaySystem,
    alpha: ParamPoint,
    basis: &EigenBasis,
    opts: &DetectOptions,
) -> Result<Attractor> {
    let mut run = Run::start(sys, alpha, basis, opts.a_min, opts.h)?;
    let period = 2.0 * PI / basis.lambda1.im;
    let mut tracker = WindowTracker::new(4.0 * period);
    loop {
        let Some((t, v)) = run.next() else { return Ok(Attractor::Escape) };
        if v > opts.escape_radius {
            return Ok(Attractor::Escape);
        }
        if v < 1e-3 * opts.a_min && t > 4.0 * period {
            return Ok(Attractor::Equilibrium);
        }
        if tracker.push(t, v) {
            if let Some(amp) = tracker.limit(0.01) {
                if amp < 1e-2 * opts.a_min {
                    return Ok(Attractor::Equilibrium);
                }
                let tr = run.integ.trajectory();
                let period = crossing_period(&run.proj, tr, t - 8.0 * period);
                return Ok(Attractor::Cycle { amplitude: amp, period });
            }
        }
        if t >= opts.horizon_converge {
            return Err(Error::Inconclusive(format!(
                "|z| did not settle within t = {}",
                opts.horizon_converge
            )));
        }
    }
}

fn probe(
    sys: &DelaySystem,
    alpha: ParamPoint,
    basis: &EigenBasis,
    a: f64,
    inner: f64,
    opts: &DetectOptions,
    horizon: f64,
) -> Result<Fate> {
    let mut run = Run::start(sys, alpha, basis, a, opts.h)?;
    let settle = 0.5 * (a + inner);
    loop {
        let Some((t, v)) = run.next() else { return Ok(Fate::Escapes) };
        if v > opts.escape_radius {
            return Ok(Fate::Escapes);
        }
        if v < settle {
            return Ok(Fate::Converges);
        }
        if t >= horizon {
            return Ok(Fate::Undecided);
        }
    }
}

/// Looks for an attracting cycle from small amplitude and a repelling cycle
/// by bisection on the initial amplitude between "converges" and "escapes".
pub fn detect_cycles(
    sys: &DelaySystem,
    alpha: ParamPoint,
    basis: &EigenBasis,
    opts: &DetectOptions,
) -> Result<CycleFindings> {
    let mut findings = CycleFindings { cycles: Vec::new(), escape: false, decay: false };
    let inner = match find_attractor(sys, alpha, basis, opts)? {
        Attractor::Escape => {
            findings.escape = true;
            return Ok(findings);
        }
        Attractor::Equilibrium => {
            findings.decay = true;
            0.0
        }
        Attractor::Cycle { amplitude, period } => {
            findings.cycles.push(Cycle {
                amplitude,
                period,
                stability: Stability::Attracting,
                bracket: None,
            });
            amplitude
        }
    };

    let mut lo = inner.max(opts.a_min) * 1.02;
    let mut hi = opts.a_max;
    if hi <= lo {
        return Ok(findings);
    }
    let fates = [lo, hi]
        .par_iter()
        .map(|&a| probe(sys, alpha, basis, a, inner, opts, opts.horizon_bisect))
        .collect::<Result<Vec<_>>>()?;
    match (fates[0], fates[1]) {
        (Fate::Converges, Fate::Escapes) => {}
        (_, Fate::Converges) => return Ok(findings),
        (Fate::Escapes, _) => {
            return Err(Error::Inconclusive(format!(
                "start amplitude {lo} just above the attractor escapes"
            )))
        }
        _ => {
            return Err(Error::Inconclusive("bisection endpoints undecided".into()));
        }
    }
    // three probes per round, run concurrently
    while hi - lo > opts.bracket_rel * 0.5 * (hi + lo) {
        let pts: Vec<f64> = (1..=3).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect();
        let fates = pts
            .par_iter()
            .map(|&a| probe(sys, alpha, basis, a, inner, opts, opts.horizon_bisect))
            .collect::<Result<Vec<_>>>()?;
        if fates.contains(&Fate::Undecided) {
            return Err(Error::Inconclusive(format!(
                "bisection probe undecided within t = {}",
                opts.horizon_bisect
            )));
        }
        let first_escape = fates.iter().position(|f| *f == Fate::Escapes).unwrap_or(3);
        let last_conv = fates.iter().rposition(|f| *f == Fate::Converges);
        if let Some(lc) = last_conv {
            if lc > first_escape {
                return Err(Error::Inconclusive("non-monotone probe outcomes".into()));
            }
            lo = pts[lc];
        }
        if first_escape < 3 {
            hi = pts[first_escape];
        }
    }
    // re-verify the final bracket with a longer horizon
    let check = [lo, hi]
        .par_iter()
        .map(|&a| probe(sys, alpha, basis, a, inner, opts, 1.5 * opts.horizon_bisect))
        .collect::<Result<Vec<_>>>()?;
    if check != [Fate::Converges, Fate::Escapes] {
        return Err(Error::Inconclusive("bisection bracket failed re-verification".into()));
    }
    findings.cycles.push(Cycle {
        amplitude: 0.5 * (lo + hi),
        period: None,
        stability: Stability::Repelling,
        bracket: Some([lo, hi]),
    });
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{golden, hayes, wright};

    #[test]
    fn linear_decay_matches_exponential() {
        let sys = DelaySystem::new(
            1,
            1.0,
            vec![vec![crate::system::AlphaPoly::constant(-1.0)]],
            vec![vec![crate::system::AlphaPoly::zero()]],
            vec![],
        )
        .unwrap();
        let a = ParamPoint::new(0.0, 0.0);
        let tr = integrate(&sys, a, HistoryFn::Constant(vec![1.0]), 1.0, 1e-3, None).unwrap();
        assert!((tr.state(tr.len() - 1)[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_history_stays_zero() {
        let a = ParamPoint::new(0.3, 0.0);
        let tr = integrate(&wright(), a, HistoryFn::Constant(vec![0.0]), 20.0, 0.01, None).unwrap();
        assert_eq!(tr.max_abs_in(0.0, 20.0), 0.0);
    }

    #[test]
    fn step_too_large() {
        let a = ParamPoint::new(0.0, 0.0);
        assert!(matches!(
            integrate(&hayes(1.0), a, HistoryFn::Constant(vec![1.0]), 1.0, 0.2, None),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn projection_recovers_eigenplane_amplitude() {
        let sys = wright();
        let a = ParamPoint::new(0.0, 0.0);
        let basis = EigenBasis::compute(&sys, a, Complex64::new(0.0, std::f64::consts::FRAC_PI_2)).unwrap();
        let tr = integrate(&sys, a, HistoryFn::eigenplane(&basis, 0.3), 0.0, 0.01, None).unwrap();
        let z = project_z(&tr, &basis, &sys, a, 0.0);
        assert!((z - Complex64::new(0.3, 0.0)).norm() < 1e-6, "{z}");
    }

    #[test]
    fn window_limit_extrapolates() {
        let mut w = WindowTracker::new(1.0);
        for k in 0..40 {
            let t = k as f64 + 1.0;
            w.push(t, 1.0 - 0.5 * 0.8f64.powi(k));
        }
        let l = w.limit(0.01).unwrap();
        assert!((l - 1.0).abs() < 1e-3, "{l}");
    }

    #[test]
    fn golden_unstable_region_escapes() {
        let sys = golden(0.5, 1.0);
        let a = ParamPoint::new(0.04, 0.1);
        let basis = EigenBasis::compute(&sys, a, Complex64::new(0.04, 1.0)).unwrap();
        let opts = DetectOptions::defaults(1.0, 0.04, &[]);
        let f = detect_cycles(&sys, a, &basis, &opts).unwrap();
        assert!(f.escape && f.cycles.is_empty());
    }
}
