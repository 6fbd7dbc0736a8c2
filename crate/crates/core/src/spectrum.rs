//! Characteristic matrix `Δ(λ) = λI − A − e^{−λr}B`, argument-principle root
//! counting, certified root location and the H1 check.

use crate::error::{Error, Result};
use crate::system::{DelaySystem, ParamPoint};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest |det Δ| (relative to [`Characteristic::scale`]) tolerated on a contour.
const CONTOUR_FLOOR: f64 = 1e-11;
/// Relative threshold on |d/dλ det Δ| below which a root is flagged non-simple.
pub const SIMPLE_THRESHOLD: f64 = 1e-8;
/// Rectangles narrower than this stop subdividing and report a clustered root.
const MIN_RECT: f64 = 1e-7;

/// Characteristic matrix of the linearization at a fixed parameter point.
#[derive(Debug, Clone)]
pub struct Characteristic {
    pub n: usize,
    pub r: f64,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    norm_a: f64,
    norm_b: f64,
}

impl Characteristic {
    pub fn new(sys: &DelaySystem, alpha: ParamPoint) -> Self {
        let (a, b) = sys.eval_matrices(alpha);
        Self::from_real(a, b, sys.delay())
    }

    pub fn from_real(a: DMatrix<f64>, b: DMatrix<f64>, r: f64) -> Self {
        let norm_a = a.norm();
        let norm_b = b.norm();
        Self {
            n: a.nrows(),
            r,
            a: a.map(|x| Complex64::new(x, 0.0)),
            b: b.map(|x| Complex64::new(x, 0.0)),
            norm_a,
            norm_b,
        }
    }

    /// `Δ(λ) = λI − A − e^{−λr}B`.
    pub fn matrix(&self, lambda: Complex64) -> DMatrix<Complex64> {
        let e = (-lambda * self.r).exp();
        let mut m = -&self.a - &self.b * e;
        for i in 0..self.n {
            m[(i, i)] += lambda;
        }
        m
    }

    /// `Δ'(λ) = I + r e^{−λr}B`.
    pub fn derivative(&self, lambda: Complex64) -> DMatrix<Complex64> {
        let e = (-lambda * self.r).exp() * self.r;
        let mut m = &self.b * e;
        for i in 0..self.n {
            m[(i, i)] += Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn det(&self, lambda: Complex64) -> Complex64 {
        self.matrix(lambda).determinant()
    }

    /// `d/dλ det Δ(λ)` by Jacobi's formula in row-replacement form, which stays
    /// finite at roots.
    pub fn det_derivative(&self, lambda: Complex64) -> Complex64 {
        let m = self.matrix(lambda);
        let dm = self.derivative(lambda);
        let mut total = ZERO;
        for i in 0..self.n {
            let mut mi = m.clone();
            mi.set_row(i, &dm.row(i));
            total += mi.determinant();
        }
        total
    }

    /// Magnitude scale of det Δ around λ, used to make tolerances relative.
    /// Magnitude of the entries of `Δ(λ)`: `1 + |λ| + ‖A‖ + ‖B‖ e^{−r Re λ}`.
    pub fn entry_scale(&self, lambda: Complex64) -> f64 {
        1.0 + lambda.norm() + self.norm_a + self.norm_b * (-self.r * lambda.re).exp()
    }

    pub fn scale(&self, lambda: Complex64) -> f64 {
        let growth = (-lambda.re * self.r).exp();
        (1.0 + lambda.norm() + self.norm_a + self.norm_b * growth).powi(self.n as i32)
    }

    fn relative_residual(&self, lambda: Complex64) -> f64 {
        self.det(lambda).norm() / self.scale(lambda)
    }

    /// Newton iteration on det Δ. Returns the polished root or `None` if the
    /// iteration stalls or diverges.
    pub fn newton(&self, start: Complex64, max_iter: usize) -> Option<Complex64> {
        let mut lam = start;
        for _ in 0..max_iter {
            let d = self.det(lam);
            let dd = self.det_derivative(lam);
            if !d.is_finite() || !dd.is_finite() {
                return None;
            }
            if dd.norm() == 0.0 {
                return (d.norm() == 0.0).then_some(lam);
            }
            let step = d / dd;
            lam -= step;
            if step.norm() <= 4.0 * f64::EPSILON * (1.0 + lam.norm()) {
                break;
            }
        }
        (lam.is_finite() && self.relative_residual(lam) <= 1e-10).then_some(lam)
    }

    pub fn root(&self, lambda: Complex64, multiplicity: usize) -> CharRoot {
        let residual = self.det(lambda).norm();
        let simple = multiplicity == 1
            && self.det_derivative(lambda).norm() > SIMPLE_THRESHOLD * self.scale(lambda);
        CharRoot { lambda, residual, simple, multiplicity }
    }
}

/// `Δ(λ)` for `sys` at `alpha`.
pub fn char_matrix(sys: &DelaySystem, alpha: ParamPoint, lambda: Complex64) -> DMatrix<Complex64> {
    Characteristic::new(sys, alpha).matrix(lambda)
}

/// `Δ'(λ)` for `sys` at `alpha`.
pub fn char_matrix_derivative(
    sys: &DelaySystem,
    alpha: ParamPoint,
    lambda: Complex64,
) -> DMatrix<Complex64> {
    Characteristic::new(sys, alpha).derivative(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharRoot {
    pub lambda: Complex64,
    pub residual: f64,
    pub simple: bool,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    fn split(&self, frac: f64) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let x = self.re_min + frac * self.width();
            (Rect { re_max: x, ..*self }, Rect { re_min: x, ..*self })
        } else {
            let y = self.im_min + frac * self.height();
            (Rect { im_max: y, ..*self }, Rect { im_min: y, ..*self })
        }
    }
}

/// Bounds of the root scan: `Re λ ∈ [−σ_max, σ_max]`, `Im λ ∈ [0, Ω_max]`;
/// conjugates are inferred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanWindow {
    pub sigma_max: f64,
    pub omega_max: f64,
}

impl ScanWindow {
    pub fn default_for(r: f64) -> Self {
        Self { sigma_max: 5.0 / r, omega_max: 20.0 * PI / r }
    }

    /// Counting rectangle. The lower edge sits slightly below the real axis so
    /// that real roots are interior.
    pub fn rect(&self, r: f64) -> Rect {
        Rect::new(-self.sigma_max, self.sigma_max, -0.0731 / r, self.omega_max)
    }
}

/// Number of roots of det Δ inside `rect`, counted with multiplicity.
pub fn count_roots(sys: &DelaySystem, alpha: ParamPoint, rect: Rect) -> Result<usize> {
    count_in(&Characteristic::new(sys, alpha), rect)
}

pub fn count_in(ch: &Characteristic, rect: Rect) -> Result<usize> {
    let corners = rect.corners();
    let mut winding = 0.0;
    // Sampling must resolve e^{−λr}, which rotates once per 2π/r along Im λ.
    let max_step = (0.2 / ch.r).min(0.2).max(1e-3);
    for e in 0..4 {
        let p = corners[e];
        let q = corners[(e + 1) % 4];
        let len = (q - p).norm();
        let pieces = ((len / max_step).ceil() as usize).max(4);
        let mut prev_z = p;
        let mut prev_f = contour_value(ch, p)?;
        for s in 1..=pieces {
            let z = p + (q - p) * (s as f64 / pieces as f64);
            let fz = contour_value(ch, z)?;
            winding += arg_increment(ch, prev_z, prev_f, z, fz, 0)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    let turns = winding / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.05 || rounded < 0.0 {
        return Err(Error::BoundaryRoot { near: rect.center() });
    }
    Ok(rounded as usize)
}

fn contour_value(ch: &Characteristic, z: Complex64) -> Result<Complex64> {
    let f = ch.det(z);
    if !f.is_finite() || f.norm() < CONTOUR_FLOOR * ch.scale(z) {
        return Err(Error::BoundaryRoot { near: z });
    }
    Ok(f)
}

fn arg_increment(
    ch: &Characteristic,
    za: Complex64,
    fa: Complex64,
    zb: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64> {
    let d = (fb / fa).arg();
    if d.abs() <= PI / 6.0 {
        return Ok(d);
    }
    if depth > 40 {
        return Err(Error::BoundaryRoot { near: za });
    }
    let zm = 0.5 * (za + zb);
    let fm = contour_value(ch, zm)?;
    Ok(arg_increment(ch, za, fa, zm, fm, depth + 1)?
        + arg_increment(ch, zm, fm, zb, fb, depth + 1)?)
}

const SPLIT_FRACTIONS: [f64; 4] = [0.5123, 0.4567, 0.5871, 0.3911];

fn locate(ch: &Characteristic, rect: Rect, count: usize) -> Result<Vec<(Complex64, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let size = rect.width().max(rect.height());
    if count == 1 {
        if let Some(lam) = ch.newton(rect.center(), 60) {
            if rect.contains(lam, 1e-9 * (1.0 + size)) {
                return Ok(vec![(lam, 1)]);
            }
        }
    }
    if size < MIN_RECT {
        let lam = ch.newton(rect.center(), 60).unwrap_or_else(|| rect.center());
        return Ok(vec![(lam, count)]);
    }
    for frac in SPLIT_FRACTIONS {
        let (lo, hi) = rect.split(frac);
        let (c_lo, c_hi) = match rayon::join(|| count_in(ch, lo), || count_in(ch, hi)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        if c_lo + c_hi != count {
            continue;
        }
        let (r_lo, r_hi) = rayon::join(|| locate(ch, lo, c_lo), || locate(ch, hi, c_hi));
        let mut out = r_lo?;
        out.extend(r_hi?);
        return Ok(out);
    }
    if size < 1e-3 * (1.0 + rect.center().norm()) {
        // Multiple root or tight cluster: contours cannot separate it further.
        let lam = ch.newton(rect.center(), 60).unwrap_or_else(|| rect.center());
        return Ok(vec![(lam, count)]);
    }
    Err(Error::BoundaryRoot { near: rect.center() })
}

/// All roots in the scan window, closed under conjugation and sorted by (Re, Im).
pub fn find_roots(sys: &DelaySystem, alpha: ParamPoint, window: ScanWindow) -> Result<Vec<CharRoot>> {
    find_roots_with(&Characteristic::new(sys, alpha), window)
}

pub fn find_roots_with(ch: &Characteristic, window: ScanWindow) -> Result<Vec<CharRoot>> {
    let mut rect = window.rect(ch.r);
    let mut attempt = 0;
    let (total, located) = loop {
        let res = count_in(ch, rect).and_then(|c| locate(ch, rect, c).map(|l| (c, l)));
        match res {
            Ok(v) => break v,
            Err(Error::BoundaryRoot { .. }) if attempt < 4 => {
                attempt += 1;
                let jitter = 1.0 + 0.0137 * attempt as f64;
                rect = Rect::new(
                    rect.re_min * jitter,
                    rect.re_max * jitter,
                    rect.im_min * jitter,
                    rect.im_max * jitter,
                );
            }
            Err(e) => return Err(e),
        }
    };
    let found: usize = located.iter().map(|(_, m)| m).sum();
    if found != total {
        return Err(Error::NoLeadingPair(format!(
            "certification failed: argument principle counts {total} roots, located {found}"
        )));
    }
    let mut roots = Vec::new();
    for (lam, mult) in located {
        let tol = 1e-9 * (1.0 + lam.norm());
        if lam.im > tol {
            roots.push(ch.root(lam, mult));
            roots.push(ch.root(lam.conj(), mult));
        } else if lam.im.abs() <= tol {
            roots.push(ch.root(Complex64::new(lam.re, 0.0), mult));
        }
    }
    roots.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im)
            .partial_cmp(&(b.lambda.re, b.lambda.im))
            .expect("finite roots")
    });
    Ok(roots)
}

/// The root with `Im > 0` of the rightmost conjugate pair.
pub fn find_leading_pair(
    sys: &DelaySystem,
    alpha: ParamPoint,
    window: ScanWindow,
) -> Result<CharRoot> {
    let roots = find_roots(sys, alpha, window)?;
    leading_pair_of(&roots)
}

/// Leading pair among already-located roots.
pub fn leading_pair_of(roots: &[CharRoot]) -> Result<CharRoot> {
    let max_re = roots
        .iter()
        .map(|r| r.lambda.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_re.is_finite() {
        return Err(Error::NoLeadingPair("no roots in the scan window".into()));
    }
    let leaders: Vec<&CharRoot> = roots
        .iter()
        .filter(|r| (r.lambda.re - max_re).abs() <= 1e-8 * (1.0 + r.lambda.norm()))
        .collect();
    let upper: Vec<&&CharRoot> = leaders
        .iter()
        .filter(|r| r.lambda.im > 1e-9 * (1.0 + r.lambda.norm()))
        .collect();
    if leaders.iter().any(|r| r.lambda.im.abs() <= 1e-9 * (1.0 + r.lambda.norm())) {
        return Err(Error::NoLeadingPair(format!(
            "rightmost root is real (Re = {max_re})"
        )));
    }
    if upper.len() != 1 {
        return Err(Error::NoLeadingPair(format!(
            "{} conjugate pairs tie for the largest real part {max_re}",
            upper.len()
        )));
    }
    Ok(**upper[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub lambda1: Option<CharRoot>,
    pub mu: f64,
    pub omega: f64,
    pub others: Vec<CharRoot>,
    /// Largest real part among the other roots; `−σ_max` when there are none.
    pub margin: f64,
    pub delta: f64,
    pub holds: bool,
    pub reason: String,
}

/// Pointwise H1 verdict: one simple conjugate pair with `Re ≥ −δ`, every
/// other root in the window strictly left of `−δ`.
pub fn check_h1(
    sys: &DelaySystem,
    alpha: ParamPoint,
    delta: f64,
    window: ScanWindow,
) -> Result<H1Report> {
    let roots = find_roots(sys, alpha, window)?;
    Ok(h1_from_roots(&roots, delta, window))
}

pub fn h1_from_roots(roots: &[CharRoot], delta: f64, window: ScanWindow) -> H1Report {
    let critical: Vec<&CharRoot> = roots.iter().filter(|r| r.lambda.re >= -delta).collect();
    let pair = leading_pair_of(roots).ok().filter(|p| p.lambda.re >= -delta);
    let others: Vec<CharRoot> = match pair {
        Some(p) => roots
            .iter()
            .filter(|r| r.lambda != p.lambda && r.lambda != p.lambda.conj())
            .copied()
            .collect(),
        None => roots.to_vec(),
    };
    let margin = others
        .iter()
        .map(|r| r.lambda.re)
        .fold(-window.sigma_max, f64::max);
    let (holds, reason) = match pair {
        None if critical.is_empty() => (false, "no root with Re >= -delta".to_string()),
        None => (false, "rightmost roots are not a single complex conjugate pair".to_string()),
        Some(p) if !p.simple || p.multiplicity != 1 => {
            (false, "leading pair is not simple".to_string())
        }
        Some(_) if margin >= -delta => (
            false,
            format!("another root has Re = {margin} >= -delta = {}", -delta),
        ),
        Some(_) => (true, "ok".to_string()),
    };
    let (mu, omega) = pair.map(|p| (p.lambda.re, p.lambda.im)).unwrap_or((f64::NAN, f64::NAN));
    H1Report { lambda1: pair, mu, omega, others, margin, delta, holds, reason }
}
