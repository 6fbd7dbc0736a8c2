//! Lyapunov coefficients, the `ν` and `β` coordinates, hypotheses H2/H3,
//! region classification and cycle-amplitude prediction.
//!
//! All `g` tables use the convention `ż = λ₁z + Σ g_jk z^j z̄^k / (j! k!)`.

use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};
use crate::manifold::{expand, ManifoldExpansion, FULL_ORDER};
use crate::series::Series2;
use crate::spectrum::{find_roots_with, h1_from_roots, Characteristic, H1Report, ScanWindow};
use crate::system::{DelaySystem, ParamPoint};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const REGION_TOL: f64 = 1e-9;
pub const L2_DEGENERATE: f64 = 1e-10;
pub const H2_DET_MIN: f64 = 1e-6;
pub const BAUTIN_MU_TOL: f64 = 1e-10;
pub const BAUTIN_L1_TOL: f64 = 1e-8;

/// Scan window and H1 margin; `None` selects the defaults scaled by the delay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub window: Option<ScanWindow>,
    pub h1_delta: Option<f64>,
}

impl PipelineOptions {
    pub fn window(&self, r: f64) -> ScanWindow {
        self.window.unwrap_or_else(|| ScanWindow::default_for(r))
    }

    pub fn delta(&self, r: f64) -> f64 {
        self.h1_delta.unwrap_or(0.01 / r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPair {
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuCoords {
    pub nu1: f64,
    pub nu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCoords {
    pub beta1: f64,
    pub beta2: f64,
    pub s: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    BautinPoint,
    NoCycleUnstable,
    TwoCycles,
    FoldCurve,
    OutOfScope,
}

impl Region {
    /// Cycle count predicted by the truncated normal form (the fold counts once).
    pub fn cycle_count(self) -> Option<usize> {
        match self {
            Region::TwoCycles => Some(2),
            Region::FoldCurve => Some(1),
            Region::NoCycleUnstable | Region::BautinPoint => Some(0),
            Region::OutOfScope => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
    /// Both roles at once, on the fold curve.
    Semistable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleAmplitudes {
    pub rho1: f64,
    pub rho2: f64,
    pub inner: Stability,
    pub outer: Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionClass {
    pub region: Region,
    pub amplitudes: Option<CycleAmplitudes>,
}

/// Paper-convention first Lyapunov coefficient at a Hopf point:
/// `l₁ = Re(i g₂₀ g₁₁ + ω₀ g₂₁) / (2ω₀²)`.
pub fn first_lyapunov(g: &Series2<Complex64>, omega0: f64) -> f64 {
    let i = Complex64::i();
    (i * g.get(2, 0) * g.get(1, 1) + g.get(2, 1) * omega0).re / (2.0 * omega0 * omega0)
}

/// First Lyapunov coefficient `Re c₁(α) / ω(α)` away from the Hopf point,
/// using the full cubic normal-form coefficient
/// `c₁ = g₂₀g₁₁(2λ+λ̄)/(2|λ|²) + |g₁₁|²/λ + |g₀₂|²/(2(2λ−λ̄)) + g₂₁/2`.
/// Coincides with [`first_lyapunov`] when `Re λ = 0`.
pub fn first_lyapunov_at(g: &Series2<Complex64>, lambda: Complex64) -> f64 {
    let (g20, g11, g02, g21) = (*g.get(2, 0), *g.get(1, 1), *g.get(0, 2), *g.get(2, 1));
    let lb = lambda.conj();
    let c1 = g20 * g11 * (lambda * 2.0 + lb) / (2.0 * lambda.norm_sqr())
        + g11.norm_sqr() / lambda
        + g02.norm_sqr() / ((lambda * 2.0 - lb) * 2.0)
        + g21 / 2.0;
    c1.re / lambda.im
}

/// Second Lyapunov coefficient at a Hopf point in terms of `g_jk`,
/// `2 ≤ j + k ≤ 5`. Normalized so that `l₂ = Re c₂ / ω₀` for
/// `ż = iω₀z + c₁z|z|² + c₂z|z|⁴`.
pub fn second_lyapunov(g: &Series2<Complex64>, omega0: f64) -> f64 {
    let c = |j: usize, k: usize| *g.get(j, k);
    let (g20, g11, g02) = (c(2, 0), c(1, 1), c(0, 2));
    let (g30, g21, g12, g03) = (c(3, 0), c(2, 1), c(1, 2), c(0, 3));
    let (g40, g31, g22, g13) = (c(4, 0), c(3, 1), c(2, 2), c(1, 3));
    let g32 = c(3, 2);
    let w = omega0;
    let third = 1.0 / 3.0;

    let t1 = g32.re / w;
    let t2 = (g20 * g31.conj()
        - g11 * (g31 * 4.0 + g22.conj() * 3.0)
        - g02 * (g40 + g13.conj()) * third
        - g30 * g12)
        .im
        / (w * w);
    let t3a = (g20 * (g11.conj() * (g12 * 3.0 - g30.conj()) + g02 * (g12.conj() - g30 * third)
        + g02.conj() * g03 * third)
        + g11 * (g02.conj() * (g30.conj() * (5.0 / 3.0) + g12 * 3.0) + g02 * g03.conj() * third
            - g11 * g30 * 4.0))
        .re;
    let t3b = 3.0 * (g20 * g11).im * g21.im;
    let t3 = (t3a + t3b) / (w * w * w);
    let g20b = g20.conj();
    let t4a = (g11 * g02.conj() * (g20b * g20b - g20b * g11 * 3.0 - g11 * g11 * 4.0)).im;
    let t4b = (g20 * g11).im * (3.0 * (g20 * g11).re - 2.0 * g02.norm_sqr());
    let t4 = (t4a + t4b) / (w * w * w * w);
    (t1 + t2 + t3 + t4) / 12.0
}

/// Spectrum, basis and manifold data at one parameter point.
#[derive(Debug, Clone)]
pub struct HopfPoint {
    pub alpha: ParamPoint,
    pub h1: H1Report,
    pub lambda1: Complex64,
    pub expansion: ManifoldExpansion,
    pub l1: f64,
    pub l2: Option<f64>,
}

impl HopfPoint {
    pub fn mu(&self) -> f64 {
        self.lambda1.re
    }

    pub fn omega(&self) -> f64 {
        self.lambda1.im
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.expansion.basis
    }

    pub fn nu(&self) -> NuCoords {
        NuCoords { nu1: self.mu() / self.omega(), nu2: self.l1 }
    }
}

fn reduce_at(
    sys: &DelaySystem,
    alpha: ParamPoint,
    lambda1: Complex64,
    order: usize,
) -> Result<(ManifoldExpansion, f64, Option<f64>)> {
    let ch = Characteristic::new(sys, alpha);
    let basis = EigenBasis::compute(sys, alpha, lambda1)?;
    let exp = expand(&ch, &sys.taylor_f(alpha), &basis, order)?;
    let l1 = first_lyapunov_at(&exp.g, lambda1);
    let l2 = (order >= FULL_ORDER).then(|| second_lyapunov(&exp.g, lambda1.im));
    Ok((exp, l1, l2))
}

/// H1 check and reduction at `alpha`; `H1Violated` if the spectrum does not qualify.
pub fn hopf_point(
    sys: &DelaySystem,
    alpha: ParamPoint,
    opts: &PipelineOptions,
    order: usize,
) -> Result<HopfPoint> {
    let h1 = h1_report(sys, alpha, opts)?;
    hopf_point_from(sys, alpha, h1, order)
}

pub fn h1_report(sys: &DelaySystem, alpha: ParamPoint, opts: &PipelineOptions) -> Result<H1Report> {
    let r = sys.delay();
    let window = opts.window(r);
    let roots = find_roots_with(&Characteristic::new(sys, alpha), window)?;
    Ok(h1_from_roots(&roots, opts.delta(r), window))
}

pub fn hopf_point_from(
    sys: &DelaySystem,
    alpha: ParamPoint,
    h1: H1Report,
    order: usize,
) -> Result<HopfPoint> {
    if !h1.holds {
        return Err(Error::H1Violated(h1.reason.clone()));
    }
    let lambda1 = h1.lambda1.expect("H1 holds").lambda;
    let (expansion, l1, l2) = reduce_at(sys, alpha, lambda1, order)?;
    Ok(HopfPoint { alpha, h1, lambda1, expansion, l1, l2 })
}

pub fn nu_map(sys: &DelaySystem, alpha: ParamPoint, opts: &PipelineOptions) -> Result<NuCoords> {
    Ok(hopf_point(sys, alpha, opts, 3)?.nu())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    /// `J[i][j] = ∂ν_{i+1}/∂α_{j+1}`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub step: f64,
    pub holds: bool,
}

pub fn default_fd_step(alpha0: ParamPoint) -> f64 {
    1e-4 * (1.0 + alpha0.norm())
}

/// Central-difference Jacobian of `ν` at `alpha0`.
pub fn check_h2(
    sys: &DelaySystem,
    alpha0: ParamPoint,
    h: f64,
    opts: &PipelineOptions,
) -> Result<H2Report> {
    let stencil = [
        ParamPoint::new(alpha0.alpha1 + h, alpha0.alpha2),
        ParamPoint::new(alpha0.alpha1 - h, alpha0.alpha2),
        ParamPoint::new(alpha0.alpha1, alpha0.alpha2 + h),
        ParamPoint::new(alpha0.alpha1, alpha0.alpha2 - h),
    ];
    let nus: Vec<NuCoords> = stencil
        .par_iter()
        .map(|&a| {
            nu_map(sys, a, opts).map_err(|e| {
                Error::StencilFailure(format!("at ({}, {}): {e}", a.alpha1, a.alpha2))
            })
        })
        .collect::<Result<_>>()?;
    let d = |p: &NuCoords, m: &NuCoords| [(p.nu1 - m.nu1) / (2.0 * h), (p.nu2 - m.nu2) / (2.0 * h)];
    let c1 = d(&nus[0], &nus[1]);
    let c2 = d(&nus[2], &nus[3]);
    let jacobian = [[c1[0], c2[0]], [c1[1], c2[1]]];
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    Ok(H2Report { jacobian, det, step: h, holds: det.abs() > H2_DET_MIN })
}

/// `β₁ = ν₁`, `β₂ = √|L₂| ν₂`, `s = sign l₂`.
pub fn beta_map(nu: NuCoords, l2_at_alpha: f64) -> Result<BetaCoords> {
    if !(l2_at_alpha.abs() >= L2_DEGENERATE) {
        return Err(Error::DegenerateL2(l2_at_alpha.abs()));
    }
    Ok(BetaCoords {
        beta1: nu.nu1,
        beta2: l2_at_alpha.abs().sqrt() * nu.nu2,
        s: if l2_at_alpha > 0.0 { 1 } else { -1 },
    })
}

pub fn classify_region(beta: BetaCoords, tol: f64) -> Result<RegionClass> {
    if beta.s != 1 {
        return Err(Error::UnsupportedSign);
    }
    let BetaCoords { beta1, beta2, .. } = beta;
    let region = if beta1.hypot(beta2) <= tol {
        Region::BautinPoint
    } else if beta1 < -tol {
        Region::OutOfScope
    } else {
        let gamma = -2.0 * beta1.max(0.0).sqrt();
        if (beta2 - gamma).abs() <= tol {
            Region::FoldCurve
        } else if beta2 < gamma - tol {
            Region::TwoCycles
        } else {
            Region::NoCycleUnstable
        }
    };
    let amplitudes = match region {
        Region::TwoCycles | Region::FoldCurve => Some(roots_of_radial(beta1.max(0.0), beta2, region)),
        _ => None,
    };
    Ok(RegionClass { region, amplitudes })
}

fn roots_of_radial(beta1: f64, beta2: f64, region: Region) -> CycleAmplitudes {
    if region == Region::FoldCurve {
        let rho = (-beta2 / 2.0).max(0.0).sqrt();
        return CycleAmplitudes {
            rho1: rho,
            rho2: rho,
            inner: Stability::Semistable,
            outer: Stability::Semistable,
        };
    }
    // larger root of ρ⁴ + β₂ρ² + β₁ by the quadratic formula, smaller from the product
    let disc = (beta2 * beta2 - 4.0 * beta1).max(0.0).sqrt();
    let big = (-beta2 + disc) / 2.0;
    let small = if big > 0.0 { beta1 / big } else { 0.0 };
    CycleAmplitudes {
        rho1: small.sqrt(),
        rho2: big.sqrt(),
        inner: Stability::Attracting,
        outer: Stability::Repelling,
    }
}

/// Positive roots of `β₁ + β₂ρ² + ρ⁴`, inner attracting and outer repelling.
pub fn cycle_amplitudes(beta: BetaCoords) -> Result<CycleAmplitudes> {
    classify_region(beta, REGION_TOL)?.amplitudes.ok_or(Error::NoCycles)
}

/// Positive roots of `ν₁ + l₁ρ² + l₂ρ⁴` for `l₂ > 0`: the unscaled radial
/// equation, whose roots are amplitudes in `|z|` units.
pub fn radial_amplitudes(nu1: f64, l1: f64, l2: f64) -> Vec<f64> {
    if !(l2 > 0.0) {
        return Vec::new();
    }
    let disc = l1 * l1 - 4.0 * l2 * nu1;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let big = (-l1 + sq) / (2.0 * l2);
    if big <= 0.0 {
        return Vec::new();
    }
    let small = nu1 / (l2 * big);
    let mut out = Vec::new();
    if small > 0.0 {
        out.push(small.sqrt());
    }
    out.push(big.sqrt());
    out
}

/// Newton solve of `ν(α) = target`, used to place query points at prescribed
/// normal-form coordinates.
pub fn solve_nu(
    sys: &DelaySystem,
    target: NuCoords,
    guess: ParamPoint,
    max_iter: usize,
    opts: &PipelineOptions,
) -> Result<ParamPoint> {
    let mut alpha = guess;
    for it in 0..=max_iter {
        let nu = nu_map(sys, alpha, opts)?;
        let f = Vector2::new(nu.nu1 - target.nu1, nu.nu2 - target.nu2);
        if f.norm() <= 1e-12 {
            return Ok(alpha);
        }
        if it == max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: f.norm() });
        }
        let j = check_h2(sys, alpha, 1e-6 * (1.0 + alpha.norm()), opts)?.jacobian;
        let jac = Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
        let step = jac
            .lu()
            .solve(&(-f))
            .ok_or(Error::NoConvergence { iterations: it, residual: f.norm() })?;
        alpha = ParamPoint::new(alpha.alpha1 + step[0], alpha.alpha2 + step[1]);
    }
    unreachable!()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BautinSearch {
    pub alpha0: ParamPoint,
    pub omega0: f64,
    pub mu: f64,
    pub l1: f64,
    pub iterations: usize,
}

fn residual_tracked(
    sys: &DelaySystem,
    alpha: ParamPoint,
    guess: Complex64,
) -> Result<(Vector2<f64>, Complex64)> {
    let ch = Characteristic::new(sys, alpha);
    let lambda = ch.newton(guess, 60).ok_or(Error::NotARoot {
        lambda: guess,
        residual: ch.det(guess).norm(),
    })?;
    let (_, l1, _) = reduce_at(sys, alpha, lambda, 3)?;
    Ok((Vector2::new(lambda.re, l1), lambda))
}

fn converged(f: &Vector2<f64>) -> bool {
    f[0].abs() <= BAUTIN_MU_TOL && f[1].abs() <= BAUTIN_L1_TOL
}

/// Damped Newton on `(μ(α), l₁(α)) = 0` with a central-difference Jacobian.
pub fn find_bautin(
    sys: &DelaySystem,
    guess: ParamPoint,
    max_iter: usize,
    opts: &PipelineOptions,
) -> Result<BautinSearch> {
    let mut alpha = guess;
    let mut hp = hopf_point(sys, alpha, opts, 3)?;
    let mut f = Vector2::new(hp.mu(), hp.l1);
    let mut iterations = 0;
    while !converged(&f) {
        if iterations >= max_iter {
            return Err(Error::NoConvergence { iterations, residual: f.norm() });
        }
        iterations += 1;
        let h = 1e-6 * (1.0 + alpha.norm());
        let lam = hp.lambda1;
        let cols: Vec<Vector2<f64>> = [(h, 0.0), (0.0, h)]
            .par_iter()
            .map(|&(d1, d2)| {
                let p = ParamPoint::new(alpha.alpha1 + d1, alpha.alpha2 + d2);
                let m = ParamPoint::new(alpha.alpha1 - d1, alpha.alpha2 - d2);
                let (fp, _) = residual_tracked(sys, p, lam)?;
                let (fm, _) = residual_tracked(sys, m, lam)?;
                Ok((fp - fm) / (2.0 * h))
            })
            .collect::<Result<_>>()?;
        let jac = Matrix2::from_columns(&[cols[0], cols[1]]);
        let step = jac
            .svd(true, true)
            .solve(&(-f), 1e-12 * jac.norm())
            .map_err(|_| Error::NoConvergence { iterations, residual: f.norm() })?;
        let cap = 0.5 * (1.0 + alpha.norm());
        let mut t = if step.norm() > cap { cap / step.norm() } else { 1.0 };
        let mut accepted = None;
        for _ in 0..30 {
            let trial = ParamPoint::new(alpha.alpha1 + t * step[0], alpha.alpha2 + t * step[1]);
            if let Ok((ft, _)) = residual_tracked(sys, trial, lam) {
                if ft.norm() < f.norm() {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::NoConvergence { iterations, residual: f.norm() });
        };
        alpha = next;
        hp = hopf_point(sys, alpha, opts, 3)?;
        f = Vector2::new(hp.mu(), hp.l1);
    }
    Ok(BautinSearch { alpha0: alpha, omega0: hp.omega(), mu: f[0], l1: f[1], iterations })
}
