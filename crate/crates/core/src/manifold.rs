//! Order-by-order computation of the invariant-manifold coefficients `w_jk`
//! and the reduced-equation coefficients `g_jk`.
//!
//! On the manifold `x_t(s) = z e^{λ₁s}u + z̄ e^{λ̄₁s}ū + W(s, z, z̄)` with
//! `ż = λ₁ z + g(z, z̄)`, invariance gives, for each `(j, k)`:
//!
//! ```text
//! w_jk'(s) = κ w_jk(s) + g_jk u e^{λ₁s} + conj(g_kj) ū e^{λ̄₁s} + R_jk(s)      κ = jλ₁ + kλ̄₁
//! w_jk'(0) = A w_jk(0) + B w_jk(−r) + F_jk
//! ```
//!
//! where `R_jk` collects `W_z·g + W_z̄·ḡ` from lower orders and `F_jk` is the
//! coefficient of `f(x_t(0), x_t(−r))`. The ODE is solved in closed form; the
//! boundary condition fixes the homogeneous constant through `Δ(κ) K = rhs`.
//! Near resonance (`κ` close to `λ₁` or `λ̄₁`) the two range constraints
//! `(ψ₁, w_jk) = (ψ̄₁, w_jk) = 0` are appended and the system is solved in the
//! least-squares sense.

use crate::eigenbasis::{exp_integral, pair_with, CVector, EigenBasis};
use crate::error::{Error, Result};
use crate::quasipoly::QuasiPoly;
use crate::series::{Coeff, Series2};
use crate::spectrum::Characteristic;
use crate::system::TaylorF;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Condition number of `Δ(κ)` above which the bordered solve is used.
pub const BORDER_CONDITION: f64 = 1e8;
/// Total order of `g` needed for the second Lyapunov coefficient.
pub const FULL_ORDER: usize = 5;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub type WTable = BTreeMap<(usize, usize), WCoeff>;

#[derive(Debug, Clone, PartialEq)]
pub struct WCoeff {
    pub j: usize,
    pub k: usize,
    pub kappa: Complex64,
    pub w: QuasiPoly,
    pub bordered: bool,
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct ManifoldExpansion {
    pub basis: EigenBasis,
    pub max_order: usize,
    pub w: WTable,
    pub g: Series2<Complex64>,
    pub f: Series2<CVector>,
}

impl ManifoldExpansion {
    pub fn g(&self, j: usize, k: usize) -> Complex64 {
        *self.g.get(j, k)
    }

    /// Same tables with every `w_jk` replaced by zero. Used to check that the
    /// residual report detects a corrupted expansion.
    pub fn with_zeroed_w(&self) -> Self {
        let mut out = self.clone();
        for c in out.w.values_mut() {
            c.w = QuasiPoly::zero(c.w.dim());
        }
        out
    }
}

/// Series of `x_t(s)`: degree one from the eigenfunctions, degrees ≥ 2 from `w`.
pub fn embed_series(
    basis: &EigenBasis,
    w: &WTable,
    s: f64,
    order: usize,
) -> Result<Series2<CVector>> {
    let n = basis.u.len();
    let mut out = Series2::new(order, CVector::zeros(n));
    if order >= 1 {
        out.set(1, 0, basis.phi().at(s));
        out.set(0, 1, basis.phi_bar().at(s));
    }
    for d in 2..=order {
        for k in 0..=d {
            let j = d - k;
            let c = w.get(&(j, k)).ok_or(Error::MissingOrder(j, k))?;
            out.set(j, k, c.w.eval(s));
        }
    }
    Ok(out)
}

/// Series embedding using every available `w` up to `order`; absent orders are zero.
fn embed_available(basis: &EigenBasis, w: &WTable, s: f64, order: usize) -> Series2<CVector> {
    let n = basis.u.len();
    let mut out = Series2::new(order, CVector::zeros(n));
    out.set(1, 0, basis.phi().at(s));
    out.set(0, 1, basis.phi_bar().at(s));
    for (&(j, k), c) in w.iter() {
        if j + k <= order {
            out.set(j, k, c.w.eval(s));
        }
    }
    out
}

/// Substitutes `x = x0`, `y = xr` into `f` and truncates at `order`.
pub fn compose_f(
    tf: &TaylorF,
    x0: &Series2<CVector>,
    xr: &Series2<CVector>,
    order: usize,
) -> Series2<CVector> {
    let n = tf.n;
    let xs: Vec<Series2<Complex64>> = (0..n).map(|i| x0.component(i).truncated(order)).collect();
    let ys: Vec<Series2<Complex64>> = (0..n).map(|i| xr.component(i).truncated(order)).collect();
    let mut comps: Vec<Series2<Complex64>> = vec![Series2::scalar(order); n];
    for m in &tf.terms {
        let mut prod = Series2::scalar(order);
        prod.set(0, 0, ONE);
        for l in 0..n {
            for _ in 0..m.kx[l] {
                prod = xs[l].mul_scalar(&prod, order);
            }
            for _ in 0..m.ky[l] {
                prod = ys[l].mul_scalar(&prod, order);
            }
        }
        comps[m.eq].add_scaled(&prod, m.coeff);
    }
    let mut out = Series2::new(order, CVector::zeros(n));
    for (j, k, _) in comps[0].iter() {
        out.set(j, k, CVector::from_fn(n, |i, _| *comps[i].get(j, k)));
    }
    out
}

/// `g_jk = ψ₁(0)·F_jk` for every order present in `f`.
pub fn g_from_f(f: &Series2<CVector>, basis: &EigenBasis) -> Series2<Complex64> {
    f.map(Complex64::new(0.0, 0.0), |fj| {
        basis.v.iter().zip(fj.iter()).map(|(a, b)| a * b).sum()
    })
}

/// `W_z·g + W_z̄·ḡ` truncated at `order`, built from `w` and `g` of lower order.
fn cross_terms(
    n: usize,
    w: &WTable,
    g: &Series2<Complex64>,
    order: usize,
) -> Series2<QuasiPoly> {
    let mut wser = Series2::new(order, QuasiPoly::zero(n));
    for (&(j, k), c) in w.iter() {
        if j + k < order {
            wser.set(j, k, c.w.clone());
        }
    }
    let mut glow = g.truncated(order - 1);
    glow.set(0, 0, Complex64::new(0.0, 0.0));
    glow.set(1, 0, Complex64::new(0.0, 0.0));
    glow.set(0, 1, Complex64::new(0.0, 0.0));
    let gbar = glow.conj_swap();
    let mut out = wser.d_dz().mul_scalar(&glow, order);
    out.add_scaled(&wser.d_dzbar().mul_scalar(&gbar, order), ONE);
    out
}

/// Right-hand side `h_jk(s)` of the order-`(j, k)` homological ODE.
fn forcing(
    basis: &EigenBasis,
    g: &Series2<Complex64>,
    cross: &Series2<QuasiPoly>,
    j: usize,
    k: usize,
) -> QuasiPoly {
    let mut h = cross.get(j, k).clone();
    h.add_scaled(&QuasiPoly::exponential(basis.u.clone(), basis.lambda1), *g.get(j, k));
    h.add_scaled(
        &QuasiPoly::exponential(basis.u.map(|c| c.conj()), basis.lambda1.conj()),
        g.get(k, j).conj(),
    );
    h
}

fn range_row(ch: &Characteristic, v: &CVector, lambda: Complex64, kappa: Complex64) -> CVector {
    let vb = ch.b.transpose() * v;
    let factor = (-lambda * ch.r).exp() * exp_integral(kappa - lambda, ch.r);
    v + vb * factor
}

fn condition_number(m: &DMatrix<Complex64>) -> (f64, f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (if min > 0.0 { max / min } else { f64::INFINITY }, min, max)
}

/// Solves the order-`(j, k)` homological problem given all lower orders.
pub fn solve_w_order(
    j: usize,
    k: usize,
    ch: &Characteristic,
    basis: &EigenBasis,
    g: &Series2<Complex64>,
    cross: &Series2<QuasiPoly>,
    f_jk: &CVector,
) -> Result<WCoeff> {
    let n = ch.n;
    let lambda = basis.lambda1;
    let kappa = lambda * j as f64 + lambda.conj() * k as f64;
    let h = forcing(basis, g, cross, j, k);
    let wp = h.particular_solution(kappa);
    let wp0 = wp.eval(0.0);
    let rhs = &ch.a * &wp0 + &ch.b * wp.eval(-ch.r) + f_jk - &wp0 * kappa - h.eval(0.0);
    let m = ch.matrix(kappa);
    let (_, min, max) = condition_number(&m);
    // relative to the entry scale so that a 1×1 Δ(κ) near zero still counts as singular
    let condition = if min > 0.0 { max.max(ch.entry_scale(kappa)) / min } else { f64::INFINITY };

    let (constant, bordered) = if condition <= BORDER_CONDITION {
        let sol = m.clone().lu().solve(&rhs).ok_or_else(|| Error::Unresolvable {
            j,
            k,
            detail: "LU solve failed".into(),
        })?;
        (sol, false)
    } else {
        let psi = basis.psi();
        let psi_bar = basis.psi_bar();
        let mut big = DMatrix::<Complex64>::zeros(n + 2, n);
        big.view_mut((0, 0), (n, n)).copy_from(&m);
        let r1 = range_row(ch, &psi.coeff, psi.lambda, kappa);
        let r2 = range_row(ch, &psi_bar.coeff, psi_bar.lambda, kappa);
        for c in 0..n {
            big[(n, c)] = r1[c];
            big[(n + 1, c)] = r2[c];
        }
        let mut b = CVector::zeros(n + 2);
        b.rows_mut(0, n).copy_from(&rhs);
        b[n] = -wp.pair_closed(ch, &psi);
        b[n + 1] = -wp.pair_closed(ch, &psi_bar);
        let (_, min, max) = condition_number(&big);
        if min <= 1e-12 * max {
            return Err(Error::Unresolvable {
                j,
                k,
                detail: format!("bordered system is rank deficient (σ_min/σ_max = {:e})", min / max),
            });
        }
        let sol = big
            .svd(true, true)
            .solve(&b, 0.0)
            .map_err(|e| Error::Unresolvable { j, k, detail: e.to_string() })?;
        (sol, true)
    };

    let mut w = wp;
    w.add_scaled(&QuasiPoly::exponential(constant, kappa), ONE);
    Ok(WCoeff { j, k, kappa, w, bordered, condition })
}

/// Runs the order-by-order algorithm: `g` of order 2, then `w` of order 2,
/// `g` of order 3, and so on up to `g` of total order `max_order`.
pub fn expand(
    ch: &Characteristic,
    tf: &TaylorF,
    basis: &EigenBasis,
    max_order: usize,
) -> Result<ManifoldExpansion> {
    assert!(max_order >= 2, "expansion needs at least order 2");
    let n = ch.n;
    let mut w = WTable::new();
    let mut g = Series2::scalar(max_order);
    for m in 2..=max_order {
        let x0 = embed_available(basis, &w, 0.0, m);
        let xr = embed_available(basis, &w, -ch.r, m);
        let f = compose_f(tf, &x0, &xr, m);
        let gm = g_from_f(&f, basis);
        for k in 0..=m {
            g.set(m - k, k, *gm.get(m - k, k));
        }
        if m == max_order {
            break;
        }
        let cross = cross_terms(n, &w, &g, m);
        let solved: Vec<Result<WCoeff>> = (0..=m)
            .into_par_iter()
            .map(|k| solve_w_order(m - k, k, ch, basis, &g, &cross, f.get(m - k, k)))
            .collect();
        for c in solved {
            let c = c?;
            w.insert((c.j, c.k), c);
        }
    }
    let x0 = embed_available(basis, &w, 0.0, max_order);
    let xr = embed_available(basis, &w, -ch.r, max_order);
    let f = compose_f(tf, &x0, &xr, max_order);
    Ok(ManifoldExpansion { basis: basis.clone(), max_order, w, g, f })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderResidual {
    pub j: usize,
    pub k: usize,
    pub ode: f64,
    pub boundary: f64,
    pub range: f64,
    pub bordered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub ode: f64,
    pub boundary: f64,
    pub range: f64,
    pub orders: Vec<OrderResidual>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.ode.max(self.boundary).max(self.range)
    }
}

/// Checks every stored `w_jk` against the invariance equations at `samples`
/// uniform points of `[−r, 0]`, evaluating the lower-order products pointwise
/// and the range constraints by quadrature.
pub fn residuals(
    exp: &ManifoldExpansion,
    ch: &Characteristic,
    tf: &TaylorF,
    samples: usize,
) -> ResidualReport {
    let basis = &exp.basis;
    let n = ch.n;
    let lambda = basis.lambda1;
    let top = exp.w.keys().map(|(j, k)| j + k).max().unwrap_or(1);
    let x0 = embed_available(basis, &exp.w, 0.0, top + 1);
    let xr = embed_available(basis, &exp.w, -ch.r, top + 1);
    let f = compose_f(tf, &x0, &xr, top + 1);

    let mut glow = exp.g.truncated(top);
    for (j, k) in [(0, 0), (1, 0), (0, 1)] {
        glow.set(j, k, Complex64::new(0.0, 0.0));
    }
    let gbar = glow.conj_swap();
    let cross_at = |s: f64| -> Series2<CVector> {
        let mut ws = Series2::new(top, CVector::zeros(n));
        for (&(j, k), c) in exp.w.iter() {
            ws.set(j, k, c.w.eval(s));
        }
        let mut out = ws.d_dz().mul_scalar(&glow, top);
        out.add_scaled(&ws.d_dzbar().mul_scalar(&gbar, top), ONE);
        out
    };
    let grid: Vec<f64> = (0..samples)
        .map(|i| -ch.r + ch.r * i as f64 / (samples.max(2) - 1) as f64)
        .collect();
    let crosses: Vec<(f64, Series2<CVector>)> = grid.iter().map(|&s| (s, cross_at(s))).collect();
    let cross0 = cross_at(0.0);
    let u = &basis.u;
    let ubar = u.map(|c| c.conj());
    let h_at = |j: usize, k: usize, s: f64, cross: &Series2<CVector>| -> CVector {
        u * (exp.g(j, k) * (lambda * s).exp())
            + &ubar * (exp.g(k, j).conj() * (lambda.conj() * s).exp())
            + cross.get(j, k)
    };

    let mut orders = Vec::new();
    for (&(j, k), c) in exp.w.iter() {
        let dw = c.w.derivative();
        let ode = crosses
            .iter()
            .map(|(s, cross)| {
                (dw.eval(*s) - c.w.eval(*s) * c.kappa - h_at(j, k, *s, cross)).norm()
            })
            .fold(0.0, f64::max);
        let w0 = c.w.eval(0.0);
        let boundary = (&w0 * c.kappa + h_at(j, k, 0.0, &cross0)
            - &ch.a * &w0
            - &ch.b * c.w.eval(-ch.r)
            - f.get(j, k))
        .norm();
        let range = [basis.psi(), basis.psi_bar()]
            .iter()
            .map(|psi| pair_with(ch, psi, &w0, |s| c.w.eval(s)).norm())
            .fold(0.0, f64::max);
        orders.push(OrderResidual { j, k, ode, boundary, range, bordered: c.bordered });
    }
    let max_of = |f: fn(&OrderResidual) -> f64| orders.iter().map(f).fold(0.0, f64::max);
    ResidualReport {
        ode: max_of(|o| o.ode),
        boundary: max_of(|o| o.boundary),
        range: max_of(|o| o.range),
        orders,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEntry {
    pub j: usize,
    pub k: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSample {
    pub s: f64,
    /// `[re, im]` per state component.
    pub values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WEntry {
    pub j: usize,
    pub k: usize,
    pub bordered: bool,
    pub samples: Vec<WSample>,
}

/// Regression dump: every `g_jk` and each `w_jk` sampled at `s ∈ {−r, −r/2, 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDump {
    pub lambda1: [f64; 2],
    pub g: Vec<GEntry>,
    pub w: Vec<WEntry>,
}

impl ExpansionDump {
    pub fn new(exp: &ManifoldExpansion, r: f64) -> Self {
        let g = exp
            .g
            .iter()
            .filter(|(j, k, _)| j + k >= 2)
            .map(|(j, k, c)| GEntry { j, k, re: c.re, im: c.im })
            .collect();
        let w = exp
            .w
            .values()
            .map(|c| WEntry {
                j: c.j,
                k: c.k,
                bordered: c.bordered,
                samples: [-r, -0.5 * r, 0.0]
                    .iter()
                    .map(|&s| WSample {
                        s,
                        values: c.w.eval(s).iter().map(|z| [z.re, z.im]).collect(),
                    })
                    .collect(),
            })
            .collect();
        let l = exp.basis.lambda1;
        Self { lambda1: [l.re, l.im], g, w }
    }
}
