//! Eigenfunction `φ₁(s) = e^{λ₁ s} u`, adjoint eigenfunction `ψ₁(ξ) = v e^{−λ₁ ξ}`
//! and the bilinear pairing between them.
//!
//! For `η(θ) = A δ(θ) − B δ(θ + r)` the pairing reduces to
//!
//! ```text
//! (ψ, φ) = ψ(0) φ(0) + ∫_{−r}^{0} ψ(ξ + r) B φ(ξ) dξ
//! ```
//!
//! and on a single eigenvalue `(ψ₁, φ₁) = v Δ'(λ₁) u`. The adjoint row is scaled
//! so that `(ψ₁, φ₁) = 1`; `(ψ₁, φ̄₁) = 0` then holds by biorthogonality.

use crate::error::{Error, Result};
use crate::quadrature::{gl64, mapped};
use crate::spectrum::Characteristic;
use crate::system::{DelaySystem, ParamPoint};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;

/// Ratio of the two smallest singular values of `Δ(λ₁)` required for a
/// one-dimensional null space.
const NULL_GAP: f64 = 1e6;
const NOT_A_ROOT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub lambda1: Complex64,
    /// `φ₁(0)`.
    pub u: CVector,
    /// `ψ₁(0)` after normalization, stored as a column of row entries.
    pub v: CVector,
    pub alpha: ParamPoint,
}

impl EigenBasis {
    /// Builds the normalized basis at a simple root `lambda1`.
    pub fn compute(sys: &DelaySystem, alpha: ParamPoint, lambda1: Complex64) -> Result<Self> {
        let ch = Characteristic::new(sys, alpha);
        let u = right_eigenvector(&ch, lambda1)?;
        let v_raw = adjoint_eigenvector(&ch, lambda1)?;
        normalize_basis(&ch, u, &v_raw, lambda1, alpha)
    }

    /// Same basis with `u` rotated by `e^{iθ}` and `v` renormalized.
    pub fn with_phase(&self, ch: &Characteristic, theta: f64) -> Result<Self> {
        let u = &self.u * Complex64::from_polar(1.0, theta);
        normalize_basis(ch, u, &self.v, self.lambda1, self.alpha)
    }

    pub fn phi(&self) -> ExpFunction {
        ExpFunction { coeff: self.u.clone(), lambda: self.lambda1 }
    }

    pub fn phi_bar(&self) -> ExpFunction {
        ExpFunction { coeff: self.u.map(|c| c.conj()), lambda: self.lambda1.conj() }
    }

    pub fn psi(&self) -> ExpFunction {
        ExpFunction { coeff: self.v.clone(), lambda: self.lambda1 }
    }

    pub fn psi_bar(&self) -> ExpFunction {
        ExpFunction { coeff: self.v.map(|c| c.conj()), lambda: self.lambda1.conj() }
    }
}

/// An exponential function. As an element of the state space it means
/// `s ↦ coeff·e^{λ s}` on `[−r, 0]`; as an adjoint element it means
/// `ξ ↦ coeff·e^{−λ ξ}` on `[0, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFunction {
    pub coeff: CVector,
    pub lambda: Complex64,
}

impl ExpFunction {
    pub fn at(&self, s: f64) -> CVector {
        &self.coeff * (self.lambda * s).exp()
    }

    pub fn adjoint_at(&self, xi: f64) -> CVector {
        &self.coeff * (-self.lambda * xi).exp()
    }
}

fn dot(row: &CVector, col: &CVector) -> Complex64 {
    row.iter().zip(col.iter()).map(|(a, b)| a * b).sum()
}

fn row_times(row: &CVector, m: &DMatrix<Complex64>) -> CVector {
    (m.transpose() * row).into_owned()
}

/// Rotates `x` so its largest-modulus entry (the first among ties) is real positive.
pub fn phase_fix(x: &CVector) -> CVector {
    let max = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let pivot = x
        .iter()
        .find(|c| c.norm() >= max * (1.0 - 1e-9))
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        return x.clone();
    }
    x * (pivot.conj() / pivot.norm())
}

/// Unit right null vector of `m`, phase fixed. The left null vector is
/// taken as the right null vector of `mᵀ`: the `V` factor of the SVD is
/// reliable where the `U` factor can lose accuracy for complex input.
fn null_vector(ch: &Characteristic, lambda: Complex64, m: DMatrix<Complex64>) -> Result<CVector> {
    let residual = m.determinant().norm() / ch.scale(lambda);
    if residual > NOT_A_ROOT {
        return Err(Error::NotARoot { lambda, residual: m.determinant().norm() });
    }
    let n = ch.n;
    if n == 1 {
        return Ok(DVector::from_element(1, Complex64::new(1.0, 0.0)));
    }
    let svd = m.svd(false, true);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let (smallest, second) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if second <= NULL_GAP * smallest || second < 1e-12 * ch.scale(lambda) {
        return Err(Error::Degenerate(format!(
            "two smallest singular values {smallest:e} and {second:e} are not separated"
        )));
    }
    let vt = svd.v_t.as_ref().expect("requested V^H");
    let raw: CVector = vt.row(order[0]).transpose().map(|c| c.conj());
    let norm = raw.norm();
    Ok(phase_fix(&(raw / Complex64::new(norm, 0.0))))
}

/// Unit null vector `u` of `Δ(λ₁)`, phase fixed.
pub fn right_eigenvector(ch: &Characteristic, lambda1: Complex64) -> Result<CVector> {
    null_vector(ch, lambda1, ch.matrix(lambda1))
}

/// Unit left null vector `v_raw` of `Δ(λ₁)` (so `v_raw Δ(λ₁) = 0`), phase fixed.
pub fn adjoint_eigenvector(ch: &Characteristic, lambda1: Complex64) -> Result<CVector> {
    null_vector(ch, lambda1, ch.matrix(lambda1).transpose())
}

/// `∫_{−r}^{0} e^{d ξ} dξ`, stable for small `|d r|`.
pub fn exp_integral(d: Complex64, r: f64) -> Complex64 {
    let x = d * r;
    if x.norm() < 1e-3 {
        // r·(1 − x/2 + x²/6 − x³/24 + x⁴/120)
        r * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0)
    } else {
        (1.0 - (-x).exp()) / d
    }
}

/// Closed-form pairing of an adjoint exponential with a state exponential.
pub fn bilinear_form(ch: &Characteristic, psi: &ExpFunction, phi: &ExpFunction) -> Complex64 {
    let head = dot(&psi.coeff, &phi.coeff);
    let vb = row_times(&psi.coeff, &ch.b);
    let tail = dot(&vb, &phi.coeff)
        * (-psi.lambda * ch.r).exp()
        * exp_integral(phi.lambda - psi.lambda, ch.r);
    head + tail
}

/// The same pairing evaluated with 64-point Gauss–Legendre quadrature.
pub fn bilinear_form_quadrature(
    ch: &Characteristic,
    psi: &ExpFunction,
    phi: &ExpFunction,
) -> Complex64 {
    pair_with(ch, psi, &phi.at(0.0), |s| phi.at(s))
}

/// `(ψ, φ)` for an adjoint exponential `ψ` and an arbitrary state function `φ`,
/// by quadrature over `[−r, 0]`.
pub fn pair_with<F>(ch: &Characteristic, psi: &ExpFunction, phi0: &CVector, phi: F) -> Complex64
where
    F: Fn(f64) -> CVector,
{
    let head = dot(&psi.coeff, phi0);
    if ch.b.iter().all(|c| c.norm() == 0.0) {
        return head;
    }
    let vb = row_times(&psi.coeff, &ch.b);
    let tail: Complex64 = mapped(gl64(), -ch.r, 0.0)
        .map(|(xi, w)| (-psi.lambda * (xi + ch.r)).exp() * dot(&vb, &phi(xi)) * w)
        .sum();
    head + tail
}

/// Scales `v_raw` so that `v Δ'(λ₁) u = 1`.
pub fn normalize_basis(
    ch: &Characteristic,
    u: CVector,
    v_raw: &CVector,
    lambda1: Complex64,
    alpha: ParamPoint,
) -> Result<EigenBasis> {
    let d = ch.derivative(lambda1);
    let denom = dot(v_raw, &(&d * &u));
    if denom.norm() < 1e-12 {
        return Err(Error::NormalizationSingular(denom.norm()));
    }
    let v = v_raw / denom;
    Ok(EigenBasis { lambda1, u, v, alpha })
}
