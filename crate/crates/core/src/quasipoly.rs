//! Vector-valued quasi-polynomials `w(s) = Σ_m p_m(s) e^{μ_m s}` on `[−r, 0]`.

use crate::eigenbasis::{CVector, ExpFunction};
use crate::series::Coeff;
use crate::spectrum::Characteristic;
use num_complex::Complex64;

/// Exponents closer than this are treated as colliding when solving
/// `w' = κ w + p(s) e^{μ s}`, producing secular `s^m e^{κ s}` terms.
pub const COLLISION_TOL: f64 = 1e-9;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct QTerm {
    pub exponent: Complex64,
    /// `poly[m]` multiplies `s^m`.
    pub poly: Vec<CVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPoly {
    dim: usize,
    terms: Vec<QTerm>,
}

fn same_exponent(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-13 * (1.0 + a.norm())
}

impl QuasiPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn exponential(coeff: CVector, exponent: Complex64) -> Self {
        let mut q = Self::zero(coeff.len());
        q.push(exponent, vec![coeff], ONE);
        q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[QTerm] {
        &self.terms
    }

    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.poly.len().saturating_sub(1)).max().unwrap_or(0)
    }

    fn push(&mut self, exponent: Complex64, poly: Vec<CVector>, c: Complex64) {
        let slot = match self.terms.iter().position(|t| same_exponent(t.exponent, exponent)) {
            Some(i) => i,
            None => {
                self.terms.push(QTerm { exponent, poly: Vec::new() });
                self.terms.len() - 1
            }
        };
        let term = &mut self.terms[slot];
        if term.poly.len() < poly.len() {
            term.poly.resize(poly.len(), CVector::zeros(self.dim));
        }
        for (dst, src) in term.poly.iter_mut().zip(poly.iter()) {
            dst.axpy(c, src, ONE);
        }
    }

    pub fn eval(&self, s: f64) -> CVector {
        let mut out = CVector::zeros(self.dim);
        for t in &self.terms {
            let e = (t.exponent * s).exp();
            let mut sp = ONE;
            for p in &t.poly {
                out.axpy(e * sp, p, ONE);
                sp *= s;
            }
        }
        out
    }

    pub fn derivative(&self) -> QuasiPoly {
        let mut out = QuasiPoly::zero(self.dim);
        for t in &self.terms {
            let mut poly: Vec<CVector> = t.poly.iter().map(|p| p * t.exponent).collect();
            for m in 1..t.poly.len() {
                poly[m - 1].axpy(Complex64::new(m as f64, 0.0), &t.poly[m], ONE);
            }
            out.push(t.exponent, poly, ONE);
        }
        out
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> QuasiPoly {
        QuasiPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| QTerm {
                    exponent: t.exponent.conj(),
                    poly: t.poly.iter().map(|p| p.map(|c| c.conj())).collect(),
                })
                .collect(),
        }
    }

    /// A particular solution of `w' = κ w + self`, vanishing at `s = 0`
    /// on secular terms.
    pub fn particular_solution(&self, kappa: Complex64) -> QuasiPoly {
        let mut out = QuasiPoly::zero(self.dim);
        for t in &self.terms {
            let eps = t.exponent - kappa;
            if eps.norm() < COLLISION_TOL {
                // e^{κ s} ∫_0^s p(σ) dσ
                let mut poly = vec![CVector::zeros(self.dim)];
                for (m, p) in t.poly.iter().enumerate() {
                    poly.push(p / Complex64::new((m + 1) as f64, 0.0));
                }
                out.push(kappa, poly, ONE);
            } else {
                // q = Σ_m (−1)^m p^{(m)} / ε^{m+1} solves q' + ε q = p.
                let mut q = vec![CVector::zeros(self.dim); t.poly.len()];
                let mut deriv = t.poly.clone();
                let mut scale = ONE / eps;
                let mut sign = 1.0;
                while !deriv.is_empty() {
                    for (i, d) in deriv.iter().enumerate() {
                        q[i].axpy(scale * sign, d, ONE);
                    }
                    deriv = (1..deriv.len())
                        .map(|m| &deriv[m] * Complex64::new(m as f64, 0.0))
                        .collect();
                    scale /= eps;
                    sign = -sign;
                }
                out.push(t.exponent, q, ONE);
            }
        }
        out
    }

    /// Closed-form pairing `(ψ, w)` with an adjoint exponential `ψ(ξ) = v e^{−λξ}`.
    pub fn pair_closed(&self, ch: &Characteristic, psi: &ExpFunction) -> Complex64 {
        let w0 = self.eval(0.0);
        let head: Complex64 = psi.coeff.iter().zip(w0.iter()).map(|(a, b)| a * b).sum();
        let vb = ch.b.transpose() * &psi.coeff;
        let shift = (-psi.lambda * ch.r).exp();
        let mut tail = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            for (m, p) in t.poly.iter().enumerate() {
                let vbp: Complex64 = vb.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                tail += vbp * int_poly_exp(m, t.exponent - psi.lambda, ch.r);
            }
        }
        head + shift * tail
    }
}

impl Coeff for QuasiPoly {
    fn zero_like(&self) -> Self {
        QuasiPoly::zero(self.dim)
    }

    fn add_scaled(&mut self, other: &Self, c: Complex64) {
        if c.norm() == 0.0 {
            return;
        }
        for t in &other.terms {
            self.push(t.exponent, t.poly.clone(), c);
        }
    }
}

/// `∫_{−r}^{0} s^m e^{a s} ds`.
pub fn int_poly_exp(m: usize, a: Complex64, r: f64) -> Complex64 {
    let x = a * r;
    if x.norm() < 2.0 {
        // Σ_n a^n/n! ∫ s^{m+n} ds, with ∫_{−r}^0 s^k ds = −(−r)^{k+1}/(k+1)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut an = ONE;
        let mut fact = 1.0;
        for n in 0..80 {
            if n > 0 {
                an *= a;
                fact *= n as f64;
            }
            let k = m + n;
            let base = -(-r).powi(k as i32 + 1) / (k + 1) as f64;
            let term = an / fact * base;
            sum += term;
            if n > 4 && term.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        // I_m = [s^m e^{as}/a]_{−r}^{0} − (m/a) I_{m−1}
        let e = (-x).exp();
        let mut i = (ONE - e) / a;
        for p in 1..=m {
            let boundary = -(-r).powi(p as i32) * e / a;
            i = boundary - i * (p as f64) / a;
        }
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gl64, mapped};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vec1(z: Complex64) -> CVector {
        CVector::from_element(1, z)
    }

    #[test]
    fn int_poly_exp_matches_quadrature() {
        for &a in &[c(0.0, 0.0), c(0.3, -0.2), c(-1.0, 1.57), c(0.0, 6.28), c(-4.0, 12.0)] {
            for m in 0..6 {
                for &r in &[0.5, 1.0, 2.0] {
                    let q: Complex64 = mapped(gl64(), -r, 0.0)
                        .map(|(s, w)| (a * s).exp() * s.powi(m as i32) * w)
                        .sum();
                    let exact = int_poly_exp(m, a, r);
                    assert!((q - exact).norm() < 1e-12 * (1.0 + q.norm()), "a={a} m={m} r={r}");
                }
            }
        }
    }

    #[test]
    fn particular_solution_satisfies_ode() {
        let kappa = c(0.02, 3.0);
        let mut forcing = QuasiPoly::exponential(vec1(c(1.0, 2.0)), c(0.0, 1.0));
        forcing.add_scaled(
            &QuasiPoly { dim: 1, terms: vec![QTerm { exponent: c(0.01, 2.0), poly: vec![vec1(c(0.5, 0.0)), vec1(c(0.0, -1.5))] }] },
            ONE,
        );
        // colliding exponent produces a secular term
        forcing.add_scaled(&QuasiPoly::exponential(vec1(c(-0.7, 0.1)), kappa), ONE);
        let w = forcing.particular_solution(kappa);
        let dw = w.derivative();
        for i in 0..=20 {
            let s = -(i as f64) / 20.0;
            let res = dw.eval(s) - w.eval(s) * kappa - forcing.eval(s);
            assert!(res.norm() < 1e-12, "s={s} res={}", res.norm());
        }
        assert_eq!(w.max_degree(), 1);
    }

    #[test]
    fn conj_is_pointwise() {
        let w = QuasiPoly::exponential(vec1(c(1.0, 2.0)), c(0.1, 1.3));
        let s = -0.37;
        assert!((w.conj().eval(s)[0] - w.eval(s)[0].conj()).norm() < 1e-15);
    }
}
