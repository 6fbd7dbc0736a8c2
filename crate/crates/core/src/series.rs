//! Truncated bivariate power series in `(z, z̄)`.
//!
//! Coefficients follow the convention `S(z, z̄) = Σ c_jk z^j z̄^k / (j! k!)`, so
//! that `∂_z` is an index shift and products are binomial convolutions.

use crate::eigenbasis::CVector;
use num_complex::Complex64;

/// A coefficient type: a complex vector space.
pub trait Coeff: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, c: Complex64);

    fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.zero_like();
        out.add_scaled(self, c);
        out
    }
}

impl Coeff for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn add_scaled(&mut self, other: &Self, c: Complex64) {
        *self += other * c;
    }
}

impl Coeff for CVector {
    fn zero_like(&self) -> Self {
        CVector::zeros(self.len())
    }

    fn add_scaled(&mut self, other: &Self, c: Complex64) {
        self.axpy(c, other, Complex64::new(1.0, 0.0));
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[inline]
fn index(j: usize, k: usize) -> usize {
    let d = j + k;
    d * (d + 1) / 2 + k
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series2<T> {
    order: usize,
    zero: T,
    coeffs: Vec<T>,
}

impl<T: Coeff> Series2<T> {
    pub fn new(order: usize, zero: T) -> Self {
        let len = index(0, order) + 1;
        Self { order, coeffs: vec![zero.clone(); len], zero }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn zero(&self) -> &T {
        &self.zero
    }

    /// Coefficient `c_jk`; zero beyond the truncation order.
    pub fn get(&self, j: usize, k: usize) -> &T {
        if j + k > self.order {
            &self.zero
        } else {
            &self.coeffs[index(j, k)]
        }
    }

    pub fn set(&mut self, j: usize, k: usize, value: T) {
        assert!(j + k <= self.order, "({j},{k}) beyond order {}", self.order);
        self.coeffs[index(j, k)] = value;
    }

    pub fn get_mut(&mut self, j: usize, k: usize) -> &mut T {
        assert!(j + k <= self.order, "({j},{k}) beyond order {}", self.order);
        &mut self.coeffs[index(j, k)]
    }

    /// `(j, k, c_jk)` for every stored index, by increasing total degree.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        (0..=self.order).flat_map(move |d| (0..=d).map(move |k| (d - k, k, self.get(d - k, k))))
    }

    pub fn add_scaled(&mut self, other: &Series2<T>, c: Complex64) {
        for (j, k, v) in other.iter() {
            if j + k <= self.order {
                self.get_mut(j, k).add_scaled(v, c);
            }
        }
    }

    /// Copy truncated (or zero-extended) to `order`.
    pub fn truncated(&self, order: usize) -> Self {
        let mut out = Series2::new(order, self.zero.clone());
        for (j, k, v) in self.iter() {
            if j + k <= order {
                out.set(j, k, v.clone());
            }
        }
        out
    }

    /// Product with a scalar series, truncated at `order`.
    pub fn mul_scalar(&self, s: &Series2<Complex64>, order: usize) -> Series2<T> {
        let mut out = Series2::new(order, self.zero.clone());
        for (p, q, a) in s.iter() {
            if a.norm() == 0.0 {
                continue;
            }
            for (l, m, b) in self.iter() {
                let (j, k) = (p + l, q + m);
                if j + k > order {
                    continue;
                }
                let w = binomial(j, p) * binomial(k, q);
                out.get_mut(j, k).add_scaled(b, a * w);
            }
        }
        out
    }

    /// `∂S/∂z`.
    pub fn d_dz(&self) -> Series2<T> {
        let order = self.order.saturating_sub(1);
        let mut out = Series2::new(order, self.zero.clone());
        for (j, k, v) in self.iter() {
            if j >= 1 {
                out.set(j - 1, k, v.clone());
            }
        }
        out
    }

    /// `∂S/∂z̄`.
    pub fn d_dzbar(&self) -> Series2<T> {
        let order = self.order.saturating_sub(1);
        let mut out = Series2::new(order, self.zero.clone());
        for (j, k, v) in self.iter() {
            if k >= 1 {
                out.set(j, k - 1, v.clone());
            }
        }
        out
    }

    pub fn map<U: Coeff>(&self, zero: U, f: impl Fn(&T) -> U) -> Series2<U> {
        Series2 { order: self.order, zero, coeffs: self.coeffs.iter().map(f).collect() }
    }
}

impl Series2<Complex64> {
    pub fn scalar(order: usize) -> Self {
        Series2::new(order, Complex64::new(0.0, 0.0))
    }

    /// Series of the conjugate function: `conj(S)_jk = conj(S_kj)`.
    pub fn conj_swap(&self) -> Self {
        let mut out = Series2::scalar(self.order);
        for (j, k, v) in self.iter() {
            out.set(k, j, v.conj());
        }
        out
    }

    /// Point evaluation, used by tests and residual checks.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.iter()
            .map(|(j, k, c)| {
                c * z.powu(j as u32) * z.conj().powu(k as u32) / (factorial(j) * factorial(k))
            })
            .sum()
    }
}

impl Series2<CVector> {
    /// Component `i` as a scalar series.
    pub fn component(&self, i: usize) -> Series2<Complex64> {
        self.map(Complex64::new(0.0, 0.0), |v| v[i])
    }
}
