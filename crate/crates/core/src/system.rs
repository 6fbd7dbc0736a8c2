//! Problem datum: `x'(t) = A(α) x(t) + B(α) x(t-r) + f(x(t), x(t-r), α)`.
//!
//! Every α-dependence is an exact polynomial in `(α1, α2)`, and `f` is a
//! polynomial in the `2n` state variables with total degree between 2 and 5.
//! The configuration format is JSON:
//!
//! ```text
//! { "n": 1, "r": 1.0,
//!   "A": [[[]]],
//!   "B": [[[{"c": -1.0, "i": 1, "j": 0}]]],
//!   "f": [{"eq": 1, "c": [{"c": -1.0, "i": 1, "j": 0}], "kx": [1], "ky": [1]}] }
//! ```
//!
//! Each matrix entry is a list of `{c, i, j}` meaning `c·α1^i·α2^j`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Highest total degree admitted in `f`.
pub const MAX_DEGREE: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ParamPoint {
    pub fn new(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha1.is_finite() && self.alpha2.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.alpha1.hypot(self.alpha2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTerm {
    pub c: f64,
    pub i: u32,
    pub j: u32,
}

/// Polynomial in `(α1, α2)`, kept sorted by `(i, j)` with no duplicate
/// exponent pairs and no zero coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlphaPoly {
    terms: Vec<AlphaTerm>,
}

impl AlphaPoly {
    pub fn new(terms: impl IntoIterator<Item = AlphaTerm>) -> Self {
        let mut terms: Vec<AlphaTerm> = terms.into_iter().collect();
        terms.sort_by_key(|t| (t.i, t.j));
        let mut merged: Vec<AlphaTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.i == t.i && last.j == t.j => last.c += t.c,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.c != 0.0);
        Self { terms: merged }
    }

    pub fn constant(c: f64) -> Self {
        Self::new([AlphaTerm { c, i: 0, j: 0 }])
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[AlphaTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, alpha: ParamPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| t.c * alpha.alpha1.powi(t.i as i32) * alpha.alpha2.powi(t.j as i32))
            .sum()
    }

    fn add(&self, other: &AlphaPoly) -> AlphaPoly {
        AlphaPoly::new(self.terms.iter().chain(other.terms.iter()).copied())
    }
}

/// One monomial of `f`: `coeff(α) · Π x_l^kx[l] · Π y_l^ky[l]` added to equation `eq`
/// (0-based here, 1-based in the configuration document).
#[derive(Debug, Clone, PartialEq)]
pub struct FTerm {
    pub eq: usize,
    pub coeff: AlphaPoly,
    pub kx: Vec<u32>,
    pub ky: Vec<u32>,
}

impl FTerm {
    pub fn degree(&self) -> u32 {
        self.kx.iter().sum::<u32>() + self.ky.iter().sum::<u32>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    n: usize,
    r: f64,
    a: Vec<Vec<AlphaPoly>>,
    b: Vec<Vec<AlphaPoly>>,
    f: Vec<FTerm>,
}

impl DelaySystem {
    /// Validates and normalizes the datum.
    pub fn new(
        n: usize,
        r: f64,
        a: Vec<Vec<AlphaPoly>>,
        b: Vec<Vec<AlphaPoly>>,
        f: Vec<FTerm>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dimension n must be at least 1".into()));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("delay r must be finite and > 0, got {r}")));
        }
        for (name, m) in [("A", &a), ("B", &b)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::Config(format!("matrix {name} must be {n}x{n}")));
            }
            for row in m {
                for p in row {
                    check_poly(p, name)?;
                }
            }
        }
        for (idx, t) in f.iter().enumerate() {
            if t.eq >= n {
                return Err(Error::Config(format!(
                    "f term {}: equation index {} out of range 1..={n}",
                    idx + 1,
                    t.eq + 1
                )));
            }
            if t.kx.len() != n || t.ky.len() != n {
                return Err(Error::Config(format!(
                    "f term {}: kx and ky must each have {n} exponents",
                    idx + 1
                )));
            }
            let d = t.degree();
            if d < 2 {
                return Err(Error::Config(format!(
                    "f term {}: total degree {d} < 2 (f must vanish with its differential at the origin)",
                    idx + 1
                )));
            }
            if d > MAX_DEGREE {
                return Err(Error::Config(format!(
                    "f term {}: total degree {d} > {MAX_DEGREE} is not supported",
                    idx + 1
                )));
            }
            check_poly(&t.coeff, "f")?;
        }
        Ok(Self { n, r, a, b, f: normalize_f(f) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delay(&self) -> f64 {
        self.r
    }

    pub fn f_terms(&self) -> &[FTerm] {
        &self.f
    }

    pub fn a_entries(&self) -> &[Vec<AlphaPoly>] {
        &self.a
    }

    pub fn b_entries(&self) -> &[Vec<AlphaPoly>] {
        &self.b
    }

    /// Entrywise evaluation of `A(α)` and `B(α)`.
    pub fn eval_matrices(&self, alpha: ParamPoint) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let a = DMatrix::from_fn(n, n, |i, j| self.a[i][j].eval(alpha));
        let b = DMatrix::from_fn(n, n, |i, j| self.b[i][j].eval(alpha));
        (a, b)
    }

    /// Taylor polynomial of `f` at fixed α. Exact, since `f` is polynomial.
    pub fn taylor_f(&self, alpha: ParamPoint) -> TaylorF {
        let terms = self
            .f
            .iter()
            .map(|t| Monomial {
                eq: t.eq,
                coeff: Complex64::new(t.coeff.eval(alpha), 0.0),
                kx: t.kx.clone(),
                ky: t.ky.clone(),
            })
            .filter(|m| m.coeff != Complex64::new(0.0, 0.0))
            .collect();
        TaylorF { n: self.n, terms }
    }

    pub fn is_linear(&self) -> bool {
        self.f.is_empty()
    }

    /// Copy with the delay replaced, keeping every other field.
    pub fn with_delay(&self, r: f64) -> Result<Self> {
        Self::new(self.n, r, self.a.clone(), self.b.clone(), self.f.clone())
    }

    pub fn to_config(&self) -> SystemConfig {
        let grid = |m: &Vec<Vec<AlphaPoly>>| -> Vec<Vec<Vec<AlphaTerm>>> {
            m.iter()
                .map(|row| row.iter().map(|p| p.terms().to_vec()).collect())
                .collect()
        };
        SystemConfig {
            n: self.n,
            r: self.r,
            a: grid(&self.a),
            b: grid(&self.b),
            f: self
                .f
                .iter()
                .map(|t| FTermConfig {
                    eq: t.eq + 1,
                    c: t.coeff.terms().to_vec(),
                    kx: t.kx.clone(),
                    ky: t.ky.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("system config serializes")
    }
}

fn check_poly(p: &AlphaPoly, what: &str) -> Result<()> {
    if p.terms().iter().any(|t| !t.c.is_finite()) {
        return Err(Error::Config(format!("non-finite coefficient in {what}")));
    }
    Ok(())
}

fn normalize_f(mut f: Vec<FTerm>) -> Vec<FTerm> {
    f.sort_by(|a, b| (a.eq, &a.kx, &a.ky).cmp(&(b.eq, &b.kx, &b.ky)));
    let mut out: Vec<FTerm> = Vec::with_capacity(f.len());
    for t in f {
        match out.last_mut() {
            Some(last) if last.eq == t.eq && last.kx == t.kx && last.ky == t.ky => {
                last.coeff = last.coeff.add(&t.coeff);
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| !t.coeff.is_zero());
    out
}

/// Serialized form of [`DelaySystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    pub r: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<AlphaTerm>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<AlphaTerm>>>,
    #[serde(default)]
    pub f: Vec<FTermConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FTermConfig {
    pub eq: usize,
    pub c: Vec<AlphaTerm>,
    pub kx: Vec<u32>,
    pub ky: Vec<u32>,
}

impl SystemConfig {
    pub fn into_system(self) -> Result<DelaySystem> {
        let grid = |m: Vec<Vec<Vec<AlphaTerm>>>| -> Vec<Vec<AlphaPoly>> {
            m.into_iter()
                .map(|row| row.into_iter().map(AlphaPoly::new).collect())
                .collect()
        };
        let mut f = Vec::with_capacity(self.f.len());
        for (idx, t) in self.f.into_iter().enumerate() {
            if t.eq == 0 {
                return Err(Error::Config(format!(
                    "f term {}: equation index is 1-based",
                    idx + 1
                )));
            }
            f.push(FTerm { eq: t.eq - 1, coeff: AlphaPoly::new(t.c), kx: t.kx, ky: t.ky });
        }
        DelaySystem::new(self.n, self.r, grid(self.a), grid(self.b), f)
    }
}

/// Parses and validates a JSON system configuration.
pub fn parse_system(text: &str) -> Result<DelaySystem> {
    let cfg: SystemConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
    cfg.into_system()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub eq: usize,
    pub coeff: Complex64,
    pub kx: Vec<u32>,
    pub ky: Vec<u32>,
}

/// `f` at a fixed parameter point, as a polynomial in `(x, y) = (x(t), x(t-r))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorF {
    pub n: usize,
    pub terms: Vec<Monomial>,
}

impl TaylorF {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Real evaluation `f(x, y)` into `out`, used by the simulator.
    pub fn eval_real(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for m in &self.terms {
            let mut v = m.coeff.re;
            for l in 0..self.n {
                if m.kx[l] > 0 {
                    v *= x[l].powi(m.kx[l] as i32);
                }
                if m.ky[l] > 0 {
                    v *= y[l].powi(m.ky[l] as i32);
                }
            }
            out[m.eq] += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const WRIGHT: &str = r#"{
        "n": 1, "r": 1.0,
        "A": [[[]]],
        "B": [[[{"c": -1.0, "i": 1, "j": 0}]]],
        "f": [{"eq": 1, "c": [{"c": -1.0, "i": 1, "j": 0}], "kx": [1], "ky": [1]}]
    }"#;

    #[test]
    fn wright_parses_to_one_quadratic_term() {
        let sys = parse_system(WRIGHT).unwrap();
        assert_eq!(sys.n(), 1);
        assert_eq!(sys.f_terms().len(), 1);
        assert_eq!(sys.f_terms()[0].degree(), 2);
    }

    #[test]
    fn linear_term_in_f_is_rejected() {
        let text = r#"{"n":1,"r":1.0,"A":[[[]]],"B":[[[]]],
            "f":[{"eq":1,"c":[{"c":1.0,"i":0,"j":0}],"kx":[1],"ky":[0]}]}"#;
        let err = parse_system(text).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("degree 1")));
    }

    #[test]
    fn empty_f_is_a_valid_linear_system() {
        let text = r#"{"n":1,"r":1.0,"A":[[[]]],"B":[[[]]],"f":[]}"#;
        let sys = parse_system(text).unwrap();
        assert!(sys.is_linear());
        assert!(sys.taylor_f(ParamPoint::new(0.3, 0.1)).is_zero());
    }

    #[test]
    fn rejects_bad_delay_shape_and_degree() {
        let bad_r = r#"{"n":1,"r":0.0,"A":[[[]]],"B":[[[]]]}"#;
        assert!(parse_system(bad_r).is_err());
        let bad_shape = r#"{"n":2,"r":1.0,"A":[[[]]],"B":[[[]]]}"#;
        assert!(parse_system(bad_shape).is_err());
        let sextic = r#"{"n":1,"r":1.0,"A":[[[]]],"B":[[[]]],
            "f":[{"eq":1,"c":[{"c":1.0,"i":0,"j":0}],"kx":[6],"ky":[0]}]}"#;
        assert!(parse_system(sextic).is_err());
        let malformed = r#"{"n":1,"r":1.0,"A":[[[{"c":"x"}]]],"B":[[[]]]}"#;
        assert!(parse_system(malformed).is_err());
    }

    #[test]
    fn eval_matrices_is_entrywise_polynomial_evaluation() {
        let text = r#"{"n":1,"r":1.0,
            "A":[[[{"c":1.0,"i":1,"j":0},{"c":2.0,"i":0,"j":1}]]],"B":[[[]]]}"#;
        let sys = parse_system(text).unwrap();
        let (a, b) = sys.eval_matrices(ParamPoint::new(1.0, 0.5));
        assert_eq!(a[(0, 0)], 2.0);
        assert_eq!(b[(0, 0)], 0.0);

        let wright = parse_system(WRIGHT).unwrap();
        let (a, b) = wright.eval_matrices(ParamPoint::new(FRAC_PI_2, 0.0));
        assert_eq!(a[(0, 0)], 0.0);
        assert_eq!(b[(0, 0)], -FRAC_PI_2);
    }

    #[test]
    fn taylor_f_evaluates_coefficients() {
        let wright = parse_system(WRIGHT).unwrap();
        let tf = wright.taylor_f(ParamPoint::new(FRAC_PI_2, 0.0));
        assert_eq!(tf.terms.len(), 1);
        assert_eq!(tf.terms[0].coeff.re, -FRAC_PI_2);
        assert_eq!((tf.terms[0].kx.clone(), tf.terms[0].ky.clone()), (vec![1], vec![1]));

        let cubic = r#"{"n":1,"r":1.0,"A":[[[]]],"B":[[[]]],
            "f":[{"eq":1,"c":[{"c":1.0,"i":0,"j":1}],"kx":[3],"ky":[0]}]}"#;
        let tf = parse_system(cubic).unwrap().taylor_f(ParamPoint::new(0.0, 2.0));
        assert_eq!(tf.terms[0].coeff.re, 2.0);
        assert_eq!(tf.terms[0].kx, vec![3]);
    }

    #[test]
    fn duplicate_monomials_merge_and_sort() {
        let text = r#"{"n":2,"r":1.0,"A":[[[],[]],[[],[]]],"B":[[[],[]],[[],[]]],
            "f":[{"eq":2,"c":[{"c":1.0,"i":0,"j":0}],"kx":[2,0],"ky":[0,0]},
                 {"eq":1,"c":[{"c":1.0,"i":1,"j":0}],"kx":[0,2],"ky":[0,0]},
                 {"eq":1,"c":[{"c":2.0,"i":1,"j":0},{"c":1.0,"i":0,"j":0}],"kx":[0,2],"ky":[0,0]}]}"#;
        let sys = parse_system(text).unwrap();
        assert_eq!(sys.f_terms().len(), 2);
        assert_eq!(sys.f_terms()[0].eq, 0);
        assert_eq!(sys.f_terms()[0].coeff.terms().len(), 2);
        assert_eq!(sys.f_terms()[0].coeff.eval(ParamPoint::new(1.0, 0.0)), 4.0);
    }
}
