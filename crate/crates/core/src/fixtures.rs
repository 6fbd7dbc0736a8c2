//! Reference systems with known reductions.

use crate::system::{AlphaPoly, AlphaTerm, DelaySystem, FTerm};
use std::f64::consts::FRAC_PI_2;

fn poly(terms: &[(f64, u32, u32)]) -> AlphaPoly {
    AlphaPoly::new(terms.iter().map(|&(c, i, j)| AlphaTerm { c, i, j }))
}

fn term(eq: usize, coeff: AlphaPoly, kx: &[u32], ky: &[u32]) -> FTerm {
    FTerm { eq, coeff, kx: kx.to_vec(), ky: ky.to_vec() }
}

/// Wright's equation `x' = −a x(t−1)(1 + x)` with `a = π/2 + α₁`.
/// Its Hopf point is `α₁ = 0`; `α₂` does not enter.
pub fn wright() -> DelaySystem {
    let a = poly(&[(-FRAC_PI_2, 0, 0), (-1.0, 1, 0)]);
    DelaySystem::new(
        1,
        1.0,
        vec![vec![AlphaPoly::zero()]],
        vec![vec![a.clone()]],
        vec![term(0, a, &[1], &[1])],
    )
    .expect("valid system")
}

/// Scalar `x' = −a x(t−1)` with fixed `a`, `f = 0`.
pub fn hayes(a: f64) -> DelaySystem {
    DelaySystem::new(
        1,
        1.0,
        vec![vec![AlphaPoly::zero()]],
        vec![vec![AlphaPoly::constant(-a)]],
        vec![],
    )
    .expect("valid system")
}

/// Planar ODE (`B = 0`, `r = 1`) whose reduced equation is exactly
/// `ż = (α₁ + i)z + (α₂ + i·b)z|z|² + c₂ z|z|⁴` in the coordinate
/// `z = (x₁ + i x₂)/√2`.
pub fn golden(b: f64, c2: f64) -> DelaySystem {
    let zero = AlphaPoly::zero;
    let mu = poly(&[(1.0, 1, 0)]);
    let a = vec![
        vec![mu.clone(), AlphaPoly::constant(-1.0)],
        vec![AlphaPoly::constant(1.0), mu],
    ];
    let bm = vec![vec![zero(), zero()], vec![zero(), zero()]];
    let half_a = poly(&[(0.5, 0, 1)]);
    let q = c2 / 4.0;
    let f = vec![
        term(0, half_a.clone(), &[3, 0], &[0, 0]),
        term(0, half_a.clone(), &[1, 2], &[0, 0]),
        term(0, AlphaPoly::constant(-b / 2.0), &[2, 1], &[0, 0]),
        term(0, AlphaPoly::constant(-b / 2.0), &[0, 3], &[0, 0]),
        term(0, AlphaPoly::constant(q), &[5, 0], &[0, 0]),
        term(0, AlphaPoly::constant(2.0 * q), &[3, 2], &[0, 0]),
        term(0, AlphaPoly::constant(q), &[1, 4], &[0, 0]),
        term(1, AlphaPoly::constant(b / 2.0), &[3, 0], &[0, 0]),
        term(1, AlphaPoly::constant(b / 2.0), &[1, 2], &[0, 0]),
        term(1, half_a.clone(), &[2, 1], &[0, 0]),
        term(1, half_a, &[0, 3], &[0, 0]),
        term(1, AlphaPoly::constant(q), &[4, 1], &[0, 0]),
        term(1, AlphaPoly::constant(2.0 * q), &[2, 3], &[0, 0]),
        term(1, AlphaPoly::constant(q), &[0, 5], &[0, 0]),
    ];
    DelaySystem::new(2, 1.0, a, bm, f).expect("valid system")
}

/// Scalar delayed cubic-quintic family
/// `x' = −(π/2 + α₁) x(t−1) + q x(t) x(t−1) + α₂ x³ + c x⁵`.
pub fn cubic_quintic(q: f64, c: f64) -> DelaySystem {
    DelaySystem::new(
        1,
        1.0,
        vec![vec![AlphaPoly::zero()]],
        vec![vec![poly(&[(-FRAC_PI_2, 0, 0), (-1.0, 1, 0)])]],
        vec![
            term(0, AlphaPoly::constant(q), &[1], &[1]),
            term(0, poly(&[(1.0, 0, 1)]), &[3], &[0]),
            term(0, AlphaPoly::constant(c), &[5], &[0]),
        ],
    )
    .expect("valid system")
}
