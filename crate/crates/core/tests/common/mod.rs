#![allow(dead_code)]

pub mod checks;

use bautin_core::ddesim::{HistoryFn, Integrator, Projector};
use bautin_core::eigenbasis::EigenBasis;
use bautin_core::fixtures::{cubic_quintic, golden, wright};
use bautin_core::spectrum::Characteristic;
use bautin_core::system::{AlphaPoly, FTerm};
use bautin_core::{DelaySystem, ParamPoint};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bautin point of `cubic_quintic(0.5, 1.0)`, as located by `find_bautin` from the origin.
pub const CQ_ALPHA0: (f64, f64) = (0.0, 0.039_389_670_460_572_5);

/// A system with a known critical pair `±iω` and the remaining spectrum in
/// the open left half plane, plus its parameter point.
pub struct Case {
    pub name: String,
    pub sys: DelaySystem,
    pub alpha: ParamPoint,
    pub lambda1: Complex64,
}

impl Case {
    pub fn ch(&self) -> Characteristic {
        Characteristic::new(&self.sys, self.alpha)
    }

    pub fn basis(&self) -> EigenBasis {
        EigenBasis::compute(&self.sys, self.alpha, self.lambda1).unwrap()
    }
}

fn constant_matrix(m: &DMatrix<f64>) -> Vec<Vec<AlphaPoly>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| AlphaPoly::constant(m[(i, j)])).collect()).collect()
}

fn random_monomial(rng: &mut ChaCha8Rng, n: usize, degree: u32) -> (Vec<u32>, Vec<u32>) {
    let mut kx = vec![0; n];
    let mut ky = vec![0; n];
    for _ in 0..degree {
        let l = rng.gen_range(0..n);
        if rng.gen_bool(0.5) {
            kx[l] += 1;
        } else {
            ky[l] += 1;
        }
    }
    (kx, ky)
}

/// `x' = Ax + Bx(t−r) + f` built as a similarity transform of a block
/// lower-triangular pair: a scalar delayed block on the first Hopf curve
/// and a strongly damped block with a weak delay.
pub fn random_critical(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3);
    let r: f64 = rng.gen_range(0.5..2.0);
    let theta: f64 = rng.gen_range(0.5..2.6);
    let omega = theta / r;
    let b11 = -omega / theta.sin();
    let a11 = -b11 * theta.cos();

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    a[(0, 0)] = a11;
    b[(0, 0)] = b11;
    for i in 1..n {
        a[(i, 0)] = rng.gen_range(-1.0..1.0);
        b[(i, 0)] = rng.gen_range(-1.0..1.0);
        for j in 1..n {
            a[(i, j)] = if i == j { -rng.gen_range(3.0..4.0) } else { rng.gen_range(-0.3..0.3) };
            b[(i, j)] = rng.gen_range(-0.4..0.4);
        }
    }
    let t = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.0 } + rng.gen_range(-1.0..1.0));
    let ti = t.clone().try_inverse().expect("diagonally dominant");
    let a = &t * a * &ti;
    let b = &t * b * &ti;

    let mut f = Vec::new();
    for eq in 0..n {
        for degree in [2, 2, 3, 4, 5] {
            let (kx, ky) = random_monomial(&mut rng, n, degree);
            f.push(FTerm { eq, coeff: AlphaPoly::constant(rng.gen_range(-1.0..1.0)), kx, ky });
        }
    }
    let sys = DelaySystem::new(n, r, constant_matrix(&a), constant_matrix(&b), f).unwrap();
    let alpha = ParamPoint::new(0.0, 0.0);
    let guess = Complex64::new(0.0, omega);
    let lambda1 = Characteristic::new(&sys, alpha).newton(guess, 50).expect("critical root");
    Case { name: format!("random[{seed}] n={n} r={r:.3}"), sys, alpha, lambda1 }
}

pub fn random_cases(count: u64) -> Vec<Case> {
    (0..count).map(|s| random_critical(1000 + s)).collect()
}

/// Wright at its Hopf point, the planar embedding inside the two-cycle
/// region, the delayed cubic-quintic family at its Bautin point, and
/// `extra` random systems.
pub fn all_cases(extra: u64) -> Vec<Case> {
    let mut out = vec![
        Case {
            name: "wright".into(),
            sys: wright(),
            alpha: ParamPoint::new(0.0, 0.0),
            lambda1: Complex64::new(0.0, std::f64::consts::FRAC_PI_2),
        },
        Case {
            name: "golden".into(),
            sys: golden(0.5, 1.0),
            alpha: ParamPoint::new(0.01, -0.25),
            lambda1: Complex64::new(0.01, 1.0),
        },
    ];
    let cq = cubic_quintic(0.5, 1.0);
    let alpha = ParamPoint::new(CQ_ALPHA0.0, CQ_ALPHA0.1);
    let lambda1 = Characteristic::new(&cq, alpha)
        .newton(Complex64::new(0.0, std::f64::consts::FRAC_PI_2), 50)
        .unwrap();
    out.push(Case { name: "cubic_quintic".into(), sys: cq, alpha, lambda1 });
    out.extend(random_cases(extra));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Converges,
    Escapes,
    Undecided,
}

/// Follows `|z|` from an eigenplane start of amplitude `a` until it drops
/// below `settle` or exceeds `escape`.
pub fn fate(
    sys: &DelaySystem,
    alpha: ParamPoint,
    basis: &EigenBasis,
    a: f64,
    settle: f64,
    escape: f64,
    h: f64,
    horizon: f64,
) -> Fate {
    let mut it = Integrator::new(sys, alpha, HistoryFn::eigenplane(basis, a), h).unwrap();
    let proj = Projector::new(sys, alpha, basis);
    let stride = 8;
    loop {
        for _ in 0..stride {
            if !it.advance() {
                return Fate::Escapes;
            }
        }
        let tr = it.trajectory();
        let i = tr.len() - 1;
        let v = proj.at_grid(tr, i).norm();
        if v > escape {
            return Fate::Escapes;
        }
        if v < settle {
            return Fate::Converges;
        }
        if tr.time(i) >= horizon {
            return Fate::Undecided;
        }
    }
}
