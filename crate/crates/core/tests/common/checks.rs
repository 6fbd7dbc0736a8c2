//! Invariant checks shared by the unit-style tests and the acceptance runner.

use super::Case;
use bautin_core::manifold::{compose_f, embed_series, expand, g_from_f, residuals, ManifoldExpansion, FULL_ORDER};
use bautin_core::normalform::{
    beta_map, classify_region, first_lyapunov_at, radial_amplitudes, second_lyapunov, NuCoords, REGION_TOL,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn full_expansion(case: &Case) -> ManifoldExpansion {
    expand(&case.ch(), &case.sys.taylor_f(case.alpha), &case.basis(), FULL_ORDER).unwrap()
}

/// `F_kj = conj(F_jk)` and `w_kj = conj(w_jk)` since x_t is real; pairing
/// with ψ̄ instead of ψ gives the conjugate equation, `ḡ_kj = conj(g_jk)`.
pub fn conjugation(case: &Case, tol: f64) -> Check {
    let exp = full_expansion(case);
    for (j, k, fj) in exp.f.iter() {
        let d = (exp.f.get(k, j).map(|c| c.conj()) - fj).norm();
        if d > tol * (1.0 + fj.norm()) {
            return Err(format!("{}: F{j}{k} not mirrored ({d:e})", case.name));
        }
    }
    let vbar = exp.basis.v.map(|c| c.conj());
    for (j, k, g) in exp.g.iter() {
        let gbar_kj: Complex64 = vbar.iter().zip(exp.f.get(k, j).iter()).map(|(a, b)| a * b).sum();
        if (gbar_kj - g.conj()).norm() > tol * (1.0 + g.norm()) {
            return Err(format!("{}: g{j}{k} = {g}, mirrored {gbar_kj}", case.name));
        }
    }
    let r = case.sys.delay();
    for (&(j, k), c) in &exp.w {
        let other = &exp.w[&(k, j)];
        for i in 0..=20 {
            let s = -r + r * i as f64 / 20.0;
            let d = (c.w.eval(s) - other.w.eval(s).map(|z| z.conj())).norm();
            if d > tol * (1.0 + c.w.eval(s).norm()) {
                return Err(format!("{}: w{j}{k}({s}) mismatch {d:e}", case.name));
            }
        }
    }
    Ok(())
}

/// `u → e^{iθ}u` sends `g_jk → e^{i(j−k−1)θ} g_jk` and leaves `l₁`, `l₂` alone.
pub fn phase_equivariance(case: &Case, theta: f64) -> Check {
    let ch = case.ch();
    let tf = case.sys.taylor_f(case.alpha);
    let basis = case.basis();
    let rotated = basis.with_phase(&ch, theta).map_err(|e| e.to_string())?;
    let a = expand(&ch, &tf, &basis, FULL_ORDER).map_err(|e| e.to_string())?;
    let b = expand(&ch, &tf, &rotated, FULL_ORDER).map_err(|e| e.to_string())?;
    for (j, k, g) in a.g.iter().filter(|(j, k, _)| (2..=3).contains(&(j + k))) {
        let want = g * Complex64::from_polar(1.0, (j as f64 - k as f64 - 1.0) * theta);
        let got = b.g(j, k);
        if (got - want).norm() > 1e-10 * (1.0 + g.norm()) {
            return Err(format!("{}: g{j}{k} {got} vs {want}", case.name));
        }
    }
    let (l1a, l1b) = (first_lyapunov_at(&a.g, case.lambda1), first_lyapunov_at(&b.g, case.lambda1));
    if (l1a - l1b).abs() > 1e-10 * (1.0 + l1a.abs()) {
        return Err(format!("{}: l1 {l1a} vs {l1b}", case.name));
    }
    let (l2a, l2b) = (second_lyapunov(&a.g, case.lambda1.im), second_lyapunov(&b.g, case.lambda1.im));
    if (l2a - l2b).abs() > 1e-8 * (1.0 + l2a.abs()) {
        return Err(format!("{}: l2 {l2a} vs {l2b}", case.name));
    }
    Ok(())
}

/// Order-2 coefficients do not read the w table; order 3 does whenever
/// f has a quadratic part.
pub fn order_two_independence(case: &Case) -> Check {
    let exp = full_expansion(case);
    let zeroed = exp.with_zeroed_w();
    let tf = case.sys.taylor_f(case.alpha);
    let r = case.sys.delay();
    let g_of = |w| {
        let order = FULL_ORDER - 1;
        let x0 = embed_series(&exp.basis, w, 0.0, order).unwrap();
        let xr = embed_series(&exp.basis, w, -r, order).unwrap();
        g_from_f(&compose_f(&tf, &x0, &xr, order), &exp.basis)
    };
    let full = g_of(&exp.w);
    let bare = g_of(&zeroed.w);
    for k in 0..=2 {
        let (a, b) = (full.get(2 - k, k), bare.get(2 - k, k));
        if (a - b).norm() > 1e-14 * (1.0 + a.norm()) || (a - exp.g(2 - k, k)).norm() > 1e-12 * (1.0 + a.norm()) {
            return Err(format!("{}: g{}{k} depends on w", case.name, 2 - k));
        }
    }
    let quadratic = (0..=2).any(|k| exp.g(2 - k, k).norm() > 1e-8);
    if quadratic && (full.get(2, 1) - bare.get(2, 1)).norm() <= 1e-8 {
        return Err(format!("{}: w did not enter g21", case.name));
    }
    Ok(())
}

/// Largest homological-equation residual over 21 sample points per order.
pub fn manifold_residual(case: &Case) -> f64 {
    let exp = full_expansion(case);
    residuals(&exp, &case.ch(), &case.sys.taylor_f(case.alpha), 21).max()
}

/// Region labels do not change under `l₂ → c·l₂` with `ν₂ → ν₂/√c`, and the
/// unscaled radial roots scale as `ρ → ρ c^{-1/4}` under `ν₂ → ν₂√c`.
/// Returns the number of distinct regions visited.
pub fn l2_rescaling(seed: u64, points: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..points {
        let nu = NuCoords { nu1: rng.gen_range(-0.02..0.1), nu2: rng.gen_range(-0.8..0.4) };
        let l2 = rng.gen_range(0.2..5.0);
        let base = classify_region(beta_map(nu, l2).unwrap(), REGION_TOL).unwrap();
        seen.insert(format!("{:?}", base.region));
        for c in [0.1, 0.5, 3.0, 40.0] {
            let scaled = NuCoords { nu1: nu.nu1, nu2: nu.nu2 / f64::sqrt(c) };
            let beta = beta_map(scaled, c * l2).unwrap();
            let other = classify_region(beta, REGION_TOL).unwrap();
            if beta.s != 1 || base.region != other.region {
                return Err(format!("nu = {nu:?}, l2 = {l2}, c = {c}: {:?} vs {:?}", base.region, other.region));
            }
            let rho = radial_amplitudes(nu.nu1, nu.nu2, l2);
            let rho_c = radial_amplitudes(nu.nu1, nu.nu2 * c.sqrt(), c * l2);
            if rho.len() != rho_c.len()
                || rho.iter().zip(&rho_c).any(|(a, b)| (a * c.powf(-0.25) - b).abs() > 1e-12 * (1.0 + a))
            {
                return Err(format!("radial roots not covariant at nu = {nu:?}, l2 = {l2}, c = {c}"));
            }
        }
    }
    Ok(seen.len())
}
