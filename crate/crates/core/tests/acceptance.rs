//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use bautin_core::ddesim::{integrate, HistoryFn};
use bautin_core::eigenbasis::{bilinear_form, bilinear_form_quadrature};
use bautin_core::fixtures::{cubic_quintic, golden, hayes, wright};
use bautin_core::manifold::FULL_ORDER;
use bautin_core::normalform::{
    check_h2, classify_region, cycle_amplitudes, find_bautin, hopf_point, solve_nu, BetaCoords, NuCoords,
    PipelineOptions, Region, Stability, REGION_TOL,
};
use bautin_core::report::{run_analyze, run_verify, AnalyzeRequest, Mode, SimStatus};
use bautin_core::spectrum::{check_h1, ScanWindow};
use bautin_core::system::AlphaPoly;
use bautin_core::{DelaySystem, ParamPoint};
use common::{all_cases, checks, random_cases, Case};
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    let s = elapsed.as_secs_f64();
    ensure(s < limit, || format!("{what} took {s:.2} s, limit {limit} s"))
}

fn spectrum_correctness() -> Outcome {
    let start = Instant::now();
    let sys = hayes(FRAC_PI_2);
    let alpha = ParamPoint::new(0.0, 0.0);
    let h1 = check_h1(&sys, alpha, 0.01, ScanWindow::default_for(1.0)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let lam = h1.lambda1.as_ref().ok_or("no critical pair")?.lambda;
    ensure(lam.re.abs() <= 1e-10, || format!("mu = {:e}", lam.re))?;
    ensure((lam.im - FRAC_PI_2).abs() <= 1e-10, || format!("omega = {}", lam.im))?;
    ensure(h1.holds, || format!("H1 fails: {}", h1.reason))?;
    ensure(h1.margin < -0.1, || format!("next root at Re = {}", h1.margin))?;
    within(elapsed, 1.0, "H1 check")?;
    Ok(format!(
        "λ₁ = {:.3e}{:+.12}i, {} other roots, margin {:.4}, {:.0} ms",
        lam.re,
        lam.im,
        h1.others.len(),
        h1.margin,
        elapsed.as_secs_f64() * 1e3
    ))
}

fn bilinear_normalization() -> Outcome {
    let mut worst = [0.0f64; 3];
    for case in random_cases(10) {
        let ch = case.ch();
        let b = case.basis();
        let one = bilinear_form(&ch, &b.psi(), &b.phi());
        let zero = bilinear_form(&ch, &b.psi(), &b.phi_bar());
        let quad = [
            (one, bilinear_form_quadrature(&ch, &b.psi(), &b.phi())),
            (zero, bilinear_form_quadrature(&ch, &b.psi(), &b.phi_bar())),
        ];
        let agree = quad.iter().map(|(c, q)| (c - q).norm()).fold(0.0, f64::max);
        worst = [worst[0].max((one - 1.0).norm()), worst[1].max(zero.norm()), worst[2].max(agree)];
        ensure((one - 1.0).norm() <= 1e-10, || format!("{}: (ψ,φ) = {one}", case.name))?;
        ensure(zero.norm() <= 1e-8, || format!("{}: (ψ,φ̄) = {zero}", case.name))?;
        ensure(agree <= 1e-8, || format!("{}: quadrature differs by {agree:e}", case.name))?;
    }
    Ok(format!(
        "10 systems, |(ψ,φ)−1| ≤ {:.1e}, |(ψ,φ̄)| ≤ {:.1e}, closed form vs quadrature ≤ {:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

/// `l₂` of the golden embedding at any α, frozen from the pipeline.
const GOLDEN_L2: f64 = 1.0;

fn golden_oracle() -> Outcome {
    let start = Instant::now();
    let sys = golden(0.5, 1.0);
    let opts = PipelineOptions::default();
    let mut l2_seen = Vec::new();
    for &(a1, a2) in &[(0.0, 0.0), (0.01, -0.25), (0.03, 0.2), (-0.005, 0.1)] {
        let alpha = ParamPoint::new(a1, a2);
        let hp = hopf_point(&sys, alpha, &opts, FULL_ORDER).map_err(|e| e.to_string())?;
        let g21 = hp.expansion.g.get(2, 1);
        let g32 = hp.expansion.g.get(3, 2);
        ensure((g21 - Complex64::new(2.0 * a2, 1.0)).norm() <= 1e-8, || format!("g21 = {g21} at {alpha:?}"))?;
        ensure((g32 - 12.0).norm() <= 1e-8, || format!("g32 = {g32} at {alpha:?}"))?;
        ensure((hp.l1 - a2).abs() <= 1e-8, || format!("l1 = {} at {alpha:?}", hp.l1))?;
        l2_seen.push(hp.l2.unwrap());
    }
    let found = find_bautin(&sys, ParamPoint::new(0.05, -0.03), 30, &opts).map_err(|e| e.to_string())?;
    ensure(found.alpha0.norm() <= 1e-8, || format!("find_bautin stopped at {:?}", found.alpha0))?;
    let h2 = check_h2(&sys, found.alpha0, 1e-4, &opts).map_err(|e| e.to_string())?;
    let j = h2.jacobian;
    let dev = [j[0][0] - 1.0, j[0][1], j[1][0], j[1][1] - 1.0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    ensure(dev <= 1e-4, || format!("H2 Jacobian {j:?}"))?;
    for l2 in &l2_seen {
        ensure((l2 - GOLDEN_L2).abs() <= 1e-8, || format!("l2 = {l2}, pinned {GOLDEN_L2}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, 5.0, "golden oracle")?;
    Ok(format!(
        "g21, g32, l1 exact to 1e-8, α₀ = ({:.1e}, {:.1e}) after {} steps, |J − I| = {dev:.1e}, l2 = {GOLDEN_L2}, {:.2} s",
        found.alpha0.alpha1,
        found.alpha0.alpha2,
        found.iterations,
        elapsed.as_secs_f64()
    ))
}

fn manifold_residuals() -> Outcome {
    let cases = all_cases(0);
    let mut parts = Vec::new();
    for case in cases.iter().filter(|c| c.name == "wright" || c.name == "golden") {
        let res = checks::manifold_residual(case);
        ensure(res <= 1e-8, || format!("{}: residual {res:e}", case.name))?;
        parts.push(format!("{} {res:.1e}", case.name));
    }
    Ok(format!("max residual over 21 points per order: {}", parts.join(", ")))
}

/// Positive roots of `β₁ + β₂ρ² + ρ⁴` counted directly, a double root counting once.
fn expected_roots(b1: f64, b2: f64) -> usize {
    let disc = b2 * b2 - 4.0 * b1;
    if disc.abs() <= 1e-12 {
        return usize::from(b2 < 0.0);
    }
    if disc < 0.0 {
        return 0;
    }
    let s = disc.sqrt();
    [(-b2 - s) / 2.0, (-b2 + s) / 2.0].iter().filter(|&&q| q > 0.0).count()
}

fn region_geometry() -> Outcome {
    let mut counts = [0usize; 3];
    let mut worst = 0.0f64;
    for b1 in [0.0025, 0.01, 0.04, 0.09, 0.16] {
        for b2 in [-1.0, -2.0 * f64::sqrt(b1), -f64::sqrt(b1), 0.3] {
            let beta = BetaCoords { beta1: b1, beta2: b2, s: 1 };
            let class = classify_region(beta, REGION_TOL).map_err(|e| e.to_string())?;
            let got = class.region.cycle_count().ok_or("out of scope inside β₁ > 0")?;
            let want = expected_roots(b1, b2);
            ensure(got == want, || format!("β = ({b1}, {b2}): {:?}, want {want} roots", class.region))?;
            counts[got] += 1;
            if got > 0 {
                let amp = cycle_amplitudes(beta).map_err(|e| e.to_string())?;
                ensure(amp.rho1 > 0.0 && amp.rho1 <= amp.rho2, || format!("{amp:?}"))?;
                ensure(amp.inner == Stability::Attracting || got == 1, || "inner cycle not attracting".into())?;
                for rho in [amp.rho1, amp.rho2] {
                    let res = b1 + b2 * rho * rho + rho.powi(4);
                    worst = worst.max(res.abs());
                    ensure(res.abs() <= 1e-12, || format!("β = ({b1}, {b2}): residual {res:e} at ρ = {rho}"))?;
                }
            }
        }
    }
    let amp = cycle_amplitudes(BetaCoords { beta1: 0.01, beta2: -0.25, s: 1 }).map_err(|e| e.to_string())?;
    let (r1, r2) = (amp.rho1 * amp.rho1, amp.rho2 * amp.rho2);
    ensure((r1 - 0.05).abs() <= 1e-12 && (r2 - 0.2).abs() <= 1e-12, || format!("ρ² = {r1}, {r2}"))?;
    let origin = classify_region(BetaCoords { beta1: 0.0, beta2: 0.0, s: 1 }, REGION_TOL).map_err(|e| e.to_string())?;
    ensure(origin.region == Region::BautinPoint, || format!("origin is {:?}", origin.region))?;
    let left = classify_region(BetaCoords { beta1: -0.01, beta2: -0.3, s: 1 }, REGION_TOL).map_err(|e| e.to_string())?;
    ensure(left.region == Region::OutOfScope, || format!("β₁ < 0 is {:?}", left.region))?;

    // the same geometry end to end on the golden embedding, where β = α
    let sys = golden(0.5, 1.0);
    let mut agree = 0;
    for a1 in [0.005, 0.01, 0.03, 0.06] {
        for a2 in [-0.5, -0.3, -0.1, 0.05, 0.2] {
            let rep = run_analyze(&AnalyzeRequest::new(Mode::Analyze, sys.clone(), ParamPoint::new(a1, a2)))
                .map_err(|e| e.to_string())?;
            let got = rep.classification.and_then(|c| c.region);
            let want = classify_region(BetaCoords { beta1: a1, beta2: a2, s: 1 }, REGION_TOL).unwrap().region;
            ensure(got == Some(want), || format!("golden at ({a1}, {a2}): {got:?}, want {want:?}"))?;
            agree += 1;
        }
    }
    Ok(format!(
        "20 β points ({} none, {} fold, {} two), root residual ≤ {worst:.1e}, ρ² = ({r1:.15}, {r2:.15}), {agree} golden verdicts agree",
        counts[0], counts[1], counts[2]
    ))
}

fn verify_at(sys: &DelaySystem, alpha: ParamPoint) -> Result<bautin_core::report::SimulationSection, String> {
    let rep = run_verify(&AnalyzeRequest::new(Mode::Verify, sys.clone(), alpha)).map_err(|e| e.to_string())?;
    let sim = rep.simulation.ok_or("no simulation section")?;
    ensure(sim.status == SimStatus::Completed, || format!("simulation {:?}: {:?}", sim.status, sim.message))?;
    Ok(sim)
}

fn simulation_agreement() -> Outcome {
    let start = Instant::now();
    let sim = verify_at(&golden(0.5, 1.0), ParamPoint::new(0.01, -0.25))?;
    let elapsed = start.elapsed();
    let cycles = &sim.findings.as_ref().unwrap().cycles;
    ensure(cycles.len() == 2, || format!("{} cycles found", cycles.len()))?;
    let targets = [0.05f64.sqrt(), 0.2f64.sqrt()];
    let mut errs = Vec::new();
    for (c, t) in cycles.iter().zip(targets) {
        let rel = (c.amplitude - t).abs() / t;
        ensure(rel <= 0.05, || format!("amplitude {} vs {t}", c.amplitude))?;
        errs.push(rel);
    }
    ensure(
        cycles[0].stability == Stability::Attracting && cycles[1].stability == Stability::Repelling,
        || "wrong stability order".into(),
    )?;
    let [lo, hi] = cycles[1].bracket.ok_or("no bisection bracket")?;
    let width = (hi - lo) / cycles[1].amplitude;
    ensure(width <= 0.02, || format!("bracket width {width}"))?;
    within(elapsed, 60.0, "golden verification")?;

    // a genuinely delayed family: locate α₀, then place a point with ν₁ > 0, ν₂ < 0
    let sys = cubic_quintic(0.5, 1.0);
    let opts = PipelineOptions::default();
    let found = find_bautin(&sys, ParamPoint::new(0.0, 0.0), 30, &opts).map_err(|e| e.to_string())?;
    let alpha = solve_nu(&sys, NuCoords { nu1: 0.005, nu2: -0.3 }, found.alpha0, 30, &opts).map_err(|e| e.to_string())?;
    let dsim = verify_at(&sys, alpha)?;
    ensure(dsim.predicted_count.is_some(), || "no region prediction".into())?;
    ensure(dsim.predicted_count == dsim.observed_count, || {
        format!("predicted {:?} cycles, observed {:?}", dsim.predicted_count, dsim.observed_count)
    })?;
    ensure(dsim.agreement == Some(true), || "stability pattern disagrees".into())?;
    let worst = dsim.amplitudes.iter().map(|a| a.rel_error).fold(0.0, f64::max);
    ensure(!dsim.amplitudes.is_empty() && worst <= 0.25, || format!("amplitude error {worst}"))?;
    Ok(format!(
        "golden: 2 cycles, errors {:.2}% / {:.2}%, bracket {:.2}%, {:.1} s; delayed at α = ({:.5}, {:.5}): {} cycles, worst amplitude error {:.1}%",
        100.0 * errs[0],
        100.0 * errs[1],
        100.0 * width,
        elapsed.as_secs_f64(),
        alpha.alpha1,
        alpha.alpha2,
        dsim.observed_count.unwrap(),
        100.0 * worst
    ))
}

fn decay_error(h: f64) -> Result<f64, String> {
    let sys = DelaySystem::new(1, 1.0, vec![vec![AlphaPoly::constant(-1.0)]], vec![vec![AlphaPoly::zero()]], vec![])
        .map_err(|e| e.to_string())?;
    let tr = integrate(&sys, ParamPoint::new(0.0, 0.0), HistoryFn::Constant(vec![1.0]), 1.0, h, None)
        .map_err(|e| e.to_string())?;
    Ok((tr.state(tr.len() - 1)[0] - (-1.0f64).exp()).abs())
}

fn integrator_order() -> Outcome {
    let ratio = decay_error(0.1)? / decay_error(0.05)?;
    ensure((12.0..=20.0).contains(&ratio), || format!("ratio {ratio}"))?;
    let sys = wright();
    let alpha = ParamPoint::new(1.0 - FRAC_PI_2, 0.0);
    let tr = integrate(&sys, alpha, HistoryFn::Constant(vec![0.1]), 50.0, 0.01, None).map_err(|e| e.to_string())?;
    let tail = tr.max_abs_in(49.0, 50.0);
    ensure(tail < 1e-3, || format!("|x| = {tail:e} near t = 50"))?;
    Ok(format!("error ratio {ratio:.2}, delayed decay |x(50)| ≤ {tail:.1e}"))
}

fn invariance_suite() -> Outcome {
    let cases: Vec<Case> = all_cases(10);
    for case in &cases {
        checks::conjugation(case, 1e-10)?;
        checks::phase_equivariance(case, std::f64::consts::FRAC_PI_3)?;
        checks::order_two_independence(case)?;
    }
    let regions = checks::l2_rescaling(7, 100)?;
    Ok(format!(
        "{} systems: conjugation, phase equivariance, order-2 independence; l2 rescaling over 100 points, {regions} regions",
        cases.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("spectrum correctness", spectrum_correctness),
        ("bilinear normalization", bilinear_normalization),
        ("golden embedding oracle", golden_oracle),
        ("manifold residuals", manifold_residuals),
        ("region geometry", region_geometry),
        ("simulation agreement", simulation_agreement),
        ("integrator order", integrator_order),
        ("invariance suite", invariance_suite),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
