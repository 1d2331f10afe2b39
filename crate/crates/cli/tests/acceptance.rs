//! Acceptance suite for the reference model f = sigma, g = sigma - 1/2.
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumor_spectra_core::eps_spectrum::{
    epsilon_threshold, modal_eigenvalues, spectral_abscissa, ModalWorkspace, ThresholdPolicy,
};
use tumor_spectra_core::geometry::{
    laplace_beltrami_multiplier, mean_curvature_perturbed, normal_perturbed, SphereFunction, SphereQuadrature,
};
use tumor_spectra_core::simulate::{
    evolve_linear_mode, simulate_radial_nonlinear, slow_manifold_profile, RadialOptions, RadialSimulation, Stepper,
};
use tumor_spectra_core::stokes::bgamma_via_stokes;
use tumor_spectra_core::{
    alpha_slope, find_stationary_radius, rescale_to_unit, spectral_summary, Parity, RateFunction, RateSpec,
    StationaryOptions, StationaryState, UnitBallState,
};

const SIGMA_TILDE: f64 = 0.5;
/// Root of 3(R coth R - 1)/R^2 = 1/2, from the oracle below at 200-bit-equivalent bisection.
const R_S_FROZEN: f64 = 4.733_319_399_775_18;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rates() -> (RateFunction, RateFunction) {
    (
        RateFunction::new(RateSpec::linear(&[1.0])).unwrap(),
        RateFunction::new(RateSpec::linear(&[1.0, SIGMA_TILDE])).unwrap(),
    )
}

fn opts(n: usize) -> StationaryOptions {
    StationaryOptions {
        n,
        ..StationaryOptions::default()
    }
}

fn stationary(n: usize) -> StationaryState {
    let (f, g) = rates();
    find_stationary_radius(&f, &g, 1.0, &opts(n)).unwrap()
}

// Independent scalar oracle for the radial stationary condition.
fn closed_form_condition(r: f64) -> f64 {
    3.0 * (r / r.tanh() - 1.0) / (r * r) - SIGMA_TILDE
}

fn oracle_radius() -> f64 {
    let (mut lo, mut hi) = (1.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closed_form_condition(lo) * closed_form_condition(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Ordinary least squares y = a + b x; returns (a, b, r2).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let b = sxy / sxx;
    (ym - b * xm, b, sxy * sxy / (sxx * syy))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

struct Ctx {
    unscaled: StationaryState,
    unit: UnitBallState,
    gamma_star: f64,
    l_star: usize,
}

fn criterion_1(ctx: &Ctx) -> Outcome {
    let r_oracle = oracle_radius();
    let s = &ctx.unscaled;
    let cond = closed_form_condition(s.radius).abs();
    let dr = (s.radius - r_oracle).abs();
    let frozen = (r_oracle - R_S_FROZEN).abs();
    let sigma_err = max_abs(
        s.radii()
            .iter()
            .zip(&s.sigma)
            .map(|(&r, &u)| u - r_oracle * r.sinh() / (r * r_oracle.sinh())),
    );
    outcome(
        cond <= 1e-8 && dr <= 1e-8 && frozen <= 1e-12 && sigma_err <= 1e-8,
        format!(
            "R_s = {:.12}, |condition| = {cond:.1e}, |R_s - oracle| = {dr:.1e}, max |sigma - sinh form| = {sigma_err:.1e}",
            s.radius
        ),
    )
}

fn criterion_2(ctx: &Ctx) -> Outcome {
    let gamma = 1.2 * ctx.gamma_star;
    let u = ctx.unit.with_gamma(gamma);
    let grid = &u.grid;
    let n = grid.len();
    let g = u.g_values();
    let offsets: Vec<f64> = u.p.iter().zip(&g).map(|(p, gv)| p - 4.0 / 3.0 * gv).collect();
    let spread = max_abs(offsets.iter().map(|o| o - offsets[0]));
    let gamma_err = (offsets[0] - gamma).abs();
    let v2 = grid.d2(Parity::Odd).unwrap() * nalgebra::DVector::from_column_slice(&u.v);
    let p1 = grid.derivative(&u.p, Parity::Even).unwrap();
    let lhs = 2.0 * v2[n - 1] - p1[n - 1] - 2.0 / 3.0 * u.g.derivative(1.0) * u.sigma_prime_1;
    let rhs = -4.0 * u.g_at_boundary();
    let id_err = (lhs - rhs).abs();
    outcome(
        spread <= 1e-9 && gamma_err <= 1e-9 && id_err <= 1e-7 && u.residuals.momentum <= 1e-7,
        format!(
            "offset spread {spread:.1e}, |offset - gamma| {gamma_err:.1e}, boundary identity error {id_err:.1e}, momentum residual {:.1e}",
            u.residuals.momentum
        ),
    )
}

fn rel_scale(l: usize, gamma: f64, formula: f64) -> f64 {
    match l {
        0 => formula.abs(),
        1 => 1.0,
        _ => formula.abs().max(alpha_slope(l).abs() * gamma),
    }
}

fn criterion_3(ctx: &Ctx) -> Outcome {
    let sp = spectral_summary(&ctx.unit, 1.0, 12).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, 0.0);
    for gamma in [0.5 * ctx.gamma_star, ctx.gamma_star, 2.0 * ctx.gamma_star] {
        let s = sp.at_gamma(gamma);
        for l in 0..=12 {
            let formula = s.multiplier(l).unwrap();
            let stokes = bgamma_via_stokes(l, gamma, &ctx.unit).unwrap();
            let err = (stokes - formula).abs() / rel_scale(l, gamma, formula);
            if err > worst {
                worst = err;
                worst_at = (l, gamma);
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "max relative error {worst:.1e} (l = {}, gamma = {:.4}) over l = 0..12 at three gammas",
            worst_at.0, worst_at.1
        ),
    )
}

fn criterion_4(ctx: &Ctx) -> Outcome {
    let mut worst: f64 = 0.0;
    let gammas = [0.5, 1.0, 1.5, 2.0, 3.0].map(|k| k * ctx.gamma_star);
    for l in [2, 3, 5, 8] {
        let vals: Vec<f64> = gammas
            .iter()
            .map(|&g| bgamma_via_stokes(l, g, &ctx.unit).unwrap())
            .collect();
        let (_, slope, _) = linear_fit(&gammas, &vals);
        worst = worst.max(((slope - alpha_slope(l)) / alpha_slope(l)).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("max relative slope error {worst:.1e} for l in {{2, 3, 5, 8}}"),
    )
}

fn criterion_5(ctx: &Ctx) -> Outcome {
    let s64 = spectral_summary(&ctx.unit, 1.0, 64).unwrap();
    let s128 = spectral_summary(&ctx.unit, 1.0, 128).unwrap();
    let all_positive = s64.degrees.iter().all(|d| d.gamma_l > 0.0);
    let tail: Vec<f64> = s64.degrees[s64.degrees.len() - 8..].iter().map(|d| d.gamma_l).collect();
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let g64 = s64.gamma_l(64).unwrap();
    let tail_small = g64 < s64.gamma_star / 10.0;
    let stable = s64.l_star == s128.l_star;
    outcome(
        all_positive && decreasing && tail_small && s64.alpha0 < 0.0 && s64.gamma_star > 0.0 && stable,
        format!(
            "gamma_l > 0: {all_positive}; tail decreasing: {decreasing}; gamma_64/gamma_* = {:.4} (needs < 0.1); alpha0 = {:.6}; gamma_* = {:.9}; l_* = {} (l_max 128: {})",
            g64 / s64.gamma_star,
            s64.alpha0,
            s64.gamma_star,
            s64.l_star,
            s128.l_star
        ),
    )
}

fn criterion_6(ctx: &Ctx) -> Outcome {
    let gamma = 1.2 * ctx.gamma_star;
    let ws = ModalWorkspace::new(ctx.unit.clone());
    let eps = log_grid(1e-4, 1e-2, 9);
    let mut ok = true;
    let mut notes = Vec::new();
    for l in [2, ctx.l_star] {
        let alpha = ws.multiplier(l, gamma).unwrap();
        let mut dev = Vec::new();
        let mut ratio = Vec::new();
        for &e in &eps {
            let rep = modal_eigenvalues(&ws.assemble(l, e, gamma).unwrap()).unwrap();
            dev.push((rep.slow_branch.re - alpha).abs());
            ratio.push(rep.slow_eigvec_ratio);
        }
        let (_, c, r2) = linear_fit(&eps, &dev);
        let bounded = dev.iter().zip(&eps).all(|(d, e)| *d <= 1.1 * c * e);
        let (_, cr, rr2) = linear_fit(&eps, &ratio);
        let ratio_bounded = ratio.iter().zip(&eps).all(|(d, e)| *d <= 1.1 * cr * e);
        ok &= r2 >= 0.999 && bounded && ratio_bounded && rr2 >= 0.999;
        notes.push(format!("l={l}: C={c:.4}, R2={r2:.6}, ratio C={cr:.4}"));
    }
    let mut l1 = 0.0f64;
    for &e in &eps {
        l1 = l1.max(
            modal_eigenvalues(&ws.assemble(1, e, gamma).unwrap())
                .unwrap()
                .slow_branch
                .re
                .abs(),
        );
    }
    ok &= l1 <= 1e-6;
    notes.push(format!("l=1 max |slow| = {l1:.1e}"));

    let mut fast_err: f64 = 0.0;
    for l in [2, ctx.l_star] {
        let block = ws.mode(l).unwrap().l_block.clone();
        let mut dir: Vec<f64> = block.complex_eigenvalues().iter().map(|z| z.re).collect();
        dir.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for &e in &eps {
            let rep = modal_eigenvalues(&ws.assemble(l, e, gamma).unwrap()).unwrap();
            let slow = rep.slow_branch.re;
            let mut fast: Vec<f64> = rep.eigenvalues.iter().map(|z| z.re).collect();
            let k = fast
                .iter()
                .position(|x| (x - slow).abs() <= 1e-12 * (1.0 + slow.abs()))
                .unwrap_or_else(|| {
                    fast.iter()
                        .enumerate()
                        .min_by(|a, b| (a.1 - slow).abs().partial_cmp(&(b.1 - slow).abs()).unwrap())
                        .unwrap()
                        .0
                });
            fast.remove(k);
            for i in 0..5 {
                let target = dir[i] / e;
                fast_err = fast_err.max(((fast[i] - target) / target).abs());
            }
        }
    }
    ok &= fast_err <= 1e-4;
    notes.push(format!("fast branch vs Dirichlet rel err {fast_err:.1e}"));
    outcome(ok, notes.join("; "))
}

fn criterion_7(ctx: &Ctx) -> Outcome {
    let l_max = 16;
    let ws = ModalWorkspace::new(ctx.unit.clone());
    let hi = 1.2 * ctx.gamma_star;
    let lo = 0.8 * ctx.gamma_star;
    let thr = epsilon_threshold(&ws, hi, l_max, &ThresholdPolicy::default()).unwrap();
    let eps0 = thr.epsilon0.unwrap_or(0.0);
    let mut bound_ok = eps0 > 0.0;
    let mut worst = f64::NEG_INFINITY;
    if bound_ok {
        for e in log_grid(1e-6, eps0, 8) {
            let a = spectral_abscissa(&ws, hi, e, l_max, f64::INFINITY).unwrap();
            worst = worst.max(a);
            bound_ok &= a <= thr.bound;
        }
    }
    let unstable = spectral_abscissa(&ws, lo, 1e-3, l_max, f64::INFINITY).unwrap();
    let mut sim_err: f64 = 0.0;
    for gamma in [hi, lo] {
        for l in [2, ctx.l_star] {
            let op = ws.assemble(l, 1e-3, gamma).unwrap();
            let rep = modal_eigenvalues(&op).unwrap();
            let m = op.interior_len();
            let tr = evolve_linear_mode(&op, &vec![0.0; m], 1.0, 6.0, 0.01, Stepper::TrBdf2).unwrap();
            sim_err = sim_err.max(((tr.fitted_rate - rep.slow_branch.re) / rep.slow_branch.re).abs());
        }
    }
    outcome(
        bound_ok && unstable > 0.0 && sim_err <= 0.01,
        format!(
            "eps0 = {eps0:.6} (bound {:.6}, worst abscissa below eps0 {worst:.6}); abscissa at 0.8 gamma_*, eps 1e-3 = {unstable:.6}; linear simulation rate error {sim_err:.1e}",
            thr.bound
        ),
    )
}

fn radial_run(u: &UnitBallState, eps: f64, r0: f64, horizon: f64, dt: f64) -> RadialSimulation {
    let sigma0 = if r0 == 1.0 {
        u.sigma.clone()
    } else {
        slow_manifold_profile(&u.f, &u.g, eps, r0, &u.grid, &opts(u.grid.len())).unwrap()
    };
    simulate_radial_nonlinear(
        &u.f,
        &u.g,
        eps,
        r0,
        &sigma0,
        &u.grid,
        horizon,
        dt,
        &RadialOptions::default(),
    )
    .unwrap()
}

fn slow_l0(ws: &ModalWorkspace, eps: f64) -> f64 {
    if eps == 0.0 {
        ws.multiplier(0, 1.0).unwrap()
    } else {
        modal_eigenvalues(&ws.assemble(0, eps, 1.0).unwrap())
            .unwrap()
            .slow_branch
            .re
    }
}

fn criterion_8(ctx: &Ctx) -> Outcome {
    let ws = ModalWorkspace::new(ctx.unit.clone());
    let mut ok = true;
    let mut notes = Vec::new();
    for eps in [0.0, 0.01] {
        let still = radial_run(&ctx.unit, eps, 1.0, 10.0, 0.01);
        let drift = max_abs(still.radii().iter().map(|r| r - 1.0));
        let sim = radial_run(&ctx.unit, eps, 1.05, 5.0, 0.01);
        let (rate, _) = sim.fitted_rate(1.0).unwrap();
        let slow = slow_l0(&ws, eps);
        let rel = ((rate - slow) / slow).abs();
        let res: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| radial_run(&ctx.unit, eps, 1.05, 1.0, dt).max_volume_residual())
            .collect();
        let order = (res[1] / res[2]).log2().min((res[0] / res[1]).log2());
        ok &= drift <= 1e-8 && rel <= 0.05 && order >= 1.9;
        notes.push(format!(
            "eps={eps}: drift {drift:.1e}, rate {rate:.6} vs {slow:.6} ({:.2}%), volume residual order {order:.2}",
            100.0 * rel
        ));
    }
    outcome(ok, notes.join("; "))
}

fn richardson_order(errors: &[f64]) -> f64 {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

fn criterion_9() -> Outcome {
    let quad = SphereQuadrature::with_sizes(16, 40, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let degree = 6;
    let coeffs: Vec<f64> = (0..(degree + 1) * (degree + 1))
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let eta = SphereFunction::from_coeffs(degree, coeffs).unwrap();
    let mut dk = Vec::new();
    let mut dn = Vec::new();
    for e in [1e-2, 5e-3, 2.5e-3] {
        let rho = eta.scaled(e);
        dk.push(
            mean_curvature_perturbed(&rho, true, &quad).max_abs_diff(&mean_curvature_perturbed(&rho, false, &quad)),
        );
        dn.push(normal_perturbed(&rho, true, &quad).max_abs_diff(&normal_perturbed(&rho, false, &quad)));
    }
    let (ok_k, ok_n) = (richardson_order(&dk), richardson_order(&dn));
    let mult1 = 1.0 + 0.5 * laplace_beltrami_multiplier(1);
    let y1 = SphereFunction::single(4, 1, 1, 1e-3).unwrap();
    let lin1 = max_abs(
        mean_curvature_perturbed(&y1, false, &quad)
            .values
            .iter()
            .map(|k| k - 1.0),
    );
    outcome(
        ok_k >= 1.9 && ok_n >= 1.9 && mult1 == 0.0 && lin1 <= 1e-15,
        format!("curvature order {ok_k:.3}, normal order {ok_n:.3}, l=1 multiplier {mult1}, l=1 linearized deviation {lin1:.1e}"),
    )
}

fn run_cli(cmd: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_tumor-spectra"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn criterion_10(ctx: &Ctx) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"model": {"f": {"family": "linear", "coeffs": [1.0]},
                      "g": {"family": "linear", "coeffs": [1.0, 0.5]},
                      "epsilon": 0.01, "gamma": 5.67},
            "numerics": {"n_radial": 48, "l_max": 32}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ran = run_cli("spectrum", &config, &a) && run_cli("spectrum", &config, &b);
    let first: Vec<Vec<u8>> = ["spectrum.csv", "oracle.csv", "summary.json"]
        .iter()
        .map(|f| std::fs::read(a.join(f)).unwrap_or_default())
        .collect();
    // rerun into a reused directory, which now hits the stationary cache
    let ran = ran && run_cli("spectrum", &config, &a);
    let identical = ["spectrum.csv", "oracle.csv", "summary.json"]
        .iter()
        .enumerate()
        .all(|(i, f)| {
            let x = std::fs::read(a.join(f)).unwrap_or_default();
            let y = std::fs::read(b.join(f)).unwrap_or_default();
            !x.is_empty() && x == y && x == first[i]
        });

    let fine = rescale_to_unit(&stationary(128));
    let s_fine = spectral_summary(&fine, 1.0, 64).unwrap();
    let d_gamma = (s_fine.gamma_star - ctx.gamma_star).abs();
    let gamma = 1.2 * ctx.gamma_star;
    let ws_c = ModalWorkspace::new(ctx.unit.clone());
    let ws_f = ModalWorkspace::new(fine.clone());
    let mut d_lambda: f64 = 0.0;
    for l in [2, ctx.l_star] {
        for e in [1e-4, 1e-3, 1e-2] {
            let a = modal_eigenvalues(&ws_c.assemble(l, e, gamma).unwrap())
                .unwrap()
                .slow_branch
                .re;
            let b = modal_eigenvalues(&ws_f.assemble(l, e, gamma).unwrap())
                .unwrap()
                .slow_branch
                .re;
            d_lambda = d_lambda.max((a - b).abs());
        }
    }
    let rate = |u: &UnitBallState| radial_run(u, 0.01, 1.05, 5.0, 0.01).fitted_rate(1.0).unwrap().0;
    let (rc, rf) = (rate(&ctx.unit), rate(&fine));
    let d_rate = ((rc - rf) / rf).abs();
    outcome(
        ran && identical && d_gamma <= 1e-6 && d_lambda <= 1e-6 && d_rate <= 1e-3,
        format!(
            "byte-identical reruns: {identical}; n 64 -> 128: |d gamma_*| {d_gamma:.1e}, max |d lambda| {d_lambda:.1e}, rate change {:.1e}%",
            100.0 * d_rate
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let t0 = Instant::now();
    let unscaled = stationary(64);
    let unit = rescale_to_unit(&unscaled);
    let sp = spectral_summary(&unit, 1.0, 64).unwrap();
    let ctx = Ctx {
        unscaled,
        unit,
        gamma_star: sp.gamma_star,
        l_star: sp.l_star,
    };
    let criteria: Vec<Criterion> = vec![
        ("stationary oracle", Box::new(|| criterion_1(&ctx))),
        ("pressure identity", Box::new(|| criterion_2(&ctx))),
        ("spectral oracle equivalence", Box::new(|| criterion_3(&ctx))),
        ("affine slope in gamma", Box::new(|| criterion_4(&ctx))),
        ("threshold properties", Box::new(|| criterion_5(&ctx))),
        ("epsilon spectrum", Box::new(|| criterion_6(&ctx))),
        ("stability dichotomy", Box::new(|| criterion_7(&ctx))),
        ("nonlinear-linear consistency", Box::new(|| criterion_8(&ctx))),
        ("geometry linearizations", Box::new(criterion_9)),
        ("determinism and convergence", Box::new(|| criterion_10(&ctx))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<30} {} [{:.1}s] {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
