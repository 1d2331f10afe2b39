use nalgebra::DMatrix;
use tumor_spectra_core::eps_spectrum::{
    epsilon_threshold, modal_eigenvalues, slow_eigenvector, spectral_abscissa, ModalWorkspace, ThresholdPolicy,
};
use tumor_spectra_core::{
    make_rate_function, solve_fl, spectral_summary, unit_ball_state, Error, RadialGrid, RateSpec, StationaryOptions,
    UnitBallState,
};

fn reference(n: usize) -> UnitBallState {
    let f = make_rate_function(RateSpec::linear(&[1.0])).unwrap();
    let g = make_rate_function(RateSpec::linear(&[1.0, 0.5])).unwrap();
    let opts = StationaryOptions {
        n,
        ..Default::default()
    };
    unit_ball_state(&f, &g, 1.0, &opts).unwrap()
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (xm, ym) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let slope = sxy / sxx;
    (ym - slope * xm, slope, sxy * sxy / (sxx * syy))
}

#[test]
fn kernel_normalization_and_harmonic_limit() {
    let ws = ModalWorkspace::new(reference(48));
    for l in [0, 1, 2, 5] {
        let mode = ws.mode(l).unwrap();
        assert_eq!(*mode.kernel.last().unwrap(), 1.0);
        let fl = solve_fl(l, ws.state()).unwrap();
        let s1 = ws.state().sigma_prime_1;
        for (a, b) in mode.kernel.iter().zip(&fl) {
            assert!((-s1 * a - b).abs() < 1e-14 * s1.abs());
        }
    }
    let grid = RadialGrid::chebyshev(32).unwrap();
    let n = grid.len();
    for l in [0, 2, 3, 6] {
        let u = grid.solve_radial(l, &vec![0.0; n], &vec![0.0; n], 1.0).unwrap();
        for (r, v) in grid.nodes().iter().zip(&u) {
            assert!((v - r.powi(l as i32)).abs() < 1e-12);
        }
    }
}

#[test]
fn block_layout() {
    let ws = ModalWorkspace::new(reference(32));
    let gamma = 6.0;
    let sum = spectral_summary(ws.state(), gamma, 4).unwrap();
    for l in 0..=4 {
        let op = ws.assemble(l, 1e-2, gamma).unwrap();
        let m = op.interior_len();
        assert!((op.matrix[(m, m)] - sum.multiplier(l).unwrap()).abs() < 1e-12);
        assert_eq!(op.matrix[(m, m)], op.b_l);
        assert_eq!(
            op.matrix.row(m).columns(0, m).iter().copied().collect::<Vec<_>>(),
            op.mode.j_row
        );
        for i in 0..m {
            let want = op.sigma_prime_1 * op.mode.kernel[i] * op.b_l;
            assert!((op.matrix[(i, m)] - want).abs() <= 1e-14 * want.abs().max(1.0));
        }
        assert!(op.assembly_residual < 1e-8, "l = {l}: {}", op.assembly_residual);
    }
}

#[test]
fn epsilon_scaling_of_blocks() {
    let ws = ModalWorkspace::new(reference(32));
    let eps = 3e-3;
    let [a, b, c] = [eps, 2.0 * eps, 4.0 * eps].map(|e| ws.assemble(3, e, 5.0).unwrap().matrix);
    let m = a.nrows() - 1;
    let d1 = (&a - &b).view((0, 0), (m, m)).into_owned();
    let d2 = (&b - &c).view((0, 0), (m, m)).into_owned();
    let scale = d1.amax();
    assert!((&d1 - d2 * 2.0).amax() < 1e-9 * scale);
    assert_eq!(a.column(m), b.column(m));
    assert_eq!(a.row(m), b.row(m));
}

#[test]
fn nonpositive_epsilon_rejected() {
    let ws = ModalWorkspace::new(reference(24));
    assert!(matches!(ws.assemble(2, 0.0, 5.0), Err(Error::Domain { .. })));
}

#[test]
fn translation_mode_stays_at_zero() {
    let ws = ModalWorkspace::new(reference(48));
    for eps in [1e-4, 1e-3, 1e-2, 1e-1] {
        let rep = modal_eigenvalues(&ws.assemble(1, eps, 5.0).unwrap()).unwrap();
        assert!(rep.slow_branch.re.abs() < 1e-6, "eps {eps}: {:?}", rep.slow_branch);
        assert!(rep.fast_branch_max < 0.0);
    }
}

#[test]
fn slow_branch_is_linear_in_epsilon() {
    let ws = ModalWorkspace::new(reference(48));
    let gamma = 5.0;
    let eps = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
    for l in [0, 2, 3, 6] {
        let alpha = ws.multiplier(l, gamma).unwrap();
        let slow: Vec<f64> = eps
            .iter()
            .map(|&e| {
                modal_eigenvalues(&ws.assemble(l, e, gamma).unwrap())
                    .unwrap()
                    .slow_branch
                    .re
            })
            .collect();
        let (icpt, slope, r2) = linear_fit(&eps, &slow);
        assert!(r2 >= 0.999, "l = {l}: R^2 = {r2}");
        assert!(
            (icpt - alpha).abs() < 1e-6 * alpha.abs().max(1.0),
            "l = {l}: {icpt} vs {alpha}"
        );
        for (e, s) in eps.iter().zip(&slow) {
            assert!((s - alpha).abs() <= 2.0 * slope.abs() * e + 1e-9);
        }
    }
}

#[test]
fn fast_branch_tracks_scaled_dirichlet_spectrum() {
    let ws = ModalWorkspace::new(reference(32));
    for eps in [1e-4, 1e-3] {
        let op = ws.assemble(2, eps, 5.0).unwrap();
        let rep = modal_eigenvalues(&op).unwrap();
        let block: DMatrix<f64> = op.mode.l_block.clone() / eps;
        let mut direct: Vec<f64> = block.complex_eigenvalues().iter().map(|z| z.re).collect();
        direct.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut fast: Vec<f64> = rep
            .eigenvalues
            .iter()
            .filter(|z| (z.re - rep.slow_branch.re).abs() > 1e-9 * z.re.abs().max(1.0))
            .map(|z| {
                assert!(z.is_real() && z.re < 0.0);
                z.re
            })
            .collect();
        fast.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(fast.len(), direct.len());
        // the rank-one coupling shifts each eigenvalue by O(1), i.e. relative O(eps)
        for (a, b) in fast.iter().zip(&direct).take(10) {
            assert!(((a - b) / b).abs() < 0.1 * eps, "eps {eps}: {a} vs {b}");
        }
    }
}

#[test]
fn slow_eigenvector_is_boundary_dominated() {
    let ws = ModalWorkspace::new(reference(48));
    let eps = [1e-4, 1e-3, 1e-2];
    let ratios: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let rep = modal_eigenvalues(&ws.assemble(2, e, 5.0).unwrap()).unwrap();
            let (phi, c) = slow_eigenvector(&rep);
            assert_eq!(c, 1.0);
            let r = phi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            assert!((r - rep.slow_eigvec_ratio).abs() < 1e-12 * r.max(1e-300));
            r / e
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn slow_branch_grid_robust() {
    let a = ModalWorkspace::new(reference(32));
    let b = ModalWorkspace::new(reference(64));
    for l in [0, 2, 4] {
        let sa = modal_eigenvalues(&a.assemble(l, 1e-2, 5.0).unwrap())
            .unwrap()
            .slow_branch
            .re;
        let sb = modal_eigenvalues(&b.assemble(l, 1e-2, 5.0).unwrap())
            .unwrap()
            .slow_branch
            .re;
        assert!((sa - sb).abs() < 1e-6, "l = {l}: {sa} vs {sb}");
    }
}

#[test]
fn threshold_properties() {
    let ws = ModalWorkspace::new(reference(32));
    let l_max = 8;
    let sum = spectral_summary(ws.state(), 1.0, l_max).unwrap();
    let policy = ThresholdPolicy::default();
    for factor in [1.2, 2.0] {
        let gamma = factor * sum.gamma_star;
        let th = epsilon_threshold(&ws, gamma, l_max, &policy).unwrap();
        let eps0 = th.epsilon0.expect("positive threshold");
        assert!(eps0 > 0.0);
        assert!((th.bound - 0.5 * th.alpha_star).abs() < 1e-15);
        let at = |e: f64| spectral_abscissa(&ws, gamma, e, l_max, f64::INFINITY).unwrap();
        assert!(at(eps0) <= th.bound);
        assert!(at(0.5 * eps0) <= th.bound);
        if let Some(fail) = th.first_failure {
            assert!(at(fail) > th.bound);
        }
    }
    let below = epsilon_threshold(&ws, 0.9 * sum.gamma_star, l_max, &policy);
    assert!(matches!(below, Err(Error::BelowThreshold { .. })));
}

#[test]
fn unstable_below_gamma_star() {
    let ws = ModalWorkspace::new(reference(32));
    let sum = spectral_summary(ws.state(), 1.0, 16).unwrap();
    let gamma = 0.9 * sum.gamma_star;
    let rep = modal_eigenvalues(&ws.assemble(sum.l_star, 1e-3, gamma).unwrap()).unwrap();
    assert!(rep.slow_branch.re > 0.0);
    assert!(rep.max_nonzero_re() > 0.0);
}
