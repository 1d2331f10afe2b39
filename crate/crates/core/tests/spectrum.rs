use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumor_spectra_core::spectrum::unit_kernel;
use tumor_spectra_core::{
    alpha0, alpha_l_of_gamma, alpha_slope, gamma_l, gamma_prefactor, make_rate_function, solve_fl, spectral_summary,
    unit_ball_state, Error, RateFunction, RateSpec, StationaryOptions, UnitBallState,
};

// Linear f = sigma, g = sigma - 1/2: R_s = 4.733319399775180.
const R_S_HALF: f64 = 4.733_319_399_775_18;

fn lin(c: &[f64]) -> RateFunction {
    make_rate_function(RateSpec::linear(c)).unwrap()
}

fn state(lambda: f64, mu: f64, st: f64, n: usize) -> UnitBallState {
    let opts = StationaryOptions {
        n,
        ..Default::default()
    };
    unit_ball_state(&lin(&[lambda]), &lin(&[mu, st]), 1.0, &opts).unwrap()
}

// x^-l i_l(x) by its power series.
fn bessel_i_scaled(l: usize, x: f64) -> f64 {
    let mut dfact = 1.0;
    for k in 0..=l {
        dfact *= (2 * k + 1) as f64;
    }
    let (mut term, mut sum) = (1.0 / dfact, 0.0);
    let y = 0.5 * x * x;
    for m in 0..200 {
        sum += term;
        term *= y / ((m + 1) as f64 * (2 * l + 2 * m + 3) as f64);
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

// Kernel of Delta_l - k^2 normalized to 1 at r = 1.
fn kernel(l: usize, k: f64, r: f64) -> f64 {
    r.powi(l as i32) * bessel_i_scaled(l, k * r) / bessel_i_scaled(l, k)
}

fn trapezoid(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|i| f(i as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(1.0)) + inner)
}

// Boundary integrand on the unit ball for f = sigma, g = mu(sigma - st) at radius k.
fn oracle_integral(l: usize, k: f64, mu: f64, power: i32, n: usize) -> f64 {
    let s1 = k / k.tanh() - 1.0;
    let gp = mu * k * k;
    trapezoid(n, |r| -gp * s1 * kernel(l, k, r) * r.powi(power))
}

#[test]
fn prefactor_and_slope_arithmetic() {
    assert!((gamma_prefactor(2) - 2.1).abs() < 1e-15);
    assert!((alpha_slope(2) + 10.0 / 19.0).abs() < 1e-15);
    for l in 2..40 {
        assert_eq!(alpha_l_of_gamma(l, 1.3, 1.3), 0.0);
        assert!(alpha_l_of_gamma(l, 1.4, 1.3) < 0.0);
        assert!(alpha_l_of_gamma(l, 1.2, 1.3) > 0.0);
    }
}

#[test]
fn bessel_oracle_matches_closed_forms() {
    let x: f64 = 1.7;
    assert!((bessel_i_scaled(0, x) - x.sinh() / x).abs() < 1e-15);
    let i1 = (x * x.cosh() - x.sinh()) / (x * x);
    assert!((bessel_i_scaled(1, x) * x - i1).abs() < 1e-15);
}

#[test]
fn radial_kernel_is_sinh_profile_at_degree_zero() {
    let s = state(1.0, 1.0, 0.5, 64);
    let k = s.f.derivative(0.5).sqrt();
    assert!((k - R_S_HALF).abs() < 1e-8);
    let f0 = solve_fl(0, &s).unwrap();
    for (r, v) in s.grid.nodes().iter().zip(&f0) {
        let exact = -s.sigma_prime_1 * (k * r).sinh() / (r * k.sinh());
        assert!((v - exact).abs() < 1e-11, "r = {r}");
    }
}

#[test]
fn boundary_value_and_regularity() {
    let s = state(1.0, 1.0, 0.5, 64);
    let n = s.grid.len();
    for l in [0, 1, 2, 5, 10, 30] {
        let fl = solve_fl(l, &s).unwrap();
        assert_eq!(fl[n - 1] + s.sigma_prime_1, 0.0, "l = {l}");
    }
    // F_l / r^l stays finite and nonzero down to the first nodes where r^l is resolved
    let k = s.f.derivative(0.5).sqrt();
    for l in [2, 5, 10] {
        let fl = solve_fl(l, &s).unwrap();
        let limit = -s.sigma_prime_1 * bessel_i_scaled(l, 0.0) / bessel_i_scaled(l, k);
        let mut checked = 0;
        for (r, v) in s.grid.nodes().iter().zip(&fl) {
            if r.powi(l as i32) < 1e-6 || *r > 0.5 {
                continue;
            }
            let q = v / r.powi(l as i32);
            let exact = -s.sigma_prime_1 * bessel_i_scaled(l, k * r) / bessel_i_scaled(l, k);
            assert!(((q - exact) / exact).abs() < 1e-6, "l = {l}, r = {r}: {q} vs {exact}");
            assert!((q / limit - 1.0).abs() < (k * r).powi(2) / (2 * l + 3) as f64);
            checked += 1;
        }
        assert!(checked > 0);
        assert!(limit != 0.0 && limit.is_finite());
    }
}

#[test]
fn kernels_match_bessel_oracle() {
    let s = state(1.0, 1.0, 0.5, 64);
    let k = s.f.derivative(0.5).sqrt();
    for l in [1, 2, 3, 8, 20] {
        let u = unit_kernel(l, &s).unwrap();
        for (r, v) in s.grid.nodes().iter().zip(&u) {
            assert!((v - kernel(l, k, *r)).abs() < 1e-10, "l = {l}, r = {r}");
        }
    }
}

#[test]
fn alpha0_matches_trapezoid_oracle() {
    let s = state(1.0, 1.0, 0.5, 64);
    let k = s.f.derivative(0.5).sqrt();
    let oracle = k * k * 0.5 + oracle_integral(0, k, 1.0, 2, 1_000_000);
    let got = alpha0(&s, &solve_fl(0, &s).unwrap());
    assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    assert!(got < 0.0);
}

#[test]
fn gamma_l_matches_trapezoid_oracle() {
    let s = state(1.0, 1.0, 0.5, 64);
    let k = s.f.derivative(0.5).sqrt();
    for l in [2, 3, 8] {
        let oracle = gamma_prefactor(l) * (k * k * 0.5 + oracle_integral(l, k, 1.0, l as i32 + 2, 200_000));
        let got = gamma_l(l, &s, &solve_fl(l, &s).unwrap()).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-8, "l = {l}: {got} vs {oracle}");
    }
}

#[test]
fn low_degrees_are_domain_errors() {
    let s = state(1.0, 1.0, 0.5, 32);
    let f1 = solve_fl(1, &s).unwrap();
    assert!(matches!(gamma_l(1, &s, &f1), Err(Error::Domain { .. })));
    assert!(matches!(gamma_l(0, &s, &f1), Err(Error::Domain { .. })));
}

#[test]
fn alpha0_linear_in_growth_scale() {
    let a = state(1.0, 1.0, 0.5, 48);
    let b = state(1.0, 3.0, 0.5, 48);
    let qa = alpha0(&a, &solve_fl(0, &a).unwrap());
    let qb = alpha0(&b, &solve_fl(0, &b).unwrap());
    assert!((qb - 3.0 * qa).abs() < 1e-9 * qa.abs());
}

#[test]
fn alpha0_negative_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (lambda, mu, st) = (
            rng.random_range(0.5..3.0),
            rng.random_range(0.2..3.0),
            rng.random_range(0.2..0.9),
        );
        let s = state(lambda, mu, st, 32);
        let a = alpha0(&s, &solve_fl(0, &s).unwrap());
        assert!(a < 0.0, "lambda {lambda}, mu {mu}, st {st}: alpha0 = {a}");
    }
}

#[test]
fn kernel_magnitude_decreases_with_degree() {
    let s = state(1.0, 1.0, 0.5, 64);
    let profiles: Vec<Vec<f64>> = [2, 4, 8, 16].iter().map(|&l| solve_fl(l, &s).unwrap()).collect();
    let n = s.grid.len();
    for i in 0..n - 1 {
        for w in profiles.windows(2) {
            assert!(w[1][i].abs() < w[0][i].abs(), "node {i}");
        }
    }
}

#[test]
fn summary_structure() {
    let s = state(1.0, 1.0, 0.5, 64);
    let sum = spectral_summary(&s, 5.0, 64).unwrap();
    assert_eq!(sum.multiplier(1), Some(0.0));
    assert_eq!(sum.multiplier(0), Some(sum.alpha0));
    assert!(sum.degrees.iter().all(|d| d.gamma_l > 0.0));
    let max = sum.degrees.iter().map(|d| d.gamma_l).fold(0.0, f64::max);
    assert_eq!(sum.gamma_star, max);
    assert_eq!(sum.gamma_l(sum.l_star), Some(max));
    let above = sum.at_gamma(1.01 * sum.gamma_star);
    assert!(above.alpha_star < 0.0);
    let below = sum.at_gamma(0.9 * sum.gamma_star);
    assert!(below.multiplier(sum.l_star).unwrap() > 0.0);
    assert!(matches!(spectral_summary(&s, 5.0, 1), Err(Error::Config(_))));
}

#[test]
fn tail_ratio_at_degree_64() {
    let s = state(1.0, 1.0, 0.9, 64);
    let sum = spectral_summary(&s, 1.0, 64).unwrap();
    let g64 = sum.gamma_l(64).unwrap();
    assert!(g64 < 0.05 * sum.gamma_star, "{g64} vs {}", sum.gamma_star);
}

#[test]
fn star_degree_stable_under_doubling() {
    let s = state(1.0, 1.0, 0.5, 64);
    let a = spectral_summary(&s, 1.0, 32).unwrap();
    let b = spectral_summary(&s, 1.0, 64).unwrap();
    assert_eq!(a.l_star, b.l_star);
    assert_eq!(a.gamma_star, b.gamma_star);
}
