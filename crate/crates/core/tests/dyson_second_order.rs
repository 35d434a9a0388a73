use dtscatter_core::dyson::{second_order_amplitude, TimeSumOptions};
use dtscatter_core::spectral::Band;
use dtscatter_core::thirring::{channel, xy_factors, ThirringParams};
use std::time::Instant;

#[test]
fn retarded_sum_reproduces_gamma_eigenvalue() {
    let pr = ThirringParams::new(0.8, 0.3).unwrap();
    let ch = channel(&pr, 0.3, 0.7, Band::Plus, Band::Plus).unwrap();
    let t0 = Instant::now();
    let r = second_order_amplitude(&pr, &ch, &ch, &TimeSumOptions::default()).unwrap();
    let f = xy_factors(&pr, 0.3, 0.7).unwrap();
    let h = f.first_order();
    let want = h * (0.5 + f.gamma_eigenvalue());
    eprintln!("steps {} err {:.2e} in {:?}", r.steps, r.error_estimate, t0.elapsed());
    eprintln!("coef {} want {}", r.coefficient, want);
    assert!((r.coefficient.re - want).abs() < 1e-8);
    assert!(r.coefficient.im.abs() < 1e-8);
}

#[test]
fn lambda_series_reconciles_with_dyson_orders() {
    use dtscatter_core::dyson::{first_order_amplitude, lambda_chi_reconcile};
    use dtscatter_core::thirring::born_series_thirring;
    use dtscatter_core::C64;
    for &(nu, chi, p, k) in &[(0.8, 0.3, 0.3, 0.7), (0.6, -0.7, 1.1, 0.4)] {
        let pr = ThirringParams::new(nu, chi).unwrap();
        let ch = channel(&pr, p, k, Band::Plus, Band::Plus).unwrap();
        let born = born_series_thirring(&pr, p, k, 2).unwrap();
        let a = [
            C64::new(0.0, 0.0),
            born.terms[0] / pr.lambda,
            born.terms[1] / (pr.lambda * pr.lambda),
        ];
        let c = lambda_chi_reconcile(&a, 2);
        let d1 = first_order_amplitude(&pr, &ch, &ch).unwrap() / chi;
        let d2 = second_order_amplitude(&pr, &ch, &ch, &TimeSumOptions::default()).unwrap().value / (chi * chi);
        assert!((c[1] - d1).norm() < 1e-8, "{} vs {}", c[1], d1);
        assert!((c[2] - d2).norm() < 1e-8, "{} vs {}", c[2], d2);
    }
}

#[test]
fn doubling_the_time_window_is_stable() {
    use dtscatter_core::dyson::{damped_time_sum, pair_propagator_series, steps_for};
    use dtscatter_core::thirring::w_vector;
    let pr = ThirringParams::new(0.7, 0.5).unwrap();
    let ch = channel(&pr, 0.9, 0.5, Band::Plus, Band::Plus).unwrap();
    let d = &pr.dispersion;
    let w = w_vector(d, ch.p, ch.k, ch.s1, ch.s2);
    let eps = [0.01];
    let steps = steps_for(eps[0], w.norm_squared(), 1e-12);
    let long = pair_propagator_series(d, ch.p, &w, &w, 2 * steps);
    let a = damped_time_sum(&long[..steps], ch.omega, &eps);
    let b = damped_time_sum(&long, ch.omega, &eps);
    // a single eps is passed straight through
    let (a, b) = (a.unwrap().0, b.unwrap().0);
    assert!((a - b).norm() < 1e-10);
}
