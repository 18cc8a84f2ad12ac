use cvkit::estimate::{
    build_sample, generate_panel, ols_fit, read_panel_csv, recover_phi, write_panel_csv, Mode, RegressionSample,
};
use cvkit::numeric::halton_point;
use cvkit::utility::{PriceIncome, PublicBundle, UtilitySpec, DEFAULT_LOG_OFFSET};
use cvkit::Error;

fn ssr(x: &[f64], y: &[f64], b0: f64, b1: f64) -> f64 {
    x.iter().zip(y).map(|(x, y)| (y - b0 - b1 * x).powi(2)).sum()
}

/// Minimizes the sum of squared residuals by repeatedly refining a grid
/// around the best cell. Knows nothing about normal equations.
fn grid_refinement(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mut c0, mut c1, mut half) = (0.0, 0.0, 16.0);
    for _ in 0..60 {
        let mut best = (f64::INFINITY, c0, c1);
        for i in -10..=10 {
            for j in -10..=10 {
                let b0 = c0 + half * i as f64 / 10.0;
                let b1 = c1 + half * j as f64 / 10.0;
                let s = ssr(x, y, b0, b1);
                if s < best.0 {
                    best = (s, b0, b1);
                }
            }
        }
        c0 = best.1;
        c1 = best.2;
        half *= 0.5;
    }
    (c0, c1)
}

#[test]
fn ols_agrees_with_grid_refinement() {
    for k in 0..10u64 {
        let n = 3 + 3 * k as usize;
        let h = halton_point(k, 2, -3.0, 3.0);
        let (a, b) = (h[0], h[1]);
        let x: Vec<f64> = (0..n).map(|i| halton_point(i as u64 + 50 * k, 1, -2.0, 2.0)[0]).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, x)| a + b * x + 0.3 * ((i as f64) * 1.7 + k as f64).sin()).collect();
        let fit = ols_fit(&RegressionSample::new(y.clone(), x.clone(), Mode::Income).unwrap()).unwrap();
        let (g0, g1) = grid_refinement(&x, &y);
        assert!((fit.beta0 - g0).abs() < 1e-6, "sample {k}: {} vs {g0}", fit.beta0);
        assert!((fit.beta1 - g1).abs() < 1e-6, "sample {k}: {} vs {g1}", fit.beta1);
        assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-10);
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}

#[test]
fn shifting_y_moves_only_the_intercept() {
    let x = vec![0.1, 0.7, 1.3, 2.2, 3.0];
    let y = vec![1.0, 0.4, 0.9, -0.3, 0.2];
    let a = ols_fit(&RegressionSample::new(y.clone(), x.clone(), Mode::Income).unwrap()).unwrap();
    let b = ols_fit(&RegressionSample::new(y.iter().map(|v| v + 5.0).collect(), x, Mode::Income).unwrap()).unwrap();
    assert!((a.beta1 - b.beta1).abs() < 1e-12);
    assert!((b.beta0 - a.beta0 - 5.0).abs() < 1e-12);
    assert!((a.stderr_beta1 - b.stderr_beta1).abs() < 1e-12);
}

fn base() -> (PriceIncome, PublicBundle) {
    (PriceIncome::new(vec![1.0, 1.0], 4.0).unwrap(), PublicBundle::from_z1(vec![1.0, 1.0]).unwrap())
}

#[test]
fn separable_panel_does_not_fit_a_power_law() {
    let (pi, z) = base();
    let spec = UtilitySpec::additive_separable(2.0, 2.0).unwrap();
    let r = recover_phi(&spec, &pi, &z, &[0.25, 0.5, 1.0, 1.5, 2.0, 2.5], 0.0, 0, Mode::Income).unwrap();
    assert!(!r.agreement);
    assert!(r.phi_declared.is_none());
    // A homothetic panel fits to solver precision; this one leaves visible curvature.
    assert!(r.estimation.max_abs_residual() > 1e-2, "{:?}", r.estimation.residuals);
    assert!(r.estimation.r_squared < 1.0 - 1e-4);
}

#[test]
fn separable_panel_with_free_target_is_rejected() {
    // At t = 4 the public goods alone exceed the baseline utility, so the
    // compensated income is zero and its logarithm is undefined.
    let (pi, z) = base();
    let spec = UtilitySpec::additive_separable(2.0, 2.0).unwrap();
    let panel = generate_panel(&spec, &pi, &z, &[0.5, 2.0, 4.0], 0.0, 0);
    assert!(matches!(panel, Err(Error::Domain(_))), "{panel:?}");
}

#[test]
fn estimation_is_bit_reproducible() {
    let spec = UtilitySpec::log_transformed(0.7, DEFAULT_LOG_OFFSET).unwrap();
    let pi = PriceIncome::new(vec![1.5, 0.8], 20.0).unwrap();
    let z = PublicBundle::from_z1(vec![2.0, 0.5]).unwrap();
    let ts: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    let a = recover_phi(&spec, &pi, &z, &ts, 0.1, 11, Mode::Good(2)).unwrap();
    let b = recover_phi(&spec, &pi, &z, &ts, 0.1, 11, Mode::Good(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.estimation.beta1.to_bits(), b.estimation.beta1.to_bits());
}

#[test]
fn csv_round_trip_preserves_the_fit() {
    let spec = UtilitySpec::power_weighted(0.4).unwrap();
    let pi = PriceIncome::new(vec![1.0, 2.0, 0.5], 30.0).unwrap();
    let z = PublicBundle::from_z1(vec![1.0, 2.0, 3.0]).unwrap();
    let panel = generate_panel(&spec, &pi, &z, &[0.3, 0.9, 1.7, 2.6], 0.03, 5).unwrap();
    let mut buf = Vec::new();
    write_panel_csv(&panel, &mut buf, None).unwrap();
    let back = read_panel_csv(buf.as_slice()).unwrap();
    for mode in [Mode::Income, Mode::Good(3)] {
        let a = ols_fit(&build_sample(&panel, mode).unwrap()).unwrap();
        let b = ols_fit(&build_sample(&back, mode).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(read_panel_csv("t,m_before\n1,2\n".as_bytes()).is_err());
    let bad_value = "t,m_before,m_after,x_before_1,x_after_1,noise\n2,1,-0.5,1,1,0\n";
    assert!(matches!(read_panel_csv(bad_value.as_bytes()), Err(Error::Domain(_))));
    let not_number = "t,m_before,m_after,x_before_1,x_after_1,noise\n2,1,abc,1,1,0\n";
    assert!(read_panel_csv(not_number.as_bytes()).is_err());
}
