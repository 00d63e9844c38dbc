use driftlab::kernels::Kernel;
use driftlab::lyapunov::{choose_exit_exponent, expected_increment, nu_bound, verify_region, Functional, Region, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

fn qi(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact `E[f(x + D, t + 1)] - f(x, t)` over the kernel's step law, straight
/// from the definitions of `t / x^2` and `x^2 / t`. Also returns the exact
/// `sum p |increment|`.
fn rational_drift(kernel: &Kernel, transience: bool, x: u64, t: u64) -> (BigRational, f64) {
    let f = |x: &BigRational, t: &BigRational| {
        if transience {
            t / (x * x)
        } else {
            x * x / t
        }
    };
    let (xq, tq) = (qi(x), qi(t));
    let t1 = &tq + BigRational::one();
    let now = f(&xq, &tq);
    let mut sum = BigRational::zero();
    let mut scale = BigRational::zero();
    for (d, p) in kernel.step_law(x as f64, t).unwrap().outcomes {
        let inc = f(&(&xq + q(d)), &t1) - &now;
        scale += q(p) * inc.abs();
        sum += q(p) * inc;
    }
    (sum, scale.to_f64().unwrap())
}

/// Forward error bound of a floating-point dot product: `rel` of the exact
/// value plus a few ulps of the absolute-value sum.
fn within(got: f64, want: f64, scale: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs() + 4.0 * f64::EPSILON * scale
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn rational_functionals_match_exact_arithmetic(
        rho in 0.01f64..1.0, x in 2u64..100_000, t in 1u64..100_000_000, transience in any::<bool>(),
    ) {
        prop_assume!(rho * x as f64 <= t as f64);
        let k = Kernel::lattice(rho, 1.0, 1.0, 1.0).unwrap();
        let f = if transience { Functional::TransienceY } else { Functional::RecurrenceY };
        let got = expected_increment(&f, &k, x as f64, t).unwrap();
        let (want, scale) = rational_drift(&k, transience, x, t);
        let want = want.to_f64().unwrap();
        prop_assert!(within(got, want, scale, 1e-14), "{got} vs {want}");
    }

    #[test]
    fn root_functionals_match_conjugate_forms(rho in 0.01f64..1.0, x in 2u64..1_000_000, t in 1u64..100_000_000) {
        prop_assume!(rho * x as f64 <= t as f64);
        let k = Kernel::lattice(rho, 1.0, 1.0, 1.0).unwrap();
        let law = k.step_law(x as f64, t).unwrap();
        let (xf, tf) = (x as f64, t as f64);
        // sqrt(x + d) - sqrt(x) = d / (sqrt(x + d) + sqrt(x)).
        let w: Vec<f64> = law.outcomes.iter().map(|&(d, p)| p * d / ((xf + d).sqrt() + xf.sqrt())).collect();
        let w_want = two_sum(&w);
        let w_scale: f64 = w.iter().map(|v| v.abs()).sum();
        let got = expected_increment(&Functional::FractionalW { nu: 0.5 }, &k, xf, t).unwrap();
        prop_assert!(within(got, w_want, w_scale, 1e-14), "{got} vs {w_want}");
        // (x + d) / sqrt(t + 1) - x / sqrt(t), split so the x terms cancel exactly.
        let (s0, s1) = (tf.sqrt(), (tf + 1.0).sqrt());
        let shrink = -xf / (s0 * s1 * (s0 + s1));
        let terms: Vec<f64> = law.outcomes.iter().flat_map(|&(d, p)| [p * d / s1, p * shrink]).collect();
        let z_want = two_sum(&terms);
        let z_scale: f64 = terms.iter().map(|v| v.abs()).sum();
        let got = expected_increment(&Functional::ScaledX { zeta: 0.5 }, &k, xf, t).unwrap();
        prop_assert!(within(got, z_want, z_scale, 1e-14), "{got} vs {z_want}");
    }

    #[test]
    fn exit_power_matches_binomial_expansion(k in 1u32..12, n in 10u64..1000, frac in 0.0f64..1.0) {
        let kern = Kernel::const_drift(0.25, n, 2.0).unwrap();
        let x = 2 + ((n - 2) as f64 * frac) as u64;
        let f = Functional::ExitPower { k, n: n as f64 };
        let z = qi(2 * n - x);
        let law = kern.step_law(x as f64, 10).unwrap();
        let mut want = BigRational::zero();
        let mut scale = BigRational::zero();
        for &(d, p) in &law.outcomes {
            let inc = pow(&(&z - q(d)), k) - pow(&z, k);
            scale += q(p) * inc.abs();
            want += q(p) * inc;
        }
        let (want, scale) = (want.to_f64().unwrap(), scale.to_f64().unwrap());
        let got = expected_increment(&f, &kern, x as f64, 10).unwrap();
        prop_assert!(within(got, want, scale, 1e-14), "{got} vs {want}");
    }
}

fn pow(base: &BigRational, k: u32) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * base)
}

/// Error-free transformation sum (Neumaier).
fn two_sum(values: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

#[test]
fn recurrence_drift_example() {
    let k = Kernel::lattice(0.3, 1.0, 1.0, 1.0).unwrap();
    let got = expected_increment(&Functional::RecurrenceY, &k, 20.0, 100).unwrap();
    // (t + 1) E = 1 + 2 rho x^2 / t - x^2 / t = 1 + 2.4 - 4.
    let (want, _) = rational_drift(&k, false, 20, 100);
    assert!(close(want.to_f64().unwrap(), -0.6 / 101.0, 1e-14));
    assert!(close(got, -0.6 / 101.0, 1e-14), "{got}");
}

#[test]
fn transience_functional_grows_for_symmetric_walk() {
    let k = Kernel::new(driftlab::DriftSpec::symmetric(), 1.0, driftlab::Variant::LatticeNN).unwrap();
    assert!(expected_increment(&Functional::TransienceY, &k, 100.0, 1000).unwrap() > 0.0);
}

#[test]
fn fractional_expansion_consistency() {
    let nu = 0.5;
    let k = Kernel::lattice(0.3, 1.0, 1.0, 1.0).unwrap();
    let f = Functional::FractionalW { nu };
    for x in (100..=10_000).step_by(37) {
        for t in [x, 3 * x, 10 * x, x * x] {
            let xf = x as f64;
            let (m1, m2) = k.moments(xf, t).unwrap();
            let p = 1.0 - nu;
            let approx = p * xf.powf(p) * (m1 / xf - nu / 2.0 * m2 / (xf * xf));
            let exact = expected_increment(&f, &k, xf, t).unwrap();
            assert!((exact - approx).abs() <= 10.0 * xf.powi(-3) * xf.powf(p), "x={x} t={t}");
        }
    }
}

#[test]
fn exit_power_is_submartingale_below_level() {
    let (c, n) = (0.25, 200u64);
    let k_exp = choose_exit_exponent(c, 1.0).unwrap();
    assert_eq!(k_exp, 6);
    assert!(n as f64 > 2.0 * k_exp as f64);
    let kern = Kernel::const_drift(c, n, 2.0).unwrap();
    let region = Region::rect(2, n, 1, 1);
    let r = verify_region(
        &Functional::ExitPower { k: k_exp, n: n as f64 },
        &kern,
        &region,
        Sign::NonNegative,
        1,
    )
    .unwrap();
    assert!(r.passed(), "{:?}", r.violations);
    assert_eq!(r.points_checked, n - 1);
}

#[test]
fn scaled_x_is_supermartingale() {
    let k = Kernel::lattice(0.5, 1.5, 1.5, 1.0).unwrap();
    let region = Region {
        x_min: 1,
        x_max: 50_000,
        x_stride: 7,
        t_min: 1000,
        t_max: 1_000_000,
        t_stride: 997,
        ratio_min: None,
        ratio_max: None,
        t_per_x_min: Some(2.0),
        clamp_free: false,
    };
    let r = verify_region(&Functional::ScaledX { zeta: 0.75 }, &k, &region, Sign::NonPositive, 0).unwrap();
    assert!(r.passed(), "{} violations, max {}", r.violations.len(), r.max_drift);
    assert!(r.points_checked > 1_000_000);
}

#[test]
fn nu_bound_monotone() {
    let gammas: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    for k in 1..=20 {
        for w in gammas.windows(2) {
            assert!(nu_bound(w[0], k).unwrap() > nu_bound(w[1], k).unwrap());
        }
    }
    for &g in &gammas {
        for k in 2..20 {
            assert!(nu_bound(g, k).unwrap() > nu_bound(g, k + 1).unwrap(), "g={g} k={k}");
        }
    }
}

#[test]
fn region_reports_list_exact_violations() {
    let k = Kernel::lattice(0.3, 1.0, 1.0, 1.0).unwrap();
    let region = Region {
        ratio_max: Some(2.4),
        clamp_free: true,
        ..Region::rect(3, 60, 1, 5000)
    };
    let r = verify_region(&Functional::RecurrenceY, &k, &region, Sign::NonPositive, 2).unwrap();
    let mut positive = Vec::new();
    for x in 3u64..=60 {
        for t in 1u64..=5000 {
            let admissible = (x * x) as f64 / t as f64 <= 2.4 && 0.3 * x as f64 <= t as f64;
            if admissible && rational_drift(&k, false, x, t).0.is_positive() {
                positive.push((x, t));
            }
        }
    }
    let flagged: Vec<(u64, u64)> = r.violations.iter().map(|v| (v.x as u64, v.t)).collect();
    assert!(!flagged.is_empty());
    assert_eq!(flagged, positive);
    assert!(r.max_drift > 0.0);
}

#[test]
fn empty_region_is_an_error() {
    let k = Kernel::lattice(0.3, 1.0, 1.0, 1.0).unwrap();
    let region = Region {
        ratio_min: Some(1e9),
        ..Region::rect(3, 10, 1, 10)
    };
    assert!(verify_region(&Functional::RecurrenceY, &k, &region, Sign::NonPositive, 1).is_err());
    let below = Region::rect(0, 10, 1, 10);
    assert!(verify_region(&Functional::RecurrenceY, &k, &below, Sign::NonPositive, 1).is_err());
}
