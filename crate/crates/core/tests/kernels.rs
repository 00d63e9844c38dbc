use driftlab::engine::Walker;
use driftlab::kernels::{DriftSpec, Kernel, Variant};
use proptest::prelude::*;

fn admissible() -> impl Strategy<Value = DriftSpec> {
    (0.0f64..=2.0, 0.0f64..2.0, 0.01f64..1.0).prop_map(|(beta, gap, rho)| {
        let alpha = (beta - gap).max(-3.0);
        let rho = if alpha == beta { rho.min(1.0) } else { rho };
        DriftSpec::new(rho, alpha, beta).unwrap()
    })
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::LatticeNN),
        Just(Variant::LazyLattice),
        (0.01f64..2.0, 10u64..500).prop_map(|(c, n)| Variant::ConstDriftTest { c, n }),
    ]
}

fn kernel() -> impl Strategy<Value = Kernel> {
    (admissible(), variant(), 1.0f64..4.0).prop_map(|(spec, variant, a)| Kernel::new(spec, a, variant).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn laws_are_normalised_with_bounded_jumps(k in kernel(), x in 0u64..100_000, t in 1u64..10_000_000) {
        let law = k.step_law(x as f64, t).unwrap();
        let b = k.hypothesis_bounds();
        prop_assert!((law.total_probability() - 1.0).abs() <= 1e-12);
        prop_assert!(law.outcomes.iter().all(|&(d, p)| d.abs() <= b.b1 && p >= 0.0));
        prop_assert!(b.b2 <= b.b1 * b.b1);
        prop_assert!(b.exit_bound_mean.is_finite());
    }

    #[test]
    fn second_moment_floor_above_threshold(k in kernel(), dx in 0u64..100_000, t in 1u64..10_000_000) {
        let x = k.a.ceil() + dx as f64;
        let (_, m2) = k.moments(x, t).unwrap();
        prop_assert!(m2 >= k.hypothesis_bounds().b2 - 1e-15);
    }

    #[test]
    fn lattice_drift_is_exact_when_unclamped(spec in admissible(), dx in 0u64..100_000, t in 1u64..10_000_000) {
        let k = Kernel::new(spec, 1.0, Variant::LatticeNN).unwrap();
        let x = 1.0 + dx as f64;
        let target = spec.rho * x.powf(spec.alpha) / (t as f64).powf(spec.beta);
        prop_assume!(target <= 1.0);
        let (mean, m2) = k.moments(x, t).unwrap();
        prop_assert!((mean - target).abs() <= 1e-12, "{mean} vs {target}");
        prop_assert_eq!(m2, 1.0);
    }
}

/// Every path from a lattice point `x < a` is in `[a, inf)` after
/// `ceil(a - x)` steps, and in `(a, inf)` when `a` is not an integer.
#[test]
fn reflection_by_exhaustive_enumeration() {
    for a in [1.0, 1.5, 2.0, 2.25, 3.0, 3.7, 4.0] {
        for variant in [Variant::LatticeNN, Variant::LazyLattice] {
            let k = Kernel::new(DriftSpec::new(0.3, 1.0, 1.0).unwrap(), a, variant).unwrap();
            let mut x0 = 0.0;
            while x0 < a {
                // All paths of length ceil(a - x0) from x0, with their laws.
                let steps = (a - x0).ceil() as usize;
                let mut frontier = vec![(x0, 1.0f64)];
                for s in 0..steps {
                    let mut next = Vec::new();
                    for &(x, p) in &frontier {
                        for (d, q) in k.step_law(x, 1 + s as u64).unwrap().outcomes {
                            next.push((x + d, p * q));
                        }
                    }
                    frontier = next;
                }
                let mass: f64 = frontier.iter().filter(|&&(x, _)| x >= a).map(|&(_, p)| p).sum();
                assert_eq!(mass, 1.0, "a={a} x0={x0} {variant:?}");
                if a.fract() != 0.0 {
                    assert!(frontier.iter().all(|&(x, _)| x > a));
                }
                x0 += 1.0;
            }
        }
    }
}

/// Mean exit time of `[0, a]` from 0 against the certified bound.
#[test]
fn exit_time_of_low_band_within_bound() {
    for (a, variant) in [
        (2.0, Variant::LatticeNN),
        (2.5, Variant::LatticeNN),
        (3.0, Variant::LazyLattice),
    ] {
        let k = Kernel::new(DriftSpec::symmetric(), a, variant).unwrap();
        let bound = k.hypothesis_bounds().exit_bound_mean;
        let reps = 20_000u64;
        let (mut total, mut total2) = (0u64, 0u64);
        for seed in 0..reps {
            let mut w = Walker::new(&k, 0.0, 1, seed, 1_000_000).unwrap();
            let mut n = 0u64;
            while w.x <= a {
                w.step();
                n += 1;
            }
            total += n;
            total2 += n * n;
        }
        let mean = total as f64 / reps as f64;
        let se = ((total2 as f64 / reps as f64 - mean * mean) / reps as f64).sqrt();
        // The symmetric walk attains the bound exactly for integer a.
        assert!(mean <= bound + 4.0 * se, "a={a}: mean {mean} > bound {bound}");
    }
}

/// Sampled jumps match the law: 10^5 draws per state, mean within 4/sqrt(10^5).
#[test]
fn sampled_drift_matches_law() {
    let k = Kernel::lattice(0.7, 1.0, 1.0, 1.0).unwrap();
    let lazy = Kernel::new(DriftSpec::new(0.5, 0.0, 0.5).unwrap(), 1.0, Variant::LazyLattice).unwrap();
    let n = 100_000u64;
    for (kern, x, t) in [(&k, 30.0, 100u64), (&k, 5.0, 1000), (&lazy, 10.0, 4)] {
        let (mean, _) = kern.moments(x, t).unwrap();
        let mut sum = 0.0;
        let mut stream = driftlab::rng::Stream::new(42, driftlab::rng::DOMAIN_PROBE);
        for _ in 0..n {
            sum += kern.sample_jump(x, t, stream.next_f64()).0;
        }
        let emp = sum / n as f64;
        assert!((emp - mean).abs() <= 4.0 / (n as f64).sqrt(), "{emp} vs {mean}");
    }
}

#[test]
fn build_examples() {
    let k = Kernel::lattice(1.0, 1.0, 1.0, 1.0).unwrap();
    let b = k.hypothesis_bounds();
    assert_eq!((b.b1, b.b2), (1.0, 1.0));
    let lazy = Kernel::new(DriftSpec::new(0.5, 0.0, 0.5).unwrap(), 1.0, Variant::LazyLattice).unwrap();
    assert_eq!(lazy.hypothesis_bounds().b2, 0.5);
    assert!(Kernel::lattice(1.0, 2.0, 1.0, 1.0).is_err());
    assert!(Kernel::lattice(0.5, 1.0, 1.0, 0.5).is_err());
    let c = Kernel::const_drift(0.25, 200, 2.0).unwrap();
    assert_eq!((c.hypothesis_bounds().b1, c.hypothesis_bounds().b2), (1.0, 1.0));
}
