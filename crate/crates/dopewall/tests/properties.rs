use dopewall::asymptotics::{tracy_widom_cdf, wall_cdf, LimitKernelSpec};
use dopewall::dpp::{count_distribution, sample_batch};
use dopewall::ensembles::{Ensemble, NodeSet, WeightSpec};
use dopewall::halfhex::{mcmc_tile, svg_string, tiles, HexSpec};
use dopewall::orthopoly::{cd_kernel, sym_kernel};
use proptest::prelude::*;

fn hahn_wall(n: usize, p: f64, k: usize) -> Ensemble {
    let s = NodeSet::equispaced(2 * n).unwrap();
    let w = WeightSpec::hahn(&s, p, p).unwrap();
    Ensemble::wall_symmetric(s, w, k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wall_kernels_are_rank_k_projections(n in 2usize..40, frac in 0.0f64..1.0, p in 1.0f64..30.0) {
        let k = ((n as f64) * frac) as usize;
        let km = sym_kernel(&hahn_wall(n, p, k)).unwrap();
        prop_assert!(km.projection_residual() < 1e-10);
        prop_assert!((km.trace() - k as f64).abs() < 1e-10);
        for v in km.diagonal() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn count_laws_are_distributions(n in 3usize..30, frac in 0.0f64..1.0, lo in 0usize..10, len in 1usize..10) {
        let s = NodeSet::equispaced(n).unwrap();
        let w = WeightSpec::hahn(&s, 3.0, 5.0).unwrap();
        let k = ((n as f64) * frac) as usize;
        let km = cd_kernel(&Ensemble::standard(s, w, k).unwrap(), k).unwrap();
        let lo = lo.min(n - 1);
        let window: Vec<usize> = (lo..(lo + len).min(n)).collect();
        let a = count_distribution(&km, &window).unwrap().probabilities;
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(a.iter().all(|v| *v > -1e-12));
        let mean: f64 = a.iter().enumerate().map(|(m, v)| m as f64 * v).sum();
        let expected: f64 = window.iter().map(|&i| km.get(i, i)).sum();
        prop_assert!((mean - expected).abs() < 1e-10);
    }

    #[test]
    fn samples_have_exactly_k_particles(n in 2usize..20, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = ((n as f64) * frac) as usize;
        let km = sym_kernel(&hahn_wall(n, 4.0, k)).unwrap();
        for c in sample_batch(&km, 5, seed).unwrap() {
            prop_assert_eq!(c.indices.len(), k);
            prop_assert!(c.indices.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn limit_kernels_are_symmetric_and_bounded(x in -30.0f64..30.0, y in -30.0f64..30.0) {
        for spec in [LimitKernelSpec::Sine, LimitKernelSpec::SineWall, LimitKernelSpec::Airy] {
            let a = spec.eval(x, y).unwrap();
            let b = spec.eval(y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        prop_assert!(LimitKernelSpec::Sine.eval(x, y).unwrap().abs() <= 2.0);
        prop_assert!(LimitKernelSpec::SineWall.eval(x, y).unwrap().abs() <= 2.0);
    }

    #[test]
    fn airy_diagonal_is_positive(x in -20.0f64..0.0) {
        prop_assert!(LimitKernelSpec::Airy.eval(x, x).unwrap() > 0.0);
    }

    #[test]
    fn discrete_wall_kernel_is_symmetric(i in 0usize..40, j in 0usize..40, theta in 0.05f64..1.0) {
        let spec = LimitKernelSpec::DiscreteSineWall { delta0: 1.0 / theta, rho0: 1.0 };
        let a = spec.eval(i as f64, j as f64).unwrap();
        prop_assert!((a - spec.eval(j as f64, i as f64).unwrap()).abs() < 1e-15);
        prop_assert!(a.abs() <= 2.0);
    }

    #[test]
    fn wall_survival_is_monotone(s in 0.0f64..8.0, ds in 0.0f64..3.0, theta in 0.1f64..0.95) {
        let f = |s: f64| wall_cdf(s, 1.0 / theta, 1.0).unwrap();
        prop_assert!(f(s + ds) <= f(s) + 1e-12);
        if s < 0.5 {
            prop_assert_eq!(f(s), 1.0);
        }
    }

    #[test]
    fn tracy_widom_is_a_cdf(s in -6.0f64..4.0, ds in 0.0f64..2.0) {
        let a = tracy_widom_cdf(s, 40).unwrap().value;
        let b = tracy_widom_cdf(s + ds, 40).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn chains_stay_valid_and_are_reproducible(k in 1usize..5, r in 1usize..6, sweeps in 0u64..30, seed in any::<u64>()) {
        let h = HexSpec::new(k, r).unwrap();
        let t = mcmc_tile(h, sweeps, seed);
        t.validate().unwrap();
        prop_assert_eq!(&t, &mcmc_tile(h, sweeps, seed));
        prop_assert_eq!(tiles(&t).len(), h.tile_count());
        for m in 0..=2 * r {
            prop_assert_eq!(t.crossings(m).len(), k);
        }
        prop_assert_eq!(svg_string(&t), svg_string(&mcmc_tile(h, sweeps, seed)));
    }
}

#[test]
fn tracy_widom_orders_converge_geometrically() {
    let diffs: Vec<f64> = [10usize, 20, 30]
        .iter()
        .map(|&o| (tracy_widom_cdf(-2.0, o).unwrap().value - tracy_widom_cdf(-2.0, o + 10).unwrap().value).abs())
        .collect();
    assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1].max(1e-15), "{diffs:?}");
}
