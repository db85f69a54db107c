use hdts_core::covinf::{cov_dim, cov_index, cov_pair};
use hdts_core::gboot::{order_quantile, psd_sqrt};
use hdts_core::longrun::{sigma_hat, sigma_tilde, BlockPlan};
use hdts_core::model::simulate;
use hdts_core::{Panel, ProcessSpec, RngContract};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn panel_strategy() -> impl Strategy<Value = (Array2<f64>, usize)> {
    (2usize..60, 1usize..6).prop_flat_map(|(n, p)| {
        (prop::collection::vec(-10.0f64..10.0, n * p), 1..=n)
            .prop_map(move |(v, m)| (Array2::from_shape_vec((n, p), v).unwrap(), m))
    })
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hat_tilde_identity((x, m) in panel_strategy()) {
        let n = x.nrows();
        let plan = BlockPlan::new(n, m).unwrap();
        let panel = Panel::from_data(x.clone()).unwrap();
        let hat = sigma_hat(&panel, &plan).unwrap().sigma;
        let tilde = sigma_tilde(&panel, &plan).unwrap();
        let used = plan.blocks * m;
        let xbar: Array1<f64> = x.slice(ndarray::s![..used, ..]).sum_axis(ndarray::Axis(0)) / used as f64;
        let outer = xbar.view().insert_axis(ndarray::Axis(1)).dot(&xbar.view().insert_axis(ndarray::Axis(0))) * m as f64;
        let diff = &hat - &tilde.sigma - outer;
        prop_assert!(max_abs(&diff) <= 1e-9 * (1.0 + max_abs(&hat)));
    }

    #[test]
    fn tilde_is_shift_invariant_and_quadratic_in_scale((x, m) in panel_strategy(), c in -5.0f64..5.0, s in 0.1f64..4.0) {
        let plan = BlockPlan::new(x.nrows(), m).unwrap();
        let base = sigma_tilde(&Panel::from_data(x.clone()).unwrap(), &plan).unwrap().sigma;
        let shifted = sigma_tilde(&Panel::from_data(&x + c).unwrap(), &plan).unwrap().sigma;
        let scaled = sigma_tilde(&Panel::from_data(&x * s).unwrap(), &plan).unwrap().sigma;
        let tol = 1e-9 * (1.0 + max_abs(&base)) * (1.0 + c.abs()).powi(2);
        prop_assert!(max_abs(&(&shifted - &base)) <= tol);
        prop_assert!(max_abs(&(&scaled - &(&base * (s * s)))) <= 1e-9 * (1.0 + max_abs(&base)) * s * s);
    }

    #[test]
    fn tilde_is_symmetric_psd((x, m) in panel_strategy()) {
        let plan = BlockPlan::new(x.nrows(), m).unwrap();
        let s = sigma_tilde(&Panel::from_data(x).unwrap(), &plan).unwrap().sigma;
        prop_assert_eq!(&s, &s.t());
        let root = psd_sqrt(&s).unwrap();
        prop_assert!(root.clipped_mass <= 1e-9 * (1.0 + max_abs(&s)));
    }

    #[test]
    fn psd_sqrt_reconstructs(p in 1usize..12, v in prop::collection::vec(-3.0f64..3.0, 144)) {
        let f = Array2::from_shape_fn((p, p), |(i, j)| v[i * 12 + j]);
        let a = f.dot(&f.t());
        let s = psd_sqrt(&a).unwrap().root;
        prop_assert!(max_abs(&(s.dot(&s.t()) - &a)) <= 1e-8 * (1.0 + max_abs(&a)));
    }

    #[test]
    fn cov_layout_is_a_bijection(p in 1usize..40) {
        let mut seen = vec![false; cov_dim(p)];
        for j in 0..p {
            for k in j..p {
                let a = cov_index(j, k, p);
                prop_assert!(!seen[a]);
                seen[a] = true;
                prop_assert_eq!(cov_pair(a, p), (j, k));
            }
        }
    }

    #[test]
    fn order_quantile_is_monotone(mut v in prop::collection::vec(-100.0f64..100.0, 1..200), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(order_quantile(&v, lo).unwrap() <= order_quantile(&v, hi).unwrap());
    }

    #[test]
    fn simulation_is_a_pure_function_of_the_seed(seed in any::<u64>(), n in 1usize..40, p in 1usize..5) {
        let spec = ProcessSpec::linear(p, 1.0, 10, 1, 0.5);
        let a = simulate(&spec, n, RngContract::new(seed)).unwrap();
        let b = simulate(&spec, n, RngContract::new(seed)).unwrap();
        prop_assert_eq!(a.data, b.data);
    }
}
