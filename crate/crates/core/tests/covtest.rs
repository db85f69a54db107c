use hdts_core::covinf::{cov_simultaneous_test, CovNull, CovTestOptions};
use hdts_core::model::simulate;
use hdts_core::par::map_ordered;
use hdts_core::stats::median;
use hdts_core::{InnovationLaw, Panel, ProcessSpec, Purpose, RngContract};

fn iid(p: usize) -> ProcessSpec {
    ProcessSpec::iid(p, InnovationLaw::StandardGaussian)
}

#[test]
fn family_wise_error_under_identity_null() {
    // default block length floor(n^{1/3}); at n = 500 the w = 71 blocks leave the level visibly inflated
    let n = 2000;
    let spec = iid(5);
    let reps = 2000;
    let base = RngContract::new(31);
    let opts = CovTestOptions { draws: 1000, ..Default::default() };
    let rejections: usize = map_ordered(reps, |r| {
        let stream = base.derive(Purpose::Replication, r as u64);
        let x = simulate(&spec, n, stream).unwrap();
        let rep = cov_simultaneous_test(&x, 0.95, &CovNull::identity(5), opts, stream.derive(Purpose::Auxiliary, 0)).unwrap();
        usize::from(rep.reject)
    })
    .into_iter()
    .sum();
    let fwer = rejections as f64 / reps as f64;
    assert!(fwer <= 0.05 + 0.02, "family-wise error {fwer}");
}

#[test]
fn planted_pair_is_found() {
    let spec = iid(5);
    let reps = 200;
    let base = RngContract::new(32);
    let opts = CovTestOptions { draws: 1000, ..Default::default() };
    let hits: usize = map_ordered(reps, |r| {
        let stream = base.derive(Purpose::Replication, r as u64);
        let mut x = simulate(&spec, 2000, stream).unwrap().data;
        let z = x.column(1).to_owned();
        let mut c = x.column_mut(3);
        c *= (1.0f64 - 0.81).sqrt();
        c.scaled_add(0.9, &z);
        let panel = Panel::from_data(x).unwrap();
        let rep = cov_simultaneous_test(&panel, 0.95, &CovNull::ZeroOffDiagonal, opts, stream.derive(Purpose::Auxiliary, 0)).unwrap();
        let found = rep.flagged().any(|f| (f.j, f.k) == (2, 4));
        usize::from(found)
    })
    .into_iter()
    .sum();
    assert!(hits as f64 >= 0.99 * reps as f64, "{hits} of {reps}");
}

#[test]
fn deviation_from_true_null_shrinks_with_n() {
    let spec = iid(1);
    let opts = CovTestOptions { draws: 1000, ..Default::default() };
    let medians: Vec<f64> = [1000usize, 4000, 16000, 64000]
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let devs: Vec<f64> = (0..40)
                .map(|r| {
                    let stream = RngContract::new(33).derive(Purpose::Cell, i as u64).derive(Purpose::Replication, r);
                    let x = simulate(&spec, n, stream).unwrap();
                    let rep = cov_simultaneous_test(&x, 0.95, &CovNull::identity(1), opts, stream).unwrap();
                    (rep.pairs[0].gamma_hat - 1.0).abs()
                })
                .collect();
            median(&devs)
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn flagged_pairs_csv() {
    let x = simulate(&iid(3), 300, RngContract::new(34)).unwrap();
    let rep = cov_simultaneous_test(&x, 0.9, &CovNull::ZeroOffDiagonal, CovTestOptions::default(), RngContract::new(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    rep.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,k,gamma_hat,stat,threshold,flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("1,2,"));
}
