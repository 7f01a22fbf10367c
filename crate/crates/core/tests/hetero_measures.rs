use hetero_dp::hetero_measures::{
    dispersion, i_squared, measure, q_statistic, weighted_mean, MeasureContext, VectorDataset,
};
use proptest::prelude::*;

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..12, 1usize..6).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(0.0f64..=1.0, d), n))
}

fn brute_dispersion(rows: &[Vec<f64>], p: f64) -> f64 {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut total = 0.0;
    for r in rows {
        for j in 0..d {
            let mu: f64 = rows.iter().map(|s| s[j]).sum::<f64>() / n;
            total += (r[j] - mu).abs().powf(p);
        }
    }
    total / n
}

#[test]
fn known_small_case() {
    let data = VectorDataset::unlabelled(&[vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
    // mean (0.5, 0.25): each row is 0.25 + 0.0625 away.
    assert!((dispersion(&data, 2.0).unwrap() - 0.3125).abs() < 1e-15);
    let ctx = MeasureContext::unit_weights(&data).unwrap();
    assert!((q_statistic(&data, &ctx).unwrap() - 0.3125).abs() < 1e-15);
}

#[test]
fn rejects_out_of_range_values() {
    assert!(VectorDataset::unlabelled(&[vec![1.5]]).is_err());
    assert!(VectorDataset::unlabelled(&[vec![f64::NAN]]).is_err());
    assert!(VectorDataset::unlabelled(&[vec![0.1, 0.2], vec![0.3]]).is_err());
    assert!(dispersion(&VectorDataset::unlabelled(&[vec![0.1]]).unwrap(), 0.5).is_err());
}

#[test]
fn i_squared_edges() {
    assert_eq!(i_squared(0.0, 10).unwrap(), 0.0);
    assert_eq!(i_squared(9.0, 10).unwrap(), 0.0);
    assert!((i_squared(18.0, 10).unwrap() - 0.5).abs() < 1e-15);
    assert!(i_squared(1.0, 1).is_err());
    assert!(i_squared(-1.0, 5).is_err());
}

#[test]
fn report_is_consistent() {
    let data = VectorDataset::unlabelled(&[vec![0.1, 0.9, 0.5], vec![0.4, 0.2, 0.6], vec![0.8, 0.3, 0.3]]).unwrap();
    let r = measure(&data, 2.0).unwrap();
    assert_eq!(r.dispersion, dispersion(&data, 2.0).unwrap());
    assert_eq!(r.i_squared, i_squared(r.q_value, 3).unwrap());
}

proptest! {
    #[test]
    fn dispersion_matches_brute_force(rows in rows_strategy(), p in prop::sample::select(vec![1.0, 2.0, 3.0, 4.5])) {
        let data = VectorDataset::unlabelled(&rows).unwrap();
        let got = dispersion(&data, p).unwrap();
        let want = brute_dispersion(&rows, p);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn statistics_are_permutation_invariant(rows in rows_strategy(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let k = shuffled.len();
        shuffled.rotate_left((seed % k as u64) as usize);
        shuffled.reverse();
        let a = VectorDataset::unlabelled(&rows).unwrap();
        let b = VectorDataset::unlabelled(&shuffled).unwrap();
        let (ra, rb) = (measure(&a, 2.0).unwrap(), measure(&b, 2.0).unwrap());
        prop_assert!((ra.dispersion - rb.dispersion).abs() <= 1e-12 * ra.dispersion.max(1.0));
        prop_assert!((ra.q_value - rb.q_value).abs() <= 1e-9 * ra.q_value.max(1.0));
    }

    #[test]
    fn unit_weight_q_equals_dispersion(rows in rows_strategy()) {
        let data = VectorDataset::unlabelled(&rows).unwrap();
        let ctx = MeasureContext::unit_weights(&data).unwrap();
        let q = q_statistic(&data, &ctx).unwrap();
        let d = dispersion(&data, 2.0).unwrap();
        prop_assert!((q - d).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn i_squared_bounded_and_monotone(n in 2usize..500, q in 0.0f64..1e6, dq in 0.0f64..1e3) {
        let a = i_squared(q, n).unwrap();
        let b = i_squared(q + dq, n).unwrap();
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn equal_weights_give_plain_mean(rows in rows_strategy(), w in 0.01f64..100.0) {
        let data = VectorDataset::unlabelled(&rows).unwrap();
        let got = weighted_mean(&data, &vec![w; data.n()]).unwrap();
        let want = MeasureContext::unit_weights(&data).unwrap().mean;
        for (g, m) in got.iter().zip(&want) {
            prop_assert!((g - m).abs() < 1e-12);
        }
    }
}
