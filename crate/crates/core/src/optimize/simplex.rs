/// Euclidean projection of `v` onto the probability simplex
/// `{p : p_i >= 0, sum p_i = 1}` by sorting and thresholding.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points_and_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[1.0, 1.0, 1.0]);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[5.0]), vec![1.0]);
    }

    proptest! {
        #[test]
        fn lands_on_simplex_and_is_nearest(v in prop::collection::vec(-3.0f64..3.0, 1..8),
                                          probe in prop::collection::vec(0.0f64..1.0, 8)) {
            let p = project_simplex(&v);
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            // Any other simplex point is at least as far from v.
            let q: Vec<f64> = probe[..v.len()].to_vec();
            let qs: f64 = q.iter().sum();
            if qs > 1e-9 {
                let q: Vec<f64> = q.iter().map(|x| x / qs).collect();
                let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                prop_assert!(dist(&p) <= dist(&q) + 1e-12);
            }
        }
    }
}
