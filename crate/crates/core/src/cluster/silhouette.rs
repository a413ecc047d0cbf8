use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::dist;

/// Mean silhouette over all points, Euclidean metric, full distance matrix.
/// Points in singleton clusters score 0.
pub fn silhouette_score(m: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    let n = m.n();
    if labels.len() != n {
        return Err(Error::invalid("label count differs from row count"));
    }
    let k = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::invalid("silhouette needs at least two non-empty clusters"));
    }
    let x = &m.values;
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(x.row(i), x.row(j));
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn fm(rows: usize, cols: usize, v: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::from_standardized(Matrix::from_vec(rows, cols, v))
    }

    #[test]
    fn perfect_separation() {
        let m = fm(4, 1, vec![0.0, 0.0, 10.0, 10.0]);
        assert_eq!(silhouette_score(&m, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn singletons_score_zero() {
        let m = fm(2, 1, vec![0.0, 5.0]);
        assert_eq!(silhouette_score(&m, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn single_cluster_rejected() {
        let m = fm(3, 1, vec![0.0, 1.0, 2.0]);
        assert!(silhouette_score(&m, &[0, 0, 0]).is_err());
    }

    #[test]
    fn random_labels_on_one_blob_near_zero() {
        let mut rng = seed::rng(17);
        let n = 300;
        let v: Vec<f64> = (0..n * 3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let s = silhouette_score(&fm(n, 3, v), &labels).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }

    proptest! {
        #[test]
        fn bounded(v in prop::collection::vec(-50.0f64..50.0, 20), labels in prop::collection::vec(0usize..3, 10)) {
            let m = fm(10, 2, v);
            let distinct = labels.iter().collect::<std::collections::HashSet<_>>().len();
            prop_assume!(distinct >= 2);
            let s = silhouette_score(&m, &labels).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }
}
