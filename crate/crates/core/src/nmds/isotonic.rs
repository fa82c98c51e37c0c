use crate::{Error, Result};

/// Weighted least-squares nondecreasing fit to `y` (pool adjacent violators).
pub fn isotonic_regression(y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("isotonic regression of an empty sequence".into()));
    }
    if y.len() != weights.len() {
        return Err(Error::InvalidArgument(format!("{} values with {} weights", y.len(), weights.len())));
    }
    if y.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument("values must be finite and weights positive".into()));
    }
    // blocks of (weighted mean, total weight, length); means strictly increase
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &w) in y.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m < cur.0 {
                break;
            }
            blocks.pop();
            let total = bw + cur.1;
            cur = ((m * bw + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    Ok(blocks.into_iter().flat_map(|(m, _, len)| std::iter::repeat_n(m, len)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_cases() {
        assert_eq!(isotonic_regression(&[1.0, 2.0, 2.0, 5.0], &[1.0; 4]).unwrap(), vec![1.0, 2.0, 2.0, 5.0]);
        assert_eq!(isotonic_regression(&[3.0, 1.0], &[1.0; 2]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(isotonic_regression(&[3.0, 1.0], &[3.0, 1.0]).unwrap(), vec![2.5, 2.5]);
        assert_eq!(isotonic_regression(&[1.0, 3.0, 2.0, 0.0], &[1.0; 4]).unwrap(), vec![1.0, 5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0]);
        assert!(isotonic_regression(&[], &[]).is_err());
        assert!(isotonic_regression(&[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn output_is_monotone_and_mean_preserving(
            pairs in prop::collection::vec((-10.0f64..10.0, 0.1f64..5.0), 1..60),
        ) {
            let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let fit = isotonic_regression(&y, &w).unwrap();
            prop_assert!(fit.windows(2).all(|p| p[0] <= p[1]));
            let total = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            prop_assert!((total(&fit) - total(&y)).abs() < 1e-9 * (1.0 + total(&y).abs()));
        }
    }
}
