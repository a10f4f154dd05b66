use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Equal-width bin index of each value after min-max scaling. A constant
/// column maps to bin 0.
pub fn discretize(x: impl IntoIterator<Item = f64> + Clone, bins: usize) -> Vec<usize> {
    let (lo, hi) = x
        .clone()
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    x.into_iter()
        .map(|v| {
            if span > 0.0 {
                ((((v - lo) / span) * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Plug-in mutual information (nats) of two discrete sequences.
pub fn mutual_information(a: &[usize], na: usize, b: &[usize], nb: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint = vec![0usize; na * nb];
    let mut pa = vec![0usize; na];
    let mut pb = vec![0usize; nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let c = joint[x * nb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrSelection {
    /// Column indices in pick order.
    pub selected: Vec<usize>,
    /// Relevance `I(f; y)` of each pick.
    pub relevance: Vec<f64>,
    /// Mean redundancy against earlier picks (0 for the first).
    pub redundancy: Vec<f64>,
}

/// Greedy mutual-information-difference selection of `k` columns of `x`
/// (`[samples x features]`). Scores are `I(f; y) - mean_s I(f; f_s)`;
/// ties go to the lowest column index.
pub fn mrmr_select(x: ArrayView2<'_, f64>, labels: &[u8], k: usize, bins: usize) -> Result<MrmrSelection> {
    let (n, d) = x.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if k > d {
        return Err(Error::Features(format!("cannot select {k} of {d} features")));
    }
    if bins < 2 {
        return Err(Error::Config("mrmr needs at least 2 bins".into()));
    }
    let y: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let cols: Vec<Vec<usize>> = x
        .columns()
        .into_iter()
        .map(|c| discretize(c.iter().copied(), bins))
        .collect();
    let relevance: Vec<f64> = cols.iter().map(|c| mutual_information(c, bins, &y, 2)).collect();

    let mut redundancy_sum = vec![0.0; d];
    let mut picked = vec![false; d];
    let mut sel = MrmrSelection {
        selected: Vec::with_capacity(k),
        relevance: Vec::with_capacity(k),
        redundancy: Vec::with_capacity(k),
    };
    for step in 0..k {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in (0..d).filter(|&j| !picked[j]) {
            let red = if step == 0 {
                0.0
            } else {
                redundancy_sum[j] / step as f64
            };
            let score = relevance[j] - red;
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((j, score, red));
            }
        }
        let (j, _, red) = best.expect("k <= d leaves a candidate");
        picked[j] = true;
        sel.selected.push(j);
        sel.relevance.push(relevance[j]);
        sel.redundancy.push(red);
        for m in (0..d).filter(|&m| !picked[m]) {
            redundancy_sum[m] += mutual_information(&cols[m], bins, &cols[j], bins);
        }
    }
    Ok(sel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng as _;

    #[test]
    fn mutual_information_basics() {
        let a = [0, 0, 1, 1];
        assert!((mutual_information(&a, 2, &a, 2) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(mutual_information(&a, 2, &[0, 1, 0, 1], 2), 0.0);
        assert_eq!(discretize([1.0, 1.0], 10), vec![0, 0]);
        assert_eq!(discretize([0.0, 0.5, 1.0], 10), vec![0, 5, 9]);
    }

    #[test]
    fn label_copy_is_picked_first() {
        let mut rng = crate::rng_from_seed(0);
        let labels: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn(
            (60, 5),
            |(i, j)| {
                if j == 3 {
                    labels[i] as f64
                } else {
                    rng.random::<f64>()
                }
            },
        );
        let s = mrmr_select(x.view(), &labels, 2, 10).unwrap();
        assert_eq!(s.selected[0], 3);
    }

    #[test]
    fn duplicate_loses_to_independent_feature() {
        // columns 0 and 1 identical and informative, column 2 independently
        // informative, column 3 noise
        let mut rng = crate::rng_from_seed(1);
        let labels: Vec<u8> = (0..200).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((200, 4), |(i, j)| {
            let y = labels[i] as f64;
            match j {
                0 | 1 => y + 0.3 * ((i * 7919 % 13) as f64 / 13.0),
                2 => y + 0.6 * rng.random::<f64>(),
                _ => rng.random::<f64>(),
            }
        });
        let s = mrmr_select(x.view(), &labels, 2, 10).unwrap();
        assert_eq!(s.selected[0], 0);
        assert_eq!(s.selected[1], 2);
    }

    #[test]
    fn full_selection_is_permutation() {
        let mut rng = crate::rng_from_seed(2);
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((30, 6), |_| rng.random::<f64>());
        let mut s = mrmr_select(x.view(), &labels, 6, 10).unwrap().selected;
        s.sort();
        assert_eq!(s, (0..6).collect::<Vec<_>>());
        assert!(mrmr_select(x.view(), &labels, 7, 10).is_err());
    }
}
