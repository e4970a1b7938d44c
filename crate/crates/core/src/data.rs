//! Clustered data model and the cluster-averaging transform.

use alloc::string::String;
use alloc::vec::Vec;

use crate::numeric::CompensatedSum;
use crate::{Error, Matrix, Result};

/// One cluster: `N_g` observations of a `k`-column design and a response.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterBlock {
    id: String,
    x: Matrix,
    y: Vec<f64>,
}

impl ClusterBlock {
    pub fn new(id: impl Into<String>, x: Matrix, y: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if x.rows() == 0 {
            return Err(Error::DimensionMismatch(alloc::format!("cluster {id} is empty")));
        }
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "cluster {id}: X has {} rows but Y has {}",
                x.rows(),
                y.len()
            )));
        }
        if !x.all_finite() || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData(alloc::format!("cluster {id}")));
        }
        Ok(Self { id, x, y })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.x.cols()
    }
}

/// Validated, ordered collection of clusters sharing the same `k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusteredDataset {
    blocks: Vec<ClusterBlock>,
}

/// Validates blocks and wraps them in a dataset, preserving order.
pub fn build_dataset(blocks: Vec<ClusterBlock>) -> Result<ClusteredDataset> {
    let first = blocks.first().ok_or(Error::EmptyDataset)?;
    let k = first.n_params();
    if let Some(bad) = blocks.iter().find(|b| b.n_params() != k) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "cluster {} has {} regressors, expected {k}",
            bad.id(),
            bad.n_params()
        )));
    }
    let n: usize = blocks.iter().map(ClusterBlock::len).sum();
    if n < k {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{n} observations for {k} regressors"
        )));
    }
    Ok(ClusteredDataset { blocks })
}

impl ClusteredDataset {
    pub fn blocks(&self) -> &[ClusterBlock] {
        &self.blocks
    }

    pub fn n_clusters(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_params(&self) -> usize {
        self.blocks[0].n_params()
    }

    pub fn n_obs(&self) -> usize {
        self.blocks.iter().map(ClusterBlock::len).sum()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(ClusterBlock::len).collect()
    }

    pub fn stacked_x(&self) -> Matrix {
        let k = self.n_params();
        let mut data = Vec::with_capacity(self.n_obs() * k);
        for b in &self.blocks {
            data.extend_from_slice(b.x().as_slice());
        }
        Matrix::from_row_major(self.n_obs(), k, data).expect("blocks share k")
    }

    pub fn stacked_y(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.y().iter().copied()).collect()
    }

    pub fn into_blocks(self) -> Vec<ClusterBlock> {
        self.blocks
    }
}

/// Per-cluster means: one row per cluster.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AveragedDataset {
    pub xbar: Matrix,
    pub ybar: Vec<f64>,
    pub sizes: Vec<usize>,
}

/// Column means of one block's design.
pub fn block_means(x: &Matrix) -> Vec<f64> {
    let mut acc = alloc::vec![CompensatedSum::new(); x.cols()];
    for i in 0..x.rows() {
        for (a, &v) in acc.iter_mut().zip(x.row(i)) {
            a.add(v);
        }
    }
    let n = x.rows() as f64;
    acc.iter().map(|a| a.value() / n).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    crate::numeric::compensated_mean(values)
}

/// Averages every cluster: `Xbar[g, j] = mean_i X_g[i, j]`, `Ybar[g] = mean_i Y_g[i]`.
pub fn cluster_average(ds: &ClusteredDataset) -> AveragedDataset {
    let g = ds.n_clusters();
    let k = ds.n_params();
    let mut xbar = Matrix::zeros(g, k);
    let mut ybar = Vec::with_capacity(g);
    for (row, block) in ds.blocks().iter().enumerate() {
        xbar.row_mut(row).copy_from_slice(&block_means(block.x()));
        ybar.push(mean(block.y()));
    }
    AveragedDataset {
        xbar,
        ybar,
        sizes: ds.cluster_sizes(),
    }
}

/// Smallest and largest cluster size and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceProfile {
    pub min_size: usize,
    pub max_size: usize,
    pub ratio: f64,
}

pub fn balance_profile(ds: &ClusteredDataset) -> BalanceProfile {
    balance_of_sizes(&ds.cluster_sizes())
}

pub fn balance_of_sizes(sizes: &[usize]) -> BalanceProfile {
    let min_size = sizes.iter().copied().min().unwrap_or(0);
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    let ratio = if max_size == 0 {
        0.0
    } else {
        min_size as f64 / max_size as f64
    };
    BalanceProfile {
        min_size,
        max_size,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn block(id: &str, rows: &[&[f64]], y: &[f64]) -> ClusterBlock {
        ClusterBlock::new(id, Matrix::from_rows(rows).unwrap(), y.to_vec()).unwrap()
    }

    #[test]
    fn minimal_dataset() {
        let ds = build_dataset(vec![block("a", &[&[1.0]], &[2.0])]).unwrap();
        assert_eq!(ds.n_clusters(), 1);
        assert_eq!(ds.n_params(), 1);
    }

    #[test]
    fn unequal_k_is_rejected() {
        let a = block("a", &[&[1.0, 2.0]], &[1.0]);
        let b = block("b", &[&[1.0, 2.0, 3.0]], &[1.0]);
        assert!(matches!(build_dataset(vec![a, b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn row_mismatch_and_non_finite_are_rejected() {
        let x = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert!(matches!(
            ClusterBlock::new("a", x.clone(), vec![1.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            ClusterBlock::new("a", x, vec![1.0, f64::NAN]),
            Err(Error::NonFiniteData(_))
        ));
        assert_eq!(build_dataset(vec![]), Err(Error::EmptyDataset));
    }

    #[test]
    fn bookkeeping_for_three_blocks() {
        let blocks = [4usize, 5, 6]
            .iter()
            .enumerate()
            .map(|(g, &n)| {
                let rows: Vec<[f64; 2]> = (0..n).map(|i| [1.0, i as f64]).collect();
                ClusterBlock::new(alloc::format!("{g}"), Matrix::from_rows(&rows).unwrap(), vec![0.0; n])
                    .unwrap()
            })
            .collect();
        let ds = build_dataset(blocks).unwrap();
        assert_eq!(ds.n_clusters(), 3);
        assert_eq!(ds.n_obs(), 15);
    }

    #[test]
    fn average_of_small_block() {
        let ds = build_dataset(vec![block("a", &[&[1.0, 2.0], &[1.0, 4.0]], &[3.0, 5.0])]).unwrap();
        let avg = cluster_average(&ds);
        assert_eq!(avg.xbar.row(0), &[1.0, 3.0]);
        assert_eq!(avg.ybar, vec![4.0]);
        assert_eq!(avg.sizes, vec![2]);
    }

    #[test]
    fn singleton_clusters_average_to_themselves() {
        let blocks = (0..4)
            .map(|g| block("s", &[&[1.0, 0.1 * g as f64 + 1.0 / 3.0]], &[g as f64 / 7.0]))
            .collect();
        let ds = build_dataset(blocks).unwrap();
        let avg = cluster_average(&ds);
        assert_eq!(avg.xbar, ds.stacked_x());
        assert_eq!(avg.ybar, ds.stacked_y());
    }

    #[test]
    fn balance_examples() {
        let p = balance_of_sizes(&[7, 7, 7]);
        assert_eq!(p.ratio, 1.0);
        let mut sizes = vec![500];
        sizes.extend(4..=10);
        let p = balance_of_sizes(&sizes);
        assert_eq!((p.min_size, p.max_size), (4, 500));
        assert_eq!(p.ratio, 4.0 / 500.0);
        let p = balance_of_sizes(&(25..=50).collect::<Vec<_>>());
        assert!(p.ratio >= 0.5);
    }

    fn arb_block() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (3usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), n),
                proptest::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn means_are_bounded_and_order_invariant((rows, y) in arb_block(), seed in any::<u64>()) {
            let x = Matrix::from_rows(&rows).unwrap();
            let ds = build_dataset(vec![ClusterBlock::new("g", x, y.clone()).unwrap()]).unwrap();
            let avg = cluster_average(&ds);
            for j in 0..3 {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= avg.xbar[(0, j)] && avg.xbar[(0, j)] <= hi);
            }

            // Reverse-rotate the rows by a seed-dependent offset.
            let shift = (seed as usize) % rows.len();
            let mut perm: Vec<usize> = (0..rows.len()).collect();
            perm.rotate_left(shift);
            perm.reverse();
            let prows: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
            let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let pds = build_dataset(vec![
                ClusterBlock::new("g", Matrix::from_rows(&prows).unwrap(), py).unwrap(),
            ]).unwrap();
            let pavg = cluster_average(&pds);
            for j in 0..3 {
                let a = avg.xbar[(0, j)];
                let b = pavg.xbar[(0, j)];
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert!((avg.ybar[0] - pavg.ybar[0]).abs() <= 1e-12 * avg.ybar[0].abs().max(1.0));
        }
    }
}
