//! Baseline hashing families: random hyperplane LSH and PCA hashing.
//!
//! Both produce the same [`HashModel`] shape as density-sensitive training,
//! so encoding, ranking, and evaluation treat all three families uniformly.
//! LSH draws projection directions from an isotropic Gaussian with zero
//! thresholds; PCA hashing uses the top eigenvectors of the sample
//! covariance of the centered data.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::data::{self, Dataset, MAX_DIM};
use crate::dsh::{HashMethod, HashModel, Projection};
use crate::error::{Error, Result};

/// Trains a random hyperplane LSH model: each of the `bits` directions has
/// i.i.d. standard normal components, and every threshold is zero, so each
/// plane passes through the origin of the centered space.
///
/// The model is data independent; its training mean is all zeros. A caller
/// hashing raw vectors should attach the data mean with
/// [`HashModel::with_training_mean`].
pub fn train_lsh(dim: usize, bits: usize, seed: u64) -> Result<HashModel> {
    if dim < 1 || dim > MAX_DIM {
        return Err(Error::Param(format!("dimension must be in 1..={MAX_DIM}")));
    }
    if bits < 1 {
        return Err(Error::Param("bit count must be at least 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let projections = (0..bits)
        .map(|_| Projection {
            w: (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            t: 0.0,
        })
        .collect();
    Ok(HashModel {
        method: HashMethod::Lsh,
        dim,
        projections,
        training_mean: vec![0.0; dim],
    })
}

/// Empirical probability that `draws` random origin hyperplanes put `x1`
/// and `x2` on the same side. For unit vectors at angle theta this
/// approaches `1 - theta / pi` as `draws` grows.
pub fn lsh_collision_rate(x1: &[f32], x2: &[f32], draws: usize, seed: u64) -> Result<f64> {
    if x1.is_empty() || x1.len() != x2.len() {
        return Err(Error::Param(format!(
            "vectors must be non-empty and of equal dimension, got {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    if draws < 1 {
        return Err(Error::Param("draw count must be at least 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut same = 0usize;
    for _ in 0..draws {
        let mut d1 = 0f64;
        let mut d2 = 0f64;
        for (&a, &b) in x1.iter().zip(x2) {
            let w: f64 = rng.sample(StandardNormal);
            d1 += w * a as f64;
            d2 += w * b as f64;
        }
        if (d1 >= 0.0) == (d2 >= 0.0) {
            same += 1;
        }
    }
    Ok(same as f64 / draws as f64)
}

/// Trains a PCA hashing model: the `bits` top eigenvectors of the sample
/// covariance of the centered data become projection directions (zero
/// thresholds). Eigenvectors are ordered by non-increasing eigenvalue and
/// sign-fixed so that each one's first nonzero component is positive.
pub fn train_pcah(ds: &Dataset, bits: usize) -> Result<HashModel> {
    let d = ds.dim();
    if bits < 1 {
        return Err(Error::Param("bit count must be at least 1".into()));
    }
    if bits > d {
        return Err(Error::Param(format!(
            "requested {bits} bits but the data has only {d} dimensions"
        )));
    }
    if ds.n() < 2 {
        return Err(Error::Param("PCA hashing needs at least two points".into()));
    }

    let centered_owned;
    let centered = if ds.is_centered() {
        ds
    } else {
        centered_owned = data::center(ds)?;
        &centered_owned
    };
    let training_mean = centered
        .mean()
        .expect("centered dataset records its mean")
        .to_vec();

    // Sample covariance in f64, accumulated serially in point order.
    let n = centered.n();
    let mut cov = vec![0f64; d * d];
    for i in 0..n {
        let row = centered.row(i);
        for a in 0..d {
            let xa = row[a] as f64;
            for b in a..d {
                cov[a * d + b] += xa * row[b] as f64;
            }
        }
    }
    let norm = 1.0 / (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] * norm;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let projections = order[..bits]
        .iter()
        .map(|&idx| {
            let col = eig.eigenvectors.column(idx);
            let mut w: Vec<f64> = col.iter().copied().collect();
            if let Some(&first) = w.iter().find(|&&v| v != 0.0) {
                if first < 0.0 {
                    for v in &mut w {
                        *v = -*v;
                    }
                }
            }
            Projection { w, t: 0.0 }
        })
        .collect();

    Ok(HashModel {
        method: HashMethod::Pcah,
        dim: d,
        projections,
        training_mean,
    })
}
