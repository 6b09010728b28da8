use nalgebra::{DMatrix, DVector};

use super::pca::{centred_matrix, column_means, fix_sign, Projection};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

const DEGENERATE: f64 = 1e-12;
const MAX_ITER: usize = 500;

/// Weight vectors and X-loadings of a fitted PLS2 model.
#[derive(Clone, Debug, PartialEq)]
pub struct PlsComponents {
    pub weights: Vec<DVector<f64>>,
    pub loadings: Vec<DVector<f64>>,
}

fn nipals(mut x: DMatrix<f64>, y: &DMatrix<f64>, k: usize) -> PlsComponents {
    let mut out = PlsComponents {
        weights: Vec::new(),
        loadings: Vec::new(),
    };
    for _ in 0..k {
        // start from the response column with the largest covariance
        let xty = x.transpose() * y;
        let (start, norm) = (0..y.ncols())
            .map(|j| (j, xty.column(j).norm()))
            .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if norm < DEGENERATE {
            break;
        }
        let mut u = y.column(start).into_owned();
        let mut t_prev: Option<DVector<f64>> = None;
        let (mut w, mut t) = (DVector::zeros(x.ncols()), DVector::zeros(x.nrows()));
        for _ in 0..MAX_ITER {
            w = x.transpose() * &u;
            let wn = w.norm();
            if wn < DEGENERATE {
                break;
            }
            w /= wn;
            t = &x * &w;
            let tt = t.dot(&t);
            if tt < DEGENERATE {
                break;
            }
            let q = y.transpose() * &t / tt;
            let qq = q.dot(&q);
            if qq < DEGENERATE {
                break;
            }
            u = y * &q / qq;
            let converged = t_prev
                .as_ref()
                .is_some_and(|p| (&t - p).norm() <= 1e-12 * t.norm().max(1.0));
            if converged {
                break;
            }
            t_prev = Some(t.clone());
        }
        let tt = t.dot(&t);
        if w.norm() < DEGENERATE || tt < DEGENERATE {
            break;
        }
        let p = x.transpose() * &t / tt;
        x -= &t * p.transpose();
        out.weights.push(w);
        out.loadings.push(p);
    }
    out
}

/// PLS2 on the centred features and centred one-hot labels, extracting up to
/// `k` score directions with X-deflation. The returned projection maps raw
/// (undeflated) inputs straight to scores via `R = W (PᵀW)⁻¹`.
pub fn fit_pls(train: &LabeledDataset, k: usize) -> Result<Projection> {
    if train.n_samples() < 2 {
        return Err(Error::Input("pls needs at least two samples".into()));
    }
    let classes = train.classes();
    if classes.len() < 2 {
        return Err(Error::Input("pls needs at least two classes".into()));
    }
    train.check_finite()?;
    let d = train.dim();
    let mean = column_means(train);
    let x = centred_matrix(train, &mean);
    let n = train.n_samples();
    let mut y = DMatrix::from_fn(n, classes.len(), |i, j| {
        f64::from(u8::from(train.labels()[i] == classes[j]))
    });
    for mut col in y.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }

    let comps = nipals(x, &y, k);
    let a = comps.weights.len();
    if a < k {
        log::warn!("pls: deflation degenerated after {a} of {k} components; padding with zeros");
    }
    let mut weights = Vec::with_capacity(k);
    if a > 0 {
        let w = DMatrix::from_columns(&comps.weights);
        let p = DMatrix::from_columns(&comps.loadings);
        let ptw = p.transpose() * &w;
        let inv = ptw
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("pls: PᵀW is singular".into()))?;
        let r = w * inv;
        for c in 0..a {
            let mut row: Vec<f64> = r.column(c).iter().copied().collect();
            fix_sign(&mut row);
            weights.push(row);
        }
    }
    weights.resize(k, vec![0.0; d]);
    Ok(Projection {
        mean,
        weights,
        n_active: a,
    })
}
