//! Dense layers, row normalization and the named-tensor plumbing shared by
//! both towers.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Named parameter arrays, visited in a fixed order.
pub trait Tensors {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)>;
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)>;

    /// Same shapes, all zeros. Used as a gradient accumulator.
    fn zeros_like(&self) -> Self;

    fn add_assign(&mut self, other: &Self) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    fn scaled_add(&mut self, alpha: f64, other: &Self) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }
}

pub(crate) fn prefixed<T>(prefix: &str, items: Vec<(String, T)>) -> Vec<(String, T)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn normal_array2(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// `y = x·W + b` with `W: d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn init(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: normal_array2(d_in, d_out, (1.0 / d_in as f64).sqrt(), rng),
            b: Array1::zeros(d_out),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

impl Tensors for Linear {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("w".into(), self.w.view().into_dyn()),
            ("b".into(), self.b.view().into_dyn()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("w".into(), self.w.view_mut().into_dyn()),
            ("b".into(), self.b.view_mut().into_dyn()),
        ]
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Unit-normalize each row. Returns the normalized rows and the original
/// norms; a zero row is reported by index.
pub fn normalize_rows(z: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>), usize> {
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(i);
    }
    let u = z / &norms.view().insert_axis(Axis(1));
    Ok((u, norms))
}

/// Gradient through `u = z/|z|`: `dz = (du − u·(u·du)) / |z|`.
pub fn normalize_rows_backward(u: &Array2<f64>, norms: &Array1<f64>, du: &Array2<f64>) -> Array2<f64> {
    let proj = (u * du).sum_axis(Axis(1)).insert_axis(Axis(1));
    (du - &(u * &proj)) / norms.view().insert_axis(Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rows_become_unit() {
        let (u, n) = normalize_rows(&array![[3.0, 4.0], [0.0, 2.0]]).unwrap();
        assert_eq!(u, array![[0.6, 0.8], [0.0, 1.0]]);
        assert_eq!(n, array![5.0, 2.0]);
        assert_eq!(normalize_rows(&array![[1.0, 0.0], [0.0, 0.0]]), Err(1));
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let z = array![[0.3, -1.2, 0.5], [2.0, 0.1, -0.4]];
        let g = array![[0.7, 0.2, -0.3], [-1.0, 0.5, 0.25]];
        let f = |z: &Array2<f64>| (&normalize_rows(z).unwrap().0 * &g).sum();
        let (u, n) = normalize_rows(&z).unwrap();
        let dz = normalize_rows_backward(&u, &n, &g);
        let h = 1e-6;
        for idx in [(0, 0), (0, 2), (1, 1)] {
            let mut zp = z.clone();
            zp[idx] += h;
            let mut zm = z.clone();
            zm[idx] -= h;
            let fd = (f(&zp) - f(&zm)) / (2.0 * h);
            assert!((fd - dz[idx]).abs() < 1e-8);
        }
    }
}
