//! Strided 3×3 convolution tower with ReLU and global average pooling.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::layers::{normal_array2, prefixed, Tensors};

const K: usize = 3;
const STRIDE: usize = 2;
const PAD: usize = 1;

fn out_size(n: usize) -> usize {
    (n + 2 * PAD - K) / STRIDE + 1
}

/// `x: C × (h·w)` → columns `C·9 × (ho·wo)`.
fn im2col(x: &Array2<f64>, h: usize, w: usize) -> Array2<f64> {
    let c = x.nrows();
    let (ho, wo) = (out_size(h), out_size(w));
    let xs = x.as_slice().expect("contiguous input");
    let mut cols = Array2::<f64>::zeros((c * K * K, ho * wo));
    let out = cols.as_slice_mut().expect("contiguous columns");
    for ch in 0..c {
        for ky in 0..K {
            for kx in 0..K {
                let row = (ch * K + ky) * K + kx;
                let dst = &mut out[row * ho * wo..(row + 1) * ho * wo];
                for oy in 0..ho {
                    let iy = (oy * STRIDE + ky) as isize - PAD as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &xs[ch * h * w + iy as usize * w..];
                    for ox in 0..wo {
                        let ix = (ox * STRIDE + kx) as isize - PAD as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[oy * wo + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(cols: &Array2<f64>, c: usize, h: usize, w: usize) -> Array2<f64> {
    let (ho, wo) = (out_size(h), out_size(w));
    let src = cols.as_slice().expect("contiguous columns");
    let mut x = Array2::<f64>::zeros((c, h * w));
    let xs = x.as_slice_mut().expect("contiguous output");
    for ch in 0..c {
        for ky in 0..K {
            for kx in 0..K {
                let row = (ch * K + ky) * K + kx;
                let s = &src[row * ho * wo..(row + 1) * ho * wo];
                for oy in 0..ho {
                    let iy = (oy * STRIDE + ky) as isize - PAD as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * STRIDE + kx) as isize - PAD as isize;
                        if ix >= 0 && ix < w as isize {
                            xs[ch * h * w + iy as usize * w + ix as usize] += s[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `c_out × (c_in·9)`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Tensors for ConvLayer {
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

/// Activations kept from the forward pass of one image.
pub struct ImageCache {
    cols: Vec<Array2<f64>>,
    acts: Vec<Array2<f64>>,
    dims: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder {
    pub layers: Vec<ConvLayer>,
}

impl ImageEncoder {
    /// He-normal weights, zero biases.
    pub fn init(channels: &[usize], rng: &mut impl Rng) -> Self {
        let mut c_in = 1;
        let layers = channels
            .iter()
            .map(|&c_out| {
                let fan_in = c_in * K * K;
                let layer = ConvLayer {
                    w: normal_array2(c_out, fan_in, (2.0 / fan_in as f64).sqrt(), rng),
                    b: Array1::zeros(c_out),
                };
                c_in = c_out;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    /// `x` holds one standardized single-channel image, row-major.
    pub fn forward(&self, x: &[f64], h: usize, w: usize) -> (Array1<f64>, ImageCache) {
        let mut a = Array2::from_shape_vec((1, h * w), x.to_vec()).expect("image length matches h*w");
        let (mut h, mut w) = (h, w);
        let mut cache = ImageCache {
            cols: Vec::with_capacity(self.layers.len()),
            acts: Vec::with_capacity(self.layers.len()),
            dims: Vec::with_capacity(self.layers.len()),
        };
        for layer in &self.layers {
            let cols = im2col(&a, h, w);
            let mut z = layer.w.dot(&cols);
            z += &layer.b.view().insert_axis(Axis(1));
            z.mapv_inplace(|v| v.max(0.0));
            cache.dims.push((h, w));
            cache.cols.push(cols);
            h = out_size(h);
            w = out_size(w);
            a = z;
            cache.acts.push(a.clone());
        }
        let feature = a.mean_axis(Axis(1)).expect("non-empty spatial map");
        (feature, cache)
    }

    pub fn features(&self, x: &[f64], h: usize, w: usize) -> Array1<f64> {
        self.forward(x, h, w).0
    }

    /// Accumulate gradients for one image given `dL/dfeature`.
    pub fn backward(&self, cache: &ImageCache, dfeat: &Array1<f64>, grad: &mut ImageEncoder) {
        let last = cache.acts.last().expect("at least one layer");
        let p = last.ncols() as f64;
        let mut da = Array2::from_shape_fn(last.raw_dim(), |(c, _)| dfeat[c] / p);
        for l in (0..self.layers.len()).rev() {
            let act = &cache.acts[l];
            let dz = ndarray::Zip::from(&da).and(act).map_collect(|&g, &a| if a > 0.0 { g } else { 0.0 });
            let g = &mut grad.layers[l];
            g.w += &dz.dot(&cache.cols[l].t());
            g.b += &dz.sum_axis(Axis(1));
            if l > 0 {
                let dcols = self.layers[l].w.t().dot(&dz);
                let (h, w) = cache.dims[l];
                da = col2im(&dcols, self.layers[l - 1].w.nrows(), h, w);
            }
        }
    }
}

impl Tensors for ImageEncoder {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("conv{}", i + 1), l.tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("conv{}", i + 1), l.tensors_mut()))
            .collect()
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Tensors::zeros_like).collect(),
        }
    }
}
