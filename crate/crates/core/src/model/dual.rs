//! The two towers, their projections, and one forward/backward pass over a
//! labeled batch.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rayon::prelude::*;

use super::config::{LossMode, ModelConfig};
use super::image::ImageEncoder;
use super::layers::{normalize_rows, normalize_rows_backward, prefixed, Linear, Tensors};
use super::loss::{itm_loss, similarity_matrix};
use super::text::{TextEncoder, Vocab};
use crate::corpus::ImageTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub image: ImageEncoder,
    pub text: TextEncoder,
    pub proj_image: Linear,
    pub proj_text: Linear,
}

impl Tensors for ModelParams {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v = prefixed("image", self.image.tensors());
        v.extend(prefixed("text", self.text.tensors()));
        v.extend(prefixed("proj_image", self.proj_image.tensors()));
        v.extend(prefixed("proj_text", self.proj_text.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v = prefixed("image", self.image.tensors_mut());
        v.extend(prefixed("text", self.text.tensors_mut()));
        v.extend(prefixed("proj_image", self.proj_image.tensors_mut()));
        v.extend(prefixed("proj_text", self.proj_text.tensors_mut()));
        v
    }

    fn zeros_like(&self) -> Self {
        Self {
            image: self.image.zeros_like(),
            text: self.text.zeros_like(),
            proj_image: self.proj_image.zeros_like(),
            proj_text: self.proj_text.zeros_like(),
        }
    }
}

/// Everything needed to embed images and texts.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub pixel_mean: f64,
    pub pixel_std: f64,
    pub params: ModelParams,
}

/// Loss, gradients and the similarity matrix of one batch.
pub struct StepOutput {
    pub loss: f64,
    pub grads: ModelParams,
    pub similarity: Array2<f64>,
}

fn row_stack(rows: Vec<Array1<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.into_iter()).collect();
    Array2::from_shape_vec((n, width), flat).expect("rows share a width")
}

impl DualEncoder {
    pub fn init(config: &ModelConfig, vocab: Vocab, pixel_mean: f64, pixel_std: f64, rng: &mut impl Rng) -> Result<Self> {
        let problems = config.violations();
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        if !(pixel_std > 0.0 && pixel_std.is_finite() && pixel_mean.is_finite()) {
            return Err(Error::Config(format!("pixel statistics mean={pixel_mean} std={pixel_std}")));
        }
        let image = ImageEncoder::init(&config.conv_channels, rng);
        let text = TextEncoder::init(config.text_encoder, vocab.len(), config.d_txt, config.attention_heads, rng);
        let proj_image = Linear::init(config.d_img(), config.d_embed, rng);
        let proj_text = Linear::init(config.d_txt, config.d_embed, rng);
        Ok(Self {
            config: config.clone(),
            vocab,
            pixel_mean,
            pixel_std,
            params: ModelParams {
                image,
                text,
                proj_image,
                proj_text,
            },
        })
    }

    /// Shape check and standardization with the training pixel statistics.
    pub fn standardize(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        if image.height() != self.config.image_height || image.width() != self.config.image_width {
            return Err(Error::Shape(format!(
                "image is {}x{}, model expects {}x{}",
                image.height(),
                image.width(),
                self.config.image_height,
                self.config.image_width
            )));
        }
        Ok(image
            .values()
            .iter()
            .map(|&v| (v as f64 - self.pixel_mean) / self.pixel_std)
            .collect())
    }

    fn standardize_all(&self, images: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        images.iter().map(|im| self.standardize(im)).collect()
    }

    /// Pooled conv features before projection, `N × d_img`.
    pub fn image_features(&self, images: &[ImageTensor]) -> Result<Array2<f64>> {
        let xs = self.standardize_all(images)?;
        Ok(self.image_features_std(&xs))
    }

    fn image_features_std(&self, xs: &[Vec<f64>]) -> Array2<f64> {
        let (h, w) = (self.config.image_height, self.config.image_width);
        let rows: Vec<Array1<f64>> = xs.par_iter().map(|x| self.params.image.features(x, h, w)).collect();
        row_stack(rows, self.params.image.d_out())
    }

    /// Unit-norm image embeddings, `N × d`.
    pub fn encode_images(&self, images: &[ImageTensor]) -> Result<Array2<f64>> {
        let feats = self.image_features(images)?;
        self.project_images(&feats)
    }

    pub fn project_images(&self, feats: &Array2<f64>) -> Result<Array2<f64>> {
        if feats.nrows() == 0 {
            return Ok(Array2::zeros((0, self.config.d_embed)));
        }
        let z = self.params.proj_image.forward(feats);
        normalize_rows(&z)
            .map(|(u, _)| u)
            .map_err(|i| Error::Shape(format!("image embedding {i} has zero norm")))
    }

    /// Unit-norm text embeddings, `M × d`; an empty list gives `0 × d`.
    pub fn encode_texts<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Array2<f64>> {
        if texts.is_empty() {
            return Ok(Array2::zeros((0, self.config.d_embed)));
        }
        let rows: Vec<Array1<f64>> = texts
            .par_iter()
            .map(|t| self.params.text.features(&self.vocab.encode(t.as_ref())))
            .collect();
        let z = self.params.proj_text.forward(&row_stack(rows, self.params.text.d_out()));
        normalize_rows(&z)
            .map(|(u, _)| u)
            .map_err(|i| Error::Shape(format!("text embedding {i} has zero norm")))
    }

    /// Forward and backward over standardized images and label texts with
    /// targets `s`.
    pub fn step<S: AsRef<str> + Sync>(
        &self,
        images: &[&[f64]],
        texts: &[S],
        s: &Array2<f64>,
        mode: LossMode,
        temperature: f64,
    ) -> Result<StepOutput> {
        let (h, w) = (self.config.image_height, self.config.image_width);
        if let Some(bad) = images.iter().position(|x| x.len() != h * w) {
            return Err(Error::Shape(format!("image {bad} has {} values, expected {}", images[bad].len(), h * w)));
        }
        if s.dim() != (images.len(), texts.len()) {
            return Err(Error::Shape(format!(
                "targets are {:?} for {} images and {} texts",
                s.dim(),
                images.len(),
                texts.len()
            )));
        }
        let p = &self.params;
        let img_fwd: Vec<_> = images.par_iter().map(|x| p.image.forward(x, h, w)).collect();
        let ids: Vec<Vec<usize>> = texts.iter().map(|t| self.vocab.encode(t.as_ref())).collect();
        let txt_fwd: Vec<_> = ids.par_iter().map(|ids| p.text.forward(ids)).collect();

        let hi = row_stack(img_fwd.iter().map(|(f, _)| f.clone()).collect(), p.image.d_out());
        let ht = row_stack(txt_fwd.iter().map(|(f, _)| f.clone()).collect(), p.text.d_out());
        let zi = p.proj_image.forward(&hi);
        let zt = p.proj_text.forward(&ht);
        let (ui, ni) = normalize_rows(&zi).map_err(|i| Error::Shape(format!("image embedding {i} has zero norm")))?;
        let (ut, nt) = normalize_rows(&zt).map_err(|i| Error::Shape(format!("text embedding {i} has zero norm")))?;
        let y = similarity_matrix(&ui, &ut, temperature)?;
        let (loss, dy) = itm_loss(&y, s, mode)?;

        let mut grads = p.zeros_like();
        let dui = dy.dot(&ut) / temperature;
        let dut = dy.t().dot(&ui) / temperature;
        let dzi = normalize_rows_backward(&ui, &ni, &dui);
        let dzt = normalize_rows_backward(&ut, &nt, &dut);
        let dhi = p.proj_image.backward(&hi, &dzi, &mut grads.proj_image);
        let dht = p.proj_text.backward(&ht, &dzt, &mut grads.proj_text);

        // per-sample gradients are computed in parallel and summed in order
        let img_grads: Vec<ImageEncoder> = img_fwd
            .par_iter()
            .enumerate()
            .map(|(i, (_, cache))| {
                let mut g = p.image.zeros_like();
                p.image.backward(cache, &dhi.row(i).to_owned(), &mut g);
                g
            })
            .collect();
        for g in &img_grads {
            grads.image.add_assign(g);
        }
        for ((_, cache), d) in txt_fwd.iter().zip(dht.axis_iter(Axis(0))) {
            p.text.backward(cache, &d.to_owned(), &mut grads.text);
        }
        Ok(StepOutput {
            loss,
            grads,
            similarity: y,
        })
    }
}
