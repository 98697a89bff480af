//! Vocabulary and the label-text tower.

use std::collections::{BTreeSet, HashMap};

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::config::TextEncoderKind;
use super::layers::{normal_array2, Tensors};
use crate::knowledge::MASK_TOKEN;

pub const UNK_TOKEN: &str = "[UNK]";
pub const UNK_ID: usize = 0;
pub const MASK_ID: usize = 1;

/// Word vocabulary with reserved ids for unknown and mask tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercased whitespace tokens with surrounding punctuation stripped.
/// `[MASK]` passes through untouched.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            if raw == MASK_TOKEN {
                return Some(MASK_TOKEN.to_string());
            }
            let t = raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
            (!t.is_empty()).then_some(t)
        })
        .collect()
}

impl Vocab {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts
            .into_iter()
            .flat_map(word_tokens)
            .filter(|w| w != MASK_TOKEN && w != UNK_TOKEN)
            .collect();
        Self::from_words(words)
    }

    /// `words` excludes the reserved tokens, which are always ids 0 and 1.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec![UNK_TOKEN.to_string(), MASK_TOKEN.to_string()];
        all.extend(words.into_iter().filter(|w| w != MASK_TOKEN && w != UNK_TOKEN));
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Words excluding the reserved ids.
    pub fn words(&self) -> &[String] {
        &self.words[2..]
    }

    /// Never empty: a text without tokens encodes as a single unknown.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = word_tokens(text)
            .iter()
            .map(|t| self.index.get(t).copied().unwrap_or(UNK_ID))
            .collect();
        if ids.is_empty() {
            vec![UNK_ID]
        } else {
            ids
        }
    }
}

pub struct TextCache {
    ids: Vec<usize>,
    attention: Option<AttnCache>,
}

struct AttnCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    heads_out: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub heads: usize,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    /// `vocab × d_txt`.
    pub embedding: Array2<f64>,
    pub attention: Option<Attention>,
}

fn softmax_rows(mut a: Array2<f64>) -> Array2<f64> {
    for mut row in a.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    a
}

impl TextEncoder {
    pub fn init(kind: TextEncoderKind, vocab_len: usize, d: usize, heads: usize, rng: &mut impl Rng) -> Self {
        let embedding = normal_array2(vocab_len, d, 1.0, rng);
        let attention = match kind {
            TextEncoderKind::MeanPool => None,
            TextEncoderKind::Attention => {
                let std = (1.0 / d as f64).sqrt();
                Some(Attention {
                    heads,
                    wq: normal_array2(d, d, std, rng),
                    wk: normal_array2(d, d, std, rng),
                    wv: normal_array2(d, d, std, rng),
                    wo: normal_array2(d, d, std, rng),
                })
            }
        };
        Self { embedding, attention }
    }

    pub fn d_out(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn forward(&self, ids: &[usize]) -> (Array1<f64>, TextCache) {
        let x = self.embedding.select(Axis(0), ids);
        let Some(att) = &self.attention else {
            let feat = x.mean_axis(Axis(0)).expect("non-empty token list");
            return (
                feat,
                TextCache {
                    ids: ids.to_vec(),
                    attention: None,
                },
            );
        };
        let d = x.ncols();
        let dh = d / att.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = x.dot(&att.wq);
        let k = x.dot(&att.wk);
        let v = x.dot(&att.wv);
        let mut heads_out = Array2::<f64>::zeros(x.raw_dim());
        let mut probs = Vec::with_capacity(att.heads);
        for h in 0..att.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            let p = softmax_rows(scores);
            heads_out.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        let out = heads_out.dot(&att.wo) + &x;
        let feat = out.mean_axis(Axis(0)).expect("non-empty token list");
        (
            feat,
            TextCache {
                ids: ids.to_vec(),
                attention: Some(AttnCache {
                    x,
                    q,
                    k,
                    v,
                    probs,
                    heads_out,
                }),
            },
        )
    }

    pub fn features(&self, ids: &[usize]) -> Array1<f64> {
        self.forward(ids).0
    }

    pub fn backward(&self, cache: &TextCache, dfeat: &Array1<f64>, grad: &mut TextEncoder) {
        let t = cache.ids.len();
        let dout = Array2::from_shape_fn((t, dfeat.len()), |(_, c)| dfeat[c] / t as f64);
        let dx = match (&self.attention, &cache.attention) {
            (None, _) => dout,
            (Some(att), Some(c)) => {
                let g = grad.attention.as_mut().expect("gradient has attention weights");
                let d = c.x.ncols();
                let dh = d / att.heads;
                let scale = 1.0 / (dh as f64).sqrt();
                g.wo += &c.heads_out.t().dot(&dout);
                let dheads = dout.dot(&att.wo.t());
                let mut dq = Array2::<f64>::zeros(c.q.raw_dim());
                let mut dk = Array2::<f64>::zeros(c.k.raw_dim());
                let mut dv = Array2::<f64>::zeros(c.v.raw_dim());
                for h in 0..att.heads {
                    let cols = s![.., h * dh..(h + 1) * dh];
                    let p = &c.probs[h];
                    let dho = dheads.slice(cols);
                    dv.slice_mut(cols).assign(&p.t().dot(&dho));
                    let dp = dho.dot(&c.v.slice(cols).t());
                    let row_dot = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ds = p * &(&dp - &row_dot) * scale;
                    dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                    dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
                }
                g.wq += &c.x.t().dot(&dq);
                g.wk += &c.x.t().dot(&dk);
                g.wv += &c.x.t().dot(&dv);
                dout + dq.dot(&att.wq.t()) + dk.dot(&att.wk.t()) + dv.dot(&att.wv.t())
            }
            (Some(_), None) => unreachable!("cache built by a different encoder"),
        };
        for (row, &id) in dx.axis_iter(Axis(0)).zip(&cache.ids) {
            let mut target = grad.embedding.row_mut(id);
            target += &row;
        }
    }
}

impl Tensors for TextEncoder {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view().into_dyn())];
        if let Some(a) = &self.attention {
            out.push(("attn.wq".into(), a.wq.view().into_dyn()));
            out.push(("attn.wk".into(), a.wk.view().into_dyn()));
            out.push(("attn.wv".into(), a.wv.view().into_dyn()));
            out.push(("attn.wo".into(), a.wo.view().into_dyn()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view_mut().into_dyn())];
        if let Some(a) = &mut self.attention {
            out.push(("attn.wq".into(), a.wq.view_mut().into_dyn()));
            out.push(("attn.wk".into(), a.wk.view_mut().into_dyn()));
            out.push(("attn.wv".into(), a.wv.view_mut().into_dyn()));
            out.push(("attn.wo".into(), a.wo.view_mut().into_dyn()));
        }
        out
    }

    fn zeros_like(&self) -> Self {
        Self {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            attention: self.attention.as_ref().map(|a| Attention {
                heads: a.heads,
                wq: Array2::zeros(a.wq.raw_dim()),
                wk: Array2::zeros(a.wk.raw_dim()),
                wv: Array2::zeros(a.wv.raw_dim()),
                wo: Array2::zeros(a.wo.raw_dim()),
            }),
        }
    }
}
