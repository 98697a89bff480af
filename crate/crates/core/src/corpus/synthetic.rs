//! Procedural attribute-composable image/report corpus.
//!
//! Every attribute name is bound to one drawing primitive. A category's images
//! are composites of its attributes' primitives, so two categories are as
//! confusable as their attribute sets overlap. Held-out categories are built
//! from attributes that also occur in training categories, which is what lets
//! an explanation-driven model score them without ever seeing their name.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use super::manifest::{Corpus, ImageRef, Study};
use crate::error::{Error, Result};
use crate::triplet::DiseaseTriplet;

/// Gold category of studies without findings.
pub const NORMAL_CATEGORY: &str = "normal";
/// Report text (and structured label) of studies without findings.
pub const NORMAL_REPORT: &str = "no acute findings";

const SEVERITIES: &[&str] = &["mild", "moderate", "severe"];
const LOCATIONS: &[&str] = &["left", "right", "bilateral"];
const BACKGROUND: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Blob,
    Speckle,
    Band,
    Gradient,
    Ring,
    Streaks,
}

/// Renderer registry: attribute name → primitive and the phrase used for it in
/// explanations.
pub fn attribute_renderer(name: &str) -> Option<(Primitive, &'static str)> {
    Some(match name {
        "opacity" | "blob" => (Primitive::Blob, "bright round spot"),
        "patchy" | "speckle" => (Primitive::Speckle, "patchy speckled texture"),
        "dark-band" | "band" => (Primitive::Band, "dark horizontal band"),
        "haze" | "gradient" => (Primitive::Gradient, "hazy vertical gradient"),
        "ring" => (Primitive::Ring, "thin ring outline"),
        "streaks" => (Primitive::Streaks, "diagonal linear streaks"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDef {
    pub name: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub attribute_vocab: Vec<String>,
    pub categories: Vec<CategoryDef>,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
    pub held_out_categories: Vec<String>,
    pub image_size: usize,
    pub normal_rate: f64,
    pub multi_label_rate: f64,
    pub noise_std: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let cat = |name: &str, attrs: &[&str]| CategoryDef {
            name: name.into(),
            attributes: attrs.iter().map(|a| a.to_string()).collect(),
        };
        Self {
            attribute_vocab: ["opacity", "patchy", "dark-band", "haze", "ring", "streaks"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            categories: vec![
                cat("syn-a", &["opacity", "patchy"]),
                cat("syn-b", &["dark-band", "haze"]),
                cat("syn-c", &["ring"]),
                cat("syn-d", &["opacity", "streaks"]),
                cat("syn-e", &["patchy", "haze"]),
                cat("syn-f", &["dark-band", "ring", "streaks"]),
                cat("syn-g", &["opacity", "haze"]),
                cat("syn-h", &["patchy", "ring"]),
            ],
            n_train: 2000,
            n_eval: 400,
            seed: 0,
            held_out_categories: vec!["syn-g".into(), "syn-h".into()],
            image_size: 64,
            normal_rate: 0.2,
            multi_label_rate: 0.15,
            noise_std: 0.03,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::SyntheticSpec(m));
        if self.categories.is_empty() {
            return err("no categories".into());
        }
        if self.image_size < 8 {
            return err(format!("image_size {} < 8", self.image_size));
        }
        for (name, rate) in [
            ("normal_rate", self.normal_rate),
            ("multi_label_rate", self.multi_label_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return err(format!("{name} {rate} outside [0, 1]"));
            }
        }
        if !(self.noise_std >= 0.0) {
            return err(format!("noise_std {} < 0", self.noise_std));
        }
        let mut names = std::collections::HashSet::new();
        for c in &self.categories {
            if !names.insert(c.name.as_str()) {
                return err(format!("duplicate category `{}`", c.name));
            }
            if c.attributes.is_empty() {
                return err(format!("category `{}` has no attributes", c.name));
            }
            for a in &c.attributes {
                if !self.attribute_vocab.contains(a) {
                    return err(format!(
                        "category `{}` uses attribute `{a}` outside attribute_vocab",
                        c.name
                    ));
                }
            }
        }
        for h in &self.held_out_categories {
            let Some(def) = self.category(h) else {
                return err(format!("held-out category `{h}` is not defined"));
            };
            for a in &def.attributes {
                let covered = self
                    .training_categories()
                    .iter()
                    .any(|t| t.attributes.contains(a));
                if !covered {
                    return err(format!(
                        "held-out `{h}` attribute `{a}` appears in no training category"
                    ));
                }
            }
        }
        if self.training_categories().is_empty() {
            return err("every category is held out".into());
        }
        Ok(())
    }

    pub fn category(&self, name: &str) -> Option<&CategoryDef> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn training_categories(&self) -> Vec<&CategoryDef> {
        self.categories
            .iter()
            .filter(|c| !self.held_out_categories.contains(&c.name))
            .collect()
    }

    /// Explanation text for a category, composed from its attribute phrases.
    pub fn explanation(&self, name: &str) -> Result<String> {
        let def = self
            .category(name)
            .ok_or_else(|| Error::UnknownCategory(name.into()))?;
        let phrases = def
            .attributes
            .iter()
            .map(|a| {
                attribute_renderer(a)
                    .map(|(_, p)| p)
                    .ok_or_else(|| Error::UnknownAttribute(a.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(phrases.join(" and "))
    }

    /// Training category sharing the most attributes with `held_out`; ties go
    /// to the earlier category.
    pub fn proxy_category(&self, held_out: &str) -> Option<&str> {
        let def = self.category(held_out)?;
        let mut best: Option<(&str, usize)> = None;
        for t in self.training_categories() {
            let overlap = t
                .attributes
                .iter()
                .filter(|a| def.attributes.contains(a))
                .count();
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((&t.name, overlap));
            }
        }
        best.map(|(n, _)| n)
    }
}

/// Generate `(train, eval)`. Train studies draw only from non-held-out
/// categories; eval studies draw from all categories.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<(Corpus, Corpus)> {
    spec.validate()?;
    for a in &spec.attribute_vocab {
        if attribute_renderer(a).is_none() {
            return Err(Error::UnknownAttribute(a.clone()));
        }
    }
    let train_cats: Vec<&CategoryDef> = spec.training_categories();
    let all_cats: Vec<&CategoryDef> = spec.categories.iter().collect();
    let train = (0..spec.n_train)
        .map(|i| generate_study(spec, "train", 1, i, &train_cats))
        .collect::<Result<Vec<_>>>()?;
    let eval = (0..spec.n_eval)
        .map(|i| generate_study(spec, "eval", 2, i, &all_cats))
        .collect::<Result<Vec<_>>>()?;
    Ok((Corpus::new(train)?, Corpus::new(eval)?))
}

fn study_rng(seed: u64, split: u64, index: usize) -> ChaCha8Rng {
    // splitmix64 finalizer over the tuple
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(split.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

struct Finding<'a> {
    def: &'a CategoryDef,
    severity: Option<&'static str>,
    location: Option<&'static str>,
}

fn generate_study(
    spec: &SyntheticSpec,
    split: &str,
    split_tag: u64,
    index: usize,
    cats: &[&CategoryDef],
) -> Result<Study> {
    let mut rng = study_rng(spec.seed, split_tag, index);
    let id = format!("{split}-{index:05}");
    let size = spec.image_size;
    let mut canvas = vec![BACKGROUND; size * size];

    let mut findings = Vec::new();
    if rng.random::<f64>() >= spec.normal_rate {
        let offset = (spec.seed as usize) % cats.len();
        let primary = cats[(index + offset) % cats.len()];
        let mut picked = vec![primary];
        if cats.len() > 1 && rng.random::<f64>() < spec.multi_label_rate {
            loop {
                let other = cats[rng.random_range(0..cats.len())];
                if other.name != primary.name {
                    picked.push(other);
                    break;
                }
            }
        }
        for def in picked {
            let severity = pick_optional(&mut rng, SEVERITIES);
            let location = pick_optional(&mut rng, LOCATIONS);
            findings.push(Finding {
                def,
                severity,
                location,
            });
        }
    }

    for f in &findings {
        let amplitude = match f.severity {
            Some("mild") => 0.6,
            Some("moderate") | None => 0.8,
            _ => 1.0,
        };
        let spans: Vec<(f64, f64)> = match f.location {
            Some("left") => vec![(0.12, 0.45)],
            Some("right") => vec![(0.55, 0.88)],
            Some(_) => vec![(0.12, 0.45), (0.55, 0.88)],
            None => {
                let c = rng.random_range(0.2..0.8);
                vec![(c - 0.15, c + 0.15)]
            }
        };
        for attr in &f.def.attributes {
            let (prim, _) =
                attribute_renderer(attr).ok_or_else(|| Error::UnknownAttribute(attr.clone()))?;
            for &(x0, x1) in &spans {
                let cx = rng.random_range(x0..x1);
                let cy = rng.random_range(0.3..0.7);
                draw(&mut canvas, size, prim, cx, cy, amplitude, &mut rng);
            }
        }
    }

    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).expect("noise_std validated");
        for v in canvas.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let values = canvas
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0) as f32)
        .collect();
    let image = ImageTensor::new(size, size, values)?;

    let (report, triplets, categories) = if findings.is_empty() {
        (NORMAL_REPORT.to_string(), Vec::new(), vec![NORMAL_CATEGORY.to_string()])
    } else {
        let mut sentences = Vec::new();
        let mut triplets = Vec::new();
        let mut categories = Vec::new();
        for f in &findings {
            let t = DiseaseTriplet::new(f.severity, f.location, &f.def.name)?;
            sentences.push(report_sentence(&t, rng.random_range(0..3)));
            categories.push(t.category().to_string());
            triplets.push(t);
        }
        (sentences.join(" "), triplets, categories)
    };

    Ok(Study {
        id,
        image: ImageRef::Inline(Arc::new(image)),
        report_text: report,
        gold_triplets: Some(triplets),
        gold_categories: Some(categories),
    })
}

fn pick_optional(rng: &mut ChaCha8Rng, options: &[&'static str]) -> Option<&'static str> {
    let k = rng.random_range(0..=options.len());
    options.get(k).copied()
}

fn report_sentence(t: &DiseaseTriplet, variant: u32) -> String {
    let phrase = [t.severity(), t.location(), Some(t.category())]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>()
        .join(" ");
    match variant {
        0 => format!("There is {phrase}."),
        1 => format!("Findings consistent with {phrase}."),
        _ => {
            let mut s = phrase;
            if let Some(first) = s.get_mut(0..1) {
                first.make_ascii_uppercase();
            }
            format!("{s} is seen.")
        }
    }
}

fn add(canvas: &mut [f64], size: usize, x: i64, y: i64, v: f64) {
    if x >= 0 && y >= 0 && (x as usize) < size && (y as usize) < size {
        canvas[y as usize * size + x as usize] += v;
    }
}

fn draw(
    canvas: &mut [f64],
    size: usize,
    prim: Primitive,
    cx: f64,
    cy: f64,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) {
    let s = size as f64;
    let (px, py) = (cx * s, cy * s);
    match prim {
        Primitive::Blob => {
            let sigma = rng.random_range(0.06..0.09) * s;
            for y in 0..size {
                for x in 0..size {
                    let d2 = (x as f64 + 0.5 - px).powi(2) + (y as f64 + 0.5 - py).powi(2);
                    canvas[y * size + x] += 0.45 * amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        Primitive::Speckle => {
            let dot = ((s / 64.0) * 2.0).round().max(1.0) as i64;
            for _ in 0..30 {
                let r = rng.random_range(0.0..0.15) * s;
                let theta = rng.random_range(0.0..2.0 * PI);
                let x0 = (px + r * theta.cos()) as i64;
                let y0 = (py + r * theta.sin()) as i64;
                for dy in 0..dot {
                    for dx in 0..dot {
                        add(canvas, size, x0 + dx, y0 + dy, 0.35 * amplitude);
                    }
                }
            }
        }
        Primitive::Band => {
            let half_w = 0.17 * s;
            let half_h = 0.03 * s;
            for y in 0..size {
                for x in 0..size {
                    let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                    if (fx - px).abs() <= half_w && (fy - py).abs() <= half_h {
                        canvas[y * size + x] -= 0.25 * amplitude;
                    }
                }
            }
        }
        Primitive::Gradient => {
            let half_w = 0.17 * s;
            let half_h = 0.2 * s;
            for y in 0..size {
                for x in 0..size {
                    let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                    if (fx - px).abs() <= half_w && (fy - py).abs() <= half_h {
                        let t = (fy - (py - half_h)) / (2.0 * half_h);
                        canvas[y * size + x] += 0.35 * amplitude * t;
                    }
                }
            }
        }
        Primitive::Ring => {
            let radius = rng.random_range(0.08..0.11) * s;
            let half_t = 0.6 * (s / 64.0).max(1.0);
            for y in 0..size {
                for x in 0..size {
                    let d = ((x as f64 + 0.5 - px).powi(2) + (y as f64 + 0.5 - py).powi(2)).sqrt();
                    if (d - radius).abs() <= half_t {
                        canvas[y * size + x] += 0.45 * amplitude;
                    }
                }
            }
        }
        Primitive::Streaks => {
            let len = 0.3 * s;
            let gap = 0.05 * s;
            let steps = (len * 2.0) as usize;
            for k in -1i64..=1 {
                let ox = px + k as f64 * gap;
                for i in 0..=steps {
                    let t = i as f64 / steps as f64 - 0.5;
                    // truncated 1/sqrt(2), kept so generated corpora stay byte-identical
                    #[allow(clippy::approx_constant)]
                    let x = ox + t * len * 0.7071;
                    #[allow(clippy::approx_constant)]
                    let y = py + t * len * 0.7071;
                    add(canvas, size, x as i64, y as i64, 0.35 * amplitude);
                }
            }
        }
    }
}
