//! Line-delimited JSON manifests: one study per line.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use crate::error::{Error, Result};
use crate::triplet::DiseaseTriplet;

/// Where a study's pixels live.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageRef {
    Path(PathBuf),
    Inline(Arc<ImageTensor>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub id: String,
    pub image: ImageRef,
    pub report_text: String,
    pub gold_triplets: Option<Vec<DiseaseTriplet>>,
    pub gold_categories: Option<Vec<String>>,
}

impl Study {
    /// Decode the image. Missing or corrupt files are reported with the study id.
    pub fn load_image(&self) -> Result<ImageTensor> {
        match &self.image {
            ImageRef::Inline(img) => Ok(img.as_ref().clone()),
            ImageRef::Path(path) => ImageTensor::read(path).map_err(|e| Error::Image {
                id: self.id.clone(),
                message: format!("{}: {e}", path.display()),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub studies: Vec<Study>,
}

impl Corpus {
    pub fn new(studies: Vec<Study>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &studies {
            if s.id.is_empty() {
                return Err(Error::ManifestRecord {
                    line: 0,
                    message: "empty study id".into(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { studies })
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Study> {
        self.studies.iter()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    image: String,
    report: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_triplets: Option<Vec<DiseaseTriplet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_categories: Option<Vec<String>>,
}

/// Load a manifest. Relative image paths resolve against the manifest's
/// directory; images are not decoded until [`Study::load_image`].
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut studies = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::ManifestRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(Error::ManifestRecord {
                line: line_no,
                message: "empty id".into(),
            });
        }
        if rec.report.trim().is_empty() && rec.gold_triplets.is_none() {
            return Err(Error::ManifestRecord {
                line: line_no,
                message: "empty report without gold_triplets".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        let image_path = PathBuf::from(&rec.image);
        let image_path = if image_path.is_absolute() {
            image_path
        } else {
            base.join(image_path)
        };
        studies.push(Study {
            id: rec.id,
            image: ImageRef::Path(image_path),
            report_text: rec.report,
            gold_triplets: rec.gold_triplets,
            gold_categories: rec.gold_categories,
        });
    }
    Ok(Corpus { studies })
}

/// Write a manifest. Inline images are stored as sidecars under
/// `<manifest dir>/images/<id>.fgvl`; path images are written relative to the
/// manifest directory when possible.
pub fn write_manifest(corpus: &Corpus, path: &Path) -> Result<()> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for study in &corpus.studies {
        let image = match &study.image {
            ImageRef::Path(p) => p
                .strip_prefix(&base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned(),
            ImageRef::Inline(img) => {
                let rel = PathBuf::from("images").join(format!("{}.fgvl", study.id));
                let abs = base.join(&rel);
                if let Some(dir) = abs.parent() {
                    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                img.write_sidecar(&abs)?;
                rel.to_string_lossy().into_owned()
            }
        };
        let rec = Record {
            id: study.id.clone(),
            image,
            report: study.report_text.clone(),
            gold_triplets: study.gold_triplets.clone(),
            gold_categories: study.gold_categories.clone(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Serde(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
