//! Glue from a [`RunConfig`] to corpora, dictionary, similarity provider and
//! a trained checkpoint.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{validate_config, RunConfig};
use crate::corpus::{generate_synthetic_corpus, load_manifest, Corpus, ImageTensor, NORMAL_CATEGORY};
use crate::error::{Error, Result};
use crate::evaluator::{
    retrieval_eval, unseen_category_eval, zero_shot_report, CategoryLibrary, EvalReport, RetrievalStyle, UnseenMode,
};
use crate::extractor::Lexicon;
use crate::knowledge::{KnowledgeDictionary, LookupPolicy};
use crate::model::{render_mode, train, DualEncoder, Switches, TrainExample, TrainOutput};
use crate::triplet::DiseaseTriplet;

pub struct Datasets {
    pub train: Corpus,
    pub eval: Corpus,
}

/// One line of a triplet file. Extra fields (source, error, ...) are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub id: String,
    pub triplets: Vec<DiseaseTriplet>,
}

pub fn ensure_valid(config: &RunConfig) -> Result<()> {
    let problems = validate_config(config);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

pub fn load_datasets(config: &RunConfig) -> Result<Datasets> {
    match (&config.train_manifest, &config.eval_manifest) {
        (Some(train), Some(eval)) => Ok(Datasets {
            train: load_manifest(train)?,
            eval: load_manifest(eval)?,
        }),
        (Some(_), None) => Err(Error::Config("eval_manifest is required with train_manifest".into())),
        (None, _) => {
            let (train, eval) = generate_synthetic_corpus(&config.synthetic)?;
            Ok(Datasets { train, eval })
        }
    }
}

pub fn load_dictionary(config: &RunConfig) -> Result<KnowledgeDictionary> {
    match &config.dictionary {
        Some(path) => KnowledgeDictionary::load(path),
        None => Ok(KnowledgeDictionary::shipped()),
    }
}

pub fn load_triplets(path: &Path) -> Result<HashMap<String, Vec<DiseaseTriplet>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TripletRecord = serde_json::from_str(&line).map_err(|e| Error::ManifestRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(rec.id, rec.triplets);
    }
    Ok(out)
}

/// Categories named by a corpus, from gold categories where present and
/// triplets otherwise. Normal studies contribute nothing.
pub fn corpus_categories(corpus: &Corpus) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in corpus.iter() {
        if let Some(cats) = &s.gold_categories {
            out.extend(cats.iter().filter(|c| *c != NORMAL_CATEGORY).cloned());
        } else if let Some(ts) = &s.gold_triplets {
            out.extend(ts.iter().map(|t| t.category().to_string()));
        }
    }
    out
}

/// Gold category lists per study; studies without findings are "normal".
pub fn sample_categories(corpus: &Corpus) -> Result<Vec<Vec<String>>> {
    corpus
        .iter()
        .map(|s| {
            if let Some(c) = &s.gold_categories {
                Ok(c.clone())
            } else if let Some(ts) = &s.gold_triplets {
                Ok(if ts.is_empty() {
                    vec![NORMAL_CATEGORY.to_string()]
                } else {
                    ts.iter().map(|t| t.category().to_string()).collect()
                })
            } else {
                Err(Error::NoLabels(s.id.clone()))
            }
        })
        .collect()
}

/// Train on `train` as the configuration says. Extracted triplets, when the
/// configuration names a file, take precedence over gold triplets.
pub fn pretrain(config: &RunConfig, train_corpus: &Corpus, dict: &KnowledgeDictionary) -> Result<TrainOutput> {
    ensure_valid(config)?;
    let extracted = config.triplets.as_deref().map(load_triplets).transpose()?;
    let examples = TrainExample::from_corpus(train_corpus, extracted.as_ref())?;
    let provider = config.similarity.build(dict, &Lexicon::default());
    train(&examples, dict, provider.as_ref(), &config.model, &config.train)
}

/// Decoded images of a corpus, in corpus order.
pub fn load_images(corpus: &Corpus) -> Result<Vec<ImageTensor>> {
    corpus.iter().map(|s| s.load_image()).collect()
}

/// Zero-shot report over `classes`, scoring each against texts rendered the
/// way the checkpoint was trained.
pub fn zero_shot_eval(
    model: &DualEncoder,
    switches: &Switches,
    eval: &Corpus,
    classes: &[String],
    dict: &KnowledgeDictionary,
) -> Result<EvalReport> {
    let library = CategoryLibrary::from_categories(classes, render_mode(switches).into())?;
    zero_shot_report(
        model,
        &load_images(eval)?,
        &sample_categories(eval)?,
        &library,
        dict,
        LookupPolicy::Fallback,
    )
}

/// Held-out categories of a synthetic run in the given query mode.
pub fn unseen_eval(
    config: &RunConfig,
    model: &DualEncoder,
    train: &Corpus,
    eval: &Corpus,
    dict: &KnowledgeDictionary,
    mode: UnseenMode,
) -> Result<EvalReport> {
    let spec = &config.synthetic;
    let proxies: BTreeMap<String, String> = spec
        .held_out_categories
        .iter()
        .filter_map(|h| spec.proxy_category(h).map(|p| (h.clone(), p.to_string())))
        .collect();
    unseen_category_eval(
        model,
        &load_images(eval)?,
        &sample_categories(eval)?,
        &spec.held_out_categories,
        &corpus_categories(train),
        &proxies,
        dict,
        mode,
        config.seed(),
    )
}

/// Precision@k of image→report retrieval over the eval corpus.
pub fn retrieval(
    model: &DualEncoder,
    eval: &Corpus,
    dict: &KnowledgeDictionary,
    style: RetrievalStyle,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    let triplets: Vec<Vec<DiseaseTriplet>> = eval
        .iter()
        .map(|s| s.gold_triplets.clone().ok_or_else(|| Error::NoLabels(s.id.clone())))
        .collect::<Result<_>>()?;
    retrieval_eval(
        model,
        &load_images(eval)?,
        &triplets,
        &sample_categories(eval)?,
        dict,
        style,
        ks,
    )
}
