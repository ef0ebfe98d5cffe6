//! Trained model document, the training pipeline and per-frame predictors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{activity_subtable, train_naive, LinearActivityClassifier, OneLevelTracker};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureBlocks, FeatureExtractor};
use crate::gmm::{build_bank, ActivitySamples, BankOptions, EmOptions, SubActivityBank};
use crate::hog::CameraIntrinsics;
use crate::memm::{
    estimate_transitions, structure_step, DetectorConfig, DetectorState, LabeledPosteriors, LogTables,
    ManualActivityTransitions, TransitionTables, NEUTRAL,
};
use crate::skeleton_io::{FrameImages, LabeledSequence, Location, SkeletonFrame};

pub const MODEL_VERSION: u32 = 1;

/// Everything needed to run all three detectors at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    pub location: Location,
    /// Activities in model order; neutral follows implicitly.
    pub activities: Vec<String>,
    pub bank: SubActivityBank,
    pub tables: TransitionTables,
    pub naive: LinearActivityClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub features: FeatureBlocks,
    pub intrinsics: CameraIntrinsics,
    pub detector: DetectorConfig,
    /// The hand-set activity transition values the tables were built from.
    pub manual_transitions: ManualActivityTransitions,
    pub locations: Vec<LocationModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationSummary {
    pub location: Location,
    pub sample_counts: Vec<(String, usize)>,
    pub em_log_likelihoods: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hierarchical,
    Naive,
    OneLevel,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Hierarchical, ModelKind::Naive, ModelKind::OneLevel];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Hierarchical => "hierarchical",
            ModelKind::Naive => "naive",
            ModelKind::OneLevel => "one_level",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind {s:?}")))
    }
}

/// Feature vectors of every frame, computed in parallel over sequences.
pub fn featurize_all(
    sequences: &[LabeledSequence],
    blocks: &FeatureBlocks,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<Vec<Vec<f64>>>> {
    sequences
        .par_iter()
        .map(|seq| {
            let mut ex = FeatureExtractor::new(*blocks, *intrinsics);
            seq.frames
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let images = seq.images.as_ref().map(|im| im.get(i)).transpose()?;
                    ex.push(f, images.as_deref())?.to_vec(blocks)
                })
                .collect()
        })
        .collect()
}

/// Trains every location model from labeled sequences. Random sequences are
/// ignored; mirroring, if wanted, is the caller's job.
pub fn train(sequences: &[LabeledSequence], config: &RunConfig) -> Result<(ModelFile, Vec<LocationSummary>)> {
    config.validate()?;
    let labeled: Vec<&LabeledSequence> = sequences.iter().filter(|s| !s.label.is_random()).collect();
    if labeled.is_empty() {
        return Err(Error::MissingActivityData("no labeled training sequences".into()));
    }
    let owned: Vec<LabeledSequence> = labeled.iter().map(|s| (*s).clone()).collect();
    let features = featurize_all(&owned, &config.features, &config.intrinsics)?;
    train_featurized(&owned, &features, config)
}

/// As [`train`], with features already computed for each sequence.
pub fn train_featurized(
    sequences: &[LabeledSequence],
    features: &[Vec<Vec<f64>>],
    config: &RunConfig,
) -> Result<(ModelFile, Vec<LocationSummary>)> {
    config.validate()?;
    let mut activities: Vec<(String, Vec<Location>)> = Vec::new();
    for seq in sequences {
        let Some(name) = seq.label.activity() else { continue };
        match activities.iter_mut().find(|a| a.0 == name) {
            Some(entry) => {
                if !entry.1.contains(&seq.location) {
                    entry.1.push(seq.location);
                }
            }
            None => activities.push((name.to_string(), vec![seq.location])),
        }
    }
    activities.sort();
    activities.iter_mut().for_each(|a| a.1.sort());
    if activities.is_empty() {
        return Err(Error::MissingActivityData("no labeled training sequences".into()));
    }

    let samples: Vec<ActivitySamples> = activities
        .iter()
        .map(|(name, locations)| ActivitySamples {
            activity: name.clone(),
            locations: locations.clone(),
            samples: sequences
                .iter()
                .zip(features)
                .filter(|(s, _)| s.label.activity() == Some(name.as_str()))
                .flat_map(|(_, f)| f.iter().cloned())
                .collect(),
        })
        .collect();

    let mut locations: Vec<Location> = match config.location {
        Some(l) => vec![l],
        None => activities.iter().flat_map(|a| a.1.iter().copied()).collect(),
    };
    locations.sort();
    locations.dedup();

    let bank_opts = BankOptions {
        clusters_per_activity: config.clusters_per_activity,
        em: EmOptions::default(),
        seed: config.seed,
    };
    let mut models = Vec::new();
    let mut summaries = Vec::new();
    for location in locations {
        let in_location: Vec<String> = activities
            .iter()
            .filter(|a| a.1.contains(&location))
            .map(|a| a.0.clone())
            .collect();
        if in_location.is_empty() {
            return Err(Error::MissingActivityData(format!("no activity recorded at {location}")));
        }
        let bank = build_bank(&samples, location, &bank_opts)?;

        let mut soft = Vec::new();
        let mut naive_x = Vec::new();
        let mut naive_y = Vec::new();
        for (seq, feats) in sequences.iter().zip(features) {
            let Some(name) = seq.label.activity() else { continue };
            if !in_location.iter().any(|a| a == name) {
                continue;
            }
            soft.push(LabeledPosteriors {
                activity: name.to_string(),
                posteriors: bank.soft_labels(feats)?,
            });
            naive_x.extend(feats.iter().cloned());
            naive_y.extend(std::iter::repeat_n(name.to_string(), feats.len()));
        }
        let tables = estimate_transitions(
            &soft,
            &in_location,
            &bank.prior(),
            &config.manual_transitions,
            config.transition_floor,
        )?;
        let naive = train_naive(&naive_x, &naive_y, &config.svm())?;

        summaries.push(LocationSummary {
            location,
            sample_counts: samples
                .iter()
                .filter(|s| in_location.contains(&s.activity))
                .map(|s| (s.activity.clone(), s.samples.len()))
                .collect(),
            em_log_likelihoods: bank.fit_log_likelihoods.clone(),
        });
        models.push(LocationModel {
            location,
            activities: in_location,
            bank,
            tables,
            naive,
        });
    }
    Ok((
        ModelFile {
            version: MODEL_VERSION,
            features: config.features,
            intrinsics: config.intrinsics,
            detector: config.detector(),
            manual_transitions: config.manual_transitions,
            locations: models,
        },
        summaries,
    ))
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)?;
        if model.version != MODEL_VERSION {
            return Err(Error::InvalidModel(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                model.version
            )));
        }
        for loc in &model.locations {
            loc.tables.validate()?;
            if loc.bank.len() != loc.tables.num_sub_activities() {
                return Err(Error::InvalidModel(format!(
                    "{}: bank has {} clusters but tables expect {}",
                    loc.location,
                    loc.bank.len(),
                    loc.tables.num_sub_activities()
                )));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn location(&self, location: Location) -> Result<&LocationModel> {
        self.locations
            .iter()
            .find(|m| m.location == location)
            .ok_or_else(|| Error::InvalidConfig(format!("model has no {location} location")))
    }

    /// The location model to use when none is named: the only one, if unique.
    pub fn sole_location(&self) -> Result<&LocationModel> {
        match self.locations.as_slice() {
            [only] => Ok(only),
            _ => Err(Error::InvalidConfig(
                "model covers several locations; name one explicitly".into(),
            )),
        }
    }
}

impl LocationModel {
    /// Output labels of a model kind, in posterior order.
    pub fn labels(&self, kind: ModelKind) -> Vec<String> {
        match kind {
            ModelKind::Hierarchical => {
                let mut l = self.activities.clone();
                l.push(NEUTRAL.to_string());
                l
            }
            ModelKind::Naive | ModelKind::OneLevel => self.naive.classes.clone(),
        }
    }
}

/// Per-frame decision and the posterior it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FramePrediction {
    pub frame_index: u64,
    pub activity: String,
    pub posterior: Vec<f64>,
}

enum PredictorState {
    Hierarchical {
        tables: Box<LogTables>,
        state: DetectorState,
        config: DetectorConfig,
    },
    Naive,
    OneLevel(OneLevelTracker),
}

/// Turns a stream of feature vectors into decisions for one model kind.
pub struct Predictor<'m> {
    model: &'m LocationModel,
    labels: Vec<String>,
    state: PredictorState,
}

impl<'m> Predictor<'m> {
    pub fn new(model: &'m LocationModel, kind: ModelKind, config: DetectorConfig) -> Self {
        let state = match kind {
            ModelKind::Hierarchical => PredictorState::Hierarchical {
                tables: Box::new(LogTables::new(&model.tables)),
                state: DetectorState::new(model.tables.num_activities()),
                config,
            },
            ModelKind::Naive => PredictorState::Naive,
            ModelKind::OneLevel => {
                let n = model.naive.num_classes();
                let order: Vec<usize> = model
                    .naive
                    .classes
                    .iter()
                    .map(|c| model.activities.iter().position(|a| a == c))
                    .collect::<Option<_>>()
                    .unwrap_or_else(|| (0..n).collect());
                let sub = activity_subtable(&model.tables.act_trans);
                let trans = order
                    .iter()
                    .map(|&k| order.iter().map(|&j| sub[k][j]).collect())
                    .collect();
                PredictorState::OneLevel(OneLevelTracker::new(trans))
            }
        };
        Self {
            model,
            labels: model.labels(kind),
            state,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Returns the chosen label index and the posterior over labels.
    pub fn push(&mut self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        match &mut self.state {
            PredictorState::Hierarchical { tables, state, config } => {
                let lp = self.model.bank.log_posterior(x)?;
                let out = structure_step(state, &lp, tables, config)?;
                Ok((out.activity, out.posterior))
            }
            PredictorState::Naive => {
                let best = self.model.naive.predict(x)?;
                Ok((best, self.model.naive.posterior(x)?))
            }
            PredictorState::OneLevel(tracker) => {
                let p = self.model.naive.posterior(x)?;
                let alpha = tracker.step(&p)?.to_vec();
                let best = alpha
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                    .0;
                Ok((best, alpha))
            }
        }
    }
}

/// Feature extraction plus a [`Predictor`], fed one skeleton frame at a time.
pub struct StreamDetector<'m> {
    extractor: FeatureExtractor,
    blocks: FeatureBlocks,
    predictor: Predictor<'m>,
}

impl<'m> StreamDetector<'m> {
    pub fn new(file: &ModelFile, model: &'m LocationModel, kind: ModelKind, config: DetectorConfig) -> Self {
        Self {
            extractor: FeatureExtractor::new(file.features, file.intrinsics),
            blocks: file.features,
            predictor: Predictor::new(model, kind, config),
        }
    }

    pub fn labels(&self) -> &[String] {
        self.predictor.labels()
    }

    pub fn push(&mut self, frame: &SkeletonFrame, images: Option<&FrameImages>) -> Result<FramePrediction> {
        let x = self.extractor.push(frame, images)?.to_vec(&self.blocks)?;
        let (best, posterior) = self.predictor.push(&x)?;
        Ok(FramePrediction {
            frame_index: frame.frame_index,
            activity: self.predictor.labels()[best].clone(),
            posterior,
        })
    }
}

/// Runs one model kind over precomputed features of a sequence.
pub fn predict_features(
    model: &LocationModel,
    kind: ModelKind,
    config: DetectorConfig,
    features: &[Vec<f64>],
) -> Result<Vec<String>> {
    let mut p = Predictor::new(model, kind, config);
    features
        .iter()
        .map(|x| p.push(x).map(|(best, _)| p.labels()[best].clone()))
        .collect()
}
