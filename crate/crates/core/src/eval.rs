//! Cross-validation splits, frame-level scoring and report assembly.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::memm::NEUTRAL;
use crate::model::{featurize_all, predict_features, train_featurized, ModelKind};
use crate::skeleton_io::{mirror_sequence, LabeledSequence, Location, RANDOM_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    NewPerson,
    HaveSeen,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::NewPerson => "new_person",
            Setting::HaveSeen => "have_seen",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "new_person" => Ok(Setting::NewPerson),
            "have_seen" => Ok(Setting::HaveSeen),
            _ => Err(Error::InvalidConfig(format!("unknown setting {s:?}"))),
        }
    }
}

/// Subjects in first-appearance order.
pub fn subjects(dataset: &[LabeledSequence]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in dataset {
        if !out.contains(&s.subject_id) {
            out.push(s.subject_id.clone());
        }
    }
    out
}

/// A contiguous run of one dataset sequence, possibly mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Piece {
    seq: usize,
    start: usize,
    end: usize,
    mirrored: bool,
}

impl Piece {
    fn whole(seq: usize, s: &LabeledSequence) -> Self {
        Piece {
            seq,
            start: 0,
            end: s.len(),
            mirrored: false,
        }
    }

    fn materialize(&self, dataset: &[LabeledSequence]) -> LabeledSequence {
        let s = &dataset[self.seq];
        let part = if self.start == 0 && self.end == s.len() {
            s.clone()
        } else {
            s.slice(self.start, self.end)
        };
        if self.mirrored {
            mirror_sequence(&part)
        } else {
            part
        }
    }
}

fn with_mirrors(pieces: impl Iterator<Item = Piece>) -> Vec<Piece> {
    pieces
        .flat_map(|p| [p, Piece { mirrored: true, ..p }])
        .collect()
}

fn new_person_pieces(dataset: &[LabeledSequence], held_out: &str) -> (Vec<Piece>, Vec<Piece>) {
    let train = with_mirrors(
        dataset
            .iter()
            .enumerate()
            .filter(|(_, s)| s.subject_id != held_out && !s.label.is_random())
            .map(|(i, s)| Piece::whole(i, s)),
    );
    let test = dataset
        .iter()
        .enumerate()
        .filter(|(_, s)| s.subject_id == held_out)
        .map(|(i, s)| Piece::whole(i, s))
        .collect();
    (train, test)
}

fn have_seen_pieces(dataset: &[LabeledSequence], subject: &str) -> (Vec<Piece>, Vec<Piece>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        let whole = Piece::whole(i, s);
        if s.subject_id != subject {
            if !s.label.is_random() {
                train.push(whole);
            }
        } else if s.label.is_random() {
            test.push(whole);
        } else {
            let mid = s.len() / 2;
            train.push(Piece { end: mid, ..whole });
            test.push(Piece { start: mid, ..whole });
        }
    }
    let nonempty = |p: &Piece| p.end > p.start;
    (
        with_mirrors(train.into_iter().filter(nonempty)),
        test.into_iter().filter(nonempty).collect(),
    )
}

fn fold_pieces(dataset: &[LabeledSequence], setting: Setting, subject: &str) -> (Vec<Piece>, Vec<Piece>) {
    match setting {
        Setting::NewPerson => new_person_pieces(dataset, subject),
        Setting::HaveSeen => have_seen_pieces(dataset, subject),
    }
}

fn materialize_all(dataset: &[LabeledSequence], pieces: &[Piece]) -> Vec<LabeledSequence> {
    pieces.iter().map(|p| p.materialize(dataset)).collect()
}

/// Leave-one-subject-out: train on every other subject's labeled sequences
/// and their mirror images, test on all of the held-out subject's sequences.
pub fn split_new_person(
    dataset: &[LabeledSequence],
    held_out_subject: &str,
) -> (Vec<LabeledSequence>, Vec<LabeledSequence>) {
    let (train, test) = new_person_pieces(dataset, held_out_subject);
    (materialize_all(dataset, &train), materialize_all(dataset, &test))
}

/// The subject's labeled sequences are cut at their temporal midpoint; first
/// halves (with mirrors) join everyone else's data for training and second
/// halves are tested. The subject's random sequences are tested whole. The
/// split is deterministic, so `seed` only exists to keep the fold signature
/// uniform.
pub fn split_have_seen(
    dataset: &[LabeledSequence],
    subject: &str,
    _seed: u64,
) -> (Vec<LabeledSequence>, Vec<LabeledSequence>) {
    let (train, test) = have_seen_pieces(dataset, subject);
    (materialize_all(dataset, &train), materialize_all(dataset, &test))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Ground-truth activities followed by `random`.
    pub rows: Vec<String>,
    /// Predicted activities followed by `neutral`.
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(activities: &[String]) -> Self {
        let mut rows = activities.to_vec();
        rows.push(RANDOM_LABEL.to_string());
        let mut cols = activities.to_vec();
        cols.push(NEUTRAL.to_string());
        let counts = vec![vec![0; cols.len()]; rows.len()];
        Self { rows, cols, counts }
    }

    pub fn num_activities(&self) -> usize {
        self.cols.len() - 1
    }

    /// Counts one frame. Truth `None` means a random frame.
    pub fn add(&mut self, truth: Option<&str>, predicted: &str) -> Result<()> {
        let r = match truth {
            Some(t) => self.rows[..self.num_activities()]
                .iter()
                .position(|a| a == t)
                .ok_or_else(|| Error::InvalidConfig(format!("activity {t} is not scored here")))?,
            None => self.rows.len() - 1,
        };
        let c = self
            .cols
            .iter()
            .position(|a| a == predicted)
            .ok_or_else(|| Error::InvalidConfig(format!("prediction {predicted} is not scored here")))?;
        self.counts[r][c] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn row_total(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }

    /// `(precision, recall)` of activity `a`. Neutral predictions never count
    /// against precision; an activity never predicted has precision 0.
    pub fn precision_recall(&self, a: usize) -> (f64, f64) {
        let tp = self.counts[a][a] as f64;
        let predicted: u64 = self.counts.iter().map(|row| row[a]).sum();
        let actual = self.row_total(a);
        let ratio = |num: f64, den: u64| if den == 0 { 0.0 } else { num / den as f64 };
        (ratio(tp, predicted), ratio(tp, actual))
    }

    /// Fraction of non-random frames predicted correctly.
    pub fn accuracy(&self) -> f64 {
        let n = self.num_activities();
        let correct: u64 = (0..n).map(|a| self.counts[a][a]).sum();
        let total: u64 = (0..n).map(|a| self.row_total(a)).sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["truth\\predicted".to_string()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.rows.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMetrics {
    pub activity: String,
    pub precision: f64,
    pub recall: f64,
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationMetrics {
    pub location: Location,
    pub activities: Vec<ActivityMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: ModelKind,
    pub locations: Vec<LocationMetrics>,
    /// Unweighted mean over every (location, activity) pair.
    pub precision: f64,
    pub recall: f64,
    /// Pooled frame accuracy over all locations, random frames excluded.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub setting: Setting,
    pub folds: usize,
    pub models: Vec<ModelMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-activity and macro metrics of one location's confusion matrix.
pub fn location_metrics(location: Location, cm: &ConfusionMatrix) -> LocationMetrics {
    let activities: Vec<ActivityMetrics> = (0..cm.num_activities())
        .map(|a| {
            let (precision, recall) = cm.precision_recall(a);
            ActivityMetrics {
                activity: cm.rows[a].clone(),
                precision,
                recall,
                frames: cm.row_total(a),
            }
        })
        .collect();
    LocationMetrics {
        location,
        precision: mean(activities.iter().map(|a| a.precision)),
        recall: mean(activities.iter().map(|a| a.recall)),
        accuracy: cm.accuracy(),
        activities,
    }
}

/// Scores aligned truth/prediction streams at one location.
pub fn score(
    location: Location,
    activities: &[String],
    truth: &[Option<String>],
    predicted: &[String],
) -> Result<(ConfusionMatrix, LocationMetrics)> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(activities);
    for (t, p) in truth.iter().zip(predicted) {
        cm.add(t.as_deref(), p)?;
    }
    let metrics = location_metrics(location, &cm);
    Ok((cm, metrics))
}

/// Confusion matrices per model and location, summed over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub confusions: BTreeMap<(ModelKind, Location), ConfusionMatrix>,
}

type FoldConfusions = Vec<((ModelKind, Location), ConfusionMatrix)>;

/// Runs every fold of a setting and scores all three models.
pub fn evaluate(dataset: &[LabeledSequence], setting: Setting, config: &RunConfig) -> Result<EvalOutcome> {
    config.validate()?;
    let dataset: Vec<LabeledSequence> = match config.location {
        Some(l) => dataset.iter().filter(|s| s.location == l).cloned().collect(),
        None => dataset.to_vec(),
    };
    let subjects = subjects(&dataset);
    if subjects.len() < 2 && setting == Setting::NewPerson {
        return Err(Error::InvalidConfig("new_person needs at least two subjects".into()));
    }
    let mut activities: BTreeMap<Location, Vec<String>> = BTreeMap::new();
    for s in &dataset {
        let entry = activities.entry(s.location).or_default();
        if let Some(a) = s.label.activity() {
            if !entry.iter().any(|e| e == a) {
                entry.push(a.to_string());
            }
        }
    }
    activities.values_mut().for_each(|v| v.sort());

    // Features depend only on the piece, so each one is extracted once and
    // shared by every fold that uses it.
    let folds: Vec<(Vec<Piece>, Vec<Piece>)> = subjects
        .iter()
        .map(|subject| fold_pieces(&dataset, setting, subject))
        .collect();
    let distinct: BTreeSet<Piece> = folds
        .iter()
        .flat_map(|(train, test)| train.iter().chain(test))
        .copied()
        .collect();
    let distinct: Vec<Piece> = distinct.into_iter().collect();
    let features = featurize_all(&materialize_all(&dataset, &distinct), &config.features, &config.intrinsics)?;
    let cache: BTreeMap<Piece, Vec<Vec<f64>>> = distinct.into_iter().zip(features).collect();

    let fold_results: Vec<Result<FoldConfusions>> = folds
        .par_iter()
        .map(|(train_pieces, test_pieces)| {
            let train = materialize_all(&dataset, train_pieces);
            let test = materialize_all(&dataset, test_pieces);
            let train_features: Vec<Vec<Vec<f64>>> = train_pieces.iter().map(|p| cache[p].clone()).collect();
            let (model, _) = train_featurized(&train, &train_features, config)?;
            let test_features: Vec<&Vec<Vec<f64>>> = test_pieces.iter().map(|p| &cache[p]).collect();
            let mut out: FoldConfusions = Vec::new();
            for kind in ModelKind::ALL {
                for (seq, feats) in test.iter().zip(&test_features) {
                    let lm = model.location(seq.location)?;
                    let predicted = predict_features(lm, kind, config.detector(), feats)?;
                    let key = (kind, seq.location);
                    let idx = match out.iter().position(|(k, _)| *k == key) {
                        Some(i) => i,
                        None => {
                            out.push((key, ConfusionMatrix::new(&activities[&seq.location])));
                            out.len() - 1
                        }
                    };
                    let truth = seq.label.activity();
                    for p in &predicted {
                        out[idx].1.add(truth, p)?;
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut confusions: BTreeMap<(ModelKind, Location), ConfusionMatrix> = BTreeMap::new();
    for fold in fold_results {
        for (key, cm) in fold? {
            confusions
                .entry(key)
                .and_modify(|acc| acc.merge(&cm))
                .or_insert(cm);
        }
    }

    let models = ModelKind::ALL
        .into_iter()
        .map(|kind| {
            let locations: Vec<LocationMetrics> = confusions
                .iter()
                .filter(|((k, _), _)| *k == kind)
                .map(|((_, loc), cm)| location_metrics(*loc, cm))
                .collect();
            let (correct, total) = confusions
                .iter()
                .filter(|((k, _), _)| *k == kind)
                .fold((0u64, 0u64), |(c, t), (_, cm)| {
                    let n = cm.num_activities();
                    (
                        c + (0..n).map(|a| cm.counts[a][a]).sum::<u64>(),
                        t + (0..n).map(|a| cm.row_total(a)).sum::<u64>(),
                    )
                });
            ModelMetrics {
                model: kind,
                precision: mean(locations.iter().flat_map(|l| l.activities.iter().map(|a| a.precision))),
                recall: mean(locations.iter().flat_map(|l| l.activities.iter().map(|a| a.recall))),
                accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                locations,
            }
        })
        .collect();

    Ok(EvalOutcome {
        report: MetricsReport {
            setting,
            folds: subjects.len(),
            models,
        },
        confusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_counted_example() {
        let acts = names(&["A", "B"]);
        let truth: Vec<Option<String>> = ["A", "A", "B", "B"].iter().map(|s| Some(s.to_string())).collect();
        let pred = names(&["A", NEUTRAL, "B", "A"]);
        let (cm, m) = score(Location::Kitchen, &acts, &truth, &pred).unwrap();
        assert_eq!(m.activities[0].precision, 0.5);
        assert_eq!(m.activities[0].recall, 0.5);
        assert_eq!(m.activities[1].precision, 1.0);
        assert_eq!(m.activities[1].recall, 0.5);
        assert_eq!(cm.row_total(0), 2);
    }

    #[test]
    fn random_predicted_neutral_touches_one_cell() {
        let acts = names(&["A"]);
        let (cm, m) = score(Location::Office, &acts, &[None, Some("A".into())], &names(&[NEUTRAL, "A"])).unwrap();
        assert_eq!(cm.counts[1][1], 1);
        assert_eq!(m.activities[0].precision, 1.0);
        assert_eq!(m.activities[0].recall, 1.0);
    }

    #[test]
    fn random_predicted_as_activity_is_a_false_positive() {
        let acts = names(&["A"]);
        let (_, m) = score(Location::Office, &acts, &[None, Some("A".into())], &names(&["A", "A"])).unwrap();
        assert_eq!(m.activities[0].precision, 0.5);
    }

    #[test]
    fn unknown_prediction_is_an_error() {
        let mut cm = ConfusionMatrix::new(&names(&["A"]));
        assert!(cm.add(Some("A"), "B").is_err());
    }
}
