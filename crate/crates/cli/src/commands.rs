use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use skelact::config::RunConfig;
use skelact::eval::{evaluate, Setting};
use skelact::features::{FeatureBlocks, FeatureExtractor};
use skelact::hog::CameraIntrinsics;
use skelact::memm::BoundaryPrior;
use skelact::model::{self, ModelFile, ModelKind, StreamDetector};
use skelact::skeleton_io::synth::{render_images, synthetic_dataset};
use skelact::skeleton_io::{
    load_dataset, load_frame_images, mirror_sequence, save_depth_pgm, save_rgb_ppm, serialize_sequence, write_manifest,
    FrameImages, FrameParser, JointOrder, LabeledSequence, ManifestEntry,
};
use skelact::Error;

use crate::{ConfigArgs, DetectArgs, EvalArgs, FeaturesArgs, Format, SynthArgs, TrainArgs};

/// Exit status for a failed command: 2 for bad input or usage, 3 for
/// numerical or model failures.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_input_error() { 2 } else { 3 };
        }
        if cause.is::<io::Error>() || cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

/// True when stdout was closed by the reader, as with `| head`.
pub fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|c| c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe))
}

/// The error chain on one line, dropping causes already quoted by their parent.
pub fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

/// Shortest round-trip text of a float, switching to exponent form for
/// very small or large magnitudes.
fn num(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig(message.into()).into()
}

fn parse_blocks(names: &[String]) -> Result<FeatureBlocks> {
    let mut blocks = FeatureBlocks {
        skeletal: false,
        simple_hog: false,
        skeletal_hog: false,
    };
    for name in names {
        match name.trim() {
            "skeletal" => blocks.skeletal = true,
            "simple_hog" => blocks.simple_hog = true,
            "skeletal_hog" => blocks.skeletal_hog = true,
            other => return Err(usage(format!("unknown feature block {other:?}"))),
        }
    }
    Ok(blocks)
}

fn parse_boundary(name: &str) -> Result<BoundaryPrior> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| usage(format!("unknown boundary prior {name:?}")))
}

/// Reads the optional TOML file, then applies flag overrides.
fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(loc) = &args.location {
        config.location = Some(loc.parse()?);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(t) = args.max_window {
        config.max_window = t;
    }
    if let Some(b) = &args.boundary {
        config.boundary = parse_boundary(b)?;
    }
    if let Some(names) = &args.blocks {
        config.features = parse_blocks(names)?;
    }
    config.validate()?;
    Ok(config)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| usage(format!("--{name} is required (or set it in the config file)")))
}

fn load_sequences(manifest: &Path, config: &RunConfig, images: bool) -> Result<Vec<LabeledSequence>> {
    let with_images = images || config.features.needs_images();
    let dataset = load_dataset(manifest, &JointOrder::default(), with_images)?;
    let seqs: Vec<LabeledSequence> = dataset
        .into_iter()
        .map(|(_, s)| s)
        .filter(|s| config.location.is_none_or(|l| s.location == l))
        .collect();
    if seqs.is_empty() {
        return Err(usage("no sequences left after the location filter"));
    }
    Ok(seqs)
}

#[derive(Serialize)]
struct TrainRow<'a> {
    location: &'a str,
    activity: &'a str,
    samples: usize,
    em_log_likelihood: Option<f64>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if args.no_mirror {
        config.mirror_training = false;
    }
    let manifest = required(args.manifest, &config.manifest, "manifest")?;
    let out = required(args.out, &config.model, "out")?;
    let mut seqs = load_sequences(&manifest, &config, args.images)?;
    if config.mirror_training {
        // each sequence followed by its mirror image, as in cross-validation
        seqs = seqs
            .into_iter()
            .filter(|s| !s.label.is_random())
            .flat_map(|s| {
                let m = mirror_sequence(&s);
                [s, m]
            })
            .collect();
    }
    let (file, summaries) = model::train(&seqs, &config)?;
    file.save(&out)?;

    let mut rows = Vec::new();
    for s in &summaries {
        let ll: BTreeMap<&str, f64> = s.em_log_likelihoods.iter().map(|(a, v)| (a.as_str(), *v)).collect();
        for (activity, samples) in &s.sample_counts {
            rows.push(TrainRow {
                location: s.location.as_str(),
                activity,
                samples: *samples,
                em_log_likelihood: ll.get(activity.as_str()).copied(),
            });
        }
    }
    let mut stdout = io::stdout().lock();
    match args.format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&rows)?)?,
        Format::Csv => {
            writeln!(stdout, "location,activity,samples,em_log_likelihood")?;
            for r in &rows {
                let ll = r.em_log_likelihood.map(num).unwrap_or_default();
                writeln!(stdout, "{},{},{},{}", r.location, r.activity, r.samples, ll)?;
            }
        }
    }
    Ok(())
}

fn open_input(input: &Option<PathBuf>) -> Result<Box<dyn BufRead>> {
    match input {
        Some(p) if p.as_os_str() != "-" => {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => Ok(Box::new(BufReader::new(io::stdin()))),
    }
}

/// Where per-frame images live: the explicit directory, else the directory
/// named after the input file's stem.
fn image_dir(explicit: &Option<PathBuf>, input: &Option<PathBuf>, needed: bool) -> Result<Option<PathBuf>> {
    if !needed {
        return Ok(None);
    }
    if let Some(d) = explicit {
        return Ok(Some(d.clone()));
    }
    match input {
        Some(p) if p.as_os_str() != "-" => Ok(Some(p.with_extension(""))),
        _ => Err(usage("image features need --images-dir when reading standard input")),
    }
}

/// Feeds every frame of the input to `each`, in order.
fn for_each_frame(
    input: &Option<PathBuf>,
    images: Option<&Path>,
    mut each: impl FnMut(&skelact::skeleton_io::SkeletonFrame, Option<&FrameImages>) -> Result<()>,
) -> Result<()> {
    let mut parser = FrameParser::new(JointOrder::default())?;
    for line in open_input(input)?.lines() {
        let line = line.context("reading frames")?;
        let Some(frame) = parser.feed(&line)? else {
            continue;
        };
        let imgs = images.map(|d| load_frame_images(d, frame.frame_index)).transpose()?;
        each(&frame, imgs.as_ref())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DetectLine<'a> {
    frame_index: u64,
    activity: &'a str,
    posterior: BTreeMap<&'a str, f64>,
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let file = ModelFile::load(&args.model_file)?;
    let kind: ModelKind = args.model.parse()?;
    let location = match &args.location {
        Some(l) => file.location(l.parse()?)?,
        None => file.sole_location()?,
    };
    let mut cfg = file.detector;
    if let Some(t) = args.max_window {
        if t < 2 {
            return Err(usage("--max-window must be at least 2"));
        }
        cfg.max_window = t;
    }
    let dir = image_dir(&args.images_dir, &args.input, file.features.needs_images())?;
    let mut detector = StreamDetector::new(&file, location, kind, cfg);
    let labels = detector.labels().to_vec();

    let mut stdout = io::stdout().lock();
    if args.format == Format::Csv {
        writeln!(stdout, "frame_index,activity,{}", labels.join(","))?;
    }
    for_each_frame(&args.input, dir.as_deref(), |frame, images| {
        let p = detector.push(frame, images)?;
        match args.format {
            Format::Csv => {
                write!(stdout, "{},{}", p.frame_index, p.activity)?;
                for v in &p.posterior {
                    write!(stdout, ",{}", num(*v))?;
                }
                writeln!(stdout)?;
            }
            Format::Json => {
                let line = DetectLine {
                    frame_index: p.frame_index,
                    activity: &p.activity,
                    posterior: labels.iter().map(String::as_str).zip(p.posterior.iter().copied()).collect(),
                };
                writeln!(stdout, "{}", serde_json::to_string(&line)?)?;
            }
        }
        stdout.flush()?;
        Ok(())
    })
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let setting: Setting = args.setting.parse()?;
    let manifest = required(args.manifest, &config.manifest, "manifest")?;
    let out_dir = required(args.out_dir, &config.output_dir, "out-dir")?;
    let seqs = load_sequences(&manifest, &config, args.images)?;
    let outcome = evaluate(&seqs, setting, &config)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for ((kind, loc), cm) in &outcome.confusions {
        let path = out_dir.join(format!("confusion_{kind}_{loc}.csv"));
        fs::write(&path, cm.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
    }
    let metrics_path = out_dir.join("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&outcome.report)?)
        .with_context(|| format!("writing {}", metrics_path.display()))?;

    let mut stdout = io::stdout().lock();
    match args.format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&outcome.report)?)?,
        Format::Csv => {
            writeln!(stdout, "model,location,precision,recall,accuracy")?;
            for m in &outcome.report.models {
                for l in &m.locations {
                    writeln!(
                        stdout,
                        "{},{},{},{},{}",
                        m.model,
                        l.location,
                        num(l.precision),
                        num(l.recall),
                        num(l.accuracy)
                    )?;
                }
                writeln!(stdout, "{},all,{},{},{}", m.model, num(m.precision), num(m.recall), num(m.accuracy))?;
            }
        }
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    if args.subjects == 0 {
        return Err(usage("--subjects must be positive"));
    }
    let mut seqs = synthetic_dataset(args.subjects, args.seed)?;
    if let Some(n) = args.frames {
        if n == 0 {
            return Err(usage("--frames must be positive"));
        }
        seqs = seqs.iter().map(|s| s.slice(0, n.min(s.len()))).collect();
    }
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let order = JointOrder::default();
    let intrinsics = CameraIntrinsics::default();
    let mut entries = Vec::with_capacity(seqs.len());
    for seq in &seqs {
        let stem = format!("{}_{}", seq.subject_id, seq.label);
        let file = format!("{stem}.txt");
        let path = args.out_dir.join(&file);
        fs::write(&path, serialize_sequence(&seq.frames, &order))
            .with_context(|| format!("writing {}", path.display()))?;
        if args.images {
            let dir = args.out_dir.join(&stem);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for frame in &seq.frames {
                let im = render_images(frame, &intrinsics);
                save_rgb_ppm(&dir.join(format!("rgb_{:05}.ppm", frame.frame_index)), &im.rgb)?;
                save_depth_pgm(&dir.join(format!("depth_{:05}.pgm", frame.frame_index)), &im.depth)?;
            }
        }
        entries.push(ManifestEntry {
            file,
            activity: seq.label.to_string(),
            location: seq.location.to_string(),
            subject: seq.subject_id.clone(),
        });
    }
    write_manifest(&args.out_dir.join("manifest.csv"), &entries)?;

    #[derive(Serialize)]
    struct Row<'a> {
        #[serde(flatten)]
        entry: &'a ManifestEntry,
        frames: usize,
    }
    let rows: Vec<Row> = entries
        .iter()
        .zip(&seqs)
        .map(|(entry, s)| Row { entry, frames: s.len() })
        .collect();
    let mut stdout = io::stdout().lock();
    match args.format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&rows)?)?,
        Format::Csv => {
            writeln!(stdout, "file,activity,location,subject,frames")?;
            for r in &rows {
                let e = r.entry;
                writeln!(stdout, "{},{},{},{},{}", e.file, e.activity, e.location, e.subject, r.frames)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    frame_index: u64,
    features: &'a [f64],
}

pub fn features(args: FeaturesArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let blocks = config.features;
    let dir = image_dir(&args.images_dir, &args.input, blocks.needs_images())?;
    let mut extractor = FeatureExtractor::new(blocks, config.intrinsics);

    let mut stdout = io::stdout().lock();
    if args.format == Format::Csv {
        write!(stdout, "frame_index")?;
        for i in 0..blocks.dimension() {
            write!(stdout, ",f{i}")?;
        }
        writeln!(stdout)?;
    }
    for_each_frame(&args.input, dir.as_deref(), |frame, images| {
        let x = extractor.push(frame, images)?.to_vec(&blocks)?;
        match args.format {
            Format::Csv => {
                write!(stdout, "{}", frame.frame_index)?;
                for v in &x {
                    write!(stdout, ",{}", num(*v))?;
                }
                writeln!(stdout)?;
            }
            Format::Json => {
                let line = FeatureLine {
                    frame_index: frame.frame_index,
                    features: &x,
                };
                writeln!(stdout, "{}", serde_json::to_string(&line)?)?;
            }
        }
        Ok(())
    })
}
