//! The `conspec` command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::{
    concept_direction, zero_shot_classify, CaptionTemplateSet, ConceptDirection, TextEmbedder,
};
use crate::embedding::io::{
    read_captions_csv, read_json, read_partition_csv, write_json, Manifest, Space,
};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::lang::{desugar, parse_spec_file, ClassLabel, TaskVocabulary};
use crate::oracle::audit_projection;
use crate::regions::{
    region_a1, region_a2, region_a3, region_gamma, surrogate_partition, BoxRegion, RegionPartition,
    RegionRecord,
};
use crate::rep_maps::{
    fit_affine_map, fit_affine_map_gd, map_metrics, AffineMap, AffineMapFile, GdConfig, RepMap,
};
use crate::validate::{
    elicit_predicates, filter_significant, heat_map, relevant_concepts, satisfaction_probability,
    write_report_csv,
};
use crate::verifier::{
    verify_spec, HeadFile, LinearHead, VerificationContext, VerificationOutcome,
};

#[derive(Debug, Parser)]
#[command(
    name = "conspec",
    version,
    about = "Concept-based specification checking for vision classifiers"
)]
struct Cli {
    /// Worker threads for verify and validate.
    #[arg(long, global = true, env = "CONSPEC_JOBS")]
    jobs: Option<usize>,
    /// Omit timing and timestamp fields so reports are reproducible.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the affine map from the vision space to the vision-language space.
    FitMap(FitMapArgs),
    /// Compute concept and class directions from caption embeddings.
    Directions(DirectionsArgs),
    /// Build focus regions for a class.
    Regions(RegionsArgs),
    /// Measure satisfaction rates of elicited predicates.
    Validate(ValidateArgs),
    /// Write the elicited predicates of a class as a spec file.
    Elicit(ElicitArgs),
    /// Prove or refute specs over focus regions.
    Verify(VerifyArgs),
    /// Cross-check LP optima against a grid on a few coordinates.
    Audit(AuditArgs),
    /// Summarize verification reports and emit plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct FitMapArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rows used for fitting.
    #[arg(long, default_value = "train")]
    split: String,
    /// Also report quality on this split.
    #[arg(long)]
    eval_split: Option<String>,
    /// Gradient descent instead of the closed form.
    #[arg(long)]
    gd: bool,
}

#[derive(Debug, Args)]
struct DirectionsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Template file; defaults to the manifest's, then the stock set.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Keep only templates containing this text.
    #[arg(long)]
    template_contains: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegionMethod {
    #[value(name = "A1")]
    A1,
    #[value(name = "A2")]
    A2,
    #[value(name = "A3")]
    A3,
    #[value(name = "gamma")]
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Linear head over vision embeddings, concepts through the affine map.
    Vision,
    /// Zero-shot head in the vision-language space.
    Clip,
}

#[derive(Debug, Args, Clone)]
struct RegionSpec {
    #[arg(long)]
    class: Option<String>,
    #[arg(long, value_enum, default_value = "A1")]
    region: RegionMethod,
    /// Multipliers for gamma regions.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0])]
    gamma: Vec<f64>,
    /// Partition for A3 (`id,cell`); defaults to the manifest's, then a
    /// sign-pattern surrogate.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Coordinates used by the surrogate partition.
    #[arg(long, default_value_t = 3)]
    surrogate_k: usize,
    /// Rows the regions are built from.
    #[arg(long, default_value = "train")]
    split: String,
}

#[derive(Debug, Args)]
struct RegionsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    region: RegionSpec,
    #[arg(long, value_enum, default_value = "vision")]
    model: Model,
    /// Directions file; needed for zero-shot predictions with `--model clip`.
    #[arg(long)]
    directions: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    class: String,
    #[arg(long)]
    directions: PathBuf,
    /// Measure concepts on vision embeddings through this map instead of
    /// on vision-language embeddings.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = crate::validate::RELEVANCE_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = crate::validate::SIGNIFICANCE_LEVEL)]
    level: f64,
    /// Split whose rates go into report.csv and the heat map.
    #[arg(long, default_value = "test")]
    eval_split: String,
    /// Split the significance filter and relevance use.
    #[arg(long, default_value = "train")]
    filter_split: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ElicitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = crate::validate::RELEVANCE_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ContextArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    directions: PathBuf,
    /// Affine map; required with `--model vision`.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "vision")]
    model: Model,
    #[arg(long)]
    specs: PathBuf,
    #[command(flatten)]
    region: RegionSpec,
    /// Precomputed regions file; replaces `--region`.
    #[arg(long)]
    regions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    ctx: ContextArgs,
    /// JSON-lines report.
    #[arg(long)]
    out: PathBuf,
    /// Plot data `spec_index,region,epsilon`.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    ctx: ContextArgs,
    /// Free coordinates (at most four); the rest sit at the box centre.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Reports written by `verify`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Combined plot data.
    #[arg(long)]
    out: PathBuf,
}

/// `directions.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionsFile {
    pub template_count: usize,
    pub concepts: Vec<ConceptDirection<f64>>,
    pub classes: Vec<ConceptDirection<f64>>,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub spec_index: usize,
    pub spec_text: String,
    pub region_provenance: String,
    pub outcome: String,
    /// Margin or violation; `null` when vacuous or when a clause without
    /// strength literals is violated.
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_embedding: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// Runs the command line; returns the process exit code.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::Invalid(e.to_string())),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FitMap(a) => fit_map(a),
        Command::Directions(a) => directions(a),
        Command::Regions(a) => regions(a),
        Command::Validate(a) => validate(a),
        Command::Elicit(a) => elicit(a),
        Command::Verify(a) => verify(a, cli.deterministic),
        Command::Audit(a) => audit(a),
        Command::Report(a) => report(a),
    }
}

fn class_label(vocab: &TaskVocabulary, name: &str) -> Result<ClassLabel> {
    vocab
        .class(name)
        .cloned()
        .ok_or_else(|| Error::UnknownClass(name.to_string()))
}

fn split_subset(set: &EmbeddingSet<f64>, split: &str) -> Result<EmbeddingSet<f64>> {
    let rows = set.split_rows(split);
    if rows.is_empty() {
        return Err(Error::Invalid(format!("split `{split}` has no rows")));
    }
    Ok(set.subset(&rows))
}

fn fit_map(a: &FitMapArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let f = manifest.load_set::<f64>(Space::Vision)?;
    let g = manifest.load_set::<f64>(Space::Vlm)?;
    let (ft, gt) = (split_subset(&f, &a.split)?, split_subset(&g, &a.split)?);
    let map = if a.gd {
        fit_affine_map_gd(&ft, &gt, &GdConfig::default())?
    } else {
        fit_affine_map(&ft, &gt)?
    };
    let q = map_metrics(&map, &ft, &gt)?;
    println!("{}: mse {:.6e} r2 {:.6}", a.split, q.mse, q.r2);
    if let Some(eval) = &a.eval_split {
        let q = map_metrics(&map, &split_subset(&f, eval)?, &split_subset(&g, eval)?)?;
        println!("{eval}: mse {:.6e} r2 {:.6}", q.mse, q.r2);
    }
    write_json(&a.out, &AffineMapFile::from(&map))
}

fn directions(a: &DirectionsArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let mut templates = match a.templates.clone().or_else(|| manifest.templates_path()) {
        Some(p) => CaptionTemplateSet::load(p)?,
        None => CaptionTemplateSet::default(),
    };
    if let Some(needle) = &a.template_contains {
        templates = templates.filter(|t| t.contains(needle.as_str()))?;
    }
    let table = read_captions_csv::<f64>(manifest.captions_path()?, Some(manifest.vlm_dim()))?;
    let embedder = TextEmbedder::new(table);
    let build = |names: &[String]| {
        names
            .iter()
            .map(|n| concept_direction(n, &templates, &embedder))
            .collect::<Result<Vec<_>>>()
    };
    let file = DirectionsFile {
        template_count: templates.len(),
        concepts: build(&manifest.concept_names)?,
        classes: build(&manifest.class_names)?,
    };
    println!(
        "{} concept and {} class directions from {} templates",
        file.concepts.len(),
        file.classes.len(),
        file.template_count
    );
    write_json(&a.out, &file)
}

/// Embedding set of the model's space with predictions filled in.
fn model_set(
    manifest: &Manifest,
    model: Model,
    class_dirs: Option<&[ConceptDirection<f64>]>,
) -> Result<EmbeddingSet<f64>> {
    match model {
        Model::Vision => {
            let set = manifest.load_set::<f64>(Space::Vision)?;
            if set.predicted().is_some() || manifest.files.head.is_none() {
                return Ok(set);
            }
            let head = load_head(manifest)?;
            let pred = (0..set.len())
                .map(|r| head.scores(set.row(r)).map(|s| argmax(&s)))
                .collect::<Result<Vec<_>>>()?;
            set.with_predicted(pred)
        }
        Model::Clip => {
            let set = manifest.load_set::<f64>(Space::Vlm)?;
            let dirs = class_dirs
                .ok_or_else(|| Error::Invalid("zero-shot predictions need --directions".into()))?;
            let pred = (0..set.len())
                .map(|r| zero_shot_classify(set.row(r), dirs))
                .collect::<Result<Vec<_>>>()?;
            set.with_predicted(pred)
        }
    }
}

/// First index of the largest score.
fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in s.iter().enumerate() {
        if x > s[best] {
            best = k;
        }
    }
    best
}

fn load_head(manifest: &Manifest) -> Result<LinearHead<f64>> {
    let file: HeadFile = read_json(manifest.head_path()?)?;
    let head = file.to_head::<f64>()?;
    if head.classes() != manifest.class_names.as_slice() {
        return Err(Error::Invalid(
            "head classes differ from the manifest's".into(),
        ));
    }
    Ok(head)
}

fn build_regions(
    manifest: &Manifest,
    set: &EmbeddingSet<f64>,
    spec: &RegionSpec,
) -> Result<Vec<BoxRegion<f64>>> {
    let vocab = manifest.vocabulary()?;
    let name = spec
        .class
        .as_deref()
        .ok_or_else(|| Error::Invalid("--class is required to build regions".into()))?;
    let class = class_label(&vocab, name)?;
    let set = split_subset(set, &spec.split)?;
    match spec.region {
        RegionMethod::A1 => Ok(vec![region_a1(&set, class.index)?]),
        RegionMethod::A2 => Ok(vec![region_a2(&set, class.index)?]),
        RegionMethod::A3 => {
            let partition = match spec
                .partition
                .clone()
                .or_else(|| manifest.partition_path().ok())
            {
                // may cover rows of other splits too
                Some(p) => RegionPartition::new(read_partition_csv(p)?),
                None => surrogate_partition(&set, class.index, spec.surrogate_k)?,
            };
            region_a3(&set, class.index, &partition)
        }
        RegionMethod::Gamma => {
            if spec.gamma.iter().any(|&g| !(g > 0.0)) {
                return Err(Error::Invalid("gamma values must be positive".into()));
            }
            spec.gamma
                .iter()
                .map(|&g| region_gamma(&set, class.index, g))
                .collect()
        }
    }
}

fn regions(a: &RegionsArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let dirs = a
        .directions
        .as_ref()
        .map(read_json::<DirectionsFile>)
        .transpose()?;
    let set = model_set(
        &manifest,
        a.model,
        dirs.as_ref().map(|d| d.classes.as_slice()),
    )?;
    let boxes = build_regions(&manifest, &set, &a.region)?;
    let class = a.region.class.clone().unwrap_or_default();
    let records: Vec<RegionRecord> = boxes
        .iter()
        .map(|b| RegionRecord::from_box(&class, b))
        .collect();
    for r in &records {
        println!("{} {}: {} dims", r.class, r.provenance, r.lower.len());
    }
    write_json(&a.out, &records)
}

fn load_map(path: &Path) -> Result<AffineMap<f64>> {
    read_json::<AffineMapFile>(path)?.to_map()
}

fn rep_for(
    manifest: &Manifest,
    dirs: &DirectionsFile,
    map: Option<&PathBuf>,
) -> Result<(RepMap<f64>, EmbeddingSet<f64>)> {
    match map {
        Some(p) => Ok((
            RepMap::via_affine(dirs.concepts.clone(), load_map(p)?)?,
            manifest.load_set(Space::Vision)?,
        )),
        None => Ok((
            RepMap::vlm(dirs.concepts.clone())?,
            manifest.load_set(Space::Vlm)?,
        )),
    }
}

fn elicit(a: &ElicitArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let vocab = manifest.vocabulary()?;
    let class = class_label(&vocab, &a.class)?;
    check_fraction(a.threshold, "threshold")?;
    let set = split_subset(&manifest.load_set::<f64>(Space::Vision)?, &a.split)?;
    let relevant = relevant_concepts(&set, &class, a.threshold)?;
    let preds = elicit_predicates(&relevant, vocab.concepts(), &class);
    let mut text = format!(
        "# {}: relevant {}\n",
        class,
        relevant
            .iter()
            .map(|c| c.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    for p in &preds {
        text.push_str(&format!("{}\n", p.to_spec()));
    }
    std::fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
    println!("{} predicates for {class}", preds.len());
    Ok(())
}

fn check_fraction(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must lie in (0, 1)")))
    }
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    check_fraction(a.threshold, "threshold")?;
    check_fraction(a.level, "level")?;
    let vocab = manifest.vocabulary()?;
    let class = class_label(&vocab, &a.class)?;
    let dirs: DirectionsFile = read_json(&a.directions)?;
    let (rep, set) = rep_for(&manifest, &dirs, a.map.as_ref())?;
    // attributes live with the manifest's labels, whichever space is measured
    let annotated = manifest.load_set::<f64>(Space::Vision)?;
    let relevant = relevant_concepts(
        &split_subset(&annotated, &a.filter_split)?,
        &class,
        a.threshold,
    )?;
    let preds = elicit_predicates(&relevant, vocab.concepts(), &class);

    let eval = split_subset(&set, &a.eval_split)?;
    let report = satisfaction_probability(&eval, &preds, &rep, &class)?;
    let filter =
        satisfaction_probability(&split_subset(&set, &a.filter_split)?, &preds, &rep, &class)?;
    let significant = filter_significant(&filter, a.level);
    let hm = heat_map(&eval, vocab.concepts(), &relevant, &rep, &class)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    write_report_csv(&report, &a.out_dir.join("report.csv"))?;
    write_json(a.out_dir.join("heatmap.json"), &hm)?;
    let mut text = String::new();
    for p in &significant {
        text.push_str(&format!("{}\n", p.to_spec()));
    }
    let spec_path = a.out_dir.join("significant.spec");
    std::fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))?;
    println!(
        "{class}: {} relevant concepts, {} predicates, {} significant at {}",
        relevant.len(),
        preds.len(),
        significant.len(),
        a.level
    );
    Ok(())
}

struct Prepared {
    specs: Vec<(String, crate::lang::SpecExpr)>,
    ctx: VerificationContext<f64>,
    regions: Vec<BoxRegion<f64>>,
}

fn prepare(a: &ContextArgs) -> Result<Prepared> {
    let manifest = Manifest::load(&a.manifest)?;
    let vocab = manifest.vocabulary()?;
    let dirs: DirectionsFile = read_json(&a.directions)?;
    let text = std::fs::read_to_string(&a.specs).map_err(|e| Error::io(&a.specs, e))?;
    let specs = parse_spec_file(&text, &vocab)?
        .into_iter()
        .map(|l| Ok((l.text.clone(), desugar(&l.expr, &vocab)?)))
        .collect::<Result<Vec<_>>>()?;
    let ctx = match a.model {
        Model::Vision => {
            let map_path = a
                .map
                .as_ref()
                .ok_or_else(|| Error::Invalid("--map is required with --model vision".into()))?;
            VerificationContext::vision(
                load_head(&manifest)?,
                load_map(map_path)?,
                dirs.concepts.clone(),
            )?
        }
        Model::Clip => VerificationContext::clip(dirs.classes.clone(), dirs.concepts.clone())?,
    };
    let regions = match &a.regions {
        Some(p) => read_json::<Vec<RegionRecord>>(p)?
            .iter()
            .map(RegionRecord::to_box)
            .collect::<Result<Vec<_>>>()?,
        None => {
            let set = model_set(&manifest, a.model, Some(&dirs.classes))?;
            build_regions(&manifest, &set, &a.region)?
        }
    };
    Ok(Prepared {
        specs,
        ctx,
        regions,
    })
}

fn verify(a: &VerifyArgs, deterministic: bool) -> Result<()> {
    let p = prepare(&a.ctx)?;
    let jobs: Vec<(usize, usize)> = (0..p.specs.len())
        .flat_map(|s| (0..p.regions.len()).map(move |r| (s, r)))
        .collect();
    let timestamp = (!deterministic).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    let records = jobs
        .par_iter()
        .map(|&(s, r)| {
            let (text, e) = &p.specs[s];
            let region = &p.regions[r];
            let started = Instant::now();
            let v = verify_spec(e, &p.ctx, region)?;
            let solve_ms = started.elapsed().as_secs_f64() * 1e3;
            let (epsilon, point) = match &v.outcome {
                VerificationOutcome::Proved { margin } => (Some(*margin), None),
                VerificationOutcome::Counterexample { point, epsilon } => {
                    (epsilon.is_finite().then_some(*epsilon), Some(point.clone()))
                }
                VerificationOutcome::VacuouslyTrue => (None, None),
            };
            Ok(ReportRecord {
                spec_index: s,
                spec_text: text.clone(),
                region_provenance: region.provenance.to_string(),
                outcome: v.outcome.kind().to_string(),
                epsilon,
                point,
                zero_embedding: v.clauses.iter().any(|c| c.zero_embedding),
                solve_ms: (!deterministic).then_some(solve_ms),
                timestamp,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Invalid(e.to_string()))?);
        out.push('\n');
    }
    std::fs::write(&a.out, out).map_err(|e| Error::io(&a.out, e))?;
    if let Some(plot) = &a.plot {
        write_plot(plot, &records)?;
    }
    print_table(&records);
    Ok(())
}

fn fmt_eps(e: Option<f64>) -> String {
    e.map_or_else(String::new, |x| x.to_string())
}

fn write_plot(path: &Path, records: &[ReportRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    w.write_record(["spec_index", "region", "epsilon"])
        .map_err(|e| Error::io(path, e))?;
    for r in records {
        w.write_record([
            r.spec_index.to_string(),
            r.region_provenance.clone(),
            fmt_eps(r.epsilon),
        ])
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn print_table(records: &[ReportRecord]) {
    let width = records
        .iter()
        .map(|r| r.spec_text.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(
        out,
        "{:<width$}  {:<10}  {:<15}  epsilon",
        "spec", "region", "outcome"
    );
    for r in records {
        let eps = match (r.outcome.as_str(), r.epsilon) {
            ("counterexample", None) => "inf".to_string(),
            (_, e) => fmt_eps(e),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:<10}  {:<15}  {}",
            r.spec_text, r.region_provenance, r.outcome, eps
        );
    }
}

fn audit(a: &AuditArgs) -> Result<()> {
    let p = prepare(&a.ctx)?;
    let mut disagreements = 0;
    println!("spec\tregion\tclause\tlp\tgrid\ttolerance\tagrees");
    for (text, e) in &p.specs {
        for region in &p.regions {
            let anchor = region.center();
            for row in audit_projection(e, &p.ctx, region, &a.dims, &anchor, a.step)? {
                let ok = row.agrees();
                disagreements += usize::from(!ok);
                println!(
                    "{text}\t{}\t{}\t{}\t{}\t{:.3e}\t{ok}",
                    region.provenance,
                    row.clause,
                    fmt_eps(row.lp_epsilon),
                    fmt_eps(row.grid_epsilon),
                    row.tolerance
                );
            }
        }
    }
    if disagreements > 0 {
        return Err(Error::Invalid(format!(
            "{disagreements} clause(s) disagree with the grid"
        )));
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &a.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let r: ReportRecord = serde_json::from_str(line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            records.push(r);
        }
    }
    write_plot(&a.out, &records)?;
    let regions: BTreeSet<&str> = records
        .iter()
        .map(|r| r.region_provenance.as_str())
        .collect();
    println!("region\tproved\tcounterexample\tvacuous\tmax_epsilon");
    for region in regions {
        let of = |kind: &str| {
            records
                .iter()
                .filter(|r| r.region_provenance == region && r.outcome == kind)
                .count()
        };
        let max = records
            .iter()
            .filter(|r| r.region_provenance == region)
            .filter_map(|r| r.epsilon)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{region}\t{}\t{}\t{}\t{}",
            of("proved"),
            of("counterexample"),
            of("vacuously_true"),
            if max.is_finite() {
                max.to_string()
            } else {
                String::new()
            }
        );
    }
    Ok(())
}
