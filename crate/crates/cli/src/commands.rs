//! One function per subcommand. Each reads its inputs through [`Ctx`] (so
//! they are hashed into the manifest) and returns the rendered output bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use bmguide_core::cluster::{self, ArchetypeParams, CategoricalRow, Metric, SelectParams, SelectionRule};
use bmguide_core::fuse::{self, CrowdLane, CvParams};
use bmguide_core::judge::{self, RatingSchema, RoundAggregate};
use bmguide_core::learn::{self, ForestParams, LabeledDataset, Learner, ModelDocument, ModelSpec, TrainedModel, TreeParams};
use bmguide_core::pipeline::TrainingParams;
use bmguide_core::qca::{self, CalibrationMode, Expectation, RowStatus, SolutionSet};
use bmguide_core::schema::{self, BusinessModel, FeatureRow, Taxonomy};
use bmguide_core::{seed, synth};
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::sha256_hex;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or parameters: exit code 2.
    Validation(String),
    /// Everything else: exit code 1.
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

pub struct Ctx {
    pub format: Format,
    pub taxonomy: Taxonomy,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Ctx {
    pub fn new(format: Format, taxonomy: Option<&Path>) -> Result<Self, CliError> {
        let mut ctx = Self { format, taxonomy: Taxonomy::iot(), inputs: BTreeMap::new() };
        if let Some(p) = taxonomy {
            let text = ctx.read_text(p)?;
            ctx.taxonomy = Taxonomy::from_toml(&text).map_err(invalid)?;
        }
        Ok(ctx)
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn read_text(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?).map_err(|_| invalid(format!("{}: not UTF-8", path.display())))
    }

    fn json(&self, v: Value) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
        s.push('\n');
        s.into_bytes()
    }

    /// Parses and validates a venture table, then encodes it.
    fn ventures(&mut self, path: &Path) -> Result<(Vec<BusinessModel>, Vec<FeatureRow>), CliError> {
        let bytes = self.read(path)?;
        let models = schema::read_ventures(&self.taxonomy, bytes.as_slice()).map_err(invalid)?;
        if models.is_empty() {
            return Err(invalid(format!("{}: no ventures", path.display())));
        }
        let mut rows = Vec::with_capacity(models.len());
        for m in &models {
            let report = schema::validate_model(&self.taxonomy, m);
            if !report.is_valid() {
                let msgs: Vec<&str> = report.findings.iter().map(|f| f.message.as_str()).collect();
                return Err(invalid(format!("venture `{}`: {}", m.venture_id, msgs.join("; "))));
            }
            rows.push(schema::encode_one_hot(&self.taxonomy, m).map_err(invalid)?);
        }
        Ok((models, rows))
    }

    /// Ventures that must all carry a Series A label.
    fn labeled(&mut self, path: &Path) -> Result<(Vec<BusinessModel>, LabeledDataset), CliError> {
        let (models, rows) = self.ventures(path)?;
        let mut labels = Vec::with_capacity(models.len());
        for m in &models {
            let l = m.series_a.ok_or_else(|| invalid(format!("venture `{}` has no series_a label", m.venture_id)))?;
            labels.push(u8::from(l));
        }
        let ds = LabeledDataset::from_feature_rows(&self.taxonomy, &rows, labels).map_err(invalid)?;
        Ok((models, ds))
    }
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::Hamming => Metric::Hamming,
        MetricArg::Frequency => Metric::Frequency,
    }
}

fn rule_text(r: SelectionRule) -> &'static str {
    match r {
        SelectionRule::FirstLocalMaximum => "first local maximum",
        SelectionRule::GlobalMaximum => "global maximum, no local maximum",
    }
}

pub fn encode(ctx: &mut Ctx, a: &EncodeArgs) -> Result<Vec<u8>, CliError> {
    let (models, rows) = ctx.ventures(&a.input)?;
    let names = ctx.taxonomy.feature_names();
    if ctx.format == Format::Json {
        let rows: Vec<Value> = models
            .iter()
            .zip(&rows)
            .map(|(m, r)| json!({ "venture_id": r.venture_id, "bits": r.bits, "series_a": m.series_a }))
            .collect();
        return Ok(ctx.json(json!({ "feature_names": names, "rows": rows })));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["venture_id".to_string()];
    header.extend(names);
    header.push("series_a".into());
    w.write_record(&header).map_err(internal)?;
    for (m, r) in models.iter().zip(&rows) {
        let mut rec = vec![r.venture_id.clone()];
        rec.extend(r.bits.iter().map(u8::to_string));
        rec.push(m.series_a.map_or(String::new(), |l| u8::from(l).to_string()));
        w.write_record(&rec).map_err(internal)?;
    }
    w.into_inner().map_err(internal)
}

pub fn cluster(ctx: &mut Ctx, a: &ClusterArgs) -> Result<Vec<u8>, CliError> {
    let (_, rows) = ctx.ventures(&a.input)?;
    let bits = match &a.component {
        None => 0..ctx.taxonomy.width(),
        Some(name) => {
            let comps = ctx.taxonomy.components();
            let names: Vec<&str> = comps.iter().map(|c| c.name.as_str()).collect();
            comps
                .iter()
                .find(|c| &c.name == name)
                .map(|c| c.bits.clone())
                .ok_or_else(|| invalid(format!("unknown component `{name}`; one of {}", names.join(", "))))?
        }
    };
    let data: Vec<CategoricalRow> = rows.iter().map(|r| r.bits[bits.clone()].iter().map(|&b| u32::from(b)).collect()).collect();
    let params = SelectParams {
        k_min: a.k_min,
        k_max: a.k_max,
        restarts: a.restarts,
        seed: a.seed,
        max_iter: a.max_iter,
        metric: metric(a.metric),
    };
    let sel = cluster::select_k(&data, &params).map_err(invalid)?;
    let chosen = sel.chosen();
    if ctx.format == Format::Json {
        let curve: Vec<Value> = sel
            .records
            .iter()
            .map(|r| {
                json!({
                    "k": r.k, "silhouette": r.silhouette, "cost": r.clustering.cost,
                    "iterations": r.clustering.iterations, "sizes": r.clustering.sizes(),
                })
            })
            .collect();
        let assignments: Vec<Value> = rows
            .iter()
            .zip(&chosen.clustering.assignments)
            .map(|(r, c)| json!({ "venture_id": r.venture_id, "cluster": c }))
            .collect();
        return Ok(ctx.json(json!({
            "chosen_k": sel.chosen_k, "rule": sel.rule, "silhouette": chosen.silhouette,
            "requested_k_max": sel.requested_k_max, "effective_k_max": sel.effective_k_max,
            "curve": curve, "assignments": assignments,
        })));
    }
    let mut out = String::new();
    writeln!(out, "rows: {}  bits: {}  metric: {:?}", data.len(), bits.len(), params.metric).unwrap();
    if sel.clamped() {
        writeln!(out, "k_max clamped from {} to {} (distinct rows)", sel.requested_k_max, sel.effective_k_max).unwrap();
    }
    writeln!(out, "{:>4} {:>11} {:>12} {:>10}", "k", "silhouette", "cost", "iterations").unwrap();
    for r in &sel.records {
        let mark = if r.k == sel.chosen_k { "  <" } else { "" };
        writeln!(out, "{:>4} {:>11.4} {:>12.3} {:>10}{mark}", r.k, r.silhouette, r.clustering.cost, r.clustering.iterations)
            .unwrap();
    }
    writeln!(out, "chosen k: {} ({})", sel.chosen_k, rule_text(sel.rule)).unwrap();
    let sizes: Vec<String> = chosen.clustering.sizes().iter().map(usize::to_string).collect();
    writeln!(out, "cluster sizes: {}", sizes.join(" ")).unwrap();
    Ok(out.into_bytes())
}

pub fn archetypes(ctx: &mut Ctx, a: &ArchetypeArgs) -> Result<Vec<u8>, CliError> {
    let (models, rows) = ctx.ventures(&a.input)?;
    let mut success = Vec::with_capacity(models.len());
    for m in &models {
        success.push(m.series_a.ok_or_else(|| invalid(format!("venture `{}` has no series_a label", m.venture_id)))?);
    }
    let params = ArchetypeParams {
        component_k: (a.component_k_min, a.component_k_max),
        success_k: (a.success_k_min, a.success_k_max),
        restarts: a.restarts,
        max_iter: a.max_iter,
        seed: a.seed,
        metric: Metric::Hamming,
    };
    let report = cluster::archetypes(&ctx.taxonomy, &rows, &success, &params).map_err(invalid)?;
    if ctx.format == Format::Json {
        return Ok(ctx.json(serde_json::to_value(&report).map_err(internal)?));
    }
    let mut out = String::new();
    writeln!(out, "{:<28} {:>6} {:>11} {:>10}", "component", "types", "silhouette", "freq cost").unwrap();
    for c in &report.components {
        let sil = c.silhouette.map_or("-".to_string(), |s| format!("{s:.4}"));
        writeln!(out, "{:<28} {:>6} {:>11} {:>10.3}", c.name, c.types, sil, c.frequency_cost).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "successful ventures: {}", report.success_ids.len()).unwrap();
    match &report.success {
        Some(sel) => {
            writeln!(out, "success clusters: {} ({})", sel.chosen_k, rule_text(sel.rule)).unwrap();
        }
        None => writeln!(out, "success clusters: none (too few distinct configurations)").unwrap(),
    }
    writeln!(out, "{:>7} {:>9}  configuration / members", "pattern", "frequency").unwrap();
    for p in &report.patterns {
        let config: Vec<String> = p.configuration.iter().map(u32::to_string).collect();
        writeln!(out, "{:>7} {:>9}  [{}]", p.cluster + 1, p.frequency, config.join(" ")).unwrap();
        writeln!(out, "{:>18} {}", "", p.members.join(" ")).unwrap();
    }
    Ok(out.into_bytes())
}

fn spec_for(family: Family, seed: u64, n_trees: usize) -> ModelSpec {
    match family {
        Family::RandomForest => ModelSpec::RandomForest(ForestParams { n_trees, ..ForestParams::new(seed) }),
        Family::Cart => ModelSpec::Cart(TreeParams::default()),
        Family::Logistic => ModelSpec::Logistic(learn::LogisticParams::default()),
        Family::NaiveBayes => ModelSpec::NaiveBayes,
    }
}

/// The model document is the output; a summary goes to the log.
pub fn train(ctx: &mut Ctx, a: &TrainArgs) -> Result<Vec<u8>, CliError> {
    let (_, ds) = ctx.labeled(&a.input)?;
    let spec = spec_for(a.family, a.seed, a.n_trees);
    let model = spec.fit(&ds).map_err(invalid)?;
    if let TrainedModel::RandomForest(f) = &model {
        if let Some(oob) = f.oob_accuracy(&ds) {
            tracing::info!(oob_accuracy = oob, "forest fitted");
        }
    }
    let doc = ModelDocument::new(model, ds.feature_names.clone());
    tracing::info!(family = spec.name(), hash = %doc.hash(), rows = ds.len(), "model trained");
    let mut text = doc.to_json();
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn importance(ctx: &mut Ctx, a: &ImportanceArgs) -> Result<Vec<u8>, CliError> {
    let (forest, oob) = match (&a.model, &a.input) {
        (Some(path), _) => {
            let text = ctx.read_text(path)?;
            let doc = ModelDocument::from_json(&text).map_err(invalid)?;
            match doc.model {
                TrainedModel::RandomForest(f) => (f, None),
                other => return Err(invalid(format!("{}: a {} model has no forest importance", path.display(), other.family()))),
            }
        }
        (None, Some(input)) => {
            let (_, ds) = ctx.labeled(input)?;
            let seed = a.seed.ok_or_else(|| invalid("--seed is required when fitting"))?;
            let f = learn::forest_fit(&ds, &ForestParams { n_trees: a.n_trees, ..ForestParams::new(seed) }).map_err(invalid)?;
            let oob = f.oob_accuracy(&ds);
            (f, oob)
        }
        (None, None) => return Err(invalid("need --input or --model")),
    };
    let imp = learn::feature_importance(&forest);
    let ranked = imp.ranked();
    if ctx.format == Format::Json {
        return Ok(ctx.json(json!({
            "n_trees": forest.n_trees, "seed": forest.seed, "oob_accuracy": oob,
            "degenerate": imp.degenerate, "ranked": ranked,
        })));
    }
    let mut out = String::new();
    writeln!(out, "trees: {}  seed: {}", forest.n_trees, forest.seed).unwrap();
    if let Some(o) = oob {
        writeln!(out, "out-of-bag accuracy: {o:.4}").unwrap();
    }
    if imp.degenerate {
        writeln!(out, "no tree split on any feature; all importances are zero").unwrap();
    }
    let shown = if a.top == 0 { ranked.len() } else { a.top.min(ranked.len()) };
    writeln!(out, "{:>4}  {:<60} {:>9}", "rank", "feature", "weight").unwrap();
    for (i, (name, w)) in ranked.iter().take(shown).enumerate() {
        writeln!(out, "{:>4}  {:<60} {:>9.5}", i + 1, name, w).unwrap();
    }
    Ok(out.into_bytes())
}

/// Crowd CSV: `venture_id` plus one probability column per lane; empty cells are missing.
fn crowd_lanes(ctx: &mut Ctx, path: &Path, ids: &[String]) -> Result<Vec<CrowdLane>, CliError> {
    let bytes = ctx.read(path)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let header: Vec<String> = r.headers().map_err(invalid)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("venture_id") || header.len() < 2 {
        return Err(invalid(format!("{}: need `venture_id` then at least one lane column", path.display())));
    }
    let mut by_id: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(invalid)?;
        let mut vals = Vec::new();
        for (j, cell) in rec.iter().enumerate().skip(1) {
            if cell.is_empty() {
                vals.push(None);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| invalid(format!("{} row {}: `{}` is not a number", path.display(), i + 1, header[j])))?;
            vals.push(Some(v));
        }
        by_id.insert(rec.get(0).unwrap_or_default().to_string(), vals);
    }
    Ok(header[1..]
        .iter()
        .enumerate()
        .map(|(j, name)| CrowdLane {
            name: name.clone(),
            probs: ids.iter().map(|id| by_id.get(id).and_then(|v| v.get(j).copied().flatten())).collect(),
        })
        .collect())
}

pub fn evaluate(ctx: &mut Ctx, a: &EvaluateArgs) -> Result<Vec<u8>, CliError> {
    let (models, ds) = ctx.labeled(&a.input)?;
    let ids: Vec<String> = models.iter().map(|m| m.venture_id.clone()).collect();
    let lanes = match &a.crowd {
        Some(p) => crowd_lanes(ctx, p, &ids)?,
        None => Vec::new(),
    };
    let tp = TrainingParams { seed: a.seed, n_trees: a.n_trees, folds: a.folds, holdout_fraction: 0.2, threshold: a.threshold };
    let specs = tp.specs();
    let learners: Vec<&dyn Learner> = specs.iter().map(|s| s as &dyn Learner).collect();
    let table = fuse::evaluate_cv(&learners, &ds, &lanes, &CvParams { k: a.folds, seed: a.seed, threshold: a.threshold })
        .map_err(invalid)?;
    let report = fuse::compare_report(&table).map_err(invalid)?;
    if ctx.format == Format::Json {
        return Ok(ctx.json(json!({ "report": report, "table": table })));
    }
    let mut out = format!("rows: {}  folds: {}  seed: {}\n", ds.len(), table.k, table.seed);
    write!(out, "{report}").unwrap();
    Ok(out.into_bytes())
}

fn term_table(out: &mut String, s: &SolutionSet) {
    writeln!(out, "{:<40} {:>11} {:>8} {:>8}", format!("{:?} terms", s.kind), "consistency", "raw cov", "uniq cov").unwrap();
    for t in &s.terms {
        writeln!(out, "{:<40} {:>11.3} {:>8.3} {:>8.3}", t.expression, t.consistency, t.raw_coverage, t.unique_coverage).unwrap();
    }
    writeln!(out, "{:<40} {:>11.3} {:>8.3}", "solution", s.consistency, s.coverage).unwrap();
}

pub fn qca(ctx: &mut Ctx, a: &QcaArgs) -> Result<Vec<u8>, CliError> {
    let bytes = ctx.read(&a.input)?;
    let raw = qca::read_raw_cases(bytes.as_slice()).map_err(invalid)?;
    let mode = match a.calibration {
        CalibrationArg::Direct => CalibrationMode::Direct,
        CalibrationArg::Precalibrated => CalibrationMode::Precalibrated,
    };
    let (cs, anchors) = qca::calibrate_cases(&raw, mode).map_err(invalid)?;
    let expect: Vec<Expectation> = a
        .expect
        .iter()
        .map(|e| match e {
            ExpectArg::Present => Expectation::Present,
            ExpectArg::Absent => Expectation::Absent,
            ExpectArg::None => Expectation::None,
        })
        .collect();
    let expectations = match expect.len() {
        1 => vec![expect[0]; cs.k()],
        n if n == cs.k() => expect,
        n => return Err(invalid(format!("{n} expectations for {} conditions", cs.k()))),
    };
    let report = qca::analyze(&cs, a.freq, a.consistency, &expectations).map_err(invalid)?;
    if ctx.format == Format::Json {
        return Ok(ctx.json(json!({ "report": report, "anchors": anchors })));
    }
    let mut out = String::new();
    writeln!(out, "cases: {}  frequency >= {}  consistency >= {}", cs.cases.len(), a.freq, a.consistency).unwrap();
    writeln!(out, "{} {:>6} {:>12}  status", report.conditions.join(" "), "n", "consistency").unwrap();
    for r in report.truth_table.rows.iter().filter(|r| r.status != RowStatus::Remainder) {
        let combo: Vec<String> = r
            .combination
            .iter()
            .zip(&report.conditions)
            .map(|(&b, name)| format!("{:<w$}", u8::from(b), w = name.len()))
            .collect();
        let cons = r.consistency.map_or("-".to_string(), |c| format!("{c:.3}"));
        writeln!(out, "{} {:>6} {:>12}  {:?}", combo.join(" "), r.count, cons, r.status).unwrap();
    }
    writeln!(out).unwrap();
    term_table(&mut out, &report.parsimonious);
    writeln!(out).unwrap();
    term_table(&mut out, &report.intermediate);
    writeln!(out).unwrap();
    write!(out, "{report}").unwrap();
    Ok(out.into_bytes())
}

pub fn simulate_crowd(ctx: &mut Ctx, a: &SimulateCrowdArgs) -> Result<Vec<u8>, CliError> {
    let schema = RatingSchema::by_name(&a.schema).map_err(invalid)?;
    if a.rounds == 0 {
        return Err(invalid("--rounds must be at least 1"));
    }
    let mut aggregates = Vec::new();
    let mut all_sheets = Vec::new();
    for r in 0..a.rounds {
        let s = seed::derive(a.seed, r as u64);
        let sheets = judge::simulate_crowd(s, a.quality, a.raters, a.noise_sd, &schema, &a.venture_id).map_err(invalid)?;
        let scores = judge::aggregate_unweighted(&schema, &sheets).map_err(internal)?;
        let probability = judge::composite_to_probability(&scores, &schema);
        aggregates.push(RoundAggregate { round_id: sheets[0].round_id.clone(), venture_id: a.venture_id.clone(), scores, probability });
        all_sheets.extend(sheets);
    }
    if ctx.format == Format::Json {
        return Ok(ctx.json(json!({ "schema": schema, "aggregates": aggregates, "sheets": all_sheets })));
    }
    let mut buf = Vec::new();
    judge::write_aggregates_csv(&mut buf, &schema, &aggregates).map_err(internal)?;
    Ok(buf)
}

pub fn synth(ctx: &mut Ctx, a: &SynthArgs) -> Result<Vec<u8>, CliError> {
    let models = if a.separable {
        synth::separable_ventures(&ctx.taxonomy, a.n, a.seed)
    } else {
        synth::ventures(&ctx.taxonomy, a.n, a.seed)
    };
    if ctx.format == Format::Json {
        return Ok(ctx.json(serde_json::to_value(&models).map_err(internal)?));
    }
    let mut buf = Vec::new();
    schema::write_ventures(&ctx.taxonomy, &models, &mut buf).map_err(internal)?;
    Ok(buf)
}

/// Seed a subcommand's result depends on, for the manifest.
pub fn seed_of(c: &Command) -> Option<u64> {
    match c {
        Command::Cluster(a) => Some(a.seed),
        Command::Archetypes(a) => Some(a.seed),
        Command::Train(a) => Some(a.seed),
        Command::Importance(a) => a.seed,
        Command::Evaluate(a) => Some(a.seed),
        Command::SimulateCrowd(a) => Some(a.seed),
        Command::Synth(a) => Some(a.seed),
        Command::Encode(_) | Command::Qca(_) | Command::Serve(_) => None,
    }
}
