use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BaselineSpec, CodecSpec, ExperimentConfig, OracleSpec, ReportFormat};
use super::io::{input_id, load_ground_truth, load_image, save_raw_image, GroundTruth};
use crate::codec::Codec;
use crate::enhancement::{fgsm_baseline, pgd_baseline, run_attack, AdversarialResult, AttackAbort, AttackConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{pose_errors, psnr, ssim, ImageQuality, MetricRow, MetricsReport};
use crate::noise::DirectionMode;
use crate::oracle::{LocalOracle, Oracle};
use crate::pose::{EstimateSet, PartLayout, ToyBodyModel};
use crate::sensitivity::{combined_jacobian, oracle_jacobian, top_singular_direction, JacobianMode, DEFAULT_FD_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    /// Not attacked (unreadable input or no ground truth).
    Skipped,
    /// Attack or evaluation stopped early; metrics cover what was reached.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Budget,
    Transport,
    Protocol,
    Other,
}

impl FailureKind {
    pub fn of(e: &Error) -> Self {
        match e {
            Error::Budget { .. } => FailureKind::Budget,
            Error::Transport(_) => FailureKind::Transport,
            Error::Protocol(_) => FailureKind::Protocol,
            _ => FailureKind::Other,
        }
    }
}

/// Condensed [`AdversarialResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub queries_used: u64,
    pub objective_history: Vec<f64>,
    pub update_ops_per_step: u64,
    pub linf: f64,
    pub l2: f64,
    /// Squared estimate deviation from ground truth, clean input.
    pub deviation_clean: f64,
    /// Squared estimate deviation from ground truth, adversarial input.
    pub deviation_adv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub status: RecordStatus,
    pub failure: Option<FailureKind>,
    pub reason: Option<String>,
    pub summary: Option<ResultSummary>,
    pub metrics: Option<MetricsReport>,
    /// Kept out of the JSON report so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Arithmetic means over evaluated images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub evaluated: usize,
    pub skipped: usize,
    pub partial: usize,
    /// Per metric: mean clean, mean adversarial, growth of the means.
    pub metrics: Vec<MetricRow>,
    /// Mean of the defined growth percentages in `metrics`.
    pub mean_growth_pct: Option<f64>,
    pub mean_psnr_db: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub mean_deviation_clean: Option<f64>,
    pub mean_deviation_adv: Option<f64>,
    pub mean_queries_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub oracle: OracleSpec,
    pub codec: CodecSpec,
    pub attack: AttackConfig,
    pub baseline: Option<BaselineSpec>,
    pub body_seed: u64,
    pub images: Vec<ImageRecord>,
    pub aggregate: Aggregate,
}

impl RunRecord {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Long-format CSV: one line per (image, metric), then `mean` lines.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        out.write_record(["id", "metric", "clean", "adv", "growth_pct"])
            .map_err(csv_err)?;
        let rows = self
            .images
            .iter()
            .filter_map(|r| r.metrics.as_ref().map(|m| (r.id.as_str(), &m.rows)))
            .chain(std::iter::once(("mean", &self.aggregate.metrics)));
        for (id, metrics) in rows {
            for r in metrics {
                out.write_record([
                    id.to_string(),
                    r.metric.clone(),
                    r.clean.to_string(),
                    r.adv.to_string(),
                    r.growth_pct.map(|g| format!("{g:.2}")).unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Worst failure among the images, if any.
    pub fn failure(&self) -> Option<FailureKind> {
        let kinds: Vec<FailureKind> = self.images.iter().filter_map(|r| r.failure).collect();
        [
            FailureKind::Transport,
            FailureKind::Budget,
            FailureKind::Protocol,
            FailureKind::Other,
        ]
        .into_iter()
        .find(|k| kinds.contains(k))
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates for a list of image records.
pub fn aggregate(images: &[ImageRecord]) -> Aggregate {
    let evaluated: Vec<&ImageRecord> = images.iter().filter(|r| r.metrics.is_some()).collect();
    let mut order: Vec<String> = Vec::new();
    let mut cols: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
    let (mut ps, mut ss) = (Vec::new(), Vec::new());
    for r in &evaluated {
        let m = r.metrics.as_ref().expect("filtered");
        for row in &m.rows {
            let e = cols.entry(row.metric.clone()).or_insert_with(|| {
                order.push(row.metric.clone());
                (Vec::new(), Vec::new())
            });
            e.0.push(row.clean);
            e.1.push(row.adv);
        }
        if let Some(q) = m.image {
            ps.push(q.psnr_db);
            ss.extend(q.ssim);
        }
    }
    let metrics: Vec<MetricRow> = order
        .iter()
        .map(|name| {
            let (c, a) = &cols[name];
            MetricRow::new(name.clone(), mean(c).unwrap_or(0.0), mean(a).unwrap_or(0.0))
        })
        .collect();
    let summaries: Vec<&ResultSummary> = evaluated.iter().filter_map(|r| r.summary.as_ref()).collect();
    let pick = |f: fn(&ResultSummary) -> f64| mean(&summaries.iter().map(|s| f(s)).collect::<Vec<_>>());
    let mean_growth_pct = MetricsReport {
        rows: metrics.clone(),
        image: None,
    }
    .mean_growth_pct();
    Aggregate {
        evaluated: evaluated.len(),
        skipped: images.iter().filter(|r| r.status == RecordStatus::Skipped).count(),
        partial: images.iter().filter(|r| r.status == RecordStatus::Partial).count(),
        metrics,
        mean_growth_pct,
        mean_psnr_db: mean(&ps),
        mean_ssim: mean(&ss),
        mean_deviation_clean: pick(|s| s.deviation_clean),
        mean_deviation_adv: pick(|s| s.deviation_adv),
        mean_queries_used: pick(|s| s.queries_used as f64),
    }
}

type BoxedOracle = Box<dyn Oracle<f64>>;
type EstimatorCache = HashMap<usize, std::sync::Arc<dyn crate::oracle::Estimator<f64>>>;

/// Metered oracle for the attack and an unmetered one for evaluation, each
/// with its own ledger (and its own server session when remote).
fn oracles_for(spec: &OracleSpec, id: &str, n: usize, cache: &EstimatorCache) -> Result<(BoxedOracle, BoxedOracle)> {
    if spec.is_local() {
        let est = cache
            .get(&n)
            .cloned()
            .ok_or_else(|| Error::arg("no estimator for image size"))?;
        Ok((
            Box::new(LocalOracle::new(est.clone(), spec.budget())),
            Box::new(LocalOracle::unlimited(est)),
        ))
    } else {
        Ok((
            Box::new(spec.remote_client(id, spec.budget())?),
            Box::new(spec.remote_client(&format!("eval-{id}"), None)?),
        ))
    }
}

/// Top right singular vector of `J_P(x)·J_G(μ(x))`.
pub fn sensitive_direction(
    oracle: &dyn Oracle<f64>,
    codec: &Codec<f64>,
    x: &Image<f64>,
    mode: JacobianMode,
) -> Result<Vec<f64>> {
    let jp = oracle_jacobian(oracle, x, DEFAULT_FD_STEP, mode)?;
    let mu = crate::codec::LatentVector::new(codec.encode(x)?.mu);
    let jg = codec.decoder_jacobian(&mu)?;
    let (_, v1) = top_singular_direction(&combined_jacobian(&jp, &jg)?);
    Ok(v1.as_slice().to_vec())
}

pub(crate) fn jacobian_mode(spec: &OracleSpec) -> JacobianMode {
    if spec.is_local() {
        JacobianMode::Analytic
    } else {
        JacobianMode::FiniteDifference
    }
}

struct Attacked {
    result: AdversarialResult<f64>,
    error: Option<Error>,
}

fn attack_one(
    cfg: &ExperimentConfig,
    attacker: &dyn Oracle<f64>,
    evaluator: &dyn Oracle<f64>,
    codec: &Codec<f64>,
    x: &Image<f64>,
    gt: &EstimateSet<f64>,
) -> Attacked {
    let direction = if cfg.attack.direction_mode == DirectionMode::Svd && cfg.baseline.is_none() {
        match sensitive_direction(evaluator, codec, x, jacobian_mode(&cfg.oracle)) {
            Ok(v) => Some(v),
            Err(error) => {
                return Attacked {
                    result: AdversarialResult::unrefined(x, &vec![0.0; x.len()]).expect("same shape"),
                    error: Some(error),
                }
            }
        }
    } else {
        None
    };
    let outcome = match cfg.baseline {
        Some(BaselineSpec::Fgsm { epsilon }) => fgsm_baseline(attacker, x, gt, epsilon),
        Some(BaselineSpec::Pgd { epsilon, steps, alpha }) => pgd_baseline(attacker, x, gt, epsilon, steps, alpha),
        None => run_attack(attacker, codec, x, gt, &cfg.attack, direction.as_deref()).map(|o| o.result),
    };
    match outcome {
        Ok(result) => Attacked { result, error: None },
        Err(AttackAbort { error, partial }) => Attacked {
            result: *partial,
            error: Some(error),
        },
    }
}

fn evaluate(
    evaluator: &dyn Oracle<f64>,
    body: &ToyBodyModel<f64>,
    x: &Image<f64>,
    result: &AdversarialResult<f64>,
    gt: &EstimateSet<f64>,
) -> Result<(ResultSummary, MetricsReport)> {
    let clean = evaluator.query(x)?;
    let adv = evaluator.query(&result.x_adv)?;
    let clean_err = pose_errors(body, &clean, gt)?;
    let adv_err = pose_errors(body, &adv, gt)?;
    let rows = clean_err
        .into_iter()
        .zip(adv_err)
        .map(|((name, c), (_, a))| MetricRow::new(name, c, a))
        .collect();
    let image = ImageQuality {
        psnr_db: psnr(x, &result.x_adv)?,
        // undefined below one full window
        ssim: ssim(x, &result.x_adv).ok(),
    };
    let d = &result.delta_final;
    let summary = ResultSummary {
        queries_used: result.queries_used,
        objective_history: result.objective_history.clone(),
        update_ops_per_step: result.update_ops_per_step,
        linf: d.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        l2: d.iter().map(|v| v * v).sum::<f64>().sqrt(),
        deviation_clean: clean.deviation(gt).total(),
        deviation_adv: adv.deviation(gt).total(),
    };
    Ok((
        summary,
        MetricsReport {
            rows,
            image: Some(image),
        },
    ))
}

fn skipped(id: String, reason: String) -> ImageRecord {
    ImageRecord {
        id,
        status: RecordStatus::Skipped,
        failure: None,
        reason: Some(reason),
        summary: None,
        metrics: None,
        wall_time: Duration::ZERO,
    }
}

/// Output of [`compute_batch`]: the record plus adversarial images by id.
pub struct BatchOutput {
    pub record: RunRecord,
    pub adversarial: Vec<(String, Image<f64>)>,
}

/// Runs the batch without touching the output directory.
pub fn compute_batch(cfg: &ExperimentConfig) -> Result<BatchOutput> {
    cfg.validate()?;
    let gt: GroundTruth = match &cfg.ground_truth {
        Some(p) => load_ground_truth(p)?,
        None => GroundTruth::new(),
    };
    let body = ToyBodyModel::<f64>::with_parts(cfg.body_seed, PartLayout::default())?;

    let loaded: Vec<(String, Result<Image<f64>>)> = cfg.inputs.iter().map(|p| (input_id(p), load_image(p))).collect();
    let mut codecs: HashMap<(usize, usize, usize), Codec<f64>> = HashMap::new();
    let mut estimators = HashMap::new();
    for (_, img) in &loaded {
        if let Ok(x) = img {
            let shape = (x.width(), x.height(), x.channels());
            if let std::collections::hash_map::Entry::Vacant(e) = codecs.entry(shape) {
                e.insert(cfg.codec.build(shape.0, shape.1, shape.2)?);
            }
            if cfg.oracle.is_local() && !estimators.contains_key(&x.len()) {
                estimators.insert(x.len(), cfg.oracle.local_estimator(x.len())?);
            }
        }
    }

    let results: Vec<(ImageRecord, Option<Image<f64>>)> = loaded
        .par_iter()
        .map(|(id, img)| {
            let start = Instant::now();
            let x = match img {
                Ok(x) => x,
                Err(e) => return (skipped(id.clone(), format!("unreadable input: {e}")), None),
            };
            let Some(truth) = gt.get(id) else {
                return (skipped(id.clone(), "missing ground truth".into()), None);
            };
            let codec = &codecs[&(x.width(), x.height(), x.channels())];
            let (attacker, evaluator) = match oracles_for(&cfg.oracle, id, x.len(), &estimators) {
                Ok(v) => v,
                Err(e) => return (skipped(id.clone(), e.to_string()), None),
            };
            let attacked = attack_one(cfg, attacker.as_ref(), evaluator.as_ref(), codec, x, truth);
            let mut failure = attacked.error.as_ref().map(FailureKind::of);
            let mut reason = attacked.error.as_ref().map(|e| e.to_string());
            let (summary, metrics) = match evaluate(evaluator.as_ref(), &body, x, &attacked.result, truth) {
                Ok((s, m)) => (Some(s), Some(m)),
                Err(e) => {
                    failure = failure.or(Some(FailureKind::of(&e)));
                    reason = reason.or(Some(format!("evaluation failed: {e}")));
                    (None, None)
                }
            };
            let record = ImageRecord {
                id: id.clone(),
                status: if failure.is_some() {
                    RecordStatus::Partial
                } else {
                    RecordStatus::Ok
                },
                failure,
                reason,
                summary,
                metrics,
                wall_time: start.elapsed(),
            };
            (record, Some(attacked.result.x_adv))
        })
        .collect();

    let mut images = Vec::with_capacity(results.len());
    let mut adversarial = Vec::new();
    for (rec, adv) in results {
        if let Some(a) = adv {
            adversarial.push((rec.id.clone(), a));
        }
        images.push(rec);
    }
    let aggregate = aggregate(&images);
    Ok(BatchOutput {
        record: RunRecord {
            oracle: cfg.oracle.clone(),
            codec: cfg.codec.clone(),
            attack: cfg.attack.clone(),
            baseline: cfg.baseline.clone(),
            body_seed: cfg.body_seed,
            images,
            aggregate,
        },
        adversarial,
    })
}

/// File names written into the output directory.
pub const RECORD_JSON: &str = "run_record.json";
pub const RECORD_CSV: &str = "run_record.csv";
pub const TIMINGS_JSON: &str = "timings.json";
pub const ADV_DIR: &str = "adversarial";

/// Runs the batch and writes reports, timings and adversarial images.
pub fn run_attack_batch(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let out = compute_batch(cfg)?;
    write_outputs(cfg, &out)?;
    Ok(out.record)
}

fn write_outputs(cfg: &ExperimentConfig, out: &BatchOutput) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if cfg.formats.contains(&ReportFormat::Json) {
        let p = dir.join(RECORD_JSON);
        std::fs::write(&p, out.record.to_json()?)?;
        written.push(p);
    }
    if cfg.formats.contains(&ReportFormat::Csv) {
        let p = dir.join(RECORD_CSV);
        let mut w = BufWriter::new(File::create(&p)?);
        out.record.write_csv(&mut w)?;
        w.flush()?;
        written.push(p);
    }
    let timings: std::collections::BTreeMap<&str, f64> = out
        .record
        .images
        .iter()
        .map(|r| (r.id.as_str(), r.wall_time.as_secs_f64()))
        .collect();
    std::fs::write(dir.join(TIMINGS_JSON), serde_json::to_string_pretty(&timings)? + "\n")?;
    if cfg.write_images && !out.adversarial.is_empty() {
        std::fs::create_dir_all(dir.join(ADV_DIR))?;
        for (id, img) in &out.adversarial {
            save_raw_image(img, dir.join(ADV_DIR).join(format!("{id}.imgf")))?;
        }
    }
    Ok(written)
}
