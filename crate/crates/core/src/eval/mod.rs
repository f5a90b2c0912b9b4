//! Leave-one-domain-out experiments: metric, per-cell training with
//! validation-based model selection, and result tables.

mod table;

use rayon::prelude::*;

use crate::datagen::{split, Dataset, Split};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::model::{
    predict, predict_plain, train, Checkpoint, Classifier, CpitConfig, Method, Objective,
    StylePool, TrainOptions,
};
use crate::rng::derived;
use crate::stain::{lab_stats, reinhard_normalize, LabStats};

pub use table::{ResultRow, ResultTable};

/// Mean of per-class recalls.
pub fn balanced_accuracy(preds: &[usize], labels: &[usize], k: usize) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (&p, &y) in preds.iter().zip(labels) {
        if y >= k {
            return Err(Error::InvalidParameter(format!(
                "label {y} out of range for {k} classes"
            )));
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(Error::MissingClass(c));
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| h as f64 / t as f64)
        .sum::<f64>()
        / k as f64)
}

/// Everything a leave-one-domain-out run needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub hold_outs: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub cpit: CpitConfig,
    pub train: TrainOptions,
    pub input_side: usize,
    pub hidden_dim: usize,
    /// Predict with the marginalized mixture for the mixture-trained methods.
    pub marginalize: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            hold_outs: vec![0],
            methods: vec![Method::Baseline, Method::Stainnorm, Method::Clear],
            seeds: vec![1, 2, 3],
            cpit: CpitConfig::default(),
            train: TrainOptions::default(),
            input_side: 16,
            hidden_dim: 0,
            marginalize: true,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one seed is required".into(),
            ));
        }
        if self.hold_outs.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one hold-out domain is required".into(),
            ));
        }
        if let Some(h) = self.hold_outs.iter().find(|&&h| h >= ds.num_domains()) {
            return Err(Error::InvalidParameter(format!(
                "hold-out domain {h} does not exist"
            )));
        }
        if ds.num_domains() < 2 {
            return Err(Error::InvalidParameter(
                "leave-one-domain-out needs >= 2 domains".into(),
            ));
        }
        if self.input_side == 0 {
            return Err(Error::InvalidParameter("input_side must be >= 1".into()));
        }
        self.cpit.validate()?;
        self.train.validate()
    }
}

/// Which records each stage of a cell touched, by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub train: Vec<String>,
    pub selection: Vec<String>,
    pub styles: Vec<String>,
    pub reference: Option<String>,
    pub test: Vec<String>,
}

/// Error unless no training, validation or style record comes from the
/// held-out domain and every test record does.
pub fn check_provenance(ds: &Dataset, split: &Split) -> Result<()> {
    let h = split.hold_out;
    for (stage, idx) in [("training", &split.train), ("validation", &split.val)] {
        if let Some(&i) = idx.iter().find(|&&i| ds.records[i].domain == h) {
            return Err(Error::ProvenanceViolation(format!(
                "{stage} record {} belongs to held-out domain {}",
                ds.records[i].id, ds.domain_names[h]
            )));
        }
    }
    if let Some(&i) = split.test.iter().find(|&&i| ds.records[i].domain != h) {
        return Err(Error::ProvenanceViolation(format!(
            "test record {} is not from held-out domain {}",
            ds.records[i].id, ds.domain_names[h]
        )));
    }
    Ok(())
}

/// A model trained on one split with its selection trace.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub checkpoint: Checkpoint,
    pub best_epoch: usize,
    pub val_balanced_accuracy: f64,
    pub losses: Vec<f64>,
    pub pool: Option<StylePool>,
    pub provenance: Provenance,
}

/// One (method, hold-out, seed) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub hold_out: usize,
    pub seed: u64,
    pub balanced_accuracy: f64,
    pub best_epoch: usize,
    pub provenance: Provenance,
}

struct Prepared<'a> {
    images: Vec<std::borrow::Cow<'a, ImagePatch>>,
    reference: Option<LabStats>,
}

fn prepare<'a>(ds: &'a Dataset, split: &Split, method: Method) -> Result<Prepared<'a>> {
    use std::borrow::Cow;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::InvalidParameter(
            "training and validation splits must be nonempty".into(),
        ));
    }
    Ok(match method {
        Method::Stainnorm => {
            let reference = lab_stats(&ds.records[split.train[0]].image);
            let images = ds
                .records
                .par_iter()
                .map(|r| Cow::Owned(reinhard_normalize(&r.image, &reference)))
                .collect();
            Prepared {
                images,
                reference: Some(reference),
            }
        }
        _ => Prepared {
            images: ds.records.iter().map(|r| Cow::Borrowed(&r.image)).collect(),
            reference: None,
        },
    })
}

fn ensure_uniform_size(ds: &Dataset) -> Result<(usize, usize)> {
    let dims = ds
        .records
        .first()
        .map(|r| r.image.dims())
        .ok_or_else(|| Error::InvalidParameter("dataset is empty".into()))?;
    if let Some(r) = ds.records.iter().find(|r| r.image.dims() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "{} is {:?}, expected {:?} like the first record",
            r.id,
            r.image.dims(),
            dims
        )));
    }
    Ok(dims)
}

/// Labels predicted for `idx`, marginalized when `mix` is given.
fn predict_all(
    clf: &Classifier,
    images: &[std::borrow::Cow<'_, ImagePatch>],
    idx: &[usize],
    mix: Option<(&StylePool, &CpitConfig)>,
    seed: u64,
    stream: &[u64],
) -> Result<Vec<usize>> {
    idx.iter()
        .enumerate()
        .map(|(n, &i)| match mix {
            Some((pool, cfg)) => {
                let mut path = stream.to_vec();
                path.push(n as u64);
                Ok(predict(clf, &images[i], pool, cfg, &mut derived(seed, &path))?.label)
            }
            None => Ok(predict_plain(clf, &images[i]).label),
        })
        .collect()
}

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_VAL: u64 = 3;
const STREAM_TEST: u64 = 4;

/// Train `method` on the split's training part, selecting the epoch with the
/// best pooled-validation balanced accuracy (earliest on ties).
pub fn fit(
    ds: &Dataset,
    split: &Split,
    method: Method,
    seed: u64,
    plan: &ExperimentPlan,
) -> Result<Fitted> {
    check_provenance(ds, split)?;
    fit_prepared(ds, split, method, seed, plan, &prepare(ds, split, method)?)
}

fn fit_prepared(
    ds: &Dataset,
    split: &Split,
    method: Method,
    seed: u64,
    plan: &ExperimentPlan,
    prep: &Prepared<'_>,
) -> Result<Fitted> {
    let (h, w) = ensure_uniform_size(ds)?;
    let k = ds.num_classes();
    let cfg = method.cpit_config(&CpitConfig { seed, ..plan.cpit });
    let pool = match cfg {
        Some(_) => {
            let pool = StylePool::new(
                h,
                w,
                split
                    .train
                    .iter()
                    .map(|&i| (ds.records[i].image.clone(), ds.records[i].domain)),
            )?;
            let mut domains: Vec<usize> =
                split.train.iter().map(|&i| ds.records[i].domain).collect();
            domains.sort_unstable();
            domains.dedup();
            pool.require_domains(&domains)?;
            Some(pool)
        }
        None => None,
    };
    let base = [split.hold_out as u64];
    let mut clf = Classifier::random(
        plan.input_side,
        plan.hidden_dim,
        k,
        &mut derived(seed, &[base[0], STREAM_INIT]),
    )?;
    let data: Vec<(&ImagePatch, usize)> = split
        .train
        .iter()
        .map(|&i| (prep.images[i].as_ref(), ds.records[i].label))
        .collect();
    let val_labels: Vec<usize> = split.val.iter().map(|&i| ds.records[i].label).collect();
    let mix = match (&pool, &cfg) {
        (Some(p), Some(c)) if plan.marginalize => Some((p, c)),
        _ => None,
    };
    let objective = match (&pool, &cfg) {
        (Some(pool), Some(cfg)) => Objective::Cpit { pool, cfg },
        _ => Objective::Plain,
    };

    let mut best: Option<(f64, usize, Classifier)> = None;
    let report = train(
        &mut clf,
        &data,
        objective,
        &plan.train,
        &mut derived(seed, &[base[0], STREAM_TRAIN]),
        |epoch, clf, _| {
            let preds = predict_all(
                clf,
                &prep.images,
                &split.val,
                mix,
                seed,
                &[base[0], STREAM_VAL, epoch as u64],
            )?;
            let ba = balanced_accuracy(&preds, &val_labels, k)?;
            if best.as_ref().is_none_or(|(b, _, _)| ba > *b) {
                best = Some((ba, epoch, clf.clone()));
            }
            Ok(())
        },
    )?;
    let (val_ba, best_epoch, clf) = match best {
        Some(b) => b,
        None => {
            // zero epochs: the initial model is the only candidate
            let preds = predict_all(
                &clf,
                &prep.images,
                &split.val,
                mix,
                seed,
                &[base[0], STREAM_VAL, 0],
            )?;
            (balanced_accuracy(&preds, &val_labels, k)?, 0, clf)
        }
    };
    let ids = |idx: &[usize]| {
        idx.iter()
            .map(|&i| ds.records[i].id.clone())
            .collect::<Vec<_>>()
    };
    let provenance = Provenance {
        train: ids(&split.train),
        selection: ids(&split.val),
        styles: if pool.is_some() {
            ids(&split.train)
        } else {
            Vec::new()
        },
        reference: prep
            .reference
            .map(|_| ds.records[split.train[0]].id.clone()),
        test: Vec::new(),
    };
    Ok(Fitted {
        checkpoint: Checkpoint::new(
            method,
            cfg.unwrap_or(CpitConfig { seed, ..plan.cpit }),
            prep.reference,
            clf,
        ),
        best_epoch,
        val_balanced_accuracy: val_ba,
        losses: report.losses,
        pool,
        provenance,
    })
}

/// Fit on the training domains and score on the held-out domain.
pub fn run_cell(
    ds: &Dataset,
    method: Method,
    hold_out: usize,
    seed: u64,
    plan: &ExperimentPlan,
) -> Result<CellResult> {
    let split = split(ds, hold_out, seed)?;
    check_provenance(ds, &split)?;
    let prep = prepare(ds, &split, method)?;
    let fitted = fit_prepared(ds, &split, method, seed, plan, &prep)?;
    let ckpt = &fitted.checkpoint;
    let mix = match (&fitted.pool, method.cpit_config(&ckpt.cpit)) {
        (Some(p), Some(_)) if plan.marginalize => Some((p, &ckpt.cpit)),
        _ => None,
    };
    let preds = predict_all(
        &ckpt.classifier,
        &prep.images,
        &split.test,
        mix,
        seed,
        &[hold_out as u64, STREAM_TEST],
    )?;
    let labels: Vec<usize> = split.test.iter().map(|&i| ds.records[i].label).collect();
    let mut provenance = fitted.provenance;
    provenance.test = split
        .test
        .iter()
        .map(|&i| ds.records[i].id.clone())
        .collect();
    Ok(CellResult {
        method,
        hold_out,
        seed,
        balanced_accuracy: balanced_accuracy(&preds, &labels, ds.num_classes())?,
        best_epoch: fitted.best_epoch,
        provenance,
    })
}

/// Run every (hold-out, method, seed) cell. `on_cell` sees each result as it
/// completes so callers can keep partial results if a later cell fails.
pub fn run_plan_with<F>(ds: &Dataset, plan: &ExperimentPlan, mut on_cell: F) -> Result<ResultTable>
where
    F: FnMut(&CellResult),
{
    plan.validate(ds)?;
    let mut table = ResultTable::new(plan.seeds.clone());
    for &h in &plan.hold_outs {
        for &m in &plan.methods {
            let results: Vec<Result<CellResult>> = plan
                .seeds
                .par_iter()
                .map(|&s| run_cell(ds, m, h, s, plan))
                .collect();
            let mut per_seed = Vec::with_capacity(results.len());
            for r in results {
                let r = r?;
                log::info!(
                    "{} held out {}, seed {}: balanced accuracy {:.4} (epoch {})",
                    r.method,
                    ds.domain_names[h],
                    r.seed,
                    r.balanced_accuracy,
                    r.best_epoch
                );
                on_cell(&r);
                per_seed.push(Some(r.balanced_accuracy));
            }
            table
                .rows
                .push(ResultRow::new(m, ds.domain_names[h].clone(), per_seed));
        }
    }
    Ok(table)
}

pub fn run_plan(ds: &Dataset, plan: &ExperimentPlan) -> Result<ResultTable> {
    run_plan_with(ds, plan, |_| {})
}
