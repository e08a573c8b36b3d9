//! CSV outputs. Floats use the shortest decimal form that parses back to
//! the same `f64`.

use std::path::Path;

use adcluster::pipeline::Adapted;
use adcluster::trainer::Evaluation;
use adcluster::{Dataset, History, QueryGallery};

pub const HISTORY_COLUMNS: [&str; 11] =
    ["iteration", "n_clusters", "n_noise", "pseudo_fscore", "mAP", "cmc1", "cmc5", "cmc10", "J", "mean_L_div", "mean_L_tri"];

pub const FINAL_COLUMNS: [&str; 9] = ["stage", "mode", "mAP", "cmc1", "cmc5", "cmc10", "J", "n_queries_evaluated", "n_queries_skipped"];

pub const SWEEP_COLUMNS: [&str; 3] = ["lambda", "mAP", "rank1"];

fn num(v: f64) -> String {
    // `Display` for f64 is round-trip exact; spell out the specials.
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

pub fn write_history(path: &Path, history: &History) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HISTORY_COLUMNS)?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            r.n_clusters.to_string(),
            r.n_noise.to_string(),
            num(r.pseudo_fscore),
            num(r.map),
            num(r.cmc1),
            num(r.cmc5),
            num(r.cmc10),
            num(r.j),
            num(r.mean_l_div),
            num(r.mean_l_tri),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn eval_row(stage: &str, mode: &str, e: &Evaluation) -> Vec<String> {
    let m = &e.metrics;
    vec![
        stage.into(),
        mode.into(),
        num(m.map),
        num(m.cmc1),
        num(m.cmc5),
        num(m.cmc10),
        num(e.j),
        m.n_queries_evaluated.to_string(),
        m.n_queries_skipped.to_string(),
    ]
}

/// Direct-transfer and adapted metrics, one row each.
pub fn write_final_metrics(path: &Path, direct: &Evaluation, adapted: &Adapted<f64>) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FINAL_COLUMNS)?;
    w.write_record(eval_row("direct_transfer", "none", direct))?;
    w.write_record(eval_row("adapted", adapted.mode.as_str(), &adapted.last))?;
    w.flush()?;
    Ok(())
}

pub fn write_evaluation(path: &Path, stage: &str, e: &Evaluation) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FINAL_COLUMNS)?;
    w.write_record(eval_row(stage, "none", e))?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, rows: &[(f64, Evaluation)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for (lambda, e) in rows {
        w.write_record([num(*lambda), num(e.metrics.map), num(e.metrics.cmc1)])?;
    }
    w.flush()?;
    Ok(())
}

/// Pseudo-label per target sample, `-1` for noise.
pub fn write_assignment(path: &Path, labels: &[Option<usize>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_index", "pseudo_label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.map_or("-1".into(), |c| c.to_string())])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sample: index, identity, camera and the raw coordinates.
pub fn write_dataset(path: &Path, ds: &Dataset) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string(), "identity".into(), "camera".into()];
    header.extend((0..ds.raw_dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (i, s) in ds.samples.iter().enumerate() {
        let mut row = vec![i.to_string(), s.identity.to_string(), s.camera.to_string()];
        row.extend(s.raw.iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_split(path: &Path, split: &QueryGallery) -> csv::Result<()> {
    let mut rows: Vec<(usize, &str)> = split.query.iter().map(|&i| (i, "query")).collect();
    rows.extend(split.gallery.iter().map(|&i| (i, "gallery")));
    rows.sort_unstable();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "role"])?;
    for (i, role) in rows {
        w.write_record([i.to_string(), role.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
