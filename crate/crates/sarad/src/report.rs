//! CSV outputs: training logs, detection scores, ROC curves. Floats are
//! written with the default formatter so parsing them back yields the
//! exact value.

use std::fmt::Write as _;
use std::path::Path;

use sarad_core::aae::AaeLogRow;
use sarad_core::despeckler::TrainLogRow;
use sarad_core::eval::RocCurve;

use crate::error::{io_err, Result};

fn write_csv(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_despeckle_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let mut out = String::from("batch,phase,lr,loss\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.batch, r.phase, r.lr, r.loss);
    }
    write_csv(path, out)
}

pub fn write_aae_log(path: &Path, rows: &[AaeLogRow]) -> Result<()> {
    let mut out = String::from("epoch,rec_loss,disc_loss,gen_loss,lr\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.rec_loss, r.disc_loss, r.gen_loss, r.lr
        );
    }
    write_csv(path, out)
}

pub fn write_results(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut out = String::from("method,auc\n");
    for (method, auc) in rows {
        let _ = writeln!(out, "{method},{auc}");
    }
    write_csv(path, out)
}

pub fn write_results_timed(path: &Path, rows: &[(String, f64, f64)]) -> Result<()> {
    let mut out = String::from("method,auc,runtime_seconds\n");
    for (method, auc, seconds) in rows {
        let _ = writeln!(out, "{method},{auc},{seconds}");
    }
    write_csv(path, out)
}

pub fn write_roc(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut out = String::from("false_positive_rate,true_positive_rate\n");
    for (fpr, tpr) in curve.points() {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    write_csv(path, out)
}
