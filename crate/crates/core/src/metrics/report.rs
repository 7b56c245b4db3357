use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(adversarial − clean) / clean · 100`.
pub fn error_growth_rate(clean: f64, adversarial: f64) -> Result<f64> {
    if !(clean > 0.0) || !clean.is_finite() {
        return Err(Error::arg(format!("clean error must be positive, got {clean}")));
    }
    Ok((adversarial - clean) / clean * 100.0)
}

/// Round half away from zero to two decimals, as the tables print.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// One table cell pair: clean and adversarial error for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub clean: f64,
    pub adv: f64,
    /// `None` when the clean error is zero.
    pub growth_pct: Option<f64>,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, clean: f64, adv: f64) -> Self {
        Self {
            metric: metric.into(),
            clean,
            adv,
            growth_pct: error_growth_rate(clean, adv).ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageQuality {
    pub psnr_db: f64,
    /// `None` for images smaller than the SSIM window.
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub image: Option<ImageQuality>,
}

impl MetricsReport {
    pub fn row(&self, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Arithmetic mean of every defined growth percentage.
    pub fn mean_growth_pct(&self) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.growth_pct).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// CSV with columns `metric,clean,adv,growth_pct`; growth printed to two
    /// decimals and left empty when undefined.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        out.write_record(["metric", "clean", "adv", "growth_pct"])
            .map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.metric.clone(),
                r.clean.to_string(),
                r.adv.to_string(),
                r.growth_pct.map(|g| format!("{:.2}", g)).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}
