use std::io::Write;

use serde::{Deserialize, Serialize};

use super::batch::RunRecord;
use crate::error::{Error, Result};

/// Swept configuration field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKey {
    Eta,
    Queries,
}

impl SweepKey {
    pub fn column(self) -> &'static str {
        match self {
            SweepKey::Eta => "eta",
            SweepKey::Queries => "queries",
        }
    }

    fn value(self, r: &RunRecord) -> f64 {
        match self {
            SweepKey::Eta => r.attack.eta,
            SweepKey::Queries => r.attack.budget as f64,
        }
    }

    /// The record with the swept field neutralized and per-image data dropped.
    fn fingerprint(self, r: &RunRecord) -> Result<String> {
        let mut attack = r.attack.clone();
        match self {
            SweepKey::Eta => attack.eta = 0.0,
            SweepKey::Queries => attack.budget = 0,
        }
        let ids: Vec<&str> = r.images.iter().map(|i| i.id.as_str()).collect();
        Ok(serde_json::to_string(&(
            &r.oracle,
            &r.codec,
            &attack,
            &r.baseline,
            r.body_seed,
            ids,
        ))?)
    }
}

impl std::str::FromStr for SweepKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(SweepKey::Eta),
            "queries" | "t" => Ok(SweepKey::Queries),
            _ => Err(Error::arg(format!("unknown sweep key {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub value: f64,
    pub mean_growth_pct: f64,
}

/// `(sweep value, mean growth %)` per record, ascending by sweep value.
pub fn plot_rows(records: &[RunRecord], key: SweepKey) -> Result<Vec<PlotRow>> {
    if let Some(first) = records.first() {
        let reference = key.fingerprint(first)?;
        for r in &records[1..] {
            if key.fingerprint(r)? != reference {
                return Err(Error::arg(format!(
                    "records differ in more than the swept {} field",
                    key.column()
                )));
            }
        }
    }
    let mut rows = records
        .iter()
        .map(|r| {
            let g = r.aggregate.mean_growth_pct.ok_or_else(|| {
                Error::arg(format!(
                    "record at {}={} has no defined growth rate",
                    key.column(),
                    key.value(r)
                ))
            })?;
            Ok(PlotRow {
                value: key.value(r),
                mean_growth_pct: g,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}

/// CSV with header `<key>,mean_growth_pct`.
pub fn emit_plot_data<W: Write>(records: &[RunRecord], key: SweepKey, w: W) -> Result<Vec<PlotRow>> {
    let rows = plot_rows(records, key)?;
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record([key.column(), "mean_growth_pct"]).map_err(csv_err)?;
    for r in &rows {
        out.write_record([r.value.to_string(), r.mean_growth_pct.to_string()])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(rows)
}
