//! Metrics, the four-way comparison report, crop selection and plot data.
//!
//! The report's "MSE (%)" column carries the mean absolute percentage error
//! of the test split. Accuracy is defined as its complement, so every row
//! satisfies `accuracy + error = 100`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{predict_record, Method, Model};
use crate::error::{EvalError, IngestError};
use crate::ingest::Dataset;
use crate::schema::{encode_features, AgroRecord, Crop, District};

pub const NEAR_ZERO_ACTUAL: f64 = 1e-9;
pub const TABLE_HEADER: &str = "| Method | Training (%) | Testing (%) | Accuracy (%) | MSE (%) |";

/// Mean absolute percentage error, in percent.
pub fn mape(predictions: &[f64], actuals: &[f64]) -> Result<f64, EvalError> {
    if predictions.len() != actuals.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), actuals.len()));
    }
    if actuals.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut total = 0.0;
    for (i, (&p, &a)) in predictions.iter().zip(actuals).enumerate() {
        if a.abs() <= NEAR_ZERO_ACTUAL {
            return Err(EvalError::NearZeroActual(a, i));
        }
        total += (p - a).abs() / a.abs();
    }
    Ok(100.0 * total / actuals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub error_pct: f64,
    pub accuracy_pct: f64,
    pub n_test: usize,
}

impl Metrics {
    pub fn from_error(error_pct: f64, n_test: usize) -> Self {
        Self { error_pct, accuracy_pct: 100.0 - error_pct, n_test }
    }
}

/// Scores `model` against the raw yields of `test`.
pub fn evaluate(model: &Model, test: &Dataset) -> Result<Metrics, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let predictions = test
        .records
        .iter()
        .map(|r| predict_record(model, r))
        .collect::<Result<Vec<_>, _>>()?;
    let actuals: Vec<f64> = test.records.iter().map(|r| r.crop_yield).collect();
    Ok(Metrics::from_error(mape(&predictions, &actuals)?, test.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub training_pct: f64,
    pub testing_pct: f64,
    pub accuracy_pct: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropReport {
    pub crop: Crop,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: String,
    pub seed: u64,
    pub crops: Vec<CropReport>,
}

/// One row per slot, labelled DNN, SVM, Random Forest, Logistic Regression
/// in that order.
pub fn compare(models: [&Model; 4], test: &Dataset, train_ratio: f64) -> Result<Vec<ReportRow>, EvalError> {
    let metrics: Vec<Metrics> = models
        .par_iter()
        .map(|m| evaluate(m, test))
        .collect::<Result<_, _>>()?;
    let training_pct = 100.0 * train_ratio;
    Ok(Method::ALL
        .iter()
        .zip(metrics)
        .map(|(method, m)| ReportRow {
            method: method.display_name().to_string(),
            training_pct,
            testing_pct: 100.0 - training_pct,
            accuracy_pct: m.accuracy_pct,
            error_pct: m.error_pct,
        })
        .collect())
}

impl EvalReport {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.crops.iter().flat_map(|c| &c.rows)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Crop yield model comparison\n");
        let _ = writeln!(out, "Data: {}  ", self.provenance);
        let _ = writeln!(out, "Seed: {}\n", self.seed);
        for crop in &self.crops {
            let _ = writeln!(out, "## {}\n", crop.crop);
            let _ = writeln!(out, "Train rows: {}, test rows: {}\n", crop.n_train, crop.n_test);
            let _ = writeln!(out, "{TABLE_HEADER}");
            let _ = writeln!(out, "|---|---|---|---|---|");
            for r in &crop.rows {
                let _ = writeln!(
                    out,
                    "| {} | {}% | {}% | {:.2}% | {:.2}% |",
                    r.method, r.training_pct, r.testing_pct, r.accuracy_pct, r.error_pct
                );
            }
            out.push('\n');
        }
        out.push_str(
            "The MSE (%) column holds the mean absolute percentage error on the test split; \
             accuracy is 100 minus that error.\n",
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPrediction {
    pub crop: Crop,
    pub predicted_yield: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecommendation {
    pub district: District,
    pub year: i32,
    pub predictions: Vec<CropPrediction>,
    pub selected: Crop,
}

/// Index of the largest value; the earliest wins ties.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Crop with the highest predicted yield, ties going to enumeration order.
pub fn select_from_predictions(predictions: &[f64; 6]) -> Crop {
    Crop::ALL[argmax_first(predictions).expect("six values")]
}

/// Predicts every crop's yield for the record's conditions and picks the best.
pub fn select_crop(models: &BTreeMap<Crop, Model>, record: &AgroRecord) -> Result<CropRecommendation, EvalError> {
    encode_features(record).map_err(|e| EvalError::Model(e.into()))?;
    let mut values = [0.0; 6];
    let mut predictions = Vec::with_capacity(6);
    for &crop in Crop::ALL {
        let model = models.get(&crop).ok_or(EvalError::MissingCropModel(crop))?;
        let y = predict_record(model, record)?;
        values[crop.index()] = y;
        predictions.push(CropPrediction { crop, predicted_yield: y });
    }
    Ok(CropRecommendation {
        district: record.district,
        year: record.year,
        predictions,
        selected: select_from_predictions(&values),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    MaxTemp,
    MinTemp,
    AvgRainfall,
    Production,
    Yield,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::MaxTemp,
        PlotKind::MinTemp,
        PlotKind::AvgRainfall,
        PlotKind::Production,
        PlotKind::Yield,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PlotKind::MaxTemp => "max_temp",
            PlotKind::MinTemp => "min_temp",
            PlotKind::AvgRainfall => "avg_rainfall",
            PlotKind::Production => "production",
            PlotKind::Yield => "yield",
        }
    }

    fn per_crop(self) -> bool {
        matches!(self, PlotKind::Production | PlotKind::Yield)
    }
}

impl FromStr for PlotKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avgrainfall" => Ok(PlotKind::AvgRainfall),
            _ => PlotKind::ALL
                .into_iter()
                .find(|k| k.key() == s)
                .ok_or_else(|| EvalError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub district: District,
    pub year: i32,
    pub crop: Option<Crop>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub points: Vec<PlotPoint>,
}

impl PlotSeries {
    /// `kind,district,year,crop,value`; `crop` is empty for weather series.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,district,year,crop,value")?;
        for p in &self.points {
            let crop = p.crop.map(|c| format!("{c:?}")).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", self.kind.key(), p.district, p.year, crop, p.value)?;
        }
        Ok(())
    }
}

/// Weather kinds average per (district, year); production sums and yield
/// averages per (district, year, crop). Points are ordered by district,
/// year, then crop.
pub fn emit_plot_data(dataset: &Dataset, kind: PlotKind) -> Result<PlotSeries, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::Ingest(IngestError::EmptyDataset));
    }
    let mut groups: BTreeMap<(District, i32, Option<Crop>), (f64, usize)> = BTreeMap::new();
    for r in &dataset.records {
        let crop = kind.per_crop().then_some(r.crop);
        let value = match kind {
            PlotKind::MaxTemp => r.weather.max_temp,
            PlotKind::MinTemp => r.weather.min_temp,
            PlotKind::AvgRainfall => r.weather.avg_rainfall,
            PlotKind::Production => r.production,
            PlotKind::Yield => r.crop_yield,
        };
        let slot = groups.entry((r.district, r.year, crop)).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }
    let points = groups
        .into_iter()
        .map(|((district, year, crop), (sum, count))| PlotPoint {
            district,
            year,
            crop,
            value: if kind == PlotKind::Production { sum } else { sum / count as f64 },
        })
        .collect();
    Ok(PlotSeries { kind, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[100.0], &[100.0]).unwrap(), 0.0);
        assert_eq!(mape(&[110.0], &[100.0]).unwrap(), 10.0);
        assert_eq!(mape(&[110.0, 90.0], &[100.0, 100.0]).unwrap(), 10.0);
    }

    #[test]
    fn mape_errors() {
        assert!(matches!(mape(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch(1, 2))));
        assert!(matches!(mape(&[1.0], &[0.0]), Err(EvalError::NearZeroActual(_, 0))));
        assert!(matches!(mape(&[], &[]), Err(EvalError::EmptyTestSet)));
    }

    #[test]
    fn metrics_complement() {
        let m = Metrics::from_error(5.9, 10);
        assert!((m.accuracy_pct - 94.1).abs() < 1e-12);
        assert!((m.accuracy_pct + m.error_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(select_from_predictions(&[3.0, 3.2, 1.0, 0.5, 2.0, 4.5]), Crop::Jute);
        assert_eq!(select_from_predictions(&[2.0; 6]), Crop::AusRice);
        assert_eq!(select_from_predictions(&[1.0, 5.0, 5.0, 0.0, 0.0, 0.0]), Crop::AmanRice);
    }

    #[test]
    fn plot_kind_parsing() {
        assert_eq!("max_temp".parse::<PlotKind>().unwrap(), PlotKind::MaxTemp);
        assert_eq!("avgrainfall".parse::<PlotKind>().unwrap(), PlotKind::AvgRainfall);
        assert!(matches!("wind".parse::<PlotKind>(), Err(EvalError::UnknownKind(_))));
    }
}
