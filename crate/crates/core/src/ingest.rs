//! CSV ingestion, cleaning, min-max normalization and seeded splits.
//!
//! The CSV header is `district,year,crop`, then every schema column after
//! `year` (the schema's year doubles as the identifier), then
//! `production,yield`: 50 columns in total.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::rng;
use crate::schema::{
    district_indicators, encode_unchecked, schema_columns, validate_record, AgroRecord, Crop,
    District, Fertilizer, SoilProperty, Weather, DISTRICT_COLUMNS, NUM_FEATURES,
};

pub const CSV_COLUMNS: usize = NUM_FEATURES + 4;

/// The exact CSV header, in order.
pub fn csv_header() -> Vec<&'static str> {
    let mut h = vec!["district", "year", "crop"];
    h.extend_from_slice(&schema_columns()[1..]);
    h.extend(["production", "yield"]);
    h
}

/// A rejected row and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningEntry {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<AgroRecord>,
    pub source: String,
    pub cleaning_log: Vec<CleaningEntry>,
}

impl Dataset {
    pub fn new(records: Vec<AgroRecord>, source: impl Into<String>) -> Self {
        Self {
            records,
            source: source.into(),
            cleaning_log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of one crop, in order. The cleaning log is not carried over.
    pub fn for_crop(&self, crop: Crop) -> Dataset {
        Dataset::new(
            self.records.iter().filter(|r| r.crop == crop).cloned().collect(),
            format!("{} [{}]", self.source, crop),
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(csv_header())?;
        for r in &self.records {
            w.write_record(record_fields(r))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Cleaning log as JSON lines, one `{"row": .., "reason": ..}` per entry.
    pub fn write_cleaning_log<W: Write>(&self, mut writer: W) -> Result<(), IngestError> {
        for entry in &self.cleaning_log {
            serde_json::to_writer(&mut writer, entry).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn record_fields(r: &AgroRecord) -> Vec<String> {
    let fv = encode_unchecked(r);
    let mut out = Vec::with_capacity(CSV_COLUMNS);
    out.push(r.district.label().to_string());
    out.push(r.year.to_string());
    out.push(format!("{:?}", r.crop));
    out.extend(fv.values()[1..].iter().map(|v| v.to_string()));
    out.push(r.production.to_string());
    out.push(r.crop_yield.to_string());
    out
}

fn parse_row(fields: &csv::StringRecord) -> Result<AgroRecord, String> {
    if fields.len() != CSV_COLUMNS {
        return Err(format!(
            "parse failure: expected {CSV_COLUMNS} fields, found {}",
            fields.len()
        ));
    }
    let header = csv_header();
    let num = |i: usize| -> Result<f64, String> {
        fields[i]
            .parse::<f64>()
            .map_err(|_| format!("parse failure: {} = {:?}", header[i], &fields[i]))
    };
    let ordinal = |i: usize| -> Result<u8, String> {
        let v = num(i)?;
        if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
            return Err(format!("parse failure: {} = {:?} is not an ordinal", header[i], &fields[i]));
        }
        Ok(v as u8)
    };

    let district: District = fields[0]
        .parse()
        .map_err(|e| format!("parse failure: {e}"))?;
    let year: i32 = fields[1]
        .parse()
        .map_err(|_| format!("parse failure: year = {:?}", &fields[1]))?;
    let crop: Crop = fields[2].parse().map_err(|e| format!("parse failure: {e}"))?;

    // CSV column index of schema position p (p >= 1) is p + 2.
    let col = |p: usize| p + 2;
    let weather = Weather {
        avg_rainfall: num(col(1))?,
        max_temp: num(col(2))?,
        min_temp: num(col(3))?,
        humidity: num(col(4))?,
    };
    let fertilizer = Fertilizer {
        urea: num(col(5))?,
        tsp: num(col(6))?,
        dap: num(col(7))?,
        mp: num(col(8))?,
    };
    let mut land_fractions = [0.0; 6];
    for (k, slot) in land_fractions.iter_mut().enumerate() {
        *slot = num(col(9 + k))?;
    }
    let mut soil_fractions = [0.0; 19];
    for (k, slot) in soil_fractions.iter_mut().enumerate() {
        *slot = num(col(15 + k))?;
    }
    let soil = SoilProperty {
        moisture: ordinal(col(34))?,
        texture: ordinal(col(35))?,
        consistency: ordinal(col(36))?,
        reaction: num(col(37))?,
        structure: ordinal(col(38))?,
        composition: ordinal(col(39))?,
    };
    let area = num(col(40))?;
    let mut indicators = [0.0; 5];
    for (k, slot) in indicators.iter_mut().enumerate() {
        *slot = num(col(DISTRICT_COLUMNS.start + k))?;
    }
    if indicators != district_indicators(district) {
        return Err(format!("parse failure: district indicators disagree with {district}"));
    }
    let production = num(CSV_COLUMNS - 2)?;
    let crop_yield = num(CSV_COLUMNS - 1)?;

    Ok(AgroRecord {
        district,
        year,
        crop,
        weather,
        fertilizer,
        land_fractions,
        soil_fractions,
        soil,
        area,
        production,
        crop_yield,
    })
}

/// Parses a CSV dataset. Malformed rows are skipped and logged with their
/// zero-based data row index.
pub fn parse_csv<R: Read>(reader: R, source: &str) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();

    let header = match rows.next() {
        None => return Err(IngestError::EmptyInput),
        Some(h) => h?,
    };
    let expected = csv_header();
    for i in 0..expected.len().max(header.len()) {
        let want = expected.get(i).copied().unwrap_or("");
        let got = header.get(i).unwrap_or("");
        if want != got {
            return Err(IngestError::HeaderMismatch {
                column: i,
                expected: want.to_string(),
                found: got.to_string(),
            });
        }
    }

    let mut dataset = Dataset::new(Vec::new(), source);
    for (row, result) in rows.enumerate() {
        let parsed = match result {
            Ok(fields) => parse_row(&fields),
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => Err(format!("parse failure: {e}")),
        };
        match parsed {
            Ok(r) => dataset.records.push(r),
            Err(reason) => dataset.cleaning_log.push(CleaningEntry { row, reason }),
        }
    }
    Ok(dataset)
}

fn record_key(r: &AgroRecord) -> Vec<u64> {
    let mut key = vec![r.district.index() as u64, r.year as u64, r.crop.index() as u64];
    key.extend(encode_unchecked(r).values().iter().map(|v| v.to_bits()));
    key.extend([r.production.to_bits(), r.crop_yield.to_bits()]);
    key
}

/// Removes exact repeats, keeping the first occurrence.
pub fn deduplicate(mut dataset: Dataset) -> Dataset {
    let mut first_seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(dataset.len());
    let mut kept = Vec::with_capacity(dataset.len());
    for (row, record) in dataset.records.into_iter().enumerate() {
        match first_seen.get(&record_key(&record)) {
            Some(&first) => dataset.cleaning_log.push(CleaningEntry {
                row,
                reason: format!("duplicate of row {first}"),
            }),
            None => {
                first_seen.insert(record_key(&record), row);
                kept.push(record);
            }
        }
    }
    dataset.records = kept;
    dataset
}

/// Removes every record that fails validation, logging its violations.
pub fn drop_invalid(mut dataset: Dataset) -> Dataset {
    let mut kept = Vec::with_capacity(dataset.len());
    for (row, record) in dataset.records.into_iter().enumerate() {
        let violations = validate_record(&record);
        if violations.is_empty() {
            kept.push(record);
        } else {
            let reason = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            dataset.cleaning_log.push(CleaningEntry { row, reason });
        }
    }
    dataset.records = kept;
    dataset
}

/// Deduplicate, then drop invalid records.
pub fn clean(dataset: Dataset) -> Dataset {
    drop_invalid(deduplicate(dataset))
}

/// Per-column min/max fitted on training data, plus the target range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max == min {
        0.0
    } else {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    }
}

impl Normalizer {
    pub fn normalize_features(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, &x)| {
                if DISTRICT_COLUMNS.contains(&j) {
                    x
                } else {
                    scale(x, self.feature_min[j], self.feature_max[j])
                }
            })
            .collect()
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        scale(y, self.target_min, self.target_max)
    }

    /// Maps a normalized value back to target units. No clamping here.
    pub fn denormalize_target(&self, v: f64) -> f64 {
        self.target_min + v * (self.target_max - self.target_min)
    }
}

pub fn fit_normalizer(train: &Dataset) -> Result<Normalizer, IngestError> {
    if train.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let mut min = vec![f64::INFINITY; NUM_FEATURES];
    let mut max = vec![f64::NEG_INFINITY; NUM_FEATURES];
    let mut tmin = f64::INFINITY;
    let mut tmax = f64::NEG_INFINITY;
    for r in &train.records {
        for (j, &v) in encode_unchecked(r).values().iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
        tmin = tmin.min(r.crop_yield);
        tmax = tmax.max(r.crop_yield);
    }
    Ok(Normalizer {
        feature_min: min,
        feature_max: max,
        target_min: tmin,
        target_max: tmax,
    })
}

/// Normalized design matrix and targets, row-aligned with the source dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizedData {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl NormalizedData {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn apply_normalizer(norm: &Normalizer, dataset: &Dataset) -> NormalizedData {
    let (features, targets) = dataset
        .records
        .iter()
        .map(|r| {
            (
                norm.normalize_features(encode_unchecked(r).values()),
                norm.normalize_target(r.crop_yield),
            )
        })
        .unzip();
    NormalizedData { features, targets }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.train_ratio > 0.0 && self.train_ratio < 1.0 {
            Ok(())
        } else {
            Err(IngestError::InvalidRatio(self.train_ratio))
        }
    }

    /// `floor(n * train_ratio)`, guarded against representation error in
    /// ratios such as 0.29.
    pub fn train_size(&self, n: usize) -> usize {
        ((n as f64 * self.train_ratio) + 1e-9).floor() as usize
    }
}

/// Train and test positions into a dataset of `n` records.
pub fn split_indices(n: usize, cfg: &SplitConfig) -> Result<(Vec<usize>, Vec<usize>), IngestError> {
    cfg.validate()?;
    if n < 2 {
        return Err(IngestError::TooFewRecords(n));
    }
    let mut perm = rng::permutation(n, cfg.seed);
    let test = perm.split_off(cfg.train_size(n));
    Ok((perm, test))
}

pub fn split(dataset: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset), IngestError> {
    let (train_idx, test_idx) = split_indices(dataset.len(), cfg)?;
    let pick = |idx: &[usize], tag: &str| Dataset {
        records: idx.iter().map(|&i| dataset.records[i].clone()).collect(),
        source: format!("{} [{tag}]", dataset.source),
        cleaning_log: dataset.cleaning_log.clone(),
    };
    Ok((pick(&train_idx, "train"), pick(&test_idx, "test")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::sample_record;

    fn csv_of(records: &[AgroRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        Dataset::new(records.to_vec(), "t").write_csv(&mut buf).unwrap();
        buf
    }

    #[test]
    fn header_shape() {
        let h = csv_header();
        assert_eq!(h.len(), 50);
        assert_eq!(&h[..4], &["district", "year", "crop", "avgrainfall"]);
        assert_eq!(&h[48..], &["production", "yield"]);
        assert_eq!(h.iter().filter(|c| **c == "year").count(), 1);
    }

    #[test]
    fn parses_sample_row() {
        let bytes = csv_of(&[sample_record(0)]);
        let ds = parse_csv(&bytes[..], "t").unwrap();
        assert_eq!(ds.len(), 1);
        let r = &ds.records[0];
        assert_eq!(r.weather.avg_rainfall, 2385.0);
        assert_eq!(r.weather.humidity, 71.0);
        assert_eq!(r.fertilizer.urea, 25967.0);
        assert_eq!(r, &sample_record(0));
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let bytes = csv_of(&[]);
        let ds = parse_csv(&bytes[..], "t").unwrap();
        assert!(ds.is_empty());
        assert!(ds.cleaning_log.is_empty());
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(parse_csv(&b""[..], "t"), Err(IngestError::EmptyInput)));
    }

    #[test]
    fn header_mismatch() {
        let text = String::from_utf8(csv_of(&[])).unwrap().replace("humidity", "humid");
        match parse_csv(text.as_bytes(), "t") {
            Err(IngestError::HeaderMismatch { column, found, .. }) => {
                assert_eq!(column, 6);
                assert_eq!(found, "humid");
            }
            other => panic!("{other:?}"),
        }
        let swapped = String::from_utf8(csv_of(&[]))
            .unwrap()
            .replacen("district,year", "year,district", 1);
        assert!(matches!(
            parse_csv(swapped.as_bytes(), "t"),
            Err(IngestError::HeaderMismatch { column: 0, .. })
        ));
    }

    #[test]
    fn non_numeric_humidity_is_logged() {
        let text = String::from_utf8(csv_of(&[sample_record(0)])).unwrap();
        let text = text.replacen(",71,", ",high,", 1);
        let ds = parse_csv(text.as_bytes(), "t").unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.cleaning_log.len(), 1);
        assert_eq!(ds.cleaning_log[0].row, 0);
        assert!(ds.cleaning_log[0].reason.starts_with("parse failure"));
    }

    #[test]
    fn indicator_disagreement_is_logged() {
        let text = String::from_utf8(csv_of(&[sample_record(0)])).unwrap();
        let text = text.replacen("Dhaka", "Tangail", 1);
        let ds = parse_csv(text.as_bytes(), "t").unwrap();
        assert_eq!(ds.len(), 0);
        assert!(ds.cleaning_log[0].reason.contains("district indicators"));
    }

    #[test]
    fn dedup_keeps_first() {
        let (r1, r2) = (sample_record(0), sample_record(1));
        let ds = Dataset::new(vec![r1.clone(), r1.clone(), r2.clone()], "t");
        let out = deduplicate(ds);
        assert_eq!(out.records, vec![r1, r2]);
        assert_eq!(out.cleaning_log, vec![CleaningEntry { row: 1, reason: "duplicate of row 0".into() }]);
    }

    #[test]
    fn dedup_single_field_difference() {
        let r1 = sample_record(0);
        let mut r2 = r1.clone();
        r2.fertilizer.mp += 1.0;
        let ds = Dataset::new(vec![r1, r2], "t");
        let out = deduplicate(ds.clone());
        assert_eq!(out, ds);
    }

    #[test]
    fn drop_invalid_counts() {
        let mut bad1 = sample_record(2);
        bad1.weather.min_temp = 30.0;
        bad1.weather.max_temp = 20.0;
        let mut bad2 = sample_record(3);
        bad2.weather.humidity = 150.0;
        let ds = Dataset::new(
            vec![sample_record(0), bad1, sample_record(1), bad2, sample_record(4)],
            "t",
        );
        let out = drop_invalid(ds);
        assert_eq!(out.len(), 3);
        assert_eq!(out.cleaning_log.len(), 2);
        assert_eq!(out.cleaning_log[0].row, 1);
        assert_eq!(out.cleaning_log[0].reason, "min_temp < max_temp violated");
        assert_eq!(out.cleaning_log[1].row, 3);

        let valid = Dataset::new(vec![sample_record(0), sample_record(1)], "t");
        assert_eq!(drop_invalid(valid.clone()), valid);
    }

    #[test]
    fn normalizer_on_sample_rainfall() {
        let ds = Dataset::new((0..3).map(sample_record).collect(), "t");
        let norm = fit_normalizer(&ds).unwrap();
        assert_eq!(norm.feature_min[1], 1523.0);
        assert_eq!(norm.feature_max[1], 2385.0);
        // area is constant across the fixtures
        assert_eq!(norm.feature_min[40], norm.feature_max[40]);

        let nd = apply_normalizer(&norm, &ds);
        assert_eq!(nd.features[2][1], 0.0);
        assert_eq!(nd.features[0][1], 1.0);
        // (1930 - 1523) / (2385 - 1523)
        assert!((nd.features[1][1] - 0.472_157_772_621_809_7).abs() < 1e-12);
        assert!(nd.features.iter().all(|f| f[40] == 0.0));
    }

    #[test]
    fn single_record_normalizer() {
        let ds = Dataset::new(vec![sample_record(5)], "t");
        let norm = fit_normalizer(&ds).unwrap();
        assert_eq!(norm.feature_min, norm.feature_max);
        assert_eq!(norm.target_min, norm.target_max);
        assert!(matches!(
            fit_normalizer(&Dataset::default()),
            Err(IngestError::EmptyDataset)
        ));
    }

    #[test]
    fn out_of_range_values_clip() {
        let ds = Dataset::new((0..3).map(sample_record).collect(), "t");
        let norm = fit_normalizer(&ds).unwrap();
        let mut raw = encode_unchecked(&sample_record(13)).into_values();
        raw[1] = 1181.0;
        raw[5] = 99_999.0;
        let x = norm.normalize_features(&raw);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[5], 1.0);
        assert_eq!(&x[DISTRICT_COLUMNS], &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let cfg = SplitConfig { train_ratio: 0.8, seed: 42 };
        let (a, b) = split_indices(10, &cfg).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, &cfg).unwrap(), (a, b));
        assert_eq!(SplitConfig { train_ratio: 0.29, seed: 0 }.train_size(100), 29);
        assert!(matches!(split_indices(1, &cfg), Err(IngestError::TooFewRecords(1))));
        assert!(split_indices(10, &SplitConfig { train_ratio: 1.0, seed: 0 }).is_err());
    }

    #[test]
    fn cleaning_log_json_lines() {
        let mut ds = Dataset::default();
        ds.cleaning_log.push(CleaningEntry { row: 3, reason: "parse failure".into() });
        let mut out = Vec::new();
        ds.write_cleaning_log(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "{\"row\":3,\"reason\":\"parse failure\"}\n");
    }
}
