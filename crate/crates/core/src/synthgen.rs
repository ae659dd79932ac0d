//! Synthetic datasets in the canonical schema.
//!
//! Yields come from a known multiplicative response surface, so every
//! generated dataset carries its own noise-free oracle. The shipped crop
//! response presets are synthetic: they encode qualitative orderings (jute
//! favours wet, humid district-years and alluvial or grey floodplain soils;
//! rice responds strongly to fertilizer) rather than fitted coefficients.
//!
//! Site conditions (weather, land and soil mixtures, soil properties) are
//! drawn once per district-year and shared by every record of that
//! district-year. Fertilizer, area and noise are drawn per record from a
//! stream derived from `(seed, record index)`, so generation parallelizes
//! without changing its output.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::rng::{derive_seed, SplitMix64};
use crate::schema::{AgroRecord, Crop, District, Fertilizer, SoilProperty, SoilType, Weather};

pub const MAX_TEMP_RANGE: (f64, f64) = (22.5, 35.0);
pub const MIN_TEMP_RANGE: (f64, f64) = (10.0, 22.0);
/// Annual rainfall in mm, spanning the magnitudes of the sample table.
pub const RAINFALL_RANGE: (f64, f64) = (1100.0, 2500.0);
pub const HUMIDITY_RANGE: (f64, f64) = (55.0, 80.0);
/// Metric tons: urea, tsp, dap, mp.
pub const FERTILIZER_RANGES: [(f64, f64); 4] = [
    (25_000.0, 38_000.0),
    (8_000.0, 10_000.0),
    (1_500.0, 6_000.0),
    (2_000.0, 6_000.0),
];
pub const REACTION_SPAN: (f64, f64) = (4.5, 8.0);
pub const AREA_RANGE: (f64, f64) = (1_000.0, 60_000.0);

const SHIPPED_RESPONSES: &str = include_str!("../data/crop_responses.json");

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("invalid crop responses: {0}")]
    InvalidResponses(String),
    #[error("malformed responses document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_records: usize,
    pub seed: u64,
    /// Inclusive year range.
    pub years: (i32, i32),
    /// Relative standard deviation of the multiplicative yield noise.
    pub noise_sigma: f64,
    pub districts: Vec<District>,
    pub crops: Vec<Crop>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_records: 10_000,
            seed: 0,
            years: (2008, 2017),
            noise_sigma: 0.05,
            districts: District::ALL.to_vec(),
            crops: Crop::ALL.to_vec(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_records == 0 {
            return bad("n_records must be at least 1");
        }
        if self.years.0 > self.years.1 {
            return bad("year range is empty");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a finite value >= 0");
        }
        if self.districts.is_empty() || self.crops.is_empty() {
            return bad("district and crop sets must be non-empty");
        }
        Ok(())
    }

    /// Number of distinct (district, year, crop) triples; generating exactly
    /// this many records covers each triple once.
    pub fn coverage_size(&self) -> usize {
        let years = (self.years.1 - self.years.0 + 1).max(0) as usize;
        self.districts.len() * years * self.crops.len()
    }

    /// Triple for record `i`: districts outermost, crops innermost, cycling.
    fn triple(&self, i: usize) -> (District, i32, Crop) {
        let n_years = (self.years.1 - self.years.0 + 1) as usize;
        let n_crops = self.crops.len();
        let k = i % self.coverage_size();
        let crop = self.crops[k % n_crops];
        let year = self.years.0 + ((k / n_crops) % n_years) as i32;
        let district = self.districts[k / (n_crops * n_years)];
        (district, year, crop)
    }
}

/// Gaussian tolerance bump `exp(-((x - optimum) / width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub optimum: f64,
    pub width: f64,
}

impl Optimum {
    pub fn factor(&self, x: f64) -> f64 {
        let z = (x - self.optimum) / self.width;
        (-z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropResponse {
    pub crop: Crop,
    /// t/ha at every optimum with full suitability and no fertilizer.
    pub base_yield: f64,
    pub rainfall: Optimum,
    pub max_temp: Optimum,
    pub humidity: Optimum,
    /// Urea, tsp, dap, mp.
    pub fertilizer_coefficients: [f64; 4],
    /// Tons at which a fertilizer's effect reaches `1 - 1/e` of saturation.
    pub fertilizer_scales: [f64; 4],
    pub soil_suitability: [f64; 19],
    pub land_suitability: [f64; 6],
}

impl CropResponse {
    fn validate(&self) -> Result<(), String> {
        let c = self.crop;
        if !(self.base_yield > 0.0) {
            return Err(format!("{c}: base_yield must be > 0"));
        }
        for (name, o) in [("rainfall", self.rainfall), ("max_temp", self.max_temp), ("humidity", self.humidity)] {
            if !(o.width > 0.0) || !o.optimum.is_finite() {
                return Err(format!("{c}: {name} width must be > 0"));
            }
        }
        if self.fertilizer_coefficients.iter().any(|v| !(*v >= 0.0)) {
            return Err(format!("{c}: fertilizer coefficients must be >= 0"));
        }
        if self.fertilizer_scales.iter().any(|v| !(*v > 0.0)) {
            return Err(format!("{c}: fertilizer scales must be > 0"));
        }
        // Weights must be strictly positive for the yield to stay positive on
        // every soil and land mixture.
        let in_range = |w: &f64| *w > 0.0 && *w <= 1.0;
        if !self.soil_suitability.iter().all(in_range) || !self.land_suitability.iter().all(in_range) {
            return Err(format!("{c}: suitability weights must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One [`CropResponse`] per crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub responses: Vec<CropResponse>,
}

impl ResponseSet {
    /// The presets bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_RESPONSES).expect("bundled crop responses are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let set: ResponseSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for &crop in Crop::ALL {
            let count = self.responses.iter().filter(|r| r.crop == crop).count();
            if count != 1 {
                return Err(SynthError::InvalidResponses(format!(
                    "expected exactly one response for {crop}, found {count}"
                )));
            }
        }
        for r in &self.responses {
            r.validate().map_err(SynthError::InvalidResponses)?;
        }
        Ok(())
    }

    pub fn get(&self, crop: Crop) -> &CropResponse {
        self.responses
            .iter()
            .find(|r| r.crop == crop)
            .expect("validated response set covers every crop")
    }
}

fn saturating(amount: f64, scale: f64) -> f64 {
    1.0 - (-amount / scale).exp()
}

/// Noise-free yield of `record` under `response`, t/ha.
pub fn ground_truth_yield(record: &AgroRecord, response: &CropResponse) -> f64 {
    let w = &record.weather;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let soil = dot(&record.soil_fractions, &response.soil_suitability);
    let land = dot(&record.land_fractions, &response.land_suitability);
    let fert = 1.0
        + record
            .fertilizer
            .as_array()
            .iter()
            .zip(&response.fertilizer_coefficients)
            .zip(&response.fertilizer_scales)
            .map(|((&amount, &coef), &scale)| coef * saturating(amount, scale))
            .sum::<f64>();
    response.base_yield
        * response.rainfall.factor(w.avg_rainfall)
        * response.max_temp.factor(w.max_temp)
        * response.humidity.factor(w.humidity)
        * soil
        * land
        * fert
}

/// Soils over-represented in a district's mixtures.
fn district_soils(d: District) -> &'static [SoilType] {
    use SoilType::*;
    match d {
        District::Dhaka => &[DeepRedBrownTerraceSoil, ShallowRedBrownTerraceSoil, BrownMottledTerraceSoil, MadeLand],
        District::Gazipur => &[DeepRedBrownTerraceSoil, ShallowRedBrownTerraceSoil, DeepGreyTerraceSoil],
        District::Mymensingh => &[NoncalcareousDarkGreyFloodplainSoil, CalcareousDarkGreyFloodplainSoil, BrownHillSoil],
        District::Narayanganj => &[NoncalcareousGreyFloodplainSoil, AcidBasinClay, Peat],
        District::Tangail => &[
            NoncalcareousAlluvium,
            AcidBasinClay,
            CalcareousGreyFloodplainSoil,
            NoncalcareousGreyFloodplainSoil,
            DeepRedBrownTerraceSoil,
            DeepGreyTerraceSoil,
            GreyValleySoil,
        ],
        District::Kishoregonj => &[NoncalcareousDarkGreyFloodplainSoil, AcidBasinClay, CalcareousAlluvium],
        District::Narsingdi => &[NoncalcareousGreyFloodplainSoil, ShallowRedBrownTerraceSoil, NoncalcareousAlluvium],
    }
}

/// Random point on the simplex with mass tilted toward `weights`.
fn simplex<const N: usize>(rng: &mut SplitMix64, weights: &[f64; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for (slot, w) in out.iter_mut().zip(weights) {
        *slot = w * rng.exponential();
    }
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Conditions shared by every record of one district-year.
#[derive(Clone, Copy)]
struct Site {
    weather: Weather,
    land_fractions: [f64; 6],
    soil_fractions: [f64; 19],
    soil: SoilProperty,
}

fn draw_site(seed: u64, district: District, year: i32) -> Site {
    let mut rng = SplitMix64::new(derive_seed(seed, &format!("weather/{district}/{year}")));
    let weather = Weather {
        avg_rainfall: rng.uniform(RAINFALL_RANGE.0, RAINFALL_RANGE.1),
        max_temp: rng.uniform(MAX_TEMP_RANGE.0, MAX_TEMP_RANGE.1),
        min_temp: rng.uniform(MIN_TEMP_RANGE.0, MIN_TEMP_RANGE.1),
        humidity: rng.uniform(HUMIDITY_RANGE.0, HUMIDITY_RANGE.1),
    };
    let mut rng = SplitMix64::new(derive_seed(seed, &format!("land/{district}/{year}")));
    let land_fractions = simplex(&mut rng, &[1.0; 6]);
    let mut soil_weights = [1.0; 19];
    for s in district_soils(district) {
        soil_weights[s.index()] = 4.0;
    }
    let soil_fractions = simplex(&mut rng, &soil_weights);
    let mut ordinal = || 1 + rng.below(5) as u8;
    let (moisture, texture, consistency) = (ordinal(), ordinal(), ordinal());
    let (structure, composition) = (ordinal(), ordinal());
    let soil = SoilProperty {
        moisture,
        texture,
        consistency,
        reaction: rng.uniform(REACTION_SPAN.0, REACTION_SPAN.1),
        structure,
        composition,
    };
    Site { weather, land_fractions, soil_fractions, soil }
}

fn draw_record(
    cfg: &GenConfig,
    responses: &ResponseSet,
    sites: &HashMap<(District, i32), Site>,
    i: usize,
) -> AgroRecord {
    let (district, year, crop) = cfg.triple(i);
    let site = sites[&(district, year)];
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, &format!("record/{i}")));

    let f = FERTILIZER_RANGES;
    let fertilizer = Fertilizer {
        urea: rng.uniform(f[0].0, f[0].1),
        tsp: rng.uniform(f[1].0, f[1].1),
        dap: rng.uniform(f[2].0, f[2].1),
        mp: rng.uniform(f[3].0, f[3].1),
    };
    let area = rng.uniform(AREA_RANGE.0, AREA_RANGE.1);

    let mut record = AgroRecord {
        district,
        year,
        crop,
        weather: site.weather,
        fertilizer,
        land_fractions: site.land_fractions,
        soil_fractions: site.soil_fractions,
        soil: site.soil,
        area,
        production: 0.0,
        crop_yield: 0.0,
    };
    let truth = ground_truth_yield(&record, responses.get(crop));
    let z = rng.standard_normal();
    let noisy = if cfg.noise_sigma == 0.0 {
        truth
    } else {
        truth * (1.0 + cfg.noise_sigma * z).max(1e-3)
    };
    record.crop_yield = noisy;
    record.production = noisy * area;
    record
}

/// Generates `cfg.n_records` records; identical inputs give identical output.
pub fn generate(cfg: &GenConfig, responses: &ResponseSet) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    responses.validate()?;
    let mut sites = HashMap::new();
    for &d in &cfg.districts {
        for y in cfg.years.0..=cfg.years.1 {
            sites.insert((d, y), draw_site(cfg.seed, d, y));
        }
    }
    let records: Vec<AgroRecord> = (0..cfg.n_records)
        .into_par_iter()
        .map(|i| draw_record(cfg, responses, &sites, i))
        .collect();
    Ok(Dataset::new(
        records,
        format!("synthetic(seed={}, n={}, noise={})", cfg.seed, cfg.n_records, cfg.noise_sigma),
    ))
}
