//! The 46-column feature schema and the record type it encodes.
//!
//! Column layout (zero-based positions):
//!
//! | positions | group                                                      |
//! |-----------|------------------------------------------------------------|
//! | 0         | year                                                       |
//! | 1..5      | avgrainfall, max_temp, min_temp, humidity                  |
//! | 5..9      | urea, tsp, dap, mp                                         |
//! | 9..15     | land type fractions, [`LandType`] order                    |
//! | 15..34    | soil type fractions, [`SoilType`] order                    |
//! | 34..40    | soil moisture, texture, consistency, reaction, structure, composition |
//! | 40        | area                                                       |
//! | 41..46    | district indicators                                        |
//!
//! Districts use a drop-first indicator code over five columns. Dhaka is the
//! reference level (all zero), Gazipur through Kishoregonj set their own
//! column, and Narsingdi, which has no column of its own, sets all five.
//! Every district therefore has a distinct, decodable pattern.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

pub const NUM_FEATURES: usize = 46;
pub const SCHEMA_VERSION: u32 = 1;

/// Positions of the district indicator block inside a feature vector.
pub const DISTRICT_COLUMNS: std::ops::Range<usize> = 41..46;

const COLUMNS: [&str; NUM_FEATURES] = [
    "year",
    "avgrainfall",
    "max_temp",
    "min_temp",
    "humidity",
    "urea",
    "tsp",
    "dap",
    "mp",
    "land_highland",
    "land_medium_highland",
    "land_medium_lowland",
    "land_lowland",
    "land_very_lowland",
    "land_miscellaneous",
    "soil_calcareous_alluvium",
    "soil_noncalcareous_alluvium",
    "soil_acid_basin_clay",
    "soil_calcareous_brown_floodplain",
    "soil_calcareous_grey_floodplain",
    "soil_calcareous_dark_grey_floodplain",
    "soil_noncalcareous_grey_floodplain",
    "soil_noncalcareous_dark_grey_floodplain",
    "soil_peat",
    "soil_made_land",
    "soil_noncalcareous_brown_floodplain",
    "soil_shallow_red_brown_terrace",
    "soil_deep_red_brown_terrace",
    "soil_brown_mottled_terrace",
    "soil_shallow_grey_terrace",
    "soil_deep_grey_terrace",
    "soil_grey_valley",
    "soil_brown_hill",
    "soil_grey_piedmont",
    "soil_moisture",
    "soil_texture",
    "soil_consistency",
    "soil_reaction",
    "soil_structure",
    "soil_composition",
    "area",
    "district_gazipur",
    "district_mymensingh",
    "district_narayanganj",
    "district_tangail",
    "district_kishoregonj",
];

/// The canonical, ordered feature column labels.
pub fn schema_columns() -> &'static [&'static str; NUM_FEATURES] {
    &COLUMNS
}

fn normalize_name(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-'))
        .flat_map(char::to_lowercase)
        .collect()
}

macro_rules! enumeration {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Human-readable name.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

enumeration!(
    /// Districts of agricultural zone 28.
    District {
        Dhaka => "Dhaka",
        Gazipur => "Gazipur",
        Mymensingh => "Mymensingh",
        Narayanganj => "Narayanganj",
        Tangail => "Tangail",
        Kishoregonj => "Kishoregonj",
        Narsingdi => "Narsingdi",
    }
);

enumeration!(
    Crop {
        AusRice => "Aus rice",
        AmanRice => "Aman rice",
        BoroRice => "Boro rice",
        Wheat => "Wheat",
        Potato => "Potato",
        Jute => "Jute",
    }
);

enumeration!(
    /// Inundation land classes by elevation.
    LandType {
        Highland => "Highland",
        MediumHighland => "Medium highland",
        MediumLowland => "Medium lowland",
        Lowland => "Lowland",
        VeryLowland => "Very lowland",
        Miscellaneous => "Miscellaneous",
    }
);

enumeration!(
    SoilType {
        CalcareousAlluvium => "Calcareous alluvium",
        NoncalcareousAlluvium => "Noncalcareous alluvium",
        AcidBasinClay => "Acid basin clay",
        CalcareousBrownFloodplainSoil => "Calcareous brown floodplain soil",
        CalcareousGreyFloodplainSoil => "Calcareous grey floodplain soil",
        CalcareousDarkGreyFloodplainSoil => "Calcareous dark grey floodplain soil",
        NoncalcareousGreyFloodplainSoil => "Noncalcareous grey floodplain soil",
        NoncalcareousDarkGreyFloodplainSoil => "Noncalcareous dark grey floodplain soil",
        Peat => "Peat",
        MadeLand => "Made-land",
        NoncalcareousBrownFloodplainSoil => "Noncalcareous brown floodplain soil",
        ShallowRedBrownTerraceSoil => "Shallow red-brown terrace soil",
        DeepRedBrownTerraceSoil => "Deep red-brown terrace soil",
        BrownMottledTerraceSoil => "Brown mottled terrace soil",
        ShallowGreyTerraceSoil => "Shallow grey terrace soil",
        DeepGreyTerraceSoil => "Deep grey terrace soil",
        GreyValleySoil => "Grey valley soil",
        BrownHillSoil => "Brown hill soil",
        GreyPiedmontSoil => "Grey piedmont soil",
    }
);

impl FromStr for District {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_name(s);
        let found = match key.as_str() {
            "narshingdi" => Some(District::Narsingdi),
            "narayangonj" => Some(District::Narayanganj),
            "kishoreganj" => Some(District::Kishoregonj),
            _ => District::ALL
                .iter()
                .copied()
                .find(|d| normalize_name(d.label()) == key),
        };
        found.ok_or_else(|| SchemaError::UnknownDistrict(s.to_string()))
    }
}

impl FromStr for Crop {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_name(s);
        Crop::ALL
            .iter()
            .copied()
            .find(|c| normalize_name(c.label()) == key || normalize_name(&format!("{c:?}")) == key)
            .ok_or_else(|| SchemaError::UnknownCrop(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    /// Annual rainfall, mm.
    pub avg_rainfall: f64,
    pub max_temp: f64,
    pub min_temp: f64,
    /// Relative humidity, percent.
    pub humidity: f64,
}

/// Fertilizer applied, metric tons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fertilizer {
    pub urea: f64,
    pub tsp: f64,
    pub dap: f64,
    pub mp: f64,
}

impl Fertilizer {
    pub fn as_array(&self) -> [f64; 4] {
        [self.urea, self.tsp, self.dap, self.mp]
    }
}

/// Soil descriptors. Ordinals run 1 to 5; `reaction` is a pH value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoilProperty {
    pub moisture: u8,
    pub texture: u8,
    pub consistency: u8,
    pub reaction: f64,
    pub structure: u8,
    pub composition: u8,
}

pub const ORDINAL_RANGE: std::ops::RangeInclusive<u8> = 1..=5;
pub const REACTION_RANGE: std::ops::RangeInclusive<f64> = 3.0..=10.0;
pub const MIN_YEAR: i32 = 1900;
const FRACTION_TOLERANCE: f64 = 1e-9;

/// One district-year-crop observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgroRecord {
    pub district: District,
    pub year: i32,
    pub crop: Crop,
    pub weather: Weather,
    pub fertilizer: Fertilizer,
    pub land_fractions: [f64; 6],
    pub soil_fractions: [f64; 19],
    pub soil: SoilProperty,
    /// Hectares.
    pub area: f64,
    /// Metric tons.
    pub production: f64,
    /// Metric tons per hectare; the regression target.
    pub crop_yield: f64,
}

/// A single broken record invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    YearTooEarly(i32),
    NonFinite(&'static str),
    TemperatureOrder,
    HumidityRange,
    Negative(&'static str),
    LandFractionSum,
    SoilFractionSum,
    NegativeFraction(&'static str),
    OrdinalRange(&'static str),
    ReactionRange,
    YieldInconsistent,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::YearTooEarly(y) => write!(f, "year {y} before {MIN_YEAR}"),
            Violation::NonFinite(field) => write!(f, "{field} is not finite"),
            Violation::TemperatureOrder => f.write_str("min_temp < max_temp violated"),
            Violation::HumidityRange => f.write_str("humidity out of [0,100]"),
            Violation::Negative(field) => write!(f, "{field} is negative"),
            Violation::LandFractionSum => f.write_str("land_fractions sum ≠ 1"),
            Violation::SoilFractionSum => f.write_str("soil_fractions sum ≠ 1"),
            Violation::NegativeFraction(group) => write!(f, "{group} has a negative entry"),
            Violation::OrdinalRange(field) => write!(f, "{field} out of [1,5]"),
            Violation::ReactionRange => f.write_str("soil_reaction out of [3,10]"),
            Violation::YieldInconsistent => f.write_str("yield ≠ production/area"),
        }
    }
}

/// Every violated invariant of `record`. Empty means valid.
pub fn validate_record(record: &AgroRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let w = &record.weather;
    let fert = &record.fertilizer;

    if record.year < MIN_YEAR {
        out.push(Violation::YearTooEarly(record.year));
    }

    let scalars = [
        ("avgrainfall", w.avg_rainfall),
        ("max_temp", w.max_temp),
        ("min_temp", w.min_temp),
        ("humidity", w.humidity),
        ("urea", fert.urea),
        ("tsp", fert.tsp),
        ("dap", fert.dap),
        ("mp", fert.mp),
        ("soil_reaction", record.soil.reaction),
        ("area", record.area),
        ("production", record.production),
        ("yield", record.crop_yield),
    ];
    for (name, v) in scalars {
        if !v.is_finite() {
            out.push(Violation::NonFinite(name));
        }
    }
    if record.land_fractions.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("land_fractions"));
    }
    if record.soil_fractions.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("soil_fractions"));
    }

    if !(w.min_temp < w.max_temp) && w.min_temp.is_finite() && w.max_temp.is_finite() {
        out.push(Violation::TemperatureOrder);
    }
    if !(0.0..=100.0).contains(&w.humidity) && w.humidity.is_finite() {
        out.push(Violation::HumidityRange);
    }
    for (name, v) in [
        ("avgrainfall", w.avg_rainfall),
        ("urea", fert.urea),
        ("tsp", fert.tsp),
        ("dap", fert.dap),
        ("mp", fert.mp),
        ("area", record.area),
        ("production", record.production),
        ("yield", record.crop_yield),
    ] {
        if v < 0.0 {
            out.push(Violation::Negative(name));
        }
    }

    check_simplex(
        &record.land_fractions,
        "land_fractions",
        Violation::LandFractionSum,
        &mut out,
    );
    check_simplex(
        &record.soil_fractions,
        "soil_fractions",
        Violation::SoilFractionSum,
        &mut out,
    );

    let s = &record.soil;
    for (name, v) in [
        ("soil_moisture", s.moisture),
        ("soil_texture", s.texture),
        ("soil_consistency", s.consistency),
        ("soil_structure", s.structure),
        ("soil_composition", s.composition),
    ] {
        if !ORDINAL_RANGE.contains(&v) {
            out.push(Violation::OrdinalRange(name));
        }
    }
    if s.reaction.is_finite() && !REACTION_RANGE.contains(&s.reaction) {
        out.push(Violation::ReactionRange);
    }

    if record.area > 0.0 && record.crop_yield.is_finite() && record.production.is_finite() {
        let implied = record.production / record.area;
        if (record.crop_yield - implied).abs() > 1e-6 * record.crop_yield.max(1.0) {
            out.push(Violation::YieldInconsistent);
        }
    }
    out
}

fn check_simplex(values: &[f64], group: &'static str, sum_violation: Violation, out: &mut Vec<Violation>) {
    if values.iter().any(|v| !v.is_finite()) {
        return;
    }
    if values.iter().any(|&v| v < 0.0) {
        out.push(Violation::NegativeFraction(group));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > FRACTION_TOLERANCE {
        out.push(sum_violation);
    }
}

/// An encoded record, in [`schema_columns`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SchemaError> {
        if values.len() != NUM_FEATURES {
            return Err(SchemaError::FeatureLength(values.len()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column_names(&self) -> &'static [&'static str; NUM_FEATURES] {
        schema_columns()
    }
}

/// Indicator pattern for `district` over the five district columns.
pub fn district_indicators(district: District) -> [f64; 5] {
    let mut out = [0.0; 5];
    match district {
        District::Dhaka => {}
        District::Narsingdi => out = [1.0; 5],
        d => out[d.index() - 1] = 1.0,
    }
    out
}

/// Inverse of [`district_indicators`]; `None` for a pattern no district uses.
pub fn decode_district(indicators: &[f64]) -> Option<District> {
    District::ALL
        .iter()
        .copied()
        .find(|&d| district_indicators(d).as_slice() == indicators)
}

/// Numeric encoding of a valid record.
pub fn encode_features(record: &AgroRecord) -> Result<FeatureVector, SchemaError> {
    let violations = validate_record(record);
    if !violations.is_empty() {
        return Err(SchemaError::InvalidRecord(violations));
    }
    Ok(encode_unchecked(record))
}

pub(crate) fn encode_unchecked(record: &AgroRecord) -> FeatureVector {
    let w = &record.weather;
    let s = &record.soil;
    let mut v = Vec::with_capacity(NUM_FEATURES);
    v.push(record.year as f64);
    v.extend([w.avg_rainfall, w.max_temp, w.min_temp, w.humidity]);
    v.extend(record.fertilizer.as_array());
    v.extend(record.land_fractions);
    v.extend(record.soil_fractions);
    v.extend([
        s.moisture as f64,
        s.texture as f64,
        s.consistency as f64,
        s.reaction,
        s.structure as f64,
        s.composition as f64,
    ]);
    v.push(record.area);
    v.extend(district_indicators(record.district));
    debug_assert_eq!(v.len(), NUM_FEATURES);
    FeatureVector { values: v }
}
