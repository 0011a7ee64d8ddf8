//! Business-model taxonomy, venture models and their one-hot encoding.
//!
//! A [`Taxonomy`] is loaded from a TOML document with the shape
//! `layers -> sub_layers -> dimensions -> characteristics`. Each dimension
//! declares whether a venture picks exactly one characteristic (`single`) or
//! one or more (`multi`). Every characteristic owns one bit of the
//! [`FeatureRow`], in document order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// The bundled IoT business-model taxonomy document.
pub const IOT_TAXONOMY_TOML: &str = include_str!("../data/iot_taxonomy.toml");

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("taxonomy document is not well-formed: {0}")]
    Syntax(String),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("model `{venture_id}` failed validation with {} finding(s)", report.findings.len())]
    InvalidModel {
        venture_id: String,
        report: ValidationReport,
    },
    #[error("feature row width {got} does not match taxonomy width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("dimension `{dimension}`: {reason}")]
    Decode { dimension: String, reason: String },
    #[error("venture table row {row}: {reason}")]
    Table { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerName {
    What,
    Who,
    How,
    Why,
}

impl fmt::Display for LayerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerName::What => "What",
            LayerName::Who => "Who",
            LayerName::How => "How",
            LayerName::Why => "Why",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub cardinality: Cardinality,
    pub characteristics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubLayer {
    pub name: String,
    pub dimensions: Vec<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: LayerName,
    pub sub_layers: Vec<SubLayer>,
}

/// Serialized form of a taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyDocument {
    pub name: String,
    pub version: String,
    pub feature_width: usize,
    pub layers: Vec<Layer>,
}

/// A sub-layer viewed as a contiguous block of feature bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub name: String,
    pub layer: LayerName,
    pub dimensions: Vec<String>,
    pub bits: Range<usize>,
}

#[derive(Debug, Clone)]
struct DimensionSlot {
    layer: usize,
    sub_layer: usize,
    dimension: usize,
    offset: usize,
}

/// A validated taxonomy with precomputed bit offsets.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    doc: TaxonomyDocument,
    slots: Vec<DimensionSlot>,
    by_name: HashMap<String, usize>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Serialize for Taxonomy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.doc.serialize(serializer)
    }
}

impl Taxonomy {
    /// Parses and validates a TOML taxonomy document.
    pub fn from_toml(document: &str) -> Result<Self, SchemaError> {
        let doc: TaxonomyDocument =
            toml::from_str(document).map_err(|e| SchemaError::Syntax(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: TaxonomyDocument) -> Result<Self, SchemaError> {
        let invalid = |path: String, reason: String| SchemaError::Invalid { path, reason };
        if doc.layers.is_empty() {
            return Err(invalid("layers".into(), "taxonomy has no layers".into()));
        }
        let mut slots = Vec::new();
        let mut by_name = HashMap::new();
        let mut offset = 0;
        for (li, layer) in doc.layers.iter().enumerate() {
            if layer.sub_layers.is_empty() {
                return Err(invalid(format!("layers[{li}]"), "layer has no sub-layers".into()));
            }
            for (si, sub) in layer.sub_layers.iter().enumerate() {
                let sub_path = format!("layers[{li}].sub_layers[{si}]");
                if sub.dimensions.is_empty() {
                    return Err(invalid(sub_path, format!("sub-layer `{}` has no dimensions", sub.name)));
                }
                for (di, dim) in sub.dimensions.iter().enumerate() {
                    let path = format!("{sub_path}.dimensions[{di}]");
                    if dim.characteristics.len() < 2 {
                        return Err(invalid(
                            path,
                            format!("dimension `{}` needs at least 2 characteristics", dim.name),
                        ));
                    }
                    let mut seen = HashSet::new();
                    for (ci, c) in dim.characteristics.iter().enumerate() {
                        if !seen.insert(c.as_str()) {
                            return Err(invalid(
                                format!("{path}.characteristics[{ci}]"),
                                format!("duplicate characteristic `{c}` in dimension `{}`", dim.name),
                            ));
                        }
                    }
                    if by_name.insert(dim.name.clone(), slots.len()).is_some() {
                        return Err(invalid(path, format!("duplicate dimension name `{}`", dim.name)));
                    }
                    slots.push(DimensionSlot { layer: li, sub_layer: si, dimension: di, offset });
                    offset += dim.characteristics.len();
                }
            }
        }
        if offset != doc.feature_width {
            return Err(invalid(
                "feature_width".into(),
                format!("declared width {} but characteristics total {offset}", doc.feature_width),
            ));
        }
        Ok(Self { doc, slots, by_name })
    }

    /// The bundled IoT taxonomy.
    pub fn iot() -> Self {
        Self::from_toml(IOT_TAXONOMY_TOML).expect("bundled taxonomy is valid")
    }

    pub fn document(&self) -> &TaxonomyDocument {
        &self.doc
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn version(&self) -> &str {
        &self.doc.version
    }

    pub fn width(&self) -> usize {
        self.doc.feature_width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.doc.layers
    }

    pub fn sub_layer_count(&self) -> usize {
        self.doc.layers.iter().map(|l| l.sub_layers.len()).sum()
    }

    fn slot_dimension(&self, slot: &DimensionSlot) -> &Dimension {
        &self.doc.layers[slot.layer].sub_layers[slot.sub_layer].dimensions[slot.dimension]
    }

    /// Dimensions in document order.
    pub fn dimensions(&self) -> impl Iterator<Item = &Dimension> {
        self.slots.iter().map(|s| self.slot_dimension(s))
    }

    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.by_name.get(name).map(|&i| self.slot_dimension(&self.slots[i]))
    }

    /// Bit range owned by a dimension.
    pub fn dimension_bits(&self, name: &str) -> Option<Range<usize>> {
        self.by_name.get(name).map(|&i| {
            let slot = &self.slots[i];
            slot.offset..slot.offset + self.slot_dimension(slot).characteristics.len()
        })
    }

    /// `"Dimension: Characteristic"` labels, one per bit.
    pub fn feature_names(&self) -> Vec<String> {
        self.dimensions()
            .flat_map(|d| d.characteristics.iter().map(move |c| format!("{}: {c}", d.name)))
            .collect()
    }

    /// Sub-layers as clustering components.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        let mut offset = 0;
        for layer in &self.doc.layers {
            for sub in &layer.sub_layers {
                let width: usize = sub.dimensions.iter().map(|d| d.characteristics.len()).sum();
                out.push(Component {
                    name: sub.name.clone(),
                    layer: layer.name,
                    dimensions: sub.dimensions.iter().map(|d| d.name.clone()).collect(),
                    bits: offset..offset + width,
                });
                offset += width;
            }
        }
        out
    }
}

/// A venture's selection of characteristics, optionally labelled with outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessModel {
    pub venture_id: String,
    pub choices: BTreeMap<String, BTreeSet<String>>,
    /// Free-text descriptions keyed by dimension, shown to raters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub free_text: BTreeMap<String, String>,
    /// `true` when the venture raised a Series A round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_a: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survival: Option<bool>,
}

impl BusinessModel {
    pub fn new(venture_id: impl Into<String>) -> Self {
        Self {
            venture_id: venture_id.into(),
            choices: BTreeMap::new(),
            free_text: BTreeMap::new(),
            series_a: None,
            survival: None,
        }
    }

    /// Builder helper: sets the characteristics chosen for `dimension`.
    pub fn with<I, S>(mut self, dimension: &str, characteristics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.choices
            .insert(dimension.to_string(), characteristics.into_iter().map(Into::into).collect());
        self
    }

    pub fn chosen_count(&self) -> usize {
        self.choices.values().map(BTreeSet::len).sum()
    }

    /// All free text joined, for topic extraction.
    pub fn description(&self) -> String {
        self.free_text.values().cloned().collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FindingKind {
    UnknownDimension,
    UnknownCharacteristic { characteristic: String },
    MissingDimension,
    Cardinality { chosen: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub dimension: String,
    #[serde(flatten)]
    pub kind: FindingKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks `model` against the taxonomy. Findings are data, never errors.
pub fn validate_model(taxonomy: &Taxonomy, model: &BusinessModel) -> ValidationReport {
    let mut findings = Vec::new();
    for (dim_name, chosen) in &model.choices {
        let Some(dim) = taxonomy.dimension(dim_name) else {
            findings.push(Finding {
                dimension: dim_name.clone(),
                kind: FindingKind::UnknownDimension,
                message: format!("unknown dimension `{dim_name}`"),
            });
            continue;
        };
        for c in chosen {
            if !dim.characteristics.contains(c) {
                findings.push(Finding {
                    dimension: dim_name.clone(),
                    kind: FindingKind::UnknownCharacteristic { characteristic: c.clone() },
                    message: format!("unknown characteristic `{c}` for dimension `{dim_name}`"),
                });
            }
        }
    }
    for dim in taxonomy.dimensions() {
        let n = model.choices.get(&dim.name).map_or(0, BTreeSet::len);
        if n == 0 {
            findings.push(Finding {
                dimension: dim.name.clone(),
                kind: FindingKind::MissingDimension,
                message: format!("missing dimension `{}`", dim.name),
            });
        } else if dim.cardinality == Cardinality::Single && n != 1 {
            findings.push(Finding {
                dimension: dim.name.clone(),
                kind: FindingKind::Cardinality { chosen: n },
                message: format!("single-choice dimension `{}` has {n} characteristics", dim.name),
            });
        }
    }
    ValidationReport { findings }
}

/// A fixed-width one-hot encoding of a business model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRow {
    pub venture_id: String,
    pub bits: Vec<u8>,
}

impl FeatureRow {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn hamming(&self, other: &FeatureRow) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

pub fn encode_one_hot(taxonomy: &Taxonomy, model: &BusinessModel) -> Result<FeatureRow, SchemaError> {
    let report = validate_model(taxonomy, model);
    if !report.is_valid() {
        return Err(SchemaError::InvalidModel { venture_id: model.venture_id.clone(), report });
    }
    let mut bits = vec![0u8; taxonomy.width()];
    for slot in &taxonomy.slots {
        let dim = taxonomy.slot_dimension(slot);
        let chosen = &model.choices[&dim.name];
        for (i, c) in dim.characteristics.iter().enumerate() {
            if chosen.contains(c) {
                bits[slot.offset + i] = 1;
            }
        }
    }
    Ok(FeatureRow { venture_id: model.venture_id.clone(), bits })
}

/// Inverse of [`encode_one_hot`] on its image.
pub fn decode(taxonomy: &Taxonomy, row: &FeatureRow) -> Result<BusinessModel, SchemaError> {
    if row.bits.len() != taxonomy.width() {
        return Err(SchemaError::WidthMismatch { expected: taxonomy.width(), got: row.bits.len() });
    }
    let mut model = BusinessModel::new(row.venture_id.clone());
    for slot in &taxonomy.slots {
        let dim = taxonomy.slot_dimension(slot);
        let block = &row.bits[slot.offset..slot.offset + dim.characteristics.len()];
        let mut chosen = BTreeSet::new();
        for (bit, c) in block.iter().zip(&dim.characteristics) {
            match bit {
                0 => {}
                1 => {
                    chosen.insert(c.clone());
                }
                other => {
                    return Err(SchemaError::Decode {
                        dimension: dim.name.clone(),
                        reason: format!("bit value {other} is not 0 or 1"),
                    })
                }
            }
        }
        match (dim.cardinality, chosen.len()) {
            (_, 0) => {
                return Err(SchemaError::Decode {
                    dimension: dim.name.clone(),
                    reason: "no characteristic set".into(),
                })
            }
            (Cardinality::Single, n) if n > 1 => {
                return Err(SchemaError::Decode {
                    dimension: dim.name.clone(),
                    reason: format!("{n} characteristics set in a single-choice dimension"),
                })
            }
            _ => {}
        }
        model.choices.insert(dim.name.clone(), chosen);
    }
    Ok(model)
}

/// Delimiter between characteristics in multi-choice table cells.
pub const MULTI_DELIMITER: char = '|';
pub const VENTURE_ID_COLUMN: &str = "venture_id";
pub const SERIES_A_COLUMN: &str = "series_a";
pub const SURVIVAL_COLUMN: &str = "survival";

fn parse_flag(cell: &str, row: usize, column: &str) -> Result<Option<bool>, SchemaError> {
    match cell.trim() {
        "" => Ok(None),
        "1" => Ok(Some(true)),
        "0" => Ok(Some(false)),
        other => Err(SchemaError::Table {
            row,
            reason: format!("column `{column}` must be 0, 1 or empty, got `{other}`"),
        }),
    }
}

/// Reads a venture table: `venture_id`, one column per dimension (multi-choice
/// cells joined with `|`), then `series_a` and optionally `survival`.
///
/// Models are returned unvalidated so callers can report findings.
pub fn read_ventures<R: io::Read>(taxonomy: &Taxonomy, reader: R) -> Result<Vec<BusinessModel>, SchemaError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col(VENTURE_ID_COLUMN).ok_or_else(|| SchemaError::Table {
        row: 0,
        reason: format!("missing `{VENTURE_ID_COLUMN}` column"),
    })?;
    let mut dim_cols = Vec::new();
    for dim in taxonomy.dimensions() {
        let idx = col(&dim.name).ok_or_else(|| SchemaError::Table {
            row: 0,
            reason: format!("missing column for dimension `{}`", dim.name),
        })?;
        dim_cols.push((dim.name.clone(), idx));
    }
    let label_col = col(SERIES_A_COLUMN);
    let survival_col = col(SURVIVAL_COLUMN);

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut model = BusinessModel::new(record.get(id_col).unwrap_or_default());
        for (name, idx) in &dim_cols {
            let cell = record.get(*idx).unwrap_or_default();
            let chosen: BTreeSet<String> = cell
                .split(MULTI_DELIMITER)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            model.choices.insert(name.clone(), chosen);
        }
        if let Some(idx) = label_col {
            model.series_a = parse_flag(record.get(idx).unwrap_or_default(), row, SERIES_A_COLUMN)?;
        }
        if let Some(idx) = survival_col {
            model.survival = parse_flag(record.get(idx).unwrap_or_default(), row, SURVIVAL_COLUMN)?;
        }
        out.push(model);
    }
    Ok(out)
}

pub fn write_ventures<W: io::Write>(
    taxonomy: &Taxonomy,
    models: &[BusinessModel],
    writer: W,
) -> Result<(), SchemaError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let with_survival = models.iter().any(|m| m.survival.is_some());
    let mut header = vec![VENTURE_ID_COLUMN.to_string()];
    header.extend(taxonomy.dimensions().map(|d| d.name.clone()));
    header.push(SERIES_A_COLUMN.into());
    if with_survival {
        header.push(SURVIVAL_COLUMN.into());
    }
    wtr.write_record(&header)?;
    let flag = |v: Option<bool>| match v {
        Some(true) => "1".to_string(),
        Some(false) => "0".to_string(),
        None => String::new(),
    };
    for m in models {
        let mut rec = vec![m.venture_id.clone()];
        for dim in taxonomy.dimensions() {
            // Preserve taxonomy order inside the cell rather than set order.
            let cell = m.choices.get(&dim.name).map_or_else(String::new, |chosen| {
                let mut ordered: Vec<&str> = dim
                    .characteristics
                    .iter()
                    .filter(|c| chosen.contains(*c))
                    .map(String::as_str)
                    .collect();
                ordered.extend(chosen.iter().filter(|c| !dim.characteristics.contains(c)).map(String::as_str));
                ordered.join("|")
            });
            rec.push(cell);
        }
        rec.push(flag(m.series_a));
        if with_survival {
            rec.push(flag(m.survival));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
name = "minimal"
version = "0"
feature_width = 2

[[layers]]
name = "What"

[[layers.sub_layers]]
name = "Offer"

[[layers.sub_layers.dimensions]]
name = "Solution Form"
cardinality = "single"
characteristics = ["Goods", "Services"]
"#;

    /// Picks the first characteristic in every dimension.
    fn first_choice_model(t: &Taxonomy) -> BusinessModel {
        let mut m = BusinessModel::new("v-1");
        for d in t.dimensions() {
            m = m.with(&d.name, [d.characteristics[0].clone()]);
        }
        m
    }

    #[test]
    fn bundled_taxonomy_shape() {
        let t = Taxonomy::iot();
        assert_eq!(t.layers().len(), 4);
        assert_eq!(t.sub_layer_count(), 9);
        assert_eq!(t.width(), 108);
        assert_eq!(t.feature_names().len(), 108);
        let widths: Vec<(String, usize)> =
            t.components().into_iter().map(|c| (c.name, c.bits.len())).collect();
        let expected = [
            ("Solution", 13),
            ("Ecosystem", 17),
            ("Market", 11),
            ("Customer Relation", 7),
            ("Resources", 13),
            ("Partners", 18),
            ("Activities", 18),
            ("Revenues", 8),
            ("Costs", 3),
        ];
        for ((name, w), (en, ew)) in widths.iter().zip(expected) {
            assert_eq!(name, en);
            assert_eq!(*w, ew, "{name}");
        }
    }

    #[test]
    fn minimal_document_loads() {
        let t = Taxonomy::from_toml(MINIMAL).unwrap();
        assert_eq!(t.width(), 2);
        assert_eq!(t.dimension_bits("Solution Form"), Some(0..2));
    }

    #[test]
    fn duplicate_characteristic_is_rejected_with_path() {
        let doc = MINIMAL.replace(r#"["Goods", "Services"]"#, r#"["Goods", "Goods"]"#);
        let err = Taxonomy::from_toml(&doc).unwrap_err();
        match err {
            SchemaError::Invalid { path, reason } => {
                assert_eq!(path, "layers[0].sub_layers[0].dimensions[0].characteristics[1]");
                assert!(reason.contains("Goods"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn width_mismatch_and_tiny_dimension_rejected() {
        let doc = MINIMAL.replace("feature_width = 2", "feature_width = 3");
        assert!(matches!(
            Taxonomy::from_toml(&doc),
            Err(SchemaError::Invalid { ref path, .. }) if path == "feature_width"
        ));
        let doc = MINIMAL
            .replace(r#"["Goods", "Services"]"#, r#"["Goods"]"#)
            .replace("feature_width = 2", "feature_width = 1");
        assert!(matches!(Taxonomy::from_toml(&doc), Err(SchemaError::Invalid { .. })));
        assert!(matches!(Taxonomy::from_toml("layers = 3"), Err(SchemaError::Syntax(_))));
    }

    #[test]
    fn duplicate_dimension_rejected() {
        let doc = format!(
            "{MINIMAL}\n[[layers.sub_layers.dimensions]]\nname = \"Solution Form\"\ncardinality = \"multi\"\ncharacteristics = [\"A\", \"B\"]\n"
        )
        .replace("feature_width = 2", "feature_width = 4");
        let err = Taxonomy::from_toml(&doc).unwrap_err();
        assert!(err.to_string().contains("duplicate dimension"), "{err}");
    }

    #[test]
    fn validation_findings() {
        let t = Taxonomy::iot();
        let good = first_choice_model(&t);
        assert!(validate_model(&t, &good).is_valid());

        let bad = good.clone().with("Revenue Model", ["Blockchain"]);
        let report = validate_model(&t, &bad);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].dimension, "Revenue Model");
        assert!(matches!(
            report.findings[0].kind,
            FindingKind::UnknownCharacteristic { ref characteristic } if characteristic == "Blockchain"
        ));
        assert!(report.findings[0].message.contains("unknown characteristic"));

        let mut missing = good.clone();
        missing.choices.remove("Segment");
        let report = validate_model(&t, &missing);
        assert_eq!(report.findings[0].kind, FindingKind::MissingDimension);
        assert!(report.findings[0].message.contains("missing dimension"));

        let two = good.clone().with("Segment", ["Niche", "Mass"]);
        assert_eq!(
            validate_model(&t, &two).findings[0].kind,
            FindingKind::Cardinality { chosen: 2 }
        );
        let unknown_dim = good.with("Mood", ["Happy"]);
        assert_eq!(validate_model(&t, &unknown_dim).findings[0].kind, FindingKind::UnknownDimension);
    }

    #[test]
    fn encode_popcount_and_single_choice_distance() {
        let t = Taxonomy::iot();
        let m = first_choice_model(&t).with("IoT Layers", ["Device", "Network", "Security"]);
        let row = encode_one_hot(&t, &m).unwrap();
        assert_eq!(row.bits.len(), 108);
        assert_eq!(row.popcount(), m.chosen_count());

        let other = m.clone().with("Segment", ["Mass"]);
        let row2 = encode_one_hot(&t, &other).unwrap();
        assert_eq!(row.hamming(&row2), 2);
        assert_eq!(decode(&t, &row).unwrap(), m);
    }

    #[test]
    fn encode_rejects_invalid_with_report() {
        let t = Taxonomy::iot();
        let m = first_choice_model(&t).with("Revenue Model", ["Blockchain"]);
        match encode_one_hot(&t, &m) {
            Err(SchemaError::InvalidModel { report, .. }) => assert_eq!(report.findings.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decode_errors() {
        let t = Taxonomy::iot();
        let zero = FeatureRow { venture_id: "z".into(), bits: vec![0; 108] };
        assert!(matches!(decode(&t, &zero), Err(SchemaError::Decode { .. })));

        let mut row = encode_one_hot(&t, &first_choice_model(&t)).unwrap();
        let seg = t.dimension_bits("Segment").unwrap();
        row.bits[seg.start + 1] = 1;
        match decode(&t, &row) {
            Err(SchemaError::Decode { dimension, .. }) => assert_eq!(dimension, "Segment"),
            other => panic!("unexpected {other:?}"),
        }
        let short = FeatureRow { venture_id: "s".into(), bits: vec![0; 3] };
        assert!(matches!(decode(&t, &short), Err(SchemaError::WidthMismatch { .. })));
    }

    #[test]
    fn venture_table_round_trip() {
        let t = Taxonomy::iot();
        let mut a = first_choice_model(&t).with("Customer", ["B2B", "B2G"]);
        a.series_a = Some(true);
        let mut b = first_choice_model(&t);
        b.venture_id = "v-2".into();
        b.series_a = Some(false);
        let mut buf = Vec::new();
        write_ventures(&t, &[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("B2B|B2G"));
        let back = read_ventures(&t, buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn venture_table_bad_label() {
        let t = Taxonomy::from_toml(MINIMAL).unwrap();
        let csv = "venture_id,Solution Form,series_a\nv1,Goods,yes\n";
        assert!(matches!(read_ventures(&t, csv.as_bytes()), Err(SchemaError::Table { row: 1, .. })));
    }

    fn arb_model() -> impl Strategy<Value = BusinessModel> {
        let t = Taxonomy::iot();
        let dims: Vec<(String, Cardinality, Vec<String>)> = t
            .dimensions()
            .map(|d| (d.name.clone(), d.cardinality, d.characteristics.clone()))
            .collect();
        let picks: Vec<BoxedStrategy<(String, BTreeSet<String>)>> = dims
            .into_iter()
            .map(|(name, card, chars)| {
                let n = chars.len();
                match card {
                    Cardinality::Single => (0..n)
                        .prop_map(move |i| (name.clone(), BTreeSet::from([chars[i].clone()])))
                        .boxed(),
                    Cardinality::Multi => (1u32..(1u32 << n))
                        .prop_map(move |mask| {
                            let set = (0..n)
                                .filter(|i| mask & (1 << i) != 0)
                                .map(|i| chars[i].clone())
                                .collect();
                            (name.clone(), set)
                        })
                        .boxed(),
                }
            })
            .collect();
        picks.prop_map(|choices| BusinessModel {
            venture_id: "p".into(),
            choices: choices.into_iter().collect(),
            free_text: BTreeMap::new(),
            series_a: None,
            survival: None,
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_width(m in arb_model()) {
            let t = Taxonomy::iot();
            prop_assert!(validate_model(&t, &m).is_valid());
            let row = encode_one_hot(&t, &m).unwrap();
            prop_assert_eq!(row.bits.len(), t.width());
            prop_assert_eq!(row.popcount(), m.chosen_count());
            prop_assert_eq!(decode(&t, &row).unwrap(), m);
        }
    }
}
