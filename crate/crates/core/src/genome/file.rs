//! JSON genome document shared with trainer workers.
//!
//! ```json
//! {"num_classes": 10, "optimizer": 5,
//!  "conv_blocks": [{"filters": 419, "kernel": 5, "pooling": 0, "batch_norm": 1, "activation": 1, "dropout_pct": 20}],
//!  "fc_blocks": [{"filters": 194, "batch_norm": 1, "activation": 4, "dropout_pct": 30},
//!                {"filters": 10, "batch_norm": 0, "activation": 5, "dropout_pct": 0}]}
//! ```
//!
//! Fully connected blocks carry the same fields as conv blocks minus `kernel` and
//! `pooling`, so their width is stored under `filters` (`units` is accepted on read).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::codec::codec_domain;
use super::{validate, Activation, ConvBlock, Dropout, FcBlock, Genome, Optimizer, Pooling, Site};

#[derive(Debug, thiserror::Error)]
pub enum GenomeFileError {
    #[error("cannot read genome file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed genome document: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockFile {
    pub filters: u32,
    pub kernel: u32,
    pub pooling: u32,
    pub batch_norm: u32,
    pub activation: u32,
    pub dropout_pct: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcBlockFile {
    #[serde(alias = "units")]
    pub filters: u32,
    pub batch_norm: u32,
    pub activation: u32,
    pub dropout_pct: u32,
}

/// Wire and on-disk form of a [`Genome`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeFile {
    pub num_classes: u32,
    pub optimizer: u32,
    pub conv_blocks: Vec<ConvBlockFile>,
    pub fc_blocks: Vec<FcBlockFile>,
}

impl From<&Genome> for GenomeFile {
    fn from(g: &Genome) -> Self {
        GenomeFile {
            num_classes: g.num_classes,
            optimizer: g.optimizer.code(),
            conv_blocks: g
                .conv_blocks
                .iter()
                .map(|b| ConvBlockFile {
                    filters: b.filters,
                    kernel: b.kernel,
                    pooling: b.pooling.code(),
                    batch_norm: u32::from(b.batch_norm),
                    activation: b.activation.code(),
                    dropout_pct: b.dropout.percent(),
                })
                .collect(),
            fc_blocks: g
                .fc_blocks
                .iter()
                .map(|b| FcBlockFile {
                    filters: b.units,
                    batch_norm: u32::from(b.batch_norm),
                    activation: b.activation.code(),
                    dropout_pct: b.dropout.percent(),
                })
                .collect(),
        }
    }
}

fn field_err(field: String, reason: impl Into<String>) -> GenomeFileError {
    GenomeFileError::Field {
        field,
        reason: reason.into(),
    }
}

fn code<T>(field: String, value: u32, from_code: fn(u32) -> Option<T>) -> Result<T, GenomeFileError> {
    from_code(value).ok_or_else(|| field_err(field, format!("unknown code {value}")))
}

fn flag(field: String, value: u32) -> Result<bool, GenomeFileError> {
    match value {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(field_err(field, format!("expected 0 or 1, got {v}"))),
    }
}

fn dropout(field: String, pct: u32) -> Result<Dropout, GenomeFileError> {
    match Dropout::from_percent(pct) {
        Some(d) if d.code() <= Dropout::MAX_CODE => Ok(d),
        _ => Err(field_err(field, format!("expected a multiple of 5 in 0..=50, got {pct}"))),
    }
}

impl TryFrom<GenomeFile> for Genome {
    type Error = GenomeFileError;

    fn try_from(f: GenomeFile) -> Result<Self, Self::Error> {
        let conv_blocks = f
            .conv_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let at = |locus: &str| format!("conv_blocks[{i}].{locus}");
                Ok(ConvBlock {
                    filters: b.filters,
                    kernel: b.kernel,
                    pooling: code(at("pooling"), b.pooling, Pooling::from_code)?,
                    batch_norm: flag(at("batch_norm"), b.batch_norm)?,
                    activation: code(at("activation"), b.activation, Activation::from_code)?,
                    dropout: dropout(at("dropout_pct"), b.dropout_pct)?,
                })
            })
            .collect::<Result<Vec<_>, GenomeFileError>>()?;
        let fc_blocks = f
            .fc_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let at = |locus: &str| format!("fc_blocks[{i}].{locus}");
                Ok(FcBlock {
                    units: b.filters,
                    batch_norm: flag(at("batch_norm"), b.batch_norm)?,
                    activation: code(at("activation"), b.activation, Activation::from_code)?,
                    dropout: dropout(at("dropout_pct"), b.dropout_pct)?,
                })
            })
            .collect::<Result<Vec<_>, GenomeFileError>>()?;
        let genome = Genome {
            conv_blocks,
            fc_blocks,
            optimizer: code("optimizer".into(), f.optimizer, Optimizer::from_code)?,
            num_classes: f.num_classes,
        };

        if let Some(v) = validate(&genome, &codec_domain()).into_iter().next() {
            let field = match v.site {
                Site::Genome => v.locus.to_string(),
                Site::Optimizer => "optimizer".to_string(),
                Site::Conv(i) => format!("conv_blocks[{i}].{}", file_locus(v.locus)),
                Site::Fc(i) => format!("fc_blocks[{i}].{}", file_locus(v.locus)),
            };
            return Err(field_err(field, v.message));
        }
        Ok(genome)
    }
}

fn file_locus(locus: &str) -> &str {
    match locus {
        "units" => "filters",
        "dropout" => "dropout_pct",
        other => other,
    }
}

impl Serialize for Genome {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GenomeFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = GenomeFile::deserialize(deserializer)?;
        Genome::try_from(file).map_err(serde::de::Error::custom)
    }
}

impl Genome {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GenomeFile::from(self)).expect("genome documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Genome, GenomeFileError> {
        let file: GenomeFile = serde_json::from_str(text)?;
        Genome::try_from(file)
    }

    pub fn read_file(path: &Path) -> Result<Genome, GenomeFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenomeFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Genome::from_json(&text)
    }

    pub fn write_file(&self, path: &Path) -> std::io::Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)
    }
}
