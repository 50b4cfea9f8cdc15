use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Dropout, Optimizer, Pooling};

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRange {
    pub min: u32,
    pub max: u32,
}

impl CodeRange {
    pub const fn new(min: u32, max: u32) -> Self {
        CodeRange { min, max }
    }

    pub const fn single(value: u32) -> Self {
        CodeRange {
            min: value,
            max: value,
        }
    }

    pub fn contains(&self, value: u32) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn is_empty(&self) -> bool {
        self.min > self.max
    }

    /// Number of values in the range.
    pub fn width(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            u64::from(self.max - self.min) + 1
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.min..=self.max)
    }
}

impl std::fmt::Display for CodeRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.min, self.max)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("search space field `{field}` is empty: {range}")]
    Empty { field: &'static str, range: String },
    #[error("search space field `{field}` exceeds the code domain: {range} (allowed up to {limit})")]
    BeyondDomain {
        field: &'static str,
        range: CodeRange,
        limit: u32,
    },
    #[error("search space field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Per-locus value ranges plus structural ranges used when sampling fresh genomes.
///
/// The default is the published value table: filters and units in `[16, 512]`,
/// kernels `{3, 5, 7}`, pooling `0..=2`, batch norm `0..=1`, hidden activations
/// `0..=4`, dropout `0..=10` twentieths and optimizers `0..=6`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub filters: CodeRange,
    pub kernels: Vec<u32>,
    pub pooling: CodeRange,
    pub batch_norm: CodeRange,
    pub activation: CodeRange,
    pub dropout: CodeRange,
    pub units: CodeRange,
    pub optimizer: CodeRange,
    pub init_conv_blocks: CodeRange,
    pub init_hidden_fc_blocks: CodeRange,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            filters: CodeRange::new(16, 512),
            kernels: vec![3, 5, 7],
            pooling: CodeRange::new(0, 2),
            batch_norm: CodeRange::new(0, 1),
            activation: CodeRange::new(0, 4),
            dropout: CodeRange::new(0, Dropout::MAX_CODE),
            units: CodeRange::new(16, 512),
            optimizer: CodeRange::new(0, 6),
            init_conv_blocks: CodeRange::new(1, 20),
            init_hidden_fc_blocks: CodeRange::new(1, 3),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SpaceError> {
        let ranges = [
            ("filters", self.filters),
            ("pooling", self.pooling),
            ("batch_norm", self.batch_norm),
            ("activation", self.activation),
            ("dropout", self.dropout),
            ("units", self.units),
            ("optimizer", self.optimizer),
            ("init_conv_blocks", self.init_conv_blocks),
            ("init_hidden_fc_blocks", self.init_hidden_fc_blocks),
        ];
        for (field, range) in ranges {
            if range.is_empty() {
                return Err(SpaceError::Empty {
                    field,
                    range: range.to_string(),
                });
            }
        }
        if self.kernels.is_empty() {
            return Err(SpaceError::Empty {
                field: "kernels",
                range: "{}".into(),
            });
        }
        let domains = [
            ("pooling", self.pooling, Pooling::Average.code()),
            ("batch_norm", self.batch_norm, 1),
            // Softmax is reserved for the output block.
            ("activation", self.activation, Activation::Relu.code()),
            ("dropout", self.dropout, Dropout::MAX_CODE),
            ("optimizer", self.optimizer, Optimizer::Nadam.code()),
        ];
        for (field, range, limit) in domains {
            if range.max > limit {
                return Err(SpaceError::BeyondDomain {
                    field,
                    range,
                    limit,
                });
            }
        }
        for (field, range) in [
            ("filters", self.filters),
            ("units", self.units),
            ("init_conv_blocks", self.init_conv_blocks),
            ("init_hidden_fc_blocks", self.init_hidden_fc_blocks),
        ] {
            if range.min == 0 {
                return Err(SpaceError::Invalid {
                    field,
                    reason: format!("minimum must be at least 1, got {range}"),
                });
            }
        }
        if let Some(&k) = self.kernels.iter().find(|&&k| !super::codec::KERNEL_DOMAIN.contains(&k)) {
            return Err(SpaceError::Invalid {
                field: "kernels",
                reason: format!("kernel size {k} is not one of 3, 5, 7"),
            });
        }
        Ok(())
    }

    pub fn sample_kernel<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.kernels[rng.gen_range(0..self.kernels.len())]
    }
}
