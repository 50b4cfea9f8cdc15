//! Genome data model for sequential CNN architectures.
//!
//! A genome is a convolutional arm (blocks coded `[N, S, P, B, A, D]`), a fully
//! connected arm (blocks coded `[N, B, A, D]`, the last one being the fixed
//! Softmax output block) and a single optimizer code.

mod codec;
mod file;
mod space;
mod summary;

pub use codec::{canonical_hash, code_length, decode, encode, random_genome, validate};
pub(crate) use codec::sample_code;
pub use file::{GenomeFile, GenomeFileError};
pub use space::{CodeRange, SearchSpace, SpaceError};
pub use summary::summarize;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Loci per convolutional block.
pub const CONV_LOCI: usize = 6;
/// Loci per fully connected block.
pub const FC_LOCI: usize = 4;

macro_rules! code_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident = $code:literal => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant = $code),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> u32 {
                self as u32
            }

            pub fn from_code(code: u32) -> Option<Self> {
                match code {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

code_enum! {
    /// Pooling locus `P`. Both pooling kinds use stride 2.
    pub enum Pooling {
        None = 0 => "none",
        Max = 1 => "max",
        Average = 2 => "average",
    }
}

code_enum! {
    /// Activation locus `A`. `Softmax` is only legal on the output block.
    pub enum Activation {
        ThresholdedRelu = 0 => "TReLU",
        Elu = 1 => "ELU",
        Prelu = 2 => "PReLU",
        LeakyRelu = 3 => "LeakyReLU",
        Relu = 4 => "ReLU",
        Softmax = 5 => "Softmax",
    }
}

code_enum! {
    /// Optimizer locus `O`.
    pub enum Optimizer {
        Sgd = 0 => "SGD",
        RmsProp = 1 => "RMSprop",
        Adagrad = 2 => "Adagrad",
        Adadelta = 3 => "Adadelta",
        Adam = 4 => "Adam",
        Adamax = 5 => "Adamax",
        Nadam = 6 => "Nadam",
    }
}

/// Dropout probability quantized to twentieths: code `d` means `d / 20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dropout(pub u32);

impl Dropout {
    /// Largest representable code (probability 0.5).
    pub const MAX_CODE: u32 = 10;

    pub fn code(self) -> u32 {
        self.0
    }

    pub fn probability(self) -> f64 {
        f64::from(self.0) / 20.0
    }

    pub fn percent(self) -> u32 {
        self.0 * 5
    }

    /// Inverse of [`Dropout::percent`]; `None` unless `pct` is a multiple of 5.
    pub fn from_percent(pct: u32) -> Option<Self> {
        pct.is_multiple_of(5).then_some(Dropout(pct / 5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvBlock {
    pub filters: u32,
    pub kernel: u32,
    pub pooling: Pooling,
    pub batch_norm: bool,
    pub activation: Activation,
    pub dropout: Dropout,
}

impl ConvBlock {
    pub fn loci(&self) -> [u32; CONV_LOCI] {
        [
            self.filters,
            self.kernel,
            self.pooling.code(),
            u32::from(self.batch_norm),
            self.activation.code(),
            self.dropout.code(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FcBlock {
    pub units: u32,
    pub batch_norm: bool,
    pub activation: Activation,
    pub dropout: Dropout,
}

impl FcBlock {
    /// The fixed final block: one unit per class, no batch norm, Softmax, no dropout.
    pub fn output(num_classes: u32) -> Self {
        FcBlock {
            units: num_classes,
            batch_norm: false,
            activation: Activation::Softmax,
            dropout: Dropout(0),
        }
    }

    pub fn loci(&self) -> [u32; FC_LOCI] {
        [
            self.units,
            u32::from(self.batch_norm),
            self.activation.code(),
            self.dropout.code(),
        ]
    }
}

/// A complete architecture. `fc_blocks` includes the output block as its last element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    pub conv_blocks: Vec<ConvBlock>,
    pub fc_blocks: Vec<FcBlock>,
    pub optimizer: Optimizer,
    pub num_classes: u32,
}

impl Genome {
    pub fn conv_count(&self) -> usize {
        self.conv_blocks.len()
    }

    pub fn fc_count(&self) -> usize {
        self.fc_blocks.len()
    }

    /// Hidden fully connected blocks, i.e. every fc block except the output block.
    pub fn hidden_fc(&self) -> &[FcBlock] {
        match self.fc_blocks.split_last() {
            Some((_, hidden)) => hidden,
            None => &[],
        }
    }

    pub fn hidden_fc_count(&self) -> usize {
        self.fc_blocks.len().saturating_sub(1)
    }

    /// Conv blocks plus fc blocks (output block included).
    pub fn learnable_layers(&self) -> usize {
        self.conv_blocks.len() + self.fc_blocks.len()
    }

    /// Flat locus sequence without any validation. Same layout as [`encode`].
    pub fn loci(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(code_length(self) + 1);
        for block in &self.conv_blocks {
            out.extend_from_slice(&block.loci());
        }
        for block in &self.fc_blocks {
            out.extend_from_slice(&block.loci());
        }
        out.push(self.optimizer.code());
        out
    }
}

/// Where a violation or range error was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Genome,
    /// Zero-based conv block index.
    Conv(usize),
    /// Zero-based fc block index.
    Fc(usize),
    Optimizer,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Genome => f.write_str("genome"),
            Site::Conv(i) => write!(f, "conv block {}", i + 1),
            Site::Fc(i) => write!(f, "fc block {}", i + 1),
            Site::Optimizer => f.write_str("optimizer"),
        }
    }
}

/// One broken invariant, as reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub site: Site,
    pub locus: &'static str,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(site: Site, locus: &'static str, message: impl Into<String>) -> Self {
        Violation {
            site,
            locus,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.site, self.message)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed code: {0}")]
    Malformed(String),
    #[error("{site}: {locus} value {value} out of range")]
    OutOfRange {
        site: Site,
        locus: &'static str,
        value: u32,
    },
    #[error("invalid genome: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
