//! Well-known architectures expressed as genomes.

use crate::genome::{Activation, ConvBlock, Dropout, FcBlock, Genome, Optimizer, Pooling};

/// VGG-19 as an integer code: 16 conv blocks, two 4096-unit hidden blocks, a
/// 1000-way output block and SGD.
#[rustfmt::skip]
pub const VGG19_CODE: [u32; 109] = [
    64, 3, 0, 1, 4, 0,   64, 3, 2, 1, 4, 0,
    128, 3, 0, 1, 4, 0,  128, 3, 2, 1, 4, 0,
    256, 3, 0, 1, 4, 0,  256, 3, 0, 1, 4, 0,  256, 3, 0, 1, 4, 0,  256, 3, 2, 1, 4, 0,
    512, 3, 0, 1, 4, 0,  512, 3, 2, 1, 4, 0,  512, 3, 0, 1, 4, 0,  512, 3, 2, 1, 4, 0,
    512, 3, 0, 1, 4, 0,  512, 3, 2, 1, 4, 0,  512, 3, 0, 1, 4, 0,  512, 3, 2, 1, 4, 0,
    4096, 1, 4, 0,  4096, 1, 4, 0,  1000, 0, 5, 0,
    0,
];

fn conv(filters: u32, kernel: u32, pooling: Pooling, activation: Activation, dropout: u32) -> ConvBlock {
    ConvBlock {
        filters,
        kernel,
        pooling,
        batch_norm: true,
        activation,
        dropout: Dropout(dropout),
    }
}

fn dense(units: u32, batch_norm: bool, activation: Activation, dropout: u32) -> FcBlock {
    FcBlock {
        units,
        batch_norm,
        activation,
        dropout: Dropout(dropout),
    }
}

pub fn vgg19_genome() -> Genome {
    // (filters, pooled) per conv block, in code order.
    #[rustfmt::skip]
    const CONV: [(u32, bool); 16] = [
        (64, false), (64, true),
        (128, false), (128, true),
        (256, false), (256, false), (256, false), (256, true),
        (512, false), (512, true), (512, false), (512, true),
        (512, false), (512, true), (512, false), (512, true),
    ];
    let conv_blocks = CONV
        .iter()
        .map(|&(filters, pooled)| {
            let pooling = if pooled { Pooling::Average } else { Pooling::None };
            conv(filters, 3, pooling, Activation::Relu, 0)
        })
        .collect();
    Genome {
        conv_blocks,
        fc_blocks: vec![
            dense(4096, true, Activation::Relu, 0),
            dense(4096, true, Activation::Relu, 0),
            FcBlock::output(1000),
        ],
        optimizer: Optimizer::Sgd,
        num_classes: 1000,
    }
}

/// Best MNIST architecture reported after ten generations: three conv blocks,
/// three hidden fc blocks, Adamax.
pub fn mnist_best_genome() -> Genome {
    Genome {
        conv_blocks: vec![
            conv(419, 5, Pooling::None, Activation::Elu, 4),
            conv(403, 5, Pooling::None, Activation::Elu, 0),
            conv(288, 7, Pooling::Average, Activation::Prelu, 0),
        ],
        fc_blocks: vec![
            dense(194, true, Activation::Relu, 6),
            dense(414, true, Activation::Elu, 9),
            dense(356, true, Activation::ThresholdedRelu, 1),
            FcBlock::output(10),
        ],
        optimizer: Optimizer::Adamax,
        num_classes: 10,
    }
}

/// The smallest legal genome: `{[16,3,0,0,0,0]}, {[16,0,0,0],[C,0,5,0]}, O=0`.
pub fn minimal_genome(num_classes: u32) -> Genome {
    Genome {
        conv_blocks: vec![ConvBlock {
            filters: 16,
            kernel: 3,
            pooling: Pooling::None,
            batch_norm: false,
            activation: Activation::ThresholdedRelu,
            dropout: Dropout(0),
        }],
        fc_blocks: vec![dense(16, false, Activation::ThresholdedRelu, 0), FcBlock::output(num_classes)],
        optimizer: Optimizer::Sgd,
        num_classes,
    }
}
