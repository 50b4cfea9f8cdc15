use std::fmt::Write;

use super::{Genome, Pooling};

fn pooling_text(p: Pooling) -> &'static str {
    match p {
        Pooling::None => "no pooling",
        Pooling::Max => "max pooling stride 2",
        Pooling::Average => "average pooling stride 2",
    }
}

fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}

/// Human-readable architecture listing, one line per block plus the optimizer.
pub fn summarize(genome: &Genome) -> String {
    let mut out = String::new();
    for (i, b) in genome.conv_blocks.iter().enumerate() {
        let _ = writeln!(
            out,
            "conv {}: {} filters {}x{}, {}, batch-norm {}, {}, dropout {}%",
            i + 1,
            b.filters,
            b.kernel,
            b.kernel,
            pooling_text(b.pooling),
            on_off(b.batch_norm),
            b.activation,
            b.dropout.percent()
        );
    }
    let last = genome.fc_blocks.len().saturating_sub(1);
    for (i, b) in genome.fc_blocks.iter().enumerate() {
        let tag = if i == last { " (output)" } else { "" };
        let _ = writeln!(
            out,
            "fc {}{tag}: {} units, batch-norm {}, {}, dropout {}%",
            i + 1,
            b.units,
            on_off(b.batch_norm),
            b.activation,
            b.dropout.percent()
        );
    }
    let _ = writeln!(out, "optimizer: {}", genome.optimizer);
    out
}
