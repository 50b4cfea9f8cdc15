use rand::Rng;
use xxhash_rust::xxh3::Xxh3;

use super::{
    Activation, CodeRange, CodecError, ConvBlock, Dropout, FcBlock, Genome, Optimizer, Pooling,
    SearchSpace, Site, SpaceError, Violation, CONV_LOCI, FC_LOCI,
};

/// Kernel sizes the encoding can express at all.
pub(crate) const KERNEL_DOMAIN: [u32; 3] = [3, 5, 7];

/// The widest space the integer code can represent. Used by [`encode`] and
/// [`decode`], which check well-formedness but not a particular search space.
pub(crate) fn codec_domain() -> SearchSpace {
    SearchSpace {
        filters: CodeRange::new(1, u32::MAX),
        kernels: KERNEL_DOMAIN.to_vec(),
        pooling: CodeRange::new(0, Pooling::Average.code()),
        batch_norm: CodeRange::new(0, 1),
        activation: CodeRange::new(0, Activation::Relu.code()),
        dropout: CodeRange::new(0, Dropout::MAX_CODE),
        units: CodeRange::new(1, u32::MAX),
        optimizer: CodeRange::new(0, Optimizer::Nadam.code()),
        ..SearchSpace::default()
    }
}

/// `6 * N_C + 4 * N_F`; the optimizer locus is not counted.
pub fn code_length(genome: &Genome) -> usize {
    CONV_LOCI * genome.conv_blocks.len() + FC_LOCI * genome.fc_blocks.len()
}

/// Samples a genome with every locus uniform over its range in `space`.
pub fn random_genome<R: Rng + ?Sized>(
    space: &SearchSpace,
    num_classes: u32,
    rng: &mut R,
) -> Result<Genome, SpaceError> {
    space.validate()?;
    if num_classes < 2 {
        return Err(SpaceError::Invalid {
            field: "num_classes",
            reason: format!("need at least 2 classes, got {num_classes}"),
        });
    }
    let conv_count = space.init_conv_blocks.sample(rng);
    let hidden_count = space.init_hidden_fc_blocks.sample(rng);

    let conv_blocks = (0..conv_count)
        .map(|_| ConvBlock {
            filters: space.filters.sample(rng),
            kernel: space.sample_kernel(rng),
            pooling: sample_code(space.pooling, rng, Pooling::from_code),
            batch_norm: space.batch_norm.sample(rng) == 1,
            activation: sample_code(space.activation, rng, Activation::from_code),
            dropout: Dropout(space.dropout.sample(rng)),
        })
        .collect();
    let mut fc_blocks: Vec<FcBlock> = (0..hidden_count)
        .map(|_| FcBlock {
            units: space.units.sample(rng),
            batch_norm: space.batch_norm.sample(rng) == 1,
            activation: sample_code(space.activation, rng, Activation::from_code),
            dropout: Dropout(space.dropout.sample(rng)),
        })
        .collect();
    fc_blocks.push(FcBlock::output(num_classes));

    Ok(Genome {
        conv_blocks,
        fc_blocks,
        optimizer: sample_code(space.optimizer, rng, Optimizer::from_code),
        num_classes,
    })
}

pub(crate) fn sample_code<T, R: Rng + ?Sized>(
    range: CodeRange,
    rng: &mut R,
    from_code: fn(u32) -> Option<T>,
) -> T {
    from_code(range.sample(rng)).expect("validated search space stays inside the code domain")
}

/// Lists every broken invariant of `genome` against `space`. Empty means valid.
pub fn validate(genome: &Genome, space: &SearchSpace) -> Vec<Violation> {
    let mut out = Vec::new();
    if genome.num_classes < 2 {
        out.push(Violation::new(
            Site::Genome,
            "num_classes",
            format!("num_classes must be at least 2, got {}", genome.num_classes),
        ));
    }
    if genome.conv_blocks.is_empty() {
        out.push(Violation::new(
            Site::Genome,
            "conv_blocks",
            "at least one convolutional block is required",
        ));
    }
    if genome.fc_blocks.len() < 2 {
        out.push(Violation::new(
            Site::Genome,
            "fc_blocks",
            "at least one hidden fully connected block plus the output block is required",
        ));
    }

    for (i, block) in genome.conv_blocks.iter().enumerate() {
        let site = Site::Conv(i);
        check_range(&mut out, site, "filters", block.filters, space.filters);
        if !space.kernels.contains(&block.kernel) {
            out.push(Violation::new(
                site,
                "kernel",
                format!("kernel out of range ({} not in {:?})", block.kernel, space.kernels),
            ));
        }
        check_range(&mut out, site, "pooling", block.pooling.code(), space.pooling);
        check_range(&mut out, site, "batch_norm", u32::from(block.batch_norm), space.batch_norm);
        check_range(&mut out, site, "activation", block.activation.code(), space.activation);
        check_range(&mut out, site, "dropout", block.dropout.code(), space.dropout);
    }

    if let Some((output, hidden)) = genome.fc_blocks.split_last() {
        for (i, block) in hidden.iter().enumerate() {
            let site = Site::Fc(i);
            check_range(&mut out, site, "units", block.units, space.units);
            check_range(&mut out, site, "batch_norm", u32::from(block.batch_norm), space.batch_norm);
            check_range(&mut out, site, "activation", block.activation.code(), space.activation);
            check_range(&mut out, site, "dropout", block.dropout.code(), space.dropout);
        }
        let site = Site::Fc(hidden.len());
        if output.units != genome.num_classes {
            out.push(Violation::new(
                site,
                "units",
                format!(
                    "output block must have one unit per class ({} != {})",
                    output.units, genome.num_classes
                ),
            ));
        }
        if output.batch_norm {
            out.push(Violation::new(site, "batch_norm", "output block must not use batch norm"));
        }
        if output.activation != Activation::Softmax {
            out.push(Violation::new(site, "activation", "output block must use Softmax"));
        }
        if output.dropout.code() != 0 {
            out.push(Violation::new(site, "dropout", "output block must not use dropout"));
        }
    }

    check_range(&mut out, Site::Optimizer, "optimizer", genome.optimizer.code(), space.optimizer);
    out
}

fn check_range(out: &mut Vec<Violation>, site: Site, locus: &'static str, value: u32, range: CodeRange) {
    if !range.contains(value) {
        out.push(Violation::new(
            site,
            locus,
            format!("{} out of range ({value} not in {range})", locus.replace('_', " ")),
        ));
    }
}

/// Flattens a well-formed genome into its integer code: conv loci, fc loci, optimizer.
pub fn encode(genome: &Genome) -> Result<Vec<u32>, CodecError> {
    let violations = validate(genome, &codec_domain());
    if violations.is_empty() {
        Ok(genome.loci())
    } else {
        Err(CodecError::Invalid(violations))
    }
}

/// Rebuilds a genome from its integer code. `conv_count` disambiguates the split
/// between the two arms.
pub fn decode(code: &[u32], conv_count: usize, num_classes: u32) -> Result<Genome, CodecError> {
    if conv_count == 0 {
        return Err(CodecError::Malformed("conv_count must be at least 1".into()));
    }
    let conv_len = CONV_LOCI * conv_count;
    let fc_len = code
        .len()
        .checked_sub(conv_len + 1)
        .ok_or_else(|| CodecError::Malformed(format!(
            "{} loci cannot hold {conv_count} conv blocks and an optimizer",
            code.len()
        )))?;
    if fc_len % FC_LOCI != 0 || fc_len / FC_LOCI < 2 {
        return Err(CodecError::Malformed(format!(
            "{} loci do not split into {conv_count} conv blocks, at least 2 fc blocks and an optimizer",
            code.len()
        )));
    }
    if num_classes < 2 {
        return Err(CodecError::Malformed(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }

    let (conv_code, rest) = code.split_at(conv_len);
    let (fc_code, optimizer_code) = rest.split_at(fc_len);
    let fc_count = fc_len / FC_LOCI;

    let conv_blocks = conv_code
        .chunks_exact(CONV_LOCI)
        .enumerate()
        .map(|(i, c)| decode_conv(Site::Conv(i), c))
        .collect::<Result<Vec<_>, _>>()?;
    let fc_blocks = fc_code
        .chunks_exact(FC_LOCI)
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == fc_count {
                decode_output(Site::Fc(i), c, num_classes)
            } else {
                decode_hidden_fc(Site::Fc(i), c)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let optimizer = Optimizer::from_code(optimizer_code[0]).ok_or(CodecError::OutOfRange {
        site: Site::Optimizer,
        locus: "optimizer",
        value: optimizer_code[0],
    })?;

    Ok(Genome {
        conv_blocks,
        fc_blocks,
        optimizer,
        num_classes,
    })
}

fn out_of_range(site: Site, locus: &'static str, value: u32) -> CodecError {
    CodecError::OutOfRange { site, locus, value }
}

fn decode_bool(site: Site, locus: &'static str, value: u32) -> Result<bool, CodecError> {
    match value {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(out_of_range(site, locus, v)),
    }
}

fn decode_hidden_activation(site: Site, value: u32) -> Result<Activation, CodecError> {
    match Activation::from_code(value) {
        Some(a) if a != Activation::Softmax => Ok(a),
        _ => Err(out_of_range(site, "activation", value)),
    }
}

fn decode_dropout(site: Site, value: u32) -> Result<Dropout, CodecError> {
    if value <= Dropout::MAX_CODE {
        Ok(Dropout(value))
    } else {
        Err(out_of_range(site, "dropout", value))
    }
}

fn decode_conv(site: Site, c: &[u32]) -> Result<ConvBlock, CodecError> {
    let [filters, kernel, pooling, batch_norm, activation, dropout] = c else {
        unreachable!("chunks_exact yields conv-sized chunks")
    };
    if *filters == 0 {
        return Err(out_of_range(site, "filters", *filters));
    }
    if !KERNEL_DOMAIN.contains(kernel) {
        return Err(out_of_range(site, "kernel", *kernel));
    }
    Ok(ConvBlock {
        filters: *filters,
        kernel: *kernel,
        pooling: Pooling::from_code(*pooling).ok_or(out_of_range(site, "pooling", *pooling))?,
        batch_norm: decode_bool(site, "batch_norm", *batch_norm)?,
        activation: decode_hidden_activation(site, *activation)?,
        dropout: decode_dropout(site, *dropout)?,
    })
}

fn decode_hidden_fc(site: Site, c: &[u32]) -> Result<FcBlock, CodecError> {
    let [units, batch_norm, activation, dropout] = c else {
        unreachable!("chunks_exact yields fc-sized chunks")
    };
    if *units == 0 {
        return Err(out_of_range(site, "units", *units));
    }
    Ok(FcBlock {
        units: *units,
        batch_norm: decode_bool(site, "batch_norm", *batch_norm)?,
        activation: decode_hidden_activation(site, *activation)?,
        dropout: decode_dropout(site, *dropout)?,
    })
}

fn decode_output(site: Site, c: &[u32], num_classes: u32) -> Result<FcBlock, CodecError> {
    let expected = FcBlock::output(num_classes);
    for ((&got, want), locus) in c
        .iter()
        .zip(expected.loci())
        .zip(["units", "batch_norm", "activation", "dropout"])
    {
        if got != want {
            return Err(out_of_range(site, locus, got));
        }
    }
    Ok(expected)
}

/// Stable 64-bit key over the class count, the arm split and the full locus sequence.
///
/// Uses XXH3 over little-endian words, so the key is identical across runs and platforms.
pub fn canonical_hash(genome: &Genome) -> u64 {
    let mut hasher = Xxh3::new();
    hasher.update(&genome.num_classes.to_le_bytes());
    hasher.update(&(genome.conv_blocks.len() as u64).to_le_bytes());
    for locus in genome.loci() {
        hasher.update(&locus.to_le_bytes());
    }
    hasher.digest()
}
