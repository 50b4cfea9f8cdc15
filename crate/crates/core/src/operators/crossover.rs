use rand::Rng;

use super::OperatorError;
use crate::genome::{decode, Genome, CONV_LOCI, FC_LOCI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Conv,
    Fc,
}

impl Arm {
    pub fn block_loci(self) -> usize {
        match self {
            Arm::Conv => CONV_LOCI,
            Arm::Fc => FC_LOCI,
        }
    }
}

/// A cut inside block `block` (1-based) of one arm, `offset` loci into the block.
/// On the fc arm `block` counts hidden blocks only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossPoint {
    pub arm: Arm,
    pub block: usize,
    pub offset: usize,
}

impl CrossPoint {
    /// Position of the cut in the genome's flat code.
    pub fn position(&self, genome: &Genome) -> usize {
        let before_arm = match self.arm {
            Arm::Conv => 0,
            Arm::Fc => genome.conv_count() * CONV_LOCI,
        };
        before_arm + (self.block - 1) * self.arm.block_loci() + self.offset
    }

    fn check(&self, genome: &Genome, which: &str) -> Result<(), OperatorError> {
        let blocks = match self.arm {
            Arm::Conv => genome.conv_count(),
            Arm::Fc => genome.hidden_fc_count(),
        };
        if self.block == 0 || self.block > blocks {
            return Err(OperatorError::InvalidCrossPoint(format!(
                "{which}: block {} outside 1..={blocks} on the {:?} arm",
                self.block, self.arm
            )));
        }
        if self.offset >= self.arm.block_loci() {
            return Err(OperatorError::InvalidCrossPoint(format!(
                "{which}: offset {} outside the block",
                self.offset
            )));
        }
        Ok(())
    }
}

/// Draws an aligned pair of cut points: same arm, same in-block offset, block
/// indices uniform per parent. The fc arm is only eligible when both parents have
/// a hidden fc block; output blocks are never cut.
pub fn sample_cross_points<R: Rng + ?Sized>(g1: &Genome, g2: &Genome, rng: &mut R) -> (CrossPoint, CrossPoint) {
    let fc_possible = g1.hidden_fc_count() > 0 && g2.hidden_fc_count() > 0;
    let arm = if fc_possible && rng.gen_bool(0.5) { Arm::Fc } else { Arm::Conv };
    let blocks = |g: &Genome| match arm {
        Arm::Conv => g.conv_count(),
        Arm::Fc => g.hidden_fc_count(),
    };
    let m1 = rng.gen_range(1..=blocks(g1));
    let m2 = rng.gen_range(1..=blocks(g2));
    let offset = rng.gen_range(0..arm.block_loci());
    (
        CrossPoint { arm, block: m1, offset },
        CrossPoint { arm, block: m2, offset },
    )
}

/// Swaps the tails of two genomes at aligned cut points.
///
/// Code lengths move by the distance between the cuts:
/// `L(c1) = L(g2) + (p1 - p2)` and `L(c2) = L(g1) + (p2 - p1)`, where `p` is the
/// cut position. On the conv arm that is `(m1 - m2) * 6`; on the fc arm it is
/// `(N_C1 - N_C2) * 6 + (m1 - m2) * 4`, since each child keeps its own conv arm.
pub fn splice(g1: &Genome, g2: &Genome, k1: CrossPoint, k2: CrossPoint) -> Result<(Genome, Genome), OperatorError> {
    if g1.num_classes != g2.num_classes {
        return Err(OperatorError::ClassMismatch(g1.num_classes, g2.num_classes));
    }
    if k1.arm != k2.arm || k1.offset != k2.offset {
        return Err(OperatorError::InvalidCrossPoint(
            "cut points must share arm and offset".into(),
        ));
    }
    k1.check(g1, "first parent")?;
    k2.check(g2, "second parent")?;

    let (v1, v2) = (g1.loci(), g2.loci());
    let (p1, p2) = (k1.position(g1), k2.position(g2));
    let child = |head: &[u32], tail: &[u32]| -> Vec<u32> { head.iter().chain(tail).copied().collect() };
    let c1 = child(&v1[..p1], &v2[p2..]);
    let c2 = child(&v2[..p2], &v1[p1..]);

    let (conv1, conv2) = match k1.arm {
        Arm::Conv => (
            k1.block + g2.conv_count() - k2.block,
            k2.block + g1.conv_count() - k1.block,
        ),
        Arm::Fc => (g1.conv_count(), g2.conv_count()),
    };
    let rebuild = |code: &[u32], conv: usize| {
        decode(code, conv, g1.num_classes)
            .map_err(|e| OperatorError::InvalidCrossPoint(format!("child failed to decode: {e}")))
    };
    Ok((rebuild(&c1, conv1)?, rebuild(&c2, conv2)?))
}
