//! Behavioral models of binary-search, pruned binary-search and flash ADCs.
//!
//! All converters work on a normalized input in `[0, 1]`. Thresholds are kept
//! as integer *positions* `t` in `1..2^N` meaning the reference `t / 2^N` of
//! full scale, so the structure itself is exact and independent of the
//! scalar type used for the input sample.
//!
//! Code `c` owns the half-open interval `[c/2^N, (c+1)/2^N)`; the top code
//! also owns `1.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 8;

fn check_bits(n_bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&n_bits) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "ADC resolution must be in {MIN_BITS}..={MAX_BITS} bits, got {n_bits}"
        )))
    }
}

/// Balanced tree of the `2^N - 1` comparison thresholds of an N-bit
/// binary-search ADC.
///
/// The tree is implicit: the node at depth `d` holds a position with exactly
/// `N - 1 - d` trailing zero bits, the root is `2^(N-1)` and an in-order walk
/// visits `1, 2, .., 2^N - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdTree {
    n_bits: u32,
}

impl ThresholdTree {
    pub fn new(n_bits: u32) -> Result<Self> {
        check_bits(n_bits)?;
        Ok(Self { n_bits })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    /// Number of output codes, `2^N`.
    pub fn levels(&self) -> u32 {
        1 << self.n_bits
    }

    pub fn root(&self) -> u32 {
        1 << (self.n_bits - 1)
    }

    pub fn contains(&self, pos: u32) -> bool {
        pos >= 1 && pos < self.levels()
    }

    /// Depth of a threshold position; the root is at depth 0.
    pub fn depth(&self, pos: u32) -> u32 {
        debug_assert!(self.contains(pos));
        self.n_bits - 1 - pos.trailing_zeros()
    }

    /// Comparison stage (1-indexed) that resolves this threshold.
    pub fn stage(&self, pos: u32) -> u32 {
        self.depth(pos) + 1
    }

    /// `(lower, upper)` children, or `None` for last-stage thresholds.
    pub fn children(&self, pos: u32) -> Option<(u32, u32)> {
        let tz = pos.trailing_zeros();
        if tz == 0 {
            None
        } else {
            let step = 1 << (tz - 1);
            Some((pos - step, pos + step))
        }
    }

    /// Inclusive range of output codes below this node.
    pub fn code_span(&self, pos: u32) -> (u32, u32) {
        let half = 1 << pos.trailing_zeros();
        (pos - half, pos + half - 1)
    }

    /// Ancestor of `pos` at `depth` (which must not exceed the depth of `pos`).
    pub fn ancestor_at_depth(&self, pos: u32, depth: u32) -> u32 {
        debug_assert!(depth <= self.depth(pos));
        let shift = self.n_bits - 1 - depth;
        ((pos >> shift) | 1) << shift
    }

    /// Thresholds of one comparison stage, highest reference first.
    pub fn stage_positions(&self, stage: u32) -> Vec<u32> {
        assert!(stage >= 1 && stage <= self.n_bits, "stage out of range");
        let tz = self.n_bits - stage;
        let step = 1u32 << (tz + 1);
        let first = 1u32 << tz;
        let mut out: Vec<u32> = (0..(1u32 << (stage - 1)))
            .map(|i| first + i * step)
            .collect();
        out.reverse();
        out
    }

    pub fn stages(&self) -> Vec<Vec<u32>> {
        (1..=self.n_bits).map(|s| self.stage_positions(s)).collect()
    }

    pub fn in_order(&self) -> Vec<u32> {
        fn walk(tree: &ThresholdTree, pos: u32, out: &mut Vec<u32>) {
            match tree.children(pos) {
                Some((lo, hi)) => {
                    walk(tree, lo, out);
                    out.push(pos);
                    walk(tree, hi, out);
                }
                None => out.push(pos),
            }
        }
        let mut out = Vec::with_capacity(self.levels() as usize - 1);
        walk(self, self.root(), &mut out);
        out
    }

    pub fn threshold<T: Scalar>(&self, pos: u32) -> T {
        T::lit(pos as f64) / T::lit(self.levels() as f64)
    }

    /// Full-resolution conversion by walking the tree one stage at a time.
    pub fn descend<T: Scalar>(&self, v: T) -> Result<u32> {
        let scaled = scaled_input(v, self.n_bits)?;
        let mut pos = self.root();
        loop {
            let above = scaled >= T::lit(pos as f64);
            match self.children(pos) {
                Some((lo, hi)) => pos = if above { hi } else { lo },
                None => return Ok(if above { pos } else { pos - 1 }),
            }
        }
    }
}

/// Clamp to `[0, 1]` and scale by `2^N`. Scaling by a power of two is exact.
fn scaled_input<T: Scalar>(v: T, n_bits: u32) -> Result<T> {
    if v.is_nan() {
        return Err(Error::invalid("NaN ADC input"));
    }
    let clamped = v.max(T::zero()).min(T::one());
    Ok(clamped * T::lit((1u64 << n_bits) as f64))
}

/// Keep/prune flag per output code of an N-bit converter. At least two codes
/// are always kept.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelMask {
    n_bits: u32,
    bits: Vec<bool>,
}

impl LevelMask {
    pub fn new(n_bits: u32, bits: Vec<bool>) -> Result<Self> {
        check_bits(n_bits)?;
        let levels = 1usize << n_bits;
        if bits.len() != levels {
            return Err(Error::DimensionMismatch {
                expected: levels,
                got: bits.len(),
            });
        }
        let kept = bits.iter().filter(|&&b| b).count();
        if kept < 2 {
            return Err(Error::DegenerateMask { kept });
        }
        Ok(Self { n_bits, bits })
    }

    pub fn full(n_bits: u32) -> Result<Self> {
        check_bits(n_bits)?;
        Ok(Self {
            n_bits,
            bits: vec![true; 1 << n_bits],
        })
    }

    pub fn from_codes(n_bits: u32, codes: &[u32]) -> Result<Self> {
        check_bits(n_bits)?;
        let mut bits = vec![false; 1 << n_bits];
        for &c in codes {
            let slot = bits
                .get_mut(c as usize)
                .ok_or_else(|| Error::invalid(format!("code {c} out of range for {n_bits} bits")))?;
            *slot = true;
        }
        Self::new(n_bits, bits)
    }

    /// Parses a mask where bit `c` of the hexadecimal integer keeps code `c`.
    /// A `0x` prefix is optional.
    pub fn from_hex(n_bits: u32, hex: &str) -> Result<Self> {
        Self::new(n_bits, parse_hex_bits(n_bits, hex)?)
    }

    /// Fixed-width (`2^N / 4` digits) lowercase hex, no prefix.
    pub fn to_hex(&self) -> String {
        bits_to_hex(&self.bits)
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_kept(&self, code: u32) -> bool {
        self.bits.get(code as usize).copied().unwrap_or(false)
    }

    pub fn kept_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn kept_codes(&self) -> Vec<u32> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(c, &k)| k.then_some(c as u32))
            .collect()
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Every valid mask for a resolution, in increasing integer order.
    /// Only sensible for small `n_bits`.
    pub fn enumerate(n_bits: u32) -> Result<Vec<Self>> {
        check_bits(n_bits)?;
        if n_bits > 4 {
            return Err(Error::invalid("mask enumeration is limited to N <= 4"));
        }
        let levels = 1u32 << n_bits;
        Ok((0u64..(1u64 << levels))
            .filter(|m| m.count_ones() >= 2)
            .map(|m| Self {
                n_bits,
                bits: (0..levels).map(|c| m >> c & 1 == 1).collect(),
            })
            .collect())
    }
}

/// Raw bit vector from a hex string, without the kept-count check.
pub(crate) fn parse_hex_bits(n_bits: u32, hex: &str) -> Result<Vec<bool>> {
    check_bits(n_bits)?;
    let levels = 1usize << n_bits;
    let digits = hex
        .trim()
        .strip_prefix("0x")
        .or_else(|| hex.trim().strip_prefix("0X"))
        .unwrap_or(hex.trim());
    if digits.is_empty() {
        return Err(Error::invalid("empty mask"));
    }
    let mut bits = vec![false; levels];
    for (i, ch) in digits.chars().rev().enumerate() {
        let nibble = ch
            .to_digit(16)
            .ok_or_else(|| Error::invalid(format!("invalid hex digit `{ch}` in mask `{hex}`")))?;
        for b in 0..4 {
            if nibble >> b & 1 == 1 {
                let code = i * 4 + b;
                if code >= levels {
                    return Err(Error::invalid(format!(
                        "mask `{hex}` sets code {code}, beyond {levels} levels"
                    )));
                }
                bits[code] = true;
            }
        }
    }
    Ok(bits)
}

pub(crate) fn bits_to_hex(bits: &[bool]) -> String {
    let digits = bits.len().div_ceil(4);
    (0..digits)
        .rev()
        .map(|d| {
            let nibble = (0..4).fold(0u32, |acc, b| {
                let set = bits.get(d * 4 + b).copied().unwrap_or(false);
                acc | (u32::from(set) << b)
            });
            char::from_digit(nibble, 16).expect("nibble < 16")
        })
        .collect()
}

/// Binary-search ADC with a subset of output codes.
///
/// Between two consecutive kept codes exactly one comparator threshold
/// survives: the shallowest tree node separating them, i.e. the position in
/// `(lower, upper]` with the most trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrunedAdc {
    tree: ThresholdTree,
    mask: LevelMask,
    kept_codes: Vec<u32>,
    boundaries: Vec<u32>,
}

/// Shallowest threshold position in `(lower, upper]`.
fn separating_threshold(lower: u32, upper: u32) -> u32 {
    debug_assert!(lower < upper);
    let top = 31 - (lower ^ upper).leading_zeros();
    upper & !((1u32 << top) - 1)
}

pub fn build_threshold_tree(n_bits: u32) -> Result<ThresholdTree> {
    ThresholdTree::new(n_bits)
}

pub fn prune(tree: &ThresholdTree, mask: &LevelMask) -> Result<PrunedAdc> {
    if mask.n_bits() != tree.n_bits() {
        return Err(Error::invalid(format!(
            "mask is for {} bits but tree has {}",
            mask.n_bits(),
            tree.n_bits()
        )));
    }
    let kept_codes = mask.kept_codes();
    if kept_codes.len() < 2 {
        return Err(Error::DegenerateMask {
            kept: kept_codes.len(),
        });
    }
    let boundaries = kept_codes
        .windows(2)
        .map(|w| separating_threshold(w[0], w[1]))
        .collect();
    Ok(PrunedAdc {
        tree: *tree,
        mask: mask.clone(),
        kept_codes,
        boundaries,
    })
}

impl PrunedAdc {
    pub fn from_mask(mask: &LevelMask) -> Result<Self> {
        prune(&ThresholdTree::new(mask.n_bits())?, mask)
    }

    pub fn tree(&self) -> &ThresholdTree {
        &self.tree
    }

    pub fn n_bits(&self) -> u32 {
        self.tree.n_bits()
    }

    pub fn mask(&self) -> &LevelMask {
        &self.mask
    }

    pub fn kept_codes(&self) -> &[u32] {
        &self.kept_codes
    }

    /// Retained threshold positions, strictly increasing.
    pub fn boundaries(&self) -> &[u32] {
        &self.boundaries
    }

    pub fn retains(&self, pos: u32) -> bool {
        self.boundaries.binary_search(&pos).is_ok()
    }

    /// Midpoint of the input interval owned by a kept code.
    pub fn representation_value<T: Scalar>(&self, code: u32) -> Result<T> {
        let idx = self
            .kept_codes
            .binary_search(&code)
            .map_err(|_| Error::invalid(format!("code {code} is not kept")))?;
        Ok(self.repr_at(idx))
    }

    fn repr_at<T: Scalar>(&self, idx: usize) -> T {
        let levels = self.tree.levels();
        let lo = if idx == 0 { 0 } else { self.boundaries[idx - 1] };
        let hi = self.boundaries.get(idx).copied().unwrap_or(levels);
        T::lit((lo + hi) as f64) / T::lit(2.0 * levels as f64)
    }

    pub fn repr_values<T: Scalar>(&self) -> Vec<T> {
        (0..self.kept_codes.len()).map(|i| self.repr_at(i)).collect()
    }

    pub fn quantize<T: Scalar>(&self, v: T) -> Result<Quantized<T>> {
        let scaled = scaled_input(v, self.tree.n_bits())?;
        let idx = self
            .boundaries
            .partition_point(|&b| T::lit(b as f64) <= scaled);
        Ok(Quantized {
            code: self.kept_codes[idx],
            repr: self.repr_at(idx),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantized<T> {
    pub code: u32,
    pub repr: T,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AdcKind {
    FullBinary(ThresholdTree),
    PrunedBinary(PrunedAdc),
    Flash(ThresholdTree),
}

impl AdcKind {
    pub fn full_binary(n_bits: u32) -> Result<Self> {
        Ok(Self::FullBinary(ThresholdTree::new(n_bits)?))
    }

    pub fn flash(n_bits: u32) -> Result<Self> {
        Ok(Self::Flash(ThresholdTree::new(n_bits)?))
    }

    pub fn pruned(mask: &LevelMask) -> Result<Self> {
        Ok(Self::PrunedBinary(PrunedAdc::from_mask(mask)?))
    }

    pub fn n_bits(&self) -> u32 {
        match self {
            Self::FullBinary(t) | Self::Flash(t) => t.n_bits(),
            Self::PrunedBinary(p) => p.n_bits(),
        }
    }

    pub fn kept_codes(&self) -> Vec<u32> {
        match self {
            Self::FullBinary(t) | Self::Flash(t) => (0..t.levels()).collect(),
            Self::PrunedBinary(p) => p.kept_codes().to_vec(),
        }
    }

    pub fn quantize<T: Scalar>(&self, v: T) -> Result<Quantized<T>> {
        match self {
            Self::FullBinary(tree) => {
                let code = tree.descend(v)?;
                Ok(Quantized {
                    code,
                    repr: code_center(code, tree.levels()),
                })
            }
            Self::Flash(tree) => {
                // thermometer code: every comparator whose reference is reached fires
                let scaled = scaled_input(v, tree.n_bits())?;
                let code = (1..tree.levels())
                    .filter(|&t| scaled >= T::lit(t as f64))
                    .count() as u32;
                Ok(Quantized {
                    code,
                    repr: code_center(code, tree.levels()),
                })
            }
            Self::PrunedBinary(p) => p.quantize(v),
        }
    }
}

fn code_center<T: Scalar>(code: u32, levels: u32) -> T {
    T::lit(2.0 * code as f64 + 1.0) / T::lit(2.0 * levels as f64)
}

pub fn quantize<T: Scalar>(adc: &AdcKind, v: T) -> Result<(u32, T)> {
    adc.quantize(v).map(|q| (q.code, q.repr))
}

/// Reference conversion that walks the complete tree and skips every
/// comparator made redundant by the mask: a comparator is kept only while
/// kept codes remain on both of its sides, otherwise the search is forwarded
/// to the side that still holds kept codes.
pub fn oracle_quantize<T: Scalar>(tree: &ThresholdTree, mask: &LevelMask, v: T) -> Result<u32> {
    if mask.n_bits() != tree.n_bits() {
        return Err(Error::invalid("mask and tree resolution differ"));
    }
    if mask.kept_count() < 2 {
        return Err(Error::DegenerateMask {
            kept: mask.kept_count(),
        });
    }
    let scaled = scaled_input(v, tree.n_bits())?;
    let any_kept = |lo: u32, hi: u32| (lo..=hi).any(|c| mask.is_kept(c));
    let mut pos = tree.root();
    loop {
        let (lo, hi) = tree.code_span(pos);
        let below = any_kept(lo, pos - 1);
        let above = any_kept(pos, hi);
        let go_up = match (below, above) {
            (true, true) => scaled >= T::lit(pos as f64),
            (false, true) => true,
            (true, false) => false,
            (false, false) => {
                return Err(Error::Contract(format!(
                    "reached threshold {pos} with no kept code below it"
                )))
            }
        };
        match tree.children(pos) {
            Some((l, h)) => pos = if go_up { h } else { l },
            None => return Ok(if go_up { pos } else { pos - 1 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_bit_stages_match_reference_ladder() {
        let tree = build_threshold_tree(3).unwrap();
        assert_eq!(tree.stages(), vec![vec![4], vec![6, 2], vec![7, 5, 3, 1]]);
        assert_eq!(tree.threshold::<f64>(6), 0.75);
        assert_eq!(tree.threshold::<f64>(1), 0.125);
    }

    #[test]
    fn two_and_four_bit_trees() {
        let t2 = build_threshold_tree(2).unwrap();
        assert_eq!(t2.stages(), vec![vec![2], vec![3, 1]]);
        let t4 = build_threshold_tree(4).unwrap();
        assert_eq!(t4.root(), 8);
        assert_eq!(t4.stage_positions(2), vec![12, 4]);
    }

    #[test]
    fn tree_invariants_hold_for_every_resolution() {
        for n in MIN_BITS..=MAX_BITS {
            let tree = ThresholdTree::new(n).unwrap();
            let expected: Vec<u32> = (1..tree.levels()).collect();
            assert_eq!(tree.in_order(), expected);
            assert_eq!(tree.root(), 1 << (n - 1));
            for (k, stage) in tree.stages().iter().enumerate() {
                assert_eq!(stage.len(), 1 << k);
                for &p in stage {
                    assert_eq!(p.trailing_zeros(), n - 1 - k as u32);
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range_resolution() {
        assert!(matches!(ThresholdTree::new(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(ThresholdTree::new(9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn prune_examples() {
        let t2 = ThresholdTree::new(2).unwrap();
        let p = prune(&t2, &LevelMask::from_codes(2, &[0, 3]).unwrap()).unwrap();
        assert_eq!(p.boundaries(), &[2]);
        let p = prune(&t2, &LevelMask::from_codes(2, &[2, 3]).unwrap()).unwrap();
        assert_eq!(p.boundaries(), &[3]);
        assert!(!p.retains(t2.root()));
        let t3 = ThresholdTree::new(3).unwrap();
        let p = prune(&t3, &LevelMask::full(3).unwrap()).unwrap();
        assert_eq!(p.boundaries(), &[1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn prune_errors() {
        let t3 = ThresholdTree::new(3).unwrap();
        let m2 = LevelMask::full(2).unwrap();
        assert!(matches!(prune(&t3, &m2), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            LevelMask::from_codes(3, &[5]),
            Err(Error::DegenerateMask { kept: 1 })
        ));
        assert!(matches!(
            LevelMask::new(2, vec![true; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantize_examples() {
        let full = AdcKind::full_binary(3).unwrap();
        assert_eq!(quantize(&full, 0.40f64).unwrap().0, 3);
        assert_eq!(quantize(&full, 1.0f64).unwrap().0, 7);
        assert_eq!(quantize(&full, 0.0f64).unwrap().0, 0);
        let pruned = AdcKind::pruned(&LevelMask::from_codes(2, &[0, 3]).unwrap()).unwrap();
        assert_eq!(quantize(&pruned, 0.30f64).unwrap().0, 0);
        assert_eq!(quantize(&pruned, 0.70f64).unwrap().0, 3);
    }

    #[test]
    fn quantize_clamps_and_rejects_nan() {
        let full = AdcKind::full_binary(3).unwrap();
        assert_eq!(quantize(&full, -0.3f64).unwrap().0, 0);
        assert_eq!(quantize(&full, 4.0f32).unwrap().0, 7);
        assert!(matches!(
            quantize(&full, f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
        let flash = AdcKind::flash(3).unwrap();
        assert!(quantize(&flash, f32::NAN).is_err());
    }

    #[test]
    fn representation_values() {
        let p = PrunedAdc::from_mask(&LevelMask::from_codes(2, &[0, 3]).unwrap()).unwrap();
        assert_eq!(p.representation_value::<f64>(0).unwrap(), 0.25);
        assert_eq!(p.representation_value::<f64>(3).unwrap(), 0.75);
        assert!(p.representation_value::<f64>(1).is_err());
        let p = PrunedAdc::from_mask(&LevelMask::full(3).unwrap()).unwrap();
        assert_eq!(p.representation_value::<f64>(3).unwrap(), 0.4375);
        let p = PrunedAdc::from_mask(&LevelMask::from_codes(2, &[2, 3]).unwrap()).unwrap();
        assert_eq!(p.representation_value::<f64>(2).unwrap(), 0.375);
        assert_eq!(p.representation_value::<f32>(3).unwrap(), 0.875);
    }

    #[test]
    fn oracle_examples() {
        let t3 = ThresholdTree::new(3).unwrap();
        assert_eq!(oracle_quantize(&t3, &LevelMask::full(3).unwrap(), 0.9f64).unwrap(), 7);
        let t2 = ThresholdTree::new(2).unwrap();
        let m = LevelMask::from_codes(2, &[0, 3]).unwrap();
        assert_eq!(oracle_quantize(&t2, &m, 0.49f64).unwrap(), 0);
    }

    #[test]
    fn oracle_matches_quantize_exhaustively() {
        for n in [2u32, 3] {
            let tree = ThresholdTree::new(n).unwrap();
            let masks = LevelMask::enumerate(n).unwrap();
            assert_eq!(masks.len(), if n == 2 { 11 } else { 247 });
            for mask in &masks {
                let adc = prune(&tree, mask).unwrap();
                for i in 0..256 {
                    let v = i as f64 / 255.0;
                    assert_eq!(
                        adc.quantize(v).unwrap().code,
                        oracle_quantize(&tree, mask, v).unwrap(),
                        "n={n} mask={} v={v}",
                        mask.to_hex()
                    );
                }
            }
        }
    }

    #[test]
    fn boundaries_are_shallowest_separators() {
        for n in [2u32, 3, 4] {
            let tree = ThresholdTree::new(n).unwrap();
            let masks: Vec<LevelMask> = if n == 4 {
                LevelMask::enumerate(n).unwrap().into_iter().step_by(97).collect()
            } else {
                LevelMask::enumerate(n).unwrap()
            };
            for mask in masks {
                let adc = prune(&tree, &mask).unwrap();
                for (w, &b) in adc.kept_codes().windows(2).zip(adc.boundaries()) {
                    assert!(w[0] < b && b <= w[1]);
                    for other in (w[0] + 1)..=w[1] {
                        if other != b {
                            assert!(b.trailing_zeros() > other.trailing_zeros());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn flash_agrees_with_binary_on_dense_grid() {
        for n in MIN_BITS..=MAX_BITS {
            let flash = AdcKind::flash(n).unwrap();
            let binary = AdcKind::full_binary(n).unwrap();
            for i in 0..=10_000 {
                let v = i as f64 / 10_000.0;
                assert_eq!(
                    flash.quantize(v).unwrap().code,
                    binary.quantize(v).unwrap().code
                );
            }
        }
    }

    #[test]
    fn hex_encoding() {
        let m = LevelMask::from_hex(2, "0x9").unwrap();
        assert_eq!(m.kept_codes(), vec![0, 3]);
        assert_eq!(m.to_hex(), "9");
        let m = LevelMask::from_hex(3, "81").unwrap();
        assert_eq!(m.kept_codes(), vec![0, 7]);
        assert_eq!(m.to_hex(), "81");
        assert_eq!(LevelMask::full(4).unwrap().to_hex(), "ffff");
        assert!(LevelMask::from_hex(2, "0x19").is_err());
        assert!(LevelMask::from_hex(2, "0xg").is_err());
        assert!(LevelMask::from_hex(2, "0x8").is_err());
        let wide = LevelMask::full(8).unwrap().to_hex();
        assert_eq!(wide.len(), 64);
    }

    fn mask_strategy(n: u32) -> impl Strategy<Value = LevelMask> {
        prop::collection::vec(any::<bool>(), 1usize << n).prop_filter_map("needs 2 kept", move |b| {
            LevelMask::new(n, b).ok()
        })
    }

    proptest! {
        #[test]
        fn pruned_quantizer_is_monotone_and_closed(
            mask in (2u32..=6).prop_flat_map(mask_strategy),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let adc = AdcKind::pruned(&mask).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ql = adc.quantize(lo).unwrap();
            let qh = adc.quantize(hi).unwrap();
            prop_assert!(ql.code <= qh.code);
            prop_assert!(ql.repr <= qh.repr);
            prop_assert!(mask.is_kept(ql.code) && mask.is_kept(qh.code));
        }

        #[test]
        fn hex_round_trip(mask in (2u32..=8).prop_flat_map(mask_strategy)) {
            let back = LevelMask::from_hex(mask.n_bits(), &format!("0x{}", mask.to_hex())).unwrap();
            prop_assert_eq!(back, mask);
        }

        #[test]
        fn full_mask_equals_full_binary(n in 2u32..=8, v in -0.5f64..1.5) {
            let full = AdcKind::full_binary(n).unwrap();
            let pruned = AdcKind::pruned(&LevelMask::full(n).unwrap()).unwrap();
            prop_assert_eq!(full.quantize(v).unwrap(), pruned.quantize(v).unwrap());
            let levels = (1u32 << n) as f64;
            let expected = (v.clamp(0.0, 1.0) * levels).floor().min(levels - 1.0) as u32;
            prop_assert_eq!(full.quantize(v).unwrap().code, expected);
        }

        #[test]
        fn repr_values_strictly_increase(mask in (2u32..=6).prop_flat_map(mask_strategy)) {
            let adc = PrunedAdc::from_mask(&mask).unwrap();
            let r = adc.repr_values::<f64>();
            prop_assert!(r.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
