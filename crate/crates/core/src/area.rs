//! Transistor-count area model for flash, full binary-search and pruned
//! binary-search converters.
//!
//! The binary-search structure generalizes the 3-bit reference design:
//!
//! * stage 1: one comparator on `Vref/2`;
//! * stage `k >= 2`: one resolving comparator whose reference is picked by a
//!   pass-transistor tree of `2^k - 2` switches (one leaf per stage
//!   threshold plus one per internal mux node);
//! * for `N >= 3`, stage 2 also carries an enable pair that powers the deeper
//!   stages of each half. The upper one is a single-output comparator followed
//!   by a double inversion, and an amplifier transistor forwards the stage-1
//!   decision to it.
//!
//! For `N = 3` this gives 5 comparators, 2 inverters and 9 control/amp
//! transistors.

use std::collections::BTreeSet;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::adc::{AdcKind, PrunedAdc, ThresholdTree};
use crate::error::{Error, Result};

/// Per-component costs. Transistor counts are the optimization objective;
/// resistors are tracked for reporting only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    pub comp_tr: u64,
    pub comp_noinv_tr: u64,
    pub comp_res: u64,
    pub comp_noinv_res: u64,
    pub inv_tr: u64,
    pub inv_res: u64,
    pub sel_tr: u64,
    pub amp_tr: u64,
    /// Saved per pruned last-stage control entry.
    pub and_gate_tr: u64,
    /// Flash encoder costs `coeff * N * 2^(N-1)` transistors.
    pub flash_encoder_coeff: u64,
    /// Resistors per reference-ladder rung.
    pub ladder_res: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            comp_tr: 7,
            comp_noinv_tr: 6,
            comp_res: 2,
            comp_noinv_res: 1,
            inv_tr: 1,
            inv_res: 1,
            sel_tr: 1,
            amp_tr: 1,
            and_gate_tr: 3,
            flash_encoder_coeff: 4,
            ladder_res: 1,
        }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<()> {
        if self.comp_noinv_tr > self.comp_tr {
            return Err(Error::Config {
                path: "cost.comp_noinv_tr".into(),
                message: format!(
                    "single-output comparator ({}) cannot cost more than a full one ({})",
                    self.comp_noinv_tr, self.comp_tr
                ),
            });
        }
        Ok(())
    }

    pub fn flash_encoder_tr(&self, n_bits: u32) -> u64 {
        self.flash_encoder_coeff * u64::from(n_bits) * (1u64 << (n_bits - 1))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaBreakdown {
    pub comparator_tr: u64,
    pub inverter_tr: u64,
    pub selection_tr: u64,
    pub amplifier_tr: u64,
    pub encoder_tr: u64,
}

impl AreaBreakdown {
    pub fn total(&self) -> u64 {
        self.comparator_tr + self.inverter_tr + self.selection_tr + self.amplifier_tr + self.encoder_tr
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaReport {
    pub transistors: u64,
    pub resistors: u64,
    pub comparators: u64,
    pub inverters: u64,
    pub breakdown: AreaBreakdown,
}

impl Add for AreaReport {
    type Output = AreaReport;

    fn add(self, o: AreaReport) -> AreaReport {
        let b = self.breakdown;
        let ob = o.breakdown;
        AreaReport {
            transistors: self.transistors + o.transistors,
            resistors: self.resistors + o.resistors,
            comparators: self.comparators + o.comparators,
            inverters: self.inverters + o.inverters,
            breakdown: AreaBreakdown {
                comparator_tr: b.comparator_tr + ob.comparator_tr,
                inverter_tr: b.inverter_tr + ob.inverter_tr,
                selection_tr: b.selection_tr + ob.selection_tr,
                amplifier_tr: b.amplifier_tr + ob.amplifier_tr,
                encoder_tr: b.encoder_tr + ob.encoder_tr,
            },
        }
    }
}

impl Sum for AreaReport {
    fn sum<I: Iterator<Item = AreaReport>>(iter: I) -> Self {
        iter.fold(AreaReport::default(), Add::add)
    }
}

/// Cost-independent component inventory of one binary-search converter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BinaryStructure {
    pub full_comparators: u64,
    pub single_output_comparators: u64,
    pub inverters: u64,
    pub amplifiers: u64,
    /// Reference-selection switches of stages `2..N-1`.
    pub inner_switches: u64,
    /// Reference-selection switches of the last stage.
    pub last_stage_switches: u64,
    /// Last-stage thresholds removed by pruning.
    pub last_stage_pruned: u64,
    pub ladder_rungs: u64,
}

impl BinaryStructure {
    /// Closed-form inventory of the unpruned N-bit converter.
    pub fn full(n_bits: u32) -> Self {
        let n = u64::from(n_bits);
        let has_enable = u64::from(n_bits >= 3);
        let inner_switches = (2..n_bits).map(|k| (1u64 << k) - 2).sum();
        Self {
            full_comparators: n + has_enable,
            single_output_comparators: has_enable,
            inverters: 2 * has_enable,
            amplifiers: has_enable,
            inner_switches,
            last_stage_switches: (1u64 << n_bits) - 2,
            last_stage_pruned: 0,
            ladder_rungs: 1u64 << n_bits,
        }
    }

    /// Inventory of the structure that survives pruning.
    pub fn pruned(adc: &PrunedAdc) -> Self {
        let tree = adc.tree();
        let n = tree.n_bits();
        let root = tree.root();
        let retained = adc.boundaries();

        let mut stage_alive = vec![false; n as usize + 1];
        let mut leaves = vec![0u64; n as usize + 1];
        let mut mux_nodes: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n as usize + 1];
        for &b in retained {
            let stage = tree.stage(b) as usize;
            stage_alive[stage] = true;
            leaves[stage] += 1;
            for depth in 1..tree.depth(b) {
                mux_nodes[stage].insert(tree.ancestor_at_depth(b, depth));
            }
        }

        let root_alive = adc.retains(root);
        let mut s = Self {
            full_comparators: stage_alive.iter().filter(|&&a| a).count() as u64,
            ladder_rungs: retained.len() as u64 + 1,
            ..Self::default()
        };

        if n >= 3 {
            let quarter = 1u32 << (n - 2);
            let deeper_in = |lo: u32, hi: u32| {
                retained
                    .iter()
                    .any(|&b| b > lo && b < hi && tree.depth(b) >= 2)
            };
            if adc.retains(quarter) && deeper_in(0, root) {
                s.full_comparators += 1;
            }
            if adc.retains(3 * quarter) && deeper_in(root, tree.levels()) {
                s.single_output_comparators += 1;
                s.inverters += 2;
                if root_alive {
                    s.amplifiers += 1;
                }
            }
        }

        for stage in 2..=n as usize {
            let switches = leaves[stage] + mux_nodes[stage].len() as u64;
            if stage == n as usize {
                s.last_stage_switches = switches;
                s.last_stage_pruned = (1u64 << (n - 1)) - leaves[stage];
            } else {
                s.inner_switches += switches;
            }
        }
        s
    }

    pub fn cost(&self, cost: &CostTable) -> AreaReport {
        let last_stage = (cost.sel_tr * self.last_stage_switches)
            .saturating_sub(cost.and_gate_tr * self.last_stage_pruned);
        let breakdown = AreaBreakdown {
            comparator_tr: cost.comp_tr * self.full_comparators
                + cost.comp_noinv_tr * self.single_output_comparators,
            inverter_tr: cost.inv_tr * self.inverters,
            selection_tr: cost.sel_tr * self.inner_switches + last_stage,
            amplifier_tr: cost.amp_tr * self.amplifiers,
            encoder_tr: 0,
        };
        AreaReport {
            transistors: breakdown.total(),
            resistors: cost.comp_res * self.full_comparators
                + cost.comp_noinv_res * self.single_output_comparators
                + cost.inv_res * self.inverters
                + cost.ladder_res * self.ladder_rungs,
            comparators: self.full_comparators + self.single_output_comparators,
            inverters: self.inverters,
            breakdown,
        }
    }
}

pub fn binary_full_area(n_bits: u32, cost: &CostTable) -> Result<AreaReport> {
    ThresholdTree::new(n_bits)?;
    Ok(BinaryStructure::full(n_bits).cost(cost))
}

pub fn flash_area(n_bits: u32, cost: &CostTable) -> Result<AreaReport> {
    ThresholdTree::new(n_bits)?;
    let comparators = (1u64 << n_bits) - 1;
    let breakdown = AreaBreakdown {
        comparator_tr: comparators * cost.comp_tr,
        encoder_tr: cost.flash_encoder_tr(n_bits),
        ..AreaBreakdown::default()
    };
    Ok(AreaReport {
        transistors: breakdown.total(),
        resistors: comparators * cost.comp_res + (1u64 << n_bits) * cost.ladder_res,
        comparators,
        inverters: 0,
        breakdown,
    })
}

pub fn pruned_area(adc: &PrunedAdc, cost: &CostTable) -> AreaReport {
    BinaryStructure::pruned(adc).cost(cost)
}

pub fn adc_area(adc: &AdcKind, cost: &CostTable) -> AreaReport {
    match adc {
        AdcKind::FullBinary(t) => BinaryStructure::full(t.n_bits()).cost(cost),
        AdcKind::Flash(t) => flash_area(t.n_bits(), cost).expect("tree resolution already validated"),
        AdcKind::PrunedBinary(p) => pruned_area(p, cost),
    }
}

/// Element-wise sum over the converters of a whole classifier front end.
pub fn system_area(adcs: &[AdcKind], cost: &CostTable) -> Result<AreaReport> {
    if adcs.is_empty() {
        return Err(Error::Empty("ADC list"));
    }
    Ok(adcs.iter().map(|a| adc_area(a, cost)).sum())
}

pub fn pruned_system_area(adcs: &[PrunedAdc], cost: &CostTable) -> Result<AreaReport> {
    if adcs.is_empty() {
        return Err(Error::Empty("ADC list"));
    }
    Ok(adcs.iter().map(|a| pruned_area(a, cost)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adc::LevelMask;

    fn pruned(n: u32, codes: &[u32]) -> PrunedAdc {
        PrunedAdc::from_mask(&LevelMask::from_codes(n, codes).unwrap()).unwrap()
    }

    #[test]
    fn three_bit_reference_counts() {
        let r = binary_full_area(3, &CostTable::default()).unwrap();
        assert_eq!(r.comparators, 5);
        assert_eq!(r.inverters, 2);
        assert_eq!(r.breakdown.selection_tr + r.breakdown.amplifier_tr, 9);
        assert_eq!(r.transistors, 45);
        assert_eq!(BinaryStructure::full(3).last_stage_switches, 6);
    }

    #[test]
    fn comparator_only_costs() {
        let cost = CostTable {
            comp_tr: 1,
            comp_noinv_tr: 1,
            comp_res: 0,
            comp_noinv_res: 0,
            inv_tr: 0,
            inv_res: 0,
            sel_tr: 0,
            amp_tr: 0,
            and_gate_tr: 0,
            flash_encoder_coeff: 0,
            ladder_res: 0,
        };
        assert_eq!(binary_full_area(3, &cost).unwrap().transistors, 5);
    }

    #[test]
    fn flash_counts() {
        let cost = CostTable::default();
        let r = flash_area(3, &cost).unwrap();
        assert_eq!(r.comparators, 7);
        assert_eq!(r.transistors, 97);
        let zero_enc = CostTable {
            flash_encoder_coeff: 0,
            ..CostTable::default()
        };
        assert_eq!(flash_area(3, &zero_enc).unwrap().transistors, 49);
        assert_eq!(flash_area(4, &cost).unwrap().comparators, 15);
        assert!(flash_area(9, &cost).is_err());
    }

    #[test]
    fn pruned_examples() {
        let cost = CostTable::default();
        assert_eq!(
            pruned_area(&pruned(3, &[0, 1, 2, 3, 4, 5, 6, 7]), &cost),
            binary_full_area(3, &cost).unwrap()
        );
        assert_eq!(pruned_area(&pruned(2, &[2, 3]), &cost).comparators, 1);
        assert_eq!(pruned_area(&pruned(3, &[0, 1, 2, 3, 4, 6, 7]), &cost).transistors, 41);
    }

    #[test]
    fn full_mask_matches_closed_form_for_all_resolutions() {
        let cost = CostTable::default();
        for n in 2..=8 {
            let p = PrunedAdc::from_mask(&LevelMask::full(n).unwrap()).unwrap();
            assert_eq!(BinaryStructure::pruned(&p), BinaryStructure::full(n), "n={n}");
            assert_eq!(pruned_area(&p, &cost), binary_full_area(n, &cost).unwrap());
        }
    }

    #[test]
    fn binary_beats_flash() {
        let cost = CostTable::default();
        for n in 2..=4 {
            assert!(
                binary_full_area(n, &cost).unwrap().transistors
                    < flash_area(n, &cost).unwrap().transistors
            );
        }
    }

    #[test]
    fn system_area_is_additive() {
        let cost = CostTable::default();
        let adcs = vec![AdcKind::full_binary(3).unwrap(); 7];
        assert_eq!(system_area(&adcs, &cost).unwrap().transistors, 315);
        let one = [AdcKind::flash(3).unwrap()];
        assert_eq!(system_area(&one, &cost).unwrap(), flash_area(3, &cost).unwrap());
        let mixed = [
            AdcKind::flash(2).unwrap(),
            AdcKind::full_binary(4).unwrap(),
            AdcKind::pruned(&LevelMask::from_codes(3, &[1, 6]).unwrap()).unwrap(),
        ];
        let sum = mixed.iter().map(|a| adc_area(a, &cost).transistors).sum::<u64>();
        assert_eq!(system_area(&mixed, &cost).unwrap().transistors, sum);
        assert!(matches!(system_area(&[], &cost), Err(Error::Empty(_))));
    }

    #[test]
    fn breakdown_sums_to_total() {
        let cost = CostTable::default();
        for mask in LevelMask::enumerate(3).unwrap() {
            let r = pruned_area(&PrunedAdc::from_mask(&mask).unwrap(), &cost);
            assert_eq!(r.transistors, r.breakdown.total());
        }
    }

    #[test]
    fn rejects_inconsistent_costs() {
        let bad = CostTable {
            comp_noinv_tr: 9,
            ..CostTable::default()
        };
        assert!(bad.validate().is_err());
        assert!(CostTable::default().validate().is_ok());
    }
}
