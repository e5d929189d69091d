//! Post-processing of an exploration directory: operating point, gain
//! ratios and plot-ready accuracy versus normalized area data.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::{read_pareto_csv, select_operating_point, GainRatios, ParetoPoint, Summary, PARETO_FILE};

pub const PLOTDATA_FILE: &str = "plotdata.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub accuracy: f64,
    /// Transistor count over the flash system's.
    pub normalized_area: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    Found(ParetoPoint),
    /// Nothing within the drop; the highest-accuracy point is attached.
    NotFound { closest_accuracy: f64, closest_transistors: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoReport {
    pub baseline_accuracy: f64,
    pub flash_transistors: u64,
    pub binary_transistors: u64,
    pub max_drop: f64,
    pub selection: Selection,
    pub gains: GainRatios,
    pub plot: Vec<PlotRow>,
}

impl ParetoReport {
    pub fn build(summary: &Summary, points: &[ParetoPoint], max_drop: f64) -> Result<Self> {
        let flash = summary.flash_system.transistors;
        let binary = summary.binary_system.transistors;
        if flash == 0 || binary == 0 {
            return Err(Error::invalid("summary has zero reference areas"));
        }
        let base = summary.baseline.accuracy;
        let selection = match select_operating_point(points, base, max_drop) {
            Ok(p) => Selection::Found(p.clone()),
            Err(Error::NoPointWithinBound {
                closest_accuracy,
                closest_transistors,
            }) => Selection::NotFound {
                closest_accuracy,
                closest_transistors,
            },
            Err(e) => return Err(e),
        };
        let pruned = match &selection {
            Selection::Found(p) => Some(p.transistor_count),
            Selection::NotFound { .. } => None,
        };
        let norm = |t: u64| t as f64 / flash as f64;
        let mut plot = Vec::with_capacity(points.len() + 2);
        if summary.flash_baseline {
            plot.push(PlotRow {
                accuracy: base,
                normalized_area: 1.0,
                label: "flash".into(),
            });
        }
        if summary.binary_baseline {
            plot.push(PlotRow {
                accuracy: base,
                normalized_area: norm(binary),
                label: "binary".into(),
            });
        }
        plot.extend(points.iter().map(|p| PlotRow {
            accuracy: p.accuracy,
            normalized_area: norm(p.transistor_count),
            label: format!("point_{}", p.point_id),
        }));
        Ok(Self {
            baseline_accuracy: base,
            flash_transistors: flash,
            binary_transistors: binary,
            max_drop,
            selection,
            gains: GainRatios::new(flash, binary, pruned),
            plot,
        })
    }

    /// Loads `summary.json` and `pareto.csv` from an exploration directory.
    pub fn from_dir(dir: &Path, max_drop: f64) -> Result<Self> {
        let summary = Summary::load(dir)?;
        if summary.status != "ok" {
            return Err(Error::invalid(format!(
                "exploration in {} did not finish: {}",
                dir.display(),
                summary.error.as_deref().unwrap_or("unknown error")
            )));
        }
        let points = read_pareto_csv(&dir.join(PARETO_FILE))?;
        Self::build(&summary, &points, max_drop)
    }

    pub fn found(&self) -> bool {
        matches!(self.selection, Selection::Found(_))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "baseline accuracy: {:.6}", self.baseline_accuracy);
        let _ = writeln!(s, "flash system transistors: {}", self.flash_transistors);
        let _ = writeln!(s, "binary system transistors: {}", self.binary_transistors);
        let _ = writeln!(s, "gain flash->binary: {:.2}x", self.gains.flash_to_binary);
        match &self.selection {
            Selection::Found(p) => {
                let _ = writeln!(
                    s,
                    "operating point (drop {:.4}): point {} accuracy {:.6} transistors {} dpos {}",
                    self.max_drop, p.point_id, p.accuracy, p.transistor_count, p.dpos
                );
                if let (Some(bp), Some(fp)) = (self.gains.binary_to_pruned, self.gains.flash_to_pruned) {
                    let _ = writeln!(s, "gain binary->pruned: {bp:.2}x");
                    let _ = writeln!(s, "gain flash->pruned: {fp:.2}x");
                }
            }
            Selection::NotFound {
                closest_accuracy,
                closest_transistors,
            } => {
                let _ = writeln!(
                    s,
                    "no point within bound (drop {:.4}); closest: accuracy {:.6} transistors {}",
                    self.max_drop, closest_accuracy, closest_transistors
                );
            }
        }
        s
    }
}

pub fn write_plotdata(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["accuracy", "normalized_area", "label"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.normalized_area),
            r.label.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::AreaReport;
    use crate::explorer::{BaselineSummary, DataSummary, SUMMARY_FORMAT};

    fn summary(base: f64, binary: u64, flash: u64) -> Summary {
        let area = |t| AreaReport {
            transistors: t,
            ..AreaReport::default()
        };
        Summary {
            format: SUMMARY_FORMAT.into(),
            status: "ok".into(),
            error: None,
            n_bits: 3,
            data: DataSummary {
                rows: 0,
                features: vec![],
                classes: vec![],
                train_rows: 0,
                test_rows: 0,
                dropped_rows: 0,
            },
            baseline: BaselineSummary {
                accuracy: base,
                eval_accuracy: base,
                float_accuracy: base,
                train_accuracy: base,
                dpos: 0,
                model: String::new(),
            },
            flash_baseline: true,
            binary_baseline: true,
            flash_system: area(flash),
            binary_system: area(binary),
            max_accuracy_drop: 0.01,
            operating_point: None,
            pruned_system: None,
            gains: GainRatios::default(),
            search: None,
        }
    }

    fn point(id: u64, accuracy: f64, transistors: u64) -> ParetoPoint {
        ParetoPoint {
            point_id: id,
            generation: 0,
            accuracy,
            transistor_count: transistors,
            dpos: 0,
            masks: vec![],
            model: None,
        }
    }

    #[test]
    fn flash_to_pruned_ratio() {
        let r = ParetoReport::build(&summary(0.80, 200, 400), &[point(0, 0.80, 100)], 0.05).unwrap();
        assert_eq!(r.gains.flash_to_pruned, Some(4.0));
        assert!(r.render().contains("gain flash->pruned: 4.00x"));
        let labels: Vec<&str> = r.plot.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["flash", "binary", "point_0"]);
        assert_eq!(r.plot[2].normalized_area, 0.25);
    }

    #[test]
    fn full_binary_only_gives_unit_gain() {
        let r = ParetoReport::build(&summary(0.80, 200, 400), &[point(0, 0.80, 200)], 0.0).unwrap();
        assert_eq!(r.gains.binary_to_pruned, Some(1.0));
    }

    #[test]
    fn unmet_bound_is_reported() {
        let r = ParetoReport::build(&summary(0.90, 200, 400), &[point(0, 0.80, 100)], 0.0).unwrap();
        assert!(!r.found());
        assert!(r.render().contains("no point within bound"));
        assert_eq!(r.gains.flash_to_pruned, None);
    }
}
