//! Per-trial sway statistics and paired with/without-feedback comparisons.

use crate::condition::{Condition, Group, Subject};
use crate::sway::Region;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty sample series")]
    EmptySeries,
    #[error("series length mismatch: {dist} distances vs {regions} regions")]
    LengthMismatch { dist: usize, regions: usize },
    #[error("no-feedback trial is degenerate (R={range}, V={variance}); improvement undefined")]
    DegenerateBaselineTrial { range: f64, variance: f64 },
    #[error("report cells without data: {}", .cells.join(", "))]
    MissingCondition { cells: Vec<String> },
}

/// Fraction of trial samples spent in each region.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionOccupancy {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl RegionOccupancy {
    pub fn from_counts(counts: [usize; 6], total: usize) -> Self {
        let n = total as f64;
        let [a, b, c, d, e, f] = counts.map(|k| k as f64 / n);
        Self { a, b, c, d, e, f }
    }

    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::A => self.a,
            Region::B => self.b,
            Region::C => self.c,
            Region::D => self.d,
            Region::E => self.e,
            Region::F => self.f,
        }
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c + self.d + self.e + self.f
    }
}

/// Range and variance of the dist series of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// max(dist) − min(dist), degrees.
    pub range: f64,
    /// Population variance of dist, degrees².
    pub variance: f64,
    pub n: usize,
    pub region_occupancy: RegionOccupancy,
}

pub fn trial_metrics(dist_series: &[f64], regions: &[Region]) -> Result<TrialMetrics, MetricsError> {
    if dist_series.len() != regions.len() {
        return Err(MetricsError::LengthMismatch {
            dist: dist_series.len(),
            regions: regions.len(),
        });
    }
    if dist_series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let n = dist_series.len();
    let (min, max) = dist_series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let mean = dist_series.iter().sum::<f64>() / n as f64;
    let variance = dist_series.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;

    let mut counts = [0usize; 6];
    for r in regions {
        counts[r.index()] += 1;
    }
    Ok(TrialMetrics {
        range: max - min,
        variance,
        n,
        region_occupancy: RegionOccupancy::from_counts(counts, n),
    })
}

/// Percentage reductions of R and V with feedback relative to without.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedImprovement {
    pub p_r: f64,
    pub p_v: f64,
}

pub fn paired_improvement(
    no_abf: &TrialMetrics,
    abf: &TrialMetrics,
) -> Result<PairedImprovement, MetricsError> {
    if !(no_abf.range > 0.0 && no_abf.variance > 0.0) {
        return Err(MetricsError::DegenerateBaselineTrial {
            range: no_abf.range,
            variance: no_abf.variance,
        });
    }
    Ok(PairedImprovement {
        p_r: (no_abf.range - abf.range) / no_abf.range * 100.0,
        p_v: (no_abf.variance - abf.variance) / no_abf.variance * 100.0,
    })
}

/// Median with the even-count midpoint convention. `None` for empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub p_r: f64,
    pub p_v: f64,
    /// Number of subjects pooled into this cell.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: Condition,
    pub older: Option<ReportCell>,
    pub younger: Option<ReportCell>,
    pub overall: ReportCell,
}

/// Median P_R / P_V per condition, per group and pooled over all subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub rows: Vec<ReportRow>,
}

pub type PairMap = BTreeMap<(Subject, Condition), PairedImprovement>;

fn cell(items: &[PairedImprovement]) -> Option<ReportCell> {
    let pr: Vec<f64> = items.iter().map(|p| p.p_r).collect();
    let pv: Vec<f64> = items.iter().map(|p| p.p_v).collect();
    Some(ReportCell {
        p_r: median(&pr)?,
        p_v: median(&pv)?,
        n: items.len(),
    })
}

/// Builds the four-row report. A group column is reported when the group
/// has at least one subject; every reported cell must have data.
pub fn group_report(pairs: &PairMap) -> Result<GroupReport, MetricsError> {
    let groups_present: BTreeSet<Group> = pairs.keys().map(|(s, _)| s.group).collect();
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(4);

    for condition in Condition::ALL {
        let in_condition = |g: Option<Group>| -> Vec<PairedImprovement> {
            pairs
                .iter()
                .filter(|((s, c), _)| *c == condition && g.is_none_or(|g| s.group == g))
                .map(|(_, p)| *p)
                .collect()
        };
        let mut group_cell = |g: Group, label: &str| -> Option<ReportCell> {
            if !groups_present.contains(&g) {
                return None;
            }
            let c = cell(&in_condition(Some(g)));
            if c.is_none() {
                missing.push(format!("{label} {condition}"));
            }
            c
        };
        let older = group_cell(Group::Older, "older");
        let younger = group_cell(Group::Younger, "younger");
        match cell(&in_condition(None)) {
            Some(overall) => rows.push(ReportRow {
                condition,
                older,
                younger,
                overall,
            }),
            None => missing.push(format!("overall {condition}")),
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::MissingCondition { cells: missing });
    }
    Ok(GroupReport { rows })
}

impl GroupReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "eyes",
        "surface",
        "older_P_R",
        "older_P_V",
        "younger_P_R",
        "younger_P_V",
        "overall_P_R",
        "overall_P_V",
    ];

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt_cell = |c: Option<ReportCell>| match c {
            Some(c) => [format!("{:.2}", c.p_r), format!("{:.2}", c.p_v)],
            None => [String::new(), String::new()],
        };
        // Writing into a Vec cannot fail.
        w.write_record(Self::CSV_HEADER).expect("in-memory csv");
        for row in &self.rows {
            let [opr, opv] = fmt_cell(row.older);
            let [ypr, ypv] = fmt_cell(row.younger);
            let [apr, apv] = fmt_cell(Some(row.overall));
            let eyes = format!("{:?}", row.condition.eyes).to_lowercase();
            let surface = format!("{:?}", row.condition.surface).to_lowercase();
            w.write_record([eyes, surface, opr, opv, ypr, ypv, apr, apv])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Fixed-width text table with Older, Younger and Overall column pairs.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<7} | {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8}",
            "eyes", "surface", "old P_R", "old P_V", "yng P_R", "yng P_V", "all P_R", "all P_V"
        );
        let _ = writeln!(out, "{}", "-".repeat(83));
        let fmt_cell = |c: Option<ReportCell>| match c {
            Some(c) => format!("{:>8.2} {:>8.2}", c.p_r, c.p_v),
            None => format!("{:>8} {:>8}", "-", "-"),
        };
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:<7} | {} | {} | {}",
                format!("{:?}", row.condition.eyes).to_lowercase(),
                format!("{:?}", row.condition.surface).to_lowercase(),
                fmt_cell(row.older),
                fmt_cell(row.younger),
                fmt_cell(Some(row.overall)),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::{Eyes, Surface};

    fn metrics(range: f64, variance: f64) -> TrialMetrics {
        TrialMetrics {
            range,
            variance,
            n: 1,
            region_occupancy: RegionOccupancy::default(),
        }
    }

    #[test]
    fn constant_series_has_zero_spread() {
        let m = trial_metrics(&[2.0, 2.0, 2.0], &[Region::D; 3]).unwrap();
        assert_eq!((m.range, m.variance, m.n), (0.0, 0.0, 3));
        assert_eq!(m.region_occupancy.d, 1.0);
    }

    #[test]
    fn ramp_series_population_variance() {
        let m = trial_metrics(&[0.0, 1.0, 2.0, 3.0, 4.0], &[Region::A; 5]).unwrap();
        assert_eq!(m.range, 4.0);
        assert_eq!(m.variance, 2.0);
    }

    #[test]
    fn empty_and_mismatched_series_are_errors() {
        assert_eq!(trial_metrics(&[], &[]), Err(MetricsError::EmptySeries));
        assert!(matches!(
            trial_metrics(&[1.0], &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn occupancy_counts_each_region() {
        let m = trial_metrics(&[0.0; 4], &[Region::A, Region::A, Region::C, Region::F]).unwrap();
        assert_eq!(m.region_occupancy.a, 0.5);
        assert_eq!(m.region_occupancy.c, 0.25);
        assert_eq!(m.region_occupancy.f, 0.25);
        assert_eq!(m.region_occupancy.sum(), 1.0);
    }

    #[test]
    fn improvement_examples() {
        let p = paired_improvement(&metrics(10.0, 4.0), &metrics(8.0, 4.0)).unwrap();
        assert_eq!(p.p_r, 20.0);
        assert_eq!(p.p_v, 0.0);
        let p = paired_improvement(&metrics(10.0, 4.0), &metrics(0.0, 0.0)).unwrap();
        assert_eq!((p.p_r, p.p_v), (100.0, 100.0));
        let p = paired_improvement(&metrics(3.0, 2.0), &metrics(4.5, 3.0)).unwrap();
        assert_eq!((p.p_r, p.p_v), (-50.0, -50.0));
    }

    #[test]
    fn degenerate_no_feedback_trial_rejected() {
        assert!(matches!(
            paired_improvement(&metrics(0.0, 1.0), &metrics(1.0, 1.0)),
            Err(MetricsError::DegenerateBaselineTrial { .. })
        ));
        assert!(paired_improvement(&metrics(1.0, 0.0), &metrics(1.0, 1.0)).is_err());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[20.0]), Some(20.0));
        assert_eq!(median(&[30.0, 10.0]), Some(20.0));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&[]), None);
    }

    fn full_pairs() -> PairMap {
        let mut pairs = PairMap::new();
        for (id, group, base) in [("o1", Group::Older, 10.0), ("o2", Group::Older, 30.0), ("y1", Group::Younger, 50.0)] {
            for c in Condition::ALL {
                let p = PairedImprovement { p_r: base + c.index() as f64, p_v: 2.0 * base };
                pairs.insert((Subject::new(id, group), c), p);
            }
        }
        pairs
    }

    #[test]
    fn report_has_four_rows_with_group_and_overall_cells() {
        let report = group_report(&full_pairs()).unwrap();
        assert_eq!(report.rows.len(), 4);
        let row = &report.rows[1];
        assert_eq!(row.condition, Condition::new(Eyes::Closed, Surface::Floor));
        assert_eq!(row.older.unwrap().p_r, 21.0);
        assert_eq!(row.younger.unwrap().p_r, 51.0);
        assert_eq!(row.overall.p_r, 31.0);
        assert_eq!(row.overall.n, 3);

        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), GroupReport::CSV_HEADER.join(","));
        assert_eq!(lines.count(), 4);
        let table = report.to_table();
        assert!(table.contains("old P_R") && table.contains("all P_V"));
    }

    #[test]
    fn singleton_cell_median_is_the_value() {
        let mut pairs = PairMap::new();
        for c in Condition::ALL {
            pairs.insert(
                (Subject::new("s", Group::Younger), c),
                PairedImprovement { p_r: 20.0, p_v: 5.0 },
            );
        }
        let report = group_report(&pairs).unwrap();
        assert!(report.rows.iter().all(|r| r.younger.unwrap().p_r == 20.0));
        assert!(report.rows.iter().all(|r| r.older.is_none()));
    }

    #[test]
    fn missing_cells_are_listed() {
        let mut pairs = full_pairs();
        pairs.remove(&(Subject::new("o1", Group::Older), Condition::ALL[2]));
        pairs.remove(&(Subject::new("o2", Group::Older), Condition::ALL[2]));
        match group_report(&pairs) {
            Err(MetricsError::MissingCondition { cells }) => {
                assert_eq!(cells, vec!["older foam/open".to_string()]);
            }
            other => panic!("expected MissingCondition, got {other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn regions_for(n: usize) -> Vec<Region> {
            (0..n).map(|i| Region::ALL[i % 6]).collect()
        }

        proptest! {
            #[test]
            fn metrics_ignore_ordering(mut v in prop::collection::vec(0.0..30.0f64, 1..200), seed in any::<u64>()) {
                let m1 = trial_metrics(&v, &regions_for(v.len())).unwrap();
                // deterministic shuffle
                let n = v.len();
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    v.swap(i, (s >> 33) as usize % (i + 1));
                }
                let m2 = trial_metrics(&v, &regions_for(n)).unwrap();
                prop_assert_eq!(m1.range, m2.range);
                prop_assert!((m1.variance - m2.variance).abs() <= 1e-9 * (1.0 + m1.variance));
            }

            #[test]
            fn scaling_scales_range_and_variance(v in prop::collection::vec(0.0..30.0f64, 2..200), k in 0.1..10.0f64) {
                let regions = regions_for(v.len());
                let m = trial_metrics(&v, &regions).unwrap();
                let scaled: Vec<f64> = v.iter().map(|d| d * k).collect();
                let ms = trial_metrics(&scaled, &regions).unwrap();
                prop_assert!((ms.range - k * m.range).abs() <= 1e-9 * (1.0 + k * m.range));
                prop_assert!((ms.variance - k * k * m.variance).abs() <= 1e-9 * (1.0 + k * k * m.variance));
            }

            #[test]
            fn scaled_pair_keeps_improvement(r0 in 0.1..20.0f64, v0 in 0.1..20.0f64, r1 in 0.0..20.0f64, v1 in 0.0..20.0f64, k in 0.1..10.0f64) {
                let p = paired_improvement(&metrics(r0, v0), &metrics(r1, v1)).unwrap();
                let ps = paired_improvement(&metrics(k * r0, k * k * v0), &metrics(k * r1, k * k * v1)).unwrap();
                prop_assert!((p.p_r - ps.p_r).abs() < 1e-9);
                prop_assert!((p.p_v - ps.p_v).abs() < 1e-9);
            }

            #[test]
            fn occupancy_sums_to_one(n in 1usize..500) {
                let m = trial_metrics(&vec![1.0; n], &regions_for(n)).unwrap();
                prop_assert!((m.region_occupancy.sum() - 1.0).abs() <= 1e-9);
            }

            #[test]
            fn improvement_bounded_by_hundred(r0 in 0.1..20.0f64, v0 in 0.1..20.0f64, r1 in 0.0..20.0f64, v1 in 0.0..20.0f64) {
                let p = paired_improvement(&metrics(r0, v0), &metrics(r1, v1)).unwrap();
                prop_assert!(p.p_r <= 100.0 && p.p_v <= 100.0);
            }

            #[test]
            fn report_median_matches_sort_oracle(values in prop::collection::vec(-100.0..100.0f64, 1..15)) {
                let mut pairs = PairMap::new();
                for (i, v) in values.iter().enumerate() {
                    for c in Condition::ALL {
                        pairs.insert((Subject::new(format!("s{i}"), Group::Older), c), PairedImprovement { p_r: *v, p_v: -v });
                    }
                }
                let report = group_report(&pairs).unwrap();
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = sorted.len();
                let oracle = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
                for row in &report.rows {
                    prop_assert_eq!(row.older.unwrap().p_r, oracle);
                    prop_assert_eq!(row.overall.p_r, oracle);
                }
            }
        }
    }
}
