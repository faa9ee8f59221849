//! Batch evaluation, per-category reports and the trial frequency audit.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{decode, Genome, GenomeError, ParameterRanges};
use crate::trials::{CategoryLabels, Trial};
use crate::world::{score, TrialResult, TrialRunner, WorldConfig, WorldError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{results} results but {labels} label sets")]
    LengthMismatch { results: usize, labels: usize },
    #[error("result {index} is for trial {result_id} but label is for trial {label_id}")]
    IdMismatch { index: usize, result_id: u64, label_id: u64 },
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Trials per parallel work item.
const CHUNK: usize = 256;

/// One result per trial, in corpus order.
pub fn batch_evaluate(
    genome: &Genome,
    ranges: &ParameterRanges,
    corpus: &[Trial],
    world: &WorldConfig,
) -> Result<Vec<TrialResult>, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let params = decode(genome, ranges)?;
    // fail early on mismatches rather than inside the workers
    TrialRunner::new(&params, &genome.architecture, world)?;
    let chunks: Vec<Vec<TrialResult>> = corpus
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut runner = TrialRunner::new(&params, &genome.architecture, world).expect("checked above");
            chunk.iter().map(|t| runner.run(t, false)).collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Mean score of an agent that never leaves the start position, from the
/// closed-form landing points.
pub fn stationary_baseline(corpus: &[Trial], world: &WorldConfig) -> f64 {
    let c = world.center();
    let total: f64 = corpus
        .iter()
        .map(|t| {
            let off = |o: &crate::trials::ObjectSpec| ((o.x0 - c) + o.vx * (o.y0 / o.vy)).abs();
            score(off(&t.first), off(&t.second))
        })
        .sum();
    total / corpus.len() as f64
}

/// Aggregates for one group of trials. Percentages are of `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub count: usize,
    pub score_sum: f64,
    pub first_caught: usize,
    pub second_caught: usize,
    pub both_caught: usize,
    /// Mean score as a percentage of the maximum; may be negative.
    pub fitness_pct: f64,
    pub first_pct: f64,
    pub second_pct: f64,
    pub both_pct: f64,
}

impl ReportRow {
    fn from_results<'a>(name: impl Into<String>, results: impl Iterator<Item = &'a TrialResult>) -> Self {
        let (mut count, mut score_sum, mut first, mut second, mut both) = (0, 0.0, 0, 0, 0);
        for r in results {
            count += 1;
            score_sum += r.score;
            first += usize::from(r.caught_first());
            second += usize::from(r.caught_second());
            both += usize::from(r.caught_both());
        }
        let pct = |k: usize| if count == 0 { 0.0 } else { 100.0 * k as f64 / count as f64 };
        let fitness_pct = if count == 0 { 0.0 } else { score_sum / count as f64 / 2.0 };
        Self {
            name: name.into(),
            count,
            score_sum,
            first_caught: first,
            second_caught: second,
            both_caught: both,
            fitness_pct,
            first_pct: pct(first),
            second_pct: pct(second),
            both_pct: pct(both),
        }
    }
}

/// Cell of the exclusive base partition: start-distance order × what the
/// agent can do after the first catch × overlap/crossing.
pub fn base_cell(l: &CategoryLabels) -> String {
    let order = if l.delayed_decision { "far-first" } else { "near-first" };
    let after = if !l.object_permanence {
        "visible"
    } else if l.same_direction_solvable {
        "same-dir"
    } else {
        "reverse"
    };
    let ovc = if l.overlap_or_cross { "overlap" } else { "apart" };
    format!("{order}/{after}/{ovc}")
}

pub fn base_cells() -> Vec<String> {
    let mut out = Vec::with_capacity(12);
    for order in ["near-first", "far-first"] {
        for after in ["visible", "same-dir", "reverse"] {
            for ovc in ["apart", "overlap"] {
                out.push(format!("{order}/{after}/{ovc}"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    /// One row per label, in [`CategoryLabels::NAMES`] order.
    pub rows: Vec<ReportRow>,
    pub overall: ReportRow,
    /// The 12 cells of [`base_cell`], including empty ones.
    pub partition: Vec<ReportRow>,
    /// Population standard deviation of both-catch % over non-empty cells.
    pub partition_both_std: f64,
}

pub fn category_report(results: &[TrialResult], labels: &[(u64, CategoryLabels)]) -> Result<CategoryReport, AnalysisError> {
    if results.len() != labels.len() {
        return Err(AnalysisError::LengthMismatch { results: results.len(), labels: labels.len() });
    }
    for (index, (r, (id, _))) in results.iter().zip(labels).enumerate() {
        if r.trial_id != *id {
            return Err(AnalysisError::IdMismatch { index, result_id: r.trial_id, label_id: *id });
        }
    }
    let rows = CategoryLabels::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            ReportRow::from_results(
                *name,
                results.iter().zip(labels).filter(|(_, (_, l))| l.flags()[k]).map(|(r, _)| r),
            )
        })
        .collect();
    let cells: Vec<String> = labels.iter().map(|(_, l)| base_cell(l)).collect();
    let partition: Vec<ReportRow> = base_cells()
        .into_iter()
        .map(|cell| {
            let rows = results.iter().zip(&cells).filter(|(_, c)| **c == cell).map(|(r, _)| r);
            ReportRow::from_results(cell.clone(), rows)
        })
        .collect();
    let filled: Vec<f64> = partition.iter().filter(|r| r.count > 0).map(|r| r.both_pct).collect();
    let partition_both_std = if filled.is_empty() {
        0.0
    } else {
        let mean = filled.iter().sum::<f64>() / filled.len() as f64;
        (filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / filled.len() as f64).sqrt()
    };
    Ok(CategoryReport {
        rows,
        overall: ReportRow::from_results("overall", results.iter()),
        partition,
        partition_both_std,
    })
}

impl CategoryReport {
    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let header = |s: &mut String| {
            let _ = writeln!(s, "{:<32} {:>8} {:>9} {:>8} {:>8} {:>8}", "group", "trials", "fitness%", "first%", "second%", "both%");
        };
        let row = |s: &mut String, r: &ReportRow| {
            let _ = writeln!(
                s,
                "{:<32} {:>8} {:>9.2} {:>8.2} {:>8.2} {:>8.2}",
                r.name, r.count, r.fitness_pct, r.first_pct, r.second_pct, r.both_pct
            );
        };
        header(&mut s);
        row(&mut s, &self.overall);
        for r in &self.rows {
            row(&mut s, r);
        }
        let _ = writeln!(s, "\nbase partition (start order / after first catch / overlap)");
        header(&mut s);
        for r in &self.partition {
            row(&mut s, r);
        }
        let _ = writeln!(s, "both-catch std over non-empty cells: {:.2}", self.partition_both_std);
        s
    }

    /// One JSON object per row; `kind` is `overall`, `label` or `cell`, and a
    /// final `summary` line carries the cross-category std.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        let mut emit = |kind: &str, r: &ReportRow| {
            let mut v = serde_json::to_value(r).expect("row serializes");
            v["kind"] = kind.into();
            s.push_str(&v.to_string());
            s.push('\n');
        };
        emit("overall", &self.overall);
        self.rows.iter().for_each(|r| emit("label", r));
        self.partition.iter().for_each(|r| emit("cell", r));
        s.push_str(&serde_json::json!({ "kind": "summary", "partition_both_std": self.partition_both_std }).to_string());
        s.push('\n');
        s
    }
}

/// Target frequency band for one audited quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub name: &'static str,
    /// Label counted; `None` denominators are the whole corpus.
    pub label: &'static str,
    pub of: Option<&'static str>,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
}

const fn band(name: &'static str, label: &'static str, of: Option<&'static str>, target: f64, lo: f64, hi: f64) -> Band {
    Band { name, label, of, target, lo, hi }
}

/// Reference frequencies (percent) with acceptance bands.
pub const BANDS: [Band; 10] = [
    band("trivial_stationary", "trivial_stationary", None, 5.2, 3.2, 7.2),
    band("trivial_reactive", "trivial_reactive", None, 31.0, 26.0, 36.0),
    band("delayed_decision", "delayed_decision", None, 48.0, 43.0, 53.0),
    band("object_permanence", "object_permanence", None, 39.0, 33.0, 45.0),
    band("overlap_or_cross", "overlap_or_cross", None, 58.6, 52.6, 64.6),
    band("same_direction_solvable", "same_direction_solvable", None, 30.0, 25.0, 35.0),
    band("same_direction_of_permanence", "same_direction_solvable", Some("object_permanence"), 78.0, 70.0, 86.0),
    band("reverse_required", "reverse_required", None, 8.4, 5.4, 11.4),
    band("unseen_passing", "unseen_passing", None, 0.099, 0.02, 0.5),
    band("fig7_diagonal", "fig7_diagonal", None, 0.74, 0.2, 2.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub name: String,
    pub count: usize,
    pub denominator: usize,
    pub percent: f64,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    pub total: usize,
    pub rows: Vec<AuditRow>,
}

impl AuditTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<30} {:>8} {:>8} {:>9} {:>8} {:>17} {:>5}", "category", "count", "of", "percent", "target", "band", "");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<30} {:>8} {:>8} {:>9.3} {:>8.3} {:>17} {:>5}",
                r.name,
                r.count,
                r.denominator,
                r.percent,
                r.target,
                format!("[{}, {}]", r.lo, r.hi),
                if r.pass { "ok" } else { "FAIL" }
            );
        }
        s
    }

    pub fn to_jsonl(&self) -> String {
        self.rows.iter().map(|r| serde_json::to_string(r).expect("row serializes") + "\n").collect()
    }
}

/// Label frequencies compared against [`BANDS`].
pub fn frequency_audit(labels: &[CategoryLabels]) -> AuditTable {
    let count = |name: &str| labels.iter().filter(|l| l.get(name) == Some(true)).count();
    let rows = BANDS
        .iter()
        .map(|b| {
            let k = count(b.label);
            let denominator = b.of.map_or(labels.len(), count);
            let percent = if denominator == 0 { 0.0 } else { 100.0 * k as f64 / denominator as f64 };
            AuditRow {
                name: b.name.to_string(),
                count: k,
                denominator,
                percent,
                target: b.target,
                lo: b.lo,
                hi: b.hi,
                pass: b.lo <= percent && percent <= b.hi,
            }
        })
        .collect();
    AuditTable { total: labels.len(), rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Architecture;
    use crate::trials::{classify, generate_corpus, ObjectSpec, TrialConfig};

    fn result(id: u64, offsets: [f64; 2]) -> TrialResult {
        TrialResult {
            trial_id: id,
            score: score(offsets[0], offsets[1]),
            landing_offsets: offsets,
            caught: offsets.map(|o| o <= 28.0),
            steps: 1,
            aborted: false,
            trace: None,
        }
    }

    #[test]
    fn perfect_results_are_full_marks() {
        let labels: Vec<(u64, CategoryLabels)> =
            (0..4).map(|i| (i, CategoryLabels { delayed_decision: i % 2 == 0, ..Default::default() })).collect();
        let results: Vec<TrialResult> = (0..4).map(|i| result(i, [0.0, 0.0])).collect();
        let rep = category_report(&results, &labels).unwrap();
        assert_eq!(rep.overall.fitness_pct, 100.0);
        assert_eq!(rep.overall.both_pct, 100.0);
        assert_eq!(rep.rows[2].count, 2);
        assert_eq!(rep.rows[2].both_pct, 100.0);
        assert_eq!(rep.partition_both_std, 0.0);
    }

    #[test]
    fn missing_first_object_group() {
        let labels: Vec<(u64, CategoryLabels)> =
            (0..3).map(|i| (i, CategoryLabels { object_permanence: true, ..Default::default() })).collect();
        let results: Vec<TrialResult> = (0..3).map(|i| result(i, [40.0, 1.0])).collect();
        let rep = category_report(&results, &labels).unwrap();
        let op = &rep.rows[4];
        assert_eq!((op.first_pct, op.second_pct, op.both_pct), (0.0, 100.0, 0.0));
        assert!((op.fitness_pct - 79.5).abs() < 1e-12);
    }

    #[test]
    fn misaligned_inputs_are_errors() {
        let results = vec![result(1, [0.0, 0.0])];
        assert!(matches!(category_report(&results, &[(2, CategoryLabels::default())]), Err(AnalysisError::IdMismatch { .. })));
        assert!(matches!(category_report(&results, &[]), Err(AnalysisError::LengthMismatch { .. })));
    }

    #[test]
    fn partition_weights_overall_both() {
        let world = WorldConfig::default();
        let corpus = generate_corpus(4, 600, &world, &TrialConfig::default()).unwrap();
        let labels: Vec<(u64, CategoryLabels)> = corpus.iter().map(|t| (t.id, classify(t, &world))).collect();
        let results: Vec<TrialResult> =
            corpus.iter().map(|t| result(t.id, [(t.id % 50) as f64, (t.id % 37) as f64])).collect();
        let rep = category_report(&results, &labels).unwrap();
        assert_eq!(rep.partition.len(), 12);
        assert_eq!(rep.partition.iter().map(|r| r.count).sum::<usize>(), corpus.len());
        let weighted: f64 = rep.partition.iter().map(|r| r.both_pct * r.count as f64).sum::<f64>() / corpus.len() as f64;
        assert!((weighted - rep.overall.both_pct).abs() < 1e-9);
        for r in rep.rows.iter().chain(&rep.partition) {
            assert!(r.both_pct <= r.first_pct.min(r.second_pct) + 1e-12);
        }
        assert!(rep.to_table().contains("overall"));
        assert_eq!(rep.to_jsonl().lines().count(), 1 + 9 + 12 + 1);
    }

    #[test]
    fn stationary_baseline_examples() {
        let world = WorldConfig::default();
        let t = Trial {
            id: 0,
            first: ObjectSpec { x0: 200.0, y0: 120.0, vx: 0.0, vy: 4.0 },
            second: ObjectSpec { x0: 180.0, y0: 150.0, vx: 2.0, vy: 3.0 },
        };
        // offsets 0 and 80
        assert_eq!(stationary_baseline(&[t], &world), 120.0);
        let corpus = generate_corpus(9, 2000, &world, &TrialConfig::default()).unwrap();
        let stationary: Vec<Trial> =
            corpus.into_iter().filter(|t| classify(t, &world).trivial_stationary).collect();
        assert!(!stationary.is_empty());
        assert!(stationary_baseline(&stationary, &world) >= 144.0);
    }

    #[test]
    fn baseline_matches_zero_genome_simulation() {
        let world = WorldConfig::default();
        let corpus = generate_corpus(21, 300, &world, &TrialConfig::default()).unwrap();
        let g = Genome::zeros(Architecture::new(2).unwrap()).unwrap();
        let results = batch_evaluate(&g, &ParameterRanges::default(), &corpus, &world).unwrap();
        let sim = results.iter().map(|r| r.score).sum::<f64>() / results.len() as f64;
        assert!((sim - stationary_baseline(&corpus, &world)).abs() < 1.0);
    }

    #[test]
    fn batch_is_ordered_and_checked() {
        let world = WorldConfig::default();
        let corpus = generate_corpus(2, 700, &world, &TrialConfig::default()).unwrap();
        let g = Genome::zeros(Architecture::new(0).unwrap()).unwrap();
        let ranges = ParameterRanges::default();
        let a = batch_evaluate(&g, &ranges, &corpus, &world).unwrap();
        assert!(a.iter().zip(&corpus).all(|(r, t)| r.trial_id == t.id));
        assert!(a.iter().all(|r| r.score <= 200.0));
        assert!(a.iter().all(|r| r.caught_both() == (r.landing_offsets[0] <= 28.0 && r.landing_offsets[1] <= 28.0)));
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| batch_evaluate(&g, &ranges, &corpus, &world).unwrap());
        assert_eq!(a, serial);
        assert!(matches!(batch_evaluate(&g, &ranges, &[], &world), Err(AnalysisError::EmptyCorpus)));
    }

    #[test]
    fn audit_counts_and_bands() {
        let labels = vec![
            CategoryLabels { object_permanence: true, same_direction_solvable: true, ..Default::default() },
            CategoryLabels { object_permanence: true, reverse_required: true, ..Default::default() },
            CategoryLabels::default(),
            CategoryLabels::default(),
        ];
        let t = frequency_audit(&labels);
        assert_eq!(t.total, 4);
        let op = t.row("object_permanence").unwrap();
        assert_eq!((op.count, op.percent), (2, 50.0));
        let frac = t.row("same_direction_of_permanence").unwrap();
        assert_eq!((frac.denominator, frac.percent), (2, 50.0));
        assert!(!t.passed());
        assert_eq!(t.to_jsonl().lines().count(), 10);
    }
}
