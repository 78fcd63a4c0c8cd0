//! Crosswalk table assembly, domain aggregates, occurrence counts and report output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, DomainScheme, Side};
use crate::regress::StepwiseResult;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("expected a {expected}-side domain scheme, got {found}")]
    WrongSide { expected: Side, found: Side },
    #[error("standard ref {0} has fewer steps than the table; its final R² is missing")]
    MissingFinalStep(usize),
    #[error("standard ref {standard}: step ref {step} is not in the specification scheme")]
    UnknownStep { standard: usize, step: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("table CSV line {line}: {message}")]
    TableCsv { line: usize, message: String },
    #[error("spec ref {spec_ref} exceeds the {n_specs} specifications")]
    SpecOutOfRange { spec_ref: usize, n_specs: usize },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_id: Option<String>,
    #[serde(flatten)]
    pub result: StepwiseResult,
}

/// One row per standard, ordered by ref.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrosswalkTable {
    pub rows: Vec<CrosswalkRow>,
}

impl CrosswalkTable {
    pub fn from_results(results: Vec<StepwiseResult>) -> Self {
        let mut rows: Vec<CrosswalkRow> = results
            .into_iter()
            .map(|result| CrosswalkRow {
                standard_id: None,
                result,
            })
            .collect();
        rows.sort_by_key(|r| r.result.target_ref);
        Self { rows }
    }

    /// Fills `standard_id` from a lookup of standard ref to id.
    pub fn with_ids(mut self, id_of: impl Fn(usize) -> Option<String>) -> Self {
        for row in &mut self.rows {
            row.standard_id = id_of(row.result.target_ref);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of steps in the widest row.
    pub fn step_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.result.steps.len())
            .max()
            .unwrap_or(0)
    }

    /// Reads the table CSV layout: `ref,spec1..specK,r2_1..r2_K[,increase]`.
    /// The increase column is recomputed from the R² values, not read.
    pub fn from_csv_str(text: &str) -> Result<Self, ReportError> {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let err = |line: usize, message: String| ReportError::TableCsv { line, message };
        let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
        let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        let ref_col = col("ref").ok_or_else(|| err(1, "missing `ref` column".into()))?;
        let k = (1..)
            .take_while(|i| col(&format!("spec{i}")).is_some())
            .count();
        if k == 0 {
            return Err(err(1, "no `spec1` column".into()));
        }
        let spec_cols: Vec<usize> = (1..=k).map(|i| col(&format!("spec{i}")).unwrap()).collect();
        let r2_cols: Vec<usize> = (1..=k)
            .map(|i| col(&format!("r2_{i}")).ok_or_else(|| err(1, format!("missing `r2_{i}`"))))
            .collect::<Result<_, _>>()?;

        let mut results = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let line = n + 2;
            let record = record.map_err(|e| err(line, e.to_string()))?;
            let cell = |c: usize| record.get(c).unwrap_or("").trim();
            let target_ref: usize = cell(ref_col)
                .parse()
                .map_err(|_| err(line, format!("bad ref `{}`", cell(ref_col))))?;
            let mut steps = Vec::new();
            let mut r2 = Vec::new();
            for (&sc, &rc) in spec_cols.iter().zip(&r2_cols) {
                match (cell(sc), cell(rc)) {
                    ("", "") => break,
                    (s, r) => {
                        steps.push(
                            s.parse()
                                .map_err(|_| err(line, format!("bad spec ref `{s}`")))?,
                        );
                        r2.push(
                            r.parse::<f64>()
                                .ok()
                                .filter(|v| v.is_finite())
                                .ok_or_else(|| err(line, format!("bad R² `{r}`")))?,
                        );
                    }
                }
            }
            results.push(StepwiseResult::from_cumulative(target_ref, steps, r2));
        }
        Ok(Self::from_results(results))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    /// Writes `ref,spec1..specK,r2_1..r2_K,increase` with full-precision values.
    pub fn to_csv_string(&self) -> String {
        let k = self.step_count().max(1);
        let mut out = String::from("ref");
        (1..=k).for_each(|i| write!(out, ",spec{i}").unwrap());
        (1..=k).for_each(|i| write!(out, ",r2_{i}").unwrap());
        out.push_str(",increase\n");
        for row in &self.rows {
            let r = &row.result;
            write!(out, "{}", r.target_ref).unwrap();
            for i in 0..k {
                match r.steps.get(i) {
                    Some(s) => write!(out, ",{s}").unwrap(),
                    None => out.push(','),
                }
            }
            for i in 0..k {
                match r.r2.get(i) {
                    Some(v) => write!(out, ",{v:?}").unwrap(),
                    None => out.push(','),
                }
            }
            writeln!(out, ",{:?}", r.step13_increase).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainShare {
    pub domain_id: usize,
    pub name: String,
    pub weight_sum: f64,
    pub percent: f64,
    /// `percent` rounded half-up to an integer.
    pub percent_rounded: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAggregate {
    pub side: Side,
    pub per_domain: Vec<DomainShare>,
    pub total_weight: f64,
}

fn round_half_up(v: f64) -> u32 {
    (v + 0.5).floor().max(0.0) as u32
}

impl DomainAggregate {
    fn from_sums(scheme: &DomainScheme, sums: Vec<f64>) -> Self {
        let total_weight: f64 = sums.iter().sum();
        let per_domain = scheme
            .domains
            .iter()
            .zip(sums)
            .map(|(d, weight_sum)| {
                let percent = if total_weight > 0.0 {
                    100.0 * weight_sum / total_weight
                } else {
                    0.0
                };
                DomainShare {
                    domain_id: d.id,
                    name: d.name.clone(),
                    weight_sum,
                    percent,
                    percent_rounded: round_half_up(percent),
                }
            })
            .collect();
        Self {
            side: scheme.side,
            per_domain,
            total_weight,
        }
    }

    pub fn rounded_percents(&self) -> Vec<u32> {
        self.per_domain.iter().map(|d| d.percent_rounded).collect()
    }
}

fn expect_side(scheme: &DomainScheme, side: Side) -> Result<(), ReportError> {
    if scheme.side != side {
        return Err(ReportError::WrongSide {
            expected: side,
            found: scheme.side,
        });
    }
    Ok(())
}

fn index_of(scheme: &DomainScheme, domain_id: usize) -> usize {
    scheme
        .domains
        .iter()
        .position(|d| d.id == domain_id)
        .expect("domain_of returns a declared domain")
}

/// Sums each standard's final-step R² within its standards-side domain.
pub fn aggregate_standard_side(
    table: &CrosswalkTable,
    scheme: &DomainScheme,
) -> Result<DomainAggregate, ReportError> {
    expect_side(scheme, Side::Standard)?;
    let k = table.step_count();
    let mut sums = vec![0.0; scheme.domains.len()];
    for row in &table.rows {
        let r = &row.result;
        if r.r2.len() < k || r.r2.is_empty() {
            return Err(ReportError::MissingFinalStep(r.target_ref));
        }
        let d = scheme.domain_of(r.target_ref)?;
        sums[index_of(scheme, d)] += r.r2[k - 1];
    }
    Ok(DomainAggregate::from_sums(scheme, sums))
}

/// Routes each step's unique-variance increment to the specification domain of
/// the spec that entered at that step.
pub fn aggregate_spec_side(
    table: &CrosswalkTable,
    link: &DomainScheme,
) -> Result<DomainAggregate, ReportError> {
    expect_side(link, Side::Specification)?;
    let mut sums = vec![0.0; link.domains.len()];
    for row in &table.rows {
        let r = &row.result;
        for (&step, &inc) in r.steps.iter().zip(&r.increments) {
            let d = link.domain_of(step).map_err(|_| ReportError::UnknownStep {
                standard: r.target_ref,
                step,
            })?;
            sums[index_of(link, d)] += inc;
        }
    }
    Ok(DomainAggregate::from_sums(link, sums))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecCount {
    pub spec_ref: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceCount {
    /// Every spec ref 1..=n_specs, including those never selected.
    pub per_spec: Vec<SpecCount>,
    pub total_slots: usize,
}

impl OccurrenceCount {
    pub fn count(&self, spec_ref: usize) -> usize {
        self.per_spec
            .iter()
            .find(|c| c.spec_ref == spec_ref)
            .map_or(0, |c| c.count)
    }

    pub fn never_selected(&self) -> Vec<usize> {
        self.per_spec
            .iter()
            .filter(|c| c.count == 0)
            .map(|c| c.spec_ref)
            .collect()
    }
}

/// Tallies how often each specification fills a step slot across the table.
pub fn count_occurrences(
    table: &CrosswalkTable,
    n_specs: usize,
) -> Result<OccurrenceCount, ReportError> {
    let mut counts = vec![0usize; n_specs];
    let mut total_slots = 0;
    for row in &table.rows {
        for &s in &row.result.steps {
            if s == 0 || s > n_specs {
                return Err(ReportError::SpecOutOfRange {
                    spec_ref: s,
                    n_specs,
                });
            }
            counts[s - 1] += 1;
            total_slots += 1;
        }
    }
    Ok(OccurrenceCount {
        per_spec: counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| SpecCount {
                spec_ref: k + 1,
                count,
            })
            .collect(),
        total_slots,
    })
}

/// Everything the report emitters and the review API consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkReport {
    pub table: CrosswalkTable,
    pub standards: DomainAggregate,
    pub specifications: DomainAggregate,
    pub occurrences: OccurrenceCount,
}

impl CrosswalkReport {
    pub fn build(
        table: CrosswalkTable,
        standards: &DomainScheme,
        specifications: &DomainScheme,
    ) -> Result<Self, ReportError> {
        let std_agg = aggregate_standard_side(&table, standards)?;
        let spec_agg = aggregate_spec_side(&table, specifications)?;
        let occurrences = count_occurrences(&table, specifications.statement_count())?;
        Ok(Self {
            table,
            standards: std_agg,
            specifications: spec_agg,
            occurrences,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => self.render_csv(),
            ReportFormat::Markdown => self.render_markdown(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::from("side,domain_id,domain,weight_sum,percent,percent_rounded\n");
        for agg in [&self.standards, &self.specifications] {
            for d in &agg.per_domain {
                writeln!(
                    out,
                    "{},{},{},{:?},{:?},{}",
                    agg.side,
                    d.domain_id,
                    csv_quote(&d.name),
                    d.weight_sum,
                    d.percent,
                    d.percent_rounded
                )
                .unwrap();
            }
        }
        out
    }

    fn render_markdown(&self) -> String {
        let mut out = String::new();
        let k = self.table.step_count();
        out.push_str("## Selection and stepwise results\n\n| Name | Ref # |");
        (1..=k).for_each(|i| write!(out, " {i} |").unwrap());
        (1..=k).for_each(|i| write!(out, " Step {i} |").unwrap());
        out.push_str(" Increase |\n|:--|--:|");
        (0..2 * k).for_each(|_| out.push_str("--:|"));
        out.push_str("--:|\n");
        for row in &self.table.rows {
            let r = &row.result;
            write!(
                out,
                "| {} | {} |",
                row.standard_id.as_deref().unwrap_or(""),
                r.target_ref
            )
            .unwrap();
            for i in 0..k {
                match r.steps.get(i) {
                    Some(s) => write!(out, " {s} |").unwrap(),
                    None => out.push_str("  |"),
                }
            }
            for i in 0..k {
                match r.r2.get(i) {
                    Some(v) => write!(out, " {v:.2} |").unwrap(),
                    None => out.push_str("  |"),
                }
            }
            writeln!(out, " {:.2} |", r.step13_increase).unwrap();
        }

        out.push_str("\n## Percent of summed R² by domain\n\n| Content | Domain | Percent |\n|:--|:--|--:|\n");
        for (label, agg) in [
            ("Standards", &self.standards),
            ("Specifications", &self.specifications),
        ] {
            for (i, d) in agg.per_domain.iter().enumerate() {
                let first = if i == 0 { label } else { "" };
                writeln!(out, "| {first} | {} | {}% |", d.name, d.percent_rounded).unwrap();
            }
        }

        let occ = &self.occurrences;
        writeln!(
            out,
            "\n## Specification occurrences\n\n{} slots across {} standards.\n\n| Spec ref | Count |\n|--:|--:|",
            occ.total_slots,
            self.table.len()
        )
        .unwrap();
        let mut used: Vec<&SpecCount> = occ.per_spec.iter().filter(|c| c.count > 0).collect();
        used.sort_by(|a, b| b.count.cmp(&a.count).then(a.spec_ref.cmp(&b.spec_ref)));
        for c in used {
            writeln!(out, "| {} | {} |", c.spec_ref, c.count).unwrap();
        }
        let never = occ.never_selected();
        if !never.is_empty() {
            let list: Vec<String> = never.iter().map(usize::to_string).collect();
            writeln!(out, "\nNever selected: {}.", list.join(", ")).unwrap();
        }
        out
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub fn emit_report(
    report: &CrosswalkReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    let path = path.as_ref();
    fs::write(path, report.render(format)).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme(side: Side, sizes: &[usize]) -> DomainScheme {
        let declared: Vec<(usize, String)> =
            (1..=sizes.len()).map(|d| (d, format!("D{d}"))).collect();
        let assignment: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(d, &n)| std::iter::repeat_n(d + 1, n))
            .collect();
        DomainScheme::from_assignment(side, &declared, &assignment).unwrap()
    }

    fn row(target: usize, steps: [usize; 3], r2: [f64; 3]) -> StepwiseResult {
        StepwiseResult::from_cumulative(target, steps.to_vec(), r2.to_vec())
    }

    #[test]
    fn equal_weights_give_size_proportional_percents() {
        let std = scheme(Side::Standard, &[1, 3]);
        let table = CrosswalkTable::from_results(
            (1..=4).map(|t| row(t, [1, 1, 1], [0.1, 0.2, 0.5])).collect(),
        );
        let agg = aggregate_standard_side(&table, &std).unwrap();
        assert_eq!(agg.rounded_percents(), vec![25, 75]);
    }

    #[test]
    fn single_domain_is_everything() {
        let std = scheme(Side::Standard, &[2]);
        let table = CrosswalkTable::from_results(vec![
            row(1, [1, 2, 3], [0.1, 0.2, 0.3]),
            row(2, [1, 2, 3], [0.2, 0.3, 0.4]),
        ]);
        let agg = aggregate_standard_side(&table, &std).unwrap();
        assert_eq!(agg.rounded_percents(), vec![100]);
    }

    #[test]
    fn one_domain_steps_contribute_final_r2() {
        let link = scheme(Side::Specification, &[3, 2]);
        let table = CrosswalkTable::from_results(vec![row(1, [1, 2, 3], [0.22, 0.28, 0.32])]);
        let agg = aggregate_spec_side(&table, &link).unwrap();
        assert!((agg.per_domain[0].weight_sum - 0.32).abs() < 1e-12);
        assert_eq!(agg.per_domain[1].weight_sum, 0.0);
    }

    #[test]
    fn two_row_toy_table_routes_by_hand() {
        // specs 1-2 -> domain 1, specs 3-5 -> domain 2
        let link = scheme(Side::Specification, &[2, 3]);
        let table = CrosswalkTable::from_results(vec![
            row(1, [1, 3, 2], [0.40, 0.50, 0.60]),
            row(2, [4, 5, 1], [0.30, 0.45, 0.50]),
        ]);
        let agg = aggregate_spec_side(&table, &link).unwrap();
        // domain 1: 0.40 + 0.10 + 0.05 = 0.55; domain 2: 0.10 + 0.30 + 0.15 = 0.55
        assert!((agg.per_domain[0].weight_sum - 0.55).abs() < 1e-12);
        assert!((agg.per_domain[1].weight_sum - 0.55).abs() < 1e-12);
        assert!((agg.total_weight - 1.10).abs() < 1e-12);
        assert_eq!(agg.rounded_percents(), vec![50, 50]);
    }

    #[test]
    fn errors_for_wrong_side_missing_step_and_unknown_spec() {
        let std = scheme(Side::Standard, &[2]);
        let link = scheme(Side::Specification, &[2]);
        let table = CrosswalkTable::from_results(vec![
            row(1, [1, 2, 1], [0.1, 0.2, 0.3]),
            StepwiseResult::from_cumulative(2, vec![1], vec![0.1]),
        ]);
        assert!(matches!(
            aggregate_standard_side(&table, &link),
            Err(ReportError::WrongSide { .. })
        ));
        assert!(matches!(
            aggregate_standard_side(&table, &std),
            Err(ReportError::MissingFinalStep(2))
        ));
        let bad = CrosswalkTable::from_results(vec![row(1, [1, 2, 9], [0.1, 0.2, 0.3])]);
        assert!(matches!(
            aggregate_spec_side(&bad, &link),
            Err(ReportError::UnknownStep { step: 9, .. })
        ));
        assert!(count_occurrences(&bad, 2).is_err());
    }

    #[test]
    fn empty_table_counts_zero() {
        let occ = count_occurrences(&CrosswalkTable::default(), 5).unwrap();
        assert_eq!(occ.total_slots, 0);
        assert!(occ.per_spec.iter().all(|c| c.count == 0));
        assert_eq!(occ.per_spec.len(), 5);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(67.5), 68);
        assert_eq!(round_half_up(67.49), 67);
        assert_eq!(round_half_up(0.5), 1);
    }

    #[test]
    fn csv_round_trip_with_short_rows() {
        let table = CrosswalkTable::from_results(vec![
            row(1, [3, 1, 2], [0.1, 0.25, 0.3]),
            StepwiseResult::from_cumulative(2, vec![2, 1], vec![0.2, 0.4]),
        ]);
        let text = table.to_csv_string();
        assert!(text.starts_with("ref,spec1,spec2,spec3,r2_1,r2_2,r2_3,increase\n"));
        assert_eq!(CrosswalkTable::from_csv_str(&text).unwrap(), table);
    }

    #[test]
    fn csv_rejects_bad_cells() {
        let bad = "ref,spec1,r2_1\n1,x,0.2\n";
        assert!(matches!(
            CrosswalkTable::from_csv_str(bad),
            Err(ReportError::TableCsv { line: 2, .. })
        ));
    }
}
