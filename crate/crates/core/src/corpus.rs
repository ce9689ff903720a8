//! Labeled snippets, the JSON Lines dataset format and deterministic
//! stratified splits.
//!
//! One dataset file holds samples of a single vulnerability class; models are
//! never trained across classes.

pub mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnClass {
    SqlInjection,
    Xss,
    CommandInjection,
    Xsrf,
    RemoteCodeExecution,
    PathDisclosure,
    OpenRedirect,
}

impl VulnClass {
    pub const ALL: [VulnClass; 7] = [
        VulnClass::SqlInjection,
        VulnClass::Xss,
        VulnClass::CommandInjection,
        VulnClass::Xsrf,
        VulnClass::RemoteCodeExecution,
        VulnClass::PathDisclosure,
        VulnClass::OpenRedirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::SqlInjection => "sql_injection",
            VulnClass::Xss => "xss",
            VulnClass::CommandInjection => "command_injection",
            VulnClass::Xsrf => "xsrf",
            VulnClass::RemoteCodeExecution => "remote_code_execution",
            VulnClass::PathDisclosure => "path_disclosure",
            VulnClass::OpenRedirect => "open_redirect",
        }
    }

    /// Decision-tree depth limit used for this class: shallow trees for XSS
    /// and open redirect, depth 5 elsewhere.
    pub fn default_tree_depth(self) -> usize {
        match self {
            VulnClass::Xss | VulnClass::OpenRedirect => 2,
            _ => 5,
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VulnClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VulnClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub code: String,
    /// 1 = vulnerable, 0 = not vulnerable.
    pub label: u8,
    pub vuln_class: VulnClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl LabeledSample {
    pub fn is_vulnerable(&self) -> bool {
        self.label == 1
    }
}

/// Loose mirror of a JSONL record, so that label and class problems can be
/// reported with the offending line number.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    code: String,
    label: i64,
    vuln_class: String,
    #[serde(default)]
    origin: Option<String>,
}

/// Parses a JSON Lines dataset. Records keep file order.
pub fn parse_dataset(text: &str) -> Result<Vec<LabeledSample>> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let record = |message: String| Error::Record {
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| record(e.to_string()))?;
        let label = match raw.label {
            0 | 1 => raw.label as u8,
            other => return Err(record(format!("label must be 0 or 1, got {other}"))),
        };
        let vuln_class = raw
            .vuln_class
            .parse()
            .map_err(|_| record(format!("unknown vuln_class {:?}", raw.vuln_class)))?;
        if raw.code.is_empty() {
            return Err(record("code is empty".into()));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId {
                id: raw.id,
                line: line_no,
            });
        }
        samples.push(LabeledSample {
            id: raw.id,
            code: raw.code,
            label,
            vuln_class,
            origin: raw.origin,
        });
    }
    Ok(samples)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn write_dataset(samples: &[LabeledSample]) -> Result<String> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_dataset(path: impl AsRef<Path>, samples: &[LabeledSample]) -> Result<()> {
    let path = path.as_ref();
    let text = write_dataset(samples)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 70% train, 15% test, 15% validation.
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.7,
            test_fraction: 0.15,
            validation_fraction: 0.15,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.test_fraction, self.validation_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in (0, 1), got {fractions:?}"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
    Validation,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Test => "test",
            Partition::Validation => "validation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub validation: Vec<LabeledSample>,
}

impl DatasetSplit {
    pub fn partition(&self, which: &Partition) -> &[LabeledSample] {
        match which {
            Partition::Train => &self.train,
            Partition::Test => &self.test,
            Partition::Validation => &self.validation,
        }
    }
}

/// Per-partition counts `(train, test, validation)` for one label group.
type Allocation = [usize; 3];

/// Chooses per-label partition counts that hit the overall partition sizes
/// exactly while keeping every per-label count within 1 of its fractional
/// share. Searches a small neighbourhood of the floor/ceil candidates for
/// the first group; the second group is then determined.
fn allocate(groups: &[usize], totals: Allocation, fractions: [f64; 3]) -> Result<Vec<Allocation>> {
    if groups.len() == 1 {
        return Ok(vec![totals]);
    }
    debug_assert_eq!(groups.len(), 2);
    let exact = |g: usize, p: usize| groups[g] as f64 * fractions[p];
    let within = |count: i64, g: usize, p: usize| count >= 0 && (count as f64 - exact(g, p)).abs() <= 1.0 + 1e-9;

    let mut best: Option<(f64, Vec<Allocation>)> = None;
    let base_train = exact(0, 0).floor() as i64;
    let base_test = exact(0, 1).floor() as i64;
    for train0 in base_train - 1..=base_train + 2 {
        for test0 in base_test - 1..=base_test + 2 {
            let val0 = groups[0] as i64 - train0 - test0;
            let train1 = totals[0] as i64 - train0;
            let test1 = totals[1] as i64 - test0;
            let val1 = groups[1] as i64 - train1 - test1;
            let counts = [[train0, test0, val0], [train1, test1, val1]];
            let ok = counts
                .iter()
                .enumerate()
                .all(|(g, row)| row.iter().enumerate().all(|(p, &c)| within(c, g, p)));
            if !ok {
                continue;
            }
            let cost: f64 = counts
                .iter()
                .enumerate()
                .flat_map(|(g, row)| row.iter().enumerate().map(move |(p, &c)| (g, p, c)))
                .map(|(g, p, c)| (c as f64 - exact(g, p)).powi(2))
                .sum();
            if best.as_ref().map_or(true, |(b, _)| cost < *b - 1e-12) {
                let alloc = counts
                    .iter()
                    .map(|row| [row[0] as usize, row[1] as usize, row[2] as usize])
                    .collect();
                best = Some((cost, alloc));
            }
        }
    }
    best.map(|(_, a)| a).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no stratified allocation of groups {groups:?} into partition sizes {totals:?}"
        ))
    })
}

/// Deterministic stratified split.
///
/// Partition sizes are `round(f_train * n)`, `round(f_test * n)` and the
/// remainder. Each label group is shuffled with a generator seeded from
/// `spec.seed`; partitions list samples in their original dataset order.
pub fn split(samples: &[LabeledSample], spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = samples.len();
    let train_total = (spec.train_fraction * n as f64).round() as usize;
    let test_total = ((spec.test_fraction * n as f64).round() as usize).min(n - train_total);
    let totals = [train_total, test_total, n - train_total - test_total];
    let fractions = [spec.train_fraction, spec.test_fraction, spec.validation_fraction];

    let groups: Vec<Vec<usize>> = [0u8, 1]
        .iter()
        .map(|&label| (0..n).filter(|&i| samples[i].label == label).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let allocation = allocate(&sizes, totals, fractions)?;

    let mut rng = Rng::new(spec.seed);
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); 3];
    for (mut group, counts) in groups.into_iter().zip(allocation) {
        rng.shuffle(&mut group);
        let mut rest = group.as_slice();
        for (p, &count) in counts.iter().enumerate() {
            let (head, tail) = rest.split_at(count);
            assigned[p].extend_from_slice(head);
            rest = tail;
        }
    }
    let mut parts = assigned.into_iter().map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter().map(|i| samples[i].clone()).collect::<Vec<_>>()
    });
    Ok(DatasetSplit {
        train: parts.next().unwrap_or_default(),
        test: parts.next().unwrap_or_default(),
        validation: parts.next().unwrap_or_default(),
    })
}
