//! CSV input formats.
//!
//! Returns: `precinct_id,county_id,ballot_bound,<candidate>...`, one row per
//! precinct. The candidate set is taken from the header columns after the
//! three fixed ones.
//!
//! Audits: `precinct_id,<candidate>...`, one row per hand-counted precinct.
//! Candidate columns may appear in any order but must name exactly the
//! candidates of the returns file.
//!
//! Counties: `county_id,registered_voters[,required_samples][,large_precinct_rule]`.
//! A missing or empty `required_samples` means the statutory minimum;
//! `large_precinct_rule` defaults to `true`. "Votes" in the large-precinct
//! rule means the sum of the candidate counts in the precinct.
//!
//! All cells are UTF-8; counts are nonnegative integers. Surrounding
//! whitespace is ignored.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use mro_core::{AuditError, AuditRecord, ContestSetup, CountyPlan, PrecinctReturns};
use serde::Deserialize;

use crate::error::{Error, Result};

pub const RETURNS_FIXED_COLUMNS: [&str; 3] = ["precinct_id", "county_id", "ballot_bound"];

/// Validated machine returns plus the line each precinct came from.
#[derive(Debug, Clone)]
pub struct ReturnsFile {
    pub path: PathBuf,
    pub setup: ContestSetup,
    pub returns: Vec<PrecinctReturns>,
    pub lines: Vec<u64>,
}

/// Hand counts as read, before they are aligned with a contest.
#[derive(Debug, Clone)]
pub struct AuditsFile {
    pub path: PathBuf,
    pub candidates: Vec<String>,
    pub records: Vec<AuditRecord>,
    pub lines: Vec<u64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(err.to_string()),
        },
        _ => Error::parse(path, line, "*", err.to_string()),
    }
}

fn count(path: &Path, line: u64, column: &str, cell: &str) -> Result<u64> {
    let value: i128 = cell
        .parse()
        .map_err(|_| Error::parse(path, line, column, format!("`{cell}` is not an integer")))?;
    if value < 0 {
        return Err(Error::NegativeCount {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            value,
        });
    }
    u64::try_from(value)
        .map_err(|_| Error::parse(path, line, column, format!("`{cell}` is out of range")))
}

fn located(path: &Path, line: u64, source: AuditError) -> Error {
    Error::Validation {
        context: format!("{}:{line}", path.display()),
        source,
    }
}

pub fn load_returns(path: impl AsRef<Path>, votes_per_voter: usize) -> Result<ReturnsFile> {
    let path = path.as_ref();
    read_returns(open(path)?, path, votes_per_voter)
}

pub fn read_returns<R: Read>(input: R, path: &Path, votes_per_voter: usize) -> Result<ReturnsFile> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, expected) in RETURNS_FIXED_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(*expected) {
            return Err(Error::parse(
                path,
                1,
                header.get(i).unwrap_or(""),
                format!("expected column {} to be `{expected}`", i + 1),
            ));
        }
    }
    let candidates: Vec<String> = header.iter().skip(3).map(str::to_string).collect();

    let mut returns = Vec::new();
    let mut lines = Vec::new();
    let mut seen = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let precinct_id = record[0].to_string();
        if precinct_id.is_empty() {
            return Err(Error::parse(path, line, "precinct_id", "empty precinct id"));
        }
        if let Some(first) = seen.insert(precinct_id.clone(), line) {
            return Err(Error::parse(
                path,
                line,
                "precinct_id",
                format!("duplicate precinct `{precinct_id}` (first seen on line {first})"),
            ));
        }
        let ballot_bound = count(path, line, "ballot_bound", &record[2])?;
        let votes = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| count(path, line, c, &record[i + 3]))
            .collect::<Result<Vec<_>>>()?;
        returns.push(PrecinctReturns::new(
            precinct_id,
            &record[1],
            votes,
            ballot_bound,
        ));
        lines.push(line);
    }

    let setup = ContestSetup::new(candidates, votes_per_voter, returns.len())
        .map_err(|e| located(path, 1, e))?;
    for (r, &line) in returns.iter().zip(&lines) {
        r.validate(&setup).map_err(|e| located(path, line, e))?;
    }
    Ok(ReturnsFile {
        path: path.to_path_buf(),
        setup,
        returns,
        lines,
    })
}

pub fn load_audits(path: impl AsRef<Path>) -> Result<AuditsFile> {
    let path = path.as_ref();
    read_audits(open(path)?, path)
}

pub fn read_audits<R: Read>(input: R, path: &Path) -> Result<AuditsFile> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("precinct_id") {
        return Err(Error::parse(
            path,
            1,
            header.get(0).unwrap_or(""),
            "expected column 1 to be `precinct_id`",
        ));
    }
    let candidates: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut seen = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let precinct_id = record[0].to_string();
        if let Some(first) = seen.insert(precinct_id.clone(), line) {
            return Err(Error::parse(
                path,
                line,
                "precinct_id",
                format!("duplicate precinct `{precinct_id}` (first seen on line {first})"),
            ));
        }
        let votes = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| count(path, line, c, &record[i + 1]))
            .collect::<Result<Vec<_>>>()?;
        records.push(AuditRecord::new(precinct_id, votes));
        lines.push(line);
    }
    Ok(AuditsFile {
        path: path.to_path_buf(),
        candidates,
        records,
        lines,
    })
}

impl AuditsFile {
    /// Reorders the hand counts to the contest's candidate order and checks
    /// each record against the machine returns for the same precinct.
    ///
    /// A record for a precinct absent from the returns is an
    /// [`AuditError::UnknownPrecinct`] located at its line.
    pub fn align(&self, contest: &ReturnsFile) -> Result<Vec<AuditRecord>> {
        let setup = &contest.setup;
        for c in &self.candidates {
            if setup.index_of(c).is_none() {
                return Err(located(
                    &self.path,
                    1,
                    AuditError::UnknownCandidate(c.clone()),
                ));
            }
        }
        let columns: Vec<usize> = setup
            .candidates()
            .iter()
            .map(|c| {
                self.candidates.iter().position(|x| x == c).ok_or_else(|| {
                    Error::parse(&self.path, 1, c, "candidate column missing from audit file")
                })
            })
            .collect::<Result<_>>()?;

        let by_id: HashMap<&str, &PrecinctReturns> = contest
            .returns
            .iter()
            .map(|r| (r.precinct_id.as_str(), r))
            .collect();
        let mut aligned = Vec::with_capacity(self.records.len());
        for (record, &line) in self.records.iter().zip(&self.lines) {
            let votes: Vec<u64> = columns.iter().map(|&i| record.hand_votes[i]).collect();
            let audit = AuditRecord::new(record.precinct_id.clone(), votes);
            let returns = by_id.get(audit.precinct_id.as_str()).ok_or_else(|| {
                located(
                    &self.path,
                    line,
                    AuditError::UnknownPrecinct(audit.precinct_id.clone()),
                )
            })?;
            audit
                .validate(setup, returns)
                .map_err(|e| located(&self.path, line, e))?;
            aligned.push(audit);
        }
        Ok(aligned)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CountyRow {
    county_id: String,
    registered_voters: u64,
    #[serde(default)]
    required_samples: Option<usize>,
    #[serde(default)]
    large_precinct_rule: Option<bool>,
}

/// Builds one [`CountyPlan`] per row of the counties file, collecting each
/// county's precincts from the returns in file order.
pub fn load_county_plans(path: impl AsRef<Path>, contest: &ReturnsFile) -> Result<Vec<CountyPlan>> {
    let path = path.as_ref();
    read_county_plans(open(path)?, path, contest)
}

pub fn read_county_plans<R: Read>(
    input: R,
    path: &Path,
    contest: &ReturnsFile,
) -> Result<Vec<CountyPlan>> {
    let mut precincts: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in &contest.returns {
        precincts
            .entry(r.county_id.as_str())
            .or_default()
            .push(r.precinct_id.clone());
    }

    let mut rdr = reader(input);
    let mut plans = Vec::new();
    let mut seen = HashMap::new();
    for row in rdr.deserialize::<CountyRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = plans.len() as u64 + 2;
        if seen.insert(row.county_id.clone(), line).is_some() {
            return Err(Error::parse(
                path,
                line,
                "county_id",
                format!("duplicate county `{}`", row.county_id),
            ));
        }
        let members = precincts.remove(row.county_id.as_str()).unwrap_or_default();
        if members.is_empty() {
            return Err(located(path, line, AuditError::EmptyCounty(row.county_id)));
        }
        let plan = CountyPlan::new(
            row.county_id,
            row.registered_voters,
            members,
            row.required_samples,
            row.large_precinct_rule.unwrap_or(true),
        )
        .map_err(|e| located(path, line, e))?;
        plans.push(plan);
    }
    if let Some((county, _)) = precincts.into_iter().next() {
        return Err(Error::parse(
            path,
            0,
            "county_id",
            format!("county `{county}` appears in the returns but has no plan"),
        ));
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
precinct_id,county_id,ballot_bound,Alice,Bob,Carol
P1,North,120,60,40,15
P2,North,200,90,80,20
P3,South,75,30,30,10
P4,South,310,150,100,50
";

    fn returns(text: &str) -> Result<ReturnsFile> {
        read_returns(text.as_bytes(), Path::new("returns.csv"), 1)
    }

    #[test]
    fn sample_file_loads() {
        let file = returns(SAMPLE).unwrap();
        assert_eq!(file.returns.len(), 4);
        assert_eq!(file.setup.candidates(), ["Alice", "Bob", "Carol"]);
        assert_eq!(file.lines, vec![2, 3, 4, 5]);
        assert_eq!(file.returns[3].machine_votes, vec![150, 100, 50]);
    }

    #[test]
    fn bound_violation_names_the_cell() {
        let text = "precinct_id,county_id,ballot_bound,A,B\nP1,X,10,11,0\n";
        let err = returns(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(
            err,
            Error::Validation {
                source: AuditError::VotesExceedBound { .. },
                ..
            }
        ));
        assert!(
            msg.contains("returns.csv:2") && msg.contains("`A`"),
            "{msg}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn negative_and_garbage_cells() {
        let neg = returns("precinct_id,county_id,ballot_bound,A,B\nP1,X,10,-1,0\n").unwrap_err();
        assert!(
            matches!(
                neg,
                Error::NegativeCount {
                    line: 2,
                    value: -1,
                    ..
                }
            ),
            "{neg}"
        );
        assert!(neg.to_string().contains("negative count -1"));
        let junk = returns("precinct_id,county_id,ballot_bound,A,B\nP1,X,10,1.5,0\n").unwrap_err();
        assert!(
            matches!(junk, Error::Parse { line: 2, ref column, .. } if column == "A"),
            "{junk}"
        );
    }

    #[test]
    fn header_and_duplicates() {
        let bad = returns("precinct,county_id,ballot_bound,A,B\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 1, .. }));
        let dup = returns("precinct_id,county_id,ballot_bound,A,B\nP1,X,10,1,0\nP1,X,10,1,0\n")
            .unwrap_err();
        assert!(matches!(dup, Error::Parse { line: 3, .. }), "{dup}");
        let ragged = returns("precinct_id,county_id,ballot_bound,A,B\nP1,X,10,1\n").unwrap_err();
        assert!(matches!(ragged, Error::Parse { .. }), "{ragged}");
    }

    #[test]
    fn audits_align_by_name() {
        let contest = returns(SAMPLE).unwrap();
        let text = "precinct_id,Carol,Alice,Bob\nP2,20,89,81\n";
        let audits = read_audits(text.as_bytes(), Path::new("audits.csv")).unwrap();
        let aligned = audits.align(&contest).unwrap();
        assert_eq!(aligned[0].hand_votes, vec![89, 81, 20]);
    }

    #[test]
    fn audit_edge_cases() {
        let empty = read_audits("precinct_id,A,B\n".as_bytes(), Path::new("a.csv")).unwrap();
        assert!(empty.records.is_empty());
        let dup = read_audits("precinct_id,A\nP1,1\nP1,2\n".as_bytes(), Path::new("a.csv"));
        assert!(matches!(dup, Err(Error::Parse { line: 3, .. })));

        let contest = returns(SAMPLE).unwrap();
        let over = read_audits(
            "precinct_id,Alice,Bob,Carol\nP3,76,0,0\n".as_bytes(),
            Path::new("a.csv"),
        )
        .unwrap();
        assert!(matches!(
            over.align(&contest),
            Err(Error::Validation { .. })
        ));
        let stranger = read_audits(
            "precinct_id,Alice,Bob,Dave\nP3,1,0,0\n".as_bytes(),
            Path::new("a.csv"),
        )
        .unwrap();
        assert!(stranger.align(&contest).is_err());
        let unknown = read_audits(
            "precinct_id,Alice,Bob,Carol\nP3,1,0,0\nP9,1,0,0\n".as_bytes(),
            Path::new("a.csv"),
        )
        .unwrap();
        let err = unknown.align(&contest).unwrap_err();
        assert!(matches!(
            err,
            Error::Validation {
                source: AuditError::UnknownPrecinct(_),
                ..
            }
        ));
        assert!(err.to_string().starts_with("a.csv:3"), "{err}");
    }

    #[test]
    fn county_plans() {
        let contest = returns(SAMPLE).unwrap();
        let text = "county_id,registered_voters,required_samples,large_precinct_rule\nNorth,1000,,\nSouth,60000,,false\n";
        let err = read_county_plans(text.as_bytes(), Path::new("c.csv"), &contest).unwrap_err();
        // South has two precincts but 60,000 registered voters require three.
        assert!(
            matches!(
                err,
                Error::Validation {
                    source: AuditError::BelowStatutoryMinimum { .. },
                    ..
                } | Error::Validation {
                    source: AuditError::SampleExceedsCounty { .. },
                    ..
                }
            ),
            "{err}"
        );

        let text = "county_id,registered_voters\nNorth,1000\nSouth,2000\n";
        let plans = read_county_plans(text.as_bytes(), Path::new("c.csv"), &contest).unwrap();
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[1].precincts, vec!["P3".to_string(), "P4".to_string()]);
        assert!(plans[1].large_precinct_rule);

        let text = "county_id,registered_voters\nNorth,1000\n";
        assert!(read_county_plans(text.as_bytes(), Path::new("c.csv"), &contest).is_err());
    }
}
