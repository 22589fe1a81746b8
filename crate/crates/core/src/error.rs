use alloc::string::String;
use core::fmt;

/// Everything that can go wrong while validating inputs or running a test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditError {
    TooFewCandidates {
        found: usize,
    },
    InvalidVotesPerVoter {
        votes_per_voter: usize,
        candidates: usize,
    },
    EmptyContest,
    DuplicateCandidate(String),
    UnknownCandidate(String),
    DuplicatePrecinct(String),
    UnknownPrecinct(String),
    PrecinctCountMismatch {
        expected: usize,
        found: usize,
    },
    /// Returns and audit (or setup) disagree on the number of candidates.
    CandidateMismatch {
        precinct: String,
        expected: usize,
        found: usize,
    },
    VotesExceedBound {
        precinct: String,
        candidate: String,
        votes: u64,
        bound: u64,
    },
    TotalExceedsBound {
        precinct: String,
        total: u64,
        limit: u64,
    },
    /// Some winner/loser margin is not strictly positive, so there is no
    /// well-defined apparent outcome to audit.
    AmbiguousOutcome {
        winner: String,
        loser: String,
        margin: i128,
    },
    EmptyPool,
    PoolContainsWinner(String),
    /// The pooled pseudo-candidate would no longer be an apparent loser.
    PoolOutranksWinner {
        pooled: String,
        winner: String,
    },
    PooledIdInUse(String),
    IncompleteTally {
        missing: String,
    },
    EmptyPairSet,
    EmptySample,
    ZeroBoundWithTaintWeight {
        precinct: String,
    },
    InconsistentBounds {
        index: usize,
    },
    NegativeThreshold,
    NonPositiveMarginThreshold,
    InvalidCount {
        taint: usize,
        population: usize,
    },
    InvalidSampleSize {
        draws: usize,
        population: usize,
    },
    SampleExceedsAudits {
        draws: usize,
        audited: usize,
    },
    EmptyCounty(String),
    DuplicateCounty(String),
    SampleExceedsCounty {
        county: String,
        required: usize,
        precincts: usize,
    },
    BelowStatutoryMinimum {
        county: String,
        required: usize,
        minimum: usize,
    },
    InfeasibleConstraint {
        county: String,
    },
    InfeasibleSpec(&'static str),
}

impl fmt::Display for AuditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AuditError::*;
        match self {
            TooFewCandidates { found } => {
                write!(f, "a contest needs at least two candidates, found {found}")
            }
            InvalidVotesPerVoter { votes_per_voter, candidates } => write!(
                f,
                "votes per voter must satisfy 1 <= f < K, got f = {votes_per_voter} with K = {candidates}"
            ),
            EmptyContest => write!(f, "a contest needs at least one precinct"),
            DuplicateCandidate(c) => write!(f, "duplicate candidate identifier `{c}`"),
            UnknownCandidate(c) => write!(f, "unknown candidate `{c}`"),
            DuplicatePrecinct(p) => write!(f, "duplicate precinct `{p}`"),
            UnknownPrecinct(p) => write!(f, "unknown precinct `{p}`"),
            PrecinctCountMismatch { expected, found } => {
                write!(f, "expected returns for {expected} precincts, found {found}")
            }
            CandidateMismatch { precinct, expected, found } => write!(
                f,
                "precinct `{precinct}`: expected counts for {expected} candidates, found {found}"
            ),
            VotesExceedBound { precinct, candidate, votes, bound } => write!(
                f,
                "precinct `{precinct}`: {votes} votes for `{candidate}` exceed the ballot bound {bound}"
            ),
            TotalExceedsBound { precinct, total, limit } => write!(
                f,
                "precinct `{precinct}`: {total} votes in total exceed f * ballot bound = {limit}"
            ),
            AmbiguousOutcome { winner, loser, margin } => write!(
                f,
                "ambiguous outcome: margin of `{winner}` over `{loser}` is {margin}, not strictly positive"
            ),
            EmptyPool => write!(f, "the pool of candidates is empty"),
            PoolContainsWinner(c) => write!(f, "cannot pool apparent winner `{c}`"),
            PoolOutranksWinner { pooled, winner } => write!(
                f,
                "pooled candidate `{pooled}` would not trail apparent winner `{winner}`"
            ),
            PooledIdInUse(c) => write!(f, "pooled identifier `{c}` is already a candidate"),
            IncompleteTally { missing } => {
                write!(f, "incomplete hand tally: no audit record for precinct `{missing}`")
            }
            EmptyPairSet => write!(f, "no winner/loser pairs to maximise over"),
            EmptySample => write!(f, "the audit sample is empty"),
            ZeroBoundWithTaintWeight { precinct } => write!(
                f,
                "precinct `{precinct}` has a zero a priori bound; the taint weight is undefined"
            ),
            InconsistentBounds { index } => write!(f, "bound #{index} is negative"),
            NegativeThreshold => write!(f, "the taint threshold must be nonnegative"),
            NonPositiveMarginThreshold => write!(f, "the margin threshold must be positive"),
            InvalidCount { taint, population } => {
                write!(f, "taint count {taint} exceeds population size {population}")
            }
            InvalidSampleSize { draws, population } => write!(
                f,
                "invalid sample size {draws} for a population of {population} precincts"
            ),
            SampleExceedsAudits { draws, audited } => write!(
                f,
                "effective sample size {draws} exceeds the {audited} precincts actually audited"
            ),
            EmptyCounty(c) => write!(f, "county `{c}` has no precincts"),
            DuplicateCounty(c) => write!(f, "duplicate county `{c}`"),
            SampleExceedsCounty { county, required, precincts } => write!(
                f,
                "county `{county}`: {required} samples required but only {precincts} precincts"
            ),
            BelowStatutoryMinimum { county, required, minimum } => write!(
                f,
                "county `{county}`: {required} samples is below the statutory minimum of {minimum}"
            ),
            InfeasibleConstraint { county } => write!(
                f,
                "county `{county}` has no precinct with 150 or more votes"
            ),
            InfeasibleSpec(why) => write!(f, "infeasible instance specification: {why}"),
        }
    }
}

impl core::error::Error for AuditError {}
