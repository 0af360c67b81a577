use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("negative value {0}")]
    Negative(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance has no jobs")]
    Empty,
    #[error("machine count must be positive")]
    NoMachines,
    #[error("job size must be positive, got {0}")]
    NonPositiveSize(String),
    #[error("job probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("epsilon must be 1/E with integer E >= 2, got {0}")]
    BadEpsilon(String),
    #[error("power base c must be at least 2, got {0}")]
    BadBase(u64),
    #[error("normalization scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("rounding changed the group partition: before {before:?}, after {after:?}")]
    GroupsChanged {
        before: Vec<Vec<usize>>,
        after: Vec<Vec<usize>>,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid instance JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("instance has {jobs} jobs, above the cap of {cap}")]
    JobCap { jobs: usize, cap: usize },
    #[error("state cap of {cap} exceeded after {states} states")]
    StateCap { cap: usize, states: usize },
    #[error("{consecutive} consecutive idle advances without a start at state {state}")]
    IdleChain { consecutive: usize, state: String },
    #[error("grid inconsistency: {0}")]
    Grid(String),
    #[error("diagnostics ceiling violated: {0}")]
    Ceiling(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("policy table has no entry for state {0}")]
    MissingState(String),
    #[error("policy chose job {0} which is not available")]
    UnavailableJob(String),
    #[error("policy decision invalid: {0}")]
    InvalidDecision(String),
    #[error("type-{job_type} spaces exhausted with {remaining} jobs left")]
    SpacesExhausted { job_type: usize, remaining: usize },
    #[error("space list invalid: {0}")]
    BadSpaces(String),
    #[error("enumeration over {uncertain} uncertain jobs exceeds the cap of {cap}")]
    EnumerationCap { uncertain: usize, cap: usize },
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("all machines retired with {0} jobs remaining")]
    AllRetired(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("malformed policy file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("instance {id}: ratio {ratio} outside [1, {bound}]")]
    BoundViolation {
        id: String,
        ratio: f64,
        bound: f64,
        instance: String,
    },
    #[error("instance {id}: {detail}")]
    Invariant { id: String, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}
