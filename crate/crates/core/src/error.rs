use thiserror::Error;

use crate::boxes::Party;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("party count {0} is outside 1..={max}", max = crate::MAX_PARTIES)]
    PartyCount(usize),

    #[error("dimension mismatch: expected {expected} parties, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("table has {found} entries, expected {expected}")]
    TableSize { expected: usize, found: usize },

    #[error("negative probability at input {input}, output {output}")]
    NegativeProbability { input: String, output: String },

    #[error("row for input {input} sums to {sum}, not 1")]
    NotNormalized { input: String, sum: String },

    #[error("epsilon {0} is outside [0, 1]")]
    EpsilonRange(String),

    #[error("epsilon {0} is a fixed point of the distillation map (0 is local, 1 is already maximal)")]
    FixedPoint(String),

    #[error("delta {0} is outside (0, 1)")]
    DeltaRange(String),

    #[error("box is not in the family spanned by the given target and local boxes")]
    NotInFamily,

    #[error("target and local boxes coincide, epsilon is not identifiable")]
    Unidentifiable,

    #[error("truth table length {0} is not a power of two")]
    TruthTableLength(usize),

    #[error("variable index {index} is outside 1..={n}")]
    VariableIndex { index: usize, n: usize },

    #[error("monomial {0} is not local (degree above 1)")]
    NonLocalMonomial(String),

    #[error("invalid party {party} for a box with {n} parties")]
    InvalidParty { party: Party, n: usize },

    #[error("receiver {0} cannot be absorbed")]
    ReceiverAbsorbed(Party),

    #[error("absorbed party {0} has no constant input")]
    MissingConstant(Party),

    #[error("index range violated: need 1 <= k1 <= k2 < k3 <= n, got k1={k1}, k2={k2}, k3={k3}, n={n}")]
    IndexRange {
        k1: usize,
        k2: usize,
        k3: usize,
        n: usize,
    },

    #[error("component box does not match its declared function: {0}")]
    ComponentMismatch(String),

    #[error("theorem hypothesis n_J = 1 violated (n_J = {0})")]
    Hypothesis(usize),

    #[error("function has no monomial of degree 2 or more")]
    NoNonLocalMonomial,

    #[error("isolated box is not a noisy PR box: {0}")]
    IsolationFailed(String),

    #[error("distillation output left the family: {0}")]
    FamilyMismatch(String),

    #[error("{what}: size {needed} exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("certificate check failed: {0}")]
    Certificate(String),

    #[error("invalid rational {0:?}")]
    Rational(String),

    #[error("box document: {0}")]
    Document(String),
}
