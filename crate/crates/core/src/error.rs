use crate::model::Fingerprint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while reading, transforming or writing a
/// consensus.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A line-oriented input (consensus, ASN table, family file) could not be
    /// parsed. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed consensus document: {0}")]
    MalformedDocument(String),

    /// A relay entry is unusable; `relay` names it by nickname or fingerprint.
    #[error("relay {relay}: {message}")]
    Relay { relay: String, message: String },

    #[error("unknown fingerprint {0}")]
    UnknownFingerprint(Fingerprint),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("consensus contains no relays")]
    EmptyConsensus,

    /// The requested role factor needs to move weight onto a group that has
    /// none.
    #[error("cannot balance {side} factor: the {side}-only group is empty but the shared group needs rebalancing")]
    InfeasibleBalance { side: &'static str },

    #[error("AS{0} has no prefixes in the ASN table")]
    NoPrefix(u32),

    #[error("no free address left in {0}")]
    AddressExhausted(String),
}
