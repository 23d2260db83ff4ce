//! Synthetic scaling of Tor network consensus documents.
//!
//! `torsynth` reads a network-status consensus, lets you grow it
//! *vertically* (more weight per relay, [`vertical`]) or *horizontally*
//! (more relays, [`horizontal`]), and writes the result back in the same
//! format so that existing path-selection and simulation tooling can consume
//! it. [`growth`] measures how a real network grew over an archive of
//! consensuses, and [`validation`] compares a synthetic consensus with a
//! real one.
//!
//! ```
//! use torsynth::io::{parse_consensus, serialize_consensus};
//! use torsynth::vertical::scale_uniform;
//!
//! let doc = "\
//! network-status-version 3
//! valid-after 2023-03-01 12:00:00
//! r relay1 AAoQ1DAR6kkoo19hBAX5K0QztNw AZ38l7cAVGZTMz0QWgDyDh+BEoQ 2023-03-01 08:08:34 192.0.2.7 9001 0
//! s Fast Guard Running Stable Valid
//! w Bandwidth=850
//! ";
//! let consensus = parse_consensus(doc)?;
//! let doubled = scale_uniform(&consensus, 2.0)?;
//! assert!(serialize_consensus(&doubled)?.contains("w Bandwidth=1700"));
//! # Ok::<(), torsynth::Error>(())
//! ```

pub mod error;
pub mod family;
pub mod growth;
pub mod horizontal;
pub mod io;
pub mod model;
pub mod validation;
pub mod vertical;

pub use error::{Error, Result};
pub use family::{build_family_partition, FamilyId, FamilyPartition};
pub use model::{Consensus, Fingerprint, Flags, Nickname, Relay, RelayRole};

// The guide's code listings run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/consensus.md")]
    mod consensus {}
    #[doc = include_str!("../../../book/src/families.md")]
    mod families {}
    #[doc = include_str!("../../../book/src/growth.md")]
    mod growth {}
    #[doc = include_str!("../../../book/src/vertical.md")]
    mod vertical {}
    #[doc = include_str!("../../../book/src/horizontal.md")]
    mod horizontal {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
