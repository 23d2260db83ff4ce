//! Reading and writing consensus documents and their sidecar files.

mod asn;
mod consensus;
mod families;

pub use asn::{annotate_asns, load_asn_table, AsnTable};
pub use consensus::{digest_for, parse_consensus, serialize_consensus, TIME_FORMAT};
pub use families::{load_family_declarations, write_family_partition, FamilyDeclaration, FamilyDeclarations};
