use crate::error::{Error, Result};
use crate::family::FamilyPartition;
use crate::model::Fingerprint;

/// One line of a family file: a relay and the relays it names as family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyDeclaration {
    pub declarer: Fingerprint,
    pub named: Vec<Fingerprint>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FamilyDeclarations(Vec<FamilyDeclaration>);

impl FamilyDeclarations {
    pub fn iter(&self) -> impl Iterator<Item = &FamilyDeclaration> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<FamilyDeclaration>> for FamilyDeclarations {
    fn from(v: Vec<FamilyDeclaration>) -> Self {
        FamilyDeclarations(v)
    }
}

/// Reads a family file: each line is a declaring fingerprint followed by
/// the fingerprints it names. Fingerprints are 40 hex digits, optionally
/// `$`-prefixed. `#` comments and blank lines are ignored.
pub fn load_family_declarations(text: &str) -> Result<FamilyDeclarations> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut fps = content
            .split_ascii_whitespace()
            .map(|tok| tok.parse::<Fingerprint>().map_err(|message| Error::Parse { line: idx + 1, message }));
        let Some(declarer) = fps.next() else { continue };
        out.push(FamilyDeclaration { declarer: declarer?, named: fps.collect::<Result<_>>()? });
    }
    Ok(FamilyDeclarations(out))
}

/// Writes a partition in the family file format. Every member gets a line
/// naming all its co-members, so reading the file back yields the same
/// partition.
pub fn write_family_partition(partition: &FamilyPartition) -> String {
    let mut out = String::new();
    for (_, members) in partition.groups() {
        for member in members {
            out.push_str(&member.to_string());
            for other in members.iter().filter(|m| *m != member) {
                out.push(' ');
                out.push_str(&other.to_string());
            }
            out.push('\n');
        }
    }
    out
}
