use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};
use torsynth::io::{annotate_asns, load_asn_table, load_family_declarations, parse_consensus, AsnTable};
use torsynth::{build_family_partition, Consensus, FamilyPartition};

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn read_consensus(path: &Path) -> anyhow::Result<(Consensus, String)> {
    let text = read_text(path)?;
    let consensus = parse_consensus(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((consensus, text))
}

pub fn read_asn_table(path: &Path) -> anyhow::Result<(AsnTable, String)> {
    let text = read_text(path)?;
    let table = load_asn_table(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((table, text))
}

pub fn read_partition(path: &Path, consensus: &Consensus) -> anyhow::Result<(FamilyPartition, String)> {
    let text = read_text(path)?;
    let decls = load_family_declarations(&text).with_context(|| format!("parsing {}", path.display()))?;
    let partition = build_family_partition(&decls, consensus)
        .with_context(|| format!("building families from {}", path.display()))?;
    Ok((partition, text))
}

/// Annotates with the table if one is given.
pub fn maybe_annotate(consensus: Consensus, table: Option<&AsnTable>) -> Consensus {
    match table {
        Some(t) => annotate_asns(&consensus, t),
        None => consensus,
    }
}

/// Writes via a temporary sibling file and a rename so a failed run never
/// leaves a truncated output behind.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = format!(".{}.tmp", path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    tmp.set_file_name(name);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
