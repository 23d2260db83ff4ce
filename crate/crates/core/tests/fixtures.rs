use std::fs;
use std::path::{Path, PathBuf};

use torsynth::io::{
    annotate_asns, load_asn_table, load_family_declarations, parse_consensus, serialize_consensus,
    write_family_partition,
};
use torsynth::{build_family_partition, RelayRole};

fn read(name: &str) -> String {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    fs::read_to_string(path).unwrap()
}

#[test]
fn excerpt_round_trips() {
    let text = read("consensus-excerpt.txt");
    let c = parse_consensus(&text).unwrap();
    assert_eq!(c.len(), 64);
    let out = serialize_consensus(&c).unwrap();
    assert_eq!(out, text);
    assert_eq!(parse_consensus(&out).unwrap(), c);

    let fps: Vec<_> = c.relays.iter().map(|r| r.fingerprint).collect();
    assert!(fps.windows(2).all(|w| w[0] < w[1]));
    assert!(c.relays.iter().any(|r| r.role() == RelayRole::GuardAndExit));
    assert!(c.relays.iter().any(|r| !r.weight_extra.is_empty()));
}

#[test]
fn excerpt_annotation() {
    let c = parse_consensus(&read("consensus-excerpt.txt")).unwrap();
    let table = load_asn_table(&read("asn-table.txt")).unwrap();
    let annotated = annotate_asns(&c, &table);
    assert!(c.relays.iter().all(|r| r.asn.is_none()));
    let known = annotated.relays.iter().filter(|r| r.asn.is_some()).count();
    assert!(known > 0 && known < c.len());
    for r in &annotated.relays {
        assert_eq!(r.asn, table.lookup(r.address));
    }
    // Annotation is not part of the document.
    assert_eq!(serialize_consensus(&annotated).unwrap(), serialize_consensus(&c).unwrap());
}

#[test]
fn excerpt_families() {
    let c = parse_consensus(&read("consensus-excerpt.txt")).unwrap();
    let declarations = load_family_declarations(&read("families.txt")).unwrap();
    let partition = build_family_partition(&declarations, &c).unwrap();
    let mut sizes: Vec<usize> = partition.groups().map(|(_, m)| m.len()).collect();
    sizes.sort();
    assert_eq!(sizes, [2, 3]);

    let written = write_family_partition(&partition);
    let again = build_family_partition(&load_family_declarations(&written).unwrap(), &c).unwrap();
    assert_eq!(again, partition);
}
