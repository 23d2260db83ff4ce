use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;

use crate::error::{Error, Result};
use crate::model::{Asn, Consensus};

/// IPv4 prefix to origin AS mapping with longest-prefix-match lookup.
///
/// The index keeps one hash map per mask length; a lookup probes from /32
/// down to /0, so it costs at most 33 hash probes.
#[derive(Clone, Debug)]
pub struct AsnTable {
    by_len: Vec<HashMap<u32, Asn>>,
    inventory: BTreeMap<Asn, Vec<Ipv4Net>>,
    entries: usize,
}

impl Default for AsnTable {
    fn default() -> Self {
        AsnTable { by_len: vec![HashMap::new(); 33], inventory: BTreeMap::new(), entries: 0 }
    }
}

impl AsnTable {
    pub fn new() -> Self {
        AsnTable::default()
    }

    /// Adds a prefix. The network address must have no host bits set and
    /// the exact prefix must not already be present.
    pub fn insert(&mut self, prefix: Ipv4Net, asn: Asn) -> Result<()> {
        if prefix.trunc() != prefix {
            return Err(Error::Parameter(format!("{prefix} has host bits set")));
        }
        let key = u32::from(prefix.network());
        let slot = &mut self.by_len[prefix.prefix_len() as usize];
        if slot.contains_key(&key) {
            return Err(Error::Parameter(format!("duplicate prefix {prefix}")));
        }
        slot.insert(key, asn);
        self.inventory.entry(asn).or_default().push(prefix);
        self.entries += 1;
        Ok(())
    }

    /// The most specific prefix containing `addr`, with its AS.
    pub fn lookup_prefix(&self, addr: Ipv4Addr) -> Option<(Ipv4Net, Asn)> {
        let bits = u32::from(addr);
        (0..=32u8).rev().find_map(|len| {
            let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
            self.by_len[len as usize]
                .get(&(bits & mask))
                .map(|asn| (Ipv4Net::new(Ipv4Addr::from(bits & mask), len).expect("len <= 32"), *asn))
        })
    }

    pub fn lookup(&self, addr: Ipv4Addr) -> Option<Asn> {
        self.lookup_prefix(addr).map(|(_, asn)| asn)
    }

    /// Prefixes announced by `asn`, in insertion order.
    pub fn prefixes(&self, asn: Asn) -> &[Ipv4Net] {
        self.inventory.get(&asn).map_or(&[], Vec::as_slice)
    }

    pub fn asns(&self) -> impl Iterator<Item = Asn> + '_ {
        self.inventory.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }
}

/// Reads `<a.b.c.d>/<len> <asn>` lines. `#` starts a comment; blank lines
/// are skipped. The AS number may carry an `AS` prefix.
pub fn load_asn_table(text: &str) -> Result<AsnTable> {
    let mut table = AsnTable::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = content.split_ascii_whitespace().collect();
        let [cidr, asn] = fields[..] else {
            return Err(err(format!("expected \"<prefix> <asn>\", got {content:?}")));
        };
        let prefix: Ipv4Net = cidr.parse().map_err(|_| err(format!("bad prefix {cidr:?}")))?;
        let asn_digits = asn.strip_prefix("AS").or_else(|| asn.strip_prefix("as")).unwrap_or(asn);
        let asn: Asn = asn_digits.parse().map_err(|_| err(format!("bad AS number {asn:?}")))?;
        table.insert(prefix, asn).map_err(|e| err(e.to_string()))?;
    }
    Ok(table)
}

/// Sets every relay's `asn` from the table. Relays outside every prefix get
/// `None`.
pub fn annotate_asns(consensus: &Consensus, table: &AsnTable) -> Consensus {
    let mut out = consensus.clone();
    for relay in &mut out.relays {
        relay.asn = table.lookup(relay.address);
    }
    out
}
