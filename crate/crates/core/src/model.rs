//! Domain types for relays and consensuses.
//!
//! A [`Consensus`] is an ordered list of [`Relay`]s plus the document text
//! around them that we do not interpret. Each relay falls into exactly one
//! [`RelayRole`], which drives role-based scaling.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

/// An autonomous system number.
pub type Asn = u32;

/// A relay's 20-byte RSA identity digest.
///
/// Rendered and parsed as 40 uppercase hex characters. Ordering matches the
/// ordering of the hex rendering, which is the order relays appear in a
/// published consensus.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint([u8; 20]);

impl Fingerprint {
    pub const LEN: usize = 20;

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Fingerprint(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for byte in &self.0 {
            write!(f, "{byte:02X}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

impl FromStr for Fingerprint {
    type Err = String;

    /// Accepts 40 hex digits in either case, optionally prefixed with `$`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('$').unwrap_or(s);
        if hex.len() != 40 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("not a 40-digit hex fingerprint: {s:?}"));
        }
        let mut out = [0u8; 20];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk).expect("ascii");
            out[i] = u8::from_str_radix(pair, 16).expect("validated hex");
        }
        Ok(Fingerprint(out))
    }
}

/// A relay nickname: 1 to 19 ASCII alphanumeric characters.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nickname(String);

impl Nickname {
    pub const MAX_LEN: usize = 19;

    pub fn new(name: impl Into<String>) -> Result<Self, String> {
        let name = name.into();
        if name.is_empty() || name.len() > Self::MAX_LEN || !name.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(format!("invalid nickname {name:?}"));
        }
        Ok(Nickname(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Nickname {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Nickname {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Well-known status flag names.
pub mod flag {
    pub const AUTHORITY: &str = "Authority";
    pub const BAD_EXIT: &str = "BadExit";
    pub const EXIT: &str = "Exit";
    pub const FAST: &str = "Fast";
    pub const GUARD: &str = "Guard";
    pub const HSDIR: &str = "HSDir";
    pub const RUNNING: &str = "Running";
    pub const STABLE: &str = "Stable";
    pub const V2DIR: &str = "V2Dir";
    pub const VALID: &str = "Valid";
}

/// The set of status flags from a relay's `s` line.
///
/// Flags are kept as strings so that flags unknown to this crate survive a
/// round trip. Iteration is in byte order, which is how directory
/// authorities emit them.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Flags(BTreeSet<String>);

impl Flags {
    pub fn new() -> Self {
        Flags::default()
    }

    pub fn contains(&self, flag: &str) -> bool {
        self.0.contains(flag)
    }

    pub fn insert(&mut self, flag: impl Into<String>) -> bool {
        self.0.insert(flag.into())
    }

    pub fn remove(&mut self, flag: &str) -> bool {
        self.0.remove(flag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Flags {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Flags(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Debug for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Relay-level lines that the model does not interpret, kept in their
/// original position relative to the `s` and `w` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreservedLines {
    /// Between `r` and `s` (typically `a`).
    pub after_r: Vec<String>,
    /// Between `s` and `w` (typically `v` and `pr`).
    pub after_s: Vec<String>,
    /// After `w` (typically `p`).
    pub after_w: Vec<String>,
}

/// One router entry of a consensus.
#[derive(Clone, Debug, PartialEq)]
pub struct Relay {
    pub nickname: Nickname,
    pub fingerprint: Fingerprint,
    /// Base64 descriptor digest from the `r` line, kept verbatim.
    pub descriptor_digest: String,
    pub published: NaiveDateTime,
    pub address: Ipv4Addr,
    pub or_port: u16,
    pub dir_port: u16,
    pub flags: Flags,
    /// Consensus weight (`w Bandwidth=`).
    pub weight: u64,
    /// Remaining `w` line arguments such as `Measured=` or `Unmeasured=1`.
    pub weight_extra: Vec<String>,
    pub preserved: PreservedLines,
    /// Origin AS, set by [`crate::io::annotate_asns`].
    pub asn: Option<Asn>,
}

impl Relay {
    /// A relay with the given identity and weight and otherwise neutral
    /// fields. Mostly useful for building consensuses in code.
    pub fn new(fingerprint: Fingerprint, nickname: Nickname, address: Ipv4Addr, weight: u64, flags: Flags) -> Self {
        Relay {
            nickname,
            fingerprint,
            descriptor_digest: crate::io::digest_for(&fingerprint),
            published: NaiveDateTime::default(),
            address,
            or_port: 9001,
            dir_port: 0,
            flags,
            weight,
            weight_extra: Vec::new(),
            preserved: PreservedLines::default(),
            asn: None,
        }
    }

    pub fn role(&self) -> RelayRole {
        role_of(self)
    }
}

/// The four disjoint role groups used by role-based scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelayRole {
    Middle,
    GuardOnly,
    ExitOnly,
    GuardAndExit,
}

impl RelayRole {
    pub const ALL: [RelayRole; 4] =
        [RelayRole::Middle, RelayRole::GuardOnly, RelayRole::ExitOnly, RelayRole::GuardAndExit];
}

/// Classifies a relay by its `Guard` and `Exit` flags.
///
/// A relay carrying `BadExit` is never used in the exit position, so it is
/// classified as if it had no `Exit` flag.
pub fn role_of(relay: &Relay) -> RelayRole {
    let guard = relay.flags.contains(flag::GUARD);
    let exit = relay.flags.contains(flag::EXIT) && !relay.flags.contains(flag::BAD_EXIT);
    match (guard, exit) {
        (true, true) => RelayRole::GuardAndExit,
        (true, false) => RelayRole::GuardOnly,
        (false, true) => RelayRole::ExitOnly,
        (false, false) => RelayRole::Middle,
    }
}

/// A value per role group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoleTotals<T> {
    pub middle: T,
    pub guard: T,
    pub exit: T,
    pub both: T,
}

impl<T> RoleTotals<T> {
    pub fn get(&self, role: RelayRole) -> &T {
        match role {
            RelayRole::Middle => &self.middle,
            RelayRole::GuardOnly => &self.guard,
            RelayRole::ExitOnly => &self.exit,
            RelayRole::GuardAndExit => &self.both,
        }
    }

    pub fn get_mut(&mut self, role: RelayRole) -> &mut T {
        match role {
            RelayRole::Middle => &mut self.middle,
            RelayRole::GuardOnly => &mut self.guard,
            RelayRole::ExitOnly => &mut self.exit,
            RelayRole::GuardAndExit => &mut self.both,
        }
    }
}

impl RoleTotals<u64> {
    pub fn sum(&self) -> u64 {
        self.middle + self.guard + self.exit + self.both
    }
}

/// A timestamped set of relays with the surrounding document text.
#[derive(Clone, Debug, PartialEq)]
pub struct Consensus {
    pub valid_after: NaiveDateTime,
    pub relays: Vec<Relay>,
    /// Header lines before the first relay, `valid-after` included; that
    /// line is regenerated from `valid_after` on output.
    pub preamble: Vec<String>,
    /// Lines from `directory-footer` (or the first signature) to the end.
    pub footer: Vec<String>,
}

impl Consensus {
    /// Builds a consensus from relays alone, with a minimal preamble.
    pub fn new(valid_after: NaiveDateTime, relays: Vec<Relay>) -> Result<Self> {
        let consensus = Consensus {
            valid_after,
            relays,
            preamble: vec![
                "network-status-version 3".to_string(),
                "vote-status consensus".to_string(),
                format!("valid-after {}", valid_after.format(crate::io::TIME_FORMAT)),
            ],
            footer: Vec::new(),
        };
        consensus.check_unique_fingerprints()?;
        Ok(consensus)
    }

    pub fn len(&self) -> usize {
        self.relays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.relays.iter().map(|r| r.weight).sum()
    }

    pub fn get(&self, fingerprint: &Fingerprint) -> Option<&Relay> {
        self.relays.iter().find(|r| &r.fingerprint == fingerprint)
    }

    pub fn fingerprints(&self) -> HashSet<Fingerprint> {
        self.relays.iter().map(|r| r.fingerprint).collect()
    }

    pub(crate) fn check_unique_fingerprints(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.relays.len());
        for relay in &self.relays {
            if !seen.insert(relay.fingerprint) {
                return Err(Error::MalformedDocument(format!("duplicate fingerprint {}", relay.fingerprint)));
            }
        }
        Ok(())
    }
}

/// Sum of consensus weights per role group.
pub fn group_weights(consensus: &Consensus) -> RoleTotals<u64> {
    let mut totals = RoleTotals::default();
    for relay in &consensus.relays {
        *totals.get_mut(role_of(relay)) += relay.weight;
    }
    totals
}

/// Number of relays per role group.
pub fn group_counts(consensus: &Consensus) -> RoleTotals<u64> {
    let mut totals = RoleTotals::default();
    for relay in &consensus.relays {
        *totals.get_mut(role_of(relay)) += 1;
    }
    totals
}
