//! Horizontal scaling: growing the relay count by synthesizing new relays.
//!
//! Every new relay is a copy of a *base relay* drawn from the original
//! consensus. It keeps the base relay's weight, flags, ports and uninterpreted
//! lines, and gets a fresh fingerprint, nickname and address. The address is
//! drawn from the address space of the base relay's AS, or from its /16 when
//! the AS is unknown, so that subnet and AS-level properties carry over.
//!
//! Family membership for new relays follows three probabilities: the share
//! of original relays in any family, the share of same-family relay pairs
//! that also share an AS, and a caller-chosen probability that a new family
//! member founds a new family instead of joining an existing one.
//!
//! # Draw order
//!
//! All randomness comes from one ChaCha20 stream seeded with
//! [`HorizontalConfig::seed`], consumed in this order:
//!
//! 1. one draw per new relay to pick its base relay;
//! 2. per new relay, in order: fingerprint (20 bytes, redrawn on collision),
//!    nickname (4 bytes, redrawn on collision), then address draws;
//! 3. per new relay, in order: family draws as described on
//!    [`assign_families`].

use std::collections::{HashMap, HashSet};
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::family::{FamilyId, FamilyPartition};
use crate::io::{digest_for, AsnTable};
use crate::model::{group_counts, role_of, Asn, Consensus, Fingerprint, Nickname, Relay, RoleTotals};
use crate::vertical::{derive_group_factors, ResolvedGroupFactors, RoleFactors};

/// Parameters of one horizontal scaling run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizontalConfig {
    /// Target size relative to the input; must be greater than 1.
    pub factor: f64,
    /// Probability that a family-bound new relay founds a new family.
    pub p_new: f64,
    /// Relative sampling weights per role, interpreted over relay counts.
    pub role_weights: Option<RoleFactors>,
    pub seed: u64,
}

impl HorizontalConfig {
    pub fn new(factor: f64, p_new: f64, seed: u64) -> Result<Self> {
        let config = HorizontalConfig { factor, p_new, role_weights: None, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn with_role_weights(mut self, weights: RoleFactors) -> Self {
        self.role_weights = Some(weights);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.factor.is_finite() || self.factor <= 1.0 {
            return Err(Error::Parameter(format!("horizontal factor must be > 1, got {}", self.factor)));
        }
        if !(0.0..=1.0).contains(&self.p_new) {
            return Err(Error::Parameter(format!("p_new must lie in [0, 1], got {}", self.p_new)));
        }
        Ok(())
    }
}

/// Number of relays to add when growing `len` relays by `factor`.
pub fn new_relay_count(len: usize, factor: f64) -> usize {
    ((factor - 1.0) * len as f64).round() as usize
}

/// Family statistics of a consensus.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyStats {
    /// Share of relays that are in some family.
    pub p_fam: f64,
    /// Share of same-family relay pairs that share an AS.
    pub p_same_as: f64,
    /// False when there are no same-family pairs; `p_same_as` is then 0.
    pub p_same_as_defined: bool,
    /// Size of each family.
    pub sizes: Vec<usize>,
}

/// Relays without an AS count as being in an AS of their own.
pub fn compute_family_stats(consensus: &Consensus, partition: &FamilyPartition) -> FamilyStats {
    let asn_of: HashMap<Fingerprint, Option<Asn>> = consensus.relays.iter().map(|r| (r.fingerprint, r.asn)).collect();
    let mut pairs = 0u64;
    let mut same = 0u64;
    let mut sizes = Vec::new();
    let mut in_family = 0usize;
    for (_, members) in partition.groups() {
        sizes.push(members.len());
        in_family += members.len();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                pairs += 1;
                let (x, y) = (asn_of.get(a).copied().flatten(), asn_of.get(b).copied().flatten());
                if x.is_some() && x == y {
                    same += 1;
                }
            }
        }
    }
    FamilyStats {
        p_fam: if consensus.is_empty() { 0.0 } else { in_family as f64 / consensus.len() as f64 },
        p_same_as: if pairs == 0 { 0.0 } else { same as f64 / pairs as f64 },
        p_same_as_defined: pairs > 0,
        sizes,
    }
}

/// Per-relay sampling weights for each role, balanced over relay counts
/// the same way vertical role factors are balanced over weights.
pub fn derive_role_sampling_weights(
    counts: RoleTotals<u64>,
    role_weights: RoleFactors,
) -> Result<ResolvedGroupFactors> {
    derive_group_factors(counts.guard as f64, counts.exit as f64, counts.both as f64, role_weights)
}

fn draw_index<R: Rng + ?Sized>(rng: &mut R, len: usize) -> usize {
    // u64 keeps the stream identical on 32- and 64-bit targets.
    rng.random_range(0..len as u64) as usize
}

/// Draws `count` base relays with replacement: uniformly, or with
/// probability proportional to each relay's role factor.
pub fn sample_base_relays<'a, R: Rng + ?Sized>(
    consensus: &'a Consensus,
    count: usize,
    factors: Option<&ResolvedGroupFactors>,
    rng: &mut R,
) -> Result<Vec<&'a Relay>> {
    if consensus.is_empty() {
        return Err(Error::EmptyConsensus);
    }
    let relays = &consensus.relays;
    match factors {
        None => Ok((0..count).map(|_| &relays[draw_index(rng, relays.len())]).collect()),
        Some(f) => {
            let weights = relays.iter().map(|r| f.for_role(role_of(r)));
            let dist =
                WeightedIndex::new(weights).map_err(|e| Error::Parameter(format!("cannot sample base relays: {e}")))?;
            Ok((0..count).map(|_| &relays[dist.sample(rng)]).collect())
        }
    }
}

/// A fresh fingerprint and `syn<8 hex>` nickname not present in the given
/// sets.
pub fn generate_identity<R: Rng + ?Sized>(
    existing_fingerprints: &HashSet<Fingerprint>,
    existing_nicknames: &HashSet<Nickname>,
    rng: &mut R,
) -> (Fingerprint, Nickname) {
    let fingerprint = loop {
        let fp = Fingerprint::from_bytes(rng.random());
        if !existing_fingerprints.contains(&fp) {
            break fp;
        }
    };
    let nickname = loop {
        let nick = Nickname::new(format!("syn{:08x}", rng.random::<u32>())).expect("valid nickname");
        if !existing_nicknames.contains(&nick) {
            break nick;
        }
    };
    (fingerprint, nickname)
}

/// First usable host address and number of usable hosts. Network and
/// broadcast addresses are excluded for prefixes shorter than /31.
fn host_range(net: &Ipv4Net) -> (u32, u64) {
    let network = u32::from(net.network());
    match net.prefix_len() {
        32 => (network, 1),
        31 => (network, 2),
        len => (network + 1, (1u64 << (32 - len)) - 2),
    }
}

const RANDOM_ATTEMPTS: usize = 512;

/// Uniform draw over the usable hosts of `prefixes` (so each prefix is
/// picked in proportion to its size) among addresses passing `accept`.
fn sample_address<R: Rng + ?Sized>(
    prefixes: &[Ipv4Net],
    accept: impl Fn(Ipv4Addr) -> bool,
    rng: &mut R,
    space: impl FnOnce() -> String,
) -> Result<Ipv4Addr> {
    let ranges: Vec<(u32, u64)> = prefixes.iter().map(host_range).collect();
    let total: u64 = ranges.iter().map(|(_, n)| n).sum();
    let at = |mut k: u64| {
        for (first, n) in &ranges {
            if k < *n {
                return Ipv4Addr::from(first + k as u32);
            }
            k -= n;
        }
        unreachable!("index within total")
    };
    if total > 0 {
        for _ in 0..RANDOM_ATTEMPTS {
            let addr = at(rng.random_range(0..total));
            if accept(addr) {
                return Ok(addr);
            }
        }
    }
    // The space is (nearly) full: count what is left and pick among it.
    let free = (0..total).filter(|k| accept(at(*k))).count() as u64;
    if free == 0 {
        return Err(Error::AddressExhausted(space()));
    }
    let mut pick = rng.random_range(0..free);
    for k in 0..total {
        let addr = at(k);
        if accept(addr) {
            if pick == 0 {
                return Ok(addr);
            }
            pick -= 1;
        }
    }
    unreachable!("free address counted above")
}

/// An unused address announced by `asn`.
///
/// Addresses whose longest-prefix match belongs to a different AS (a more
/// specific announcement inside one of `asn`'s prefixes) are skipped, so the
/// result always maps back to `asn`.
pub fn generate_ip_in_as<R: Rng + ?Sized>(
    table: &AsnTable,
    asn: Asn,
    exclude: &HashSet<Ipv4Addr>,
    rng: &mut R,
) -> Result<Ipv4Addr> {
    let prefixes = table.prefixes(asn);
    if prefixes.is_empty() {
        return Err(Error::NoPrefix(asn));
    }
    sample_address(
        prefixes,
        |addr| !exclude.contains(&addr) && table.lookup(addr) == Some(asn),
        rng,
        || format!("AS{asn}"),
    )
}

/// An unused address in the /16 that contains `base`.
pub fn generate_ip_in_slash16<R: Rng + ?Sized>(
    base: Ipv4Addr,
    exclude: &HashSet<Ipv4Addr>,
    rng: &mut R,
) -> Result<Ipv4Addr> {
    let net = Ipv4Net::new(base, 16).expect("16 <= 32").trunc();
    sample_address(&[net], |addr| !exclude.contains(&addr), rng, || net.to_string())
}

/// What happened while assigning families to new relays.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FamilyReport {
    pub joined_existing: usize,
    pub in_new_families: usize,
    pub new_families: usize,
    /// New families that ended with a single member and were dropped.
    pub dissolved: usize,
    /// Family-bound relays had to found new families because the original
    /// consensus has none to join.
    pub no_existing_families: bool,
    /// New families were needed but the statistics hold no sizes; size 2
    /// was used.
    pub no_size_distribution: bool,
}

struct OpenFamily {
    target: usize,
    members: Vec<Fingerprint>,
}

/// Extends `partition` with family memberships for `new_relays`.
///
/// Per new relay, in order:
///
/// 1. draw `u`; the relay stays family-less unless `u < stats.p_fam`;
/// 2. draw `u`; with `u < p_new` it goes to a new family, otherwise it
///    joins an existing one (forced to new when none exist, without a draw);
/// 3. joining: draw `u`; with `u < stats.p_same_as` the reference relay is
///    drawn from in-family original relays in the new relay's AS (all
///    in-family relays if there are none), otherwise from all in-family
///    relays; the new relay joins the reference relay's family;
/// 4. new family: join the currently open new family, or open one with a
///    size drawn from `stats.sizes`. A family closes once it reaches its
///    size. A last open family with a single member is dissolved.
pub fn assign_families<R: Rng + ?Sized>(
    new_relays: &[Relay],
    original: &Consensus,
    partition: &FamilyPartition,
    stats: &FamilyStats,
    p_new: f64,
    rng: &mut R,
) -> Result<(FamilyPartition, FamilyReport)> {
    let mut out = partition.clone();
    let mut report = FamilyReport::default();

    let in_family: Vec<&Relay> =
        original.relays.iter().filter(|r| partition.family_of(&r.fingerprint).is_some()).collect();
    let mut in_family_by_asn: HashMap<Asn, Vec<&Relay>> = HashMap::new();
    for r in &in_family {
        if let Some(asn) = r.asn {
            in_family_by_asn.entry(asn).or_default().push(r);
        }
    }

    let mut open: Option<OpenFamily> = None;
    let close = |family: OpenFamily, out: &mut FamilyPartition, report: &mut FamilyReport| -> Result<()> {
        if family.members.len() >= 2 {
            report.new_families += 1;
            report.in_new_families += family.members.len();
            out.insert_group(family.members)?;
        } else {
            report.dissolved += family.members.len();
        }
        Ok(())
    };

    for relay in new_relays {
        if rng.random::<f64>() >= stats.p_fam {
            continue;
        }
        let found_new = if in_family.is_empty() {
            report.no_existing_families = true;
            true
        } else {
            rng.random::<f64>() < p_new
        };

        if !found_new {
            let restrict = rng.random::<f64>() < stats.p_same_as;
            let same_as = relay.asn.and_then(|asn| in_family_by_asn.get(&asn));
            let candidates: &[&Relay] = match same_as {
                Some(list) if restrict => list,
                _ => &in_family,
            };
            let reference = candidates[draw_index(rng, candidates.len())];
            let id: FamilyId = partition.family_of(&reference.fingerprint).expect("in-family relay");
            out.join(id, relay.fingerprint)?;
            report.joined_existing += 1;
            continue;
        }

        let family = match open.take() {
            Some(f) => f,
            None => {
                let target = if stats.sizes.is_empty() {
                    report.no_size_distribution = true;
                    2
                } else {
                    stats.sizes[draw_index(rng, stats.sizes.len())]
                };
                OpenFamily { target, members: Vec::new() }
            }
        };
        let mut family = family;
        family.members.push(relay.fingerprint);
        if family.members.len() >= family.target {
            close(family, &mut out, &mut report)?;
        } else {
            open = Some(family);
        }
    }
    if let Some(family) = open {
        close(family, &mut out, &mut report)?;
    }
    Ok((out, report))
}

/// Result of [`scale_horizontal`].
#[derive(Clone, Debug)]
pub struct HorizontalOutcome {
    pub consensus: Consensus,
    pub partition: FamilyPartition,
    pub stats: FamilyStats,
    pub families: FamilyReport,
}

/// Grows `consensus` by `config.factor`, adding `round((f − 1)·|C|)` new
/// relays after the original ones. Original relays are left untouched.
///
/// The consensus should already be annotated with `table` (see
/// [`crate::io::annotate_asns`]); relays without an AS get addresses from
/// their base relay's /16. An empty table is fine.
pub fn scale_horizontal(
    consensus: &Consensus,
    partition: &FamilyPartition,
    table: &AsnTable,
    config: &HorizontalConfig,
) -> Result<HorizontalOutcome> {
    config.validate()?;
    if consensus.is_empty() {
        return Err(Error::EmptyConsensus);
    }
    partition.check_against(consensus)?;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let stats = compute_family_stats(consensus, partition);
    let factors = config.role_weights.map(|w| derive_role_sampling_weights(group_counts(consensus), w)).transpose()?;

    let count = new_relay_count(consensus.len(), config.factor);
    let bases = sample_base_relays(consensus, count, factors.as_ref(), &mut rng)?;

    let mut fingerprints = consensus.fingerprints();
    let mut nicknames: HashSet<Nickname> = consensus.relays.iter().map(|r| r.nickname.clone()).collect();
    let mut addresses: HashSet<Ipv4Addr> = consensus.relays.iter().map(|r| r.address).collect();

    let mut new_relays = Vec::with_capacity(count);
    for base in bases {
        let (fingerprint, nickname) = generate_identity(&fingerprints, &nicknames, &mut rng);
        let address = match base.asn {
            Some(asn) => generate_ip_in_as(table, asn, &addresses, &mut rng)?,
            None => generate_ip_in_slash16(base.address, &addresses, &mut rng)?,
        };
        fingerprints.insert(fingerprint);
        nicknames.insert(nickname.clone());
        addresses.insert(address);

        let mut relay = base.clone();
        relay.descriptor_digest = digest_for(&fingerprint);
        relay.fingerprint = fingerprint;
        relay.nickname = nickname;
        relay.address = address;
        relay.asn = base.asn.or_else(|| table.lookup(address));
        new_relays.push(relay);
    }

    let (partition, families) = assign_families(&new_relays, consensus, partition, &stats, config.p_new, &mut rng)?;

    let mut out = consensus.clone();
    out.relays.extend(new_relays);
    Ok(HorizontalOutcome { consensus: out, partition, stats, families })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::load_asn_table;
    use crate::model::testutil::*;
    use crate::model::RelayRole;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn with_asn(mut r: Relay, asn: Option<Asn>) -> Relay {
        r.asn = asn;
        r
    }

    #[test]
    fn config_validation() {
        assert!(HorizontalConfig::new(2.0, 0.5, 1).is_ok());
        assert!(HorizontalConfig::new(1.0, 0.5, 1).is_err());
        assert!(HorizontalConfig::new(2.0, 1.5, 1).is_err());
        assert!(HorizontalConfig::new(f64::INFINITY, 0.5, 1).is_err());
        assert_eq!(new_relay_count(100, 2.0), 100);
        assert_eq!(new_relay_count(3, 1.5), 2); // 1.5 rounds up
        assert_eq!(new_relay_count(10, 1.04), 0);
    }

    #[test]
    fn stats_single_pair() {
        let relays: Vec<Relay> = (1..=10).map(|i| with_asn(relay(i, 1, &[]), Some(65001))).collect();
        let c = consensus(relays);
        let p = FamilyPartition::from_groups(vec![vec![fp(1), fp(2)]]).unwrap();
        let s = compute_family_stats(&c, &p);
        assert_eq!((s.p_fam, s.p_same_as, s.p_same_as_defined), (0.2, 1.0, true));
        assert_eq!(s.sizes, [2]);
    }

    #[test]
    fn stats_no_families() {
        let c = consensus((1..=4).map(|i| relay(i, 1, &[])).collect());
        let s = compute_family_stats(&c, &FamilyPartition::new());
        assert_eq!((s.p_fam, s.p_same_as, s.p_same_as_defined), (0.0, 0.0, false));
        assert!(s.sizes.is_empty());
    }

    #[test]
    fn stats_pair_enumeration() {
        // A, B in AS 1, C in AS 2: pairs AB same, AC and BC different.
        let c = consensus(vec![
            with_asn(relay(1, 1, &[]), Some(1)),
            with_asn(relay(2, 1, &[]), Some(1)),
            with_asn(relay(3, 1, &[]), Some(2)),
            with_asn(relay(4, 1, &[]), None),
            with_asn(relay(5, 1, &[]), None),
        ]);
        let p = FamilyPartition::from_groups(vec![vec![fp(1), fp(2), fp(3)]]).unwrap();
        let s = compute_family_stats(&c, &p);
        assert!((s.p_same_as - 1.0 / 3.0).abs() < 1e-15);
        // Relays without AS never match each other.
        let p = FamilyPartition::from_groups(vec![vec![fp(4), fp(5)]]).unwrap();
        assert_eq!(compute_family_stats(&c, &p).p_same_as, 0.0);
    }

    #[test]
    fn role_sampling_weights() {
        let ones = RoleFactors::new(1.0, 1.0, 1.0).unwrap();
        let counts = RoleTotals { middle: 7, guard: 3, exit: 2, both: 1 };
        assert_eq!(derive_role_sampling_weights(counts, ones).unwrap(), ResolvedGroupFactors::uniform(1.0));
        let counts = RoleTotals { middle: 0, guard: 100, exit: 50, both: 50 };
        let f = derive_role_sampling_weights(counts, RoleFactors::new(1.0, 2.0, 3.0).unwrap()).unwrap();
        assert_eq!((f.guard, f.exit, f.both), (2.0, 4.0, 2.0));
        let counts = RoleTotals { middle: 0, guard: 10, exit: 5, both: 0 };
        let f = derive_role_sampling_weights(counts, RoleFactors::new(1.0, 2.0, 3.0).unwrap()).unwrap();
        assert_eq!((f.guard, f.exit), (2.0, 3.0));
    }

    #[test]
    fn single_relay_sampling() {
        let c = consensus(vec![relay(1, 5, &[])]);
        let draws = sample_base_relays(&c, 50, None, &mut rng(3)).unwrap();
        assert!(draws.iter().all(|r| r.fingerprint == fp(1)));
    }

    #[test]
    fn unit_factors_sample_uniformly() {
        let c = consensus((0..10).map(|i| relay(i, 1 + i as u64, &[])).collect());
        let draws = sample_base_relays(&c, 100_000, Some(&ResolvedGroupFactors::uniform(1.0)), &mut rng(11)).unwrap();
        let mut counts = [0f64; 10];
        for r in draws {
            counts[r.fingerprint.as_bytes()[19] as usize] += 1.0;
        }
        let expected = 10_000.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn role_factors_skew_sampling() {
        let c = consensus(vec![relay(1, 1, &["Guard"]), relay(2, 1, &["Exit"])]);
        let f = ResolvedGroupFactors { middle: 0.0, guard: 1.0, exit: 3.0, both: 0.0 };
        let draws = sample_base_relays(&c, 100_000, Some(&f), &mut rng(5)).unwrap();
        let exits = draws.iter().filter(|r| r.role() == RelayRole::ExitOnly).count() as f64;
        let share = exits / 100_000.0;
        assert!((share - 0.75).abs() < 0.05 * 0.75, "{share}");
    }

    #[test]
    fn all_zero_weights_rejected() {
        let c = consensus(vec![relay(1, 1, &[])]);
        let f = ResolvedGroupFactors::uniform(0.0);
        assert!(matches!(sample_base_relays(&c, 1, Some(&f), &mut rng(1)), Err(Error::Parameter(_))));
    }

    #[test]
    fn identities_are_fresh_and_deterministic() {
        let mut fps = HashSet::new();
        let mut nicks = HashSet::new();
        let mut r = rng(9);
        for _ in 0..10_000 {
            let (fp, nick) = generate_identity(&fps, &nicks, &mut r);
            let nick_text = nick.as_str();
            assert!(nick_text.len() == 11 && nick_text.starts_with("syn"));
            assert!(nick_text[3..].bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
            let hex = fp.to_string();
            assert!(hex.len() == 40 && hex.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_lowercase()));
            assert!(fps.insert(fp));
            assert!(nicks.insert(nick));
        }
        let a = generate_identity(&HashSet::new(), &HashSet::new(), &mut rng(42));
        let b = generate_identity(&HashSet::new(), &HashSet::new(), &mut rng(42));
        assert_eq!(a, b);
    }

    #[test]
    fn ip_in_single_prefix() {
        let t = load_asn_table("10.0.0.0/24 7\n").unwrap();
        let mut r = rng(1);
        for _ in 0..2000 {
            let ip = generate_ip_in_as(&t, 7, &HashSet::new(), &mut r).unwrap();
            let last = ip.octets()[3];
            assert!(ip.octets()[..3] == [10, 0, 0] && (1..=254).contains(&last), "{ip}");
        }
    }

    #[test]
    fn prefix_choice_proportional_to_size() {
        let t = load_asn_table("10.0.0.0/24 7\n10.1.0.0/16 7\n").unwrap();
        let mut r = rng(2);
        let draws = 200_000;
        let small = (0..draws)
            .filter(|_| generate_ip_in_as(&t, 7, &HashSet::new(), &mut r).unwrap().octets()[1] == 0)
            .count() as f64;
        let p = 254.0 / (254.0 + 65534.0);
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((small / draws as f64 - p).abs() < 4.0 * sd, "{} vs {p}", small / draws as f64);
    }

    #[test]
    fn ip_errors() {
        let t = load_asn_table("10.0.0.0/30 7\n").unwrap();
        assert!(matches!(generate_ip_in_as(&t, 8, &HashSet::new(), &mut rng(1)), Err(Error::NoPrefix(8))));
        let full: HashSet<Ipv4Addr> = ["10.0.0.1", "10.0.0.2"].iter().map(|s| s.parse().unwrap()).collect();
        assert!(matches!(generate_ip_in_as(&t, 7, &full, &mut rng(1)), Err(Error::AddressExhausted(_))));
        let one: HashSet<Ipv4Addr> = ["10.0.0.1".parse().unwrap()].into();
        assert_eq!(generate_ip_in_as(&t, 7, &one, &mut rng(1)).unwrap(), "10.0.0.2".parse::<Ipv4Addr>().unwrap());
    }

    #[test]
    fn more_specific_foreign_prefix_is_avoided() {
        let t = load_asn_table("10.0.0.0/24 7\n10.0.0.0/25 8\n").unwrap();
        let mut r = rng(4);
        for _ in 0..500 {
            let ip = generate_ip_in_as(&t, 7, &HashSet::new(), &mut r).unwrap();
            assert_eq!(t.lookup(ip), Some(7));
        }
    }

    #[test]
    fn slash16_fallback() {
        let base: Ipv4Addr = "192.168.77.5".parse().unwrap();
        let ip = generate_ip_in_slash16(base, &HashSet::new(), &mut rng(1)).unwrap();
        assert_eq!(ip.octets()[..2], [192, 168]);
    }

    fn family_fixture() -> (Consensus, FamilyPartition) {
        let c = consensus((0..100).map(|i| with_asn(relay(i, 10, &[]), Some(1 + i % 3))).collect());
        let p = FamilyPartition::from_groups(vec![(0..4).map(fp).collect()]).unwrap();
        (c, p)
    }

    fn new_relays(n: u32) -> Vec<Relay> {
        (1000..1000 + n).map(|i| with_asn(relay(i, 10, &[]), Some(1))).collect()
    }

    #[test]
    fn no_family_probability_keeps_partition() {
        let (c, p) = family_fixture();
        let stats = FamilyStats { p_fam: 0.0, ..compute_family_stats(&c, &p) };
        let (out, report) = assign_families(&new_relays(50), &c, &p, &stats, 0.5, &mut rng(1)).unwrap();
        assert_eq!(out, p);
        assert_eq!(report, FamilyReport::default());
    }

    #[test]
    fn zero_p_new_joins_the_only_family() {
        let (c, p) = family_fixture();
        let stats = FamilyStats { p_fam: 0.5, ..compute_family_stats(&c, &p) };
        let news = new_relays(200);
        let (out, report) = assign_families(&news, &c, &p, &stats, 0.0, &mut rng(1)).unwrap();
        assert_eq!(out.family_count(), 1);
        assert_eq!(report.joined_existing, out.relay_count() - 4);
        assert!(report.joined_existing > 60);
    }

    #[test]
    fn new_families_use_observed_sizes() {
        let (c, _) = family_fixture();
        let p = FamilyPartition::from_groups(vec![(0..3).map(fp).collect(), (10..13).map(fp).collect()]).unwrap();
        let stats = FamilyStats { p_fam: 1.0, ..compute_family_stats(&c, &p) };
        let news = new_relays(31);
        let (out, report) = assign_families(&news, &c, &p, &stats, 1.0, &mut rng(1)).unwrap();
        // 31 relays in families of 3: ten full families, one dissolved.
        assert_eq!(report.new_families, 10);
        assert_eq!(report.dissolved, 1);
        assert_eq!(out.family_count(), 12);
        assert!(out.groups().all(|(_, m)| m.len() == 3));
    }

    #[test]
    fn no_existing_family_forces_new_ones() {
        let c = consensus((0..10).map(|i| relay(i, 1, &[])).collect());
        let stats = FamilyStats { p_fam: 1.0, p_same_as: 0.0, p_same_as_defined: false, sizes: vec![] };
        let (out, report) =
            assign_families(&new_relays(6), &c, &FamilyPartition::new(), &stats, 0.0, &mut rng(1)).unwrap();
        assert!(report.no_existing_families && report.no_size_distribution);
        assert_eq!(out.family_count(), 3);
    }

    #[test]
    fn same_as_preference() {
        // Two families in different ASes; p_same_as = 1 sends AS-1 relays to
        // the AS-1 family only.
        let c = consensus((0..4).map(|i| with_asn(relay(i, 1, &[]), Some(if i < 2 { 1 } else { 2 }))).collect());
        let p = FamilyPartition::from_groups(vec![vec![fp(0), fp(1)], vec![fp(2), fp(3)]]).unwrap();
        let stats = FamilyStats { p_fam: 1.0, p_same_as: 1.0, p_same_as_defined: true, sizes: vec![2, 2] };
        let (out, _) = assign_families(&new_relays(40), &c, &p, &stats, 0.0, &mut rng(8)).unwrap();
        let target = out.family_of(&fp(0)).unwrap();
        assert_eq!(out.members(target).len(), 42);
    }

    fn scaling_fixture() -> (Consensus, FamilyPartition, AsnTable) {
        let table = load_asn_table("10.0.0.0/16 1\n10.1.0.0/16 2\n172.16.0.0/12 3\n").unwrap();
        let relays = (0..200u32)
            .map(|i| {
                let mut r = relay(i, 1 + (i as u64 * 37) % 500, if i % 3 == 0 { &["Guard"] } else { &["Fast"] });
                r.address = match i % 4 {
                    0 => Ipv4Addr::new(10, 0, (i / 256) as u8, (i % 250 + 1) as u8),
                    1 => Ipv4Addr::new(10, 1, 0, (i % 250 + 1) as u8),
                    2 => Ipv4Addr::new(172, 16, 1, (i % 250 + 1) as u8),
                    _ => Ipv4Addr::new(198, 51, 100, (i % 250 + 1) as u8),
                };
                r.preserved.after_s.push("v Tor 0.4.8.9".to_string());
                r
            })
            .collect();
        let c = crate::io::annotate_asns(&consensus(relays), &table);
        let p = FamilyPartition::from_groups(vec![(0..5).map(fp).collect(), (10..12).map(fp).collect()]).unwrap();
        (c, p, table)
    }

    #[test]
    fn horizontal_contract() {
        let (c, p, t) = scaling_fixture();
        let out = scale_horizontal(&c, &p, &t, &HorizontalConfig::new(2.0, 0.5, 7).unwrap()).unwrap();
        assert_eq!(out.consensus.len(), 400);
        assert_eq!(&out.consensus.relays[..200], &c.relays[..]);
        let weights: HashSet<u64> = c.relays.iter().map(|r| r.weight).collect();
        let addrs: HashSet<Ipv4Addr> = out.consensus.relays.iter().map(|r| r.address).collect();
        assert_eq!(addrs.len(), 400);
        for r in &out.consensus.relays[200..] {
            assert!(weights.contains(&r.weight));
            assert_eq!(r.preserved.after_s, ["v Tor 0.4.8.9"]);
            match r.asn {
                Some(asn) => assert_eq!(t.lookup(r.address), Some(asn)),
                None => assert_eq!(r.address.octets()[..2], [198, 51]),
            }
        }
        out.partition.check_against(&out.consensus).unwrap();
        assert!(out.partition.groups().all(|(_, m)| m.len() >= 2));
        let fps = out.consensus.fingerprints();
        assert_eq!(fps.len(), 400);
        // Valid output document.
        let text = crate::io::serialize_consensus(&out.consensus).unwrap();
        assert_eq!(crate::io::parse_consensus(&text).unwrap().len(), 400);
    }

    #[test]
    fn horizontal_is_deterministic() {
        let (c, p, t) = scaling_fixture();
        let cfg = HorizontalConfig::new(1.5, 0.3, 99).unwrap();
        let a = scale_horizontal(&c, &p, &t, &cfg).unwrap();
        let b = scale_horizontal(&c, &p, &t, &cfg).unwrap();
        assert_eq!(a.consensus, b.consensus);
        assert_eq!(a.partition, b.partition);
        let other = scale_horizontal(&c, &p, &t, &HorizontalConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(other.consensus, a.consensus);
    }

    #[test]
    fn horizontal_role_weights_skew_new_relays() {
        let (c, p, t) = scaling_fixture();
        let cfg =
            HorizontalConfig::new(3.0, 0.5, 1).unwrap().with_role_weights(RoleFactors::new(1.0, 0.0, 1.0).unwrap());
        let out = scale_horizontal(&c, &p, &t, &cfg).unwrap();
        assert!(out.consensus.relays[200..].iter().all(|r| r.role() == RelayRole::Middle));
    }

    #[test]
    fn horizontal_rejects_foreign_partition() {
        let (c, _, t) = scaling_fixture();
        let p = FamilyPartition::from_groups(vec![vec![fp(5000), fp(5001)]]).unwrap();
        let cfg = HorizontalConfig::new(2.0, 0.5, 1).unwrap();
        assert!(matches!(scale_horizontal(&c, &p, &t, &cfg), Err(Error::UnknownFingerprint(_))));
    }
}
