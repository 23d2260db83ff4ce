//! Vertical scaling: the relay set stays fixed and only weights change.
//!
//! Three weight transforms are provided: one factor for everybody
//! ([`scale_uniform`]), one factor per weight-rank bucket
//! ([`scale_by_quantile`]), and one factor per relay role
//! ([`scale_by_role`]).
//!
//! Role factors describe what should happen to the *whole* guard (or exit)
//! capacity. Relays flagged both guard and exit sit in both groups, so the
//! requested factors are first turned into per-group relay factors by
//! [`derive_group_factors`]: the shared group gets the smaller of the two
//! requested factors, and the other side's exclusive group is adjusted so
//! that its side's total still comes out at the requested multiple.

use crate::error::{Error, Result};
use crate::model::{group_weights, role_of, Consensus, RelayRole, RoleTotals};

/// Multiplies a weight by `factor` and rounds half away from zero.
///
/// A positive weight scaled by a positive factor never rounds to zero; it
/// is kept at 1 so the relay stays selectable. Zero stays zero.
pub fn scale_weight(weight: u64, factor: f64) -> u64 {
    if weight == 0 || factor <= 0.0 {
        return 0;
    }
    // `as` saturates for out-of-range floats.
    let scaled = (weight as f64 * factor).round() as u64;
    scaled.max(1)
}

fn check_factor(name: &str, f: f64) -> Result<()> {
    if !f.is_finite() || f < 0.0 {
        return Err(Error::Parameter(format!("{name} must be a finite non-negative number, got {f}")));
    }
    Ok(())
}

fn map_weights(consensus: &Consensus, mut factor_for: impl FnMut(usize) -> f64) -> Consensus {
    let mut out = consensus.clone();
    for (i, relay) in out.relays.iter_mut().enumerate() {
        relay.weight = scale_weight(relay.weight, factor_for(i));
    }
    out
}

pub fn scale_uniform(consensus: &Consensus, factor: f64) -> Result<Consensus> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(Error::Parameter(format!("uniform factor must be positive, got {factor}")));
    }
    Ok(map_weights(consensus, |_| factor))
}

/// Sizes of `buckets` contiguous buckets over `n` items: as equal as
/// possible, with the larger buckets first.
pub fn bucket_sizes(n: usize, buckets: usize) -> Vec<usize> {
    let (base, extra) = (n / buckets, n % buckets);
    (0..buckets).map(|k| base + usize::from(k < extra)).collect()
}

/// Scales relays by weight rank.
///
/// Relays are ordered by ascending weight (ties by fingerprint) and cut into
/// `factors.len()` contiguous buckets; bucket `k` is scaled by `factors[k]`.
/// Relay order in the output matches the input.
pub fn scale_by_quantile(consensus: &Consensus, factors: &[f64]) -> Result<Consensus> {
    if factors.is_empty() {
        return Err(Error::Parameter("quantile factor list is empty".to_string()));
    }
    for f in factors {
        check_factor("quantile factor", *f)?;
    }
    let mut order: Vec<usize> = (0..consensus.len()).collect();
    order.sort_by_key(|&i| (consensus.relays[i].weight, consensus.relays[i].fingerprint));

    let mut factor_of = vec![0.0; consensus.len()];
    let mut ranked = order.into_iter();
    for (factor, size) in factors.iter().zip(bucket_sizes(consensus.len(), factors.len())) {
        for idx in ranked.by_ref().take(size) {
            factor_of[idx] = *factor;
        }
    }
    Ok(map_weights(consensus, |i| factor_of[i]))
}

/// Requested factors for the middle, guard and exit capacity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoleFactors {
    pub middle: f64,
    pub guard: f64,
    pub exit: f64,
}

impl RoleFactors {
    pub fn new(middle: f64, guard: f64, exit: f64) -> Result<Self> {
        check_factor("middle factor", middle)?;
        check_factor("guard factor", guard)?;
        check_factor("exit factor", exit)?;
        Ok(RoleFactors { middle, guard, exit })
    }
}

/// Per-relay factors for each role group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedGroupFactors {
    pub middle: f64,
    pub guard: f64,
    pub exit: f64,
    pub both: f64,
}

impl ResolvedGroupFactors {
    pub fn uniform(f: f64) -> Self {
        ResolvedGroupFactors { middle: f, guard: f, exit: f, both: f }
    }

    pub fn for_role(&self, role: RelayRole) -> f64 {
        match role {
            RelayRole::Middle => self.middle,
            RelayRole::GuardOnly => self.guard,
            RelayRole::ExitOnly => self.exit,
            RelayRole::GuardAndExit => self.both,
        }
    }
}

/// Solves the exclusive group's factor so that
/// `requested · (exclusive + shared) = exclusive · x + shared · shared_factor`.
fn balance(side: &'static str, requested: f64, exclusive: f64, shared: f64, shared_factor: f64) -> Result<f64> {
    let missing = (requested - shared_factor) * shared;
    if exclusive > 0.0 {
        Ok(requested + missing / exclusive)
    } else if missing == 0.0 {
        // Nothing to move and nobody to move it to; the factor is unused.
        Ok(requested)
    } else {
        Err(Error::InfeasibleBalance { side })
    }
}

/// Turns requested guard/exit factors into per-group relay factors.
///
/// `guard_only`, `exit_only` and `both` are the group totals (weights for
/// vertical scaling, relay counts for horizontal sampling). The shared group
/// gets `min(guard, exit)`; the side with the larger request has its
/// exclusive group raised to make up the difference, so both
///
/// ```text
/// guard · (G + D) = G · f_G + D · f_D
/// exit  · (E + D) = E · f_E + D · f_D
/// ```
///
/// hold. All results are non-negative. The middle factor is returned as
/// `middle` unchanged.
///
/// ```
/// use torsynth::vertical::{derive_group_factors, RoleFactors};
///
/// let f = derive_group_factors(100.0, 50.0, 50.0, RoleFactors::new(1.0, 2.0, 3.0)?)?;
/// assert_eq!((f.guard, f.exit, f.both), (2.0, 4.0, 2.0));
/// # Ok::<(), torsynth::Error>(())
/// ```
pub fn derive_group_factors(
    guard_only: f64,
    exit_only: f64,
    both: f64,
    requested: RoleFactors,
) -> Result<ResolvedGroupFactors> {
    for (name, v) in [("guard-only total", guard_only), ("exit-only total", exit_only), ("shared total", both)] {
        check_factor(name, v)?;
    }
    let RoleFactors { middle, guard, exit } = RoleFactors::new(requested.middle, requested.guard, requested.exit)?;
    let shared = guard.min(exit);
    let (guard_factor, exit_factor) = if guard <= exit {
        (guard, balance("exit", exit, exit_only, both, shared)?)
    } else {
        (balance("guard", guard, guard_only, both, shared)?, exit)
    };
    Ok(ResolvedGroupFactors { middle, guard: guard_factor, exit: exit_factor, both: shared })
}

/// Scales every relay by the factor of its role group, with group factors
/// derived from the consensus's weight totals.
pub fn scale_by_role(consensus: &Consensus, factors: RoleFactors) -> Result<Consensus> {
    let resolved = resolve_for_weights(consensus, factors)?;
    Ok(map_weights(consensus, |i| resolved.for_role(role_of(&consensus.relays[i]))))
}

/// [`derive_group_factors`] applied to the weight totals of `consensus`.
pub fn resolve_for_weights(consensus: &Consensus, factors: RoleFactors) -> Result<ResolvedGroupFactors> {
    let w: RoleTotals<u64> = group_weights(consensus);
    derive_group_factors(w.guard as f64, w.exit as f64, w.both as f64, factors)
}
