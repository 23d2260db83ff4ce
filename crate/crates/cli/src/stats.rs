use std::collections::BTreeMap;

use torsynth::horizontal::compute_family_stats;
use torsynth::model::{group_counts, group_weights};
use torsynth::FamilyPartition;

use crate::files::{maybe_annotate, read_asn_table, read_consensus, read_partition};
use crate::StatsArgs;

pub fn run(args: &StatsArgs) -> anyhow::Result<()> {
    let (consensus, _) = read_consensus(&args.path)?;
    let table = args.asn_db.as_deref().map(read_asn_table).transpose()?;
    let consensus = maybe_annotate(consensus, table.as_ref().map(|(t, _)| t));
    let partition = match &args.families {
        Some(path) => read_partition(path, &consensus)?.0,
        None => FamilyPartition::new(),
    };

    let counts = group_counts(&consensus);
    let weights = group_weights(&consensus);
    let fam = compute_family_stats(&consensus, &partition);
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for size in &fam.sizes {
        *histogram.entry(*size).or_default() += 1;
    }
    let histogram: Vec<String> = histogram.iter().map(|(size, n)| format!("{size}:{n}")).collect();
    let mean = if consensus.is_empty() { 0.0 } else { consensus.total_weight() as f64 / consensus.len() as f64 };

    let rows: Vec<(&str, String)> = vec![
        ("relays", consensus.len().to_string()),
        ("total_weight", consensus.total_weight().to_string()),
        ("mean_weight", mean.to_string()),
        ("count_middle", counts.middle.to_string()),
        ("count_guard", counts.guard.to_string()),
        ("count_exit", counts.exit.to_string()),
        ("count_guard_exit", counts.both.to_string()),
        ("weight_middle", weights.middle.to_string()),
        ("weight_guard", weights.guard.to_string()),
        ("weight_exit", weights.exit.to_string()),
        ("weight_guard_exit", weights.both.to_string()),
        ("relays_with_asn", consensus.relays.iter().filter(|r| r.asn.is_some()).count().to_string()),
        ("families", partition.family_count().to_string()),
        ("p_fam", fam.p_fam.to_string()),
        ("p_same_as", if fam.p_same_as_defined { fam.p_same_as.to_string() } else { String::new() }),
        ("family_sizes", histogram.join(" ")),
    ];
    println!("metric\tvalue");
    for (k, v) in rows {
        println!("{k}\t{v}");
    }
    Ok(())
}
