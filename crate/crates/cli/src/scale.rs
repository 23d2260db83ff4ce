use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ArgMatches;
use serde::Serialize;
use torsynth::horizontal::{scale_horizontal, HorizontalConfig};
use torsynth::io::{serialize_consensus, write_family_partition, AsnTable};
use torsynth::vertical::{scale_by_quantile, scale_by_role, scale_uniform, RoleFactors};
use torsynth::{Consensus, FamilyPartition};

use crate::files::{maybe_annotate, read_asn_table, read_consensus, read_partition, sha256_hex, write_atomic};
use crate::{FactorList, ScaleArgs, Triple};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    VerticalUniform { factor: f64 },
    VerticalRoles { middle: f64, guard: f64, exit: f64 },
    VerticalQuantiles { factors: Vec<f64> },
    Horizontal { factor: f64, p_new: f64, role_weights: Option<[f64; 3]>, seed: u64 },
}

impl Stage {
    fn describe(&self) -> String {
        match self {
            Stage::VerticalUniform { factor } => format!("--vertical {factor}"),
            Stage::VerticalRoles { middle, guard, exit } => {
                format!("--vertical-roles {middle},{guard},{exit}")
            }
            Stage::VerticalQuantiles { factors } => format!("--vertical-quantiles {factors:?}"),
            Stage::Horizontal { factor, .. } => format!("--horizontal {factor}"),
        }
    }
}

/// Stage flags in the order they appear on the command line. The n-th
/// horizontal stage (counting from 0) is seeded with `seed + n`.
fn collect_stages(args: &ScaleArgs, matches: &ArgMatches) -> anyhow::Result<Vec<Stage>> {
    fn indexed<T: Clone>(matches: &ArgMatches, id: &str, values: &[T]) -> Vec<(usize, T)> {
        matches.indices_of(id).map(|idx| idx.zip(values.iter().cloned()).collect()).unwrap_or_default()
    }

    enum Raw {
        Uniform(f64),
        Roles(Triple),
        Quantiles(FactorList),
        Horizontal(f64),
    }
    let mut raw: Vec<(usize, Raw)> = Vec::new();
    raw.extend(indexed(matches, "vertical", &args.vertical).into_iter().map(|(i, v)| (i, Raw::Uniform(v))));
    raw.extend(indexed(matches, "vertical_roles", &args.vertical_roles).into_iter().map(|(i, v)| (i, Raw::Roles(v))));
    raw.extend(
        indexed(matches, "vertical_quantiles", &args.vertical_quantiles)
            .into_iter()
            .map(|(i, v)| (i, Raw::Quantiles(v))),
    );
    raw.extend(indexed(matches, "horizontal", &args.horizontal).into_iter().map(|(i, v)| (i, Raw::Horizontal(v))));
    raw.sort_by_key(|(i, _)| *i);

    if raw.is_empty() {
        bail!("no scaling stage given (use --vertical, --vertical-roles, --vertical-quantiles or --horizontal)");
    }
    let has_horizontal = raw.iter().any(|(_, r)| matches!(r, Raw::Horizontal(_)));
    let seed = match (has_horizontal, args.seed) {
        (true, None) => bail!("--seed is required when a --horizontal stage is present"),
        (_, seed) => seed.unwrap_or(0),
    };

    let mut horizontal_index = 0u64;
    Ok(raw
        .into_iter()
        .map(|(_, r)| match r {
            Raw::Uniform(factor) => Stage::VerticalUniform { factor },
            Raw::Roles(Triple(middle, guard, exit)) => Stage::VerticalRoles { middle, guard, exit },
            Raw::Quantiles(FactorList(factors)) => Stage::VerticalQuantiles { factors },
            Raw::Horizontal(factor) => {
                let stage = Stage::Horizontal {
                    factor,
                    p_new: args.p_new,
                    role_weights: args.horizontal_roles.map(|Triple(m, g, e)| [m, g, e]),
                    seed: seed.wrapping_add(horizontal_index),
                };
                horizontal_index += 1;
                stage
            }
        })
        .collect())
}

fn apply_stage(
    stage: &Stage,
    consensus: &Consensus,
    partition: &FamilyPartition,
    table: &AsnTable,
) -> anyhow::Result<(Consensus, FamilyPartition)> {
    Ok(match stage {
        Stage::VerticalUniform { factor } => (scale_uniform(consensus, *factor)?, partition.clone()),
        Stage::VerticalRoles { middle, guard, exit } => {
            let factors = RoleFactors::new(*middle, *guard, *exit)?;
            (scale_by_role(consensus, factors)?, partition.clone())
        }
        Stage::VerticalQuantiles { factors } => (scale_by_quantile(consensus, factors)?, partition.clone()),
        Stage::Horizontal { factor, p_new, role_weights, seed } => {
            let mut config = HorizontalConfig::new(*factor, *p_new, *seed)?;
            if let Some([m, g, e]) = role_weights {
                config = config.with_role_weights(RoleFactors::new(*m, *g, *e)?);
            }
            let outcome = scale_horizontal(consensus, partition, table, &config)?;
            if outcome.families.no_existing_families {
                eprintln!("torsynth: note: no existing families to join; family-bound relays founded new ones");
            }
            (outcome.consensus, outcome.partition)
        }
    })
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct OutputRecord {
    relays: usize,
    total_weight: u64,
    families: usize,
    relays_in_families: usize,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    stages: Vec<Stage>,
    seed: Option<u64>,
    consensus: InputRecord,
    families: Option<InputRecord>,
    asn_db: Option<InputRecord>,
    output: OutputRecord,
}

fn record(path: &Path, text: &str) -> InputRecord {
    InputRecord { path: path.display().to_string(), sha256: sha256_hex(text) }
}

pub fn run(args: &ScaleArgs, matches: &ArgMatches) -> anyhow::Result<()> {
    let stages = collect_stages(args, matches)?;
    let input: PathBuf =
        args.input.clone().or_else(|| args.input_pos.clone()).context("no input consensus given (use --in <path>)")?;

    let (consensus, consensus_text) = read_consensus(&input)?;
    let asn = args.asn_db.as_deref().map(read_asn_table).transpose()?;
    let table = asn.as_ref().map(|(t, _)| t.clone()).unwrap_or_default();
    let mut consensus = maybe_annotate(consensus, asn.as_ref().map(|(t, _)| t));
    let families = args.families.as_deref().map(|p| read_partition(p, &consensus)).transpose()?;
    let mut partition = families.as_ref().map(|(p, _)| p.clone()).unwrap_or_default();

    for (n, stage) in stages.iter().enumerate() {
        let (c, p) = apply_stage(stage, &consensus, &partition, &table)
            .with_context(|| format!("stage {} ({})", n + 1, stage.describe()))?;
        consensus = c;
        partition = p;
    }

    let document = serialize_consensus(&consensus).context("serializing output")?;
    match &args.out {
        Some(path) => write_atomic(path, &document)?,
        None => std::io::stdout().lock().write_all(document.as_bytes()).context("writing output")?,
    }
    if let Some(path) = &args.families_out {
        write_atomic(path, &write_family_partition(&partition))?;
    }

    let manifest_path = args.manifest.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        })
    });
    if let Some(path) = manifest_path {
        let manifest = Manifest {
            tool: "torsynth",
            version: env!("CARGO_PKG_VERSION"),
            seed: args.seed,
            stages,
            consensus: record(&input, &consensus_text),
            families: families.as_ref().zip(args.families.as_deref()).map(|((_, text), p)| record(p, text)),
            asn_db: asn.as_ref().zip(args.asn_db.as_deref()).map(|((_, text), p)| record(p, text)),
            output: OutputRecord {
                relays: consensus.len(),
                total_weight: consensus.total_weight(),
                families: partition.family_count(),
                relays_in_families: partition.relay_count(),
            },
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        write_atomic(&path, &json)?;
    }
    Ok(())
}
