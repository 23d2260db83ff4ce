use std::fmt::Write as _;

use torsynth::validation::{per_rank_deviation, weight_cdf};

use crate::files::{read_consensus, write_atomic};
use crate::ValidateArgs;

pub fn run(args: &ValidateArgs) -> anyhow::Result<()> {
    let (scaled, _) = read_consensus(&args.scaled)?;
    let (reference, _) = read_consensus(&args.reference)?;
    let report = per_rank_deviation(&scaled, &reference)?;
    println!("median_deviation_pct\tn_compared");
    println!("{}\t{}", report.median, report.n_compared);

    if let Some(path) = &args.cdf_out {
        let mut tsv = String::from("source\tweight\tcumshare\n");
        for (source, consensus) in [("scaled", &scaled), ("reference", &reference)] {
            for (weight, share) in weight_cdf(consensus, args.cdf_clip) {
                writeln!(tsv, "{source}\t{weight}\t{share}")?;
            }
        }
        write_atomic(path, &tsv)?;
    }
    Ok(())
}
