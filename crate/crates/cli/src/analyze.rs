use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{NaiveDateTime, TimeDelta};
use torsynth::growth::{base_metrics, growth_rates, moving_average, BaseMetricPoint};

use crate::files::read_consensus;
use crate::AnalyzeArgs;

fn expand(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            entries.retain(|p| p.is_file());
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn duration(value: f64, unit_seconds: f64, name: &str) -> anyhow::Result<TimeDelta> {
    if !value.is_finite() || value < 0.0 {
        bail!("--{name} must be a non-negative number");
    }
    Ok(TimeDelta::milliseconds((value * unit_seconds * 1000.0).round() as i64))
}

fn metrics_of(path: &Path) -> anyhow::Result<BaseMetricPoint> {
    let (consensus, _) = read_consensus(path)?;
    base_metrics(&consensus).with_context(|| format!("{}", path.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render(
    points: &[BaseMetricPoint],
    delta_t: TimeDelta,
    window: TimeDelta,
    snap: TimeDelta,
) -> anyhow::Result<String> {
    let series = growth_rates(points, delta_t, snap)?;
    let h: HashMap<NaiveDateTime, f64> = moving_average(&series.horizontal(), window).into_iter().collect();
    let v: HashMap<NaiveDateTime, f64> = moving_average(&series.vertical(), window).into_iter().collect();
    let mut out = String::from("t\tn\tb\tH\tV\tH_smoothed\tV_smoothed\n");
    for (p, r) in series.points.iter().zip(&series.rates) {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.t.format("%Y-%m-%dT%H:%M:%SZ"),
            p.n,
            p.b,
            fmt_opt(r.horizontal),
            fmt_opt(r.vertical),
            fmt_opt(h.get(&p.t).copied()),
            fmt_opt(v.get(&p.t).copied()),
        )?;
    }
    for t in &series.skipped {
        eprintln!("torsynth: skipped {t}: zero denominator");
    }
    Ok(out)
}

pub fn run(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let delta_t = duration(args.delta_t, 86_400.0, "delta-t")?;
    if delta_t <= TimeDelta::zero() {
        bail!("--delta-t must be positive");
    }
    let window = duration(args.window, 86_400.0, "window")?;
    let snap = duration(args.snap, 3_600.0, "snap")?;

    let files = expand(&args.paths)?;
    // Parsing dominates; files are independent.
    let mut points: Vec<BaseMetricPoint> = std::thread::scope(|scope| {
        let workers = std::thread::available_parallelism().map_or(1, usize::from).min(files.len().max(1));
        let chunks: Vec<&[PathBuf]> = files.chunks(files.len().div_ceil(workers).max(1)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| scope.spawn(move || chunk.iter().map(|p| metrics_of(p)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("parser thread panicked")).collect::<anyhow::Result<Vec<_>>>()
    })?;
    if points.len() < 2 {
        bail!("need at least 2 consensuses, got {}", points.len());
    }
    points.sort_by_key(|p| p.t);
    if let Some(w) = points.windows(2).find(|w| w[0].t == w[1].t) {
        bail!("two consensuses share valid-after {}", w[0].t);
    }
    print!("{}", render(&points, delta_t, window, snap)?);
    Ok(())
}
