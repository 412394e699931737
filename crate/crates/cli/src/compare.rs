//! Difference report between two runs: density differences per shared dump
//! and deltas of the scalar phases both runs report.

use std::path::Path;
use std::time::Instant;

use ablab::path::wrap_pi;
use ablab::tdse::read_dump;
use serde_json::json;

use crate::manifest::{Manifest, RunDir};
use crate::{CliError, CompareArgs};

/// Summary entries compared as phases (difference wrapped to (−π, π]).
const PHASE_KEYS: [&str; 3] = ["fringe_phase", "go_alpha", "alpha"];

fn stem_of(dir: &Path, rel: &str) -> std::path::PathBuf {
    dir.join(rel.strip_suffix(".bin").unwrap_or(rel))
}

pub fn run(args: &CompareArgs) -> Result<Manifest, CliError> {
    let started = Instant::now();
    let (a, dir_a) = Manifest::read(&args.run_a)?;
    let (b, dir_b) = Manifest::read(&args.run_b)?;
    if a.mode != b.mode {
        return Err(CliError::config(format!("cannot compare a {} run with a {} run", a.mode, b.mode)));
    }
    let mut rows: Vec<(String, String, f64)> = vec![];
    let mut overall_max: f64 = 0.0;
    let mut overall_l2: f64 = 0.0;
    let mut shared = 0;
    for oa in a.output("density") {
        let Some(ob) = b.output("density").find(|o| o.path == oa.path) else { continue };
        let (ha, ra) = read_dump(&stem_of(&dir_a, &oa.path)).map_err(CliError::invalid)?;
        let (hb, rb) = read_dump(&stem_of(&dir_b, &ob.path)).map_err(CliError::invalid)?;
        if ha.shape != hb.shape || ha.spacing != hb.spacing || ha.origin != hb.origin {
            return Err(CliError::config(format!("{} is on different grids in the two runs", oa.path)));
        }
        let max = ra.iter().zip(&rb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let l2 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() * ha.spacing;
        overall_max = overall_max.max(max);
        overall_l2 = overall_l2.max(l2);
        rows.push((oa.path.clone(), "max_abs_diff".into(), max));
        rows.push((oa.path.clone(), "l2_diff".into(), l2));
        shared += 1;
    }
    let mut phases = serde_json::Map::new();
    for key in PHASE_KEYS {
        if let (Some(x), Some(y)) = (a.summary[key].as_f64(), b.summary[key].as_f64()) {
            let d = wrap_pi(y - x);
            rows.push((key.into(), "a".into(), x));
            rows.push((key.into(), "b".into(), y));
            rows.push((key.into(), "delta".into(), d));
            phases.insert(key.into(), json!(d));
        }
    }
    if shared == 0 && phases.is_empty() {
        return Err(CliError::config("the runs share no density dumps or phase results"));
    }
    if shared > 0 {
        rows.push(("all_densities".into(), "max_abs_diff".into(), overall_max));
        rows.push(("all_densities".into(), "max_l2_diff".into(), overall_l2));
    }

    let mut dir = RunDir::create(&args.out)?;
    let mut w = csv::Writer::from_path(dir.path("compare.csv")?).map_err(|e| CliError::io(e.into()))?;
    w.write_record(["item", "metric", "value"]).map_err(|e| CliError::io(e.into()))?;
    for (item, metric, v) in &rows {
        w.write_record([item.as_str(), metric.as_str(), &v.to_string()]).map_err(|e| CliError::io(e.into()))?;
    }
    w.flush().map_err(CliError::io)?;
    dir.register("compare.csv", "report");
    let checksums = |m: &Manifest| -> Vec<String> { m.outputs.iter().map(|o| o.sha256.clone()).collect() };
    let config = json!({
        "run_a": args.run_a,
        "run_b": args.run_b,
        "compared_mode": a.mode,
        "identical_outputs": checksums(&a) == checksums(&b),
    });
    let summary = json!({
        "shared_density_dumps": shared,
        "max_abs_density_diff": if shared > 0 { json!(overall_max) } else { json!(null) },
        "max_l2_density_diff": if shared > 0 { json!(overall_l2) } else { json!(null) },
        "phase_deltas": phases,
    });
    dir.finish("compare", config, started.elapsed().as_secs_f64(), summary)
}
