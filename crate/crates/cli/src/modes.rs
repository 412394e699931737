//! One runner per experiment mode. Inputs are validated and the cheap setup
//! is built first (failures there exit with status 2); the expensive part
//! follows and its failures exit with status 1.

use std::f64::consts::TAU;
use std::time::Instant;

use ablab::electric::{electric_flux, ElectricConfig};
use ablab::gauge::{ab_potential, loop_flux, VectorPotential};
use ablab::geometry::{trace_broken_ray, Scene};
use ablab::optics::{interference_intensity, predict_two_beam};
use ablab::path::{winding_numbers, wrap_pi, Loop};
use ablab::recovery::{design_measurements, recover_from_measurements, Beta, FluxSystem};
use ablab::tdse::{
    build_lattice, init_packet, meeting_steps, two_beam_experiment_with, write_complex, write_density,
    write_density_values, write_probe_csv, Probe, ProbeRecord, Propagator,
};
use ablab::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    ElectricParams, ExperimentConfig, FluxParams, GoParams, LoopSpec, Mode, OracleKind, RaySeed, RecoverParams,
    TdseParams, TraceParams, TwoBeamParams,
};
use crate::manifest::{Manifest, RunDir};
use crate::{CliError, RunArgs};

/// What a runner hands back: the resolved parameters to echo and a summary.
struct Finished {
    params: serde_json::Value,
    summary: serde_json::Value,
}

pub fn run(mode: Mode, args: &RunArgs) -> Result<Manifest, CliError> {
    if !(args.tolerance > 0.0 && args.tolerance < 1.0) {
        return Err(CliError::config("--tolerance must lie in (0, 1)"));
    }
    let cfg = ExperimentConfig::load(&args.config, mode)?;
    let mut dir = RunDir::create(&args.out)?;
    let started = Instant::now();
    let done = match mode {
        Mode::Trace => trace(&cfg, args, &mut dir)?,
        Mode::Flux => flux(&cfg, args, &mut dir)?,
        Mode::GoPredict => go_predict(&cfg, args, &mut dir)?,
        Mode::TdseRun => tdse_run(&cfg, &mut dir)?,
        Mode::TwoBeam => two_beam(&cfg, args, &mut dir)?,
        Mode::ElectricAb => electric_ab(&cfg, &mut dir)?,
        Mode::Recover => recover(&cfg, args, &mut dir)?,
    };
    let config = json!({
        "config_path": args.config,
        "scene_path": cfg.scene_path,
        "scene": cfg.scene,
        "constants": cfg.constants,
        "params": done.params,
        "seed": args.seed,
        "tolerance": args.tolerance,
    });
    dir.finish(mode.name(), config, started.elapsed().as_secs_f64(), done.summary)
}

fn echo<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn potential(cfg: &ExperimentConfig, scene: &Scene) -> Result<VectorPotential, CliError> {
    ab_potential(scene, cfg.constants).map_err(CliError::invalid)
}

fn csv_writer(dir: &RunDir, rel: &str) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(dir.path(rel)?).map_err(|e| CliError::io(e.into()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::io(e.into())
}

/// Uniform exterior point of the scene, at least `margin` from every obstacle.
fn exterior_point(scene: &Scene, rng: &mut ChaCha8Rng, margin: f64) -> Vec2 {
    let b = scene.bound();
    loop {
        let p = Vec2::new(rng.gen_range(b.min.x..b.max.x), rng.gen_range(b.min.y..b.max.y));
        if scene.obstacles().iter().all(|d| (p - d.center).norm() > d.radius + margin) {
            return p;
        }
    }
}

fn trace(cfg: &ExperimentConfig, args: &RunArgs, dir: &mut RunDir) -> Result<Finished, CliError> {
    let scene = cfg.scene()?;
    let mut params: TraceParams = cfg.params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for _ in 0..params.random_rays {
        let start = exterior_point(scene, &mut rng, 1e-6);
        params.rays.push(RaySeed { start, direction: Vec2::from_angle(rng.gen_range(0.0..TAU)) });
    }
    if params.rays.is_empty() {
        return Err(CliError::config("trace needs `rays` or `random_rays`"));
    }
    let mut rays = vec![];
    for r in &params.rays {
        rays.push(trace_broken_ray(r.start, r.direction, scene, params.max_reflections).map_err(CliError::compute)?);
    }
    let mut w = csv_writer(dir, "trace.csv")?;
    w.write_record(["ray", "leg", "start_x", "start_y", "end_x", "end_y", "length", "reflects_off"]).map_err(csv_err)?;
    for (i, ray) in rays.iter().enumerate() {
        for (j, leg) in ray.legs.iter().enumerate() {
            let end = leg.end();
            let off = ray.reflecting_obstacles.get(j).map_or(String::new(), |k| k.to_string());
            w.write_record([
                i.to_string(),
                j.to_string(),
                leg.start.x.to_string(),
                leg.start.y.to_string(),
                end.x.to_string(),
                end.y.to_string(),
                leg.length.to_string(),
                off,
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(CliError::io)?;
    dir.register("trace.csv", "trace");
    dir.write_json("rays.json", "rays", &rays)?;
    let worst = rays.iter().map(|r| r.invariant_defect(scene)).fold(0.0, f64::max);
    Ok(Finished {
        params: echo(&params),
        summary: json!({
            "rays": rays.len(),
            "reflections": rays.iter().map(|r| r.reflection_points.len()).sum::<usize>(),
            "max_invariant_defect": worst,
        }),
    })
}

fn build_loop(spec: &LoopSpec) -> Result<Loop, CliError> {
    match spec {
        LoopSpec::Circle { center, radius, ccw } => {
            if !(*radius > 0.0) {
                return Err(CliError::config("circle radius must be positive"));
            }
            Ok(Loop::circle(*center, *radius, *ccw))
        }
        LoopSpec::Polygon { vertices } => Loop::polygon(vertices).map_err(CliError::invalid),
    }
}

fn flux(cfg: &ExperimentConfig, args: &RunArgs, dir: &mut RunDir) -> Result<Finished, CliError> {
    let scene = cfg.scene()?;
    let pot = potential(cfg, scene)?;
    let mut params: FluxParams = cfg.params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let b = scene.bound();
    let reach = 0.5 * b.width().min(b.height());
    let mut added = 0;
    while added < params.random_loops {
        let center = exterior_point(scene, &mut rng, 0.0);
        let spec = LoopSpec::Circle { center, radius: rng.gen_range(0.05 * reach..reach), ccw: true };
        if build_loop(&spec)?.check_clear(scene).is_ok() {
            params.loops.push(spec);
            added += 1;
        }
    }
    if params.loops.is_empty() {
        return Err(CliError::config("flux needs `loops` or `random_loops`"));
    }
    let mut loops = vec![];
    for spec in &params.loops {
        let lp = build_loop(spec)?;
        let w = winding_numbers(&lp, scene).map_err(CliError::invalid)?;
        loops.push((lp, w));
    }
    let mut w = csv_writer(dir, "flux.csv")?;
    w.write_record(["loop", "flux", "flux_mod_2pi", "winding_sum", "winding"]).map_err(csv_err)?;
    let mut worst: f64 = 0.0;
    for (i, (lp, wind)) in loops.iter().enumerate() {
        let f = loop_flux(&pot, lp, args.tolerance).map_err(CliError::compute)?;
        let expected: f64 = wind.iter().zip(scene.fluxes()).map(|(&n, a)| n as f64 * a).sum();
        worst = worst.max((f - expected).abs());
        let winding: Vec<String> = wind.iter().map(i64::to_string).collect();
        w.write_record([
            i.to_string(),
            f.to_string(),
            f.rem_euclid(TAU).to_string(),
            expected.to_string(),
            winding.join(";"),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io)?;
    dir.register("flux.csv", "flux");
    Ok(Finished {
        params: echo(&params),
        summary: json!({ "loops": loops.len(), "max_deviation_from_winding_sum": worst }),
    })
}

fn go_predict(cfg: &ExperimentConfig, args: &RunArgs, dir: &mut RunDir) -> Result<Finished, CliError> {
    let scene = cfg.scene()?;
    let pot = potential(cfg, scene)?;
    let params: GoParams = cfg.params()?;
    params.beam1.validate().map_err(CliError::invalid)?;
    params.beam2.validate().map_err(CliError::invalid)?;
    let go = predict_two_beam(scene, &pot, &params.beam1, &params.beam2, args.tolerance).map_err(CliError::compute)?;
    dir.write_json("prediction.json", "prediction", &go)?;
    Ok(Finished {
        params: echo(&params),
        summary: json!({ "alpha": go.alpha, "intensity": go.intensity, "winding": go.winding }),
    })
}

fn tdse_run(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Finished, CliError> {
    let scene = cfg.scene()?;
    let pot = potential(cfg, scene)?;
    let mut params: TdseParams = cfg.params()?;
    params.lattice.constants = cfg.constants;
    params.beam.validate().map_err(CliError::invalid)?;
    let lattice = build_lattice(scene, &pot, params.lattice, None).map_err(CliError::invalid)?;
    let spec = *lattice.spec();
    let init = init_packet(&lattice, &params.beam).map_err(CliError::invalid)?;
    let probes: Vec<Probe> = params
        .probes
        .iter()
        .map(|p| Probe { name: p.name.clone(), sites: lattice.sites_where(|x| (x - p.center).norm() <= p.radius) })
        .collect();

    let mut field = init.field;
    let p0 = field.probability();
    let mut records = vec![];
    let read = |step: usize, f: &ablab::tdse::Field, out: &mut Vec<ProbeRecord>| {
        for p in &probes {
            out.push(ProbeRecord { step, time: f.time, probe_name: p.name.clone(), value: f.probability_on(&p.sites) });
        }
    };
    read(0, &field, &mut records);
    let mut prop = Propagator::new(&lattice);
    let mut dumps = 0;
    for n in 1..=params.steps {
        prop.step(&mut field).map_err(CliError::compute)?;
        read(n, &field, &mut records);
        if params.dump_every > 0 && n % params.dump_every == 0 {
            let rel = format!("density/step_{n:06}");
            write_density(&dir.path(&rel)?, &field, spec.origin).map_err(CliError::compute)?;
            dir.register_dump(&rel, "density");
            dumps += 1;
        }
    }
    write_density(&dir.path("density_final")?, &field, spec.origin).map_err(CliError::compute)?;
    dir.register_dump("density_final", "density");
    write_complex(&dir.path("field_final")?, &field, spec.origin).map_err(CliError::compute)?;
    dir.register_dump("field_final", "field");
    if !probes.is_empty() {
        write_probe_csv(&dir.path("probes.csv")?, &records).map_err(CliError::compute)?;
        dir.register("probes.csv", "probes");
    }
    Ok(Finished {
        params: echo(&params),
        summary: json!({
            "steps": params.steps,
            "time": field.time,
            "probability_initial": p0,
            "probability_final": field.probability(),
            "clipped_fraction": init.clipped_fraction,
            "solver_iterations": prop.total_iterations,
            "intermediate_dumps": dumps,
        }),
    })
}

fn two_beam(cfg: &ExperimentConfig, args: &RunArgs, dir: &mut RunDir) -> Result<Finished, CliError> {
    let scene = cfg.scene()?;
    let pot = potential(cfg, scene)?;
    let mut params: TwoBeamParams = cfg.params()?;
    params.lattice.constants = cfg.constants;
    params.beam1.validate().map_err(CliError::invalid)?;
    params.beam2.validate().map_err(CliError::invalid)?;
    params.lattice.validate().map_err(CliError::invalid)?;
    if params.steps.is_none() {
        params.steps =
            Some(meeting_steps(scene, &params.beam1, &params.beam2, params.lattice.dt).map_err(CliError::invalid)?);
    }
    let steps = params.steps.unwrap_or_default();
    let go = predict_two_beam(scene, &pot, &params.beam1, &params.beam2, args.tolerance).map_err(CliError::compute)?;
    let rec = two_beam_experiment_with(scene, &pot, &params.beam1, &params.beam2, params.lattice, steps, params.options)
        .map_err(CliError::compute)?;
    dir.write_json("prediction.json", "prediction", &go)?;
    dir.write_json("fringe.json", "fringe", &rec)?;
    let mut w = csv_writer(dir, "screen.csv")?;
    w.write_record(["s", "density", "density_1", "density_2"]).map_err(csv_err)?;
    for i in 0..rec.screen.len() {
        w.write_record([
            rec.screen[i].to_string(),
            rec.density[i].to_string(),
            rec.density_1[i].to_string(),
            rec.density_2[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io)?;
    dir.register("screen.csv", "screen");
    write_density(&dir.path("density_final")?, &rec.field, params.lattice.origin).map_err(CliError::compute)?;
    dir.register_dump("density_final", "density");
    Ok(Finished {
        params: echo(&params),
        summary: json!({
            "go_alpha": go.alpha,
            "go_intensity": go.intensity,
            "fringe_phase": rec.fringe_phase,
            "phase_error": wrap_pi(rec.fringe_phase - go.alpha),
            "fringe_wavenumber": rec.fringe_wavenumber,
            "overlap": rec.overlap,
            "steps": rec.steps,
            "solver_iterations": rec.solver_iterations,
        }),
    })
}

fn electric_ab(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Finished, CliError> {
    let mut params: ElectricParams = cfg.params()?;
    let mut setup: ElectricConfig = match (&params.setup, params.reference_alpha) {
        (Some(s), None) => s.clone(),
        (None, Some(a)) => ElectricConfig::reference(a),
        _ => return Err(CliError::config("electric-ab needs exactly one of `setup` and `reference_alpha`")),
    };
    setup.constants = cfg.constants;
    setup.validate().map_err(CliError::invalid)?;
    if params.dump_every == 0 {
        return Err(CliError::config("dump_every must be positive"));
    }
    let flux = electric_flux(&setup.split(), &setup.constants).map_err(CliError::invalid)?;
    params.setup = Some(setup.clone());
    params.reference_alpha = None;

    let run = setup.run(params.mode).map_err(CliError::compute)?;
    let h = &run.history;
    let last = h.times.len().saturating_sub(1);
    let mut index = vec![];
    for (i, (t, rho)) in h.times.iter().zip(&h.densities).enumerate() {
        if i % params.dump_every != 0 && i != last {
            continue;
        }
        let rel = format!("history/density_{i:05}");
        write_density_values(&dir.path(&rel)?, &h.spec, *t, rho).map_err(CliError::compute)?;
        dir.register_dump(&rel, "density");
        index.push(json!({ "sample": i, "time": t, "stem": rel }));
    }
    dir.write_json("history.json", "history-index", &json!({ "lattice": h.spec, "dumps": index }))?;
    let mut w = csv_writer(dir, "mask_loss.csv")?;
    w.write_record(["step", "loss"]).map_err(csv_err)?;
    for (i, l) in run.mask_loss.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io)?;
    dir.register("mask_loss.csv", "mask-loss");
    Ok(Finished {
        params: echo(&params),
        summary: json!({
            "electric_flux": flux,
            "samples": h.times.len(),
            "dumps": index.len(),
            "split_probability": run.split_probability,
            "total_mask_loss": run.total_mask_loss,
            "final_probability": run.final_field.probability(),
        }),
    })
}

fn recover(cfg: &ExperimentConfig, args: &RunArgs, dir: &mut RunDir) -> Result<Finished, CliError> {
    let params: RecoverParams = cfg.params()?;
    let (system, truth) = match &params.system {
        Some(sys) => {
            sys.validate().map_err(CliError::invalid)?;
            (sys.clone(), None)
        }
        None => {
            let scene = cfg.scene()?;
            let pot = potential(cfg, scene)?;
            let circuits = design_measurements(scene).map_err(CliError::compute)?;
            let mut betas = vec![];
            for c in &circuits {
                let go = predict_two_beam(scene, &pot, &c.beam1, &c.beam2, args.tolerance).map_err(CliError::compute)?;
                betas.push(match params.oracle {
                    OracleKind::GoPhase => Beta::Phase(go.alpha),
                    OracleKind::GoIntensity => Beta::Intensity(interference_intensity(go.alpha)),
                });
            }
            dir.write_json("circuits.json", "circuits", &circuits)?;
            let sys = FluxSystem::new(circuits.iter().map(|c| c.winding.clone()).collect(), betas);
            (sys, Some(scene.fluxes()))
        }
    };
    dir.write_json("system.json", "system", &system)?;
    let est = recover_from_measurements(&system).map_err(CliError::compute)?;
    dir.write_json("estimate.json", "estimate", &est)?;
    let error = truth.map(|t| {
        est.alphas.iter().zip(&t).map(|(a, f)| wrap_pi(a - f).abs()).fold(0.0, f64::max)
    });
    Ok(Finished {
        params: echo(&params),
        summary: json!({
            "alphas": est.alphas,
            "unique": est.is_unique(),
            "residual": est.residual,
            "circuits": system.n.len(),
            "max_error_vs_scene": error,
        }),
    })
}
