//! Experiment runners. Each produces in-memory artifacts; nothing here
//! touches the filesystem, which keeps runs easy to compare byte for byte.

use std::path::{Path, PathBuf};

use hypstokes::evolution::{
    dissipation_check, energy, evolve, fit_decay, observability_gramian, observation_quadrature,
    DecayFit, ModalState,
};
use hypstokes::geometry::{make_domain, DomainSpec};
use hypstokes::lame::convergence_study;
use hypstokes::raytracer::{check_gcc, trace as trace_ray, PhasePoint, RayEvent};
use hypstokes::spectral::{
    assemble_generator, quasimode_diagnostics, quasimode_pressure, quasimode_residual,
    resolvent_sweep, semiclassical_constants, spectrum,
};
use hypstokes::stokes::{stokes_eigenpairs_with, EigenOptions, EigenPair, MacGrid, ModalSystem};
use hypstokes::Vec2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, InitialState};
use crate::error::{LabError, Result};
use crate::output::{json_artifact, Artifact, Cell, CsvTable};

/// Run `kind` with `cfg`. A kind stated in the config must agree.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    if let Some(k) = cfg.experiment {
        if k != kind {
            return Err(LabError::config(
                "experiment",
                format!("config is for `{k}` but `{kind}` was requested"),
            ));
        }
    }
    let mut cfg = cfg.clone();
    cfg.experiment = Some(kind);
    cfg.validate()?;
    let cfg = &cfg;
    match kind {
        ExperimentKind::Trace => run_trace(cfg),
        ExperimentKind::Gcc => run_gcc(cfg),
        ExperimentKind::Simulate => run_simulate(cfg),
        ExperimentKind::Spectrum => run_spectrum(cfg),
        ExperimentKind::Resolvent => run_resolvent(cfg),
        ExperimentKind::Observability => run_observability(cfg),
        ExperimentKind::Lame => run_lame(cfg),
        ExperimentKind::Diagnostics => run_diagnostics(cfg),
    }
}

/// Run and write the artifacts into `dir`.
pub fn run_to_dir(kind: ExperimentKind, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    run(kind, cfg)?.iter().map(|a| a.write_to(dir)).collect()
}

fn eigenpairs(cfg: &ExperimentConfig) -> Result<Vec<EigenPair>> {
    let domain = make_domain(cfg.domain)?;
    let grid = MacGrid::for_domain(&domain, cfg.numerics.nx)?;
    let opts = EigenOptions {
        seed: cfg.seed,
        ..EigenOptions::default()
    };
    Ok(stokes_eigenpairs_with(grid, cfg.numerics.modes, &opts)?)
}

fn modal_system(cfg: &ExperimentConfig) -> Result<ModalSystem> {
    Ok(ModalSystem::new(eigenpairs(cfg)?, &cfg.damping)?)
}

/// Initial modal state described by the config.
pub fn initial_state(cfg: &ExperimentConfig, lambda: &[f64]) -> Result<ModalState> {
    let n = lambda.len();
    let s = match &cfg.initial {
        InitialState::Mode { index, amplitude } => {
            let mut u = vec![0.0; n];
            u[*index] = *amplitude;
            ModalState::new(u, vec![0.0; n])?
        }
        InitialState::Random { decay } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            let mut u = Vec::with_capacity(n);
            let mut w = Vec::with_capacity(n);
            for l in lambda {
                let s = l.powf(-0.5 * decay);
                u.push(unit() * s / l.sqrt());
                w.push(unit() * s);
            }
            ModalState::new(u, w)?
        }
        InitialState::Coefficients { u, w } => ModalState::new(u.clone(), w.clone())?,
    };
    Ok(s)
}

// ---------------------------------------------------------------------------

fn run_trace(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let domain = make_domain(cfg.domain)?;
    let r = &cfg.ray;
    let (s, c) = r.angle.sin_cos();
    let rho = PhasePoint::new(&domain, Vec2::new(r.position[0], r.position[1]), Vec2::new(c, s))
        .map_err(|e| match e {
            hypstokes::Error::Domain(m) => LabError::config("ray.position", m),
            other => other.into(),
        })?;
    let path = trace_ray(&domain, &cfg.damping, &rho, r.horizon)?;

    let mut t = CsvTable::new(&["index", "kind", "time", "x0", "y0", "x1", "y1", "duration"]);
    let mut clock = 0.0;
    for (k, e) in path.events.iter().enumerate() {
        let (kind, a, b) = match *e {
            RayEvent::FreeSegment { start, end, .. } => ("free", start, end),
            RayEvent::GlideArc { start, end, .. } => ("glide", start, end),
            RayEvent::Reflection { point, .. } => ("reflection", point, point),
            RayEvent::CornerStop { point } => ("corner", point, point),
            RayEvent::DampedEntry { point, .. } => ("damped_entry", point, point),
        };
        let time = match *e {
            RayEvent::DampedEntry { time, .. } => time,
            _ => clock,
        };
        t.push(vec![
            k.into(),
            kind.into(),
            time.into(),
            a.x.into(),
            a.y.into(),
            b.x.into(),
            b.y.into(),
            e.duration().into(),
        ]);
        clock += e.duration();
    }
    Ok(vec![
        t.artifact("trace_events.csv", cfg),
        json_artifact("trace.json", cfg, &path),
    ])
}

fn run_gcc(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let domain = make_domain(cfg.domain)?;
    let report = check_gcc(&domain, &cfg.damping, cfg.gcc.horizon, &cfg.gcc.sampler)?;
    Ok(vec![json_artifact("gcc.json", cfg, &report)])
}

#[derive(Serialize)]
struct SimulateSummary {
    modes: usize,
    initial_energy: f64,
    final_energy: f64,
    dissipated: f64,
    balance_defect: f64,
    fit: DecayFit,
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let ms = modal_system(cfg)?;
    let s0 = initial_state(cfg, &ms.lambda)?;
    let n = &cfg.numerics;
    let damped = cfg.damping.sup() > 0.0;
    let (_, trace) = evolve(&ms, &s0, n.t_end, n.dt, damped)?;
    let window = n.fit_window.map_or((0.0, n.t_end), |[a, b]| (a, b));
    let fit = fit_decay(&trace, window)?;

    let mut t = CsvTable::new(&["t", "energy", "dissipated"]);
    for s in &trace.samples {
        t.push(vec![s.t.into(), s.e.into(), s.d_cum.into()]);
    }
    let last = trace.final_sample().expect("trace has samples");
    let summary = SimulateSummary {
        modes: ms.len(),
        initial_energy: energy(&ms, &s0),
        final_energy: last.e,
        dissipated: last.d_cum,
        balance_defect: dissipation_check(&trace),
        fit,
    };
    Ok(vec![
        t.artifact("energy.csv", cfg),
        json_artifact("simulate.json", cfg, &summary),
    ])
}

fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let ms = modal_system(cfg)?;
    let g = assemble_generator(&ms);
    let mut report = spectrum(&g)?;
    if cfg.resolvent.sigmas.is_some() {
        report.resolvent_curve = resolvent_sweep(&g, &cfg.resolvent.grid())?;
    }
    let mut t = CsvTable::new(&["re", "im"]);
    for z in &report.eigenvalues {
        t.push(vec![z.re.into(), z.im.into()]);
    }
    Ok(vec![
        t.artifact("eigenvalues.csv", cfg),
        json_artifact("spectrum.json", cfg, &report),
    ])
}

fn run_resolvent(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let ms = modal_system(cfg)?;
    let curve = resolvent_sweep(&assemble_generator(&ms), &cfg.resolvent.grid())?;
    let mut t = CsvTable::new(&["sigma", "smin", "resolvent_norm"]);
    for p in &curve {
        t.push(vec![
            p.sigma.into(),
            p.smin.into(),
            p.resolvent_norm.unwrap_or(f64::INFINITY).into(),
        ]);
    }
    Ok(vec![t.artifact("resolvent.csv", cfg)])
}

#[derive(Serialize)]
struct ObservabilitySummary {
    modes: usize,
    horizon: f64,
    dt: f64,
    c_obs: f64,
    /// Largest relative gap between `xᵀGx` and direct quadrature.
    quadrature_check: Option<f64>,
    check_states: usize,
}

fn run_observability(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let ms = modal_system(cfg)?;
    let n = &cfg.numerics;
    let gram = observability_gramian(&ms, n.t_end, n.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    let mut worst: Option<f64> = None;
    for _ in 0..cfg.observability.check_states {
        let u: Vec<f64> = (0..ms.len()).map(|_| unit()).collect();
        let w: Vec<f64> = (0..ms.len()).map(|_| unit()).collect();
        let s = ModalState::new(u, w)?;
        let q = gram.quadratic_form(&s);
        let d = observation_quadrature(&ms, &s, n.t_end, n.dt)?;
        let rel = (q - d).abs() / d.abs().max(f64::MIN_POSITIVE);
        worst = Some(worst.map_or(rel, |m: f64| m.max(rel)));
    }
    let summary = ObservabilitySummary {
        modes: ms.len(),
        horizon: gram.horizon,
        dt: gram.dt,
        c_obs: gram.c_obs,
        quadrature_check: worst,
        check_states: cfg.observability.check_states,
    };
    Ok(vec![json_artifact("observability.json", cfg, &summary)])
}

fn run_lame(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    // the reference is the undamped modal Stokes evolution
    let pairs = eigenpairs(cfg)?;
    let ms = ModalSystem::new(pairs, &hypstokes::geometry::DampingProfile::zero())?;
    let s0 = initial_state(cfg, &ms.lambda)?;
    let n = &cfg.numerics;
    let rows = convergence_study(&cfg.lame.eps, n.t_end, n.dt, &ms, &s0)?;
    let mut t = CsvTable::new(&["eps", "max_div", "max_err", "div_bound", "energy_drift"]);
    for r in &rows {
        t.push(vec![
            r.eps.into(),
            r.max_div.into(),
            r.max_err.into(),
            r.div_bound.into(),
            r.energy_drift.into(),
        ]);
    }
    Ok(vec![
        t.artifact("lame.csv", cfg),
        json_artifact("lame.json", cfg, &rows),
    ])
}

#[derive(Serialize)]
struct DiagnosticsSummary {
    modes: usize,
    max_quasimode_residual: f64,
    max_normal_component_defect: f64,
    /// max / median of `‖h∂_ν u‖` over the modes.
    flux_ratio: f64,
    /// max / median of `h‖q‖`.
    pressure_ratio: f64,
    max_obs_constant: f64,
}

/// `max / median`, or 0 for an empty or all-zero list.
pub fn max_over_median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let median = if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    };
    if median > 0.0 {
        v[m - 1] / median
    } else {
        0.0
    }
}

fn run_diagnostics(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    if let DomainSpec::Disk { .. } = cfg.domain {
        return Err(LabError::config("domain.kind", "diagnostics need a rectangle"));
    }
    let pairs = eigenpairs(cfg)?;
    let mut t = CsvTable::new(&[
        "index",
        "lambda",
        "h",
        "quasimode_residual",
        "boundary_flux_norm",
        "normal_component_defect",
        "pressure_interior",
        "pressure_boundary",
        "h_pressure_interior",
        "obs_constant",
    ]);
    let (mut flux, mut hq) = (Vec::new(), Vec::new());
    let (mut res, mut defect) = (0.0f64, 0.0f64);
    for (k, p) in pairs.iter().enumerate() {
        let d = quasimode_diagnostics(p, &quasimode_pressure(p), &cfg.damping);
        let r = quasimode_residual(p);
        res = res.max(r);
        defect = defect.max(d.normal_component_defect);
        flux.push(d.boundary_flux_norm);
        hq.push(d.h * d.pressure_norms.0);
        t.push(vec![
            k.into(),
            p.lambda.into(),
            d.h.into(),
            r.into(),
            d.boundary_flux_norm.into(),
            d.normal_component_defect.into(),
            d.pressure_norms.0.into(),
            d.pressure_norms.1.into(),
            (d.h * d.pressure_norms.0).into(),
            d.obs_constant.into(),
        ]);
    }
    let consts = semiclassical_constants(&pairs, &cfg.damping);
    let mut c = CsvTable::new(&["index", "h", "obs_constant"]);
    for s in &consts {
        c.push(vec![s.index.into(), s.h.into(), Cell::F(s.obs_constant)]);
    }
    let summary = DiagnosticsSummary {
        modes: pairs.len(),
        max_quasimode_residual: res,
        max_normal_component_defect: defect,
        flux_ratio: max_over_median(&flux),
        pressure_ratio: max_over_median(&hq),
        max_obs_constant: consts.iter().map(|c| c.obs_constant).fold(0.0, f64::max),
    };
    Ok(vec![
        t.artifact("diagnostics.csv", cfg),
        c.artifact("semiclassical.csv", cfg),
        json_artifact("diagnostics.json", cfg, &summary),
    ])
}
