//! Subcommand bodies. Each writes its files through [`OutputDir`] and
//! returns the `results` part of the summary.

use std::f64::consts::PI;

use serde_json::{json, Value};

use qjh_core::bench::{
    airy_eigenvalues, airy_reference, bench_preconditioner, bench_target, calibrate_airy, eigen_error_report,
    error_table, pooled_kl, run_gaussian_benchmark, AiryProblem, CalibrationSettings, GaussianBenchSettings,
};
use qjh_core::csv::{Cell, Table};
use qjh_core::density::DensityMatrix;
use qjh_core::lindblad::{evolve, min_eigenvalue, LindbladModel};
use qjh_core::numkernel::{pauli, real, trace_distance, CMatrix, CVector, Hermitian};
use qjh_core::rmt::{direct_phase_ensemble, spacing_statistics, walk_phase_ensemble, WalkSchedule};
use qjh_core::rng::stream_rng;
use qjh_core::sampler::{effective_sample_size, run_chains, ChainOutput, HMCConfig, StdNormal};
use qjh_core::sse::{
    ensemble_mean, ensemble_scalar, integrate_lsse, integrate_stochastic_master, SseModel, WienerPath,
};

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::svg::{self, Series};
use crate::CliError;

type CmdResult = Result<Value, CliError>;

pub fn dispatch(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    match cfg.command.as_str() {
        "sample" => sample(cfg, out),
        "bench-gaussian" => bench_gaussian(cfg, out),
        "bench-airy" => bench_airy(cfg, out),
        "rmt-spacing" => rmt_spacing(cfg, out),
        "sse-validate" => sse_validate(cfg, out),
        "lindblad-evolve" => lindblad_evolve(cfg, out),
        other => Err(CliError::Config(format!("command: unknown subcommand {other:?}"))),
    }
}

fn write_table(out: &mut OutputDir, name: &str, table: &Table) -> Result<(), CliError> {
    out.write(name, table.to_csv()?.as_bytes())?;
    Ok(())
}

fn two_level_plus() -> CVector {
    let s = 0.5f64.sqrt();
    CVector::from_vec(vec![real(s), real(s)])
}

pub fn sample(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let (t, s, p) = (&cfg.target, &cfg.sampler, &cfg.preconditioner);
    let d = t.dim;
    let config = HMCConfig::new(
        d,
        s.step_size,
        s.leapfrog_steps,
        s.warmup,
        s.warmup + s.iterations,
        cfg.seed,
    );
    config.validate()?;
    let pre = if p.enabled {
        Some(bench_preconditioner(d, p.alpha, p.dtau, s.warmup)?)
    } else {
        None
    };
    let (chains, kl) = if t.kind == "ill-gaussian" {
        let target = bench_target(d, t.kappa, cfg.seed)?;
        let chains = run_chains(&target, &config, pre.as_ref(), s.chains)?;
        let kl = pooled_kl(&target, &chains, s.iterations).ok();
        (chains, kl)
    } else {
        (run_chains(&StdNormal(d), &config, pre.as_ref(), s.chains)?, None)
    };

    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend((0..d).map(|j| format!("theta_{j}")));
    let mut table = Table::new(&header)?;
    for (k, c) in chains.iter().enumerate() {
        for (i, row) in c.samples.row_iter().enumerate() {
            let mut cells: Vec<Cell> = vec![k.into(), i.into()];
            cells.extend(row.iter().map(|&x| Cell::from(x)));
            table.push(cells)?;
        }
    }
    write_table(out, "samples.csv", &table)?;

    let diagnostics = sample_diagnostics(&chains, d, kl)?;
    let mut text = serde_json::to_string_pretty(&diagnostics).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    out.write("diagnostics.json", text.as_bytes())?;

    if cfg.svg {
        let series: Vec<Series> = chains
            .iter()
            .enumerate()
            .map(|(k, c)| Series {
                label: format!("chain {k}"),
                points: c
                    .samples
                    .column(0)
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (i as f64, x))
                    .collect(),
            })
            .collect();
        out.write("trace.svg", svg::line_plot("theta_0 trace", &series, false).as_bytes())?;
    }
    Ok(json!({
        "acceptance_rate": diagnostics["mean_acceptance_rate"],
        "divergences": diagnostics["divergences"],
        "min_ess": diagnostics["min_ess"],
        "kl": kl,
    }))
}

fn sample_diagnostics(chains: &[ChainOutput], d: usize, kl: Option<f64>) -> CmdResult {
    let n_total: usize = chains.iter().map(|c| c.samples.nrows()).sum();
    let mut means = vec![];
    let mut sds = vec![];
    let mut ess = vec![];
    for j in 0..d {
        let all: Vec<f64> = chains
            .iter()
            .flat_map(|c| c.samples.column(j).iter().copied().collect::<Vec<_>>())
            .collect();
        let m = all.iter().sum::<f64>() / n_total as f64;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_total as f64 - 1.0).max(1.0);
        means.push(m);
        sds.push(v.sqrt());
        let mut e = 0.0;
        for c in chains {
            let col: Vec<f64> = c.samples.column(j).iter().copied().collect();
            e += effective_sample_size(&col)?.value;
        }
        ess.push(e);
    }
    let per_chain: Vec<Value> = chains
        .iter()
        .enumerate()
        .map(|(k, c)| {
            json!({
                "chain": k,
                "acceptance_rate": c.acceptance_rate,
                "divergences": c.divergences,
                "warmup_divergences": c.warmup_divergences,
                "mass_diagonal": c.final_mass.diagonal().iter().copied().collect::<Vec<f64>>(),
            })
        })
        .collect();
    Ok(json!({
        "chains": per_chain,
        "draws_per_chain": chains.first().map(|c| c.samples.nrows()).unwrap_or(0),
        "mean_acceptance_rate": chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64,
        "divergences": chains.iter().map(|c| c.divergences).sum::<usize>(),
        "mean": means,
        "sd": sds,
        "ess": ess,
        "min_ess": ess.iter().copied().fold(f64::INFINITY, f64::min),
        "kl_to_target": kl,
    }))
}

pub fn bench_gaussian(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let (s, p, g) = (&cfg.sampler, &cfg.preconditioner, &cfg.bench_gaussian);
    let settings = GaussianBenchSettings {
        dims: g.dims.clone(),
        kappa: g.kappa,
        step_size: s.step_size,
        leapfrog_steps: s.leapfrog_steps,
        warmup: s.warmup,
        draws: s.iterations,
        chains: s.chains,
        preconditioned: p.enabled,
        alpha: p.alpha,
        dtau: p.dtau,
        seed: cfg.seed,
    };
    let report = run_gaussian_benchmark(&settings)?;
    write_table(out, "kl_trace.csv", &report.to_table()?)?;
    if cfg.svg {
        let series: Vec<Series> = g
            .dims
            .iter()
            .map(|&d| Series {
                label: format!("D = {d}"),
                points: report
                    .rows
                    .iter()
                    .filter(|r| r.dimension == d)
                    .map(|r| (r.iteration as f64, r.kl))
                    .collect(),
            })
            .collect();
        out.write(
            "kl_trace.svg",
            svg::line_plot("KL(empirical || target)", &series, true).as_bytes(),
        )?;
    }
    let summaries: Vec<Value> = report
        .summaries
        .iter()
        .map(|s| {
            json!({
                "dimension": s.dimension,
                "final_kl": s.final_kl,
                "acceptance_rate": s.acceptance_rate,
                "divergences": s.divergences,
                "min_ess": s.min_ess,
                "decreasing_fraction": s.decreasing_fraction,
            })
        })
        .collect();
    Ok(json!({ "dimensions": summaries }))
}

pub fn bench_airy(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let a = &cfg.bench_airy;
    let estimate = airy_eigenvalues(&AiryProblem::for_modes(a.slope, a.modes, a.grid)?, a.modes)?;
    let exact = airy_reference(a.slope, a.modes, a.reference_grid)?;
    let rows = eigen_error_report(&estimate, &exact)?;
    write_table(out, "airy_eigs.csv", &error_table(&rows)?)?;
    if cfg.svg {
        let series = [Series {
            label: "relative error".into(),
            points: rows.iter().map(|r| (r.index as f64, r.rel_err)).collect(),
        }];
        out.write(
            "airy_errors.svg",
            svg::line_plot("Airy eigenvalue error", &series, true).as_bytes(),
        )?;
    }
    let max_rel = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);

    let mut calibration = Value::Null;
    if a.calibration_reps > 0 {
        let settings = CalibrationSettings {
            a_star: a.slope,
            sigma: a.sigma,
            modes: a.calibration_modes,
            repetitions: a.calibration_reps,
            intervals: CalibrationSettings::default().intervals.max(10 * a.calibration_modes),
            step_size: a.step_size,
            leapfrog_steps: a.leapfrog_steps,
            warmup: a.warmup,
            iterations: a.warmup + a.draws,
            seed: cfg.seed,
            ..CalibrationSettings::default()
        };
        let runs = calibrate_airy(&settings)?;
        let mut table = Table::new(&["repetition", "draw", "a", "sigma"])?;
        for (r, run) in runs.iter().enumerate() {
            for (i, &(av, sv)) in run.samples.iter().enumerate() {
                table.push(vec![r.into(), i.into(), av.into(), sv.into()])?;
            }
        }
        write_table(out, "posterior_samples.csv", &table)?;
        let reps: Vec<Value> = runs
            .iter()
            .map(|r| {
                json!({
                    "a_mean": r.a_mean,
                    "a_sd": r.a_sd,
                    "sigma_mean": r.sigma_mean,
                    "acceptance_rate": r.acceptance_rate,
                    "covered": r.covered,
                })
            })
            .collect();
        calibration = json!({
            "a_star": a.slope,
            "covered": runs.iter().filter(|r| r.covered).count(),
            "repetitions": runs.len(),
            "runs": reps,
        });
    }
    Ok(json!({
        "modes": a.modes,
        "max_relative_error": max_rel,
        "calibration": calibration,
    }))
}

/// Reference spacing density in unfolded units: exact for `N = 2`, the
/// Wigner surmise otherwise.
pub fn reference_spacing_density(n: usize, s: f64) -> f64 {
    if n == 2 {
        if (0.0..=2.0).contains(&s) {
            (PI * s / 2.0).sin().powi(2)
        } else {
            0.0
        }
    } else {
        32.0 / (PI * PI) * s * s * (-4.0 * s * s / PI).exp()
    }
}

pub fn rmt_spacing(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let r = &cfg.rmt;
    let phases = if r.sampler == "walk" {
        let schedule = WalkSchedule {
            dtau: r.dtau,
            ..WalkSchedule::default()
        };
        walk_phase_ensemble(r.n, r.samples, schedule, cfg.seed)?
    } else {
        direct_phase_ensemble(r.n, r.samples, cfg.seed)?
    };
    let hist = spacing_statistics(&phases, r.bins)?;
    let centers = hist.bin_centers();
    let reference: Vec<f64> = centers.iter().map(|&s| reference_spacing_density(r.n, s)).collect();
    let mut table = Table::new(&["bin_center", "density", "reference"])?;
    for ((&c, &d), &e) in centers.iter().zip(&hist.density).zip(&reference) {
        table.push(vec![c.into(), d.into(), e.into()])?;
    }
    write_table(out, "spacing_histogram.csv", &table)?;
    if cfg.svg {
        let curve: Vec<(f64, f64)> = (0..=200)
            .map(|k| {
                let s = 4.0 * k as f64 / 200.0;
                (s, reference_spacing_density(r.n, s))
            })
            .collect();
        let plot = svg::histogram(
            &format!("CUE spacings, N = {}", r.n),
            &hist.bin_edges,
            &hist.density,
            Some(&curve),
        );
        out.write("spacing_histogram.svg", plot.as_bytes())?;
    }
    let sup = hist
        .density
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "n": r.n,
        "sets": phases.len(),
        "mean_spacing": hist.mean_spacing,
        "reference": if r.n == 2 { "exact" } else { "wigner-surmise" },
        "sup_distance": sup,
    }))
}

pub fn sse_validate(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let e = &cfg.sse;
    let steps = ((e.t_final / e.dt).round() as usize).max(1);
    let dt = e.t_final / steps as f64;
    let checkpoints: Vec<usize> = (1..=10).map(|k| (k * steps / 10).max(1)).collect();
    let lowering = pauli::lowering();
    let model = SseModel::constant(Hermitian::zeros(2), vec![lowering.clone()])?;
    let lind_model = LindbladModel::new(Hermitian::zeros(2), vec![lowering])?;
    let psi0 = two_level_plus();
    let rho0 = DensityMatrix::pure(&psi0)?;

    let (norm_mean, norm_se) = ensemble_scalar(e.paths, cfg.seed, |rng| {
        let path = WienerPath::sample(1, steps, dt, rng)?;
        let traj = integrate_lsse(&model, &psi0, &path)?;
        Ok(checkpoints.iter().map(|&i| traj.norms[i].powi(2)).collect())
    })?;
    let sme_mean = ensemble_mean(e.paths, cfg.seed.wrapping_add(1), |rng| {
        let path = WienerPath::sample(1, steps, dt, rng)?;
        let traj = integrate_stochastic_master(&model, &rho0, &path)?;
        Ok(checkpoints.iter().map(|&i| traj.states[i].matrix().clone()).collect())
    })?;
    let lind = evolve(&lind_model, &rho0, e.t_final, dt)?;

    let mut table = Table::new(&[
        "time",
        "norm2_mean",
        "norm2_se",
        "norm2_z",
        "sme_rho_ee",
        "lindblad_rho_ee",
        "trace_distance",
    ])?;
    let mut max_z: f64 = 0.0;
    let mut max_td: f64 = 0.0;
    for (k, &i) in checkpoints.iter().enumerate() {
        let z = (norm_mean[k] - 1.0) / norm_se[k];
        let td = trace_distance(&Hermitian::hermitize(&sme_mean[k]), lind.states[i].hermitian())?;
        max_z = max_z.max(z.abs());
        max_td = max_td.max(td);
        table.push(vec![
            (i as f64 * dt).into(),
            norm_mean[k].into(),
            norm_se[k].into(),
            z.into(),
            sme_mean[k][(0, 0)].re.into(),
            lind.states[i].matrix()[(0, 0)].re.into(),
            td.into(),
        ])?;
    }
    write_table(out, "sse_validation.csv", &table)?;

    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let path = WienerPath::sample(1, steps, dt, &mut rng)?;
    let traj = integrate_lsse(&model, &psi0, &path)?;
    let mut tt = Table::new(&["time", "psi_0_re", "psi_0_im", "psi_1_re", "psi_1_im", "norm"])?;
    for ((&t, psi), &norm) in traj.times.iter().zip(&traj.states).zip(&traj.norms) {
        tt.push(vec![
            t.into(),
            psi[0].re.into(),
            psi[0].im.into(),
            psi[1].re.into(),
            psi[1].im.into(),
            norm.into(),
        ])?;
    }
    write_table(out, "trajectory.csv", &tt)?;

    if cfg.svg {
        let series = [
            Series {
                label: "E|psi|^2".into(),
                points: checkpoints
                    .iter()
                    .zip(&norm_mean)
                    .map(|(&i, &m)| (i as f64 * dt, m))
                    .collect(),
            },
            Series {
                label: "single path |psi|^2".into(),
                points: traj.times.iter().zip(&traj.norms).map(|(&t, &n)| (t, n * n)).collect(),
            },
        ];
        out.write(
            "sse_norms.svg",
            svg::line_plot("Linear SSE squared norm", &series, false).as_bytes(),
        )?;
    }
    Ok(json!({
        "paths": e.paths,
        "steps": steps,
        "max_abs_norm_z": max_z,
        "max_trace_distance": max_td,
    }))
}

fn lindblad_setup(cfg: &RunConfig) -> Result<(LindbladModel, DensityMatrix), CliError> {
    let l = &cfg.lindblad;
    let (h, jump, rho0) = match l.model.as_str() {
        "amplitude-damping" => (
            Hermitian::zeros(2),
            pauli::lowering() * real(l.rate.sqrt()),
            DensityMatrix::from_diagonal(&[1.0, 0.0])?,
        ),
        "dephasing" => (
            Hermitian::zeros(2),
            pauli::z() * real((l.rate / 2.0).sqrt()),
            DensityMatrix::pure(&two_level_plus())?,
        ),
        "driven-damping" => (
            Hermitian::new(pauli::x() * real(0.5 * l.drive))?,
            pauli::lowering() * real(l.rate.sqrt()),
            DensityMatrix::from_diagonal(&[0.0, 1.0])?,
        ),
        other => return Err(CliError::Config(format!("lindblad.model: unknown model {other:?}"))),
    };
    Ok((LindbladModel::new(h, vec![jump])?, rho0))
}

pub fn lindblad_evolve(cfg: &RunConfig, out: &mut OutputDir) -> CmdResult {
    let l = &cfg.lindblad;
    let (model, rho0) = lindblad_setup(cfg)?;
    let traj = evolve(&model, &rho0, l.t_final, l.dt)?;
    let mut table = Table::new(&[
        "time",
        "rho_00_re",
        "rho_00_im",
        "rho_01_re",
        "rho_01_im",
        "rho_10_re",
        "rho_10_im",
        "rho_11_re",
        "rho_11_im",
    ])?;
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let m: &CMatrix = rho.matrix();
        let mut row: Vec<Cell> = vec![t.into()];
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            row.push(m[(i, j)].re.into());
            row.push(m[(i, j)].im.into());
        }
        table.push(row)?;
    }
    write_table(out, "lindblad_trajectory.csv", &table)?;
    if cfg.svg {
        let series = [
            Series {
                label: "rho_00".into(),
                points: traj
                    .times
                    .iter()
                    .zip(&traj.states)
                    .map(|(&t, r)| (t, r.matrix()[(0, 0)].re))
                    .collect(),
            },
            Series {
                label: "|rho_01|".into(),
                points: traj
                    .times
                    .iter()
                    .zip(&traj.states)
                    .map(|(&t, r)| (t, r.matrix()[(0, 1)].norm()))
                    .collect(),
            },
        ];
        out.write(
            "lindblad.svg",
            svg::line_plot(&format!("Lindblad: {}", l.model), &series, false).as_bytes(),
        )?;
    }
    let last = traj.last().matrix();
    let t = *traj.times.last().unwrap_or(&0.0);
    let analytic_error = match l.model.as_str() {
        "amplitude-damping" => Some((last[(0, 0)].re - (-l.rate * t).exp()).abs()),
        "dephasing" => Some((last[(0, 1)].norm() - 0.5 * (-l.rate * t).exp()).abs()),
        _ => None,
    };
    Ok(json!({
        "model": l.model,
        "steps": traj.times.len() - 1,
        "final_time": t,
        "final_populations": [last[(0, 0)].re, last[(1, 1)].re],
        "final_coherence_abs": last[(0, 1)].norm(),
        "min_eigenvalue": min_eigenvalue(&traj)?,
        "analytic_error": analytic_error,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_densities_normalize() {
        for n in [2, 3] {
            let h = 1e-4;
            let total: f64 = (0..80_000)
                .map(|k| reference_spacing_density(n, (k as f64 + 0.5) * h) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "n={n}: {total}");
            let mean: f64 = (0..80_000)
                .map(|k| {
                    let s = (k as f64 + 0.5) * h;
                    s * reference_spacing_density(n, s) * h
                })
                .sum();
            assert!((mean - 1.0).abs() < 1e-6, "n={n}: mean {mean}");
        }
    }
}
