use qvdp_core::dynamics::{
    evolve_lab, evolve_rotating, stationary_occupation_scan, stroboscopic_series, Backend, Frame, ObservableTrajectory,
};
use qvdp_core::io::{eigenmatrix_bytes, trajectory_table, Cell, CsvTable, Provenance, Sidecar, SpectrumRecord};
use qvdp_core::langevin::{
    self, autocorrelation_time, coherence_decay, estimate_jump_rate, estimate_oscillation_lifetime, max_dt,
    mean_intensity, phase_diffusion_rate, simulate_amplitude, simulate_intensity, simulate_phase, stationary_variance,
    Estimate, LangevinConfig, TrajectoryEnsemble,
};
use qvdp_core::meanfield::{classify, fixed_points, integrate_mf, limit_cycle_frequency, potential_extrema, MeanFieldState};
use qvdp_core::semiclassical::{
    barrier_heights, bracket_ep_semiclassical, converged_phase_spectrum, detect_ep_semiclassical, kramers_rates, perturbative_cn, PhaseSector,
    DEFAULT_TRUNCATION,
};
use qvdp_core::spectral::{
    band_structure, detect_ep, diagonalize_with, ep_scaling_fit, liouvillian_gap, steady_state_direct,
    symmetry_broken_states_sparse, DiagonalizeOptions, EpSearch,
};
use qvdp_core::{build_rotating_liouvillian, c64, cutoff_for, DensityMatrix, FockSpace, ModelParams, Parity};
use serde_json::json;

use crate::args::*;
use crate::output::Artifact;
use crate::{CliError, CliResult};

pub fn dispatch(cmd: &Command, c: &Common) -> CliResult<Vec<Artifact>> {
    match cmd {
        Command::Spectrum(a) => spectrum(c, a),
        Command::Bands(a) => bands(c, a),
        Command::Meanfield(a) => meanfield(c, a),
        Command::Semiclassical(a) => semiclassical(c, a),
        Command::Langevin(a) => langevin(c, a),
        Command::Dynamics(a) => dynamics(c, a),
        Command::Occupation(a) => occupation(c, a),
        Command::Ep(a) => ep(c, a),
        Command::Ssb(a) => ssb(c, a),
        Command::Fig(_) => unreachable!("figures are dispatched by the pipeline"),
    }
}

/// Model parameters from the shared flags.
pub fn model(c: &Common) -> CliResult<ModelParams> {
    let n_ex = match (c.nex, c.gamma2) {
        (Some(n), None) => n,
        (None, Some(g2)) => c.gamma1 / (2.0 * g2),
        (None, None) => return Err(CliError::Usage("one of --nex or --gamma2 is required".into())),
        (Some(_), Some(_)) => return Err(CliError::Usage("--nex and --gamma2 are mutually exclusive".into())),
    };
    let mut p = ModelParams::from_ratios(c.gamma1, n_ex, c.delta_ratio, 0.0)?;
    p.eta = match (c.eta_ratio, c.eta) {
        (Some(r), None) => r * p.eta_c(),
        (None, Some(e)) => e,
        (None, None) => 0.0,
        (Some(_), Some(_)) => return Err(CliError::Usage("--eta-ratio and --eta are mutually exclusive".into())),
    };
    p.omega_s = c.omega_s;
    p.validate()?;
    Ok(p)
}

pub fn with_n_ex(p: &ModelParams, n_ex: f64) -> ModelParams {
    ModelParams { gamma2: p.gamma1 / (2.0 * n_ex), ..*p }
}

pub fn with_ratio(p: &ModelParams, ratio: f64) -> ModelParams {
    p.with_eta(ratio * p.eta_c())
}

fn cutoff(c: &Common, p: &ModelParams) -> usize {
    c.cutoff.unwrap_or_else(|| cutoff_for(p))
}

fn space(c: &Common, p: &ModelParams) -> CliResult<FockSpace> {
    Ok(FockSpace::new(cutoff(c, p))?)
}

fn prov(kind: &str, p: &ModelParams, c: &Common) -> Provenance {
    Provenance::new(kind, Some(*p))
        .with("n_ex", p.n_ex())
        .with("delta_ratio", p.delta / p.gamma1)
        .with("eta_ratio", p.eta_ratio())
        .with("seed", c.seed)
}

fn grid_or(c: &Common, p: &ModelParams) -> Vec<f64> {
    c.grid.as_ref().map_or_else(|| vec![p.eta_ratio()], Grid::points)
}

fn complex_pair(z: c64) -> serde_json::Value {
    json!([z.re, z.im])
}

pub fn spectrum(c: &Common, a: &SpectrumArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let s = space(c, &p)?;
    if let Some(grid) = &c.grid {
        let mut t = CsvTable::new(
            prov("spectrum_scan", &p, c).with("cutoff", s.cutoff()),
            &["eta_ratio", "index", "re", "im", "parity"],
        );
        for r in grid.points() {
            let l = build_rotating_liouvillian(&with_ratio(&p, r), &s);
            let dec = diagonalize_with(&l, &DiagonalizeOptions::eigenvalues_only())?;
            for (j, m) in dec.modes().iter().take(a.modes).enumerate() {
                t.push(vec![r.into(), j.into(), m.eigenvalue.re.into(), m.eigenvalue.im.into(), (m.parity.sign() as i64).into()])?;
            }
        }
        return Ok(vec![Artifact::table("spectrum_scan", t)]);
    }
    let l = build_rotating_liouvillian(&p, &s);
    let opts = DiagonalizeOptions { vectors: a.vectors > 0, ..DiagonalizeOptions::default() };
    let dec = diagonalize_with(&l, &opts)?;
    let mut out = Vec::new();
    let mut rec = SpectrumRecord::from_decomposition(&dec);
    if a.vectors > 0 {
        let modes: Vec<usize> = (0..a.vectors.min(dec.len())).collect();
        let file = "spectrum_modes.bin".to_string();
        out.push(Artifact::Binary { file: file.clone(), bytes: eigenmatrix_bytes(&dec, &modes)? });
        rec.sidecar = Some(Sidecar { file, modes });
    }
    match c.format {
        Format::Json => {
            let mut v = serde_json::to_value(&rec).map_err(|e| qvdp_core::Error::Io(e.to_string()))?;
            v["kind"] = json!("spectrum");
            if let Ok(g) = liouvillian_gap(&dec) {
                v["gap"] = json!({"rate": g.rate, "parity": g.parity.sign(), "lambda1": complex_pair(g.lambda1)});
            }
            out.push(Artifact::json("spectrum", v));
        }
        Format::Csv => {
            let mut t = CsvTable::new(prov("spectrum", &p, c).with("cutoff", s.cutoff()), &["index", "re", "im", "parity"]);
            if let Some(sc) = &rec.sidecar {
                t.provenance = t.provenance.with("sidecar", sc);
            }
            for (j, (re, im, par)) in rec.eigenvalues.iter().enumerate() {
                t.push(vec![j.into(), (*re).into(), (*im).into(), (*par as i64).into()])?;
            }
            out.push(Artifact::table("spectrum", t));
        }
    }
    Ok(out)
}

pub fn bands(c: &Common, a: &BandsArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let omega = limit_cycle_frequency(&p)?;
    let s = space(c, &p)?;
    let dec = diagonalize_with(&build_rotating_liouvillian(&p, &s), &DiagonalizeOptions::eigenvalues_only())?;
    let bs = band_structure(&dec, omega)?;
    let mut t = CsvTable::new(
        prov("bands", &p, c).with("omega", omega).with("tolerance", bs.tolerance).with("cutoff", s.cutoff()),
        &["band", "harmonic", "mode", "decay_rate", "frequency"],
    );
    for b in 0..a.bands {
        for (k, j, rate) in bs.band(b) {
            t.push(vec![b.into(), k.into(), j.into(), rate.into(), dec.mode(j).frequency().into()])?;
        }
    }
    Ok(vec![Artifact::table("bands", t)])
}

pub fn meanfield(c: &Common, a: &MeanfieldArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    if let Some(grid) = &c.grid {
        let mut t = CsvTable::new(prov("bifurcation", &p, c), &["eta_ratio", "regime", "omega", "n_meanfield"]);
        for r in grid.points() {
            let q = with_ratio(&p, r);
            let b = classify(&q);
            t.push(vec![
                r.into(),
                format!("{:?}", b.regime).into(),
                b.omega.unwrap_or(f64::NAN).into(),
                qvdp_core::dynamics::meanfield_occupation(&q).into(),
            ])?;
        }
        return Ok(vec![Artifact::table("bifurcation", t)]);
    }
    let dt = c.dt.unwrap_or(1e-3 / p.gamma1);
    let stride = ((0.05 / p.gamma1) / dt).round().max(1.0) as usize;
    let traj = integrate_mf(MeanFieldState { alpha: a.alpha0 }, &p, a.t_end, dt, stride)?;
    let b = classify(&p);
    let mut t = CsvTable::new(
        prov("meanfield_trajectory", &p, c).with("bifurcation", b).with("alpha0", [a.alpha0.re, a.alpha0.im]),
        &["t", "re_alpha", "im_alpha", "N", "phi"],
    );
    for (time, al) in traj.times.iter().zip(&traj.alpha) {
        let st = MeanFieldState { alpha: *al };
        t.push(vec![(*time).into(), al.re.into(), al.im.into(), st.intensity().into(), st.phase().into()])?;
    }
    Ok(vec![Artifact::table("meanfield", t)])
}

pub fn semiclassical(c: &Common, a: &SemiclassicalArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let m = c.trunc_m.unwrap_or(DEFAULT_TRUNCATION);
    let ratios = grid_or(c, &p);
    let mut spec = CsvTable::new(prov("phase_spectrum", &p, c), &["eta_ratio", "n_ex", "sector", "mode", "re", "im", "truncation"]);
    let mut cn = CsvTable::new(prov("cn_table", &p, c).with("truncation", m), &["eta_ratio", "n", "c_n"]);
    let mut kramers = Vec::new();
    for &r in &ratios {
        let sp = with_ratio(&p, r).scaled();
        for sector in [PhaseSector::EvenA, PhaseSector::OddB] {
            let conv = converged_phase_spectrum(sector, m, &sp)?;
            for (j, z) in conv.eigenvalues.iter().take(2 * a.modes.max(1)).enumerate() {
                spec.push(vec![r.into(), sp.n_ex.into(), sector.label().into(), j.into(), z.re.into(), z.im.into(), conv.truncation.into()])?;
            }
        }
        if r < 1.0 {
            for d in perturbative_cn(&sp, m, a.modes)? {
                cn.push(vec![r.into(), d.n.into(), d.c.into()])?;
            }
        } else if r > 1.0 {
            let k = kramers_rates(&sp)?;
            let (up, down) = barrier_heights(&sp)?;
            kramers.push(json!({
                "eta_ratio": r, "right": k.right, "left": k.left, "gap": k.gap,
                "suppression": k.suppression, "barrier_up": up, "barrier_down": down,
            }));
        }
    }
    let mut out = vec![Artifact::table("phase_spectrum", spec)];
    if !cn.rows.is_empty() {
        out.push(Artifact::table("cn", cn));
    }
    if !kramers.is_empty() {
        out.push(Artifact::json("kramers", json!({"kind": "kramers", "provenance": prov("kramers", &p, c), "rates": kramers})));
    }
    Ok(out)
}

fn estimate_row(t: &mut CsvTable, name: &str, e: Estimate, ens: &TrajectoryEnsemble) -> CliResult<()> {
    let p = ens.params;
    t.push(vec![
        name.into(),
        p.delta.into(),
        p.eta.into(),
        p.n_ex.into(),
        e.value.into(),
        e.stderr.into(),
        ens.len().into(),
        ens.config.seed.into(),
    ])?;
    Ok(())
}

pub fn langevin(c: &Common, a: &LangevinArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let sp = p.scaled();
    let dt = c.dt.unwrap_or_else(|| max_dt(&sp));
    let n_steps = (a.t_end / dt).round() as usize;
    let save_every = a.save_every.unwrap_or_else(|| (0.05 / dt).round().max(1.0) as usize);
    let config = LangevinConfig::new(dt, n_steps, a.trajectories, c.seed).with_save_every(save_every);
    let locked = sp.eta > sp.eta_c();
    let ens = match a.kind {
        EnsembleKindArg::Phase => {
            let phi0 = potential_extrema(&p).minima.first().copied().unwrap_or(0.0);
            simulate_phase(&sp, &config, phi0)?
        }
        EnsembleKindArg::Intensity => simulate_intensity(&sp, &config, 0.0)?,
        EnsembleKindArg::Amplitude => {
            let a0 = fixed_points(&p).map(|f| f.0).unwrap_or(c64::new(sp.n_ex.sqrt(), 0.0));
            simulate_amplitude(&sp, &config, a0)?
        }
    };
    let mut t = CsvTable::new(
        prov("langevin_summary", &p, c).with("config", config).with("kind", format!("{:?}", a.kind)),
        &["estimator", "delta", "eta", "n_ex", "value", "stderr", "n_trajectories", "seed"],
    );
    let burn_in = 10.0;
    match a.kind {
        EnsembleKindArg::Phase => {
            estimate_row(&mut t, "phase_diffusion", phase_diffusion_rate(&ens)?, &ens)?;
            if locked {
                let j = estimate_jump_rate(&ens)?;
                estimate_row(&mut t, "jump_rate_right", j.right, &ens)?;
                estimate_row(&mut t, "jump_rate_left", j.left, &ens)?;
                estimate_row(&mut t, "jump_gap_equivalent", j.gap_equivalent, &ens)?;
                estimate_row(&mut t, "coherence_decay", coherence_decay(&ens, burn_in)?.rate, &ens)?;
            } else if sp.eta > 0.0 {
                estimate_row(&mut t, "oscillation_decay", estimate_oscillation_lifetime(&ens, 0.0)?.rate, &ens)?;
            } else {
                estimate_row(&mut t, "coherence_decay", coherence_decay(&ens, 0.0)?.rate, &ens)?;
            }
        }
        EnsembleKindArg::Intensity => {
            estimate_row(&mut t, "stationary_variance", stationary_variance(&ens, burn_in)?, &ens)?;
            estimate_row(&mut t, "correlation_time", autocorrelation_time(&ens, burn_in, 2.0)?, &ens)?;
        }
        EnsembleKindArg::Amplitude => {
            estimate_row(&mut t, "mean_intensity", mean_intensity(&ens, burn_in)?, &ens)?;
        }
    }
    let mut out = vec![Artifact::table("langevin_summary", t)];
    if a.raw {
        let mut raw = CsvTable::new(prov("langevin_raw", &p, c).with("config", config), &["trajectory", "t", "re", "im"]);
        for (k, stream) in ens.streams.iter().enumerate() {
            for (i, time) in ens.times.iter().enumerate() {
                let z = match ens.kind {
                    langevin::EnsembleKind::Amplitude => ens.complex[k][i],
                    _ => c64::new(ens.real[k][i], 0.0),
                };
                raw.push(vec![(*stream).into(), (*time).into(), z.re.into(), z.im.into()])?;
            }
        }
        out.push(Artifact::table("langevin_raw", raw));
    }
    Ok(out)
}

pub fn initial_state(init: &InitialState, p: &ModelParams, s: &FockSpace) -> CliResult<DensityMatrix> {
    Ok(match init {
        InitialState::Vacuum => s.number_state(0)?,
        InitialState::Fock(n) => s.number_state(*n)?,
        InitialState::Coherent(a) => s.coherent_state(*a)?,
        InitialState::AlphaPlus => s.coherent_state(fixed_points(p)?.0)?,
        InitialState::Steady => steady_state_direct(&build_rotating_liouvillian(p, s))?,
    })
}

pub fn dynamics(c: &Common, a: &DynamicsArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let s = space(c, &p)?;
    let rho0 = initial_state(&a.init, &p, &s)?;
    let label = a.init.label();
    let times = || -> CliResult<Vec<f64>> {
        if a.samples < 2 || !(a.t_end > 0.0) {
            return Err(CliError::Usage("need --samples >= 2 and --t-end > 0".into()));
        }
        Ok(Grid { start: 0.0, stop: a.t_end, count: a.samples }.points())
    };
    let (name, traj): (&str, ObservableTrajectory) = match a.frame {
        FrameArg::Rotating => {
            let backend = match a.backend {
                BackendArg::Spectral => Backend::Spectral,
                BackendArg::Rk4 => Backend::Rk4 { max_dt: c.dt },
            };
            let ev = evolve_rotating(&rho0, &build_rotating_liouvillian(&p, &s), &times()?, backend)?;
            ("dynamics_rotating", ev.observable(s.a(), Frame::Rotating, Some(p), &label))
        }
        FrameArg::Lab => {
            let period = p.period()?;
            let ev = evolve_lab(&rho0, &p, &s, &times()?, c.dt.unwrap_or(period / 400.0))?;
            ("dynamics_lab", ev.observable(s.a(), Frame::Lab, Some(p), &label))
        }
        FrameArg::Stroboscopic => {
            let period = p.period()?;
            let l = build_rotating_liouvillian(&p, &s);
            let dec = diagonalize_with(&l, &DiagonalizeOptions::sector(Parity::Odd, true))?;
            ("dynamics_stroboscopic", stroboscopic_series(&dec, &rho0, &s, period, a.periods, &label)?)
        }
    };
    let mut t = trajectory_table(&traj, "a");
    t.provenance = t.provenance.with("cutoff", s.cutoff()).with("n_ex", p.n_ex()).with("eta_ratio", p.eta_ratio());
    Ok(vec![Artifact::table(name, t)])
}

pub fn occupation(c: &Common, a: &OccupationArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let ratios = c.grid.as_ref().map_or_else(|| Grid { start: 0.0, stop: 3.0, count: 13 }.points(), Grid::points);
    let nexs = a.nex_list.clone().map_or_else(|| vec![p.n_ex()], |l| l.0);
    let grid: Vec<ModelParams> = nexs
        .iter()
        .flat_map(|&n| ratios.iter().map(move |&r| (n, r)))
        .map(|(n, r)| with_ratio(&with_n_ex(&p, n), r))
        .collect();
    let rows = stationary_occupation_scan(&grid, c.cutoff)?;
    let mut t = CsvTable::new(prov("occupation", &p, c), &["eta_ratio", "n_ex", "cutoff", "quantum", "meanfield"]);
    for r in rows {
        t.push(vec![r.eta_ratio.into(), r.n_ex.into(), r.cutoff.into(), r.quantum.into(), r.meanfield.into()])?;
    }
    Ok(vec![Artifact::table("occupation", t)])
}

pub fn ep(c: &Common, a: &EpArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let eta_c = p.eta_c();
    let search = EpSearch::default();
    if a.semiclassical {
        let m = c.trunc_m.unwrap_or(DEFAULT_TRUNCATION);
        let nexs = a.nex_list.clone().map_or_else(|| vec![p.n_ex()], |l| l.0);
        let mut t = CsvTable::new(prov("ep_semiclassical", &p, c), &["n_ex", "eta_ep", "eta_ep_ratio", "iterations"]);
        let mut pts = Vec::new();
        for n in nexs {
            let sp = with_n_ex(&p, n).scaled();
            let bracket = match a.bracket {
                Some((lo, hi)) => (lo * sp.eta_c(), hi * sp.eta_c()),
                None => bracket_ep_semiclassical(&sp, 1e-3 * sp.eta_c(), m, &search)?,
            };
            let e = detect_ep_semiclassical(&sp, bracket, m, &search)?;
            let eta_ep = e.eta_ep * p.gamma1;
            pts.push((n, eta_ep));
            t.push(vec![n.into(), eta_ep.into(), (eta_ep / eta_c).into(), e.iterations.into()])?;
        }
        let mut out = vec![Artifact::table("ep_semiclassical", t)];
        if pts.len() >= 4 {
            let fit = ep_scaling_fit(&pts, eta_c)?;
            out.push(Artifact::json(
                "ep_scaling",
                json!({"kind": "ep_scaling", "provenance": prov("ep_scaling", &p, c), "beta": fit.beta,
                       "beta_stderr": fit.beta_stderr, "prefactor": fit.prefactor, "points": pts}),
            ));
        }
        return Ok(out);
    }
    let s = space(c, &p)?;
    let (lo, hi) = a.bracket.unwrap_or((1.0, 3.0));
    let e = detect_ep(&p, &s, (lo * eta_c, hi * eta_c), &search)?;
    Ok(vec![Artifact::json(
        "ep",
        json!({
            "kind": "ep",
            "provenance": prov("ep", &p, c).with("cutoff", s.cutoff()),
            "eta_ep": e.eta_ep,
            "eta_ep_ratio": e.eta_ep / eta_c,
            "eta_c": eta_c,
            "bracket": [e.eta_lo, e.eta_hi],
            "below": e.below.iter().map(|z| complex_pair(*z)).collect::<Vec<_>>(),
            "above": e.above.iter().map(|z| complex_pair(*z)).collect::<Vec<_>>(),
            "iterations": e.iterations,
        }),
    )])
}

pub fn ssb(c: &Common, a: &SsbArgs) -> CliResult<Vec<Artifact>> {
    let p = model(c)?;
    let nexs = a.nex_list.clone().map_or_else(|| vec![p.n_ex()], |l| l.0);
    let mut t = CsvTable::new(
        prov("ssb", &p, c),
        &["n_ex", "cutoff", "trace_distance_ss_xi", "re_a_plus", "im_a_plus", "re_alpha_plus", "im_alpha_plus", "rel_error"],
    );
    for n in nexs {
        let q = with_n_ex(&p, n);
        let (alpha, _) = fixed_points(&q)?;
        let s = space(c, &q)?;
        let pair = symmetry_broken_states_sparse(&build_rotating_liouvillian(&q, &s))?;
        // rho_+- are defined up to exchange; report the one near alpha_+.
        let a_plus = if pair.mean_a_plus.re * alpha.re + pair.mean_a_plus.im * alpha.im >= 0.0 {
            pair.mean_a_plus
        } else {
            -pair.mean_a_plus
        };
        let rel = (a_plus.re - alpha.re).abs() / alpha.norm();
        t.push(vec![
            n.into(),
            s.cutoff().into(),
            pair.trace_distance_ss_xi.into(),
            a_plus.re.into(),
            a_plus.im.into(),
            alpha.re.into(),
            alpha.im.into(),
            Cell::F(rel),
        ])?;
    }
    Ok(vec![Artifact::table("ssb", t)])
}
