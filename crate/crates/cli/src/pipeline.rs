//! `fig <n>`: runs the subcommands behind one figure with desk-scale
//! defaults (any shared flag overrides them) and writes `manifest.json`.

use std::f64::consts::PI;
use std::path::PathBuf;

use qvdp_core::io::{CsvTable, Provenance, CODE_VERSION};
use qvdp_core::semiclassical::{converged_phase_spectrum, kramers_rates, PhaseSector, DEFAULT_TRUNCATION};
use qvdp_core::spectral::{leading_nonzero, sector_eigenvalues};
use qvdp_core::{build_rotating_liouvillian, c64, FockSpace, Parity};
use serde_json::json;

use crate::args::*;
use crate::commands::{self, model, with_n_ex, with_ratio};
use crate::output::{Artifact, Output};
use crate::CliResult;

fn defaults(c: &Common, n_ex: f64, eta_ratio: f64) -> Common {
    let mut d = c.clone();
    if d.nex.is_none() && d.gamma2.is_none() {
        d.nex = Some(n_ex);
    }
    if d.eta_ratio.is_none() && d.eta.is_none() {
        d.eta_ratio = Some(eta_ratio);
    }
    d.grid = None;
    d
}

fn user_nex(c: &Common) -> Option<Vec<f64>> {
    match (c.nex, c.gamma2) {
        (Some(n), _) => Some(vec![n]),
        (None, Some(g2)) => Some(vec![c.gamma1 / (2.0 * g2)]),
        _ => None,
    }
}

fn renamed(mut a: Vec<Artifact>, name: &str) -> Vec<Artifact> {
    if let Some(Artifact::Table { name: n, .. } | Artifact::Json { name: n, .. }) = a.first_mut() {
        *n = name.to_string();
    }
    a
}

fn with_grid(c: &Common, fallback: &str) -> Common {
    let mut d = c.clone();
    d.grid = Some(c.grid.clone().unwrap_or_else(|| parse_grid(fallback).expect("static grid")));
    d
}

pub fn figure(n: u8, c: &Common, out: &Output) -> CliResult<Vec<PathBuf>> {
    let artifacts = match n {
        1 => fig1(c)?,
        2 => fig2(c)?,
        3 => fig3(c)?,
        4 => fig4(c)?,
        5 => fig5(c)?,
        6 => fig6(c)?,
        7 => fig7(c)?,
        _ => unreachable!("clap restricts the figure number"),
    };
    let mut paths = out.write_all(&artifacts)?;
    let files: Vec<_> = artifacts
        .iter()
        .map(|a| json!({"file": out.file_name(a), "kind": a.kind()}))
        .collect();
    let manifest = json!({
        "kind": "manifest",
        "figure": n,
        "code_version": CODE_VERSION,
        "seed": c.seed,
        "files": files,
    });
    paths.push(out.write(&Artifact::json("manifest", manifest))?);
    Ok(paths)
}

/// Bifurcation table and stationary occupation for several `n_ex`.
fn fig1(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 10.0, 0.0);
    let mut out = commands::meanfield(&with_grid(&base, "0:3:31"), &MeanfieldArgs { t_end: 0.0, alpha0: c64::new(1.0, 0.0) })?;
    let nex_list = user_nex(c).unwrap_or_else(|| vec![1.0, 5.0, 10.0]);
    out.extend(commands::occupation(&with_grid(&base, "0:3:13"), &OccupationArgs { nex_list: Some(NumberList(nex_list)) })?);
    Ok(out)
}

/// Limit-cycle regime: spectrum, bands, trajectories and c_n.
fn fig2(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 10.0, 0.4);
    let p = model(&base)?;
    let mut json_base = base.clone();
    json_base.format = Format::Json;
    let mut out = commands::spectrum(&json_base, &SpectrumArgs { modes: 8, vectors: 0 })?;
    out.extend(commands::bands(&base, &BandsArgs { bands: 3 })?);
    let dyn_args = DynamicsArgs {
        frame: FrameArg::Rotating,
        init: InitialState::Coherent(c64::new(p.n_ex().sqrt(), 0.0)),
        t_end: 100.0,
        samples: 401,
        periods: 0,
        backend: BackendArg::Spectral,
    };
    out.extend(commands::dynamics(&base, &dyn_args)?);
    out.extend(commands::meanfield(&base, &MeanfieldArgs { t_end: 100.0, alpha0: c64::new(p.n_ex().sqrt(), 0.0) })?);
    out.extend(commands::semiclassical(&base, &SemiclassicalArgs { modes: 4 })?);
    Ok(out)
}

/// Liouvillian gap against n_ex beside the Kramers and phase-operator gaps.
fn fig3(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 10.0, 2.0);
    let p0 = model(&base)?;
    let ratios = match (c.eta_ratio, c.eta) {
        (None, None) => vec![2.0, 3.0],
        _ => vec![p0.eta_ratio()],
    };
    let nex_list = user_nex(c).unwrap_or_else(|| vec![4.0, 6.0, 8.0, 10.0]);
    let m = c.trunc_m.unwrap_or(DEFAULT_TRUNCATION);
    let mut t = CsvTable::new(
        Provenance::new("gap_scan", Some(p0)).with("seed", c.seed),
        &["eta_ratio", "n_ex", "cutoff", "liouvillian_gap", "kramers_gap", "phase_fp_gap"],
    );
    for &r in &ratios {
        for &n in &nex_list {
            let p = with_ratio(&with_n_ex(&p0, n), r);
            let d = c.cutoff.unwrap_or_else(|| qvdp_core::cutoff_for(&p));
            let l = build_rotating_liouvillian(&p, &FockSpace::new(d)?);
            let odd = sector_eigenvalues(&l, Parity::Odd)?;
            let lambda1 = leading_nonzero(&odd, 1)[0];
            let sp = p.scaled();
            let kramers = kramers_rates(&sp)?.gap * p.gamma1;
            let fp = converged_phase_spectrum(PhaseSector::OddB, m, &sp)?.eigenvalues[0];
            t.push(vec![r.into(), n.into(), d.into(), (-lambda1.re).into(), kramers.into(), (-fp.re * p.gamma1).into()])?;
        }
    }
    Ok(vec![Artifact::table("gap_scan", t)])
}

/// Period doubling: stroboscopic series and the rotating-frame trace.
fn fig4(c: &Common) -> CliResult<Vec<Artifact>> {
    let mut base = defaults(c, 10.0, 2.0);
    if !(base.omega_s > 0.0) {
        base.omega_s = 20.0 * PI * base.gamma1;
    }
    let strobo = DynamicsArgs {
        frame: FrameArg::Stroboscopic,
        init: InitialState::AlphaPlus,
        t_end: 0.0,
        samples: 0,
        periods: 2000,
        backend: BackendArg::Spectral,
    };
    let mut out = commands::dynamics(&base, &strobo)?;
    let rot = DynamicsArgs { frame: FrameArg::Rotating, t_end: 100.0, samples: 401, ..strobo };
    out.extend(commands::dynamics(&base, &rot)?);
    Ok(out)
}

/// Slowest odd pair across the EP, and the EP itself.
fn fig5(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 5.0, 1.0);
    let p = model(&base)?;
    let grid = c.grid.clone().unwrap_or_else(|| parse_grid("0.5:2.5:21").expect("static grid"));
    let mut t = CsvTable::new(
        Provenance::new("odd_pair_scan", Some(p)).with("seed", c.seed),
        &["eta_ratio", "cutoff", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2"],
    );
    for r in grid.points() {
        let q = with_ratio(&p, r);
        let d = c.cutoff.unwrap_or_else(|| qvdp_core::cutoff_for(&q));
        let odd = sector_eigenvalues(&build_rotating_liouvillian(&q, &FockSpace::new(d)?), Parity::Odd)?;
        t.push(vec![r.into(), d.into(), odd[0].re.into(), odd[0].im.into(), odd[1].re.into(), odd[1].im.into()])?;
    }
    let mut out = vec![Artifact::table("odd_pair_scan", t)];
    let ep_args = EpArgs { bracket: None, semiclassical: false, nex_list: None };
    out.extend(commands::ep(&base, &ep_args)?);
    out.extend(commands::ep(&base, &EpArgs { semiclassical: true, ..ep_args })?);
    Ok(out)
}

/// c_n against eta / eta_c below the bifurcation.
fn fig6(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 1e4, 0.4);
    commands::semiclassical(&with_grid(&base, "0:0.95:20"), &SemiclassicalArgs { modes: 4 })
        .map(|a| a.into_iter().filter(|x| matches!(x, Artifact::Table { name, .. } if name == "cn")).collect())
        .map(|a| renamed(a, "cn_scan"))
}

/// Symmetry-broken states across n_ex.
fn fig7(c: &Common) -> CliResult<Vec<Artifact>> {
    let base = defaults(c, 5.0, 2.0);
    let nex_list = user_nex(c).unwrap_or_else(|| vec![5.0, 10.0, 15.0]);
    commands::ssb(&base, &SsbArgs { nex_list: Some(NumberList(nex_list)) })
}
