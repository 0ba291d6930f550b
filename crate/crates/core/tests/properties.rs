use faer::Mat;
use proptest::prelude::*;

use qvdp_core::dynamics::{evolve_rotating, Backend};
use qvdp_core::io::Cell;
use qvdp_core::langevin::{max_dt, simulate_phase, LangevinConfig};
use qvdp_core::linalg::{adjoint, max_abs_diff, trace, CMat};
use qvdp_core::liouvillian::{parity_sectors, parity_superoperator};
use qvdp_core::meanfield::{classify, limit_cycle_frequency, mf_rhs, Regime};
use qvdp_core::semiclassical::{build_phase_fp, phase_spectrum, PhaseSector};
use qvdp_core::spectral::{sector_eigenvalues, steady_state_direct};
use qvdp_core::{build_rotating_liouvillian, c64, CsvTable, DensityMatrix, FockSpace, ModelParams, Parity, Provenance, ScaledParams};

fn model() -> impl Strategy<Value = ModelParams> {
    (0.2f64..3.0, 0.05f64..2.0, -1.0f64..1.0, 0.0f64..1.5)
        .prop_map(|(g1, g2, delta, eta)| ModelParams::new(g1, g2, delta, eta, 0.0).unwrap())
}

fn matrix(d: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
        .prop_map(move |v| Mat::from_fn(d, d, |i, j| c64::new(v[i + d * j].0, v[i + d * j].1)))
}

/// `M M^dag / Tr`, a full-rank random state.
fn state(d: usize) -> impl Strategy<Value = DensityMatrix> {
    matrix(d).prop_map(|m| {
        let rho = &m * adjoint(&m);
        DensityMatrix::from_unnormalized(&rho).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn liouvillian_is_traceless(p in model(), rho in state(6)) {
        let l = build_rotating_liouvillian(&p, &FockSpace::new(6).unwrap());
        let out = l.apply_matrix(rho.matrix());
        prop_assert!(trace(&out).norm() < 1e-11);
    }

    #[test]
    fn liouvillian_preserves_hermiticity(p in model(), x in matrix(5)) {
        let l = build_rotating_liouvillian(&p, &FockSpace::new(5).unwrap());
        let lx_dag = adjoint(&l.apply_matrix(&x));
        let l_xdag = l.apply_matrix(&adjoint(&x));
        prop_assert!(max_abs_diff(&lx_dag, &l_xdag) < 1e-11);
    }

    #[test]
    fn parity_commutes_with_liouvillian(p in model(), x in matrix(7)) {
        let space = FockSpace::new(7).unwrap();
        let l = build_rotating_liouvillian(&p, &space);
        let z = parity_superoperator(&space);
        let lz = l.compose(&z).apply_matrix(&x);
        let zl = z.compose(&l).apply_matrix(&x);
        prop_assert!(max_abs_diff(&lz, &zl) < 1e-12);
    }

    #[test]
    fn sectors_do_not_mix(p in model()) {
        let space = FockSpace::new(6).unwrap();
        let l = build_rotating_liouvillian(&p, &space);
        let sectors = parity_sectors(&space);
        let mut odd = vec![false; l.dim()];
        for &i in &sectors.odd {
            odd[i] = true;
        }
        for j in 0..l.dim() {
            for (i, v) in l.column(j) {
                prop_assert!(odd[i] == odd[j] || v.norm() == 0.0, "({i},{j}) couples sectors");
            }
        }
    }

    #[test]
    fn spectrum_is_closed_under_conjugation(p in model(), parity in prop_oneof![Just(Parity::Even), Just(Parity::Odd)]) {
        let l = build_rotating_liouvillian(&p, &FockSpace::new(6).unwrap());
        let vals = sector_eigenvalues(&l, parity).unwrap();
        for v in &vals {
            let best = vals.iter().map(|w| (w - v.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-9 * (1.0 + v.norm()), "{v} has no partner");
            prop_assert!(v.re < 1e-9);
        }
    }

    #[test]
    fn steady_state_is_a_state(p in model()) {
        let l = build_rotating_liouvillian(&p, &FockSpace::new(8).unwrap());
        let ss = steady_state_direct(&l).unwrap();
        prop_assert!(ss.min_eigenvalue().unwrap() > -1e-9);
        prop_assert!((trace(ss.matrix()).re - 1.0).abs() < 1e-10);
        prop_assert!(max_abs_diff(ss.matrix(), ss.parity_conjugate().matrix()) < 1e-8);
    }

    #[test]
    fn rk4_evolution_stays_physical(p in model(), rho in state(5)) {
        let l = build_rotating_liouvillian(&p, &FockSpace::new(5).unwrap());
        let ev = evolve_rotating(&rho, &l, &[0.0, 0.5, 1.0], Backend::Rk4 { max_dt: None }).unwrap();
        for s in &ev.states {
            prop_assert!((trace(s) - c64::new(1.0, 0.0)).norm() < 1e-10);
            prop_assert!(max_abs_diff(s, &adjoint(s)) < 1e-10);
            prop_assert!(DensityMatrix::from_unnormalized(s).unwrap().min_eigenvalue().unwrap() > -1e-8);
        }
    }

    #[test]
    fn meanfield_flow_is_odd(p in model(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let a = c64::new(re, im);
        prop_assert_eq!(mf_rhs(-a, &p), -mf_rhs(a, &p));
    }

    #[test]
    fn regime_matches_frequency_existence(p in model()) {
        let limit = p.delta * p.delta - 4.0 * p.eta * p.eta > 0.0;
        prop_assert_eq!(classify(&p).regime == Regime::LimitCycle, limit);
        prop_assert_eq!(limit_cycle_frequency(&p).is_ok(), limit);
    }

    #[test]
    fn free_phase_spectrum_is_closed_form(delta in -1.0f64..1.0, n_ex in 0.5f64..1e4) {
        let sp = ScaledParams::new(delta, 0.0, n_ex).unwrap();
        let op = build_phase_fp(PhaseSector::OddB, 32, &sp).unwrap();
        let vals = phase_spectrum(&op).unwrap();
        for nu in vals {
            // eta = 0 is diagonal: each value is i delta n - 3 n^2 / (8 n_ex) for some odd n.
            let n = (-nu.re * 8.0 * n_ex / 3.0).sqrt().round();
            let n = if nu.im * delta < 0.0 { -n } else { n };
            let want = c64::new(-3.0 * n * n / (8.0 * n_ex), delta * n);
            prop_assert!((nu - want).norm() <= 1e-12 * want.norm().max(1e-300), "{nu} vs {want}");
        }
    }

    #[test]
    fn csv_round_trips_floats(xs in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..20)) {
        let mut t = CsvTable::new(Provenance::new("test", None), &["x", "i"]);
        for (i, &x) in xs.iter().enumerate() {
            t.push(vec![Cell::F(x), i.into()]).unwrap();
        }
        let back = CsvTable::parse(std::str::from_utf8(&t.to_bytes().unwrap()).unwrap()).unwrap();
        prop_assert_eq!(back.column_f64("x").unwrap(), xs);
        prop_assert_eq!(back.provenance, t.provenance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn langevin_is_seed_deterministic(seed in any::<u64>(), eta_ratio in 0.0f64..3.0) {
        let p = ScaledParams::from_ratios(0.1, eta_ratio, 10.0).unwrap();
        let cfg = LangevinConfig::new(max_dt(&p), 500, 3, seed).with_save_every(50);
        let a = simulate_phase(&p, &cfg, 0.3).unwrap();
        let b = simulate_phase(&p, &cfg, 0.3).unwrap();
        prop_assert_eq!(&a.real, &b.real);
        let single = simulate_phase(&p, &LangevinConfig { n_trajectories: 1, ..cfg }, 0.3).unwrap();
        prop_assert_eq!(&single.real[0], &a.real[0]);
    }
}
