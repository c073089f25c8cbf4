use ddfas_core::channel::*;
use ddfas_core::compression::{extract_reference, make_phase_ramp, replicate_ports};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = FasGeometry> {
    (1usize..12, 0.01f64..0.5, 0.0f64..std::f64::consts::FRAC_PI_2).prop_map(|(n, d, t)| FasGeometry {
        n_ports: n,
        spacing_over_lambda: d,
        elevation_rad: t,
        loading_eps: 1e-6,
    })
}

fn small_grid() -> GridConfig {
    GridConfig {
        n_tx: 3,
        n_doppler: 4,
        n_delay: 5,
        frame_duration_s: 1e-3,
        doppler_res_hz: GridConfig::median_bin_doppler_res(4, 1e-3, 35.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_symmetric_unit_diagonal_and_factorises(g in geometry()) {
        let c = build_fas_correlation(&g).unwrap();
        let n = g.n_ports;
        for i in 0..n {
            prop_assert_eq!(c.entries[(i, i)].re, 1.0);
            for j in 0..n {
                prop_assert_eq!(c.entries[(i, j)], c.entries[(j, i)]);
                prop_assert_eq!(c.entries[(i, j)].im, 0.0);
            }
        }
        let back = c.sqrt_factor.mul_adjoint(&c.sqrt_factor).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = c.entries[(i, j)].re + if i == j { g.loading_eps } else { 0.0 };
                prop_assert!((back[(i, j)].re - want).abs() <= 1e-10);
                prop_assert!(back[(i, j)].im.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn phase_ramp_round_trip(g in geometry(), seed in 0u64..10_000, q in 0usize..5000, paths in 0usize..8) {
        let cfg = small_grid();
        let params = SequenceParams { geometry: g, grid: cfg, n_paths: paths, rice_kappa: 2.0, mode: GenerationMode::PhaseRamp };
        let corr = build_fas_correlation(&g).unwrap();
        let scat = draw_scatterers(&cfg, g.n_ports, params.n_paths, params.rice_kappa, seed).unwrap();
        let frame = generate_frame(q, &g, &cfg, &scat, &corr, params.mode).unwrap();
        let reference = extract_reference(&frame, 0).unwrap();
        let rebuilt = replicate_ports(&reference, &make_phase_ramp(&g), &cfg).unwrap();
        let worst = frame.data.iter().zip(&rebuilt.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-10);
    }

    #[test]
    fn frame_energy_and_magnitudes_are_time_invariant(g in geometry(), seed in 0u64..10_000, q in 1usize..2000) {
        let cfg = small_grid();
        for mode in [GenerationMode::Correlated, GenerationMode::PhaseRamp] {
            let corr = build_fas_correlation(&g).unwrap();
            let scat = draw_scatterers(&cfg, g.n_ports, 6, 1.5, seed).unwrap();
            let a = generate_frame(0, &g, &cfg, &scat, &corr, mode).unwrap();
            let b = generate_frame(q, &g, &cfg, &scat, &corr, mode).unwrap();
            prop_assert!((a.energy() - b.energy()).abs() <= 1e-9 * a.energy());
            for (x, y) in a.data.iter().zip(&b.data) {
                prop_assert!((x.norm() - y.norm()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn path_powers_sum_to_one(seed in 0u64..10_000, paths in 1usize..16) {
        let s = draw_scatterers(&small_grid(), 2, paths, 1.0, seed).unwrap();
        let total: f64 = s.paths.iter().map(|p| p.power).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(s.paths.iter().all(|p| p.delay_bin >= 1 && p.power > 0.0));
    }
}
