use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

use tbaf::ambiguity::{full_period_doppler_axis, grid_volume, symmetric_axis, woodward};
use tbaf::clear_region::{bound_best, bound_worst};
use tbaf::geometry::{ula, PhaseCenters, TargetParams};
use tbaf::tb_core::{cut, mimo_af, pa_af, tb_af, to_db, AfQuery, CutSpec, Provenance, TbMatrix};
use tbaf::tb_design::{complexify, realify};
use tbaf::waveforms::{gen_gaussian, gen_polyphase, validate, ENERGY_TOL};

fn full_support_volume(ws: &tbaf::waveforms::WaveformSet, k: usize) -> f64 {
    let l = ws.len() as i64;
    let lags: Vec<i64> = (-(l - 1)..l).collect();
    let dop = full_period_doppler_axis(ws.sample_rate(), 2 * ws.len());
    grid_volume(&woodward(ws.row(k), ws.sample_rate(), &lags, &dop).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polyphase_volume_is_unit(k in 1usize..5, len in 8usize..80, os in 1usize..3, tp in 1e-6f64..1e-3) {
        prop_assume!(len >= k);
        let ws = gen_polyphase(k, len, tp, os).unwrap();
        for j in 0..k {
            let v = full_support_volume(&ws, j);
            prop_assert!((v - 1.0).abs() <= 0.02, "waveform {j}: {v}");
        }
    }

    #[test]
    fn gaussian_volume_is_unit(k in 1usize..4, len in 4usize..96, seed in any::<u64>()) {
        let ws = gen_gaussian(k, len, 1e-5, seed).unwrap();
        for e in validate(&ws).energies {
            prop_assert!((e - 1.0).abs() < ENERGY_TOL);
        }
        for j in 0..k {
            let v = full_support_volume(&ws, j);
            prop_assert!((v - 1.0).abs() <= 0.02, "waveform {j}: {v}");
        }
    }

    #[test]
    fn realify_round_trip(m in 1usize..7, k in 1usize..5, vals in prop::collection::vec(-10.0f64..10.0, 72)) {
        let c = Array2::from_shape_fn((m, k), |(i, j)| Complex64::new(vals[2 * (i * k + j)], vals[2 * (i * k + j) + 1]));
        let x = realify(&c);
        prop_assert_eq!(x.len(), 2 * m * k);
        prop_assert_eq!(complexify(&x, m, k).unwrap(), c);
    }

    #[test]
    fn bound_algebra(vk in 1e-12f64..1e-3, n in 1usize..16, eta in 0.0f64..1.0) {
        let rho = (n * n) as f64;
        let base = bound_worst(vk, rho, n, 1, eta);
        for k in [1usize, 2, 4, 8] {
            let w = bound_worst(vk, rho, n, k, eta);
            prop_assert_eq!(w.valid, base.valid);
            if let (Some(a), Some(b)) = (w.value, base.value) {
                prop_assert!((a * k as f64 - b).abs() <= 1e-12 * b.abs());
            }
        }
        let best = bound_best(vk, rho, n, 0.0);
        let worst = bound_worst(vk, rho, n, 4, 0.0);
        if let (Some(b), Some(w)) = (best.value, worst.value) {
            prop_assert!((b - 4.0 * w).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn identity_tb_is_mimo(theta in -1.2f64..1.2, seed in any::<u64>()) {
        let sc = ula(3, 2, 1e9).unwrap().with_phase_centers(PhaseCenters::ElementPositions).unwrap();
        let ws = gen_gaussian(3, 24, 1e-5, seed).unwrap().with_energy(3.0).unwrap();
        let q = AfQuery::delay_doppler(TargetParams::planar(theta, 0.0, 0.0), (-6..=6).collect(), symmetric_axis(2e5, 7));
        let a = tb_af(&sc, &ws, &TbMatrix::identity(3), &q).unwrap();
        let b = mimo_af(&sc, &ws, &q).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * a.peak());
        }
    }

    #[test]
    fn single_beam_tb_is_pa(theta in -1.2f64..1.2, re in prop::collection::vec(-1.0f64..1.0, 8)) {
        let sc = ula(4, 3, 1e9).unwrap().with_phase_centers(PhaseCenters::ReferenceElement).unwrap();
        let ws = gen_polyphase(1, 16, 1e-5, 1).unwrap();
        let w: Vec<Complex64> = (0..4).map(|i| Complex64::new(re[2 * i], re[2 * i + 1])).collect();
        let q = AfQuery::delay_doppler(TargetParams::planar(theta, 0.0, 0.0), (-5..=5).collect(), symmetric_axis(1e5, 5));
        let c = TbMatrix::new(Array2::from_shape_fn((4, 1), |(i, _)| w[i]), Provenance::PaWeight).unwrap();
        let a = tb_af(&sc, &ws, &c, &q).unwrap();
        let b = pa_af(&sc, &ws, &w, &q).unwrap();
        let scale = a.peak().max(1e-300);
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn unit_peak_is_zero_db_at_match(theta in -1.0f64..1.0, seed in any::<u64>()) {
        let sc = ula(4, 4, 1e9).unwrap().with_phase_centers(PhaseCenters::Subarrays(2)).unwrap();
        let ws = gen_gaussian(2, 32, 1e-5, seed).unwrap();
        let c = TbMatrix::new(Array2::from_elem((4, 2), Complex64::new(0.5, 0.0)), Provenance::File).unwrap();
        let q = AfQuery::delay_doppler(TargetParams::planar(theta, 0.0, 0.0), (-8..=8).collect(), symmetric_axis(1e5, 9));
        let g = tb_af(&sc, &ws, &c, &q).unwrap().unit_peak().unwrap();
        prop_assert_eq!(g.peak(), 1.0);
        let cu = cut(&g, CutSpec::ZeroDoppler).unwrap();
        prop_assert!(cu.values_db.iter().all(|&d| d <= 0.0));
        prop_assert_eq!(to_db(g.peak(), g.peak()), 0.0);
    }
}
