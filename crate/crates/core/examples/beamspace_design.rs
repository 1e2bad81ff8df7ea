use tbaf::ambiguity::cross_af_matrix;
use tbaf::geometry::{beam_centroids, ula, PhaseCenters, TargetParams};
use tbaf::tb_design::{design_af_constrained, design_spatial, min_feasible_delta, AfConstraints, DesignSpec};
use tbaf::waveforms::gen_polyphase;

fn main() -> tbaf::Result<()> {
    let deg = |x: f64| x.to_radians();
    let base = ula(8, 8, 1e9)?;
    let spec = DesignSpec::sector(deg(-15.0), deg(15.0), deg(10.0), 4, 0.38);
    let r = design_spatial(&spec, &base)?;
    let c = r.matrix()?;
    println!("spatial: {:?}, max in-sector residual {:.4}, {} iterations", r.status, r.objective, r.iterations);
    let gains = c.gains(&base.steering_tx(&TargetParams::planar(0.0, 0.0, 0.0)));
    println!("  broadside gains {:?}", gains.iter().map(|g| format!("{:.3}", g.norm())).collect::<Vec<_>>());

    let sc = base.with_phase_centers(PhaseCenters::Explicit(beam_centroids(&c.c, &ula(8, 8, 1e9)?.tx)?))?;
    let ws = gen_polyphase(4, 128, 20e-6, 1)?;
    let band: Vec<f64> = (-12..=12).filter(|i: &i32| i.abs() >= 6).map(|i| i as f64 * 5e3).collect();
    let stack = cross_af_matrix(&ws, &[0], &band)?;
    let af = AfConstraints {
        dopplers: band,
        delays: vec![0.0],
        angles: vec![0.0],
        delta: 1.5,
        theta0: 0.0,
        doppler0: 0.0,
    };
    let spec = spec.with_af(af);
    let r = design_af_constrained(&spec, &sc, &stack)?;
    println!("ambiguity-constrained: {:?}, min slack {:.2e}", r.status, r.report.min_slack);
    let lo = min_feasible_delta(&spec, &sc, &stack, 0.0, 4.0, 12)?;
    println!("smallest feasible ceiling ~ {lo:?}");
    Ok(())
}
