use tbaf::ambiguity::symmetric_axis;
use tbaf::clear_region::{clear_region_report, ClearRegionInput, Region, Shape};
use tbaf::geometry::{ula, PhaseCenters, TargetParams};
use tbaf::tb_core::{tb_af, AfQuery, TbMatrix};
use tbaf::waveforms::gen_polyphase;

fn main() -> tbaf::Result<()> {
    let m = 4;
    let sc = ula(m, 4, 1e9)?.with_phase_centers(PhaseCenters::ElementPositions)?;
    let ws = gen_polyphase(m, 64, 10e-6, 1)?.with_energy(m as f64)?;
    let target = TargetParams::planar(0.0, 0.0, 0.0);
    let q = AfQuery::delay_doppler(target, (-63..=63).collect(), symmetric_axis(2.0 / ws.pulse_width(), 129));
    let c = TbMatrix::identity(m);
    let grid = tb_af(&sc, &ws, &c, &q)?;

    for eta in [0.01, 0.03, 0.1] {
        let r = clear_region_report(&ClearRegionInput {
            sc: &sc,
            ws: &ws,
            c: &c,
            target,
            grid: &grid,
            eta,
            region: Region::Full,
            shape: Shape::Ellipse,
        })?;
        println!(
            "eta {eta}: V_K {:.3e}  empirical {:.3e}  worst {:?}  best {:?}  cross/auto {:.2}",
            r.v_k, r.empirical_area, r.bound_worst.value, r.bound_best.value, r.cross_ratio
        );
    }
    Ok(())
}
