use tbaf::ambiguity::symmetric_axis;
use tbaf::geometry::{ula, PhaseCenters, TargetParams};
use tbaf::tb_core::{mimo_af, pa_af, tb_af, AfQuery, TbMatrix};
use tbaf::waveforms::gen_polyphase;

fn main() -> tbaf::Result<()> {
    let m = 8;
    let base = ula(m, 8, 1e9)?;
    let ws = gen_polyphase(m, 128, 10e-6, 1)?.with_energy(m as f64)?;
    let q = AfQuery::delay_doppler(
        TargetParams::planar(0.3, 0.0, 0.0),
        (-32..=32).collect(),
        symmetric_axis(2e5, 65),
    );

    let sc = base.clone().with_phase_centers(PhaseCenters::ElementPositions)?;
    let tb = tb_af(&sc, &ws, &TbMatrix::identity(m), &q)?;
    let mimo = mimo_af(&sc, &ws, &q)?;
    let d = tb.values.iter().zip(mimo.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("C = I: max |tb - mimo| = {d:.3e} (peak {:.3})", mimo.peak());

    let ws1 = ws.take(1)?;
    let w = base.steering_tx(&TargetParams::planar(0.25, 0.0, 0.0));
    let sc1 = base.with_phase_centers(PhaseCenters::ReferenceElement)?;
    let tb1 = tb_af(&sc1, &ws1, &TbMatrix::from_weights(&w), &q)?;
    let pa = pa_af(&sc1, &ws1, &w, &q)?;
    let d = tb1.values.iter().zip(pa.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("C = w: max |tb - pa| = {d:.3e} (peak {:.3})", pa.peak());
    Ok(())
}
