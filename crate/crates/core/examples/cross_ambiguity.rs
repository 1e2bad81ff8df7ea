use tbaf::ambiguity::{cross_af_matrix, full_period_doppler_axis, grid_volume, symmetric_axis, woodward};
use tbaf::waveforms::gen_polyphase;

fn main() -> tbaf::Result<()> {
    let ws = gen_polyphase(4, 64, 10e-6, 1)?;
    let fs = ws.sample_rate();
    let l = ws.len() as i64;

    // Woodward volume over the full support.
    let lags: Vec<i64> = (-(l - 1)..l).collect();
    let dop = full_period_doppler_axis(fs, 2 * ws.len());
    for k in 0..ws.count() {
        let g = woodward(ws.row(k), fs, &lags, &dop)?;
        println!("waveform {k}: volume {:.6}", grid_volume(&g));
    }

    let stack = cross_af_matrix(&ws, &[-2, -1, 0, 1, 2], &symmetric_axis(2.0 / ws.pulse_width(), 5))?;
    let x = stack.matrix(2, 2);
    println!("X(0, 0) diagonal: {:?}", x.diag().iter().map(|z| format!("{:.3}", z.norm())).collect::<Vec<_>>());
    for lag in [1usize, 3] {
        let x = stack.matrix(lag, 2);
        let worst = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!("lag {}: max |X_jk| = {worst:.4}", stack.lags[lag]);
    }
    Ok(())
}
