use tbaf::config::preset;
use tbaf::pipeline::verify_oracle;

fn main() -> tbaf::Result<()> {
    let mut cfg = preset("paper-fig2")?;
    cfg.waveforms.code_len = 64;
    cfg.waveforms.btp = None;
    cfg.waveforms.oversample = Some(2);
    let r = verify_oracle(&cfg, 25, 1e-6, 1)?;
    for p in r.points.iter().take(5) {
        println!("delay {:+.3e} s  doppler {:+.0} Hz  factored {:.6e}  simulated {:.6e}", p.delay, p.doppler, p.factored, p.oracle);
    }
    println!("{} points, max relative error {:.2e}, pass {}", r.points.len(), r.max_rel_error, r.pass);
    Ok(())
}
