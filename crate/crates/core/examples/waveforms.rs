use tbaf::waveforms::{gen_gaussian, gen_polyphase_btp, validate};

fn main() -> tbaf::Result<()> {
    let ws = gen_polyphase_btp(8, 512, 60e-6, 256.0)?;
    let d = validate(&ws);
    println!("polyphase: K={} len={} fs={:.3e} Hz B={:.3e} Hz", ws.count(), ws.len(), ws.sample_rate(), ws.bandwidth());
    println!("  energies {:?}", d.energies.iter().map(|e| format!("{e:.12}")).collect::<Vec<_>>());
    println!("  max |gram offdiag| = {:.3e}", d.max_offdiag);

    let g = gen_gaussian(4, 1024, 60e-6, 7)?;
    let d = validate(&g);
    println!("gaussian: K={} max |gram offdiag| = {:.3e}", g.count(), d.max_offdiag);

    let path = std::env::temp_dir().join("tbaf-waveforms.json");
    ws.write_json(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
