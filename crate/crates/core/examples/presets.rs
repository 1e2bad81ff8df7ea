use tbaf::config::{preset, PRESETS};
use tbaf::pipeline::run_pipeline;

fn main() {
    let root = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("tbaf-presets"));
    for name in PRESETS {
        let cfg = preset(name).expect("preset");
        match run_pipeline(&cfg, Some(&root.join(name))) {
            Ok(out) => {
                println!("{name}: {}", out.dir.display());
                for s in &out.metadata.surfaces {
                    for c in &s.cuts {
                        println!("  {} {}: peak sidelobe {:?} dB", s.surface.name(), c.name, c.peak_sidelobe_db.map(|d| (d * 10.0).round() / 10.0));
                    }
                }
            }
            Err(e) => println!("{name}: exit {} ({e})", e.exit_code()),
        }
    }
}
