use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tbaf::ambiguity::{cross_af_matrix, lag_axis, symmetric_axis};
use tbaf::clear_region::{clear_region_report, ClearRegionInput, Region, Shape};
use tbaf::config::{load_config, preset, DesignBlock, TbMode, WaveformKind, PRESETS};
use tbaf::geometry::TargetParams;
use tbaf::output::{read_grid_csv, sha256_hex, stack_csv, write_stack_bin};
use tbaf::pipeline::{build, run_pipeline, verify_oracle};
use tbaf::tb_core::{TbFile, TbMatrix};
use tbaf::waveforms::{gen_gaussian, gen_polyphase, gen_polyphase_btp, WaveformFile, WaveformSet};
use tbaf::{Error, Result};

#[derive(Parser)]
#[command(name = "tbaf", version, about = "Transmit-beamspace MIMO radar ambiguity toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Polyphase,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Spatial,
    Af,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Rectangle,
    Ellipse,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a waveform family and write it as JSON.
    GenWaveforms {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        len: usize,
        /// Pulse width in seconds.
        #[arg(long)]
        tp: f64,
        /// Time-bandwidth product (polyphase only).
        #[arg(long)]
        btp: Option<f64>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design a beamspace matrix for a scenario.
    DesignTb {
        /// TOML design block; overrides the scenario's `tb.design`.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Waveform JSON; overrides the scenario's waveform source.
        #[arg(long)]
        waveforms: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-ambiguity stack of a waveform family (CSV, or binary for `.bin`).
    CrossAf {
        #[arg(long)]
        waveforms: PathBuf,
        /// Half-span of the delay axis in seconds.
        #[arg(long)]
        tau_span: f64,
        /// Half-span of the Doppler axis in Hz.
        #[arg(long)]
        fd_span: f64,
        #[arg(long, default_value_t = 257)]
        fd_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the surfaces requested by a scenario config.
    AfSurface {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clear-region bounds and empirical area of a delay-Doppler surface.
    ClearRegion {
        /// Raw-scale TB grid CSV.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        tb: PathBuf,
        /// Half-widths `DELAY,DOPPLER` of a rectangular volume region.
        #[arg(long)]
        region: Option<String>,
        #[arg(long, value_enum, default_value = "ellipse")]
        shape: ShapeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the factored surface against the simulated receiver chain.
    VerifyOracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or print) a built-in scenario.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the scenario TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
}

fn gen_waveforms(kind: Kind, k: usize, len: usize, tp: f64, btp: Option<f64>, energy: Option<f64>, seed: u64) -> Result<WaveformSet> {
    let ws = match (kind, btp) {
        (Kind::Polyphase, Some(b)) => gen_polyphase_btp(k, len, tp, b)?,
        (Kind::Polyphase, None) => gen_polyphase(k, len, tp, 1)?,
        (Kind::Gaussian, _) => gen_gaussian(k, len, tp, seed)?,
    };
    match energy {
        Some(e) => ws.with_energy(e),
        None => Ok(ws),
    }
}

fn design_tb(spec: Option<&Path>, waveforms: Option<&Path>, scenario: &Path, mode: Mode, out: &Path) -> Result<()> {
    let mut cfg = load_config(scenario)?;
    cfg.tb.mode = match mode {
        Mode::Spatial => TbMode::Spatial,
        Mode::Af => TbMode::Af,
    };
    if let Some(p) = spec {
        let text = std::fs::read_to_string(p)?;
        let d: DesignBlock = toml::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", p.display())]))?;
        cfg.tb.design = Some(d);
    }
    if let Some(p) = waveforms {
        cfg.waveforms.kind = WaveformKind::File;
        cfg.waveforms.path = Some(p.to_path_buf());
    }
    cfg.validate()?;
    let hash = cfg.hash()?;
    let built = build(&cfg)?;
    let mut f = TbFile::from(&built.tb);
    f.config_hash = Some(hash.clone());
    std::fs::write(out, serde_json::to_string_pretty(&f)?)?;
    let report = serde_json::json!({ "config_hash": hash, "design": built.design });
    std::fs::write(out.with_extension("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn cross_af(waveforms: &Path, tau_span: f64, fd_span: f64, fd_points: usize, out: &Path) -> Result<()> {
    let bytes = std::fs::read(waveforms)?;
    let hash = sha256_hex(&bytes);
    let ws = WaveformSet::read_json(waveforms)?;
    let lags = lag_axis(tau_span, ws.sample_rate());
    let stack = cross_af_matrix(&ws, &lags, &symmetric_axis(fd_span, fd_points))?;
    if out.extension().is_some_and(|e| e == "bin") {
        let f = std::io::BufWriter::new(std::fs::File::create(out)?);
        write_stack_bin(f, &stack, ws.sample_rate(), &hash)
    } else {
        std::fs::write(out, stack_csv(&stack, &hash))?;
        Ok(())
    }
}

fn parse_region(s: Option<&str>) -> Result<Region> {
    let Some(s) = s else { return Ok(Region::Full) };
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("region {s:?}: expected DELAY,DOPPLER")))?;
    match v[..] {
        [d, f] => Ok(Region::Rectangle { half_delay: d, half_doppler: f }),
        _ => Err(Error::Parameter(format!("region {s:?}: expected DELAY,DOPPLER"))),
    }
}

fn clear_region(grid: &Path, eta: f64, scenario: &Path, tb: &Path, region: Option<&str>, shape: ShapeArg, out: &Path) -> Result<()> {
    let mut cfg = load_config(scenario)?;
    let c = TbMatrix::read_json(tb)?;
    cfg.tb.mode = TbMode::File;
    cfg.tb.path = Some(tb.to_path_buf());
    cfg.tb.beams = Some(c.beams());
    let built = build(&cfg)?;
    let (g, grid_hash) = read_grid_csv(grid)?;
    let input = ClearRegionInput {
        sc: &built.scenario,
        ws: &built.beams,
        c: &built.tb,
        target: TargetParams::planar(cfg.sweep.theta_deg.to_radians(), 0.0, 0.0),
        grid: &g,
        eta,
        region: parse_region(region)?,
        shape: match shape {
            ShapeArg::Rectangle => Shape::Rectangle,
            ShapeArg::Ellipse => Shape::Ellipse,
        },
    };
    let report = clear_region_report(&input)?;
    let json = serde_json::json!({
        "config_hash": cfg.hash()?,
        "grid_config_hash": grid_hash,
        "report": report,
    });
    std::fs::write(out, serde_json::to_string_pretty(&json)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenWaveforms { kind, k, len, tp, btp, energy, seed, out } => {
            let ws = gen_waveforms(kind, k, len, tp, btp, energy, seed)?;
            let mut f = WaveformFile::from(&ws);
            f.config_hash = Some(sha256_hex(format!("{k} {len} {tp} {btp:?} {energy:?} {seed}").as_bytes()));
            std::fs::write(out, serde_json::to_string(&f)?)?;
            Ok(())
        }
        Cmd::DesignTb { spec, waveforms, scenario, mode, out } => {
            design_tb(spec.as_deref(), waveforms.as_deref(), &scenario, mode, &out)
        }
        Cmd::CrossAf { waveforms, tau_span, fd_span, fd_points, out } => {
            cross_af(&waveforms, tau_span, fd_span, fd_points, &out)
        }
        Cmd::AfSurface { config, out } => {
            let cfg = load_config(&config)?;
            let r = run_pipeline(&cfg, out.as_deref())?;
            println!("{}", r.dir.display());
            Ok(())
        }
        Cmd::ClearRegion { grid, eta, scenario, tb, region, shape, out } => {
            clear_region(&grid, eta, &scenario, &tb, region.as_deref(), shape, &out)
        }
        Cmd::VerifyOracle { config, points, tol, seed, out } => {
            let cfg = load_config(&config)?;
            let r = verify_oracle(&cfg, points, tol, seed)?;
            let json = serde_json::json!({ "config_hash": cfg.hash()?, "seed": seed, "report": r });
            let text = serde_json::to_string_pretty(&json)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
            if r.pass {
                Ok(())
            } else {
                Err(Error::OracleMismatch(format!(
                    "max relative error {:.3e} exceeds {:.3e}",
                    r.max_rel_error, r.tolerance
                )))
            }
        }
        Cmd::Preset { name, out, print } => {
            let cfg = preset(&name)?;
            if print {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            let r = run_pipeline(&cfg, out.as_deref())?;
            println!("{}", r.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("TBAF_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: TBAF_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
