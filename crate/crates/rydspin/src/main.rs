//! Command-line interface: dressed levels, resonance search, pair
//! coefficients, scans, dynamics, and radial-cache administration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rydspin::atomic::{AtomRegistry, FieldConfig};
use rydspin::config::{
    parse_scan_config, parse_simulate_config, BFieldMode, ScanConfig, SpeciesConfig,
    SpeciesPairKind, ThetaGrid, CSV_VERSION_COMMENT,
};
use rydspin::error::{Result, RydError};
use rydspin::radial::{
    radial_matrix_element, QuantumDefectTable, RadialCache, CACHE_HEADER,
};
use rydspin::scan::{run_scan, run_simulate};
use rydspin::species::SpinSpecies;
use rydspin::tuner::find_b_res;

#[derive(Parser)]
#[command(name = "rydspin", version, about = "Two-species Rydberg spin models")]
struct Cli {
    /// Radial-integral cache file, loaded before and saved after the run.
    #[arg(long, global = true)]
    cache_file: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SpeciesArgs {
    /// CC circular level n (up = nC, down = (n+1)C).
    #[arg(long, default_value_t = 55)]
    cc_n: u32,
    /// Use positive m for the CC levels.
    #[arg(long)]
    cc_positive_m: bool,
    /// CE circular level n' (up = n'C, down = (n'+step)E).
    #[arg(long, default_value_t = 71)]
    ce_n: u32,
    /// CE elliptical step (1 or 2).
    #[arg(long, default_value_t = 2)]
    ce_step: u32,
    /// Use negative m for the CE levels.
    #[arg(long)]
    ce_negative_m: bool,
}

impl SpeciesArgs {
    fn config(&self) -> SpeciesConfig {
        SpeciesConfig {
            cc_n: self.cc_n,
            cc_positive_m: self.cc_positive_m,
            ce_n: self.ce_n,
            ce_step: self.ce_step,
            ce_positive_m: !self.ce_negative_m,
        }
    }
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Electric field along z, V/cm.
    #[arg(long, default_value_t = 6.0)]
    e_dc: f64,
    /// Magnetic field along z, Gauss.
    #[arg(long, default_value_t = 784.07)]
    b: f64,
    /// Disable the diamagnetic term.
    #[arg(long)]
    no_diamagnetic: bool,
}

impl FieldArgs {
    fn config(&self) -> FieldConfig {
        FieldConfig::new(self.e_dc, self.b, !self.no_diamagnetic)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the dressed spin-level energies of one species.
    Levels {
        /// Which encoding to inspect: cc or ce.
        #[arg(long, value_parser = ["cc", "ce"])]
        kind: String,
        #[command(flatten)]
        species: SpeciesArgs,
        #[command(flatten)]
        fields: FieldArgs,
    },
    /// Find the resonant magnetic field per electric-field value.
    Bres {
        /// Electric-field values, V/cm.
        #[arg(long, required = true, num_args = 1..)]
        e_dc: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        b_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        b_max: f64,
        /// Bracket to refine when several sign changes exist.
        #[arg(long, default_value_t = 0)]
        root_index: usize,
        #[arg(long)]
        no_diamagnetic: bool,
        #[command(flatten)]
        species: SpeciesArgs,
    },
    /// Evaluate the spin coefficients of one pair geometry.
    Paircoeffs {
        /// Species pair: cc-cc, ce-ce, or cc-ce.
        #[arg(long, value_parser = ["cc-cc", "ce-ce", "cc-ce"])]
        pair: String,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 7.0)]
        distance: f64,
        /// Solve for the resonant magnetic field instead of using --b.
        #[arg(long)]
        auto_b: bool,
        #[command(flatten)]
        species: SpeciesArgs,
        #[command(flatten)]
        fields: FieldArgs,
    },
    /// Run a coefficient scan described by a TOML config file.
    Scan {
        config: PathBuf,
    },
    /// Run a small-array dynamics calculation from a TOML config file.
    Simulate {
        config: PathBuf,
    },
    /// Administer the radial-integral cache file.
    Cache {
        #[command(subcommand)]
        op: CacheCmd,
    },
}

#[derive(Subcommand)]
enum CacheCmd {
    /// Print the number of cached entries.
    List { file: PathBuf },
    /// Recompute a 1% sample and report corrupt rows by line number.
    Verify { file: PathBuf },
    /// Delete the cache file.
    Clear { file: PathBuf },
}

fn species_of(kind: &str, cfg: &SpeciesConfig) -> Result<SpinSpecies> {
    match kind {
        "cc" => Ok(cfg.cc()),
        "ce" => cfg.ce(),
        other => Err(RydError::Config(format!("unknown species kind '{other}'"))),
    }
}

fn cmd_levels(
    kind: &str,
    species: &SpeciesArgs,
    fields: &FieldArgs,
    cache: &RadialCache,
) -> Result<()> {
    let sp = species_of(kind, &species.config())?;
    let defects = QuantumDefectTable::hydrogenic();
    let (n_min, n_max) = sp.n_window(2);
    let reg = AtomRegistry::build(
        &sp.m_values(),
        n_min,
        n_max,
        &fields.config(),
        &defects,
        cache,
    )?;
    let (up, _) = reg.labeled_state(sp.up, cache)?;
    let (down, _) = reg.labeled_state(sp.down, cache)?;
    println!("{CSV_VERSION_COMMENT}");
    println!("role,label,energy_hz");
    println!("up,{},{:.10e}", sp.up, reg.energy(up));
    println!("down,{},{:.10e}", sp.down, reg.energy(down));
    Ok(())
}

fn cmd_bres(
    e_dc: &[f64],
    b_range: (f64, f64),
    root_index: usize,
    diamagnetic: bool,
    species: &SpeciesArgs,
    cache: &RadialCache,
) -> Result<()> {
    let cfg = species.config();
    let cc = cfg.cc();
    let ce = cfg.ce()?;
    let defects = QuantumDefectTable::hydrogenic();
    println!("{CSV_VERSION_COMMENT}");
    println!("e_dc_V_per_cm,b_res_gauss,residual_delta_hz");
    for &e in e_dc {
        let fields = FieldConfig::new(e, 0.0, diamagnetic);
        let report = find_b_res(
            &fields,
            &cc,
            &ce,
            b_range,
            Some(root_index),
            &defects,
            cache,
        )?;
        println!(
            "{e:.10e},{:.2},{:.10e}",
            report.b_res_gauss, report.residual_delta_hz
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_paircoeffs(
    pair: &str,
    theta: f64,
    phi: f64,
    distance: f64,
    auto_b: bool,
    species: &SpeciesArgs,
    fields: &FieldArgs,
    cache: &RadialCache,
) -> Result<()> {
    let species_pair = match pair {
        "cc-cc" => SpeciesPairKind::CcCc,
        "ce-ce" => SpeciesPairKind::CeCe,
        "cc-ce" => SpeciesPairKind::CcCe,
        other => return Err(RydError::Config(format!("unknown pair '{other}'"))),
    };
    let b = if auto_b {
        BFieldMode::Auto {
            min_gauss: 0.0,
            max_gauss: 1000.0,
            root_index: 0,
        }
    } else {
        BFieldMode::Fixed { gauss: fields.b }
    };
    let cfg = ScanConfig {
        species_pair,
        species: species.config(),
        theta: ThetaGrid {
            start_rad: theta,
            stop_rad: theta,
            points: 1,
        },
        phi_rad: phi,
        distance_um: distance,
        e_dc_v_per_cm: vec![fields.e_dc],
        b,
        include_diamagnetic: !fields.no_diamagnetic,
        n_pad: rydspin::pair::DEFAULT_N_PAD,
        m_pad: rydspin::pair::DEFAULT_M_PAD,
        delta_e_cut_ghz: rydspin::pair::DEFAULT_DELTA_E_CUT_GHZ,
        total_m_window: 2,
        kappa_delta_e_cut_ghz: 8.0,
        kappa_m_pad: 2,
        output: "-".into(),
    };
    let outcome = run_scan(&cfg, cache)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", outcome.csv);
    Ok(())
}

fn cmd_scan(config: &PathBuf, cache: &RadialCache) -> Result<()> {
    let (cfg, warnings) = parse_scan_config(config)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("effective settings:\n{}", cfg.effective_toml());
    let outcome = run_scan(&cfg, cache)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &outcome.output {
        eprintln!(
            "wrote {} rows ({} failed, {} resumed) to {}",
            outcome.total_rows,
            outcome.failed_rows,
            outcome.resumed_rows,
            path.display()
        );
    } else {
        print!("{}", outcome.csv);
    }
    Ok(())
}

fn cmd_simulate(config: &PathBuf, cache: &RadialCache) -> Result<()> {
    let (cfg, warnings) = parse_simulate_config(config)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let outcome = run_simulate(&cfg, cache)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if cfg.output == "-" {
        print!("{}", outcome.series_csv);
    } else {
        eprintln!("wrote dynamics of {} sites to {}", outcome.n_sites, cfg.output);
    }
    Ok(())
}

/// Verify a cache file row by row: recompute roughly `fraction` of the
/// entries and report disagreements beyond 1e-9 relative, by line number.
fn verify_cache_file(path: &PathBuf, fraction: f64) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CACHE_HEADER => {}
        other => {
            return Err(RydError::Cache(format!(
                "bad header line: {:?}",
                other.map(|(_, h)| h)
            )))
        }
    }
    let step = (1.0 / fraction.clamp(1e-6, 1.0)).round().max(1.0) as usize;
    let mut bad = Vec::new();
    let mut sampled = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if (idx - 1) % step != 0 {
            continue;
        }
        sampled += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = || -> Option<(u32, u32, u32, u32, f64, f64, f64)> {
            if fields.len() != 7 {
                return None;
            }
            Some((
                fields[0].parse().ok()?,
                fields[1].parse().ok()?,
                fields[2].parse().ok()?,
                fields[3].parse().ok()?,
                fields[4].parse().ok()?,
                fields[5].parse().ok()?,
                fields[6].parse().ok()?,
            ))
        };
        let Some((n1, l1, n2, l2, d1, d2, cached)) = parse() else {
            bad.push(format!("line {}: malformed row", idx + 1));
            continue;
        };
        let defects = QuantumDefectTable::from_pairs(&[(l1, d1), (l2, d2)]);
        let fresh = radial_matrix_element(n1, l1, n2, l2, 1, &defects)?;
        if (fresh - cached).abs() / fresh.abs().max(1e-30) > 1e-9 {
            bad.push(format!(
                "line {}: cached {cached:.11e} but recomputed {fresh:.11e}",
                idx + 1
            ));
        }
    }
    eprintln!("verified {sampled} sampled rows");
    Ok(bad)
}

fn cmd_cache(op: &CacheCmd) -> Result<()> {
    match op {
        CacheCmd::List { file } => {
            if !file.exists() {
                println!("0 entries (no cache file at {})", file.display());
                return Ok(());
            }
            let cache = RadialCache::new();
            let n = cache.load(file)?;
            println!("{n} entries in {}", file.display());
        }
        CacheCmd::Verify { file } => {
            let bad = verify_cache_file(file, 0.01)?;
            if bad.is_empty() {
                println!("0 mismatches");
            } else {
                for b in &bad {
                    println!("{b}");
                }
                return Err(RydError::Cache(format!("{} corrupt row(s)", bad.len())));
            }
        }
        CacheCmd::Clear { file } => {
            if file.exists() {
                std::fs::remove_file(file)?;
            }
            println!("cleared {}", file.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cache = RadialCache::new();
    if let Some(path) = &cli.cache_file {
        if path.exists() {
            let n = cache.load(path)?;
            eprintln!("loaded {n} cached radial integrals");
        }
    }
    let result = match &cli.cmd {
        Cmd::Levels {
            kind,
            species,
            fields,
        } => cmd_levels(kind, species, fields, &cache),
        Cmd::Bres {
            e_dc,
            b_min,
            b_max,
            root_index,
            no_diamagnetic,
            species,
        } => cmd_bres(
            e_dc,
            (*b_min, *b_max),
            *root_index,
            !no_diamagnetic,
            species,
            &cache,
        ),
        Cmd::Paircoeffs {
            pair,
            theta,
            phi,
            distance,
            auto_b,
            species,
            fields,
        } => cmd_paircoeffs(
            pair, *theta, *phi, *distance, *auto_b, species, fields, &cache,
        ),
        Cmd::Scan { config } => cmd_scan(config, &cache),
        Cmd::Simulate { config } => cmd_simulate(config, &cache),
        Cmd::Cache { op } => cmd_cache(op),
    };
    if result.is_ok() {
        if let Some(path) = &cli.cache_file {
            cache.save(path)?;
        }
    }
    result
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
