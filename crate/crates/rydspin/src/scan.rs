//! Coefficient scans over (theta, e_dc) grids: deterministic CSV emission,
//! per-point error capture, and a row-complete journal so interrupted scans
//! resume without recomputation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::atomic::FieldConfig;
use crate::config::{BFieldMode, ScanConfig, CSV_VERSION_COMMENT};
use crate::effective::{
    compute_kappa, extract_pair_coefficients, sw_exact_direct_rotation, sw_second_order,
    EffectivePair, SpinCoefficients, DEFAULT_RESONANCE_GUARD_HZ,
};
use crate::error::{Result, RydError};
use crate::linalg::DavidsonOptions;
use crate::pair::{
    angular_factors, prepare_pair_atoms, select_pair_basis, AngularCoupling, PairGeometry,
    PairProblem, PairSelection,
};
use crate::radial::{QuantumDefectTable, RadialCache};
use crate::species::SpinSpecies;
use crate::tuner::find_b_res;

/// Header of the coefficient CSV (plus a trailing per-row error column).
pub const COEFF_CSV_HEADER: &str = "theta_rad,phi_rad,distance_um,e_dc_V_per_cm,b_gauss,\
species_pair,U_uu,U_ud,U_du,U_dd,C_pm_re,C_pm_im,C_pp_re,C_pp_im,C_pz_re,C_pz_im,\
C_zp_re,C_zp_im,C_p_j_re,C_p_j_im,C_p_k_re,C_p_k_im,C_zz,kappa,error";

/// Everything needed to evaluate pair coefficients at one field setting:
/// the full problem for the reduction and a reduced basis for the
/// isolation metric (dense diagonalization).
pub struct PairScanContext {
    pub species_j: SpinSpecies,
    pub species_k: SpinSpecies,
    pub fields: FieldConfig,
    problem: PairProblem,
    kappa_problem: PairProblem,
}

impl PairScanContext {
    pub fn build(cfg: &ScanConfig, fields: &FieldConfig, cache: &RadialCache) -> Result<Self> {
        let (species_j, species_k) = cfg.pair_species()?;
        let defects = QuantumDefectTable::hydrogenic();
        let build_problem = |m_pad: i32, cut_ghz: f64| -> Result<PairProblem> {
            let atoms = prepare_pair_atoms(
                &species_j,
                &species_k,
                fields,
                cfg.n_pad,
                m_pad,
                &defects,
                cache,
            )?;
            let basis = select_pair_basis(
                &atoms,
                PairSelection {
                    delta_e_cut_hz: cut_ghz * 1.0e9,
                    total_m_window: cfg.total_m_window,
                },
            )?;
            PairProblem::new(&basis, &atoms)
        };
        let problem = build_problem(cfg.m_pad, cfg.delta_e_cut_ghz)?;
        let kappa_problem = build_problem(cfg.kappa_m_pad, cfg.kappa_delta_e_cut_ghz)?;
        Ok(Self {
            species_j,
            species_k,
            fields: *fields,
            problem,
            kappa_problem,
        })
    }

    /// Coefficients at one geometry: perturbative reduction with exact
    /// fallback near intermediate-state resonances.
    pub fn evaluate(&self, geometry: &PairGeometry) -> Result<SpinCoefficients> {
        let eff = self.evaluate_pair(geometry)?;
        let v = angular_factors(geometry);
        let dav = DavidsonOptions::default();
        let kappa = compute_kappa(&self.kappa_problem, &v, &dav)?.kappa;
        extract_pair_coefficients(&eff, kappa)
    }

    /// The reduced pair block itself, with first-order bookkeeping intact.
    pub fn evaluate_pair(&self, geometry: &PairGeometry) -> Result<EffectivePair> {
        let v = angular_factors(geometry);
        match sw_second_order(&self.problem, &v, DEFAULT_RESONANCE_GUARD_HZ) {
            Ok(eff) => Ok(eff),
            Err(RydError::NearResonantIntermediate { .. }) => {
                sw_exact_direct_rotation(&self.problem, &v, &DavidsonOptions::default())
            }
            Err(e) => Err(e),
        }
    }

    /// Isolation metric alone, from the reduced metric basis.
    pub fn evaluate_kappa(&self, geometry: &PairGeometry) -> Result<f64> {
        let v = angular_factors(geometry);
        self.kappa_with_coupling(&v)
    }

    /// Isolation metric for an explicit coupling tensor (e.g. zeroed out).
    pub fn kappa_with_coupling(&self, v: &AngularCoupling) -> Result<f64> {
        Ok(compute_kappa(&self.kappa_problem, v, &DavidsonOptions::default())?.kappa)
    }

    /// Run a computation against the full pair problem.
    pub fn with_problem<T>(&self, f: impl FnOnce(&PairProblem) -> T) -> T {
        f(&self.problem)
    }

    pub fn species_pair_label(&self) -> String {
        format!("{}|{}", self.species_j, self.species_k)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.10e}")
}

fn sanitize_error(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

/// One CSV row of the coefficient schema.
pub fn coefficient_row(
    geometry: &PairGeometry,
    e_dc: f64,
    b_gauss: f64,
    species_pair: &str,
    outcome: &Result<SpinCoefficients>,
) -> String {
    let mut row = String::new();
    let _ = write!(
        row,
        "{},{},{},{},{},{}",
        fmt_f(geometry.theta),
        fmt_f(geometry.phi),
        fmt_f(geometry.distance_um),
        fmt_f(e_dc),
        fmt_f(b_gauss),
        species_pair
    );
    match outcome {
        Ok(c) => {
            for u in c.u {
                let _ = write!(row, ",{}", fmt_f(u));
            }
            for z in [c.c_pm, c.c_pp, c.c_pz, c.c_zp, c.c_p_j, c.c_p_k] {
                let _ = write!(row, ",{},{}", fmt_f(z.re), fmt_f(z.im));
            }
            let _ = write!(row, ",{},{},", fmt_f(c.c_zz), fmt_f(c.kappa));
        }
        Err(e) => {
            row.push_str(&",".repeat(18));
            let _ = write!(row, ",{}", sanitize_error(&format!("{e}")));
        }
    }
    row
}

/// Result summary of a finished scan.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub csv: String,
    pub output: Option<PathBuf>,
    pub total_rows: usize,
    pub failed_rows: usize,
    pub resumed_rows: usize,
    pub warnings: Vec<String>,
}

fn config_signature(cfg: &ScanConfig) -> u64 {
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    cfg.effective_toml().hash(&mut hasher);
    hasher.finish()
}

fn load_journal(path: &Path, sig: u64) -> HashMap<usize, String> {
    let mut done = HashMap::new();
    let Ok(text) = std::fs::read_to_string(path) else {
        return done;
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == format!("# journal {sig:016x}") => {}
        _ => return done, // stale or foreign journal: ignore it
    }
    for line in lines {
        if let Some((idx, row)) = line.split_once('\t') {
            if let Ok(i) = idx.parse::<usize>() {
                done.insert(i, row.to_string());
            }
        }
    }
    done
}

/// Resolve the magnetic field for one electric-field value.
pub fn resolve_b_gauss(
    cfg: &ScanConfig,
    e_dc: f64,
    cache: &RadialCache,
) -> Result<f64> {
    match &cfg.b {
        BFieldMode::Fixed { gauss } => Ok(*gauss),
        BFieldMode::Auto {
            min_gauss,
            max_gauss,
            root_index,
        } => {
            let defects = QuantumDefectTable::hydrogenic();
            let fields = FieldConfig::new(e_dc, 0.0, cfg.include_diamagnetic);
            let report = find_b_res(
                &fields,
                &cfg.species.cc(),
                &cfg.species.ce()?,
                (*min_gauss, *max_gauss),
                Some(*root_index),
                &defects,
                cache,
            )?;
            Ok(report.b_res_gauss)
        }
    }
}

/// Run a full coefficient scan. Row order is deterministic: the electric
/// fields in config order, the theta grid inside each. Failed points keep
/// their row with the error column set. When `cfg.output` is `-` the CSV is
/// only returned, without journaling.
pub fn run_scan(cfg: &ScanConfig, cache: &RadialCache) -> Result<ScanOutcome> {
    let warnings = cfg.validate()?;
    let thetas = cfg.theta.values();
    let to_file = cfg.output != "-";
    let journal_path = PathBuf::from(format!("{}.journal", cfg.output));
    let sig = config_signature(cfg);
    let done = if to_file {
        load_journal(&journal_path, sig)
    } else {
        HashMap::new()
    };
    let resumed_rows = done.len();
    let mut journal = if to_file {
        let fresh = done.is_empty();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)?;
        if fresh {
            // truncate any stale journal and start a new one
            f = std::fs::File::create(&journal_path)?;
            writeln!(f, "# journal {sig:016x}")?;
        }
        Some(f)
    } else {
        None
    };

    let mut rows: Vec<String> = Vec::with_capacity(cfg.e_dc_v_per_cm.len() * thetas.len());
    let mut failed_rows = 0usize;
    let mut idx = 0usize;
    for &e_dc in &cfg.e_dc_v_per_cm {
        let block_pending = (0..thetas.len()).any(|i| !done.contains_key(&(idx + i)));
        // field resolution and basis setup once per electric field
        let setup: Result<(f64, PairScanContext)> = if block_pending {
            resolve_b_gauss(cfg, e_dc, cache).and_then(|b| {
                let fields = FieldConfig::new(e_dc, b, cfg.include_diamagnetic);
                Ok((b, PairScanContext::build(cfg, &fields, cache)?))
            })
        } else {
            Err(RydError::Config("unused: all rows journaled".into()))
        };
        for &theta in &thetas {
            let row = if let Some(r) = done.get(&idx) {
                r.clone()
            } else {
                let row = match &setup {
                    Ok((b, ctx)) => {
                        let outcome = PairGeometry::new(cfg.distance_um, theta, cfg.phi_rad)
                            .and_then(|g| ctx.evaluate(&g).map(|c| (g, c)));
                        match outcome {
                            Ok((g, c)) => coefficient_row(
                                &g,
                                e_dc,
                                *b,
                                &ctx.species_pair_label(),
                                &Ok(c),
                            ),
                            Err(e) => {
                                let g = PairGeometry::new(cfg.distance_um, theta, cfg.phi_rad)
                                    .unwrap_or_else(|_| {
                                        PairGeometry::new(1.0, 0.0, 0.0).unwrap()
                                    });
                                coefficient_row(
                                    &g,
                                    e_dc,
                                    *b,
                                    &ctx.species_pair_label(),
                                    &Err(e),
                                )
                            }
                        }
                    }
                    Err(e) => {
                        let g = PairGeometry::new(cfg.distance_um.max(1e-9), theta, cfg.phi_rad)
                            .unwrap_or_else(|_| PairGeometry::new(1.0, 0.0, 0.0).unwrap());
                        coefficient_row(
                            &g,
                            e_dc,
                            f64::NAN,
                            "unresolved",
                            &Err(RydError::Config(format!("{e}"))),
                        )
                    }
                };
                if let Some(f) = journal.as_mut() {
                    writeln!(f, "{idx}\t{row}")?;
                    f.flush()?;
                }
                row
            };
            if row.split(',').next_back().map(str::is_empty) == Some(false) {
                failed_rows += 1;
            }
            rows.push(row);
            idx += 1;
        }
    }

    let mut csv = String::new();
    csv.push_str(CSV_VERSION_COMMENT);
    csv.push('\n');
    csv.push_str(COEFF_CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    let output = if to_file {
        std::fs::write(&cfg.output, &csv)?;
        let _ = std::fs::remove_file(&journal_path);
        Some(PathBuf::from(&cfg.output))
    } else {
        None
    };
    Ok(ScanOutcome {
        csv,
        output,
        total_rows: rows.len(),
        failed_rows,
        resumed_rows,
        warnings,
    })
}

/// Result summary of a finished dynamics run.
#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub series_csv: String,
    pub correlators_csv: Option<String>,
    pub n_sites: usize,
    pub warnings: Vec<String>,
}

/// Resolve the magnetic field for a dynamics run; the auto mode takes the
/// two encodings from the geometry's site species.
fn resolve_simulate_b(
    cfg: &crate::config::SimulateConfig,
    sites: &[crate::model::AtomSite],
    cache: &RadialCache,
) -> Result<f64> {
    match &cfg.b {
        BFieldMode::Fixed { gauss } => Ok(*gauss),
        BFieldMode::Auto {
            min_gauss,
            max_gauss,
            root_index,
        } => {
            let cc = sites
                .iter()
                .map(|s| s.species)
                .find(|s| s.kind == crate::species::SpeciesKind::CC)
                .ok_or_else(|| {
                    RydError::Config(
                        "auto B needs a CC species among the sites to define the resonance"
                            .into(),
                    )
                })?;
            let ce = sites
                .iter()
                .map(|s| s.species)
                .find(|s| s.kind == crate::species::SpeciesKind::CE)
                .ok_or_else(|| {
                    RydError::Config(
                        "auto B needs a CE species among the sites to define the resonance"
                            .into(),
                    )
                })?;
            let defects = QuantumDefectTable::hydrogenic();
            let fields = FieldConfig::new(cfg.e_dc_v_per_cm, 0.0, cfg.include_diamagnetic);
            Ok(find_b_res(
                &fields,
                &cc,
                &ce,
                (*min_gauss, *max_gauss),
                Some(*root_index),
                &defects,
                cache,
            )?
            .b_res_gauss)
        }
    }
}

/// Run a small-array dynamics calculation end to end: build the spin model
/// from the geometry file, assemble the dense Hamiltonian, evolve the
/// initial product state, and emit the observable CSVs.
pub fn run_simulate(
    cfg: &crate::config::SimulateConfig,
    cache: &RadialCache,
) -> Result<SimulateOutcome> {
    let mut warnings = cfg.validate()?;
    let text = std::fs::read_to_string(&cfg.geometry_file)?;
    let sites = crate::model::parse_geometry(&text)?;
    if sites.is_empty() {
        return Err(RydError::Config("geometry file defines no sites".into()));
    }
    let b = resolve_simulate_b(cfg, &sites, cache)?;
    let fields = FieldConfig::new(cfg.e_dc_v_per_cm, b, cfg.include_diamagnetic);
    let opts = crate::model::ModelOptions {
        selection: PairSelection {
            delta_e_cut_hz: cfg.delta_e_cut_ghz * 1.0e9,
            total_m_window: 2,
        },
        n_pad: cfg.n_pad,
        m_pad: cfg.m_pad,
        toggles: crate::model::TermToggles {
            include_single_raise: cfg.include_single_raise,
            include_double_raise: cfg.include_double_raise,
            include_conditioned_raise: cfg.include_conditioned_raise,
        },
        ..crate::model::ModelOptions::default()
    };
    let model = crate::model::build_model(&sites, &fields, &opts, cache)?;
    warnings.extend(model.warnings.iter().cloned());
    let h = crate::model::assemble_many_body_hamiltonian(&model, cfg.rotating_frame)?;
    let state = crate::dynamics::SpinStateVector::product(sites.len(), &cfg.initial.up_sites)?;
    let times = cfg.time.values();
    let states = crate::dynamics::evolve(&state, &h, &times)?;
    let series = crate::dynamics::measure(&times, &states, &cfg.correlator_pairs)?;
    let series_csv = series.to_csv(CSV_VERSION_COMMENT);
    if cfg.output != "-" {
        std::fs::write(&cfg.output, &series_csv)?;
    }
    let correlators_csv = if let Some(path) = &cfg.correlators_output {
        let csv = series.correlators_csv(CSV_VERSION_COMMENT);
        if path != "-" {
            std::fs::write(path, &csv)?;
        }
        Some(csv)
    } else {
        None
    };
    Ok(SimulateOutcome {
        series_csv,
        correlators_csv,
        n_sites: sites.len(),
        warnings,
    })
}
