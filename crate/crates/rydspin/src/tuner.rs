//! Interspecies resonance tuning: the Foerster defect between the CC and CE
//! spin transitions and the magnetic field B_res that zeroes it.

use nalgebra::DVector;

use crate::atomic::{
    build_one_body_hamiltonian, diagonalize_block, identify_dressed_state_tracked, FieldConfig,
    OneBodyBasis,
};
use crate::error::{Result, RydError};
use crate::radial::{QuantumDefectTable, RadialCache};
use crate::species::SpinSpecies;

/// Follows one labeled level through a magnetic-field sweep at fixed E_dc.
/// The first evaluation labels the state by the adiabatic electric-field
/// ramp; subsequent evaluations at nearby B reuse overlap continuity with
/// the previous eigenvector, which is cheap and immune to label flips at
/// avoided crossings.
struct LevelTracker<'a> {
    basis: OneBodyBasis,
    target: crate::atomic::BareState,
    fields: FieldConfig,
    defects: &'a QuantumDefectTable,
    cache: &'a RadialCache,
    last: Option<DVector<f64>>,
}

impl<'a> LevelTracker<'a> {
    fn new(
        species: &SpinSpecies,
        up: bool,
        n_pad: u32,
        fields: &FieldConfig,
        defects: &'a QuantumDefectTable,
        cache: &'a RadialCache,
    ) -> Result<Self> {
        let label = if up { species.up } else { species.down };
        let target = label
            .bare_state()
            .ok_or_else(|| RydError::Config(format!("label {label} has no bare state")))?;
        let (n_min, n_max) = species.n_window(n_pad);
        Ok(Self {
            basis: OneBodyBasis::span(target.m, n_min, n_max),
            target,
            fields: *fields,
            defects,
            cache,
            last: None,
        })
    }

    fn energy_at(&mut self, b_gauss: f64) -> Result<f64> {
        let fields = self.fields.with_b(b_gauss);
        match self.last.take() {
            None => {
                let d = identify_dressed_state_tracked(
                    &self.basis,
                    &fields,
                    self.defects,
                    self.cache,
                    &self.target,
                )?;
                self.last = Some(d.composition.clone());
                Ok(d.energy)
            }
            Some(prev) => {
                let h =
                    build_one_body_hamiltonian(&self.basis, &fields, self.defects, self.cache)?;
                let (energies, vectors) = diagonalize_block(&h)?;
                let proj = vectors.tr_mul(&prev);
                let best = (0..proj.len())
                    .max_by(|&a, &b| (proj[a] * proj[a]).total_cmp(&(proj[b] * proj[b])))
                    .unwrap();
                self.last = Some(vectors.column(best).into_owned());
                Ok(energies[best])
            }
        }
    }
}

/// The Foerster defect and its ingredients at one field setting.
#[derive(Debug, Clone)]
pub struct DefectReport {
    /// Delta = (E_up^CC - E_down^CC) - (E_up^CE - E_down^CE), h*Hz.
    pub delta_hz: f64,
    /// E_up - E_down of the CC species, h*Hz.
    pub cc_transition_hz: f64,
    /// E_up - E_down of the CE species, h*Hz.
    pub ce_transition_hz: f64,
    pub fields: FieldConfig,
}

/// Evaluates Delta(B) at fixed E_dc, reusing per-level trackers across B.
const PAD: u32 = 5;

pub struct DefectEvaluator<'a> {
    trackers: [LevelTracker<'a>; 4],
    fields: FieldConfig,
}

impl<'a> DefectEvaluator<'a> {
    pub fn new(
        fields: &FieldConfig,
        cc: &SpinSpecies,
        ce: &SpinSpecies,
        defects: &'a QuantumDefectTable,
        cache: &'a RadialCache,
    ) -> Result<Self> {
        Ok(Self {
            trackers: [
                LevelTracker::new(cc, true, PAD, fields, defects, cache)?,
                LevelTracker::new(cc, false, PAD, fields, defects, cache)?,
                LevelTracker::new(ce, true, PAD, fields, defects, cache)?,
                LevelTracker::new(ce, false, PAD, fields, defects, cache)?,
            ],
            fields: *fields,
        })
    }

    pub fn report_at(&mut self, b_gauss: f64) -> Result<DefectReport> {
        let e = [
            self.trackers[0].energy_at(b_gauss)?,
            self.trackers[1].energy_at(b_gauss)?,
            self.trackers[2].energy_at(b_gauss)?,
            self.trackers[3].energy_at(b_gauss)?,
        ];
        let cc_transition_hz = e[0] - e[1];
        let ce_transition_hz = e[2] - e[3];
        Ok(DefectReport {
            delta_hz: cc_transition_hz - ce_transition_hz,
            cc_transition_hz,
            ce_transition_hz,
            fields: self.fields.with_b(b_gauss),
        })
    }

    pub fn delta_at(&mut self, b_gauss: f64) -> Result<f64> {
        Ok(self.report_at(b_gauss)?.delta_hz)
    }
}

/// One-shot Foerster defect at the given fields.
pub fn forster_defect(
    fields: &FieldConfig,
    cc: &SpinSpecies,
    ce: &SpinSpecies,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
) -> Result<DefectReport> {
    DefectEvaluator::new(fields, cc, ce, defects, cache)?.report_at(fields.b_gauss)
}

/// Result of the B_res search.
#[derive(Debug, Clone)]
pub struct BResReport {
    /// Resonant field on the 0.01 G grid.
    pub b_res_gauss: f64,
    /// Defect at B_res, h*Hz.
    pub residual_delta_hz: f64,
    /// All coarse-scan sign-change brackets (lower edges), for diagnostics.
    pub brackets_gauss: Vec<f64>,
}

/// Find the magnetic field zeroing the Foerster defect at fixed E_dc:
/// coarse 1 G bracketing over `b_range`, bisection, then selection of the
/// 0.01 G grid point minimizing |Delta|. With several brackets the caller
/// must pick one via `root_index`; `None` demands a unique root.
pub fn find_b_res(
    fields: &FieldConfig,
    cc: &SpinSpecies,
    ce: &SpinSpecies,
    b_range: (f64, f64),
    root_index: Option<usize>,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
) -> Result<BResReport> {
    let (lo, hi) = b_range;
    if !(lo >= 0.0 && hi > lo) {
        return Err(RydError::Config(format!("bad B range [{lo}, {hi}] G")));
    }
    let mut eval = DefectEvaluator::new(fields, cc, ce, defects, cache)?;
    // coarse 1 G scan
    let steps = ((hi - lo).ceil() as usize).max(1);
    let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::new(); // (b0, b1, d0, d1)
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let b = (lo + k as f64).min(hi);
        let d = eval.delta_at(b)?;
        if let Some((pb, pd)) = prev {
            if pd == 0.0 || pd.signum() != d.signum() {
                brackets.push((pb, b, pd, d));
            }
        }
        prev = Some((b, d));
        if b >= hi {
            break;
        }
    }
    if brackets.is_empty() {
        return Err(RydError::NoSignChange { lo, hi });
    }
    let picked = match root_index {
        Some(i) => *brackets.get(i).ok_or_else(|| RydError::Config(format!(
            "root index {i} out of range: only {} bracket(s)",
            brackets.len()
        )))?,
        None if brackets.len() == 1 => brackets[0],
        None => {
            return Err(RydError::MultipleRoots {
                brackets: brackets.iter().map(|b| b.0).collect(),
            })
        }
    };
    // bisection down to below the 0.01 G grid spacing
    let (mut b0, mut b1, mut d0, _d1) = picked;
    while b1 - b0 > 5e-3 {
        let mid = 0.5 * (b0 + b1);
        let dm = eval.delta_at(mid)?;
        if dm == 0.0 {
            b0 = mid;
            b1 = mid;
            break;
        }
        if dm.signum() == d0.signum() {
            b0 = mid;
            d0 = dm;
        } else {
            b1 = mid;
        }
    }
    // walk the 0.01 G grid to the local minimum of |Delta|
    let grid = |x: f64| (x * 100.0).round() / 100.0;
    let mut b_best = grid(0.5 * (b0 + b1));
    let mut d_best = eval.delta_at(b_best)?;
    loop {
        let left = grid(b_best - 0.01);
        let right = grid(b_best + 0.01);
        let dl = eval.delta_at(left)?;
        let dr = eval.delta_at(right)?;
        if dl.abs() < d_best.abs() && dl.abs() <= dr.abs() {
            b_best = left;
            d_best = dl;
        } else if dr.abs() < d_best.abs() {
            b_best = right;
            d_best = dr;
        } else {
            break;
        }
    }
    Ok(BResReport {
        b_res_gauss: b_best,
        residual_delta_hz: d_best,
        brackets_gauss: brackets.iter().map(|b| b.0).collect(),
    })
}
