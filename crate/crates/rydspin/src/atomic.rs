//! One-body Rydberg structure in static fields aligned with Z.
//!
//! Levels follow the Rydberg-Ritz formula E = -Ry/(n - delta_l)^2; the
//! Z-aligned electric and magnetic fields conserve m, so the one-body
//! Hamiltonian is assembled and diagonalized per m block. Eigenstates are
//! labeled by their zero-field parents (circular nC+/-, elliptical nE+/-),
//! with adiabatic tracking along an electric-field ramp for states whose
//! Stark mixing is too strong for direct overlap labeling.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::angular::{dipole_angular, sin2_theta_element};
use crate::constants::{
    BOHR_MAGNETON_HZ_PER_GAUSS, DIAMAGNETIC_HZ_PER_G2_A02, RYDBERG_HZ, STARK_HZ_PER_EA0_V_CM,
};
use crate::error::{Result, RydError};
use crate::linalg::sym_eigen;
use crate::radial::{effective_n, QuantumDefectTable, RadialCache};

/// A bare |n, l, m> level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BareState {
    pub n: u32,
    pub l: u32,
    pub m: i32,
}

impl BareState {
    pub fn new(n: u32, l: u32, m: i32) -> Result<Self> {
        if n < 1 || l >= n || m.unsigned_abs() > l {
            return Err(RydError::InvalidQuantumNumbers { n, l, m });
        }
        Ok(Self { n, l, m })
    }

    /// |m| = l = n - 1.
    pub fn is_circular(&self) -> bool {
        self.l == self.n - 1 && self.m.unsigned_abs() == self.l
    }

    /// l = n - 2 and |m| = n - 2.
    pub fn is_elliptical(&self) -> bool {
        self.n >= 2 && self.l == self.n - 2 && self.m.unsigned_abs() == self.n - 2
    }
}

impl fmt::Display for BareState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.n, self.l, self.m)
    }
}

/// Zero-field parent label of a dressed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateLabel {
    /// nC+ / nC-: circular, sign = sign of m.
    Circular { n: u32, positive_m: bool },
    /// nE+ / nE-: elliptical, sign = sign of m.
    Elliptical { n: u32, positive_m: bool },
    Generic,
}

impl StateLabel {
    pub fn of(state: &BareState) -> Self {
        if state.is_circular() {
            StateLabel::Circular {
                n: state.n,
                positive_m: state.m >= 0,
            }
        } else if state.is_elliptical() {
            StateLabel::Elliptical {
                n: state.n,
                positive_m: state.m >= 0,
            }
        } else {
            StateLabel::Generic
        }
    }

    /// The defining bare state of a circular/elliptical label.
    pub fn bare_state(&self) -> Option<BareState> {
        match *self {
            StateLabel::Circular { n, positive_m } => {
                let l = n - 1;
                let m = if positive_m { l as i32 } else { -(l as i32) };
                BareState::new(n, l, m).ok()
            }
            StateLabel::Elliptical { n, positive_m } => {
                let l = n.checked_sub(2)?;
                let m = if positive_m { l as i32 } else { -(l as i32) };
                BareState::new(n, l, m).ok()
            }
            StateLabel::Generic => None,
        }
    }

    /// Parse labels like "55C-", "73E+".
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let bad = || RydError::Config(format!("cannot parse state label '{text}'"));
        if s.len() < 3 {
            return Err(bad());
        }
        let (body, sign) = s.split_at(s.len() - 1);
        let positive_m = match sign {
            "+" => true,
            "-" => false,
            _ => return Err(bad()),
        };
        let (digits, kind) = body.split_at(body.len() - 1);
        let n: u32 = digits.parse().map_err(|_| bad())?;
        match kind {
            "C" | "c" => Ok(StateLabel::Circular { n, positive_m }),
            "E" | "e" => Ok(StateLabel::Elliptical { n, positive_m }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateLabel::Circular { n, positive_m } => {
                write!(f, "{n}C{}", if positive_m { '+' } else { '-' })
            }
            StateLabel::Elliptical { n, positive_m } => {
                write!(f, "{n}E{}", if positive_m { '+' } else { '-' })
            }
            StateLabel::Generic => write!(f, "generic"),
        }
    }
}

/// Static fields along Z. Construction warns (but proceeds) outside the
/// intended experimental windows E_dc <= 20 V/cm and B <= 1000 G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub e_dc_v_cm: f64,
    pub b_gauss: f64,
    pub include_diamagnetic: bool,
}

impl FieldConfig {
    pub fn new(e_dc_v_cm: f64, b_gauss: f64, include_diamagnetic: bool) -> Self {
        if !(0.0..=20.0).contains(&e_dc_v_cm) {
            log::warn!("electric field {e_dc_v_cm} V/cm outside the intended [0, 20] V/cm window");
        }
        if !(0.0..=1000.0).contains(&b_gauss) {
            log::warn!("magnetic field {b_gauss} G outside the intended [0, 1000] G window");
        }
        Self {
            e_dc_v_cm,
            b_gauss,
            include_diamagnetic,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, true)
    }

    pub fn with_e_dc(&self, e_dc_v_cm: f64) -> Self {
        Self {
            e_dc_v_cm,
            ..*self
        }
    }

    pub fn with_b(&self, b_gauss: f64) -> Self {
        Self { b_gauss, ..*self }
    }
}

/// Level energy -Ry/(n - delta_l)^2 in h*Hz.
pub fn bare_energy(n: u32, l: u32, defects: &QuantumDefectTable) -> Result<f64> {
    let nu = effective_n(n, l, defects)?;
    Ok(-RYDBERG_HZ / (nu * nu))
}

/// Full dipole element <s2|d_q|s1> in e*a0: radial integral times the
/// spherical-tensor angular factor. Zero unless dl = +-1 and m2 = m1 + q.
pub fn bare_dipole_element(
    s1: &BareState,
    s2: &BareState,
    q: i32,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
) -> Result<f64> {
    if s2.m != s1.m + q || (s1.l as i64 - s2.l as i64).abs() != 1 {
        return Ok(0.0);
    }
    let ang = dipole_angular(s2.l, s2.m, q, s1.l, s1.m);
    if ang == 0.0 {
        return Ok(0.0);
    }
    let rad = cache.dipole(s1.n, s1.l, s2.n, s2.l, defects)?;
    Ok(rad * ang)
}

/// Basis of one m block: all (n, l) with the given m, n within a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneBodyBasis {
    pub m: i32,
    pub states: Vec<BareState>,
}

impl OneBodyBasis {
    /// All states with this m and n in [n_min, n_max], ordered by (n, l).
    pub fn span(m: i32, n_min: u32, n_max: u32) -> Self {
        let mut states = Vec::new();
        for n in n_min..=n_max {
            for l in m.unsigned_abs()..n {
                states.push(BareState { n, l, m });
            }
        }
        Self { m, states }
    }

    /// Validate an explicit state list: uniform m, no duplicates.
    pub fn from_states(states: Vec<BareState>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(RydError::Config("empty one-body basis".into()));
        };
        let m = first.m;
        let mut seen = std::collections::HashSet::new();
        for s in &states {
            if s.m != m {
                return Err(RydError::MixedMBlock { block: m, found: s.m });
            }
            if !seen.insert((s.n, s.l)) {
                return Err(RydError::Config(format!("duplicate basis state {s}")));
            }
        }
        Ok(Self { m, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &BareState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Assemble the one-body Hamiltonian of an m block in h*Hz:
/// bare Rydberg-Ritz energies, orbital Zeeman mu_B*B*m, Stark e*E_dc*z
/// (couples dl = +-1), and optionally the diamagnetic term
/// (e^2 B^2 / 8 m_e) r^2 sin^2(theta) (couples dl = 0, +-2).
pub fn build_one_body_hamiltonian(
    basis: &OneBodyBasis,
    fields: &FieldConfig,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
) -> Result<DMatrix<f64>> {
    if basis.is_empty() {
        return Err(RydError::Config("empty one-body basis".into()));
    }
    for s in &basis.states {
        if s.m != basis.m {
            return Err(RydError::MixedMBlock {
                block: basis.m,
                found: s.m,
            });
        }
    }
    let n = basis.len();
    let mut h = DMatrix::zeros(n, n);
    let zeeman = BOHR_MAGNETON_HZ_PER_GAUSS * fields.b_gauss * basis.m as f64;
    let stark = STARK_HZ_PER_EA0_V_CM * fields.e_dc_v_cm;
    let dia = if fields.include_diamagnetic {
        DIAMAGNETIC_HZ_PER_G2_A02 * fields.b_gauss * fields.b_gauss
    } else {
        0.0
    };
    for i in 0..n {
        let si = &basis.states[i];
        h[(i, i)] = bare_energy(si.n, si.l, defects)? + zeeman;
        for j in 0..=i {
            let sj = &basis.states[j];
            let dl = si.l as i64 - sj.l as i64;
            let mut v = 0.0;
            if dl.abs() == 1 && stark != 0.0 {
                v += stark
                    * dipole_angular(si.l, si.m, 0, sj.l, sj.m)
                    * cache.dipole(si.n, si.l, sj.n, sj.l, defects)?;
            }
            if dia != 0.0 && (dl == 0 || dl.abs() == 2) {
                let ang = sin2_theta_element(si.l, sj.l, basis.m);
                if ang != 0.0 {
                    v += dia * ang * cache.matrix_element(si.n, si.l, sj.n, sj.l, 2, defects)?;
                }
            }
            if v != 0.0 {
                h[(i, j)] += v;
                if i != j {
                    h[(j, i)] += v;
                }
            }
        }
    }
    Ok(h)
}

/// Dense diagonalization of one m block; eigenvalues ascending,
/// eigenvectors orthonormal columns. Rejects non-Hermitian input.
pub fn diagonalize_block(h: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    sym_eigen(h)
}

/// A labeled eigenstate of one m block.
#[derive(Debug, Clone)]
pub struct DressedState {
    pub label: StateLabel,
    /// h*Hz.
    pub energy: f64,
    /// Amplitudes over the block basis, phase-fixed so the dominant bare
    /// amplitude is real positive.
    pub composition: DVector<f64>,
    /// |<target bare | dressed>|^2.
    pub dominant_overlap: f64,
    /// Eigenstate index within the sorted block spectrum.
    pub index: usize,
}

/// Label the eigenstate with maximal overlap on the target bare state.
/// Fails with AmbiguousLabel when that overlap is <= 0.5 (avoided crossing
/// or missing basis state): use the adiabatic ramp variant instead.
pub fn identify_dressed_state(
    basis: &OneBodyBasis,
    energies: &DVector<f64>,
    vectors: &DMatrix<f64>,
    target: &BareState,
) -> Result<DressedState> {
    let label = StateLabel::of(target);
    let ti = basis.index_of(target).ok_or_else(|| RydError::AmbiguousLabel {
        label: label.to_string(),
        overlap: 0.0,
    })?;
    let mut best = 0usize;
    let mut best_w = -1.0;
    for c in 0..vectors.ncols() {
        let w = vectors[(ti, c)] * vectors[(ti, c)];
        if w > best_w {
            best_w = w;
            best = c;
        }
    }
    if best_w <= 0.5 {
        return Err(RydError::AmbiguousLabel {
            label: label.to_string(),
            overlap: best_w,
        });
    }
    let mut composition = vectors.column(best).into_owned();
    if composition[ti] < 0.0 {
        composition.neg_mut();
    }
    Ok(DressedState {
        label,
        energy: energies[best],
        composition,
        dominant_overlap: best_w,
        index: best,
    })
}

/// Number of ramp steps used for adiabatic electric-field tracking.
pub fn default_ramp_steps(e_dc_v_cm: f64) -> usize {
    ((4.0 * e_dc_v_cm).ceil() as usize).max(12)
}

/// Label a dressed state by adiabatic continuation along an electric-field
/// ramp at fixed B: identify the parent at E = 0 by direct overlap, then
/// follow the eigenvector through E_k = E * (k/K)^2 by overlap continuity.
/// This keeps labels stable through strong Stark mixing (e.g. elliptical
/// states inside nearly degenerate manifolds), where the direct overlap can
/// drop below 0.5. The recorded dominant_overlap is with the bare parent at
/// the final fields and may legitimately be small.
pub fn identify_dressed_state_tracked(
    basis: &OneBodyBasis,
    fields: &FieldConfig,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
    target: &BareState,
) -> Result<DressedState> {
    let label = StateLabel::of(target);
    let ti = basis.index_of(target).ok_or_else(|| RydError::AmbiguousLabel {
        label: label.to_string(),
        overlap: 0.0,
    })?;
    let steps = default_ramp_steps(fields.e_dc_v_cm);
    let mut tracked: Option<DVector<f64>> = None;
    let mut out: Option<(usize, DVector<f64>, DVector<f64>)> = None;
    for k in 0..=steps {
        let frac = k as f64 / steps as f64;
        let fk = FieldConfig {
            e_dc_v_cm: fields.e_dc_v_cm * frac * frac,
            ..*fields
        };
        let h = build_one_body_hamiltonian(basis, &fk, defects, cache)?;
        let (energies, vectors) = diagonalize_block(&h)?;
        let best = match &tracked {
            None => {
                // E = 0: direct identification must be unambiguous
                let d = identify_dressed_state(basis, &energies, &vectors, target)?;
                d.index
            }
            Some(prev) => {
                let proj = vectors.tr_mul(prev);
                (0..proj.len())
                    .max_by(|&a, &b| (proj[a] * proj[a]).total_cmp(&(proj[b] * proj[b])))
                    .unwrap()
            }
        };
        tracked = Some(vectors.column(best).into_owned());
        if k == steps {
            out = Some((best, energies, vectors.column(best).into_owned()));
        }
    }
    let (index, energies, mut composition) = out.unwrap();
    let overlap = composition[ti] * composition[ti];
    if composition[ti] < 0.0 {
        composition.neg_mut();
    }
    Ok(DressedState {
        label,
        energy: energies[index],
        composition,
        dominant_overlap: overlap,
        index,
    })
}

/// One diagonalized m block of a dressed registry.
#[derive(Debug, Clone)]
pub struct RegistryBlock {
    pub basis: OneBodyBasis,
    /// Sorted ascending, h*Hz.
    pub energies: DVector<f64>,
    /// Orthonormal eigenvector columns over `basis`.
    pub vectors: DMatrix<f64>,
}

impl RegistryBlock {
    pub fn m(&self) -> i32 {
        self.basis.m
    }
}

/// Reference to one dressed state: (block position, eigenstate index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DressedIndex {
    pub block: usize,
    pub state: usize,
}

/// All diagonalized m blocks of one atom at fixed fields.
#[derive(Debug, Clone)]
pub struct AtomRegistry {
    pub fields: FieldConfig,
    pub defects: QuantumDefectTable,
    /// Sorted by m.
    pub blocks: Vec<RegistryBlock>,
}

impl AtomRegistry {
    pub fn build(
        m_values: &[i32],
        n_min: u32,
        n_max: u32,
        fields: &FieldConfig,
        defects: &QuantumDefectTable,
        cache: &RadialCache,
    ) -> Result<Self> {
        let mut ms: Vec<i32> = m_values.to_vec();
        ms.sort_unstable();
        ms.dedup();
        let mut blocks = Vec::with_capacity(ms.len());
        for &m in &ms {
            let basis = OneBodyBasis::span(m, n_min, n_max);
            if basis.is_empty() {
                return Err(RydError::Config(format!(
                    "m block {m} is empty for n in [{n_min}, {n_max}]"
                )));
            }
            let h = build_one_body_hamiltonian(&basis, fields, defects, cache)?;
            let (energies, vectors) = diagonalize_block(&h)?;
            blocks.push(RegistryBlock {
                basis,
                energies,
                vectors,
            });
        }
        Ok(Self {
            fields: *fields,
            defects: defects.clone(),
            blocks,
        })
    }

    pub fn block_position(&self, m: i32) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.m() == m)
            .ok_or(RydError::MissingBlock { m })
    }

    pub fn block(&self, m: i32) -> Result<&RegistryBlock> {
        Ok(&self.blocks[self.block_position(m)?])
    }

    pub fn energy(&self, idx: DressedIndex) -> f64 {
        self.blocks[idx.block].energies[idx.state]
    }

    /// Locate and label the dressed state for a circular/elliptical label,
    /// with adiabatic ramp tracking.
    pub fn labeled_state(&self, label: StateLabel, cache: &RadialCache) -> Result<(DressedIndex, DressedState)> {
        let target = label.bare_state().ok_or_else(|| {
            RydError::Config(format!("label {label} has no defining bare state"))
        })?;
        let pos = self.block_position(target.m)?;
        let block = &self.blocks[pos];
        let dressed = identify_dressed_state_tracked(
            &block.basis,
            &self.fields,
            &self.defects,
            cache,
            &target,
        )?;
        Ok((
            DressedIndex {
                block: pos,
                state: dressed.index,
            },
            dressed,
        ))
    }
}

/// Dressed dipole matrices <m+q block, dressed | d_q | m block, dressed>,
/// one per (q, source m) pair, in e*a0.
#[derive(Debug, Clone, Default)]
pub struct DressedDipoleSet {
    matrices: HashMap<(i32, i32), DMatrix<f64>>,
}

impl DressedDipoleSet {
    /// Rows index the m+q block eigenstates, columns the m block ones.
    pub fn get(&self, q: i32, m_from: i32) -> Result<&DMatrix<f64>> {
        self.matrices
            .get(&(q, m_from))
            .ok_or(RydError::MissingBlock { m: m_from + q })
    }

    pub fn contains(&self, q: i32, m_from: i32) -> bool {
        self.matrices.contains_key(&(q, m_from))
    }
}

/// Transform bare dipole matrices into the dressed eigenbases of every pair
/// of m blocks linked by q = 0, +-1.
pub fn dressed_dipole_matrices(
    registry: &AtomRegistry,
    cache: &RadialCache,
) -> Result<DressedDipoleSet> {
    let mut set = DressedDipoleSet::default();
    for src in &registry.blocks {
        for q in -1..=1 {
            let m_to = src.m() + q;
            let Some(dst) = registry.blocks.iter().find(|b| b.m() == m_to) else {
                continue;
            };
            let rows = dst.basis.len();
            let cols = src.basis.len();
            let mut bare = DMatrix::zeros(rows, cols);
            for (i, s2) in dst.basis.states.iter().enumerate() {
                for (j, s1) in src.basis.states.iter().enumerate() {
                    bare[(i, j)] =
                        bare_dipole_element(s1, s2, q, &registry.defects, cache)?;
                }
            }
            let dressed = dst.vectors.tr_mul(&(bare * &src.vectors));
            set.matrices.insert((q, src.m()), dressed);
        }
    }
    Ok(set)
}
